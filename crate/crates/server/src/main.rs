use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use noveltrace::assess::NoveltyLabel;
use noveltrace::evalharness::{
    distribution, fit_bradley_terry, format_distribution, format_metrics, format_ratings, run_dataset,
    run_tournament, Ablation, Dimension, GroundTruth,
};
use noveltrace::pipeline::{EvaluationSettings, Pipeline, ProgressEvent};
use noveltrace_server::api::DEFAULT_MAX_CONCURRENT;
use noveltrace_server::{build_pipeline, router, AppState, ReportStore, RuntimeOptions};
use serde::Deserialize;
use tokio_util::sync::CancellationToken;

#[derive(Parser)]
#[command(name = "noveltrace", version, about = "Evidence-grounded novelty assessment for research papers")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Where reports and the HTTP cache live.
    #[arg(long, env = "NOVELTRACE_DATA_DIR", default_value = "data", global = true)]
    data_dir: PathBuf,
    /// Replay arXiv and Semantic Scholar from a recorded fixture directory.
    #[arg(long, env = "NOVELTRACE_FIXTURES", global = true)]
    fixtures: Option<PathBuf>,
    /// Answer all model calls with the offline mock.
    #[arg(long, env = "NOVELTRACE_MOCK", global = true, value_parser = clap::builder::BoolishValueParser::new(), action = clap::ArgAction::SetTrue)]
    mock: bool,
    /// Model roster (TOML).
    #[arg(long, env = "NOVELTRACE_MODELS", global = true)]
    models: Option<PathBuf>,
    /// Token prices (TOML).
    #[arg(long, env = "NOVELTRACE_PRICING", global = true)]
    pricing: Option<PathBuf>,
    /// OpenAI-compatible embeddings endpoint.
    #[arg(long, env = "NOVELTRACE_EMBEDDING_URL", global = true)]
    embedding_url: Option<String>,
    #[arg(long, env = "S2_API_KEY", hide_env_values = true, global = true)]
    s2_api_key: Option<String>,
    /// Per-request HTTP timeout in seconds.
    #[arg(long, default_value_t = 60, global = true)]
    timeout: u64,
}

impl Global {
    fn options(&self) -> RuntimeOptions {
        RuntimeOptions {
            data_dir: self.data_dir.clone(),
            fixtures: self.fixtures.clone(),
            mock: self.mock,
            models: self.models.clone(),
            pricing: self.pricing.clone(),
            embedding_url: self.embedding_url.clone(),
            s2_api_key: self.s2_api_key.clone(),
            timeout: Duration::from_secs(self.timeout),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "NOVELTRACE_ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[arg(long, default_value_t = DEFAULT_MAX_CONCURRENT)]
        max_concurrent: usize,
    },
    /// Evaluate an arXiv paper; progress goes to stderr, the result to stdout.
    Evaluate {
        arxiv_id: String,
        #[command(flatten)]
        settings: SettingsArgs,
        /// Write the result here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a title and abstract without full text.
    EvaluateAbstract {
        #[arg(long)]
        title: String,
        #[arg(long = "abstract")]
        abstract_text: String,
        #[command(flatten)]
        settings: SettingsArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Search arXiv by title.
    Search {
        query: String,
        #[arg(long, default_value_t = 10)]
        limit: usize,
    },
    /// Benchmark tooling.
    #[command(subcommand)]
    Harness(Harness),
}

#[derive(Args)]
struct SettingsArgs {
    #[arg(long, default_value_t = 20)]
    k_citations: usize,
    #[arg(long, default_value_t = 30)]
    k_recommended: usize,
    #[arg(long, default_value_t = 10)]
    k_related: usize,
    #[arg(long, default_value_t = 5)]
    k_samples: usize,
    /// Keep semantic matches published after the paper.
    #[arg(long)]
    no_date_filter: bool,
    /// Defaults to the roster's default model.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    no_citation: bool,
    #[arg(long)]
    no_semantic: bool,
    #[arg(long)]
    no_related: bool,
    #[arg(long)]
    no_graph: bool,
}

impl SettingsArgs {
    fn settings(&self) -> EvaluationSettings {
        EvaluationSettings {
            k_citations: self.k_citations,
            k_recommended: self.k_recommended,
            k_related: self.k_related,
            k_samples: self.k_samples,
            filter_by_date: !self.no_date_filter,
            model_id: self.model.clone().unwrap_or_default(),
            ablation: Ablation {
                no_citation: self.no_citation,
                no_semantic: self.no_semantic,
                no_related: self.no_related,
                no_graph: self.no_graph,
            },
        }
    }
}

#[derive(Subcommand)]
enum Harness {
    /// Per-year counts and novel rates of a ground-truth file.
    Distribution {
        #[arg(long)]
        truth: PathBuf,
    },
    /// Metrics of the predict-everything-novel baseline.
    Baseline {
        #[arg(long)]
        truth: PathBuf,
    },
    /// Evaluate every paper (ids are arXiv ids) under ablation variants.
    Run {
        #[arg(long)]
        truth: PathBuf,
        /// Comma-separated subset of: full, no-citation, no-semantic, no-related, no-graph.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, default_value_t = 2)]
        parallelism: usize,
        #[arg(long)]
        model: Option<String>,
        /// Also write the per-paper predictions as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pairwise-judge a set of rationales and fit Bradley-Terry ratings.
    Tournament {
        /// JSON `{"paper": title, "rationales": {system: text}}`.
        #[arg(long)]
        rationales: PathBuf,
        #[arg(long)]
        model: Option<String>,
    },
}

#[derive(Deserialize)]
struct RationaleFile {
    paper: String,
    rationales: BTreeMap<String, String>,
}

type AnyResult<T> = Result<T, Box<dyn std::error::Error + Send + Sync>>;

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn print_event(e: ProgressEvent) {
    eprintln!("[{:>5.1}%] {:<13} {}", e.percent, e.stage.as_str(), e.message);
}

fn emit(value: &impl serde::Serialize, out: Option<&PathBuf>) -> AnyResult<()> {
    let json = serde_json::to_string_pretty(value)?;
    match out {
        Some(p) => std::fs::write(p, json + "\n")?,
        None => println!("{json}"),
    }
    Ok(())
}

fn cancel_on_ctrl_c() -> CancellationToken {
    let cancel = CancellationToken::new();
    let c = cancel.clone();
    tokio::spawn(async move {
        if tokio::signal::ctrl_c().await.is_ok() {
            c.cancel();
        }
    });
    cancel
}

fn variant(name: &str) -> AnyResult<(String, Ablation)> {
    let key = name.trim().to_ascii_lowercase().replace(['_', ' '], "-");
    Ablation::variants()
        .into_iter()
        .find(|(label, _)| label.to_ascii_lowercase().replace(' ', "-") == key)
        .map(|(label, a)| (label.to_string(), a))
        .ok_or_else(|| format!("unknown variant {name:?}").into())
}

async fn run(cli: Cli) -> AnyResult<()> {
    let opts = cli.global.options();
    let pipeline = || -> AnyResult<Pipeline> { Ok(build_pipeline(&opts)?) };
    match cli.command {
        Command::Serve { addr, max_concurrent } => {
            let store = ReportStore::open(opts.reports_dir())?;
            let state = AppState::with_capacity(pipeline()?, store, max_concurrent.max(1));
            let listener = tokio::net::TcpListener::bind(addr).await?;
            tracing::info!("listening on http://{}", listener.local_addr()?);
            axum::serve(listener, router(state))
                .with_graceful_shutdown(async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await?;
        }
        Command::Evaluate { arxiv_id, settings, out } => {
            let cancel = cancel_on_ctrl_c();
            let result = pipeline()?
                .evaluate_arxiv(&arxiv_id, &settings.settings(), &print_event, &cancel)
                .await?;
            emit(&result, out.as_ref())?;
        }
        Command::EvaluateAbstract { title, abstract_text, settings, out } => {
            let cancel = cancel_on_ctrl_c();
            let result = pipeline()?
                .evaluate_abstract(&title, &abstract_text, &settings.settings(), &print_event, &cancel)
                .await?;
            emit(&result, out.as_ref())?;
        }
        Command::Search { query, limit } => {
            for p in pipeline()?.arxiv().search(&query, limit).await? {
                let year = p.year.map(|y| y.to_string()).unwrap_or_default();
                println!("{}\t{}\t{}", p.arxiv_id.as_deref().unwrap_or(&p.id), year, p.title);
            }
        }
        Command::Harness(h) => harness(h, pipeline).await?,
    }
    Ok(())
}

async fn harness(h: Harness, pipeline: impl Fn() -> AnyResult<Pipeline>) -> AnyResult<()> {
    match h {
        Harness::Distribution { truth } => {
            print!("{}", format_distribution(&distribution(&GroundTruth::load(truth)?)));
        }
        Harness::Baseline { truth } => {
            let truth = GroundTruth::load(truth)?;
            let gold: Vec<NoveltyLabel> = truth.iter().map(|g| g.label).collect();
            let all_novel = vec![NoveltyLabel::Novel; gold.len()];
            let m = noveltrace::evalharness::compute_metrics(&all_novel, &gold)?;
            print!("{}", format_metrics(&[("All novel".to_string(), m)]));
        }
        Harness::Run { truth, variants, parallelism, model, out } => {
            let truth = GroundTruth::load(truth)?;
            let variants: Vec<(String, Ablation)> = if variants.is_empty() {
                Ablation::variants().into_iter().map(|(n, a)| (n.to_string(), a)).collect()
            } else {
                variants.iter().map(|v| variant(v)).collect::<AnyResult<_>>()?
            };
            let pipeline = pipeline()?;
            let cancel = cancel_on_ctrl_c();
            let base = EvaluationSettings {
                model_id: model.unwrap_or_default(),
                ..EvaluationSettings::default()
            };
            let quiet = |_: ProgressEvent| {};
            let outcomes = run_dataset(&truth, &variants, parallelism, |gt, ablation| {
                let settings = EvaluationSettings { ablation, ..base.clone() };
                let (pipeline, cancel, quiet) = (&pipeline, &cancel, &quiet);
                async move {
                    pipeline
                        .evaluate_arxiv(&gt.paper_id, &settings, quiet, cancel)
                        .await
                        .map(|r| r.report.label)
                        .map_err(|e| e.to_string())
                }
            })
            .await?;
            let rows: Vec<(String, _)> = outcomes
                .iter()
                .filter_map(|o| o.metrics.map(|m| (o.variant.clone(), m)))
                .collect();
            print!("{}", format_metrics(&rows));
            for o in outcomes.iter().filter(|o| o.failures > 0) {
                eprintln!("{}: {} paper(s) failed and were left out", o.variant, o.failures);
            }
            if let Some(p) = out {
                emit(&outcomes, Some(&p))?;
            }
        }
        Harness::Tournament { rationales, model } => {
            let file: RationaleFile = serde_json::from_str(&std::fs::read_to_string(rationales)?)?;
            let pipeline = pipeline()?;
            let gateway = pipeline.gateway();
            let model = match model {
                Some(m) => m,
                None => gateway.default_model().ok_or("no default model configured")?.to_string(),
            };
            let llm = gateway.session(&model)?;
            let judgments = run_tournament(&file.paper, &file.rationales, &Dimension::ALL, &llm).await?;
            print!("{}", format_ratings(&fit_bradley_terry(&judgments)?));
        }
    }
    Ok(())
}
