//! Flat directory of immutable report files named by cache key.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use noveltrace::pipeline::{EvaluationResult, EvaluationSettings};
use noveltrace::PIPELINE_VERSION;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// What a cache key is derived from: every request field plus the pipeline
/// version.
#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KeyInput<'a> {
    Arxiv {
        arxiv_id: &'a str,
        title: &'a str,
        settings: &'a EvaluationSettings,
        pipeline_version: &'a str,
    },
    Abstract {
        title: &'a str,
        #[serde(rename = "abstract")]
        abstract_text: &'a str,
        settings: &'a EvaluationSettings,
        pipeline_version: &'a str,
    },
}

fn digest(input: &KeyInput<'_>) -> String {
    let canonical = serde_json::to_vec(input).expect("key input serializes");
    hex::encode(Sha256::digest(canonical))
}

pub fn arxiv_key(arxiv_id: &str, title: &str, settings: &EvaluationSettings) -> String {
    arxiv_key_versioned(arxiv_id, title, settings, PIPELINE_VERSION)
}

pub fn arxiv_key_versioned(arxiv_id: &str, title: &str, settings: &EvaluationSettings, version: &str) -> String {
    digest(&KeyInput::Arxiv {
        arxiv_id,
        title,
        settings,
        pipeline_version: version,
    })
}

pub fn abstract_key(title: &str, abstract_text: &str, settings: &EvaluationSettings) -> String {
    digest(&KeyInput::Abstract {
        title,
        abstract_text,
        settings,
        pipeline_version: PIPELINE_VERSION,
    })
}

/// One library card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    /// Cache key; `GET /report/{key}` returns the full report.
    pub key: String,
    pub paper_id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub venue: Option<String>,
    pub year: Option<i32>,
    pub score: f64,
    pub label: noveltrace::assess::NoveltyLabel,
    pub abstract_only: bool,
}

#[derive(Debug, Clone)]
pub struct ReportStore {
    dir: PathBuf,
    /// Per-key write locks.
    writing: Arc<Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>>,
}

fn valid_key(key: &str) -> bool {
    !key.is_empty() && key.len() <= 128 && key.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl ReportStore {
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            writing: Arc::default(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        valid_key(key).then(|| self.dir.join(format!("{key}.json")))
    }

    /// The stored report bytes, if present.
    pub async fn get_bytes(&self, key: &str) -> Option<Vec<u8>> {
        tokio::fs::read(self.path(key)?).await.ok()
    }

    pub async fn get(&self, key: &str) -> Option<EvaluationResult> {
        let bytes = self.get_bytes(key).await?;
        match serde_json::from_slice(&bytes) {
            Ok(r) => Some(r),
            Err(e) => {
                tracing::warn!(key, "stored report is unreadable: {e}");
                None
            }
        }
    }

    /// Write `result` under `key` unless a report is already there. Reports
    /// are immutable: the first writer wins.
    pub async fn put(&self, key: &str, result: &EvaluationResult) -> std::io::Result<()> {
        let path = self
            .path(key)
            .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "bad key"))?;
        let lock = self.writing.lock().unwrap().entry(key.to_string()).or_default().clone();
        let _guard = lock.lock().await;
        if tokio::fs::try_exists(&path).await? {
            return Ok(());
        }
        let bytes = serde_json::to_vec_pretty(result).map_err(std::io::Error::other)?;
        let tmp = self.dir.join(format!(".{key}.tmp"));
        tokio::fs::write(&tmp, &bytes).await?;
        tokio::fs::rename(&tmp, &path).await
    }

    /// Summaries of every readable report, sorted by title then key.
    /// Unreadable files are skipped with a warning.
    pub async fn summaries(&self) -> Vec<ReportSummary> {
        let mut out = Vec::new();
        let Ok(mut dir) = tokio::fs::read_dir(&self.dir).await else {
            return out;
        };
        while let Ok(Some(entry)) = dir.next_entry().await {
            let path = entry.path();
            if path.extension().and_then(|e| e.to_str()) != Some("json") {
                continue;
            }
            let Some(key) = path.file_stem().and_then(|s| s.to_str()).filter(|k| valid_key(k)) else {
                continue;
            };
            let parsed = tokio::fs::read(&path)
                .await
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice::<EvaluationResult>(&b).map_err(|e| e.to_string()));
            match parsed {
                Ok(r) => out.push(ReportSummary {
                    key: key.to_string(),
                    paper_id: r.paper.id,
                    title: r.paper.title,
                    abstract_text: r.paper.abstract_text,
                    venue: r.paper.venue,
                    year: r.paper.year,
                    score: r.report.score,
                    label: r.report.label,
                    abstract_only: r.report.abstract_only,
                }),
                Err(e) => tracing::warn!(path = %path.display(), "skipping unreadable report: {e}"),
            }
        }
        out.sort_by(|a, b| a.title.cmp(&b.title).then_with(|| a.key.cmp(&b.key)));
        out
    }
}
