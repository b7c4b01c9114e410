//! Semantic Scholar graph and recommendations APIs.

use serde::Deserialize;

use super::{Fetcher, HttpRequest, IngestError, PaperRecord, RecommendationBatch};

pub const DEFAULT_BASE_URL: &str = "https://api.semanticscholar.org";
pub const MAX_RECOMMENDATIONS: usize = 100;
const FIELDS: &str = "paperId,externalIds,title,abstract,authors,year,venue,url,citationCount";

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct S2Paper {
    paper_id: Option<String>,
    #[serde(default)]
    external_ids: Option<serde_json::Map<String, serde_json::Value>>,
    title: Option<String>,
    #[serde(rename = "abstract")]
    abstract_text: Option<String>,
    #[serde(default)]
    authors: Vec<S2Author>,
    year: Option<i32>,
    venue: Option<String>,
    url: Option<String>,
    citation_count: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct S2Author {
    name: Option<String>,
}

impl S2Paper {
    fn into_record(self) -> Option<PaperRecord> {
        let id = self.paper_id?;
        let title = self.title.map(|t| t.split_whitespace().collect::<Vec<_>>().join(" "))?;
        if title.is_empty() {
            return None;
        }
        let arxiv_id = self
            .external_ids
            .as_ref()
            .and_then(|ids| ids.get("ArXiv"))
            .and_then(|v| v.as_str())
            .map(str::to_string);
        Some(PaperRecord {
            id,
            arxiv_id,
            title,
            abstract_text: self.abstract_text.unwrap_or_default().trim().to_string(),
            authors: self.authors.into_iter().filter_map(|a| a.name).collect(),
            year: self.year.filter(|y| (1900..=2100).contains(y)),
            venue: self.venue.filter(|v| !v.trim().is_empty()),
            url: self.url,
            citation_count: self.citation_count,
        })
    }
}

#[derive(Debug, Deserialize)]
struct ReferencesPage {
    #[serde(default)]
    data: Vec<ReferenceEdge>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ReferenceEdge {
    cited_paper: Option<S2Paper>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct Recommendations {
    #[serde(default)]
    recommended_papers: Vec<S2Paper>,
}

#[derive(Debug, Deserialize)]
struct SearchPage {
    #[serde(default)]
    data: Vec<S2Paper>,
}

fn parse<T: for<'de> Deserialize<'de>>(body: &[u8], what: &str) -> Result<T, IngestError> {
    serde_json::from_slice(body)
        .map_err(|e| IngestError::UpstreamUnavailable(format!("malformed {what} response: {e}")))
}

#[derive(Debug, Clone)]
pub struct ScholarClient {
    fetcher: Fetcher,
    base_url: String,
    api_key: Option<String>,
}

impl ScholarClient {
    pub fn new(fetcher: Fetcher) -> Self {
        Self {
            fetcher,
            base_url: DEFAULT_BASE_URL.into(),
            api_key: None,
        }
    }

    pub fn with_base_url(mut self, base_url: &str) -> Self {
        self.base_url = base_url.trim_end_matches('/').into();
        self
    }

    pub fn with_api_key(mut self, key: Option<String>) -> Self {
        self.api_key = key.filter(|k| !k.is_empty());
        self
    }

    fn request(&self, url: String) -> HttpRequest {
        let request = HttpRequest::get(url);
        match &self.api_key {
            Some(key) => request.header("x-api-key", key.clone()),
            None => request,
        }
    }

    /// Main record plus its references. `paper` is any identifier the graph
    /// API accepts: a paper id, `arXiv:<id>`, `DOI:<doi>`, ...
    pub async fn fetch_metadata(
        &self,
        paper: &str,
    ) -> Result<(PaperRecord, Vec<PaperRecord>), IngestError> {
        let paper = paper.trim();
        if paper.is_empty() {
            return Err(IngestError::BadRequest("empty paper identifier".into()));
        }
        let url = format!("{}/graph/v1/paper/{paper}?fields={FIELDS}", self.base_url);
        let body = self
            .fetcher
            .fetch("s2.paper", &[("id", paper.to_string())], self.request(url))
            .await
            .map_err(|e| match e {
                IngestError::NotFound(_) => IngestError::NotFound(paper.to_string()),
                other => other,
            })?;
        let main = parse::<S2Paper>(&body, "paper")?
            .into_record()
            .ok_or_else(|| IngestError::NotFound(paper.to_string()))?;

        let url = format!(
            "{}/graph/v1/paper/{}/references?fields={FIELDS}&limit=1000",
            self.base_url, main.id
        );
        let body = self
            .fetcher
            .fetch("s2.references", &[("id", main.id.clone())], self.request(url))
            .await?;
        let mut seen = std::collections::HashSet::new();
        let cited = parse::<ReferencesPage>(&body, "references")?
            .data
            .into_iter()
            .filter_map(|edge| edge.cited_paper?.into_record())
            .filter(|r| r.id != main.id && seen.insert(r.id.clone()))
            .collect();
        Ok((main, cited))
    }

    pub async fn fetch_recommendations(
        &self,
        seed: &str,
        n: usize,
    ) -> Result<RecommendationBatch, IngestError> {
        if n == 0 || n > MAX_RECOMMENDATIONS {
            return Err(IngestError::BadRequest(format!(
                "n must be in 1..={MAX_RECOMMENDATIONS}, got {n}"
            )));
        }
        let url = format!(
            "{}/recommendations/v1/papers/forpaper/{seed}?limit={n}&fields={FIELDS}",
            self.base_url
        );
        let body = self
            .fetcher
            .fetch(
                "s2.recommendations",
                &[("id", seed.to_string()), ("n", n.to_string())],
                self.request(url),
            )
            .await
            .map_err(|e| match e {
                IngestError::NotFound(_) => IngestError::NotFound(seed.to_string()),
                other => other,
            })?;
        let papers = parse::<Recommendations>(&body, "recommendations")?
            .recommended_papers
            .into_iter()
            .filter_map(S2Paper::into_record)
            .collect();
        Ok(RecommendationBatch::new(seed, papers, n))
    }

    /// Relevance search by free text. Used to seed related-work candidates
    /// when only a title and abstract are known.
    pub async fn search(&self, query: &str, limit: usize) -> Result<Vec<PaperRecord>, IngestError> {
        let query = query.split_whitespace().collect::<Vec<_>>().join(" ");
        if query.is_empty() {
            return Err(IngestError::EmptyQuery);
        }
        if limit == 0 || limit > MAX_RECOMMENDATIONS {
            return Err(IngestError::BadRequest(format!(
                "limit must be in 1..={MAX_RECOMMENDATIONS}, got {limit}"
            )));
        }
        let url = url::Url::parse_with_params(
            &format!("{}/graph/v1/paper/search", self.base_url),
            &[
                ("query", query.as_str()),
                ("limit", &limit.to_string()),
                ("fields", FIELDS),
            ],
        )
        .map_err(|e| IngestError::BadRequest(e.to_string()))?;
        let body = self
            .fetcher
            .fetch(
                "s2.search",
                &[("query", query.clone()), ("limit", limit.to_string())],
                self.request(url.to_string()),
            )
            .await?;
        let mut seen = std::collections::HashSet::new();
        Ok(parse::<SearchPage>(&body, "search")?
            .data
            .into_iter()
            .filter_map(S2Paper::into_record)
            .filter(|r| seen.insert(r.id.clone()))
            .take(limit)
            .collect())
    }
}
