use std::path::PathBuf;
use std::sync::{LazyLock, Mutex};
use std::time::{Duration, Instant};

use regex::Regex;

use super::repo::{RepoEntry, Repository};
use super::{NavigationError, Result};
use crate::ingest::{DocKind, RawDocument};

static ENTRY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<entry>(.*?)</entry>").expect("valid regex"));
static ID: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<id>\s*https?://arxiv\.org/abs/([^<\s]+?)(?:v\d+)?\s*</id>").expect("valid regex"));
static TITLE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?s)<title>(.*?)</title>").expect("valid regex"));
static PUBLISHED: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"<published>(\d{4})-").expect("valid regex"));

/// Live arXiv lookup: Atom API title search and PDF download, at most one
/// request per `min_interval`. Refuses all requests when offline.
pub struct ArxivRepository {
    api: String,
    pdf_base: String,
    min_interval: Duration,
    last_request: Mutex<Option<Instant>>,
    cache_dir: Option<PathBuf>,
    offline: bool,
    agent: ureq::Agent,
}

impl ArxivRepository {
    pub fn new(offline: bool) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        ArxivRepository {
            api: "https://export.arxiv.org/api/query".into(),
            pdf_base: "https://arxiv.org/pdf/".into(),
            min_interval: Duration::from_secs(3),
            last_request: Mutex::new(None),
            cache_dir: None,
            offline,
            agent,
        }
    }

    pub fn with_endpoint(mut self, api: &str, pdf_base: &str) -> Self {
        self.api = api.to_string();
        self.pdf_base = pdf_base.to_string();
        self
    }

    pub fn with_min_interval(mut self, interval: Duration) -> Self {
        self.min_interval = interval;
        self
    }

    /// Downloaded PDFs are kept here and reused.
    pub fn with_cache_dir(mut self, dir: PathBuf) -> Self {
        self.cache_dir = Some(dir);
        self
    }

    fn throttle(&self) -> Result<()> {
        if self.offline {
            return Err(NavigationError::RepositoryUnavailable(
                "the live repository is disabled while GRAPHY_OFFLINE is set".into(),
            ));
        }
        let mut last = self.last_request.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(prev) = *last {
            let wait = self.min_interval.saturating_sub(prev.elapsed());
            if !wait.is_zero() {
                std::thread::sleep(wait);
            }
        }
        *last = Some(Instant::now());
        Ok(())
    }

    fn cache_path(&self, repo_doc_id: &str) -> Option<PathBuf> {
        let safe: String = repo_doc_id
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '.' { c } else { '_' })
            .collect();
        self.cache_dir.as_ref().map(|d| d.join(format!("{safe}.pdf")))
    }
}

fn unescape(s: &str) -> String {
    s.replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&quot;", "\"")
        .replace("&apos;", "'")
        .replace("&amp;", "&")
}

/// Entries of an Atom feed returned by the query API.
pub(crate) fn parse_feed(xml: &str) -> Vec<RepoEntry> {
    ENTRY
        .captures_iter(xml)
        .filter_map(|c| {
            let body = c.get(1)?.as_str();
            let id = ID.captures(body)?.get(1)?.as_str().to_string();
            let raw_title = TITLE.captures(body)?.get(1)?.as_str();
            let title = unescape(&raw_title.split_whitespace().collect::<Vec<_>>().join(" "));
            let mut entry = RepoEntry::new(&id, &title);
            if let Some(year) = PUBLISHED.captures(body).and_then(|y| y[1].parse::<i64>().ok()) {
                entry.metadata.insert("year".into(), year.into());
            }
            Some(entry)
        })
        .collect()
}

impl Repository for ArxivRepository {
    fn id(&self) -> &str {
        "arxiv"
    }

    fn search(&self, normalized_title: &str) -> Result<Vec<RepoEntry>> {
        self.throttle()?;
        let query = format!("ti:\"{normalized_title}\"");
        let unavailable = |e: ureq::Error| NavigationError::RepositoryUnavailable(format!("{}: {e}", self.api));
        let xml = self
            .agent
            .get(&self.api)
            .query("search_query", &query)
            .query("max_results", "5")
            .call()
            .map_err(unavailable)?
            .body_mut()
            .read_to_string()
            .map_err(unavailable)?;
        Ok(parse_feed(&xml))
    }

    fn fetch(&self, repo_doc_id: &str) -> Result<RawDocument> {
        let cached = self.cache_path(repo_doc_id);
        if let Some(bytes) = cached.as_ref().and_then(|p| std::fs::read(p).ok()) {
            return Ok(RawDocument::new(repo_doc_id, DocKind::Pdf, bytes));
        }
        self.throttle()?;
        let url = format!("{}{}", self.pdf_base, repo_doc_id);
        let bytes = self
            .agent
            .get(&url)
            .call()
            .and_then(|mut r| r.body_mut().with_config().limit(64 << 20).read_to_vec())
            .map_err(|e| NavigationError::DocumentFailure {
                repo_doc_id: repo_doc_id.to_string(),
                reason: format!("{url}: {e}"),
            })?;
        if let Some(path) = &cached {
            if let Some(parent) = path.parent() {
                let _ = std::fs::create_dir_all(parent);
            }
            // caching is an optimization; a failed write is not an error
            let _ = std::fs::write(path, &bytes);
        }
        let mut doc = RawDocument::new(repo_doc_id, DocKind::Pdf, bytes);
        doc.source_uri = Some(url);
        Ok(doc)
    }
}
