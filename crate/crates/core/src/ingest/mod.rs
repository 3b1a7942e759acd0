//! Post collection from Reddit listings or local JSONL dumps, filtered by
//! date window and drug keywords.

mod reddit;

pub use reddit::{
    Credentials, HttpClient, HttpResponse, RateLimiter, RedditClient, Sleeper, ThreadSleeper, UreqClient,
    BACKOFF_BASE, MAX_RETRIES,
};

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::COLLECTION_WINDOW;
use crate::{AnnotatedPost, Corpus, Error, Lexicon, Result};

pub const DEFAULT_SUBREDDITS: [&str; 4] = ["opiates", "chronicpain", "OpiatesRecovery", "addiction"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Live,
    Fixture(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IngestConfig {
    pub subreddits: Vec<String>,
    /// inclusive, epoch seconds
    pub window_start: i64,
    /// inclusive, epoch seconds
    pub window_end: i64,
    pub credentials: Option<Credentials>,
    /// requests per minute
    pub rate_limit: u32,
    pub source: Source,
    /// page cap per subreddit in live mode
    pub max_pages: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            subreddits: DEFAULT_SUBREDDITS.iter().map(|s| s.to_string()).collect(),
            window_start: COLLECTION_WINDOW.0,
            window_end: COLLECTION_WINDOW.1,
            credentials: None,
            rate_limit: 60,
            source: Source::Live,
            max_pages: 100,
        }
    }
}

impl IngestConfig {
    pub fn fixture(path: impl Into<PathBuf>) -> Self {
        IngestConfig {
            source: Source::Fixture(path.into()),
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_start >= self.window_end {
            return Err(Error::IngestConfig(format!(
                "window start {} must precede window end {}",
                self.window_start, self.window_end
            )));
        }
        if self.subreddits.is_empty() || self.subreddits.iter().any(|s| s.trim().is_empty()) {
            return Err(Error::IngestConfig("subreddit list is empty".into()));
        }
        if self.rate_limit == 0 {
            return Err(Error::IngestConfig("rate limit must be positive".into()));
        }
        Ok(())
    }

    pub fn in_window(&self, created_utc: i64) -> bool {
        (self.window_start..=self.window_end).contains(&created_utc)
    }
}

/// A post as retrieved, before filtering.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawPost {
    pub id: String,
    #[serde(default)]
    pub subreddit: String,
    pub created_utc: i64,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default, alias = "selftext")]
    pub text: String,
}

impl RawPost {
    /// Title and body joined with a single space; this is what keyword
    /// filtering sees and what the corpus stores.
    pub fn full_text(&self) -> String {
        match self.title.as_deref().map(str::trim).filter(|t| !t.is_empty()) {
            Some(t) if !self.text.trim().is_empty() => format!("{t} {}", self.text),
            Some(t) => t.to_string(),
            None => self.text.clone(),
        }
    }
}

/// Keep posts inside the window, with a keyword hit and nonblank text,
/// dropping repeated ids (first wins). Order is preserved.
pub fn filter_posts(raw: impl IntoIterator<Item = RawPost>, config: &IngestConfig, lexicon: &Lexicon) -> Corpus {
    let mut seen = HashSet::new();
    let mut corpus = Corpus::default();
    for p in raw {
        let text = p.full_text();
        if !config.in_window(p.created_utc) || text.trim().is_empty() || !lexicon.has_keyword(&text) {
            continue;
        }
        if !seen.insert(p.id.clone()) {
            continue;
        }
        let post = AnnotatedPost {
            id: p.id,
            subreddit: p.subreddit,
            created_utc: p.created_utc,
            text,
            label: None,
        };
        corpus.push(post).expect("filtered post is valid and unique");
    }
    corpus
}

pub fn read_fixture(path: &Path) -> Result<Vec<RawPost>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let p: RawPost = serde_json::from_str(&line).map_err(|e| Error::record(path, i + 1, e.to_string()))?;
        out.push(p);
    }
    Ok(out)
}

/// Collect an unlabeled corpus from the configured source.
pub fn collect(config: &IngestConfig, lexicon: &Lexicon) -> Result<Corpus> {
    config.validate()?;
    let raw = match &config.source {
        Source::Fixture(path) => read_fixture(path)?,
        Source::Live => {
            let creds = match &config.credentials {
                Some(c) => c.clone(),
                None => Credentials::from_env()?,
            };
            let mut client = RedditClient::new(UreqClient::new(), ThreadSleeper, creds, config.rate_limit);
            client.collect(config)?
        }
    };
    Ok(filter_posts(raw, config, lexicon))
}
