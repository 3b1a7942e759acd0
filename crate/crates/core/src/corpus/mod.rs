//! Posts, corpora and the operations over them: file I/O, statistics,
//! stratified splitting and the seeded synthetic generator.

mod io;
mod label;
mod split;
mod stats;
mod synth;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

pub use io::{load_corpus, save_corpus, write_corpus, CorpusFormat};
pub use label::Label;
pub use split::{stratified_split, SplitSpec};
pub use stats::{compute_stats, CorpusStats, ReferenceDelta, REFERENCE_CLASS_COUNTS, REFERENCE_STATS};
pub use synth::{generate_synthetic, phrase_bank, SyntheticGenerator, COLLECTION_WINDOW};

use crate::{Error, Result};

/// A single social-media post, optionally carrying a behavior label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedPost {
    pub id: String,
    #[serde(default)]
    pub subreddit: String,
    #[serde(default)]
    pub created_utc: i64,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
}

impl AnnotatedPost {
    pub fn new(id: impl Into<String>, text: impl Into<String>, label: Option<Label>) -> Self {
        AnnotatedPost {
            id: id.into(),
            subreddit: String::new(),
            created_utc: 0,
            text: text.into(),
            label,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.text.trim().is_empty() {
            return Err(format!("post `{}` has empty text", self.id));
        }
        Ok(())
    }
}

/// Ordered collection of posts with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    posts: Vec<AnnotatedPost>,
    ids: HashSet<String>,
}

impl Corpus {
    pub fn new(posts: Vec<AnnotatedPost>) -> Result<Self> {
        let mut corpus = Corpus::default();
        for post in posts {
            corpus.push(post)?;
        }
        Ok(corpus)
    }

    pub fn push(&mut self, post: AnnotatedPost) -> Result<()> {
        post.validate().map_err(Error::EmptyInput)?;
        if !self.ids.insert(post.id.clone()) {
            return Err(Error::DuplicateId(post.id));
        }
        self.posts.push(post);
        Ok(())
    }

    pub fn posts(&self) -> &[AnnotatedPost] {
        &self.posts
    }

    pub fn into_posts(self) -> Vec<AnnotatedPost> {
        self.posts
    }

    pub fn len(&self) -> usize {
        self.posts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.posts.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, AnnotatedPost> {
        self.posts.iter()
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.ids.contains(id)
    }

    /// Per-class counts indexed by label code. Unlabeled posts are skipped.
    pub fn class_counts(&self) -> [usize; Label::COUNT] {
        let mut counts = [0; Label::COUNT];
        for label in self.posts.iter().filter_map(|p| p.label) {
            counts[label.code()] += 1;
        }
        counts
    }

    /// Labels of every post, failing on the first unlabeled one.
    pub fn labels(&self) -> Result<Vec<Label>> {
        self.posts
            .iter()
            .map(|p| p.label.ok_or_else(|| Error::Unlabeled(p.id.clone())))
            .collect()
    }

    pub fn texts(&self) -> Vec<&str> {
        self.posts.iter().map(|p| p.text.as_str()).collect()
    }
}

impl<'a> IntoIterator for &'a Corpus {
    type Item = &'a AnnotatedPost;
    type IntoIter = std::slice::Iter<'a, AnnotatedPost>;

    fn into_iter(self) -> Self::IntoIter {
        self.posts.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_ids() {
        let posts = vec![
            AnnotatedPost::new("a", "one", None),
            AnnotatedPost::new("a", "two", None),
        ];
        assert!(matches!(Corpus::new(posts), Err(Error::DuplicateId(id)) if id == "a"));
    }

    #[test]
    fn rejects_blank_text() {
        let err = Corpus::new(vec![AnnotatedPost::new("a", "  \n", None)]).unwrap_err();
        assert!(matches!(err, Error::EmptyInput(_)));
    }

    #[test]
    fn labels_require_every_post_labeled() {
        let c = Corpus::new(vec![
            AnnotatedPost::new("a", "x", Some(Label::Dealer)),
            AnnotatedPost::new("b", "y", None),
        ])
        .unwrap();
        assert!(matches!(c.labels(), Err(Error::Unlabeled(id)) if id == "b"));
        assert_eq!(c.class_counts(), [1, 0, 0, 0, 0]);
    }
}
