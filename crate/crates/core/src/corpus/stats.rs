use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{Corpus, Label};

/// Class distribution of the published 5,764-post annotated corpus, used as
/// a comparison target when that dataset is supplied.
pub const REFERENCE_CLASS_COUNTS: [(Label, usize); Label::COUNT] = [
    (Label::Dealer, 1499),
    (Label::ActiveUser, 1877),
    (Label::RecoveredUser, 312),
    (Label::PrescriptionUser, 685),
    (Label::NonUser, 1391),
];

/// Reference corpus size counts: posts, sentences, words, vocabulary.
pub const REFERENCE_STATS: (usize, usize, usize, usize) = (5764, 22767, 350_207, 15134);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_posts: usize,
    pub n_unlabeled: usize,
    pub n_sentences: usize,
    pub avg_sentences_per_post: f64,
    pub n_words: usize,
    pub vocab_size: usize,
    pub avg_words_per_sentence: f64,
    pub class_counts: BTreeMap<Label, usize>,
    /// Fractions over labeled posts.
    pub class_fractions: BTreeMap<Label, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDelta {
    pub field: String,
    pub observed: f64,
    pub reference: f64,
}

fn is_sentence_mark(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Sentences are the non-blank segments between runs of `.`, `!` or `?`.
pub(crate) fn count_sentences(text: &str) -> usize {
    text.split(is_sentence_mark)
        .filter(|seg| !seg.trim().is_empty())
        .count()
}

/// Whitespace tokens once sentence punctuation is removed.
pub(crate) fn words(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| t.chars().filter(|c| !is_sentence_mark(*c)).collect::<String>())
        .filter(|t| !t.is_empty())
}

pub fn compute_stats(corpus: &Corpus) -> CorpusStats {
    let mut n_sentences = 0;
    let mut n_words = 0;
    let mut vocab = HashSet::new();
    for post in corpus {
        n_sentences += count_sentences(&post.text);
        for w in words(&post.text) {
            n_words += 1;
            vocab.insert(w.to_lowercase());
        }
    }

    let counts = corpus.class_counts();
    let n_labeled: usize = counts.iter().sum();
    let class_counts = Label::ALL.iter().map(|&l| (l, counts[l.code()])).collect();
    let class_fractions = Label::ALL
        .iter()
        .map(|&l| {
            let f = if n_labeled == 0 {
                0.0
            } else {
                counts[l.code()] as f64 / n_labeled as f64
            };
            (l, f)
        })
        .collect();

    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    CorpusStats {
        n_posts: corpus.len(),
        n_unlabeled: corpus.len() - n_labeled,
        n_sentences,
        avg_sentences_per_post: ratio(n_sentences, corpus.len()),
        n_words,
        vocab_size: vocab.len(),
        avg_words_per_sentence: ratio(n_words, n_sentences),
        class_counts,
        class_fractions,
    }
}

impl CorpusStats {
    /// Observed vs. reference values for the published corpus.
    pub fn reference_comparison(&self) -> Vec<ReferenceDelta> {
        let (posts, sentences, words, vocab) = REFERENCE_STATS;
        let mut out = vec![
            delta("n_posts", self.n_posts, posts),
            delta("n_sentences", self.n_sentences, sentences),
            delta("n_words", self.n_words, words),
            delta("vocab_size", self.vocab_size, vocab),
        ];
        for (label, count) in REFERENCE_CLASS_COUNTS {
            let observed = self.class_counts.get(&label).copied().unwrap_or(0);
            out.push(delta(&format!("class_counts.{label}"), observed, count));
        }
        out
    }
}

fn delta(field: &str, observed: usize, reference: usize) -> ReferenceDelta {
    ReferenceDelta {
        field: field.to_string(),
        observed: observed as f64,
        reference: reference as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::AnnotatedPost;

    #[test]
    fn empty_corpus_is_all_zero() {
        let s = compute_stats(&Corpus::default());
        assert_eq!(s.n_posts, 0);
        assert_eq!(s.n_sentences, 0);
        assert_eq!(s.n_words, 0);
        assert_eq!(s.vocab_size, 0);
        assert_eq!(s.avg_sentences_per_post, 0.0);
        assert_eq!(s.avg_words_per_sentence, 0.0);
        assert!(s.class_counts.values().all(|&c| c == 0));
        assert!(s.class_fractions.values().all(|&f| f == 0.0));
    }

    #[test]
    fn hand_counted_example() {
        let c = Corpus::new(vec![
            AnnotatedPost::new("1", "I quit. I am clean.", None),
            AnnotatedPost::new("2", "oxy helps", None),
        ])
        .unwrap();
        let s = compute_stats(&c);
        assert_eq!(s.n_posts, 2);
        assert_eq!(s.n_sentences, 3);
        assert_eq!(s.n_words, 7);
        assert_eq!(s.vocab_size, 6);
        assert_eq!(s.avg_sentences_per_post, 1.5);
        assert!((s.avg_words_per_sentence - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn punctuation_runs_are_one_boundary() {
        assert_eq!(count_sentences("wait... what?! ok"), 3);
        assert_eq!(count_sentences("?!."), 0);
        assert_eq!(words("so... high!!").collect::<Vec<_>>(), vec!["so", "high"]);
    }

    #[test]
    fn reference_distribution_sums_to_corpus_size() {
        let total: usize = REFERENCE_CLASS_COUNTS.iter().map(|(_, c)| c).sum();
        assert_eq!(total, REFERENCE_STATS.0);
    }
}
