//! Text cleaning for the TF-IDF and word-embedding models.
//!
//! The chain is fixed: strip HTML tags, lowercase, lexicon normalization,
//! punctuation removal, numeral removal, tokenization, stopword removal
//! (with a retention list) and lemmatization.

mod lemma;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

pub use lemma::lemmatize;

use crate::lexicon::Lexicon;

const STOPWORDS: &str = include_str!("../../data/stopwords.txt");
const FUNCTION_WORDS: &str = include_str!("../../data/function_words.txt");
const LEMMA_EXCEPTIONS: &str = include_str!("../../data/lemma_exceptions.txt");

/// Words that carry negation or recovery status and must survive stopword
/// removal.
pub const CONTEXT_WORDS: [&str; 7] = ["not", "no", "never", "off", "on", "clean", "quit"];

static HTML_TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^<>]*>").expect("valid regex"));
static PUNCT_OR_SYMBOL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[\p{P}\p{S}]$").expect("valid regex"));

fn word_list(src: &str) -> impl Iterator<Item = &str> {
    src.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
}

static STOPWORD_SET: LazyLock<HashSet<&'static str>> = LazyLock::new(|| word_list(STOPWORDS).collect());
static FUNCTION_WORD_SET: LazyLock<HashSet<&'static str>> =
    LazyLock::new(|| word_list(FUNCTION_WORDS).collect());

pub fn stopwords() -> &'static HashSet<&'static str> {
    &STOPWORD_SET
}

pub fn function_words() -> &'static HashSet<&'static str> {
    &FUNCTION_WORD_SET
}

/// Parse an exception file: `form lemma` per line, `#` comments.
pub fn parse_lemma_exceptions(src: &str) -> HashMap<String, String> {
    word_list(src)
        .filter_map(|line| {
            let mut parts = line.split_whitespace();
            Some((parts.next()?.to_lowercase(), parts.next()?.to_lowercase()))
        })
        .collect()
}

pub fn default_lemma_exceptions() -> HashMap<String, String> {
    parse_lemma_exceptions(LEMMA_EXCEPTIONS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub english_threshold: f64,
    pub retain_words: BTreeSet<String>,
    pub lemma_exceptions: HashMap<String, String>,
}

impl PreprocessConfig {
    /// Defaults: threshold 0.10, retention of every lexicon surface and
    /// canonical form plus the negation/recovery words, and the bundled
    /// exception file.
    pub fn for_lexicon(lexicon: &Lexicon) -> Self {
        let mut retain: BTreeSet<String> = CONTEXT_WORDS.iter().map(|w| w.to_string()).collect();
        for e in lexicon.entries() {
            retain.insert(e.surface.clone());
            retain.insert(e.canonical.clone());
        }
        PreprocessConfig {
            english_threshold: 0.10,
            retain_words: retain,
            lemma_exceptions: default_lemma_exceptions(),
        }
    }
}

/// Something that decides whether a text is English.
pub trait LanguageDetector {
    fn is_english(&self, text: &str) -> bool;
}

/// Share of whitespace tokens found in a 150-word function-word list.
#[derive(Debug, Clone, Copy)]
pub struct FunctionWordDetector {
    pub threshold: f64,
}

impl LanguageDetector for FunctionWordDetector {
    fn is_english(&self, text: &str) -> bool {
        detect_english(text, self.threshold)
    }
}

pub fn function_word_ratio(text: &str) -> Option<f64> {
    let tokens: Vec<String> = text
        .split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric() && c != '\'').to_lowercase())
        .collect();
    if tokens.is_empty() {
        return None;
    }
    let hits = tokens
        .iter()
        .filter(|t| FUNCTION_WORD_SET.contains(t.as_str()))
        .count();
    Some(hits as f64 / tokens.len() as f64)
}

pub fn detect_english(text: &str, threshold: f64) -> bool {
    function_word_ratio(text).is_some_and(|r| r >= threshold)
}

fn is_punct_or_symbol(c: char) -> bool {
    let mut buf = [0u8; 4];
    PUNCT_OR_SYMBOL.is_match(c.encode_utf8(&mut buf))
}

/// Replace punctuation and symbols by spaces, keeping apostrophes and
/// hyphens that sit between two alphanumeric characters.
fn strip_punctuation(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        if !is_punct_or_symbol(c) {
            out.push(c);
            continue;
        }
        let joiner = matches!(c, '\'' | '\u{2019}' | '-');
        let inside = i > 0
            && i + 1 < chars.len()
            && chars[i - 1].is_alphanumeric()
            && chars[i + 1].is_alphanumeric();
        if joiner && inside {
            out.push(if c == '-' { '-' } else { '\'' });
        } else {
            out.push(' ');
        }
    }
    out
}

fn is_numeral(token: &str) -> bool {
    token.chars().all(|c| c.is_numeric())
}

/// Marks tokens that belong to a lexicon match, so multi-word phrases are
/// kept whole even when they contain stopwords.
fn lexicon_tokens(tokens: &[&str], lexicon: &Lexicon) -> Vec<bool> {
    let joined = tokens.join(" ");
    let mut starts = Vec::with_capacity(tokens.len());
    let mut pos = 0;
    for t in tokens {
        starts.push(pos);
        pos += t.len() + 1;
    }
    let mut hit = vec![false; tokens.len()];
    for m in lexicon.match_spans(&joined) {
        for (i, &s) in starts.iter().enumerate() {
            if s >= m.0 && s < m.1 {
                hit[i] = true;
            }
        }
    }
    hit
}

/// Run the full cleaning chain and return the surviving tokens.
pub fn clean(text: &str, lexicon: &Lexicon, config: &PreprocessConfig) -> Vec<String> {
    let no_tags = HTML_TAG.replace_all(text, " ");
    let lower = no_tags.to_lowercase();
    let normalized = lexicon.normalize_text(&lower);
    let stripped = strip_punctuation(&normalized);
    let tokens: Vec<&str> = stripped.split_whitespace().filter(|t| !is_numeral(t)).collect();
    let protected = lexicon_tokens(&tokens, lexicon);
    let stop = stopwords();
    tokens
        .iter()
        .zip(protected)
        .filter_map(|(&t, in_lexicon)| {
            let keep = in_lexicon || config.retain_words.contains(t);
            if keep {
                Some(t.to_string())
            } else if stop.contains(t) {
                None
            } else {
                Some(lemmatize(t, &config.lemma_exceptions))
            }
        })
        .collect()
}

/// Reusable cleaner bound to one lexicon and configuration.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    lexicon: Lexicon,
    config: PreprocessConfig,
}

impl Preprocessor {
    pub fn new(lexicon: Lexicon, config: PreprocessConfig) -> Self {
        Preprocessor { lexicon, config }
    }

    pub fn with_defaults(lexicon: Lexicon) -> Self {
        let config = PreprocessConfig::for_lexicon(&lexicon);
        Preprocessor { lexicon, config }
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn config(&self) -> &PreprocessConfig {
        &self.config
    }

    pub fn is_english(&self, text: &str) -> bool {
        detect_english(text, self.config.english_threshold)
    }

    pub fn clean(&self, text: &str) -> Vec<String> {
        clean(text, &self.lexicon, &self.config)
    }
}
