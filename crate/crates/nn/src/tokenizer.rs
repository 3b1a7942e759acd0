//! Uncased BERT tokenization: basic splitting (lowercase, accent stripping,
//! punctuation isolation) followed by greedy longest-match WordPiece.

use std::collections::HashMap;
use std::path::Path;
use std::sync::LazyLock;

use regex::Regex;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

use crate::{Error, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";

const MAX_WORD_CHARS: usize = 100;

static TINY_VOCAB: &str = include_str!("../data/tiny_vocab.txt");

static PUNCT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[\p{P}]$").expect("valid regex"));

#[derive(Debug, Clone)]
pub struct WordPiece {
    vocab: Vec<String>,
    index: HashMap<String, u32>,
    pad: u32,
    unk: u32,
    cls: u32,
    sep: u32,
}

/// Token ids and attention mask for a batch, row-major `[batch, max_len]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Encoding {
    pub ids: Vec<Vec<u32>>,
    pub mask: Vec<Vec<u32>>,
}

impl Encoding {
    pub fn batch_size(&self) -> usize {
        self.ids.len()
    }

    pub fn max_len(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }
}

fn is_punct(c: char) -> bool {
    // ASCII symbols count as punctuation for BERT even when Unicode says otherwise
    c.is_ascii_punctuation() || PUNCT.is_match(c.encode_utf8(&mut [0; 4]))
}

fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF | 0x3400..=0x4DBF | 0x20000..=0x2A6DF | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F | 0x2B820..=0x2CEAF | 0xF900..=0xFAFF | 0x2F800..=0x2FA1F)
}

/// Lowercase, strip accents, and split into words and single punctuation marks.
pub fn basic_tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len());
    for c in text.chars() {
        if c == '\0' || c == '\u{FFFD}' || (c.is_control() && !c.is_whitespace()) {
            continue;
        }
        if is_cjk(c) {
            spaced.push(' ');
            spaced.push(c);
            spaced.push(' ');
        } else if c.is_whitespace() {
            spaced.push(' ');
        } else {
            spaced.push(c);
        }
    }
    let mut out = Vec::new();
    for word in spaced.split_whitespace() {
        let folded: String = word.to_lowercase().nfd().filter(|c| !is_combining_mark(*c)).collect();
        let mut cur = String::new();
        for c in folded.chars() {
            if is_punct(c) {
                if !cur.is_empty() {
                    out.push(std::mem::take(&mut cur));
                }
                out.push(c.to_string());
            } else {
                cur.push(c);
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
    }
    out
}

impl WordPiece {
    pub fn from_vocab_text(text: &str) -> Result<Self> {
        let vocab: Vec<String> = text.lines().map(|l| l.trim_end_matches('\r').to_string()).collect();
        let mut index = HashMap::with_capacity(vocab.len());
        for (i, tok) in vocab.iter().enumerate() {
            index.entry(tok.clone()).or_insert(i as u32);
        }
        let special = |t: &str| {
            index
                .get(t)
                .copied()
                .ok_or_else(|| Error::Config(format!("vocabulary lacks the {t} token")))
        };
        Ok(WordPiece {
            pad: special(PAD)?,
            unk: special(UNK)?,
            cls: special(CLS)?,
            sep: special(SEP)?,
            vocab,
            index,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_vocab_text(&text)
    }

    /// The small vocabulary bundled for the offline test encoder.
    pub fn tiny() -> Self {
        Self::from_vocab_text(TINY_VOCAB).expect("bundled vocabulary is valid")
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    pub fn vocab_text(&self) -> String {
        let mut s = self.vocab.join("\n");
        s.push('\n');
        s
    }

    pub fn pad_id(&self) -> u32 {
        self.pad
    }

    pub fn cls_id(&self) -> u32 {
        self.cls
    }

    pub fn sep_id(&self) -> u32 {
        self.sep
    }

    pub fn unk_id(&self) -> u32 {
        self.unk
    }

    pub fn is_special(&self, id: u32) -> bool {
        id == self.pad || id == self.cls || id == self.sep
    }

    pub fn token(&self, id: u32) -> &str {
        self.vocab.get(id as usize).map_or(UNK, String::as_str)
    }

    fn word_pieces(&self, word: &str, out: &mut Vec<u32>) {
        let chars: Vec<char> = word.chars().collect();
        if chars.len() > MAX_WORD_CHARS {
            out.push(self.unk);
            return;
        }
        let mut pieces = Vec::new();
        let mut start = 0;
        while start < chars.len() {
            let mut end = chars.len();
            let mut found = None;
            while end > start {
                let mut sub: String = chars[start..end].iter().collect();
                if start > 0 {
                    sub.insert_str(0, "##");
                }
                if let Some(&id) = self.index.get(&sub) {
                    found = Some(id);
                    break;
                }
                end -= 1;
            }
            match found {
                Some(id) => pieces.push(id),
                None => {
                    out.push(self.unk);
                    return;
                }
            }
            start = end;
        }
        out.extend(pieces);
    }

    /// Subword ids without special tokens.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut ids = Vec::new();
        for w in basic_tokenize(text) {
            self.word_pieces(&w, &mut ids);
        }
        ids
    }

    /// `[CLS] pieces [SEP]` truncated and padded to `max_len`.
    pub fn encode_one(&self, text: &str, max_len: usize) -> (Vec<u32>, Vec<u32>) {
        assert!(max_len >= 2, "max_len must leave room for the special tokens");
        let mut pieces = self.tokenize(text);
        pieces.truncate(max_len - 2);
        let mut ids = Vec::with_capacity(max_len);
        ids.push(self.cls);
        ids.extend(pieces);
        ids.push(self.sep);
        let real = ids.len();
        ids.resize(max_len, self.pad);
        let mut mask = vec![1u32; real];
        mask.resize(max_len, 0);
        (ids, mask)
    }

    pub fn encode<S: AsRef<str>>(&self, texts: &[S], max_len: usize) -> Encoding {
        let (ids, mask) = texts.iter().map(|t| self.encode_one(t.as_ref(), max_len)).unzip();
        Encoding { ids, mask }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basic_splitting() {
        assert_eq!(
            basic_tokenize("Héllo, WORLD!! it's"),
            vec!["hello", ",", "world", "!", "!", "it", "'", "s"]
        );
        assert_eq!(basic_tokenize("$20/g"), vec!["$", "20", "/", "g"]);
        assert!(basic_tokenize("  \t ").is_empty());
    }

    #[test]
    fn wordpiece_longest_match() {
        let wp = WordPiece::from_vocab_text("[PAD]\n[UNK]\n[CLS]\n[SEP]\nun\n##aff\n##able\nunaff\n").unwrap();
        let ids = wp.tokenize("unaffable");
        let toks: Vec<&str> = ids.iter().map(|&i| wp.token(i)).collect();
        assert_eq!(toks, vec!["unaff", "##able"]);
        assert_eq!(wp.tokenize("xyz"), vec![wp.unk_id()]);
    }

    #[test]
    fn empty_text_is_specials_and_pads() {
        let wp = WordPiece::tiny();
        let (ids, mask) = wp.encode_one("", 128);
        assert_eq!(ids.len(), 128);
        assert_eq!(ids[0], wp.cls_id());
        assert_eq!(ids[1], wp.sep_id());
        assert!(ids[2..].iter().all(|&i| i == wp.pad_id()));
        assert_eq!(mask.iter().sum::<u32>(), 2);
    }

    #[test]
    fn long_text_truncates_to_full_mask() {
        let wp = WordPiece::tiny();
        let long = "oxy ".repeat(300);
        let (ids, mask) = wp.encode_one(&long, 128);
        assert_eq!(mask.iter().sum::<u32>(), 128);
        assert_eq!(ids[127], wp.sep_id());
        let enc = wp.encode(&["a", "b"], 128);
        assert_eq!((enc.batch_size(), enc.max_len()), (2, 128));
    }

    #[test]
    fn tiny_vocab_keeps_lexicon_terms_whole() {
        let wp = WordPiece::tiny();
        for w in ["oxy", "fent", "plug", "heroin", "clean"] {
            let ids = wp.tokenize(w);
            assert_eq!(ids.len(), 1, "{w}");
            assert_eq!(wp.token(ids[0]), w);
        }
    }
}
