//! Opioid keyword dictionary: formal drug names, slang, misspellings, coded
//! phrases and abbreviations.
//!
//! Matching works on whitespace tokens with leading/trailing punctuation
//! trimmed. A phrase matches when the original text between the first and
//! last token cores equals the surface, ignoring case. Matching is greedy,
//! longest first, left to right.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const STARTER_CSV: &str = include_str!("../data/lexicon.csv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryKind {
    Formal,
    Slang,
    Misspelling,
    Coded,
    Abbreviation,
}

impl EntryKind {
    /// Kinds whose surface is replaced by its canonical form during
    /// normalization. Formal terms and coded phrases are left intact.
    pub fn rewrites(self) -> bool {
        matches!(self, EntryKind::Slang | EntryKind::Misspelling | EntryKind::Abbreviation)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntryKind::Formal => "formal",
            EntryKind::Slang => "slang",
            EntryKind::Misspelling => "misspelling",
            EntryKind::Coded => "coded",
            EntryKind::Abbreviation => "abbreviation",
        }
    }
}

impl fmt::Display for EntryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "formal" => Ok(EntryKind::Formal),
            "slang" => Ok(EntryKind::Slang),
            "misspelling" => Ok(EntryKind::Misspelling),
            "coded" => Ok(EntryKind::Coded),
            "abbreviation" => Ok(EntryKind::Abbreviation),
            other => Err(Error::Lexicon(format!("unknown kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub surface: String,
    pub canonical: String,
    pub kind: EntryKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeywordMatch {
    pub surface: String,
    pub kind: EntryKind,
    /// Offset in characters (not bytes) into the original text.
    pub offset: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    entries: Vec<LexiconEntry>,
    index: HashMap<String, usize>,
    max_phrase_tokens: usize,
    warnings: Vec<String>,
}

#[derive(Deserialize)]
struct Row {
    surface: String,
    canonical: String,
    kind: String,
}

/// Load a lexicon CSV with header `surface,canonical,kind`.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Lexicon> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Lexicon::from_reader(file, path)
}

impl Lexicon {
    /// The bundled starter dictionary.
    pub fn starter() -> Lexicon {
        Lexicon::from_reader(STARTER_CSV.as_bytes(), Path::new("<starter lexicon>"))
            .expect("bundled lexicon is valid")
    }

    pub fn starter_csv() -> &'static str {
        STARTER_CSV
    }

    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Lexicon> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut entries = Vec::new();
        for result in rdr.records() {
            let record = result?;
            let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let row: Row = record
                .deserialize(Some(&headers))
                .map_err(|e| Error::record(path, line, e.to_string()))?;
            let kind = row
                .kind
                .parse::<EntryKind>()
                .map_err(|e| Error::record(path, line, e.to_string()))?;
            let surface = normalize_space(&row.surface.to_lowercase());
            let canonical = normalize_space(&row.canonical.to_lowercase());
            if surface.is_empty() {
                return Err(Error::record(path, line, "empty surface"));
            }
            let canonical = if canonical.is_empty() { surface.clone() } else { canonical };
            entries.push(LexiconEntry { surface, canonical, kind });
        }
        Lexicon::from_entries(entries)
    }

    /// Build from entries. Duplicate surfaces keep the first entry and
    /// record a warning.
    pub fn from_entries(entries: Vec<LexiconEntry>) -> Result<Lexicon> {
        let mut lex = Lexicon::default();
        for e in entries {
            if e.surface.trim().is_empty() {
                return Err(Error::Lexicon("empty surface".into()));
            }
            if e.kind == EntryKind::Formal && e.surface != e.canonical {
                return Err(Error::Lexicon(format!(
                    "formal entry `{}` must be its own canonical form",
                    e.surface
                )));
            }
            if lex.index.contains_key(&e.surface) {
                let msg = format!("duplicate surface `{}` ignored", e.surface);
                log::warn!("{msg}");
                lex.warnings.push(msg);
                continue;
            }
            lex.max_phrase_tokens = lex.max_phrase_tokens.max(e.surface.split_whitespace().count());
            lex.index.insert(e.surface.clone(), lex.entries.len());
            lex.entries.push(e);
        }
        lex.resolve_chains()?;
        Ok(lex)
    }

    /// Rewrite targets that are themselves rewritable surfaces are followed
    /// to their end, so normalization is a single-pass fixpoint.
    fn resolve_chains(&mut self) -> Result<()> {
        for i in 0..self.entries.len() {
            if !self.entries[i].kind.rewrites() {
                continue;
            }
            let mut target = self.entries[i].canonical.clone();
            let mut hops = 0;
            while let Some(&j) = self.index.get(&target) {
                let next = &self.entries[j];
                if !next.kind.rewrites() || next.canonical == next.surface {
                    break;
                }
                target = next.canonical.clone();
                hops += 1;
                if hops > self.entries.len() {
                    return Err(Error::Lexicon(format!(
                        "canonical mapping cycle through `{}`",
                        self.entries[i].surface
                    )));
                }
            }
            if hops > 0 {
                let msg = format!(
                    "`{}` maps to `{}` through a chain; using `{target}`",
                    self.entries[i].surface, self.entries[i].canonical
                );
                log::warn!("{msg}");
                self.warnings.push(msg);
                self.entries[i].canonical = target;
            }
        }
        Ok(())
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn get(&self, surface: &str) -> Option<&LexiconEntry> {
        self.index.get(surface).map(|&i| &self.entries[i])
    }

    pub fn max_phrase_tokens(&self) -> usize {
        self.max_phrase_tokens
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("surface,canonical,kind\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{}\n", e.surface, e.canonical, e.kind));
        }
        out
    }

    /// Greedy longest matches as (byte range in `text`, entry index).
    fn scan(&self, text: &str) -> Vec<(usize, usize, usize)> {
        let cores = token_cores(text);
        let mut out = Vec::new();
        let mut i = 0;
        while i < cores.len() {
            let mut matched = None;
            let longest = self.max_phrase_tokens.min(cores.len() - i);
            for n in (1..=longest).rev() {
                let (start, _) = cores[i];
                let (_, end) = cores[i + n - 1];
                let span = text[start..end].to_lowercase();
                if let Some(&idx) = self.index.get(&span) {
                    matched = Some((start, end, idx, n));
                    break;
                }
            }
            match matched {
                Some((start, end, idx, n)) => {
                    out.push((start, end, idx));
                    i += n;
                }
                None => i += 1,
            }
        }
        out
    }

    /// Replace slang, misspelling and abbreviation surfaces by their
    /// canonical form. Formal terms, coded phrases and everything else are
    /// copied through unchanged, including whitespace. Expects lowercased
    /// input; other text is matched as given.
    pub fn normalize_text(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        let mut last = 0;
        for (start, end, idx) in self.scan(text) {
            let e = &self.entries[idx];
            let same_arity =
                e.surface.split_whitespace().count() == e.canonical.split_whitespace().count();
            if !e.kind.rewrites() || e.surface == e.canonical || !same_arity {
                continue;
            }
            out.push_str(&text[last..start]);
            out.push_str(&e.canonical);
            last = end;
        }
        out.push_str(&text[last..]);
        out
    }

    /// All keyword occurrences, case-insensitive, non-overlapping.
    pub fn match_keywords(&self, text: &str) -> Vec<KeywordMatch> {
        self.scan(text)
            .into_iter()
            .map(|(start, _, idx)| {
                let e = &self.entries[idx];
                KeywordMatch {
                    surface: e.surface.clone(),
                    kind: e.kind,
                    offset: text[..start].chars().count(),
                }
            })
            .collect()
    }

    /// Byte ranges of every match in `text`.
    pub fn match_spans(&self, text: &str) -> Vec<(usize, usize)> {
        self.scan(text).into_iter().map(|(s, e, _)| (s, e)).collect()
    }

    pub fn has_keyword(&self, text: &str) -> bool {
        !self.scan(text).is_empty()
    }
}

fn normalize_space(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Byte ranges of each whitespace token with non-alphanumeric edges removed.
/// Tokens with no alphanumeric character are skipped.
fn token_cores(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut pos = 0;
    for token in text.split_whitespace() {
        let start = pos + text[pos..].find(token).expect("token comes from text");
        pos = start + token.len();
        let lead = token.len() - token.trim_start_matches(|c: char| !c.is_alphanumeric()).len();
        let core = token.trim_matches(|c: char| !c.is_alphanumeric());
        if !core.is_empty() {
            out.push((start + lead, start + lead + core.len()));
        }
    }
    out
}
