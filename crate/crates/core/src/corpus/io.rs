use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::Deserialize;

use super::{AnnotatedPost, Corpus, Label};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl CorpusFormat {
    /// Guess the format from a file extension; anything but `.csv` is JSONL.
    pub fn from_path(path: &Path) -> CorpusFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => CorpusFormat::Csv,
            _ => CorpusFormat::Jsonl,
        }
    }
}

impl std::str::FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(Error::Param {
                name: "format".into(),
                message: format!("unknown corpus format `{other}`"),
            }),
        }
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    #[serde(default)]
    subreddit: Option<String>,
    #[serde(default)]
    created_utc: Option<f64>,
    text: String,
    #[serde(default)]
    label: Option<String>,
}

impl RawRecord {
    fn into_post(self) -> std::result::Result<AnnotatedPost, String> {
        let label = match self.label.as_deref().map(str::trim) {
            None | Some("") => None,
            Some(name) => Some(
                name.parse::<Label>()
                    .map_err(|_| format!("unknown label `{name}`"))?,
            ),
        };
        let post = AnnotatedPost {
            id: self.id,
            subreddit: self.subreddit.unwrap_or_default(),
            created_utc: self.created_utc.map(|t| t as i64).unwrap_or(0),
            text: self.text,
            label,
        };
        post.validate()?;
        Ok(post)
    }
}

/// Load a corpus, keeping records in file order.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus(BufReader::new(file), format, path)
}

pub(crate) fn read_corpus<R: Read>(reader: R, format: CorpusFormat, path: &Path) -> Result<Corpus> {
    let mut records = Vec::new();
    match format {
        CorpusFormat::Jsonl => {
            for (i, line) in BufReader::new(reader).lines().enumerate() {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord = serde_json::from_str(&line)
                    .map_err(|e| Error::record(path, i + 1, e.to_string()))?;
                records.push((i + 1, raw));
            }
        }
        CorpusFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
            let headers = rdr.headers()?.clone();
            for result in rdr.records() {
                let record = result.map_err(|e| {
                    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
                    Error::record(path, line, e.to_string())
                })?;
                let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
                let raw: RawRecord = record
                    .deserialize(Some(&headers))
                    .map_err(|e| Error::record(path, line, e.to_string()))?;
                records.push((line, raw));
            }
        }
    }

    let mut corpus = Corpus::default();
    for (line, raw) in records {
        let post = raw.into_post().map_err(|m| Error::record(path, line, m))?;
        if corpus.contains_id(&post.id) {
            return Err(Error::record(path, line, format!("duplicate id `{}`", post.id)));
        }
        corpus.push(post)?;
    }
    Ok(corpus)
}

pub fn save_corpus(corpus: &Corpus, path: impl AsRef<Path>, format: CorpusFormat) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_corpus(corpus, &mut w, format)?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_corpus<W: Write>(corpus: &Corpus, writer: W, format: CorpusFormat) -> Result<()> {
    match format {
        CorpusFormat::Jsonl => {
            let mut writer = writer;
            for post in corpus {
                serde_json::to_writer(&mut writer, post)?;
                writer
                    .write_all(b"\n")
                    .map_err(|e| Error::io("<writer>", e))?;
            }
        }
        CorpusFormat::Csv => {
            let mut wtr = csv::Writer::from_writer(writer);
            wtr.write_record(["id", "subreddit", "created_utc", "text", "label"])?;
            for p in corpus {
                let created = p.created_utc.to_string();
                wtr.write_record([
                    p.id.as_str(),
                    p.subreddit.as_str(),
                    created.as_str(),
                    p.text.as_str(),
                    p.label.map(Label::name).unwrap_or(""),
                ])?;
            }
            wtr.flush().map_err(|e| Error::io("<writer>", e))?;
        }
    }
    Ok(())
}
