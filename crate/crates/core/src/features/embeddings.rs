use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What an out-of-vocabulary lookup returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OovPolicy {
    #[default]
    Zeros,
    Mean,
}

/// Whole-token word vectors read from GloVe/fastText style text files.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
    mean: Vec<f32>,
    oov_policy: OovPolicy,
    rejected_lines: Vec<usize>,
}

/// Load `token v1 .. v_dim` lines. Lines of the wrong arity (including a
/// fastText `count dim` header) are skipped and reported.
pub fn load_embeddings(path: impl AsRef<Path>, dim: usize) -> Result<EmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(file, dim, path)
}

/// Dimension of the bundled toy table.
pub const TOY_DIM: usize = 50;

const TOY_EMBEDDINGS: &str = include_str!("../../data/toy_embeddings_50d.txt");

/// Small seeded 50-dimensional table covering the synthetic corpus
/// vocabulary, for tests and demos without a real vector file.
pub fn toy_embeddings() -> EmbeddingTable {
    parse_embeddings(TOY_EMBEDDINGS.as_bytes(), TOY_DIM, Path::new("<toy embeddings>"))
        .expect("bundled toy embeddings are well formed")
}

pub fn parse_embeddings<R: Read>(reader: R, dim: usize, path: &Path) -> Result<EmbeddingTable> {
    if dim == 0 {
        return Err(Error::Param {
            name: "dim".into(),
            message: "embedding dimension must be positive".into(),
        });
    }
    let mut vectors = HashMap::new();
    let mut rejected = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("nonblank line");
        let values: std::result::Result<Vec<f32>, _> = parts.map(str::parse::<f32>).collect();
        match values {
            Ok(v) if v.len() == dim => {
                vectors.entry(token.to_string()).or_insert(v);
            }
            _ => rejected.push(i + 1),
        }
    }
    if !rejected.is_empty() {
        log::warn!(
            "{}: rejected {} line(s) with wrong arity, first at line {}",
            path.display(),
            rejected.len(),
            rejected[0]
        );
    }
    if vectors.is_empty() {
        return Err(Error::record(path, 0, "no valid embedding lines"));
    }
    Ok(EmbeddingTable::from_vectors(dim, vectors, rejected))
}

impl EmbeddingTable {
    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vec<f32>>, rejected_lines: Vec<usize>) -> Self {
        let mut mean = vec![0.0f64; dim];
        for v in vectors.values() {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += *x as f64;
            }
        }
        let n = vectors.len().max(1) as f64;
        EmbeddingTable {
            dim,
            mean: mean.into_iter().map(|m| (m / n) as f32).collect(),
            vectors,
            oov_policy: OovPolicy::Zeros,
            rejected_lines,
        }
    }

    pub fn with_oov_policy(mut self, policy: OovPolicy) -> Self {
        self.oov_policy = policy;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov_policy
    }

    /// 1-based line numbers skipped while loading.
    pub fn rejected_lines(&self) -> &[usize] {
        &self.rejected_lines
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    pub fn get(&self, token: &str) -> Option<&[f32]> {
        self.vectors.get(token).map(Vec::as_slice)
    }

    pub fn lookup(&self, token: &str) -> &[f32] {
        match self.vectors.get(token) {
            Some(v) => v,
            None => match self.oov_policy {
                OovPolicy::Zeros => &ZEROS[..self.dim.min(ZEROS.len())],
                OovPolicy::Mean => &self.mean,
            },
        }
    }

    /// Copy of the lookup that also works for dims above the static buffer.
    pub fn lookup_vec(&self, token: &str) -> Vec<f32> {
        match (self.vectors.get(token), self.oov_policy) {
            (Some(v), _) => v.clone(),
            (None, OovPolicy::Mean) => self.mean.clone(),
            (None, OovPolicy::Zeros) => vec![0.0; self.dim],
        }
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.vectors.keys().map(String::as_str)
    }

    /// Serialize in the same text format the loader reads, sorted by token.
    pub fn to_text(&self) -> String {
        let mut keys: Vec<&String> = self.vectors.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(k);
            for x in &self.vectors[k] {
                out.push(' ');
                out.push_str(&format!("{x:.6}"));
            }
            out.push('\n');
        }
        out
    }
}

static ZEROS: [f32; 1024] = [0.0; 1024];
