use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::SparseVector;
use crate::{Error, Result};

/// Fitted TF-IDF vocabulary with smoothed inverse document frequencies,
/// `idf(t) = ln((1 + N) / (1 + df(t))) + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    /// token -> column, columns assigned in lexicographic token order
    pub vocabulary: BTreeMap<String, usize>,
    pub idf: Vec<f64>,
    pub n_docs: usize,
}

pub fn fit_tfidf<S: AsRef<str>>(docs: &[Vec<S>]) -> Result<TfidfModel> {
    if docs.iter().all(|d| d.is_empty()) {
        return Err(Error::EmptyInput("every document is empty".into()));
    }
    let mut df: HashMap<&str, usize> = HashMap::new();
    for doc in docs {
        let distinct: BTreeSet<&str> = doc.iter().map(|t| t.as_ref()).collect();
        for t in distinct {
            *df.entry(t).or_default() += 1;
        }
    }
    let mut tokens: Vec<&str> = df.keys().copied().collect();
    tokens.sort_unstable();
    let n = docs.len() as f64;
    let idf = tokens
        .iter()
        .map(|t| ((1.0 + n) / (1.0 + df[t] as f64)).ln() + 1.0)
        .collect();
    let vocabulary = tokens
        .into_iter()
        .enumerate()
        .map(|(i, t)| (t.to_string(), i))
        .collect();
    Ok(TfidfModel {
        vocabulary,
        idf,
        n_docs: docs.len(),
    })
}

/// Raw counts times idf, L2-normalized. Unknown tokens are ignored.
pub fn transform_tfidf<S: AsRef<str>>(model: &TfidfModel, doc: &[S]) -> SparseVector {
    model.transform(doc)
}

impl TfidfModel {
    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn column(&self, token: &str) -> Option<usize> {
        self.vocabulary.get(token).copied()
    }

    pub fn transform<S: AsRef<str>>(&self, doc: &[S]) -> SparseVector {
        let mut counts: HashMap<usize, f64> = HashMap::new();
        for t in doc {
            if let Some(&col) = self.vocabulary.get(t.as_ref()) {
                *counts.entry(col).or_default() += 1.0;
            }
        }
        let pairs: Vec<(u32, f64)> = counts
            .into_iter()
            .map(|(col, c)| (col as u32, c * self.idf[col]))
            .collect();
        let mut v = SparseVector::from_pairs(self.dim(), pairs);
        let norm = v.norm();
        if norm > 0.0 {
            for x in &mut v.values {
                *x /= norm;
            }
        }
        v
    }

    pub fn transform_all<S: AsRef<str>>(&self, docs: &[Vec<S>]) -> Vec<SparseVector> {
        docs.iter().map(|d| self.transform(d)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(d: &[&[&str]]) -> Vec<Vec<String>> {
        d.iter().map(|x| x.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn two_document_example() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a", "c"]])).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["a", "b", "c"]);
        assert!((m.idf[0] - 1.0).abs() < 1e-12);
        assert!((m.idf[1] - 1.405_465).abs() < 1e-6);
        assert!((m.idf[2] - 1.405_465).abs() < 1e-6);

        let v = m.transform(&["a", "b"]);
        assert!((v.get(0) - 0.5797).abs() < 1e-4);
        assert!((v.get(1) - 0.8148).abs() < 1e-4);
        assert_eq!(v.get(2), 0.0);
    }

    #[test]
    fn idf_floor_is_one() {
        let m = fit_tfidf(&docs(&[&["x"]])).unwrap();
        assert_eq!(m.idf, vec![1.0]);
        let ten: Vec<Vec<String>> = (0..10).map(|i| vec!["t".to_string(), format!("u{i}")]).collect();
        let m = fit_tfidf(&ten).unwrap();
        assert_eq!(m.idf[m.column("t").unwrap()], 1.0);
        assert!(m.idf.iter().all(|&x| x >= 1.0));
    }

    #[test]
    fn empty_and_unseen_docs_are_zero() {
        let m = fit_tfidf(&docs(&[&["a", "b"], &["a", "c"]])).unwrap();
        let empty: [&str; 0] = [];
        assert_eq!(m.transform(&empty).nnz(), 0);
        assert_eq!(m.transform(&["zzz", "yyy"]).nnz(), 0);
        assert_eq!(m.transform(&["zzz"]).dim, 3);
    }

    #[test]
    fn all_empty_docs_rejected() {
        let d: Vec<Vec<String>> = vec![vec![], vec![]];
        assert!(fit_tfidf(&d).is_err());
    }
}
