//! Classical classifiers over sparse TF-IDF vectors: logistic regression,
//! gradient-boosted trees, random forest, a single decision tree, an RBF
//! SVM and a majority-class control.

mod forest;
mod gboost;
mod logreg;
mod svm;
mod tree;

pub use forest::{Forest, ForestParams, MaxFeatures};
pub use gboost::{BoostParams, Booster};
pub use logreg::{Logreg, LogregParams};
pub use svm::{scale_gamma, Gamma, Svm, SvmParams};
pub use tree::{Node, Tree};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::{argmax, seeded_rng, Error, Label, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Logreg,
    Gboost,
    Forest,
    Tree,
    SvmRbf,
    Majority,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Logreg,
        Algorithm::Gboost,
        Algorithm::Forest,
        Algorithm::Tree,
        Algorithm::SvmRbf,
        Algorithm::Majority,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Logreg => "logreg",
            Algorithm::Gboost => "gboost",
            Algorithm::Forest => "forest",
            Algorithm::Tree => "tree",
            Algorithm::SvmRbf => "svm",
            Algorithm::Majority => "majority",
        }
    }

    /// Tuned defaults; every accepted parameter key appears here.
    pub fn default_params(self) -> Params {
        let mut p = Params::new();
        let mut set = |k: &str, v: ParamValue| {
            p.insert(k.to_string(), v);
        };
        use ParamValue::{Number as N, Text as T};
        match self {
            Algorithm::Logreg => {
                set("C", N(1.0));
                set("max_iter", N(500.0));
                set("tol", N(1e-4));
            }
            Algorithm::Gboost => {
                set("n_estimators", N(200.0));
                set("max_depth", N(6.0));
                set("learning_rate", N(0.1));
                set("subsample", N(0.8));
                set("lambda", N(1.0));
                set("min_child_weight", N(1.0));
            }
            Algorithm::Forest => {
                set("n_estimators", N(150.0));
                set("max_depth", N(10.0));
                set("min_samples_split", N(2.0));
                set("max_features", T("sqrt".into()));
                set("bootstrap", T("true".into()));
            }
            Algorithm::Tree => {
                set("max_depth", T("none".into()));
                set("min_samples_split", N(2.0));
                set("max_features", T("all".into()));
            }
            Algorithm::SvmRbf => {
                set("C", N(1.0));
                set("gamma", T("scale".into()));
                set("tol", N(1e-3));
                set("max_iter", N(1e6));
            }
            Algorithm::Majority => {}
        }
        p
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "logreg" | "lr" => Ok(Algorithm::Logreg),
            "gboost" | "xgb" => Ok(Algorithm::Gboost),
            "forest" | "rf" => Ok(Algorithm::Forest),
            "tree" | "dt" => Ok(Algorithm::Tree),
            "svm" | "svm_rbf" => Ok(Algorithm::SvmRbf),
            "majority" => Ok(Algorithm::Majority),
            _ => Err(Error::Param {
                name: "algorithm".into(),
                message: format!("unknown classical algorithm {s:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Text(String),
}

impl ParamValue {
    pub fn parse(s: &str) -> Self {
        match s.trim().parse::<f64>() {
            Ok(v) => ParamValue::Number(v),
            Err(_) => ParamValue::Text(s.trim().to_string()),
        }
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Number(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalConfig {
    pub algorithm: Algorithm,
    /// overrides on top of [`Algorithm::default_params`]
    pub params: Params,
    pub seed: u64,
}

impl ClassicalConfig {
    pub fn new(algorithm: Algorithm, seed: u64) -> Self {
        ClassicalConfig {
            algorithm,
            params: Params::new(),
            seed,
        }
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    /// Defaults merged with overrides; unknown keys are rejected.
    pub fn effective_params(&self) -> Result<Params> {
        let mut p = self.algorithm.default_params();
        for (k, v) in &self.params {
            if !p.contains_key(k) {
                let known: Vec<&str> = p.keys().map(String::as_str).collect();
                return Err(Error::Param {
                    name: k.clone(),
                    message: format!("not a {} parameter (known: {})", self.algorithm, known.join(", ")),
                });
            }
            p.insert(k.clone(), v.clone());
        }
        Ok(p)
    }
}

fn param_error(name: &str, message: impl Into<String>) -> Error {
    Error::Param {
        name: name.into(),
        message: message.into(),
    }
}

fn number(p: &Params, key: &str) -> Result<f64> {
    match &p[key] {
        ParamValue::Number(v) if v.is_finite() => Ok(*v),
        other => Err(param_error(key, format!("expected a number, got {other}"))),
    }
}

fn positive(p: &Params, key: &str) -> Result<f64> {
    let v = number(p, key)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(param_error(key, format!("must be positive, got {v}")))
    }
}

fn count(p: &Params, key: &str) -> Result<usize> {
    let v = number(p, key)?;
    if v >= 1.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(param_error(key, format!("expected a positive integer, got {v}")))
    }
}

fn optional_count(p: &Params, key: &str) -> Result<Option<usize>> {
    match &p[key] {
        ParamValue::Text(s) if s.eq_ignore_ascii_case("none") => Ok(None),
        _ => count(p, key).map(Some),
    }
}

fn flag(p: &Params, key: &str) -> Result<bool> {
    match &p[key] {
        ParamValue::Text(s) => s.parse().map_err(|_| param_error(key, format!("expected true or false, got {s}"))),
        ParamValue::Number(v) => Ok(*v != 0.0),
    }
}

fn max_features(p: &Params) -> Result<MaxFeatures> {
    match &p["max_features"] {
        ParamValue::Text(s) if s.eq_ignore_ascii_case("sqrt") => Ok(MaxFeatures::Sqrt),
        ParamValue::Text(s) if s.eq_ignore_ascii_case("all") || s.eq_ignore_ascii_case("none") => Ok(MaxFeatures::All),
        _ => count(p, "max_features").map(MaxFeatures::Count),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fitted {
    Logreg(Logreg),
    Booster(Booster),
    Forest(Forest),
    Svm(Svm),
    Majority(usize),
}

/// A trained classical model. Internally classes are indexed over the labels
/// seen in training, in label-code order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub config: ClassicalConfig,
    pub n_features: usize,
    pub classes: Vec<Label>,
    pub fitted: Fitted,
}

fn check_dims(x: &[SparseVector], dim: usize) -> Result<()> {
    match x.iter().find(|v| v.dim != dim) {
        Some(v) => Err(Error::DimensionMismatch { expected: dim, got: v.dim }),
        None => Ok(()),
    }
}

pub fn train_classical(config: &ClassicalConfig, x: &[SparseVector], y: &[Label]) -> Result<ClassicalModel> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::EmptyInput("no training rows".into()));
    }
    let n_features = x[0].dim;
    check_dims(x, n_features)?;
    let classes: Vec<Label> = Label::ALL.into_iter().filter(|l| y.contains(l)).collect();
    if classes.len() < 2 {
        return Err(Error::SingleClass(classes.len()));
    }
    let idx: Vec<usize> = y
        .iter()
        .map(|l| classes.iter().position(|c| c == l).expect("label collected above"))
        .collect();
    let k = classes.len();
    let p = config.effective_params()?;
    let mut rng = seeded_rng(config.seed);
    let fitted = match config.algorithm {
        Algorithm::Logreg => Fitted::Logreg(Logreg::fit(
            x,
            &idx,
            k,
            &LogregParams {
                c: positive(&p, "C")?,
                max_iter: count(&p, "max_iter")?,
                tol: positive(&p, "tol")?,
            },
        )),
        Algorithm::Gboost => {
            let subsample = positive(&p, "subsample")?;
            if subsample > 1.0 {
                return Err(param_error("subsample", "must be in (0, 1]"));
            }
            Fitted::Booster(Booster::fit(
                x,
                &idx,
                k,
                &BoostParams {
                    n_estimators: count(&p, "n_estimators")?,
                    max_depth: count(&p, "max_depth")?,
                    learning_rate: positive(&p, "learning_rate")?,
                    subsample,
                    lambda: number(&p, "lambda")?.max(0.0),
                    min_child_weight: number(&p, "min_child_weight")?.max(0.0),
                },
                &mut rng,
            ))
        }
        Algorithm::Forest => Fitted::Forest(Forest::fit(
            x,
            &idx,
            k,
            &ForestParams {
                n_estimators: count(&p, "n_estimators")?,
                max_depth: optional_count(&p, "max_depth")?,
                min_samples_split: count(&p, "min_samples_split")?.max(2),
                max_features: max_features(&p)?,
                bootstrap: flag(&p, "bootstrap")?,
            },
            &mut rng,
        )),
        Algorithm::Tree => Fitted::Forest(Forest::fit(
            x,
            &idx,
            k,
            &ForestParams {
                n_estimators: 1,
                max_depth: optional_count(&p, "max_depth")?,
                min_samples_split: count(&p, "min_samples_split")?.max(2),
                max_features: max_features(&p)?,
                bootstrap: false,
            },
            &mut rng,
        )),
        Algorithm::SvmRbf => {
            let gamma = match &p["gamma"] {
                ParamValue::Text(s) if s.eq_ignore_ascii_case("scale") => Gamma::Scale,
                ParamValue::Text(s) if s.eq_ignore_ascii_case("auto") => Gamma::Auto,
                _ => Gamma::Value(positive(&p, "gamma")?),
            };
            Fitted::Svm(Svm::fit(
                x,
                &idx,
                k,
                &SvmParams {
                    c: positive(&p, "C")?,
                    gamma,
                    tol: positive(&p, "tol")?,
                    max_iter: count(&p, "max_iter")?,
                },
            ))
        }
        Algorithm::Majority => {
            let mut counts = vec![0.0; k];
            for &i in &idx {
                counts[i] += 1.0;
            }
            Fitted::Majority(argmax(&counts))
        }
    };
    Ok(ClassicalModel {
        config: config.clone(),
        n_features,
        classes,
        fitted,
    })
}

const BLOB_MAGIC: &[u8; 8] = b"SABIACLF";
const BLOB_VERSION: u32 = 1;

impl ClassicalModel {
    /// Per-class scores in the model's own units (probabilities, margins or
    /// votes), indexed by `self.classes`.
    pub fn scores(&self, x: &SparseVector) -> Vec<f64> {
        match &self.fitted {
            Fitted::Logreg(m) => m.margins(x),
            Fitted::Booster(m) => m.margins(x),
            Fitted::Forest(m) => m.proba(x),
            Fitted::Svm(m) => m.votes(x),
            Fitted::Majority(c) => {
                let mut s = vec![0.0; self.classes.len()];
                s[*c] = 1.0;
                s
            }
        }
    }

    pub fn predict(&self, x: &[SparseVector]) -> Result<Vec<Label>> {
        check_dims(x, self.n_features)?;
        Ok(x.iter().map(|v| self.classes[argmax(&self.scores(v))]).collect())
    }

    pub fn to_blob(&self) -> Vec<u8> {
        let mut out = BLOB_MAGIC.to_vec();
        out.extend_from_slice(&BLOB_VERSION.to_le_bytes());
        ciborium::into_writer(self, &mut out).expect("in-memory write");
        out
    }

    pub fn from_blob(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 12 || &bytes[..8] != BLOB_MAGIC {
            return Err(Error::ModelBlob("not a classical model blob".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != BLOB_VERSION {
            return Err(Error::ModelBlob(format!("unsupported blob version {version}")));
        }
        ciborium::from_reader(&bytes[12..]).map_err(|e| Error::ModelBlob(e.to_string()))
    }
}

/// Convenience wrapper matching the free-function style of the rest of the crate.
pub fn predict(model: &ClassicalModel, x: &[SparseVector]) -> Result<Vec<Label>> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// Two well-separated clusters per class along distinct axes.
    fn clusters(n_per: usize, seed: u64) -> (Vec<SparseVector>, Vec<Label>) {
        let mut rng = seeded_rng(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for l in [Label::Dealer, Label::NonUser, Label::ActiveUser] {
            for _ in 0..n_per {
                let mut d = vec![0.0; 6];
                d[l.code() % 6] = 1.0 + rng.random_range(0.0..0.3);
                d[5] = rng.random_range(0.0..0.2);
                x.push(SparseVector::from_dense(&d));
                y.push(l);
            }
        }
        (x, y)
    }

    #[test]
    fn every_algorithm_fits_separable_clusters() {
        let (x, y) = clusters(15, 1);
        for algo in Algorithm::ALL {
            if algo == Algorithm::Majority {
                continue;
            }
            let m = train_classical(&ClassicalConfig::new(algo, 3), &x, &y).unwrap();
            let pred = m.predict(&x).unwrap();
            assert_eq!(pred, y, "{algo} failed to fit");
        }
    }

    #[test]
    fn majority_control_and_ties() {
        let x = vec![SparseVector::zeros(2); 4];
        let y = [Label::NonUser, Label::NonUser, Label::Dealer, Label::Dealer];
        let m = train_classical(&ClassicalConfig::new(Algorithm::Majority, 0), &x, &y).unwrap();
        assert_eq!(m.predict(&x[..1]).unwrap(), vec![Label::Dealer]);
    }

    #[test]
    fn preconditions() {
        let (x, y) = clusters(3, 2);
        let cfg = ClassicalConfig::new(Algorithm::Logreg, 0);
        assert!(matches!(train_classical(&cfg, &x, &y[1..]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(
            train_classical(&cfg, &x[..3], &y[..3]),
            Err(Error::SingleClass(1))
        ));
        let m = train_classical(&cfg, &x, &y).unwrap();
        assert!(m.predict(&[]).unwrap().is_empty());
        assert!(m.predict(&[SparseVector::zeros(99)]).is_err());
        let bad = cfg.clone().with_param("depth", ParamValue::Number(3.0));
        assert!(matches!(train_classical(&bad, &x, &y), Err(Error::Param { .. })));
        let bad = cfg.with_param("C", ParamValue::Number(-1.0));
        assert!(train_classical(&bad, &x, &y).is_err());
    }

    #[test]
    fn seeded_training_is_deterministic_and_blobs_round_trip() {
        let (x, y) = clusters(10, 5);
        let (xt, _) = clusters(5, 6);
        for algo in [Algorithm::Forest, Algorithm::Gboost] {
            let mut cfg = ClassicalConfig::new(algo, 11);
            cfg.params.insert("n_estimators".into(), ParamValue::Number(10.0));
            let a = train_classical(&cfg, &x, &y).unwrap();
            let b = train_classical(&cfg, &x, &y).unwrap();
            assert_eq!(a.predict(&xt).unwrap(), b.predict(&xt).unwrap());
            let back = ClassicalModel::from_blob(&a.to_blob()).unwrap();
            assert_eq!(back, a);
        }
        assert!(ClassicalModel::from_blob(b"garbage").is_err());
    }

    #[test]
    fn algorithm_names_parse() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bogus".parse::<Algorithm>().is_err());
    }
}
