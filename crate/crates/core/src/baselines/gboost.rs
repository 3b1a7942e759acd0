use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::tree::{grow, GrowParams, Newton, Tree};
use crate::features::SparseVector;
use crate::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub subsample: f64,
    pub lambda: f64,
    pub min_child_weight: f64,
}

/// Softmax gradient boosting with second-order leaf weights: one regression
/// tree per class per round, rows subsampled once per round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Booster {
    /// rounds[r][k]
    pub rounds: Vec<Vec<Tree>>,
    pub n_classes: usize,
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

impl Booster {
    pub fn fit(x: &[SparseVector], classes: &[usize], n_classes: usize, p: &BoostParams, rng: &mut SeededRng) -> Self {
        let n = x.len();
        let mut margins = vec![vec![0.0; n_classes]; n];
        let grow_params = GrowParams {
            max_depth: Some(p.max_depth),
            min_split: 0.0,
            min_child: p.min_child_weight,
            max_features: None,
            min_gain: 1e-12,
        };
        let n_sub = ((p.subsample * n as f64).round() as usize).clamp(1, n);
        let mut rounds = Vec::with_capacity(p.n_estimators);
        for _ in 0..p.n_estimators {
            let probs: Vec<Vec<f64>> = margins.iter().map(|m| softmax(m)).collect();
            let mut rows: Vec<usize> = if n_sub < n { sample(rng, n, n_sub).into_vec() } else { (0..n).collect() };
            rows.sort_unstable();
            let mut trees = Vec::with_capacity(n_classes);
            for k in 0..n_classes {
                let grad: Vec<f64> = (0..n).map(|i| probs[i][k] - f64::from(classes[i] == k)).collect();
                let hess: Vec<f64> = (0..n).map(|i| (2.0 * probs[i][k] * (1.0 - probs[i][k])).max(1e-16)).collect();
                let crit = Newton {
                    grad: &grad,
                    hess: &hess,
                    lambda: p.lambda,
                    eta: p.learning_rate,
                };
                trees.push(grow(x, rows.clone(), &crit, &grow_params, rng));
            }
            for (i, m) in margins.iter_mut().enumerate() {
                for (k, t) in trees.iter().enumerate() {
                    m[k] += t.leaf_value(&x[i])[0];
                }
            }
            rounds.push(trees);
        }
        Booster { rounds, n_classes }
    }

    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        let mut m = vec![0.0; self.n_classes];
        for trees in &self.rounds {
            for (k, t) in trees.iter().enumerate() {
                m[k] += t.leaf_value(x)[0];
            }
        }
        m
    }
}
