use rand::Rng;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Gini, GrowParams, Tree};
use crate::features::SparseVector;
use crate::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> Option<usize> {
        match self {
            MaxFeatures::Sqrt => Some(((n_features as f64).sqrt() as usize).max(1)),
            MaxFeatures::All => None,
            MaxFeatures::Count(k) => Some(k.max(1)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
}

/// Gini trees averaged by leaf class distribution. With one estimator and
/// no bootstrap this is a plain decision tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
    pub n_classes: usize,
}

impl Forest {
    pub fn fit(x: &[SparseVector], classes: &[usize], n_classes: usize, p: &ForestParams, rng: &mut SeededRng) -> Self {
        let n = x.len();
        let dim = x.first().map_or(0, |v| v.dim);
        let grow_params = GrowParams {
            max_depth: p.max_depth,
            min_split: p.min_samples_split as f64,
            min_child: 1.0,
            max_features: p.max_features.resolve(dim),
            min_gain: 1e-12,
        };
        let trees = (0..p.n_estimators)
            .map(|_| {
                let mut weights = vec![0.0; n];
                if p.bootstrap {
                    for _ in 0..n {
                        weights[rng.random_range(0..n)] += 1.0;
                    }
                } else {
                    weights.fill(1.0);
                }
                let rows: Vec<usize> = (0..n).filter(|&i| weights[i] > 0.0).collect();
                let crit = Gini {
                    classes,
                    weights: &weights,
                    n_classes,
                };
                grow(x, rows, &crit, &grow_params, rng)
            })
            .collect();
        Forest { trees, n_classes }
    }

    pub fn proba(&self, x: &SparseVector) -> Vec<f64> {
        let mut p = vec![0.0; self.n_classes];
        for t in &self.trees {
            for (acc, v) in p.iter_mut().zip(t.leaf_value(x)) {
                *acc += v;
            }
        }
        let k = self.trees.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= k);
        p
    }
}
