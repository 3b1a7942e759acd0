//! CART trees grown directly on sparse rows. A node's candidate features are
//! the ones nonzero in at least one of its rows; every other feature is
//! constant (zero) there and cannot split.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::features::SparseVector;
use crate::SeededRng;

/// Split statistic accumulated over rows.
pub(crate) trait Criterion {
    type Acc: Clone;
    fn empty(&self) -> Self::Acc;
    fn add(&self, acc: &mut Self::Acc, row: usize);
    fn diff(&self, total: &Self::Acc, part: &Self::Acc) -> Self::Acc;
    /// Node score; a split is worth `score(l) + score(r) - score(parent)`.
    fn score(&self, acc: &Self::Acc) -> f64;
    /// Mass used for min-split and min-child constraints.
    fn mass(&self, acc: &Self::Acc) -> f64;
    fn leaf(&self, acc: &Self::Acc) -> Vec<f64>;
    fn is_pure(&self, acc: &Self::Acc) -> bool;
}

/// Gini impurity over weighted class counts.
pub(crate) struct Gini<'a> {
    pub classes: &'a [usize],
    pub weights: &'a [f64],
    pub n_classes: usize,
}

impl Criterion for Gini<'_> {
    type Acc = Vec<f64>;

    fn empty(&self) -> Vec<f64> {
        vec![0.0; self.n_classes]
    }
    fn add(&self, acc: &mut Vec<f64>, row: usize) {
        acc[self.classes[row]] += self.weights[row];
    }
    fn diff(&self, total: &Vec<f64>, part: &Vec<f64>) -> Vec<f64> {
        total.iter().zip(part).map(|(t, p)| t - p).collect()
    }
    fn score(&self, acc: &Vec<f64>) -> f64 {
        let w: f64 = acc.iter().sum();
        if w <= 0.0 {
            return 0.0;
        }
        // -(w * gini) up to the constant w
        acc.iter().map(|c| c * c).sum::<f64>() / w
    }
    fn mass(&self, acc: &Vec<f64>) -> f64 {
        acc.iter().sum()
    }
    fn leaf(&self, acc: &Vec<f64>) -> Vec<f64> {
        let w: f64 = acc.iter().sum();
        acc.iter().map(|c| c / w).collect()
    }
    fn is_pure(&self, acc: &Vec<f64>) -> bool {
        acc.iter().filter(|c| **c > 0.0).count() <= 1
    }
}

/// Second-order boosting gain over (gradient, hessian) sums.
pub(crate) struct Newton<'a> {
    pub grad: &'a [f64],
    pub hess: &'a [f64],
    pub lambda: f64,
    pub eta: f64,
}

impl Criterion for Newton<'_> {
    type Acc = (f64, f64);

    fn empty(&self) -> (f64, f64) {
        (0.0, 0.0)
    }
    fn add(&self, acc: &mut (f64, f64), row: usize) {
        acc.0 += self.grad[row];
        acc.1 += self.hess[row];
    }
    fn diff(&self, t: &(f64, f64), p: &(f64, f64)) -> (f64, f64) {
        (t.0 - p.0, t.1 - p.1)
    }
    fn score(&self, acc: &(f64, f64)) -> f64 {
        0.5 * acc.0 * acc.0 / (acc.1 + self.lambda)
    }
    fn mass(&self, acc: &(f64, f64)) -> f64 {
        acc.1
    }
    fn leaf(&self, acc: &(f64, f64)) -> Vec<f64> {
        vec![-self.eta * acc.0 / (acc.1 + self.lambda)]
    }
    fn is_pure(&self, _: &(f64, f64)) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &SparseVector) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x.get(*feature as usize) <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    /// minimum node mass to attempt a split
    pub min_split: f64,
    /// minimum mass on each side of a split
    pub min_child: f64,
    /// features sampled per node; `None` means all candidates
    pub max_features: Option<usize>,
    pub min_gain: f64,
}

struct Candidate {
    feature: u32,
    threshold: f64,
    gain: f64,
}

/// Grow a tree on `rows` (indices into `x`).
pub(crate) fn grow<C: Criterion>(
    x: &[SparseVector],
    rows: Vec<usize>,
    crit: &C,
    params: &GrowParams,
    rng: &mut SeededRng,
) -> Tree {
    let mut tree = Tree { nodes: Vec::new() };
    build(x, rows, crit, params, rng, 0, &mut tree);
    tree
}

fn build<C: Criterion>(
    x: &[SparseVector],
    rows: Vec<usize>,
    crit: &C,
    params: &GrowParams,
    rng: &mut SeededRng,
    depth: usize,
    tree: &mut Tree,
) -> u32 {
    let id = tree.nodes.len() as u32;
    let mut total = crit.empty();
    for &r in &rows {
        crit.add(&mut total, r);
    }
    tree.nodes.push(Node::Leaf(crit.leaf(&total)));

    let can_split = params.max_depth.is_none_or(|d| depth < d)
        && crit.mass(&total) >= params.min_split
        && rows.len() >= 2
        && !crit.is_pure(&total);
    if !can_split {
        return id;
    }
    let Some(best) = best_split(x, &rows, &total, crit, params, rng) else {
        return id;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = rows
        .into_iter()
        .partition(|&r| x[r].get(best.feature as usize) <= best.threshold);
    let l = build(x, left, crit, params, rng, depth + 1, tree);
    let r = build(x, right, crit, params, rng, depth + 1, tree);
    tree.nodes[id as usize] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left: l,
        right: r,
    };
    id
}

fn best_split<C: Criterion>(
    x: &[SparseVector],
    rows: &[usize],
    total: &C::Acc,
    crit: &C,
    params: &GrowParams,
    rng: &mut SeededRng,
) -> Option<Candidate> {
    // feature -> nonzero (value, row) pairs within the node
    let mut buckets: HashMap<u32, Vec<(f64, usize)>> = HashMap::new();
    for &r in rows {
        for (&f, &v) in x[r].indices.iter().zip(&x[r].values) {
            buckets.entry(f).or_default().push((v, r));
        }
    }
    let mut features: Vec<u32> = buckets
        .iter()
        .filter(|(_, b)| b.len() < rows.len() || b.iter().any(|(v, _)| *v != b[0].0))
        .map(|(f, _)| *f)
        .collect();
    features.sort_unstable();
    if let Some(m) = params.max_features {
        if m < features.len() {
            features.shuffle(rng);
            features.truncate(m);
        }
    }

    let parent = crit.score(total);
    let mut best: Option<Candidate> = None;
    for f in features {
        let bucket = buckets.get_mut(&f).expect("feature came from buckets");
        bucket.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nonzero = crit.empty();
        for &(_, r) in bucket.iter() {
            crit.add(&mut nonzero, r);
        }
        let zeros = crit.diff(total, &nonzero);
        let n_zero = rows.len() - bucket.len();

        // sorted sweep with the implicit zero block spliced in at value 0
        let split_at = bucket.partition_point(|(v, _)| *v < 0.0);
        let mut left = crit.empty();
        let mut prev: Option<f64> = None;
        let consider = |left: &C::Acc, prev: f64, next: f64, best: &mut Option<Candidate>| {
            let right = crit.diff(total, left);
            if crit.mass(left) < params.min_child || crit.mass(&right) < params.min_child {
                return;
            }
            let gain = crit.score(left) + crit.score(&right) - parent;
            if gain > params.min_gain && best.as_ref().is_none_or(|b| gain > b.gain) {
                let mut threshold = prev + (next - prev) / 2.0;
                if threshold >= next {
                    threshold = prev;
                }
                *best = Some(Candidate {
                    feature: f,
                    threshold,
                    gain,
                });
            }
        };
        let mut step = |value: f64, left: &mut C::Acc, add: &dyn Fn(&mut C::Acc), best: &mut Option<Candidate>| {
            if let Some(p) = prev {
                if value > p {
                    consider(left, p, value, best);
                }
            }
            add(left);
            prev = Some(value);
        };
        for &(v, r) in &bucket[..split_at] {
            step(v, &mut left, &|acc| crit.add(acc, r), &mut best);
        }
        if n_zero > 0 {
            step(0.0, &mut left, &|acc| *acc = combine(crit, acc, &zeros), &mut best);
        }
        for &(v, r) in &bucket[split_at..] {
            step(v, &mut left, &|acc| crit.add(acc, r), &mut best);
        }
    }
    best
}

/// `a + b` expressed through the criterion's difference operator.
fn combine<C: Criterion>(crit: &C, a: &C::Acc, b: &C::Acc) -> C::Acc {
    let neg_b = crit.diff(&crit.empty(), b);
    crit.diff(a, &neg_b)
}
