use serde::{Deserialize, Serialize};

use super::gboost::softmax;
use crate::features::SparseVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogregParams {
    pub c: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Multinomial logistic regression, `0.5 |W|^2 + C * sum(cross-entropy)`,
/// intercepts unpenalized, minimized with L-BFGS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Logreg {
    /// weights[k] has length dim, followed by one intercept per class
    pub weights: Vec<Vec<f64>>,
    pub intercepts: Vec<f64>,
    pub iterations: usize,
}

struct Problem<'a> {
    x: &'a [SparseVector],
    classes: &'a [usize],
    k: usize,
    dim: usize,
    c: f64,
}

impl Problem<'_> {
    fn n_params(&self) -> usize {
        self.k * (self.dim + 1)
    }

    fn bias(&self, theta: &[f64], k: usize) -> f64 {
        theta[self.k * self.dim + k]
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        grad.fill(0.0);
        let mut f = 0.0;
        for k in 0..self.k {
            for j in 0..self.dim {
                let w = theta[k * self.dim + j];
                f += 0.5 * w * w;
                grad[k * self.dim + j] = w;
            }
        }
        let mut z = vec![0.0; self.k];
        for (x, &y) in self.x.iter().zip(self.classes) {
            for (k, zk) in z.iter_mut().enumerate() {
                *zk = self.bias(theta, k) + x.dot_dense(&theta[k * self.dim..(k + 1) * self.dim]);
            }
            let p = softmax(&z);
            f -= self.c * p[y].max(1e-300).ln();
            for k in 0..self.k {
                let r = self.c * (p[k] - f64::from(k == y));
                for (j, v) in x.iter() {
                    grad[k * self.dim + j] += r * v;
                }
                grad[self.k * self.dim + k] += r;
            }
        }
        f
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking; stops when the largest
/// gradient component drops below `tol`.
fn lbfgs(p: &Problem, max_iter: usize, tol: f64) -> (Vec<f64>, usize) {
    const MEMORY: usize = 10;
    let n = p.n_params();
    let mut theta = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let mut f = p.eval(&theta, &mut grad);
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut new_grad = vec![0.0; n];
    for iter in 0..max_iter {
        if grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) <= tol {
            return (theta, iter);
        }
        // two-loop recursion
        let mut d: Vec<f64> = grad.iter().map(|g| -g).collect();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = hist.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in hist.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&grad, &d);
        if slope >= 0.0 {
            hist.clear();
            d = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
        }
        let mut step = if hist.is_empty() { 1.0 / dot(&grad, &grad).sqrt().max(1.0) } else { 1.0 };
        let mut candidate = vec![0.0; n];
        let mut accepted = false;
        for _ in 0..40 {
            for i in 0..n {
                candidate[i] = theta[i] + step * d[i];
            }
            let f_new = p.eval(&candidate, &mut new_grad);
            if f_new <= f + 1e-4 * step * slope {
                let s: Vec<f64> = candidate.iter().zip(&theta).map(|(a, b)| a - b).collect();
                let y: Vec<f64> = new_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 {
                    if hist.len() == MEMORY {
                        hist.pop_front();
                    }
                    hist.push_back((s, y, 1.0 / sy));
                }
                std::mem::swap(&mut theta, &mut candidate);
                std::mem::swap(&mut grad, &mut new_grad);
                f = f_new;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return (theta, iter);
        }
    }
    (theta, max_iter)
}

impl Logreg {
    pub fn fit(x: &[SparseVector], classes: &[usize], n_classes: usize, params: &LogregParams) -> Self {
        let dim = x.first().map_or(0, |v| v.dim);
        let problem = Problem {
            x,
            classes,
            k: n_classes,
            dim,
            c: params.c,
        };
        let (theta, iterations) = lbfgs(&problem, params.max_iter, params.tol);
        if iterations == params.max_iter {
            log::warn!("logistic regression hit max_iter={} before converging", params.max_iter);
        }
        Logreg {
            weights: (0..n_classes).map(|k| theta[k * dim..(k + 1) * dim].to_vec()).collect(),
            intercepts: theta[n_classes * dim..].to_vec(),
            iterations,
        }
    }

    pub fn margins(&self, x: &SparseVector) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.intercepts)
            .map(|(w, b)| b + x.dot_dense(w))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gradient_matches_finite_differences() {
        let x = vec![
            SparseVector::from_dense(&[1.0, 0.0, 0.5]),
            SparseVector::from_dense(&[0.0, 2.0, 0.0]),
            SparseVector::from_dense(&[0.3, 0.3, 0.3]),
        ];
        let classes = [0, 1, 2];
        let p = Problem {
            x: &x,
            classes: &classes,
            k: 3,
            dim: 3,
            c: 0.7,
        };
        let theta: Vec<f64> = (0..p.n_params()).map(|i| (i as f64 * 0.37).sin() * 0.5).collect();
        let mut g = vec![0.0; p.n_params()];
        p.eval(&theta, &mut g);
        let mut scratch = vec![0.0; p.n_params()];
        for i in 0..theta.len() {
            let h = 1e-6;
            let mut plus = theta.clone();
            plus[i] += h;
            let mut minus = theta.clone();
            minus[i] -= h;
            let fd = (p.eval(&plus, &mut scratch) - p.eval(&minus, &mut scratch)) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-6, "param {i}: fd {fd} vs {}", g[i]);
        }
    }
}
