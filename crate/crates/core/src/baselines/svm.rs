//! RBF-kernel C-SVC trained by SMO with second-order working-set selection,
//! combined one-vs-one with majority voting.

use serde::{Deserialize, Serialize};

use crate::features::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Gamma {
    /// `1 / (n_features * Var(X))` over every entry of X, zeros included
    Scale,
    /// `1 / n_features`
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub gamma: Gamma,
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Binary {
    /// class indices (positive, negative)
    pos: usize,
    neg: usize,
    /// indices into the shared support-vector list, with alpha * y
    coef: Vec<(u32, f64)>,
    rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Svm {
    pub gamma: f64,
    pub n_classes: usize,
    support: Vec<SparseVector>,
    support_norms: Vec<f64>,
    machines: Vec<Binary>,
}

pub fn scale_gamma(x: &[SparseVector]) -> f64 {
    let dim = x.first().map_or(0, |v| v.dim);
    let count = (x.len() * dim) as f64;
    if count == 0.0 {
        return 1.0;
    }
    let (mut s, mut s2) = (0.0, 0.0);
    for v in x {
        for &val in &v.values {
            s += val;
            s2 += val * val;
        }
    }
    let mean = s / count;
    let var = s2 / count - mean * mean;
    if var > 0.0 {
        1.0 / (dim as f64 * var)
    } else {
        1.0
    }
}

fn rbf(gamma: f64, a: &SparseVector, na: f64, b: &SparseVector, nb: f64) -> f64 {
    (-gamma * (na + nb - 2.0 * a.dot(b)).max(0.0)).exp()
}

/// Solve one binary dual problem. Returns (alpha, rho).
fn smo(k: &[Vec<f64>], y: &[f64], c: f64, tol: f64, max_iter: usize) -> (Vec<f64>, f64) {
    const TAU: f64 = 1e-12;
    let n = y.len();
    let mut alpha = vec![0.0; n];
    // gradient of 0.5 a'Qa - e'a with Q_ij = y_i y_j K_ij
    let mut g = vec![-1.0; n];
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let up = |i: usize, a: &[f64]| (y[i] > 0.0 && a[i] < c) || (y[i] < 0.0 && a[i] > 0.0);
    let low = |i: usize, a: &[f64]| (y[i] > 0.0 && a[i] > 0.0) || (y[i] < 0.0 && a[i] < c);

    for iter in 0..max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if up(t, &alpha) && -y[t] * g[t] >= gmax {
                gmax = -y[t] * g[t];
                i_sel = t;
            }
        }
        let mut gmin = f64::INFINITY;
        let mut j_sel = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..n {
            if !low(t, &alpha) {
                continue;
            }
            let v = -y[t] * g[t];
            gmin = gmin.min(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax - v;
            if b > 0.0 {
                let mut a = k[i_sel][i_sel] + k[t][t] - 2.0 * y[i_sel] * y[t] * q(i_sel, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let obj = -(b * b) / a;
                if obj <= obj_min {
                    obj_min = obj;
                    j_sel = t;
                }
            }
        }
        if i_sel == usize::MAX || j_sel == usize::MAX || gmax - gmin < tol {
            break;
        }
        if iter + 1 == max_iter {
            log::warn!("SMO reached max_iter={max_iter}");
        }
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let mut quad = q(i, i) + q(j, j) + 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (-g[i] - g[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let mut quad = q(i, i) + q(j, j) - 2.0 * q(i, j);
            if quad <= 0.0 {
                quad = TAU;
            }
            let delta = (g[i] - g[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            g[t] += q(t, i) * di + q(t, j) * dj;
        }
    }

    // rho: mean over free vectors, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * g[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };
    (alpha, rho)
}

impl Svm {
    pub fn fit(x: &[SparseVector], classes: &[usize], n_classes: usize, p: &SvmParams) -> Self {
        let gamma = match p.gamma {
            Gamma::Scale => scale_gamma(x),
            Gamma::Auto => 1.0 / x.first().map_or(1, |v| v.dim.max(1)) as f64,
            Gamma::Value(g) => g,
        };
        let norms: Vec<f64> = x.iter().map(SparseVector::norm_sq).collect();
        let mut is_support = vec![false; x.len()];
        let mut raw_machines = Vec::new();
        for a in 0..n_classes {
            for b in a + 1..n_classes {
                let rows: Vec<usize> = (0..x.len()).filter(|&i| classes[i] == a || classes[i] == b).collect();
                let y: Vec<f64> = rows.iter().map(|&i| if classes[i] == a { 1.0 } else { -1.0 }).collect();
                let kmat: Vec<Vec<f64>> = rows
                    .iter()
                    .map(|&i| rows.iter().map(|&j| rbf(gamma, &x[i], norms[i], &x[j], norms[j])).collect())
                    .collect();
                let (alpha, rho) = smo(&kmat, &y, p.c, p.tol, p.max_iter);
                let coef: Vec<(usize, f64)> = rows
                    .iter()
                    .zip(alpha.iter().zip(&y))
                    .filter(|(_, (al, _))| **al > 0.0)
                    .map(|(&r, (al, yy))| (r, al * yy))
                    .collect();
                for &(r, _) in &coef {
                    is_support[r] = true;
                }
                raw_machines.push((a, b, coef, rho));
            }
        }
        let mut remap = vec![u32::MAX; x.len()];
        let mut support = Vec::new();
        let mut support_norms = Vec::new();
        for (i, keep) in is_support.iter().enumerate() {
            if *keep {
                remap[i] = support.len() as u32;
                support.push(x[i].clone());
                support_norms.push(norms[i]);
            }
        }
        let machines = raw_machines
            .into_iter()
            .map(|(pos, neg, coef, rho)| Binary {
                pos,
                neg,
                coef: coef.into_iter().map(|(r, c)| (remap[r], c)).collect(),
                rho,
            })
            .collect();
        Svm {
            gamma,
            n_classes,
            support,
            support_norms,
            machines,
        }
    }

    pub fn n_support(&self) -> usize {
        self.support.len()
    }

    /// One-vs-one vote counts per class.
    pub fn votes(&self, x: &SparseVector) -> Vec<f64> {
        let nx = x.norm_sq();
        let kern: Vec<f64> = self
            .support
            .iter()
            .zip(&self.support_norms)
            .map(|(s, ns)| rbf(self.gamma, s, *ns, x, nx))
            .collect();
        let mut votes = vec![0.0; self.n_classes];
        for m in &self.machines {
            let dec: f64 = m.coef.iter().map(|(i, c)| c * kern[*i as usize]).sum::<f64>() - m.rho;
            if dec > 0.0 {
                votes[m.pos] += 1.0;
            } else {
                votes[m.neg] += 1.0;
            }
        }
        votes
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scale_gamma_matches_definition() {
        let x = vec![SparseVector::from_dense(&[1.0, 0.0]), SparseVector::from_dense(&[0.0, 3.0])];
        // entries 1,0,0,3: mean 1, var (0+1+1+4)/4 = 1.5
        assert!((scale_gamma(&x) - 1.0 / (2.0 * 1.5)).abs() < 1e-12);
        let zero = vec![SparseVector::zeros(3); 2];
        assert_eq!(scale_gamma(&zero), 1.0);
    }

    #[test]
    fn xor_is_separable_with_rbf() {
        let pts = [([0.0, 0.0], 0), ([1.0, 1.0], 0), ([1.0, 0.0], 1), ([0.0, 1.0], 1)];
        let x: Vec<SparseVector> = pts.iter().map(|(p, _)| SparseVector::from_dense(p)).collect();
        let classes: Vec<usize> = pts.iter().map(|(_, c)| *c).collect();
        let svm = Svm::fit(
            &x,
            &classes,
            2,
            &SvmParams {
                c: 10.0,
                gamma: Gamma::Value(2.0),
                tol: 1e-3,
                max_iter: 10_000,
            },
        );
        for (xi, c) in x.iter().zip(&classes) {
            let v = svm.votes(xi);
            assert_eq!(v[*c], 1.0);
        }
    }
}
