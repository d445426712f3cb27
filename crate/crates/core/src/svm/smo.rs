//! Soft-margin SVM dual solved by sequential minimal optimization.
//!
//! Minimizes `½ αᵀQα − eᵀα` subject to `yᵀα = 0`, `0 ≤ α ≤ C`, with
//! `Q_ij = y_i y_j K_ij`. Each step updates the maximally KKT-violating pair.

use super::kernel::Gram;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoConfig {
    pub c: f64,
    /// Stopping threshold on the maximal violating-pair gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Keep the dual objective after every pair update.
    pub record_objective: bool,
}

impl Default for SmoConfig {
    fn default() -> Self {
        SmoConfig {
            c: 10.0,
            tol: 1e-3,
            max_iter: 10_000_000,
            record_objective: false,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DualSolution {
    pub alpha: Vec<f64>,
    /// Decision function is `Σ αᵢyᵢK(xᵢ, x) + bias`.
    pub bias: f64,
    pub iterations: usize,
    /// Dual objective `eᵀα − ½αᵀQα` after each iteration (when recorded).
    pub objective: Vec<f64>,
}

fn dual_objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // with G = Qα − e: ½αᵀQα − eᵀα = ½ Σ αᵢ(Gᵢ − 1)
    -0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

fn in_up(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a < c) || (y < 0.0 && a > 0.0)
}

fn in_low(a: f64, y: f64, c: f64) -> bool {
    (y > 0.0 && a > 0.0) || (y < 0.0 && a < c)
}

/// Returns `(i, j, gap)` for the maximal violating pair.
fn select_pair(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> Option<(usize, usize, f64)> {
    let mut up = None::<(usize, f64)>;
    let mut low = None::<(usize, f64)>;
    for t in 0..alpha.len() {
        let v = -y[t] * grad[t];
        if in_up(alpha[t], y[t], c) && up.is_none_or(|(_, m)| v > m) {
            up = Some((t, v));
        }
        if in_low(alpha[t], y[t], c) && low.is_none_or(|(_, m)| v < m) {
            low = Some((t, v));
        }
    }
    let ((i, m), (j, mm)) = (up?, low?);
    Some((i, j, m - mm))
}

pub(crate) fn solve(gram: &Gram, y: &[f64], cfg: &SmoConfig) -> Result<DualSolution> {
    let n = gram.len();
    let c = cfg.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut objective = Vec::new();
    let mut iterations = 0;

    while let Some((i, j, gap)) = select_pair(&alpha, y, &grad, c) {
        if gap <= cfg.tol {
            break;
        }
        if iterations >= cfg.max_iter {
            return Err(Error::Convergence {
                iterations,
                max_violation: gap,
                tol: cfg.tol,
            });
        }
        iterations += 1;

        let (ki, kj) = (gram.row(i), gram.row(j));
        let qij = y[i] * y[j] * ki[j];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (ki[i] + kj[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
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
            let quad = (ki[i] + kj[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = sum;
                }
                if alpha[i] < 0.0 {
                    alpha[i] = 0.0;
                    alpha[j] = sum;
                }
            }
        }

        let di = (alpha[i] - old_i) * y[i];
        let dj = (alpha[j] - old_j) * y[j];
        for (t, g) in grad.iter_mut().enumerate() {
            *g += y[t] * (ki[t] * di + kj[t] * dj);
        }
        if cfg.record_objective {
            objective.push(dual_objective(&alpha, &grad));
        }
    }

    Ok(DualSolution {
        bias: -rho(&alpha, y, &grad, c),
        alpha,
        iterations,
        objective,
    })
}

fn rho(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
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
    if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Largest KKT violation over the training points, measured on the decision
/// values `f(xᵢ)` the solution induces.
pub(crate) fn max_kkt_violation(gram: &Gram, y: &[f64], sol: &DualSolution, c: f64) -> f64 {
    (0..y.len())
        .map(|t| {
            let row = gram.row(t);
            let f: f64 = sol
                .alpha
                .iter()
                .zip(y)
                .zip(row)
                .map(|((a, ys), k)| a * ys * k)
                .sum::<f64>()
                + sol.bias;
            let margin = y[t] * f;
            if sol.alpha[t] <= 0.0 {
                (1.0 - margin).max(0.0)
            } else if sol.alpha[t] >= c {
                (margin - 1.0).max(0.0)
            } else {
                (margin - 1.0).abs()
            }
        })
        .fold(0.0, f64::max)
}
