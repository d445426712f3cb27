use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernel::{DistanceMatrix, Gram};
use super::smo::SmoConfig;
use super::{check_rows, solve_one_vs_rest};
use crate::error::{Error, Result};

pub const CV_FOLDS: usize = 5;
const MIN_SAMPLES: usize = 10;
const VARIANCE_FLOOR: f64 = 1e-8;

/// `2⁻⁶, 2⁻⁵, …, 2²`.
pub fn gamma_grid() -> Vec<f64> {
    (-6..=2).map(|e| 2f64.powi(e)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub gamma: f64,
    /// `(γ, mean CV accuracy)` for every grid point; empty on fallback.
    pub cv_scores: Vec<(f64, f64)>,
    pub fallback: bool,
}

/// `1 / (d · mean per-feature variance)`, variance floored at 1e-8.
pub fn fallback_gamma(xs: &[Vec<f64>]) -> Result<f64> {
    let d = check_rows(xs)?;
    let n = xs.len() as f64;
    let mut total = 0.0;
    for j in 0..d {
        let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
        total += xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
    }
    let mean_var = (total / d.max(1) as f64).max(VARIANCE_FLOOR);
    Ok(1.0 / (d.max(1) as f64 * mean_var))
}

/// Fold index per sample. Each class is shuffled with the seed and dealt
/// round-robin, continuing the rotation across classes.
pub fn stratified_folds(labels: &[usize], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut folds = vec![0; labels.len()];
    let mut next = 0;
    for class in 0..num_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        members.shuffle(&mut rng);
        for i in members {
            folds[i] = next % k;
            next += 1;
        }
    }
    folds
}

/// Picks γ from the grid by stratified k-fold accuracy at fixed C; the
/// smallest γ wins ties. Falls back to [`fallback_gamma`] when the folds
/// cannot be formed (too few samples, or a class with a single sample).
pub fn select_gamma(xs: &[Vec<f64>], labels: &[usize], c: f64, seed: u64) -> Result<GammaSelection> {
    if xs.len() != labels.len() {
        return Err(Error::Input(format!("{} vectors but {} labels", xs.len(), labels.len())));
    }
    check_rows(xs)?;
    let mut present: Vec<usize> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::Input(format!("need at least 2 classes, got {}", present.len())));
    }
    // compact class ids so absent classes do not produce empty binaries
    let dense: Vec<usize> = labels.iter().map(|l| present.binary_search(l).unwrap()).collect();
    let num_classes = present.len();
    let mut counts = vec![0usize; num_classes];
    dense.iter().for_each(|&l| counts[l] += 1);

    if xs.len() < MIN_SAMPLES || counts.iter().any(|&n| n < 2) {
        return Ok(GammaSelection {
            gamma: fallback_gamma(xs)?,
            cv_scores: Vec::new(),
            fallback: true,
        });
    }

    let folds = stratified_folds(&dense, CV_FOLDS, seed);
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let dist = DistanceMatrix::new(&refs);
    let cfg = SmoConfig { c, ..SmoConfig::default() };

    let mut cv_scores = Vec::new();
    for gamma in gamma_grid() {
        let mut acc_sum = 0.0;
        for f in 0..CV_FOLDS {
            let train: Vec<usize> = (0..xs.len()).filter(|&i| folds[i] != f).collect();
            let valid: Vec<usize> = (0..xs.len()).filter(|&i| folds[i] == f).collect();
            let train_labels: Vec<usize> = train.iter().map(|&i| dense[i]).collect();
            let gram = Gram::from_distances(&dist, &train, gamma);
            let sols = solve_one_vs_rest(&gram, &train_labels, num_classes, &cfg)?;
            let mut correct = 0usize;
            for &v in &valid {
                let drow = dist.row(v);
                let krow: Vec<f64> = train.iter().map(|&t| (-gamma * drow[t]).exp()).collect();
                let mut best = (0, f64::NEG_INFINITY);
                for (k, sol) in sols.iter().enumerate() {
                    let mut s = sol.bias;
                    for (t, a) in sol.alpha.iter().enumerate() {
                        if *a > 0.0 {
                            let y = if train_labels[t] == k { 1.0 } else { -1.0 };
                            s += a * y * krow[t];
                        }
                    }
                    if s > best.1 {
                        best = (k, s);
                    }
                }
                if best.0 == dense[v] {
                    correct += 1;
                }
            }
            acc_sum += correct as f64 / valid.len() as f64;
        }
        cv_scores.push((gamma, acc_sum / CV_FOLDS as f64));
    }
    let mut best = cv_scores[0];
    for &s in &cv_scores[1..] {
        if s.1 > best.1 {
            best = s;
        }
    }
    Ok(GammaSelection {
        gamma: best.0,
        cv_scores,
        fallback: false,
    })
}
