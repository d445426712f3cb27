use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lbfgs::{minimize, LbfgsConfig};
use super::{log_potentials, marginals_from, ChainInstance, CrfModel, NUM_LABELS};
use crate::error::{Error, Result};

/// Regularized maximum conditional likelihood settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub l2: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            l2: 1.0,
            max_iters: 500,
            tol: 1e-4,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: CrfModel,
    pub iterations: usize,
    pub converged: bool,
    /// ‖∇‖∞ of the regularized objective at the returned weights.
    pub grad_inf_norm: f64,
    /// Objective after each accepted line-search step.
    pub loss_history: Vec<f64>,
}

fn chain_nll(model: &CrfModel, chain: &ChainInstance) -> Result<(f64, Vec<f64>)> {
    let gold = chain
        .labels()
        .ok_or_else(|| Error::Input("training chain without gold labels".into()))?;
    let mut grad = vec![0.0; model.weights().len()];
    if chain.is_empty() {
        return Ok((0.0, grad));
    }
    let pot = log_potentials(model, chain)?;
    let mg = marginals_from(&pot);
    let loss = mg.log_z - pot.score(gold);

    for (i, x) in chain.features().iter().enumerate() {
        for y in 0..NUM_LABELS {
            let coef = mg.node[i][y] - if gold[i].index() == y { 1.0 } else { 0.0 };
            if coef != 0.0 {
                let base = model.obs_index(y, 0);
                for (g, xi) in grad[base..base + x.len()].iter_mut().zip(x) {
                    *g += coef * xi;
                }
            }
        }
    }
    for (i, e) in mg.edge.iter().enumerate() {
        for a in 0..NUM_LABELS {
            for b in 0..NUM_LABELS {
                grad[model.trans_index(a, b)] += e[a][b];
            }
        }
        grad[model.trans_index(gold[i].index(), gold[i + 1].index())] -= 1.0;
    }
    Ok((loss, grad))
}

/// Fixed-shape pairwise summation, independent of how the terms were computed.
fn tree_sum(mut terms: Vec<(f64, Vec<f64>)>) -> Option<(f64, Vec<f64>)> {
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        let mut it = terms.into_iter();
        while let Some((la, mut ga)) = it.next() {
            if let Some((lb, gb)) = it.next() {
                ga.iter_mut().zip(&gb).for_each(|(a, b)| *a += b);
                next.push((la + lb, ga));
            } else {
                next.push((la, ga));
            }
        }
        terms = next;
    }
    terms.pop()
}

/// `−Σ log P(gold | chain) + (l2/2)‖λ‖²` and its gradient.
pub fn nll_and_gradient(model: &CrfModel, batch: &[ChainInstance], l2: f64) -> Result<(f64, Vec<f64>)> {
    if l2.is_nan() || l2 < 0.0 {
        return Err(Error::Input(format!("l2 must be non-negative, got {l2}")));
    }
    let terms = batch
        .par_iter()
        .map(|c| chain_nll(model, c))
        .collect::<Result<Vec<_>>>()?;
    let (mut loss, mut grad) =
        tree_sum(terms).unwrap_or_else(|| (0.0, vec![0.0; model.weights().len()]));
    let w = model.weights();
    loss += 0.5 * l2 * w.iter().map(|v| v * v).sum::<f64>();
    grad.iter_mut().zip(w).for_each(|(g, v)| *g += l2 * v);
    Ok((loss, grad))
}

pub fn train(batch: &[ChainInstance], config: &TrainConfig) -> Result<CrfModel> {
    Ok(train_with_report(batch, config)?.model)
}

pub fn train_with_report(batch: &[ChainInstance], config: &TrainConfig) -> Result<TrainReport> {
    let first = batch
        .iter()
        .find(|c| !c.is_empty())
        .ok_or_else(|| Error::Input("training batch is empty".into()))?;
    if batch.iter().any(|c| c.labels().is_none()) {
        return Err(Error::Input("every training chain needs gold labels".into()));
    }
    let node_dim = first.features()[0].len();
    let version = first.feature_catalog_version.clone();
    let template = CrfModel::zeros(node_dim, version.clone());

    let objective = |w: &[f64]| {
        let model = CrfModel {
            weights: w.to_vec(),
            ..template.clone()
        };
        nll_and_gradient(&model, batch, config.l2)
    };
    let out = minimize(
        objective,
        template.weights.clone(),
        &LbfgsConfig {
            memory: 10,
            max_iters: config.max_iters,
            tol: config.tol,
        },
    )?;
    let model = CrfModel::from_weights(out.x, version)?.with_l2(config.l2);
    Ok(TrainReport {
        model,
        iterations: out.iterations,
        converged: out.converged,
        grad_inf_norm: out.grad_inf_norm,
        loss_history: out.history,
    })
}
