//! Linear-chain CRF over left-to-right pose sequences with labels {G, O}.
//!
//! The score of a labeling `g` of chain `x` is
//! `Σᵢ ⟨λ_obs[gᵢ], xᵢ⟩ + Σᵢ λ_trans[gᵢ₋₁][gᵢ]`, and
//! `P(g | x) = exp(score(g) − log Z(x))`. All chain computations run in log space.

mod lbfgs;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{scene_node_features, FEATURE_CATALOG_VERSION};
use crate::pose::{GroupLabel, Scene};

pub use train::{nll_and_gradient, train, train_with_report, TrainConfig, TrainReport};

pub const NUM_LABELS: usize = 2;
pub const CRF_FORMAT_VERSION: u32 = 1;

/// Weight vector over observation features (one block per label) followed by
/// the 2×2 transition weights, row = previous label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CrfModelFile", into = "CrfModelFile")]
pub struct CrfModel {
    weights: Vec<f64>,
    node_dim: usize,
    feature_catalog_version: String,
    l2: f64,
}

#[derive(Serialize, Deserialize)]
struct CrfModelFile {
    format_version: u32,
    feature_catalog_version: String,
    l2: f64,
    weights: Vec<f64>,
}

impl From<CrfModel> for CrfModelFile {
    fn from(m: CrfModel) -> Self {
        CrfModelFile {
            format_version: CRF_FORMAT_VERSION,
            feature_catalog_version: m.feature_catalog_version,
            l2: m.l2,
            weights: m.weights,
        }
    }
}

impl TryFrom<CrfModelFile> for CrfModel {
    type Error = Error;
    fn try_from(f: CrfModelFile) -> Result<Self> {
        if f.format_version != CRF_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: format!("crf format {CRF_FORMAT_VERSION}"),
                found: format!("crf format {}", f.format_version),
            });
        }
        let mut m = CrfModel::from_weights(f.weights, f.feature_catalog_version)?;
        m.l2 = f.l2;
        Ok(m)
    }
}

impl CrfModel {
    pub fn num_weights(node_dim: usize) -> usize {
        node_dim * NUM_LABELS + NUM_LABELS * NUM_LABELS
    }

    /// All-zero model over `node_dim` observation features.
    pub fn zeros(node_dim: usize, feature_catalog_version: impl Into<String>) -> Self {
        CrfModel {
            weights: vec![0.0; Self::num_weights(node_dim)],
            node_dim,
            feature_catalog_version: feature_catalog_version.into(),
            l2: 0.0,
        }
    }

    pub fn from_weights(weights: Vec<f64>, feature_catalog_version: impl Into<String>) -> Result<Self> {
        let k = weights.len();
        let trans = NUM_LABELS * NUM_LABELS;
        if k < trans || !(k - trans).is_multiple_of(NUM_LABELS) {
            return Err(Error::Input(format!("{k} is not a valid CRF weight count")));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Input("CRF weights must be finite".into()));
        }
        Ok(CrfModel {
            node_dim: (k - trans) / NUM_LABELS,
            weights,
            feature_catalog_version: feature_catalog_version.into(),
            l2: 0.0,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn node_dim(&self) -> usize {
        self.node_dim
    }

    pub fn feature_catalog_version(&self) -> &str {
        &self.feature_catalog_version
    }

    /// Regularization strength the model was trained with.
    pub fn l2(&self) -> f64 {
        self.l2
    }

    pub(crate) fn with_l2(mut self, l2: f64) -> Self {
        self.l2 = l2;
        self
    }

    fn obs(&self, label: usize) -> &[f64] {
        &self.weights[label * self.node_dim..(label + 1) * self.node_dim]
    }

    fn trans(&self, prev: usize, cur: usize) -> f64 {
        self.weights[NUM_LABELS * self.node_dim + prev * NUM_LABELS + cur]
    }

    pub(crate) fn obs_index(&self, label: usize, feature: usize) -> usize {
        label * self.node_dim + feature
    }

    pub(crate) fn trans_index(&self, prev: usize, cur: usize) -> usize {
        NUM_LABELS * self.node_dim + prev * NUM_LABELS + cur
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        std::io::Write::flush(&mut w)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::CorruptModel {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// One observation sequence with optional gold labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainInstance {
    features: Vec<Vec<f64>>,
    labels: Option<Vec<GroupLabel>>,
    feature_catalog_version: String,
}

impl ChainInstance {
    pub fn new(features: Vec<Vec<f64>>, labels: Option<Vec<GroupLabel>>) -> Result<Self> {
        Self::with_version(features, labels, FEATURE_CATALOG_VERSION)
    }

    pub fn with_version(
        features: Vec<Vec<f64>>,
        labels: Option<Vec<GroupLabel>>,
        feature_catalog_version: impl Into<String>,
    ) -> Result<Self> {
        if let Some(first) = features.first() {
            if features.iter().any(|row| row.len() != first.len()) {
                return Err(Error::Input("ragged node feature matrix".into()));
            }
        }
        if let Some(l) = &labels {
            if l.len() != features.len() {
                return Err(Error::Input(format!(
                    "{} labels for a chain of length {}",
                    l.len(),
                    features.len()
                )));
            }
        }
        Ok(ChainInstance {
            features,
            labels,
            feature_catalog_version: feature_catalog_version.into(),
        })
    }

    /// Node features of an already left-to-right ordered scene, with its truth
    /// membership as gold labels when present.
    pub fn from_scene(scene: &Scene) -> Result<Self> {
        let features = scene_node_features(scene)?
            .into_iter()
            .map(|f| f.into_vec())
            .collect();
        Self::new(features, scene.membership().map(<[_]>::to_vec))
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> Option<&[GroupLabel]> {
        self.labels.as_deref()
    }
}

/// Per-node and transition log-potentials of one chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Potentials {
    pub node: Vec<[f64; NUM_LABELS]>,
    pub transition: [[f64; NUM_LABELS]; NUM_LABELS],
}

impl Potentials {
    /// Unnormalized log-score of a full labeling.
    pub fn score(&self, labels: &[GroupLabel]) -> f64 {
        let mut s = 0.0;
        for (i, l) in labels.iter().enumerate() {
            s += self.node[i][l.index()];
            if i > 0 {
                s += self.transition[labels[i - 1].index()][l.index()];
            }
        }
        s
    }
}

fn check_compat(model: &CrfModel, chain: &ChainInstance) -> Result<()> {
    if model.feature_catalog_version != chain.feature_catalog_version {
        return Err(Error::VersionMismatch {
            expected: model.feature_catalog_version.clone(),
            found: chain.feature_catalog_version.clone(),
        });
    }
    if let Some(row) = chain.features.first() {
        if row.len() != model.node_dim {
            return Err(Error::Input(format!(
                "chain has {} features per node, model expects {}",
                row.len(),
                model.node_dim
            )));
        }
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn log_potentials(model: &CrfModel, chain: &ChainInstance) -> Result<Potentials> {
    check_compat(model, chain)?;
    let node = chain
        .features
        .iter()
        .map(|x| [dot(model.obs(0), x), dot(model.obs(1), x)])
        .collect();
    let mut transition = [[0.0; NUM_LABELS]; NUM_LABELS];
    for (p, row) in transition.iter_mut().enumerate() {
        for (c, t) in row.iter_mut().enumerate() {
            *t = model.trans(p, c);
        }
    }
    Ok(Potentials { node, transition })
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

fn lse2(a: f64, b: f64) -> f64 {
    log_sum_exp(&[a, b])
}

fn forward_table(p: &Potentials) -> Vec<[f64; NUM_LABELS]> {
    let n = p.node.len();
    let mut alpha = Vec::with_capacity(n);
    if n == 0 {
        return alpha;
    }
    alpha.push(p.node[0]);
    for i in 1..n {
        let prev = alpha[i - 1];
        let mut cur = [0.0; NUM_LABELS];
        for (y, c) in cur.iter_mut().enumerate() {
            *c = p.node[i][y] + lse2(prev[0] + p.transition[0][y], prev[1] + p.transition[1][y]);
        }
        alpha.push(cur);
    }
    alpha
}

fn backward_table(p: &Potentials) -> Vec<[f64; NUM_LABELS]> {
    let n = p.node.len();
    let mut beta = vec![[0.0; NUM_LABELS]; n];
    for i in (0..n.saturating_sub(1)).rev() {
        for y in 0..NUM_LABELS {
            beta[i][y] = lse2(
                p.transition[y][0] + p.node[i + 1][0] + beta[i + 1][0],
                p.transition[y][1] + p.node[i + 1][1] + beta[i + 1][1],
            );
        }
    }
    beta
}

/// Log partition function `log Z`.
pub fn forward(model: &CrfModel, chain: &ChainInstance) -> Result<f64> {
    if chain.is_empty() {
        return Err(Error::Input("empty chain".into()));
    }
    let p = log_potentials(model, chain)?;
    let alpha = forward_table(&p);
    let last = alpha[alpha.len() - 1];
    Ok(lse2(last[0], last[1]))
}

/// Posterior node and adjacent-pair marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct Marginals {
    pub log_z: f64,
    pub node: Vec<[f64; NUM_LABELS]>,
    /// `edge[i][a][b] = P(gᵢ = a, gᵢ₊₁ = b)`.
    pub edge: Vec<[[f64; NUM_LABELS]; NUM_LABELS]>,
}

pub(crate) fn marginals_from(p: &Potentials) -> Marginals {
    let n = p.node.len();
    let alpha = forward_table(p);
    let beta = backward_table(p);
    let log_z = lse2(alpha[n - 1][0], alpha[n - 1][1]);
    let node = (0..n)
        .map(|i| {
            let mut m = [0.0; NUM_LABELS];
            for (y, v) in m.iter_mut().enumerate() {
                *v = (alpha[i][y] + beta[i][y] - log_z).exp();
            }
            m
        })
        .collect();
    let edge = (0..n.saturating_sub(1))
        .map(|i| {
            let mut e = [[0.0; NUM_LABELS]; NUM_LABELS];
            for (a, row) in e.iter_mut().enumerate() {
                for (b, v) in row.iter_mut().enumerate() {
                    *v = (alpha[i][a] + p.transition[a][b] + p.node[i + 1][b] + beta[i + 1][b]
                        - log_z)
                        .exp();
                }
            }
            e
        })
        .collect();
    Marginals { log_z, node, edge }
}

pub fn marginals(model: &CrfModel, chain: &ChainInstance) -> Result<Marginals> {
    if chain.is_empty() {
        return Err(Error::Input("empty chain".into()));
    }
    Ok(marginals_from(&log_potentials(model, chain)?))
}

/// Highest-scoring labeling. Among equal scores the labeling preferring G at
/// the first position where candidates differ wins.
pub fn viterbi(model: &CrfModel, chain: &ChainInstance) -> Result<Vec<GroupLabel>> {
    if chain.is_empty() {
        return Err(Error::Input("empty chain".into()));
    }
    let p = log_potentials(model, chain)?;
    Ok(viterbi_from(&p))
}

pub(crate) fn viterbi_from(p: &Potentials) -> Vec<GroupLabel> {
    // Suffix DP: best[i][y] = max score of positions i.. given gᵢ = y. Decoding
    // front to back then resolves ties lexicographically from the start.
    let n = p.node.len();
    let mut best = vec![[0.0; NUM_LABELS]; n];
    best[n - 1] = p.node[n - 1];
    for i in (0..n - 1).rev() {
        for y in 0..NUM_LABELS {
            let tail = (0..NUM_LABELS)
                .map(|z| p.transition[y][z] + best[i + 1][z])
                .fold(f64::NEG_INFINITY, f64::max);
            best[i][y] = p.node[i][y] + tail;
        }
    }
    let pick = |cands: [f64; NUM_LABELS]| -> usize {
        let mut arg = 0;
        for (y, &v) in cands.iter().enumerate().skip(1) {
            if v > cands[arg] {
                arg = y;
            }
        }
        arg
    };
    let mut out = Vec::with_capacity(n);
    let mut prev = pick(best[0]);
    out.push(GroupLabel::ALL[prev]);
    for row in best.iter().skip(1) {
        let cands = [p.transition[prev][0] + row[0], p.transition[prev][1] + row[1]];
        prev = pick(cands);
        out.push(GroupLabel::ALL[prev]);
    }
    out
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Exhaustive enumeration over all 2ⁿ labelings, independent of the
    //! dynamic programs above.
    use super::*;

    pub fn labelings(n: usize) -> Vec<Vec<GroupLabel>> {
        (0..1usize << n)
            .map(|mask| {
                (0..n)
                    .map(|i| {
                        // bit for position 0 is the most significant so that
                        // enumeration order is lexicographic with G < O
                        if mask >> (n - 1 - i) & 1 == 1 {
                            GroupLabel::O
                        } else {
                            GroupLabel::G
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn brute_score(model: &CrfModel, chain: &ChainInstance, labels: &[GroupLabel]) -> f64 {
        let f = model.node_dim;
        let w = model.weights();
        let mut s = 0.0;
        for (i, l) in labels.iter().enumerate() {
            for j in 0..f {
                s += w[l.index() * f + j] * chain.features()[i][j];
            }
            if i > 0 {
                s += w[2 * f + labels[i - 1].index() * 2 + l.index()];
            }
        }
        s
    }

    pub fn brute_log_z(model: &CrfModel, chain: &ChainInstance) -> f64 {
        let scores: Vec<f64> = labelings(chain.len())
            .iter()
            .map(|l| brute_score(model, chain, l))
            .collect();
        let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
    }

    pub fn brute_marginals(
        model: &CrfModel,
        chain: &ChainInstance,
    ) -> (Vec<[f64; 2]>, Vec<[[f64; 2]; 2]>) {
        let n = chain.len();
        let log_z = brute_log_z(model, chain);
        let mut node = vec![[0.0; 2]; n];
        let mut edge = vec![[[0.0; 2]; 2]; n.saturating_sub(1)];
        for l in labelings(n) {
            let p = (brute_score(model, chain, &l) - log_z).exp();
            for i in 0..n {
                node[i][l[i].index()] += p;
                if i + 1 < n {
                    edge[i][l[i].index()][l[i + 1].index()] += p;
                }
            }
        }
        (node, edge)
    }

    /// First labeling (lexicographic, G < O) attaining the maximum score.
    pub fn brute_argmax(model: &CrfModel, chain: &ChainInstance) -> Vec<GroupLabel> {
        let mut best: Option<(f64, Vec<GroupLabel>)> = None;
        for l in labelings(chain.len()) {
            let s = brute_score(model, chain, &l);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, l));
            }
        }
        best.expect("n >= 1").1
    }
}
