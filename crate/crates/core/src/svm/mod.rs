//! Multi-class RBF-kernel SVM: SMO binary solver composed one-vs-rest.

mod gamma;
mod kernel;
mod smo;

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use gamma::{fallback_gamma, gamma_grid, select_gamma, stratified_folds, GammaSelection, CV_FOLDS};
pub use kernel::{rbf_kernel, RbfKernelParams};
pub use smo::SmoConfig;

use crate::error::{Error, Result};
use crate::features::FEATURE_CATALOG_VERSION;
use kernel::{squared_distance, Gram};

pub const SVM_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinarySvm {
    pub gamma: f64,
    #[serde(rename = "C")]
    pub c: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `αᵢyᵢ` for each support vector.
    pub dual_coefs: Vec<f64>,
}

impl BinarySvm {
    pub fn kernel(&self) -> RbfKernelParams {
        RbfKernelParams { gamma: self.gamma }
    }

    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        let mut f = self.bias;
        for (sv, coef) in self.support_vectors.iter().zip(&self.dual_coefs) {
            f += coef * rbf_kernel(sv, x, self.gamma)?;
        }
        Ok(f)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return bad(format!("gamma {} is not positive", self.gamma));
        }
        if !(self.c.is_finite() && self.c > 0.0) {
            return bad(format!("C {} is not positive", self.c));
        }
        if !self.bias.is_finite() {
            return bad("bias is not finite".into());
        }
        if self.support_vectors.len() != self.dual_coefs.len() {
            return bad(format!(
                "{} support vectors but {} dual coefficients",
                self.support_vectors.len(),
                self.dual_coefs.len()
            ));
        }
        let slack = 1e-9 * self.c.max(1.0);
        for &a in &self.dual_coefs {
            if !a.is_finite() || a == 0.0 || a.abs() > self.c + slack {
                return bad(format!("dual coefficient {a} outside (0, C]"));
            }
        }
        if self.support_vectors.iter().flatten().any(|v| !v.is_finite()) {
            return bad("support vector has a non-finite entry".into());
        }
        Ok(())
    }
}

/// Diagnostics from one binary solve.
#[derive(Debug, Clone)]
pub struct BinaryReport {
    pub iterations: usize,
    /// Dual variables for every training point, in input order.
    pub alpha: Vec<f64>,
    /// Largest KKT violation over the training set.
    pub max_kkt_violation: f64,
    /// Dual objective after each pair update, if recorded.
    pub objective_history: Vec<f64>,
}

fn check_binary_labels(ys: &[f64]) -> Result<()> {
    if let Some(y) = ys.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(Error::Input(format!("binary labels must be ±1, got {y}")));
    }
    if !(ys.contains(&1.0) && ys.contains(&-1.0)) {
        return Err(Error::Input("binary training data must contain both classes".into()));
    }
    Ok(())
}

fn check_rows(xs: &[Vec<f64>]) -> Result<usize> {
    let d = xs.first().map(Vec::len).ok_or_else(|| Error::Input("no training vectors".into()))?;
    for (i, x) in xs.iter().enumerate() {
        if x.len() != d {
            return Err(Error::Input(format!("vector {i} has dimension {}, expected {d}", x.len())));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input(format!("vector {i} has a non-finite entry")));
        }
    }
    Ok(d)
}

fn check_config(cfg: &SmoConfig) -> Result<()> {
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(Error::Config(format!("C must be positive, got {}", cfg.c)));
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(Error::Config(format!("tol must be positive, got {}", cfg.tol)));
    }
    Ok(())
}

fn extract(xs: &[&[f64]], ys: &[f64], alpha: &[f64], bias: f64, gamma: f64, c: f64) -> BinarySvm {
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for ((x, y), a) in xs.iter().zip(ys).zip(alpha) {
        if *a > 0.0 {
            support_vectors.push(x.to_vec());
            dual_coefs.push(a * y);
        }
    }
    BinarySvm {
        gamma,
        c,
        bias,
        support_vectors,
        dual_coefs,
    }
}

pub fn train_binary(xs: &[Vec<f64>], ys: &[f64], kernel: RbfKernelParams, cfg: &SmoConfig) -> Result<BinarySvm> {
    Ok(train_binary_with_report(xs, ys, kernel, cfg)?.0)
}

pub fn train_binary_with_report(
    xs: &[Vec<f64>],
    ys: &[f64],
    kernel: RbfKernelParams,
    cfg: &SmoConfig,
) -> Result<(BinarySvm, BinaryReport)> {
    check_config(cfg)?;
    RbfKernelParams::new(kernel.gamma)?;
    if xs.len() != ys.len() {
        return Err(Error::Input(format!("{} vectors but {} labels", xs.len(), ys.len())));
    }
    check_rows(xs)?;
    check_binary_labels(ys)?;
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let gram = Gram::rbf(&refs, kernel.gamma);
    let sol = smo::solve(&gram, ys, cfg)?;
    let report = BinaryReport {
        iterations: sol.iterations,
        max_kkt_violation: smo::max_kkt_violation(&gram, ys, &sol, cfg.c),
        alpha: sol.alpha.clone(),
        objective_history: sol.objective.clone(),
    };
    Ok((extract(&refs, ys, &sol.alpha, sol.bias, kernel.gamma, cfg.c), report))
}

/// Solves every one-vs-rest problem over a shared kernel matrix.
pub(crate) fn solve_one_vs_rest(
    gram: &Gram,
    labels: &[usize],
    num_classes: usize,
    cfg: &SmoConfig,
) -> Result<Vec<smo::DualSolution>> {
    (0..num_classes)
        .into_par_iter()
        .map(|k| {
            let ys: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            smo::solve(gram, &ys, cfg)
        })
        .collect()
}

/// Per-binary view onto a deduplicated support-vector pool, so vectors shared
/// between binaries are compared with the query only once.
#[derive(Debug, Clone, Default)]
struct Pool {
    vectors: Vec<Vec<f64>>,
    gammas: Vec<f64>,
    /// For each binary: (gamma slot, [(pool index, coefficient)]).
    terms: Vec<(usize, Vec<(usize, f64)>)>,
}

impl Pool {
    fn build(binaries: &[BinarySvm]) -> Self {
        let mut pool = Pool::default();
        let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
        for b in binaries {
            let slot = match pool.gammas.iter().position(|&g| g == b.gamma) {
                Some(s) => s,
                None => {
                    pool.gammas.push(b.gamma);
                    pool.gammas.len() - 1
                }
            };
            let terms = b
                .support_vectors
                .iter()
                .zip(&b.dual_coefs)
                .map(|(sv, &coef)| {
                    let key: Vec<u64> = sv.iter().map(|v| v.to_bits()).collect();
                    let id = *index.entry(key).or_insert_with(|| {
                        pool.vectors.push(sv.clone());
                        pool.vectors.len() - 1
                    });
                    (id, coef)
                })
                .collect();
            pool.terms.push((slot, terms));
        }
        pool
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// Index into the model's class list.
    pub class: usize,
    /// One-vs-rest decision value per class, in class order.
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SvmModel {
    classes: Vec<String>,
    binaries: Vec<BinarySvm>,
    feature_catalog_version: String,
    dim: usize,
    pool: Pool,
}

impl PartialEq for SvmModel {
    fn eq(&self, other: &Self) -> bool {
        self.classes == other.classes
            && self.binaries == other.binaries
            && self.feature_catalog_version == other.feature_catalog_version
    }
}

#[derive(Serialize, Deserialize)]
struct BinaryEntry {
    class: String,
    #[serde(flatten)]
    svm: BinarySvm,
}

#[derive(Serialize, Deserialize)]
struct SvmModelFile {
    format_version: u32,
    feature_catalog_version: String,
    classes: Vec<String>,
    per_class: Vec<BinaryEntry>,
}

impl SvmModel {
    pub fn new(classes: Vec<String>, binaries: Vec<BinarySvm>, feature_catalog_version: impl Into<String>) -> Result<Self> {
        if classes.len() < 2 {
            return Err(Error::Validation(format!("need at least 2 classes, got {}", classes.len())));
        }
        if binaries.len() != classes.len() {
            return Err(Error::Validation(format!(
                "{} classes but {} binaries",
                classes.len(),
                binaries.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = classes.iter().find(|c| !seen.insert(c.as_str())) {
            return Err(Error::Validation(format!("duplicate class {dup:?}")));
        }
        for b in &binaries {
            b.validate()?;
        }
        let dims: Vec<usize> = binaries.iter().flat_map(|b| &b.support_vectors).map(Vec::len).collect();
        let dim = dims.first().copied().unwrap_or(0);
        if dims.iter().any(|&d| d != dim) {
            return Err(Error::Validation("support vectors differ in dimension".into()));
        }
        let pool = Pool::build(&binaries);
        Ok(SvmModel {
            classes,
            binaries,
            feature_catalog_version: feature_catalog_version.into(),
            dim,
            pool,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn binaries(&self) -> &[BinarySvm] {
        &self.binaries
    }

    pub fn feature_catalog_version(&self) -> &str {
        &self.feature_catalog_version
    }

    /// Feature dimension, or 0 when no binary has support vectors.
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_support_vectors(&self) -> usize {
        self.pool.vectors.len()
    }

    pub fn predict(&self, x: &[f64]) -> Result<Prediction> {
        if self.feature_catalog_version != FEATURE_CATALOG_VERSION {
            return Err(Error::VersionMismatch {
                expected: FEATURE_CATALOG_VERSION.to_string(),
                found: self.feature_catalog_version.clone(),
            });
        }
        if self.dim != 0 && x.len() != self.dim {
            return Err(Error::Input(format!(
                "feature vector has dimension {}, model expects {}",
                x.len(),
                self.dim
            )));
        }
        let dist: Vec<f64> = self.pool.vectors.iter().map(|sv| squared_distance(sv, x)).collect();
        let kernels: Vec<Vec<f64>> = self
            .pool
            .gammas
            .iter()
            .map(|g| dist.iter().map(|d| (-g * d).exp()).collect())
            .collect();
        let scores: Vec<f64> = self
            .binaries
            .iter()
            .zip(&self.pool.terms)
            .map(|(b, (slot, terms))| {
                let k = &kernels[*slot];
                b.bias + terms.iter().map(|&(id, coef)| coef * k[id]).sum::<f64>()
            })
            .collect();
        let mut best = 0;
        for (k, s) in scores.iter().enumerate() {
            if *s > scores[best] {
                best = k;
            }
        }
        Ok(Prediction { class: best, scores })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = SvmModelFile {
            format_version: SVM_FORMAT_VERSION,
            feature_catalog_version: self.feature_catalog_version.clone(),
            classes: self.classes.clone(),
            per_class: self
                .classes
                .iter()
                .zip(&self.binaries)
                .map(|(c, b)| BinaryEntry {
                    class: c.clone(),
                    svm: b.clone(),
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: SvmModelFile = serde_json::from_str(text)?;
        if file.format_version != SVM_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                expected: SVM_FORMAT_VERSION.to_string(),
                found: file.format_version.to_string(),
            });
        }
        if file.per_class.len() != file.classes.len()
            || file.per_class.iter().zip(&file.classes).any(|(e, c)| &e.class != c)
        {
            return Err(Error::Validation("per-class entries do not match the class list".into()));
        }
        let binaries = file.per_class.into_iter().map(|e| e.svm).collect();
        SvmModel::new(file.classes, binaries, file.feature_catalog_version)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        SvmModel::from_json(&text).map_err(|e| match e {
            Error::VersionMismatch { .. } => e,
            other => Error::CorruptModel {
                path: path.to_path_buf(),
                message: other.to_string(),
            },
        })
    }
}

/// Trains one binary per class; `labels[i]` indexes into `classes`.
pub fn train_one_vs_rest(
    xs: &[Vec<f64>],
    labels: &[usize],
    classes: Vec<String>,
    kernel: RbfKernelParams,
    cfg: &SmoConfig,
) -> Result<SvmModel> {
    check_config(cfg)?;
    RbfKernelParams::new(kernel.gamma)?;
    if xs.len() != labels.len() {
        return Err(Error::Input(format!("{} vectors but {} labels", xs.len(), labels.len())));
    }
    check_rows(xs)?;
    if classes.len() < 2 {
        return Err(Error::Input(format!("need at least 2 classes, got {}", classes.len())));
    }
    let mut counts = vec![0usize; classes.len()];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::Input(format!("label index {l} out of range")))? += 1;
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::Input(format!("class {:?} has no training samples", classes[k])));
    }
    let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
    let gram = Gram::rbf(&refs, kernel.gamma);
    let sols = solve_one_vs_rest(&gram, labels, classes.len(), cfg)?;
    let binaries = sols
        .iter()
        .enumerate()
        .map(|(k, sol)| {
            let ys: Vec<f64> = labels.iter().map(|&l| if l == k { 1.0 } else { -1.0 }).collect();
            extract(&refs, &ys, &sol.alpha, sol.bias, kernel.gamma, cfg.c)
        })
        .collect();
    SvmModel::new(classes, binaries, FEATURE_CATALOG_VERSION)
}
