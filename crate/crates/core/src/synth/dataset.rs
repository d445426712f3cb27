use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{render_scene, rng_stream, SynthConfig};
use crate::error::{Error, Result};
use crate::labels::{ApproachAngle, Formation};
use crate::pose::Scene;

const SHUFFLE_STREAM: u64 = 2;

/// Renders `count` scenes per config. Scene `k` (counting across all entries)
/// is rendered with seed `seed + k`; the result is shuffled with `seed`.
pub fn generate_dataset(entries: &[(SynthConfig, usize)], seed: u64) -> Result<Vec<Scene>> {
    let mut jobs = Vec::new();
    for (cfg, count) in entries {
        if *count == 0 {
            return Err(Error::Config("dataset entry with zero scenes".into()));
        }
        cfg.validate()?;
        for _ in 0..*count {
            let k = jobs.len() as u64;
            jobs.push(SynthConfig {
                seed: seed.wrapping_add(k),
                frame_id: Some(format!("{}_{}_{k:06}", cfg.formation.as_str(), cfg.angle_deg.degrees())),
                ..cfg.clone()
            });
        }
    }
    let mut scenes = jobs.par_iter().map(render_scene).collect::<Result<Vec<_>>>()?;
    scenes.shuffle(&mut rng_stream(seed, SHUFFLE_STREAM));
    Ok(scenes)
}

/// Every formation × angle cell with a fixed scene count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub per_cell: usize,
    /// Share of each cell's scenes that carry one outlier.
    pub outlier_fraction: f64,
    pub distance_min: f64,
    pub distance_max: f64,
    pub formations: Vec<Formation>,
    pub angles: Vec<ApproachAngle>,
    /// Remaining render settings; formation, angle, distance and outliers are overridden.
    pub base: SynthConfig,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            per_cell: 100,
            outlier_fraction: 0.5,
            distance_min: 2.0,
            distance_max: 5.0,
            formations: Formation::ALL.to_vec(),
            angles: ApproachAngle::ALL.to_vec(),
            base: SynthConfig::default(),
        }
    }
}

pub fn grid_entries(spec: &GridSpec) -> Result<Vec<(SynthConfig, usize)>> {
    if spec.per_cell == 0 {
        return Err(Error::Config("per_cell must be positive".into()));
    }
    if !(0.0..=1.0).contains(&spec.outlier_fraction) {
        return Err(Error::Config(format!(
            "outlier_fraction must lie in [0, 1], got {}",
            spec.outlier_fraction
        )));
    }
    let with_outlier = (spec.per_cell as f64 * spec.outlier_fraction).round() as usize;
    let mut entries = Vec::new();
    for &formation in &spec.formations {
        for &angle_deg in &spec.angles {
            let cell = SynthConfig {
                formation,
                angle_deg,
                distance: spec.distance_min,
                max_distance: Some(spec.distance_max),
                ..spec.base.clone()
            };
            for (outliers, count) in [(1, with_outlier), (0, spec.per_cell - with_outlier)] {
                if count > 0 {
                    entries.push((SynthConfig { outliers, ..cell.clone() }, count));
                }
            }
        }
    }
    Ok(entries)
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Split {
    pub train: Vec<Scene>,
    pub test: Vec<Scene>,
}

/// Per formation, the first `round(fraction · n)` scenes (in input order) go
/// to training and the rest to test.
pub fn split_by_formation(scenes: &[Scene], train_fraction: f64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!("train fraction must lie in (0, 1), got {train_fraction}")));
    }
    let mut by_formation: Vec<Vec<&Scene>> = vec![Vec::new(); Formation::ALL.len()];
    for s in scenes {
        let f = s
            .formation()
            .ok_or_else(|| Error::Input(format!("scene {} has no formation label", s.frame_id)))?;
        by_formation[f.index()].push(s);
    }
    let mut split = Split::default();
    for group in by_formation {
        let n_train = (group.len() as f64 * train_fraction).round() as usize;
        for (i, s) in group.into_iter().enumerate() {
            if i < n_train {
                split.train.push(s.clone());
            } else {
                split.test.push(s.clone());
            }
        }
    }
    Ok(split)
}
