use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ApproachAngle, Formation};
use crate::pipeline::{detect_with_bundle, ModelBundle};
use crate::pose::GroupLabel;
use crate::synth::{render_scene, SynthConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RobustnessConfig {
    /// Pairs with a correctly filtered outlier to collect.
    pub pairs: usize,
    /// Give up after this many generated pairs.
    pub max_generated: usize,
    pub seed: u64,
    /// Render settings; formation, angle, outliers and seed are overridden.
    pub base: SynthConfig,
    pub distance_min: f64,
    pub distance_max: f64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            pairs: 200,
            max_generated: 4000,
            seed: 1_000_000,
            base: SynthConfig::default(),
            distance_min: 2.0,
            distance_max: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub generated: usize,
    /// Pairs whose outlier the CRF labeled O.
    pub qualified: usize,
    /// Qualified pairs with the same formation prediction.
    pub agree: usize,
    pub agreement: f64,
}

/// Renders each scene with and without one outlier (same seed, so members are
/// identical) and compares formation predictions over pairs whose outlier the
/// CRF labels O. Cells cycle through every formation and angle.
pub fn outlier_robustness(models: &ModelBundle, cfg: &RobustnessConfig) -> Result<RobustnessReport> {
    if cfg.pairs == 0 || cfg.max_generated < cfg.pairs {
        return Err(Error::Config("need 0 < pairs <= max_generated".into()));
    }
    let cells: Vec<(Formation, ApproachAngle)> = Formation::ALL
        .iter()
        .flat_map(|&f| ApproachAngle::ALL.iter().map(move |&a| (f, a)))
        .collect();
    let (mut generated, mut qualified, mut agree) = (0, 0, 0);
    while qualified < cfg.pairs && generated < cfg.max_generated {
        let batch = (cfg.pairs - qualified).min(cfg.max_generated - generated).max(1);
        let outcomes = (generated..generated + batch)
            .into_par_iter()
            .map(|k| {
                let (formation, angle_deg) = cells[k % cells.len()];
                let with = SynthConfig {
                    formation,
                    angle_deg,
                    distance: cfg.distance_min,
                    max_distance: Some(cfg.distance_max),
                    outliers: 1,
                    seed: cfg.seed.wrapping_add(k as u64),
                    ..cfg.base.clone()
                };
                let without = SynthConfig {
                    outliers: 0,
                    ..with.clone()
                };
                let a = render_scene(&with)?;
                let b = render_scene(&without)?;
                let da = detect_with_bundle(&a, models)?;
                let db = detect_with_bundle(&b, models)?;
                let gold = a.membership().unwrap_or_default();
                let filtered = gold
                    .iter()
                    .zip(&da.membership)
                    .all(|(g, p)| *g == GroupLabel::G || *p == GroupLabel::O);
                Ok((filtered, da.formation == db.formation))
            })
            .collect::<Result<Vec<_>>>()?;
        for (filtered, same) in outcomes {
            generated += 1;
            if filtered && qualified < cfg.pairs {
                qualified += 1;
                agree += usize::from(same);
            }
        }
    }
    Ok(RobustnessReport {
        generated,
        qualified,
        agree,
        agreement: if qualified > 0 { agree as f64 / qualified as f64 } else { 0.0 },
    })
}
