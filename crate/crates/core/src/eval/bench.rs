use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{detect_timed, ModelBundle, StageTimes};
use crate::pose::Scene;

/// Smallest scene set the benchmark accepts.
pub const MIN_BENCH_SCENES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageMillis {
    pub features: f64,
    pub crf: f64,
    pub svm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub scenes: usize,
    pub repetitions: usize,
    pub max_poses: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub mean_ms: f64,
    /// Mean per-stage time per detection.
    pub stage_mean_ms: StageMillis,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let rank = (p * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

/// Times cascaded `detect` on the calling thread. One untimed pass over all
/// scenes warms caches first.
pub fn bench_latency(models: &ModelBundle, scenes: &[Scene], repetitions: usize) -> Result<LatencyStats> {
    if scenes.len() < MIN_BENCH_SCENES {
        return Err(Error::Config(format!(
            "benchmark needs at least {MIN_BENCH_SCENES} scenes, got {}",
            scenes.len()
        )));
    }
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be positive".into()));
    }
    let (Some(crf_model), Some(fm), Some(am)) = (&models.crf, &models.formation, &models.angle) else {
        return Err(Error::Config("benchmark needs CRF, formation and angle models".into()));
    };
    let mut scratch = StageTimes::default();
    for s in scenes {
        detect_timed(s, crf_model, fm, am, &mut scratch)?;
    }
    let mut samples = Vec::with_capacity(scenes.len() * repetitions);
    let mut stages = StageTimes::default();
    for _ in 0..repetitions {
        for s in scenes {
            let t = Instant::now();
            detect_timed(s, crf_model, fm, am, &mut stages)?;
            samples.push(ms(t.elapsed()));
        }
    }
    let n = samples.len() as f64;
    let mean_ms = samples.iter().sum::<f64>() / n;
    samples.sort_by(f64::total_cmp);
    Ok(LatencyStats {
        scenes: scenes.len(),
        repetitions,
        max_poses: scenes.iter().map(|s| s.poses.len()).max().unwrap_or(0),
        p50_ms: percentile(&samples, 0.50),
        p95_ms: percentile(&samples, 0.95),
        max_ms: *samples.last().unwrap_or(&0.0),
        mean_ms,
        stage_mean_ms: StageMillis {
            features: ms(stages.features) / n,
            crf: ms(stages.crf) / n,
            svm: ms(stages.svm) / n,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 0.5), 10.0);
        assert_eq!(percentile(&v, 0.95), 19.0);
        assert_eq!(percentile(&v, 1.0), 20.0);
        assert_eq!(percentile(&[3.0], 0.95), 3.0);
    }

    #[test]
    fn too_few_scenes() {
        let r = bench_latency(&ModelBundle::default(), &[], 1);
        assert!(r.unwrap_err().is_config());
    }
}
