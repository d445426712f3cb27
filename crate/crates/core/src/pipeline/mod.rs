//! End-to-end detection: order poses, filter outliers with the CRF, then
//! classify the surviving group with the SVMs.

mod bundle;
mod rule;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

pub use bundle::{load_models, save_models, ModelBundle, BUNDLE_FORMAT_VERSION};
pub use rule::{
    formation_from_orientations, head_orientation, rule_classify, HeadOrientation, FACE_CONFIDENCE, FRONT_BAND,
    GAP_FACTOR, REASON_NO_RULE, THIRD_WIDTH_RATIO,
};

use crate::crf::{self, ChainInstance, CrfModel};
use crate::error::{Error, Result};
use crate::features::{angle_features, group_features, GroupFeatureVector, FEATURE_CATALOG_VERSION, MAX_GROUP_SLOTS};
use crate::labels::{ApproachAngle, Formation, JointClass};
use crate::pose::{left_to_right_order, GroupLabel, PersonPose, Scene};
use crate::svm::{
    select_gamma, train_one_vs_rest, GammaSelection, RbfKernelParams, SmoConfig, SvmModel,
};

/// Reason code when fewer than two people survive outlier filtering.
pub const REASON_GROUP_TOO_SMALL: &str = "group_too_small";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub frame_id: String,
    /// One label per input pose, in input order.
    pub membership: Vec<GroupLabel>,
    /// Input indices of the G-labeled poses.
    pub members: Vec<usize>,
    pub formation: Option<Formation>,
    pub angle_deg: Option<ApproachAngle>,
    pub joint: Option<JointClass>,
    /// Decision values per stage, keyed by class name.
    pub scores: IndexMap<String, IndexMap<String, f64>>,
    pub reason: Option<String>,
    /// More than three members; only the three left-most were classified.
    pub overflow: bool,
}

/// Wall-clock split of one detection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StageTimes {
    pub features: Duration,
    pub crf: Duration,
    pub svm: Duration,
}

impl StageTimes {
    pub fn total(&self) -> Duration {
        self.features + self.crf + self.svm
    }
}

fn check_catalog(found: &str) -> Result<()> {
    if found != FEATURE_CATALOG_VERSION {
        return Err(Error::VersionMismatch {
            expected: FEATURE_CATALOG_VERSION.to_string(),
            found: found.to_string(),
        });
    }
    Ok(())
}

fn score_map(model: &SvmModel, scores: &[f64]) -> IndexMap<String, f64> {
    model.classes().iter().cloned().zip(scores.iter().copied()).collect()
}

fn parse_class<T: FromStr<Err = Error>>(model: &SvmModel, class: usize) -> Result<T> {
    model.classes()[class].parse()
}

struct Classifiers<'a> {
    cascade: Option<(&'a SvmModel, &'a SvmModel)>,
    joint: Option<&'a SvmModel>,
}

fn run(scene: &Scene, crf_model: &CrfModel, cls: Classifiers<'_>, times: &mut StageTimes) -> Result<Detection> {
    check_catalog(crf_model.feature_catalog_version())?;
    if let Some((f, a)) = cls.cascade {
        check_catalog(f.feature_catalog_version())?;
        check_catalog(a.feature_catalog_version())?;
    }
    if let Some(j) = cls.joint {
        check_catalog(j.feature_catalog_version())?;
    }
    scene.validate()?;

    let mut det = Detection {
        frame_id: scene.frame_id.clone(),
        ..Detection::default()
    };
    if scene.poses.is_empty() {
        det.reason = Some(REASON_GROUP_TOO_SMALL.to_string());
        return Ok(det);
    }

    let t = Instant::now();
    let order = left_to_right_order(scene);
    let ordered = Scene {
        poses: order.iter().map(|&i| scene.poses[i].clone()).collect(),
        truth: None,
        ..scene.clone()
    };
    let chain = ChainInstance::from_scene(&ordered)?;
    times.features += t.elapsed();

    let t = Instant::now();
    let labels = crf::viterbi(crf_model, &chain)?;
    times.crf += t.elapsed();

    let t = Instant::now();
    let mut membership = vec![GroupLabel::O; scene.poses.len()];
    for (rank, &i) in order.iter().enumerate() {
        membership[i] = labels[rank];
    }
    det.members = (0..membership.len()).filter(|&i| membership[i] == GroupLabel::G).collect();
    det.membership = membership;
    let group: Vec<&PersonPose> = (0..labels.len())
        .filter(|&r| labels[r] == GroupLabel::G)
        .map(|r| &ordered.poses[r])
        .collect();
    if group.len() < 2 {
        det.reason = Some(REASON_GROUP_TOO_SMALL.to_string());
        times.features += t.elapsed();
        return Ok(det);
    }
    det.overflow = group.len() > MAX_GROUP_SLOTS;
    let gfv = group_features(&group[..group.len().min(MAX_GROUP_SLOTS)], scene.image_width, scene.image_height)?;
    times.features += t.elapsed();

    let t = Instant::now();
    if let Some((fm, am)) = cls.cascade {
        let fp = fm.predict(gfv.as_slice())?;
        let formation: Formation = parse_class(fm, fp.class)?;
        let ap = am.predict(angle_features(&gfv, formation).as_slice())?;
        det.angle_deg = Some(parse_class(am, ap.class)?);
        det.formation = Some(formation);
        det.scores.insert("formation".into(), score_map(fm, &fp.scores));
        det.scores.insert("angle".into(), score_map(am, &ap.scores));
    }
    if let Some(jm) = cls.joint {
        let jp = jm.predict(gfv.as_slice())?;
        let joint: JointClass = parse_class(jm, jp.class)?;
        det.joint = Some(joint);
        det.scores.insert("joint".into(), score_map(jm, &jp.scores));
    }
    times.svm += t.elapsed();
    Ok(det)
}

/// Cascaded detection: formation first, then the angle given that formation.
pub fn detect(scene: &Scene, crf_model: &CrfModel, formation_svm: &SvmModel, angle_svm: &SvmModel) -> Result<Detection> {
    detect_timed(scene, crf_model, formation_svm, angle_svm, &mut StageTimes::default())
}

pub fn detect_timed(
    scene: &Scene,
    crf_model: &CrfModel,
    formation_svm: &SvmModel,
    angle_svm: &SvmModel,
    times: &mut StageTimes,
) -> Result<Detection> {
    let cls = Classifiers {
        cascade: Some((formation_svm, angle_svm)),
        joint: None,
    };
    run(scene, crf_model, cls, times)
}

/// Single 28-class prediction of (formation, angle).
pub fn detect_joint(scene: &Scene, crf_model: &CrfModel, joint_svm: &SvmModel) -> Result<Detection> {
    let cls = Classifiers {
        cascade: None,
        joint: Some(joint_svm),
    };
    run(scene, crf_model, cls, &mut StageTimes::default())
}

/// Runs every classifier the bundle holds. The cascade needs both the
/// formation and angle models.
pub fn detect_with_bundle(scene: &Scene, models: &ModelBundle) -> Result<Detection> {
    let crf_model = models
        .crf
        .as_ref()
        .ok_or_else(|| Error::Config("model bundle has no CRF model".into()))?;
    let cascade = match (&models.formation, &models.angle) {
        (Some(f), Some(a)) => Some((f, a)),
        _ => None,
    };
    if cascade.is_none() && models.joint.is_none() {
        return Err(Error::Config(
            "model bundle needs formation + angle models or a joint model".into(),
        ));
    }
    let cls = Classifiers {
        cascade,
        joint: models.joint.as_ref(),
    };
    run(scene, crf_model, cls, &mut StageTimes::default())
}

/// Which classifier an SVM is trained for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SvmTask {
    Formation,
    Angle,
    Joint,
}

impl SvmTask {
    pub const ALL: [SvmTask; 3] = [SvmTask::Formation, SvmTask::Angle, SvmTask::Joint];

    pub fn as_str(self) -> &'static str {
        match self {
            SvmTask::Formation => "formation",
            SvmTask::Angle => "angle",
            SvmTask::Joint => "joint",
        }
    }

    /// Class names in canonical order.
    pub fn classes(self) -> Vec<String> {
        match self {
            SvmTask::Formation => Formation::ALL.iter().map(|f| f.to_string()).collect(),
            SvmTask::Angle => ApproachAngle::ALL.iter().map(|a| a.to_string()).collect(),
            SvmTask::Joint => JointClass::all().map(|j| j.to_string()).collect(),
        }
    }
}

impl fmt::Display for SvmTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SvmTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        SvmTask::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown SVM task {s:?}")))
    }
}

/// A gold group: its feature vector and labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSample {
    pub frame_id: String,
    pub features: GroupFeatureVector,
    pub formation: Formation,
    pub angle: Option<ApproachAngle>,
}

fn group_sample(ordered: &Scene, labels: &[GroupLabel]) -> Result<Option<GroupSample>> {
    let Some(formation) = ordered.formation() else {
        return Ok(None);
    };
    let group: Vec<&PersonPose> = (0..labels.len())
        .filter(|&r| labels[r] == GroupLabel::G)
        .map(|r| &ordered.poses[r])
        .collect();
    if group.len() < 2 {
        return Ok(None);
    }
    let features = group_features(
        &group[..group.len().min(MAX_GROUP_SLOTS)],
        ordered.image_width,
        ordered.image_height,
    )?;
    Ok(Some(GroupSample {
        frame_id: ordered.frame_id.clone(),
        features,
        formation,
        angle: ordered.angle(),
    }))
}

/// Group vectors over the gold members of every labeled scene with at
/// least two members.
pub fn gold_group_samples(scenes: &[Scene]) -> Result<Vec<GroupSample>> {
    let mut out = Vec::new();
    for scene in scenes {
        if scene.poses.is_empty() || scene.membership().is_none() {
            continue;
        }
        let ordered = crate::pose::order_left_to_right(scene)?;
        if let Some(s) = group_sample(&ordered, ordered.membership().unwrap_or_default())? {
            out.push(s);
        }
    }
    Ok(out)
}

/// Gold groups plus the groups a classifier meets after imperfect outlier
/// filtering, all labeled with the true formation and angle: every pose of
/// each scene that contains outliers, and the CRF's own grouping of the other
/// scenes wherever it differs from gold.
pub fn augmented_group_samples(scenes: &[Scene], crf_model: &CrfModel) -> Result<Vec<GroupSample>> {
    let mut out = gold_group_samples(scenes)?;
    for scene in scenes {
        let (Some(gold), Some(_)) = (scene.membership(), scene.formation()) else {
            continue;
        };
        if scene.poses.is_empty() {
            continue;
        }
        let ordered = crate::pose::order_left_to_right(scene)?;
        let labels = if gold.contains(&GroupLabel::O) {
            vec![GroupLabel::G; ordered.poses.len()]
        } else {
            crf::viterbi(crf_model, &ChainInstance::from_scene(&ordered)?)?
        };
        if labels.as_slice() == ordered.membership().unwrap_or(gold) {
            continue;
        }
        if let Some(s) = group_sample(&ordered, &labels)? {
            out.push(s);
        }
    }
    Ok(out)
}

/// CRF training chains, each scene ordered left to right.
pub fn crf_chains(scenes: &[Scene]) -> Result<Vec<ChainInstance>> {
    scenes
        .iter()
        .filter(|s| !s.poses.is_empty())
        .map(|s| {
            if s.membership().is_none() {
                return Err(Error::Input(format!("scene {} has no membership labels", s.frame_id)));
            }
            ChainInstance::from_scene(&crate::pose::order_left_to_right(s)?)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmTrainConfig {
    #[serde(rename = "C")]
    pub c: f64,
    pub tol: f64,
    /// Fixed γ; selected by cross-validation when unset.
    pub gamma: Option<f64>,
    pub cv_seed: u64,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            c: 10.0,
            tol: 1e-3,
            gamma: None,
            cv_seed: 0,
        }
    }
}

/// Feature vectors and class indices for one task.
pub fn task_data(task: SvmTask, samples: &[GroupSample]) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for s in samples {
        match task {
            SvmTask::Formation => {
                xs.push(s.features.as_slice().to_vec());
                ys.push(s.formation.index());
            }
            SvmTask::Angle => {
                if let Some(a) = s.angle {
                    xs.push(angle_features(&s.features, s.formation).into_vec());
                    ys.push(a.index());
                }
            }
            SvmTask::Joint => {
                if let Some(a) = s.angle {
                    xs.push(s.features.as_slice().to_vec());
                    ys.push(JointClass { formation: s.formation, angle: a }.encode());
                }
            }
        }
    }
    (xs, ys)
}

pub fn train_svm(task: SvmTask, samples: &[GroupSample], cfg: &SvmTrainConfig) -> Result<(SvmModel, GammaSelection)> {
    let (xs, ys) = task_data(task, samples);
    if xs.is_empty() {
        return Err(Error::Input(format!("no labeled groups for the {task} task")));
    }
    let selection = match cfg.gamma {
        Some(gamma) => GammaSelection {
            gamma,
            cv_scores: Vec::new(),
            fallback: false,
        },
        None => select_gamma(&xs, &ys, cfg.c, cfg.cv_seed)?,
    };
    let smo = SmoConfig {
        c: cfg.c,
        tol: cfg.tol,
        ..SmoConfig::default()
    };
    let model = train_one_vs_rest(&xs, &ys, task.classes(), RbfKernelParams::new(selection.gamma)?, &smo)?;
    Ok((model, selection))
}
