//! Feature extraction: per-node CRF observations and fixed-length group vectors
//! for the formation, angle and joint classifiers.

use crate::error::{Error, Result};
use crate::labels::Formation;
use crate::pose::{bin_confidence, KeypointName, PersonPose, Scene, KEYPOINT_COUNT};

/// Embedded in every serialized model; bump whenever a layout below changes.
pub const FEATURE_CATALOG_VERSION: &str = "kp17-node39-group309-v2";

/// Horizontal gap reported when a pose has no neighbor on that side.
pub const NO_NEIGHBOR_GAP: f64 = 2.0;
/// Floor on the shoulder-width denominator of the facing score.
pub const FACING_EPS: f64 = 1e-6;
/// Facing scores are clipped to ±this; near-profile poses otherwise produce
/// unbounded ratios.
pub const FACING_CLIP: f64 = 5.0;
/// Confidence separating "seen" from "not seen" face keypoints.
pub const FACE_SEEN: f64 = 0.25;
/// Estimated ground distances (in torso lengths) are clipped to this; also
/// the no-neighbor value.
pub const GROUND_GAP_CLIP: f64 = 12.0;
/// Clip for the log ratio of apparent torso lengths.
pub const SCALE_CONTRAST_CLIP: f64 = 3.0;
/// Nominal focal length as a multiple of image width, for ground-plane estimates.
pub const NOMINAL_FOCAL: f64 = 1.0;
/// Keypoint vertical span per torso length, used when the torso is not fully located.
pub const SPAN_PER_TORSO: f64 = 3.3;
/// Frontal shoulder width per torso length.
pub const SHOULDER_PER_TORSO: f64 = 0.85;

const PERSON_BLOCK: [&str; 8] = [
    "shoulder_width_ratio",
    "facing_score",
    "back_facing",
    "mean_confidence",
    "frac_low",
    "frac_medium",
    "frac_high",
    "frac_very_high",
];
const PERSON_BLOCK_LEN: usize = PERSON_BLOCK.len();

const RELATION_BLOCK: [&str; 6] = [
    "ground_gap",
    "nearer",
    "farther",
    "foot_contrast",
    "faces_toward",
    "faces_away",
];
const RELATION_BLOCK_LEN: usize = RELATION_BLOCK.len();
const RELATION_START: usize = 2 + 3 * PERSON_BLOCK_LEN;

/// Length of [`NodeFeatures`].
pub const NODE_DIM: usize = RELATION_START + 2 * RELATION_BLOCK_LEN + 1;

pub const MAX_GROUP_SLOTS: usize = 3;
const PER_KEYPOINT: usize = 6;
const SLOT_DIM: usize = KEYPOINT_COUNT * PER_KEYPOINT;
/// Length of [`GroupFeatureVector`].
pub const GROUP_DIM: usize = MAX_GROUP_SLOTS * SLOT_DIM + MAX_GROUP_SLOTS;
/// Length of [`AngleFeatureVector`].
pub const ANGLE_DIM: usize = GROUP_DIM + Formation::ALL.len();

/// Human-readable name of every [`NodeFeatures`] entry, by index.
pub fn node_feature_names() -> Vec<String> {
    let mut names = vec!["gap_left".to_string(), "gap_right".to_string()];
    for prefix in ["self", "left", "right"] {
        names.extend(PERSON_BLOCK.iter().map(|n| format!("{prefix}.{n}")));
    }
    for prefix in ["left", "right"] {
        names.extend(RELATION_BLOCK.iter().map(|n| format!("{prefix}.{n}")));
    }
    names.push("nearest_ground_gap".to_string());
    debug_assert_eq!(names.len(), NODE_DIM);
    names
}

/// CRF observation vector for one person in a left-to-right ordered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatures(Vec<f64>);

impl NodeFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// `(x − mid(LS, RS)) / max(|LS − RS|, ε)` for the nose, clipped to ±[`FACING_CLIP`].
pub fn facing_score(pose: &PersonPose) -> f64 {
    let ls = pose.get(KeypointName::LeftShoulder).x;
    let rs = pose.get(KeypointName::RightShoulder).x;
    let nose = pose.get(KeypointName::Nose).x;
    let score = (nose - 0.5 * (ls + rs)) / (ls - rs).abs().max(FACING_EPS);
    score.clamp(-FACING_CLIP, FACING_CLIP)
}

/// Both eyes unseen while both ears are seen.
pub fn is_back_facing(pose: &PersonPose) -> bool {
    let c = |k| pose.get(k).confidence;
    c(KeypointName::LeftEye) < FACE_SEEN
        && c(KeypointName::RightEye) < FACE_SEEN
        && c(KeypointName::LeftEar) >= FACE_SEEN
        && c(KeypointName::RightEar) >= FACE_SEEN
}

fn person_block(pose: &PersonPose, image_width: f64) -> [f64; PERSON_BLOCK_LEN] {
    let counts = pose.bin_counts();
    let n = KEYPOINT_COUNT as f64;
    [
        pose.shoulder_width() / image_width,
        facing_score(pose),
        if is_back_facing(pose) { 1.0 } else { 0.0 },
        pose.mean_confidence(),
        counts[0] as f64 / n,
        counts[1] as f64 / n,
        counts[2] as f64 / n,
        counts[3] as f64 / n,
    ]
}

/// Apparent torso length in pixels: shoulder-to-hip height when all four
/// points are located, otherwise the keypoint span scaled down.
pub fn torso_pixels(pose: &PersonPose) -> f64 {
    use KeypointName::*;
    let located = |k: KeypointName| pose.get(k).confidence > 0.0;
    let torso = if [LeftShoulder, RightShoulder, LeftHip, RightHip].into_iter().all(located) {
        let y = |k: KeypointName| pose.get(k).y;
        0.5 * (y(LeftHip) + y(RightHip)) - 0.5 * (y(LeftShoulder) + y(RightShoulder))
    } else {
        vertical_extent(pose).0 / SPAN_PER_TORSO
    };
    torso.max(1.0)
}

/// Vertical extent and lowest point (largest y) of the located keypoints.
fn vertical_extent(pose: &PersonPose) -> (f64, f64) {
    let ys: Vec<f64> = pose.keypoints().iter().filter(|k| k.confidence > 0.0).map(|k| k.y).collect();
    if ys.is_empty() {
        return (0.0, 0.0);
    }
    let lo = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo, hi)
}

/// Ground-plane position in torso lengths under a nominal pinhole camera:
/// lateral offset and depth.
pub fn ground_position(pose: &PersonPose, image_width: f64) -> [f64; 2] {
    let t = torso_pixels(pose);
    [(pose.anchor_x() - 0.5 * image_width) / t, NOMINAL_FOCAL * image_width / t]
}

/// Estimated ground-plane facing direction `[lateral, depth]`, unit length.
/// Shoulder foreshortening gives the depth component; the nose offset gives
/// the side.
pub fn ground_heading(pose: &PersonPose) -> [f64; 2] {
    let dx = pose.get(KeypointName::LeftShoulder).x - pose.get(KeypointName::RightShoulder).x;
    let depth = (-dx / (SHOULDER_PER_TORSO * torso_pixels(pose))).clamp(-1.0, 1.0);
    let lateral = (1.0 - depth * depth).sqrt();
    let side = if facing_score(pose) < 0.0 { -1.0 } else { 1.0 };
    [side * lateral, depth]
}

/// How `pose` relates to a neighbor: estimated ground distance, how much
/// nearer or farther it appears, and foot-line offset.
fn relation_block(pose: &PersonPose, neighbor: Option<&PersonPose>, w: f64, h: f64) -> [f64; RELATION_BLOCK_LEN] {
    let Some(nb) = neighbor else {
        return [GROUND_GAP_CLIP, 0.0, 0.0, 0.0, 0.0, 0.0];
    };
    let (a, b) = (ground_position(pose, w), ground_position(nb, w));
    let gap = (a[0] - b[0]).hypot(a[1] - b[1]);
    let f = ground_heading(pose);
    let toward = if gap > 0.0 {
        (f[0] * (b[0] - a[0]) + f[1] * (b[1] - a[1])) / gap
    } else {
        0.0
    };
    let log_ratio = (torso_pixels(pose) / torso_pixels(nb)).ln().clamp(-SCALE_CONTRAST_CLIP, SCALE_CONTRAST_CLIP);
    [
        gap.min(GROUND_GAP_CLIP),
        log_ratio.max(0.0),
        (-log_ratio).max(0.0),
        (vertical_extent(pose).1 - vertical_extent(nb).1).abs() / h,
        toward.max(0.0),
        (-toward).max(0.0),
    ]
}

/// Observation features of pose `i`. Only poses `i − 1`, `i` and `i + 1` are read.
pub fn node_features(scene: &Scene, i: usize) -> Result<NodeFeatures> {
    let n = scene.poses.len();
    if i >= n {
        return Err(Error::Input(format!("pose index {i} out of range for {n} poses")));
    }
    let w = f64::from(scene.image_width);
    let anchor = scene.poses[i].anchor_x();
    let left = i.checked_sub(1).map(|j| &scene.poses[j]);
    let right = scene.poses.get(i + 1);

    let mut v = Vec::with_capacity(NODE_DIM);
    v.push(left.map_or(NO_NEIGHBOR_GAP, |p| (anchor - p.anchor_x()) / w));
    v.push(right.map_or(NO_NEIGHBOR_GAP, |p| (p.anchor_x() - anchor) / w));
    v.extend(person_block(&scene.poses[i], w));
    for neighbor in [left, right] {
        match neighbor {
            Some(p) => v.extend(person_block(p, w)),
            None => v.extend([0.0; PERSON_BLOCK_LEN]),
        }
    }
    let h = f64::from(scene.image_height);
    for neighbor in [left, right] {
        v.extend(relation_block(&scene.poses[i], neighbor, w, h));
    }
    v.push(v[RELATION_START].min(v[RELATION_START + RELATION_BLOCK_LEN]));
    debug_assert_eq!(v.len(), NODE_DIM);
    Ok(NodeFeatures(v))
}

/// Node features of every pose, in scene order.
pub fn scene_node_features(scene: &Scene) -> Result<Vec<NodeFeatures>> {
    (0..scene.poses.len()).map(|i| node_features(scene, i)).collect()
}

/// Fixed 309-entry encoding of up to three left-to-right ordered poses.
///
/// Slot `s` occupies `[102 s, 102 (s + 1))` with six entries per keypoint
/// (`x_norm`, `y_norm`, one-hot confidence bin); entries 306..309 are the
/// slot presence flags.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupFeatureVector(Vec<f64>);

impl GroupFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn presence(&self) -> &[f64] {
        &self.0[MAX_GROUP_SLOTS * SLOT_DIM..]
    }
}

pub fn group_features(
    poses: &[&PersonPose],
    image_width: u32,
    image_height: u32,
) -> Result<GroupFeatureVector> {
    if poses.len() > MAX_GROUP_SLOTS {
        return Err(Error::Capacity {
            got: poses.len(),
            max: MAX_GROUP_SLOTS,
        });
    }
    if image_width == 0 || image_height == 0 {
        return Err(Error::Input("image dimensions must be positive".into()));
    }
    let half_w = f64::from(image_width) / 2.0;
    let half_h = f64::from(image_height) / 2.0;
    let mut v = vec![0.0; GROUP_DIM];
    for (slot, pose) in poses.iter().enumerate() {
        let base = slot * SLOT_DIM;
        for (k, kp) in pose.keypoints().iter().enumerate() {
            let off = base + k * PER_KEYPOINT;
            v[off] = ((kp.x - half_w) / half_w).clamp(-1.0, 1.0);
            v[off + 1] = ((kp.y - half_h) / half_h).clamp(-1.0, 1.0);
            v[off + 2 + bin_confidence(kp.confidence)?.index()] = 1.0;
        }
        v[MAX_GROUP_SLOTS * SLOT_DIM + slot] = 1.0;
    }
    Ok(GroupFeatureVector(v))
}

/// [`GroupFeatureVector`] followed by the formation one-hot in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleFeatureVector(Vec<f64>);

impl AngleFeatureVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

pub fn angle_features(gfv: &GroupFeatureVector, formation: Formation) -> AngleFeatureVector {
    let mut v = Vec::with_capacity(ANGLE_DIM);
    v.extend_from_slice(gfv.as_slice());
    let mut one_hot = [0.0; 4];
    one_hot[formation.index()] = 1.0;
    v.extend(one_hot);
    AngleFeatureVector(v)
}
