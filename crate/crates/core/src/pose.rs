//! Skeleton and scene types, confidence binning, left-to-right ordering and
//! the scene JSONL format.
//!
//! Keypoints arrive as data in raw image pixels (origin top-left). A keypoint
//! the detector did not report is stored as confidence 0 at (0, 0) so every
//! [`PersonPose`] has exactly 17 entries in canonical order.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labels::{ApproachAngle, Formation};

/// The 17 skeletal landmarks, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum KeypointName {
    Nose,
    LeftEye,
    RightEye,
    LeftEar,
    RightEar,
    LeftShoulder,
    RightShoulder,
    LeftElbow,
    RightElbow,
    LeftWrist,
    RightWrist,
    LeftHip,
    RightHip,
    LeftKnee,
    RightKnee,
    LeftAnkle,
    RightAnkle,
}

pub const KEYPOINT_COUNT: usize = 17;

impl KeypointName {
    pub const ALL: [KeypointName; KEYPOINT_COUNT] = [
        KeypointName::Nose,
        KeypointName::LeftEye,
        KeypointName::RightEye,
        KeypointName::LeftEar,
        KeypointName::RightEar,
        KeypointName::LeftShoulder,
        KeypointName::RightShoulder,
        KeypointName::LeftElbow,
        KeypointName::RightElbow,
        KeypointName::LeftWrist,
        KeypointName::RightWrist,
        KeypointName::LeftHip,
        KeypointName::RightHip,
        KeypointName::LeftKnee,
        KeypointName::RightKnee,
        KeypointName::LeftAnkle,
        KeypointName::RightAnkle,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            KeypointName::Nose => "nose",
            KeypointName::LeftEye => "leftEye",
            KeypointName::RightEye => "rightEye",
            KeypointName::LeftEar => "leftEar",
            KeypointName::RightEar => "rightEar",
            KeypointName::LeftShoulder => "leftShoulder",
            KeypointName::RightShoulder => "rightShoulder",
            KeypointName::LeftElbow => "leftElbow",
            KeypointName::RightElbow => "rightElbow",
            KeypointName::LeftWrist => "leftWrist",
            KeypointName::RightWrist => "rightWrist",
            KeypointName::LeftHip => "leftHip",
            KeypointName::RightHip => "rightHip",
            KeypointName::LeftKnee => "leftKnee",
            KeypointName::RightKnee => "rightKnee",
            KeypointName::LeftAnkle => "leftAnkle",
            KeypointName::RightAnkle => "rightAnkle",
        }
    }
}

impl fmt::Display for KeypointName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for KeypointName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        KeypointName::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Validation(format!("unknown keypoint name '{s}'")))
    }
}

/// A single detected landmark in image pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub name: KeypointName,
    pub x: f64,
    pub y: f64,
    pub confidence: f64,
}

impl Keypoint {
    pub fn new(name: KeypointName, x: f64, y: f64, confidence: f64) -> Result<Self> {
        let kp = Keypoint {
            name,
            x,
            y,
            confidence,
        };
        kp.validate()?;
        Ok(kp)
    }

    /// Placeholder for a landmark the detector did not report.
    pub fn missing(name: KeypointName) -> Self {
        Keypoint {
            name,
            x: 0.0,
            y: 0.0,
            confidence: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.x.is_finite() || !self.y.is_finite() {
            return Err(Error::Validation(format!(
                "keypoint {} has non-finite coordinates",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Validation(format!(
                "keypoint {} confidence {} outside [0, 1]",
                self.name, self.confidence
            )));
        }
        Ok(())
    }
}

/// Four-way quantization of a keypoint confidence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConfidenceBin {
    Low,
    Medium,
    High,
    VeryHigh,
}

impl ConfidenceBin {
    pub const ALL: [ConfidenceBin; 4] = [
        ConfidenceBin::Low,
        ConfidenceBin::Medium,
        ConfidenceBin::High,
        ConfidenceBin::VeryHigh,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Bins are `[0, .25)`, `[.25, .5)`, `[.5, .75)` and `[.75, 1]`.
pub fn bin_confidence(c: f64) -> Result<ConfidenceBin> {
    if !(0.0..=1.0).contains(&c) {
        return Err(Error::Input(format!("confidence {c} outside [0, 1]")));
    }
    Ok(if c < 0.25 {
        ConfidenceBin::Low
    } else if c < 0.5 {
        ConfidenceBin::Medium
    } else if c < 0.75 {
        ConfidenceBin::High
    } else {
        ConfidenceBin::VeryHigh
    })
}

/// Keypoints at or above this confidence count towards a pose's anchor.
pub const ANCHOR_CONFIDENCE: f64 = 0.5;

/// One detected person.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPose")]
pub struct PersonPose {
    pub person_id: String,
    keypoints: [Keypoint; KEYPOINT_COUNT],
}

#[derive(Deserialize)]
struct RawPose {
    person_id: String,
    keypoints: Vec<Keypoint>,
}

impl TryFrom<RawPose> for PersonPose {
    type Error = Error;
    fn try_from(raw: RawPose) -> Result<Self> {
        PersonPose::new(raw.person_id, raw.keypoints)
    }
}

impl PersonPose {
    /// Builds a pose from keypoints in any order; every name must appear exactly once.
    pub fn new(person_id: impl Into<String>, keypoints: Vec<Keypoint>) -> Result<Self> {
        let person_id = person_id.into();
        if keypoints.len() != KEYPOINT_COUNT {
            return Err(Error::Validation(format!(
                "person {person_id}: expected {KEYPOINT_COUNT} keypoints, got {}",
                keypoints.len()
            )));
        }
        let mut slots: [Option<Keypoint>; KEYPOINT_COUNT] = [None; KEYPOINT_COUNT];
        for kp in keypoints {
            kp.validate()?;
            let slot = &mut slots[kp.name.index()];
            if slot.is_some() {
                return Err(Error::Validation(format!(
                    "person {person_id}: duplicate keypoint {}",
                    kp.name
                )));
            }
            *slot = Some(kp);
        }
        let mut out = [Keypoint::missing(KeypointName::Nose); KEYPOINT_COUNT];
        for (i, name) in KeypointName::ALL.iter().enumerate() {
            out[i] = slots[i].ok_or_else(|| {
                Error::Validation(format!("person {person_id}: missing keypoint {name}"))
            })?;
        }
        Ok(PersonPose {
            person_id,
            keypoints: out,
        })
    }

    /// Keypoints in canonical [`KeypointName::ALL`] order.
    pub fn keypoints(&self) -> &[Keypoint; KEYPOINT_COUNT] {
        &self.keypoints
    }

    pub fn get(&self, name: KeypointName) -> &Keypoint {
        &self.keypoints[name.index()]
    }

    /// Horizontal reference position used for left-to-right ordering: mean x
    /// of confident keypoints, or of all 17 when none is confident.
    pub fn anchor_x(&self) -> f64 {
        let (sum, n) = self
            .keypoints
            .iter()
            .filter(|k| k.confidence >= ANCHOR_CONFIDENCE)
            .fold((0.0, 0usize), |(s, n), k| (s + k.x, n + 1));
        if n > 0 {
            sum / n as f64
        } else {
            self.keypoints.iter().map(|k| k.x).sum::<f64>() / KEYPOINT_COUNT as f64
        }
    }

    /// |x(leftShoulder) − x(rightShoulder)| in pixels.
    pub fn shoulder_width(&self) -> f64 {
        (self.get(KeypointName::LeftShoulder).x - self.get(KeypointName::RightShoulder).x).abs()
    }

    pub fn mean_confidence(&self) -> f64 {
        self.keypoints.iter().map(|k| k.confidence).sum::<f64>() / KEYPOINT_COUNT as f64
    }

    /// Number of keypoints falling in each [`ConfidenceBin`].
    pub fn bin_counts(&self) -> [usize; 4] {
        let mut counts = [0; 4];
        for k in &self.keypoints {
            // confidence validated at construction
            counts[bin_confidence(k.confidence).map_or(0, ConfidenceBin::index)] += 1;
        }
        counts
    }
}

/// Group membership label of one person.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupLabel {
    /// Member of the interacting group.
    G,
    /// Outlier standing in r-space.
    O,
}

impl GroupLabel {
    pub const ALL: [GroupLabel; 2] = [GroupLabel::G, GroupLabel::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for GroupLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupLabel::G => "G",
            GroupLabel::O => "O",
        })
    }
}

/// Optional ground truth attached to a scene.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Truth {
    #[serde(default)]
    pub membership: Option<Vec<GroupLabel>>,
    #[serde(default)]
    pub formation: Option<Formation>,
    #[serde(default)]
    pub angle_deg: Option<ApproachAngle>,
}

/// One image frame worth of detected people.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScene")]
pub struct Scene {
    pub frame_id: String,
    pub image_width: u32,
    pub image_height: u32,
    pub poses: Vec<PersonPose>,
    pub truth: Option<Truth>,
}

#[derive(Deserialize)]
struct RawScene {
    frame_id: String,
    image_width: u32,
    image_height: u32,
    poses: Vec<PersonPose>,
    #[serde(default)]
    truth: Option<Truth>,
}

impl TryFrom<RawScene> for Scene {
    type Error = Error;
    fn try_from(raw: RawScene) -> Result<Self> {
        let scene = Scene {
            frame_id: raw.frame_id,
            image_width: raw.image_width,
            image_height: raw.image_height,
            poses: raw.poses,
            truth: raw.truth,
        };
        scene.validate()?;
        Ok(scene)
    }
}

impl Scene {
    pub fn validate(&self) -> Result<()> {
        if self.image_width == 0 || self.image_height == 0 {
            return Err(Error::Validation(format!(
                "scene {}: image dimensions must be positive",
                self.frame_id
            )));
        }
        if let Some(m) = self.truth.as_ref().and_then(|t| t.membership.as_ref()) {
            if m.len() != self.poses.len() {
                return Err(Error::Validation(format!(
                    "scene {}: {} membership labels for {} poses",
                    self.frame_id,
                    m.len(),
                    self.poses.len()
                )));
            }
        }
        Ok(())
    }

    pub fn membership(&self) -> Option<&[GroupLabel]> {
        self.truth.as_ref()?.membership.as_deref()
    }

    pub fn formation(&self) -> Option<Formation> {
        self.truth.as_ref()?.formation
    }

    pub fn angle(&self) -> Option<ApproachAngle> {
        self.truth.as_ref()?.angle_deg
    }
}

/// Stable sort of the poses by [`PersonPose::anchor_x`]; truth membership is
/// permuted alongside.
/// Pose indices sorted by anchor x; ties keep input order.
pub fn left_to_right_order(scene: &Scene) -> Vec<usize> {
    let anchors: Vec<f64> = scene.poses.iter().map(PersonPose::anchor_x).collect();
    let mut order: Vec<usize> = (0..scene.poses.len()).collect();
    order.sort_by(|&a, &b| anchors[a].total_cmp(&anchors[b]));
    order
}

pub fn order_left_to_right(scene: &Scene) -> Result<Scene> {
    if scene.poses.is_empty() {
        return Err(Error::Input(format!("scene {} has no poses", scene.frame_id)));
    }
    let order = left_to_right_order(scene);
    let mut out = scene.clone();
    out.poses = order.iter().map(|&i| scene.poses[i].clone()).collect();
    if let Some(m) = scene.membership() {
        let permuted = order.iter().map(|&i| m[i]).collect();
        out.truth.as_mut().expect("membership implies truth").membership = Some(permuted);
    }
    Ok(out)
}

/// Reads one scene per non-blank line.
pub fn parse_scenes<R: BufRead>(reader: R) -> Result<Vec<Scene>> {
    let mut scenes = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let scene: Scene = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        scenes.push(scene);
    }
    Ok(scenes)
}

pub fn write_scenes<W: Write>(mut writer: W, scenes: &[Scene]) -> Result<()> {
    for scene in scenes {
        serde_json::to_writer(&mut writer, scene)?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_scenes_file(path: &std::path::Path) -> Result<Vec<Scene>> {
    let file = std::fs::File::open(path)?;
    parse_scenes(std::io::BufReader::new(file))
}

pub fn write_scenes_file(path: &std::path::Path, scenes: &[Scene]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_scenes(std::io::BufWriter::new(file), scenes)
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;

    /// A frontal pose centred at `cx` with every keypoint at `confidence`.
    pub fn pose_at(id: &str, cx: f64, confidence: f64) -> PersonPose {
        let kps = KeypointName::ALL
            .iter()
            .enumerate()
            .map(|(i, &name)| {
                let side = match i {
                    0 => 0.0,
                    _ if i % 2 == 1 => 1.0,
                    _ => -1.0,
                };
                Keypoint::new(name, cx + side * 10.0, 100.0 + 10.0 * i as f64, confidence).unwrap()
            })
            .collect();
        PersonPose::new(id, kps).unwrap()
    }

    pub fn scene_of(poses: Vec<PersonPose>) -> Scene {
        Scene {
            frame_id: "t".into(),
            image_width: 640,
            image_height: 480,
            poses,
            truth: None,
        }
    }
}
