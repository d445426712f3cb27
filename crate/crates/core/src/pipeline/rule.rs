//! Head-orientation baseline: eye placement within the face box decides
//! Left/Right/Front, and orientation patterns map to formations.

use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::labels::Formation;
use crate::pose::{GroupLabel, KeypointName, PersonPose, Scene};

/// Face keypoints below this confidence are ignored.
pub const FACE_CONFIDENCE: f64 = 0.25;
/// Half-width of the Front band around the face-box midline, as a fraction of box width.
pub const FRONT_BAND: f64 = 0.15;
/// Two poses are adjacent when their gap is below this multiple of their mean shoulder width.
pub const GAP_FACTOR: f64 = 1.5;
/// A third pose joins only if its shoulder width is at least this share of the second widest.
pub const THIRD_WIDTH_RATIO: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadOrientation {
    Left,
    Right,
    Front,
}

const FACE: [KeypointName; 5] = [
    KeypointName::Nose,
    KeypointName::LeftEye,
    KeypointName::RightEye,
    KeypointName::LeftEar,
    KeypointName::RightEar,
];

pub fn head_orientation(pose: &PersonPose) -> HeadOrientation {
    let seen: Vec<f64> = FACE
        .iter()
        .map(|&k| pose.get(k))
        .filter(|k| k.confidence >= FACE_CONFIDENCE)
        .map(|k| k.x)
        .collect();
    if seen.len() < 2 {
        return HeadOrientation::Front;
    }
    let eyes: Vec<f64> = [KeypointName::LeftEye, KeypointName::RightEye]
        .iter()
        .map(|&k| pose.get(k))
        .filter(|k| k.confidence >= FACE_CONFIDENCE)
        .map(|k| k.x)
        .collect();
    if eyes.is_empty() {
        return HeadOrientation::Front;
    }
    let lo = seen.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = seen.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mid = 0.5 * (lo + hi);
    let band = FRONT_BAND * (hi - lo);
    let reference = eyes.iter().sum::<f64>() / eyes.len() as f64;
    if eyes.len() == 2 && (reference - mid).abs() <= band {
        HeadOrientation::Front
    } else if reference < mid {
        HeadOrientation::Left
    } else {
        HeadOrientation::Right
    }
}

fn gap(a: &PersonPose, b: &PersonPose) -> f64 {
    let half = 0.5 * (a.shoulder_width() + b.shoulder_width());
    ((a.anchor_x() - b.anchor_x()).abs() - half).max(0.0)
}

fn adjacent(a: &PersonPose, b: &PersonPose) -> bool {
    let mean_sw = 0.5 * (a.shoulder_width() + b.shoulder_width());
    gap(a, b) < GAP_FACTOR * mean_sw
}

/// The two widest poses, plus the third widest when it is comparably wide and
/// stands adjacent to either.
fn select_poses(scene: &Scene) -> Vec<usize> {
    let mut by_width: Vec<usize> = (0..scene.poses.len()).collect();
    by_width.sort_by(|&a, &b| scene.poses[b].shoulder_width().total_cmp(&scene.poses[a].shoulder_width()));
    let mut chosen = by_width[..2].to_vec();
    if let Some(&third) = by_width.get(2) {
        let p = &scene.poses[third];
        let wide = p.shoulder_width() >= THIRD_WIDTH_RATIO * scene.poses[chosen[1]].shoulder_width();
        if wide && chosen.iter().any(|&c| adjacent(p, &scene.poses[c])) {
            chosen.push(third);
        }
    }
    chosen.sort_by(|&a, &b| scene.poses[a].anchor_x().total_cmp(&scene.poses[b].anchor_x()));
    chosen
}

/// Reason code when no orientation rule matches.
pub const REASON_NO_RULE: &str = "no_rule_matched";

/// Formation from left-to-right ordered poses and their orientations, checked
/// in the order FaceToFace, Triangle, LShaped, SideBySide. `None` when no rule
/// matches.
pub fn formation_from_orientations(poses: &[&PersonPose], orient: &[HeadOrientation]) -> Option<Formation> {
    use HeadOrientation::*;
    let pairs: Vec<(usize, usize)> = (1..poses.len()).map(|i| (i - 1, i)).collect();
    let near = |a: usize, b: usize| adjacent(poses[a], poses[b]);
    if pairs.iter().any(|&(a, b)| orient[a] == Right && orient[b] == Left) {
        return Some(Formation::FaceToFace);
    }
    if poses.len() == 3 {
        let mut kinds = orient.to_vec();
        kinds.sort_by_key(|o| *o as u8);
        kinds.dedup();
        if kinds.len() >= 2 {
            return Some(Formation::Triangle);
        }
    }
    if pairs.iter().any(|&(a, b)| ((orient[a] == Front) != (orient[b] == Front)) && near(a, b)) {
        return Some(Formation::LShaped);
    }
    if pairs.iter().any(|&(a, b)| orient[a] == orient[b] && near(a, b)) {
        return Some(Formation::SideBySide);
    }
    None
}

pub fn rule_classify(scene: &Scene) -> Result<Detection> {
    if scene.poses.len() < 2 {
        return Err(Error::Input(format!(
            "rule baseline needs at least 2 poses, scene {} has {}",
            scene.frame_id,
            scene.poses.len()
        )));
    }
    let chosen = select_poses(scene);
    let poses: Vec<&PersonPose> = chosen.iter().map(|&i| &scene.poses[i]).collect();
    let orient: Vec<HeadOrientation> = poses.iter().map(|p| head_orientation(p)).collect();
    let formation = formation_from_orientations(&poses, &orient);
    let reason = formation.is_none().then(|| REASON_NO_RULE.to_string());
    let mut members = chosen.clone();
    members.sort_unstable();
    let membership = (0..scene.poses.len())
        .map(|i| if members.contains(&i) { GroupLabel::G } else { GroupLabel::O })
        .collect();
    Ok(Detection {
        frame_id: scene.frame_id.clone(),
        membership,
        members,
        formation,
        reason,
        ..Detection::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::ApproachAngle;
    use crate::pose::test_support::{pose_at, scene_of};
    use crate::pose::Keypoint;
    use crate::synth::{render_scene_with_layout, SynthConfig};

    /// Pose with a face box from ears at cx ± 10 and eyes at the given x offsets.
    fn face(id: &str, cx: f64, eyes: Option<(f64, f64)>) -> PersonPose {
        let mut kps: Vec<Keypoint> = pose_at(id, cx, 0.9).keypoints().to_vec();
        let set = |kps: &mut Vec<Keypoint>, k: KeypointName, x: f64, c: f64| {
            kps[k.index()] = Keypoint::new(k, x, 100.0, c).unwrap();
        };
        set(&mut kps, KeypointName::LeftEar, cx + 10.0, 0.9);
        set(&mut kps, KeypointName::RightEar, cx - 10.0, 0.9);
        set(&mut kps, KeypointName::LeftShoulder, cx + 20.0, 0.9);
        set(&mut kps, KeypointName::RightShoulder, cx - 20.0, 0.9);
        match eyes {
            Some((l, r)) => {
                set(&mut kps, KeypointName::LeftEye, cx + l, 0.9);
                set(&mut kps, KeypointName::RightEye, cx + r, 0.9);
                set(&mut kps, KeypointName::Nose, cx + 0.5 * (l + r), 0.9);
            }
            None => {
                set(&mut kps, KeypointName::LeftEye, cx, 0.1);
                set(&mut kps, KeypointName::RightEye, cx, 0.1);
                set(&mut kps, KeypointName::Nose, cx, 0.1);
            }
        }
        PersonPose::new(id, kps).unwrap()
    }

    #[test]
    fn orientation_rules() {
        assert_eq!(head_orientation(&face("a", 100.0, Some((3.0, -3.0)))), HeadOrientation::Front);
        assert_eq!(head_orientation(&face("a", 100.0, Some((-4.0, -8.0)))), HeadOrientation::Left);
        assert_eq!(head_orientation(&face("a", 100.0, Some((8.0, 4.0)))), HeadOrientation::Right);
        // ears only
        assert_eq!(head_orientation(&face("a", 100.0, None)), HeadOrientation::Front);
    }

    #[test]
    fn band_edge_is_front() {
        // box 20 px wide, band ±3 px
        assert_eq!(head_orientation(&face("a", 100.0, Some((5.8, 0.0)))), HeadOrientation::Front);
        assert_eq!(head_orientation(&face("a", 100.0, Some((6.2, 0.2)))), HeadOrientation::Right);
    }

    #[test]
    fn mutually_facing_pair_is_face_to_face() {
        let scene = scene_of(vec![face("a", 100.0, Some((8.0, 4.0))), face("b", 160.0, Some((-4.0, -8.0)))]);
        assert_eq!(rule_classify(&scene).unwrap().formation, Some(Formation::FaceToFace));
    }

    #[test]
    fn pattern_table() {
        use HeadOrientation::*;
        let a = face("a", 100.0, None);
        let b = face("b", 150.0, None);
        let c = face("c", 200.0, None);
        let far = face("far", 400.0, None);
        let two = |o: [HeadOrientation; 2]| formation_from_orientations(&[&a, &b], &o);
        assert_eq!(two([Right, Left]), Some(Formation::FaceToFace));
        assert_eq!(two([Front, Front]), Some(Formation::SideBySide));
        assert_eq!(two([Left, Left]), Some(Formation::SideBySide));
        assert_eq!(two([Front, Left]), Some(Formation::LShaped));
        assert_eq!(two([Left, Right]), None);
        assert_eq!(formation_from_orientations(&[&a, &far], &[Front, Left]), None);
        assert_eq!(formation_from_orientations(&[&a, &far], &[Front, Front]), None);
        assert_eq!(formation_from_orientations(&[&a, &far], &[Right, Left]), Some(Formation::FaceToFace));
        let three = |o: [HeadOrientation; 3]| formation_from_orientations(&[&a, &b, &c], &o);
        assert_eq!(three([Front, Left, Left]), Some(Formation::Triangle));
        assert_eq!(three([Right, Left, Front]), Some(Formation::FaceToFace));
        assert_eq!(three([Front, Front, Front]), Some(Formation::SideBySide));
    }

    #[test]
    fn third_pose_needs_adjacency() {
        let near = scene_of(vec![face("a", 100.0, None), face("b", 150.0, None), face("c", 200.0, None)]);
        assert_eq!(rule_classify(&near).unwrap().members.len(), 3);
        let far = scene_of(vec![face("a", 100.0, None), face("b", 150.0, None), pose_at("c", 600.0, 0.9)]);
        let d = rule_classify(&far).unwrap();
        assert_eq!(d.members, vec![0, 1]);
        assert_eq!(d.membership[2], GroupLabel::O);
    }

    #[test]
    fn narrow_third_pose_is_left_out() {
        // pose_at shoulders are 20 px apart, face() shoulders 40 px
        let scene = scene_of(vec![face("a", 100.0, None), face("b", 150.0, None), pose_at("c", 190.0, 0.9)]);
        assert_eq!(rule_classify(&scene).unwrap().members, vec![0, 1]);
    }

    #[test]
    fn unmatched_pattern_abstains() {
        let scene = scene_of(vec![face("a", 100.0, Some((-4.0, -8.0))), face("b", 160.0, Some((8.0, 4.0)))]);
        let d = rule_classify(&scene).unwrap();
        assert_eq!(d.formation, None);
        assert_eq!(d.reason.as_deref(), Some(REASON_NO_RULE));
        assert_eq!(d.members, vec![0, 1]);
    }

    #[test]
    fn needs_two_poses() {
        assert!(matches!(rule_classify(&scene_of(vec![pose_at("a", 100.0, 0.9)])), Err(Error::Input(_))));
    }

    #[test]
    fn back_facing_synthetic_person_falls_back_to_front() {
        let cfg = SynthConfig {
            formation: Formation::SideBySide,
            angle_deg: ApproachAngle::Plus90,
            ..SynthConfig::default()
        };
        let (scene, _) = render_scene_with_layout(&cfg).unwrap();
        for p in &scene.poses {
            assert!(p.get(KeypointName::LeftEye).confidence < FACE_CONFIDENCE);
            assert_eq!(head_orientation(p), HeadOrientation::Front);
        }
    }

    #[test]
    fn synthetic_side_by_side_front_view() {
        let cfg = SynthConfig {
            formation: Formation::SideBySide,
            angle_deg: ApproachAngle::Minus90,
            seed: 12,
            ..SynthConfig::default()
        };
        let (scene, _) = render_scene_with_layout(&cfg).unwrap();
        assert_eq!(rule_classify(&scene).unwrap().formation, Some(Formation::SideBySide));
    }
}
