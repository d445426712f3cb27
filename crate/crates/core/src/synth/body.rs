use serde::{Deserialize, Serialize};

use crate::pose::{KeypointName, KEYPOINT_COUNT};

/// Vertical bounding-cylinder radius of a body, meters.
pub const BODY_RADIUS: f64 = 0.25;
/// Reference stature the joint heights below are given for.
pub const REFERENCE_HEIGHT: f64 = 1.7;

/// Which way a keypoint's surface faces, for self-occlusion.
#[derive(Debug, Clone, Copy)]
enum Facing {
    /// Facial point; normal is `forward` turned by this many radians towards the left.
    Face(f64),
    /// Limb point on the left (+1) or right (−1) side.
    Side(f64),
}

struct JointSpec {
    lateral: f64,
    forward: f64,
    up: f64,
    facing: Facing,
}

const fn joint(lateral: f64, forward: f64, up: f64, facing: Facing) -> JointSpec {
    JointSpec {
        lateral,
        forward,
        up,
        facing,
    }
}

const EYE_TURN: f64 = std::f64::consts::PI / 6.0;
const EAR_TURN: f64 = std::f64::consts::FRAC_PI_2;

// lateral is towards the body's own left
const JOINTS: [JointSpec; KEYPOINT_COUNT] = [
    joint(0.0, 0.10, 1.60, Facing::Face(0.0)),
    joint(0.033, 0.08, 1.63, Facing::Face(EYE_TURN)),
    joint(-0.033, 0.08, 1.63, Facing::Face(-EYE_TURN)),
    joint(0.075, 0.0, 1.61, Facing::Face(EAR_TURN)),
    joint(-0.075, 0.0, 1.61, Facing::Face(-EAR_TURN)),
    joint(0.20, 0.0, 1.42, Facing::Side(1.0)),
    joint(-0.20, 0.0, 1.42, Facing::Side(-1.0)),
    joint(0.22, 0.0, 1.12, Facing::Side(1.0)),
    joint(-0.22, 0.0, 1.12, Facing::Side(-1.0)),
    joint(0.22, 0.08, 0.85, Facing::Side(1.0)),
    joint(-0.22, 0.08, 0.85, Facing::Side(-1.0)),
    joint(0.15, 0.0, 0.95, Facing::Side(1.0)),
    joint(-0.15, 0.0, 0.95, Facing::Side(-1.0)),
    joint(0.12, 0.0, 0.50, Facing::Side(1.0)),
    joint(-0.12, 0.0, 0.50, Facing::Side(-1.0)),
    joint(0.11, 0.0, 0.08, Facing::Side(1.0)),
    joint(-0.11, 0.0, 0.08, Facing::Side(-1.0)),
];

/// Facial points stay visible until turned this far past perpendicular.
const FACE_VISIBLE_DOT: f64 = -0.2;
/// Ears stick out from the head and stay visible longer.
const EAR_VISIBLE_DOT: f64 = -0.5;
/// Limb points on the far side vanish once their side faces this far away.
const SIDE_VISIBLE_DOT: f64 = -0.6;

/// A person standing on the ground plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedBody {
    pub position: [f64; 2],
    /// Facing direction, radians counter-clockwise from +x.
    pub heading: f64,
    pub height: f64,
}

impl PlacedBody {
    pub fn forward(&self) -> [f64; 2] {
        [self.heading.cos(), self.heading.sin()]
    }

    pub fn left(&self) -> [f64; 2] {
        [-self.heading.sin(), self.heading.cos()]
    }

    /// World coordinates of every keypoint, in keypoint order.
    pub fn joints(&self) -> [[f64; 3]; KEYPOINT_COUNT] {
        let (f, l) = (self.forward(), self.left());
        let k = self.height / REFERENCE_HEIGHT;
        let mut out = [[0.0; 3]; KEYPOINT_COUNT];
        for (o, j) in out.iter_mut().zip(&JOINTS) {
            *o = [
                self.position[0] + j.lateral * l[0] + j.forward * f[0],
                self.position[1] + j.lateral * l[1] + j.forward * f[1],
                j.up * k,
            ];
        }
        out
    }

    /// Whether the keypoint's own surface faces the camera at `eye`.
    pub fn self_visible(&self, name: KeypointName, eye: [f64; 2]) -> bool {
        let to_cam = {
            let d = [eye[0] - self.position[0], eye[1] - self.position[1]];
            let n = d[0].hypot(d[1]).max(1e-12);
            [d[0] / n, d[1] / n]
        };
        match JOINTS[name.index()].facing {
            Facing::Face(turn) => {
                let a = self.heading + turn;
                let limit = if turn.abs() == EAR_TURN { EAR_VISIBLE_DOT } else { FACE_VISIBLE_DOT };
                a.cos() * to_cam[0] + a.sin() * to_cam[1] > limit
            }
            Facing::Side(sign) => {
                let l = self.left();
                sign * (l[0] * to_cam[0] + l[1] * to_cam[1]) >= SIDE_VISIBLE_DOT
            }
        }
    }

    /// Whether the segment from `eye` to `point` passes through this body's
    /// bounding cylinder.
    pub fn blocks(&self, eye: [f64; 3], point: [f64; 3]) -> bool {
        let d = [point[0] - eye[0], point[1] - eye[1]];
        let m = [eye[0] - self.position[0], eye[1] - self.position[1]];
        let a = d[0] * d[0] + d[1] * d[1];
        if a == 0.0 {
            return false;
        }
        let b = d[0] * m[0] + d[1] * m[1];
        let c = m[0] * m[0] + m[1] * m[1] - BODY_RADIUS * BODY_RADIUS;
        let disc = b * b - a * c;
        if disc < 0.0 {
            return false;
        }
        let root = disc.sqrt();
        let t0 = ((-b - root) / a).max(0.0);
        let t1 = ((-b + root) / a).min(1.0);
        if t0 >= t1 {
            return false;
        }
        let z = |t: f64| eye[2] + t * (point[2] - eye[2]);
        let (lo, hi) = (z(t0).min(z(t1)), z(t0).max(z(t1)));
        hi >= 0.0 && lo <= self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn body(heading: f64) -> PlacedBody {
        PlacedBody {
            position: [0.0, 0.0],
            heading,
            height: 1.7,
        }
    }

    #[test]
    fn left_side_is_to_the_left() {
        let j = body(0.0).joints();
        // facing +x, left is +y
        assert!(j[KeypointName::LeftShoulder.index()][1] > 0.0);
        assert!(j[KeypointName::RightShoulder.index()][1] < 0.0);
        assert!(j[KeypointName::Nose.index()][0] > 0.0);
        let sw = j[KeypointName::LeftShoulder.index()][1] - j[KeypointName::RightShoulder.index()][1];
        assert!((sw - 0.40).abs() < 1e-12);
    }

    #[test]
    fn stature_scales_heights_only() {
        let tall = PlacedBody { height: 3.4, ..body(0.0) }.joints();
        let base = body(0.0).joints();
        for (a, b) in tall.iter().zip(&base) {
            assert!((a[2] - 2.0 * b[2]).abs() < 1e-12);
            assert_eq!(a[1], b[1]);
        }
    }

    #[test]
    fn face_hidden_from_behind() {
        let b = body(0.0);
        let behind = [-3.0, 0.0];
        assert!(!b.self_visible(KeypointName::Nose, behind));
        assert!(!b.self_visible(KeypointName::LeftEye, behind));
        assert!(b.self_visible(KeypointName::LeftEar, behind));
        assert!(b.self_visible(KeypointName::LeftShoulder, behind));
        let front = [3.0, 0.0];
        assert!(b.self_visible(KeypointName::Nose, front));
        assert!(b.self_visible(KeypointName::RightEye, front));
    }

    #[test]
    fn profile_hides_far_side() {
        let b = body(0.0);
        let from_right = [0.0, -3.0];
        assert!(b.self_visible(KeypointName::RightEye, from_right));
        assert!(!b.self_visible(KeypointName::LeftEye, from_right));
        assert!(!b.self_visible(KeypointName::LeftEar, from_right));
        // a 20° turn keeps both ears
        let turned = body(20f64.to_radians());
        assert!(turned.self_visible(KeypointName::LeftEar, [3.0, 0.0]));
        assert!(turned.self_visible(KeypointName::RightEar, [3.0, 0.0]));
        assert!(!b.self_visible(KeypointName::LeftElbow, from_right));
        assert!(b.self_visible(KeypointName::RightElbow, from_right));
    }

    #[test]
    fn cylinder_blocking() {
        let b = body(PI);
        assert!(b.blocks([3.0, 0.0, 1.0], [-1.0, 0.0, 1.0]));
        assert!(!b.blocks([3.0, 0.0, 1.0], [-1.0, 1.0, 1.0]));
        // passes over the head
        assert!(!b.blocks([3.0, 0.0, 3.0], [-1.0, 0.0, 3.0]));
        // stops short of the cylinder
        assert!(!b.blocks([3.0, 0.0, 1.0], [1.0, 0.0, 1.0]));
    }
}
