//! Synthetic F-formation scenes: stick bodies placed on formation templates,
//! imaged by a pinhole camera at one of the seven approach angles.

mod body;
mod camera;
mod dataset;

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use body::{PlacedBody, BODY_RADIUS, REFERENCE_HEIGHT};
pub use camera::{focal_length, Camera, Projection};
pub use dataset::{generate_dataset, grid_entries, split_by_formation, GridSpec, Split};

use crate::error::{Error, Result};
use crate::labels::{ApproachAngle, Formation};
use crate::pose::{GroupLabel, Keypoint, KeypointName, PersonPose, Scene, Truth};

/// Confidence multiplier for a keypoint hidden by a body.
pub const OCCLUDED_VISIBILITY: f64 = 0.15;
const PLACEMENT_ATTEMPTS: usize = 10;
const OUTLIER_DRAWS: usize = 500;
/// Outliers stand this far beyond the r-space boundary at most.
const OUTLIER_SPAN: f64 = 2.5;
const OUTLIER_HEIGHTS: (f64, f64) = (1.60, 1.85);
const MIN_CAMERA_CLEARANCE: f64 = 1.0;

/// `clamp(1.2 − 0.1·depth, 0.05, 0.98)`.
pub fn base_confidence(depth: f64) -> f64 {
    (1.2 - 0.1 * depth).clamp(0.05, 0.98)
}

/// Canonical member layout around an o-space centered at the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationTemplate {
    pub formation: Formation,
    pub positions: Vec<[f64; 2]>,
    pub headings: Vec<f64>,
    /// Largest member distance from the o-space center.
    pub radius: f64,
}

pub fn make_template(formation: Formation, scale: f64) -> Result<FormationTemplate> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Input(format!("template scale must be positive, got {scale}")));
    }
    let h = scale / 2.0;
    let (positions, headings) = match formation {
        Formation::FaceToFace => (vec![[-h, 0.0], [h, 0.0]], vec![0.0, PI]),
        Formation::SideBySide => (vec![[-h, 0.0], [h, 0.0]], vec![FRAC_PI_2, FRAC_PI_2]),
        Formation::LShaped => (vec![[h, 0.0], [0.0, h]], vec![PI, -FRAC_PI_2]),
        Formation::Triangle => {
            let angles = [90.0f64, 210.0, 330.0].map(f64::to_radians);
            (
                angles.iter().map(|a| [h * a.cos(), h * a.sin()]).collect(),
                angles.iter().map(|a| a + PI).collect(),
            )
        }
    };
    Ok(FormationTemplate {
        formation,
        positions,
        headings,
        radius: h,
    })
}

pub fn default_scale(formation: Formation) -> f64 {
    match formation {
        Formation::FaceToFace => 1.2,
        Formation::SideBySide => 0.8,
        Formation::LShaped => 1.2,
        Formation::Triangle => 1.5,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub formation: Formation,
    pub angle_deg: ApproachAngle,
    /// Camera distance from the o-space center, meters.
    pub distance: f64,
    /// When set, the distance is drawn uniformly from `[distance, max_distance]`.
    pub max_distance: Option<f64>,
    /// Lift the default `[2, 5]` m distance bounds.
    pub unrestricted_distance: bool,
    pub image_width: u32,
    pub image_height: u32,
    /// Pixel noise standard deviation.
    pub noise_sigma: f64,
    pub outliers: usize,
    pub seed: u64,
    /// Template scale; the per-formation default when unset.
    pub scale: Option<f64>,
    /// Relative uniform jitter of the template scale.
    pub scale_jitter: f64,
    /// Standard deviation of member position jitter, meters.
    pub position_jitter: f64,
    pub heading_jitter_deg: f64,
    /// Statures for template slots 0, 1, 2.
    pub member_heights: [f64; 3],
    pub camera_height: f64,
    pub frame_id: Option<String>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            formation: Formation::FaceToFace,
            angle_deg: ApproachAngle::Minus90,
            distance: 3.5,
            max_distance: None,
            unrestricted_distance: false,
            image_width: 640,
            image_height: 480,
            noise_sigma: 1.0,
            outliers: 0,
            seed: 0,
            scale: None,
            scale_jitter: 0.1,
            position_jitter: 0.05,
            heading_jitter_deg: 5.0,
            member_heights: [1.70, 1.60, 1.80],
            camera_height: 1.3,
            frame_id: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image dimensions must be positive".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be ≥ 0, got {}", self.noise_sigma));
        }
        let max = self.max_distance.unwrap_or(self.distance);
        if !(self.distance.is_finite() && self.distance > 0.0 && max.is_finite() && max >= self.distance) {
            return bad(format!("invalid distance range [{}, {max}]", self.distance));
        }
        if !self.unrestricted_distance && (self.distance < 2.0 || max > 5.0) {
            return bad(format!("distance range [{}, {max}] outside [2, 5] m", self.distance));
        }
        if let Some(s) = self.scale {
            if !(s.is_finite() && s > 0.0) {
                return bad(format!("scale must be positive, got {s}"));
            }
        }
        if !(0.0..0.5).contains(&self.scale_jitter) {
            return bad(format!("scale_jitter must lie in [0, 0.5), got {}", self.scale_jitter));
        }
        for (name, v) in [
            ("position_jitter", self.position_jitter),
            ("heading_jitter_deg", self.heading_jitter_deg),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} must be ≥ 0, got {v}"));
            }
        }
        if self.member_heights.iter().any(|h| !(h.is_finite() && *h > 0.0)) {
            return bad("member heights must be positive".into());
        }
        if !(self.camera_height.is_finite() && self.camera_height > 0.0) {
            return bad(format!("camera_height must be positive, got {}", self.camera_height));
        }
        Ok(())
    }
}

/// One rendered body and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyRecord {
    pub body: PlacedBody,
    /// Template slot for members, `None` for outliers.
    pub slot: Option<usize>,
    pub person_id: String,
}

/// World-space ground truth behind a rendered scene.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneLayout {
    pub camera: Camera,
    pub distance: f64,
    pub template: FormationTemplate,
    pub bodies: Vec<BodyRecord>,
}

impl SceneLayout {
    pub fn members(&self) -> impl Iterator<Item = &BodyRecord> {
        self.bodies.iter().filter(|b| b.slot.is_some())
    }

    pub fn outliers(&self) -> impl Iterator<Item = &BodyRecord> {
        self.bodies.iter().filter(|b| b.slot.is_none())
    }
}

fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

const MEMBER_STREAM: u64 = 0;
const OUTLIER_STREAM: u64 = 1;
const BODY_NOISE_STREAM: u64 = 100;

fn place_members(cfg: &SynthConfig, template: &FormationTemplate, camera: &Camera, rng: &mut ChaCha8Rng) -> Result<Vec<PlacedBody>> {
    let pos_noise = Normal::new(0.0, cfg.position_jitter).map_err(|e| Error::Config(e.to_string()))?;
    let head_noise = Normal::new(0.0, cfg.heading_jitter_deg.to_radians()).map_err(|e| Error::Config(e.to_string()))?;
    // keeps every member inside p-space
    let max_shift = 0.8 * BODY_RADIUS;
    for _ in 0..PLACEMENT_ATTEMPTS {
        let members: Vec<PlacedBody> = template
            .positions
            .iter()
            .zip(&template.headings)
            .enumerate()
            .map(|(slot, (p, h))| {
                let mut d = [pos_noise.sample(rng), pos_noise.sample(rng)];
                let n = d[0].hypot(d[1]);
                if n > max_shift {
                    d = [d[0] * max_shift / n, d[1] * max_shift / n];
                }
                PlacedBody {
                    position: [p[0] + d[0], p[1] + d[1]],
                    heading: h + head_noise.sample(rng),
                    height: cfg.member_heights[slot],
                }
            })
            .collect();
        let cam = [camera.position[0], camera.position[1]];
        let clear = members
            .iter()
            .all(|b| (b.position[0] - cam[0]).hypot(b.position[1] - cam[1]) > BODY_RADIUS);
        if clear {
            return Ok(members);
        }
    }
    Err(Error::Placement(format!(
        "camera at {:.2} m stays inside a member's body after {PLACEMENT_ATTEMPTS} attempts",
        cfg.distance
    )))
}

fn place_outliers(
    count: usize,
    template: &FormationTemplate,
    camera: &Camera,
    members: &[PlacedBody],
    rng: &mut ChaCha8Rng,
) -> Result<Vec<PlacedBody>> {
    let r_min = 1.5 * (template.radius + BODY_RADIUS);
    let cam = camera.position;
    let member_joints: Vec<[f64; 3]> = members.iter().flat_map(|b| b.joints()).collect();
    let mut placed: Vec<PlacedBody> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut found = None;
        for _ in 0..OUTLIER_DRAWS {
            let r = r_min + rng.random_range(0.05..OUTLIER_SPAN);
            let a = rng.random_range(0.0..TAU);
            let cand = PlacedBody {
                position: [r * a.cos(), r * a.sin()],
                heading: rng.random_range(0.0..TAU),
                height: rng.random_range(OUTLIER_HEIGHTS.0..OUTLIER_HEIGHTS.1),
            };
            let to_cam = (cand.position[0] - cam[0]).hypot(cand.position[1] - cam[1]);
            if to_cam < MIN_CAMERA_CLEARANCE + BODY_RADIUS {
                continue;
            }
            let Some(p) = camera.project([cand.position[0], cand.position[1], 0.55 * cand.height]) else {
                continue;
            };
            if p.u < 0.05 * camera.width || p.u > 0.95 * camera.width {
                continue;
            }
            let crowded = placed
                .iter()
                .any(|o| (o.position[0] - cand.position[0]).hypot(o.position[1] - cand.position[1]) < 2.0 * BODY_RADIUS + 0.1);
            if crowded || member_joints.iter().any(|&j| cand.blocks(cam, j)) {
                continue;
            }
            found = Some(cand);
            break;
        }
        placed.push(found.ok_or_else(|| {
            Error::Placement(format!("no r-space spot for an outlier after {OUTLIER_DRAWS} draws"))
        })?);
    }
    Ok(placed)
}

fn render_body(cfg: &SynthConfig, camera: &Camera, bodies: &[PlacedBody], index: usize, rng: &mut ChaCha8Rng) -> Result<Vec<Keypoint>> {
    let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
    let body = &bodies[index];
    let eye2 = [camera.position[0], camera.position[1]];
    body.joints()
        .iter()
        .zip(KeypointName::ALL)
        .map(|(&p, name)| {
            let (du, dv) = (noise.sample(rng), noise.sample(rng));
            let Some(proj) = camera.project(p).filter(|q| camera.in_frame(q)) else {
                return Ok(Keypoint::missing(name));
            };
            let blocked = bodies
                .iter()
                .enumerate()
                .any(|(k, other)| k != index && other.blocks(camera.position, p));
            let visible = body.self_visible(name, eye2) && !blocked;
            let conf = base_confidence(proj.depth) * if visible { 1.0 } else { OCCLUDED_VISIBILITY };
            Keypoint::new(
                name,
                (proj.u + du).clamp(0.0, camera.width),
                (proj.v + dv).clamp(0.0, camera.height),
                conf,
            )
        })
        .collect()
}

/// Renders poses for arbitrary bodies; noise for body `i` comes from its own
/// stream so adding bodies leaves the others' noise unchanged.
pub fn render_bodies(cfg: &SynthConfig, camera: &Camera, bodies: &[PlacedBody]) -> Result<Vec<Vec<Keypoint>>> {
    (0..bodies.len())
        .map(|i| {
            let mut rng = rng_stream(cfg.seed, BODY_NOISE_STREAM + i as u64);
            render_body(cfg, camera, bodies, i, &mut rng)
        })
        .collect()
}

pub fn render_scene(cfg: &SynthConfig) -> Result<Scene> {
    Ok(render_scene_with_layout(cfg)?.0)
}

pub fn render_scene_with_layout(cfg: &SynthConfig) -> Result<(Scene, SceneLayout)> {
    cfg.validate()?;
    let mut rng = rng_stream(cfg.seed, MEMBER_STREAM);
    let distance = match cfg.max_distance {
        Some(max) if max > cfg.distance => rng.random_range(cfg.distance..=max),
        _ => cfg.distance,
    };
    let jitter = if cfg.scale_jitter > 0.0 {
        rng.random_range(-cfg.scale_jitter..=cfg.scale_jitter)
    } else {
        0.0
    };
    let scale = cfg.scale.unwrap_or_else(|| default_scale(cfg.formation)) * (1.0 + jitter);
    let template = make_template(cfg.formation, scale)?;
    // azimuth runs clockwise, so −90° puts the camera on +y
    let camera = Camera::looking_at(
        [0.0, 0.0],
        distance,
        -cfg.angle_deg.radians(),
        cfg.camera_height,
        cfg.image_width,
        cfg.image_height,
    );
    let members = place_members(cfg, &template, &camera, &mut rng)?;
    let mut orng = rng_stream(cfg.seed, OUTLIER_STREAM);
    let outliers = place_outliers(cfg.outliers, &template, &camera, &members, &mut orng)?;

    let n_members = members.len();
    let bodies: Vec<PlacedBody> = members.into_iter().chain(outliers).collect();
    let keypoints = render_bodies(cfg, &camera, &bodies)?;
    let mut poses = keypoints
        .into_iter()
        .enumerate()
        .map(|(i, kps)| Ok((i, PersonPose::new(format!("b{i}"), kps)?)))
        .collect::<Result<Vec<_>>>()?;
    poses.sort_by(|a, b| a.1.anchor_x().total_cmp(&b.1.anchor_x()));

    let mut records: Vec<Option<BodyRecord>> = vec![None; bodies.len()];
    let mut membership = Vec::with_capacity(poses.len());
    for (rank, (i, pose)) in poses.iter_mut().enumerate() {
        pose.person_id = format!("p{rank}");
        membership.push(if *i < n_members { GroupLabel::G } else { GroupLabel::O });
        records[*i] = Some(BodyRecord {
            body: bodies[*i],
            slot: (*i < n_members).then_some(*i),
            person_id: pose.person_id.clone(),
        });
    }
    let frame_id = cfg.frame_id.clone().unwrap_or_else(|| {
        format!("{}_{}_{}", cfg.formation.as_str(), cfg.angle_deg.degrees(), cfg.seed)
    });
    let scene = Scene {
        frame_id,
        image_width: cfg.image_width,
        image_height: cfg.image_height,
        poses: poses.into_iter().map(|(_, p)| p).collect(),
        truth: Some(Truth {
            membership: Some(membership),
            formation: Some(cfg.formation),
            angle_deg: Some(cfg.angle_deg),
        }),
    };
    scene.validate()?;
    let layout = SceneLayout {
        camera,
        distance,
        template,
        bodies: records.into_iter().map(|r| r.expect("every body ranked")).collect(),
    };
    Ok((scene, layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{bin_confidence, ConfidenceBin};

    fn quiet(formation: Formation, angle: ApproachAngle, distance: f64) -> SynthConfig {
        SynthConfig {
            formation,
            angle_deg: angle,
            distance,
            noise_sigma: 0.0,
            scale_jitter: 0.0,
            position_jitter: 0.0,
            heading_jitter_deg: 0.0,
            ..SynthConfig::default()
        }
    }

    fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
        (a[0] - b[0]).hypot(a[1] - b[1])
    }

    #[test]
    fn template_geometry() {
        let t = make_template(Formation::FaceToFace, 1.0).unwrap();
        assert_eq!(t.positions, vec![[-0.5, 0.0], [0.5, 0.0]]);
        assert_eq!(t.headings, vec![0.0, PI]);

        let t = make_template(Formation::Triangle, 1.0).unwrap();
        let d01 = dist(t.positions[0], t.positions[1]);
        let d12 = dist(t.positions[1], t.positions[2]);
        let d02 = dist(t.positions[0], t.positions[2]);
        assert!((d01 - d12).abs() < 1e-12 && (d01 - d02).abs() < 1e-12);
        for (p, h) in t.positions.iter().zip(&t.headings) {
            // facing the origin
            let dot = -(p[0] * h.cos() + p[1] * h.sin());
            assert!((dot - p[0].hypot(p[1])).abs() < 1e-12);
        }

        let t = make_template(Formation::LShaped, 1.0).unwrap();
        let dot = (t.headings[0] - t.headings[1]).cos();
        assert!(dot.abs() < 1e-12);

        let t = make_template(Formation::SideBySide, 1.0).unwrap();
        assert_eq!(t.headings[0], t.headings[1]);
        assert!(make_template(Formation::SideBySide, 0.0).is_err());
    }

    #[test]
    fn rendering_is_deterministic() {
        let cfg = SynthConfig {
            formation: Formation::Triangle,
            angle_deg: ApproachAngle::Plus30,
            outliers: 2,
            seed: 99,
            max_distance: Some(5.0),
            distance: 2.0,
            ..SynthConfig::default()
        };
        let a = serde_json::to_string(&render_scene(&cfg).unwrap()).unwrap();
        let b = serde_json::to_string(&render_scene(&cfg).unwrap()).unwrap();
        assert_eq!(a, b);
        let other = render_scene(&SynthConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, serde_json::to_string(&other).unwrap());
    }

    #[test]
    fn truth_matches_layout() {
        let cfg = SynthConfig {
            formation: Formation::LShaped,
            outliers: 1,
            seed: 5,
            ..SynthConfig::default()
        };
        let (scene, layout) = render_scene_with_layout(&cfg).unwrap();
        let membership = scene.membership().unwrap();
        assert_eq!(scene.poses.len(), 3);
        assert_eq!(membership.iter().filter(|l| **l == GroupLabel::G).count(), 2);
        for rec in &layout.bodies {
            let i = scene.poses.iter().position(|p| p.person_id == rec.person_id).unwrap();
            let expect = if rec.slot.is_some() { GroupLabel::G } else { GroupLabel::O };
            assert_eq!(membership[i], expect);
        }
        let anchors: Vec<f64> = scene.poses.iter().map(PersonPose::anchor_x).collect();
        assert!(anchors.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn members_in_p_space_outliers_in_r_space() {
        for seed in 0..40 {
            for f in Formation::ALL {
                let cfg = SynthConfig {
                    formation: f,
                    angle_deg: ApproachAngle::from_index(seed as usize % 7).unwrap(),
                    distance: 2.0,
                    max_distance: Some(5.0),
                    outliers: 2,
                    seed,
                    position_jitter: 0.2,
                    ..SynthConfig::default()
                };
                let (_, layout) = render_scene_with_layout(&cfg).unwrap();
                let rp = layout.template.radius + BODY_RADIUS;
                for m in layout.members() {
                    assert!(m.body.position[0].hypot(m.body.position[1]) <= rp);
                }
                for o in layout.outliers() {
                    assert!(o.body.position[0].hypot(o.body.position[1]) > 1.5 * rp);
                }
            }
        }
    }

    #[test]
    fn member_headings_keep_template_relations() {
        let cfg = SynthConfig {
            seed: 3,
            ..quiet(Formation::LShaped, ApproachAngle::Zero, 3.0)
        };
        let (_, layout) = render_scene_with_layout(&cfg).unwrap();
        let h: Vec<f64> = layout.members().map(|m| m.body.heading).collect();
        assert!((((h[0] - h[1]).rem_euclid(TAU)) - 3.0 * FRAC_PI_2).abs() < 1e-12);
        let (_, layout) = render_scene_with_layout(&quiet(Formation::SideBySide, ApproachAngle::Plus60, 3.0)).unwrap();
        let h: Vec<f64> = layout.members().map(|m| m.body.heading).collect();
        assert_eq!(h[0], h[1]);
    }

    #[test]
    fn near_member_occludes_far_member_face_to_face_zero() {
        let (scene, layout) = render_scene_with_layout(&quiet(Formation::FaceToFace, ApproachAngle::Zero, 2.0)).unwrap();
        // camera on +x: slot 0 stands at −x, behind slot 1
        let far = layout.bodies.iter().find(|b| b.slot == Some(0)).unwrap();
        let pose = scene.poses.iter().find(|p| p.person_id == far.person_id).unwrap();
        let low = pose
            .keypoints()
            .iter()
            .filter(|k| bin_confidence(k.confidence).unwrap() == ConfidenceBin::Low)
            .count();
        assert!(low >= 12, "only {low} low-confidence keypoints");
    }

    #[test]
    fn occluded_confidence_drops_relative_to_unoccluded() {
        let cfg = quiet(Formation::FaceToFace, ApproachAngle::Zero, 3.0);
        let (_, layout) = render_scene_with_layout(&cfg).unwrap();
        let far = layout.bodies.iter().position(|b| b.slot == Some(0)).unwrap();
        let all: Vec<PlacedBody> = layout.bodies.iter().map(|b| b.body).collect();
        let with = render_bodies(&cfg, &layout.camera, &all).unwrap();
        let alone = render_bodies(&cfg, &layout.camera, &[all[far]]).unwrap();
        let near = &all[1 - far];
        let joints = all[far].joints();
        let mut checked = 0;
        for (k, j) in joints.iter().enumerate() {
            if near.blocks(layout.camera.position, *j) && alone[0][k].confidence > 0.0 {
                assert!(with[far][k].confidence < alone[0][k].confidence);
                checked += 1;
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn doubling_distance_halves_shoulder_width() {
        let width = |d: f64| {
            let s = render_scene(&quiet(Formation::SideBySide, ApproachAngle::Minus90, d)).unwrap();
            s.poses[0].shoulder_width()
        };
        let (near, far) = (width(2.0), width(4.0));
        assert!((near / far - 2.0).abs() / 2.0 < 0.05, "{near} vs {far}");
    }

    #[test]
    fn triangle_ordering_matches_closed_form_projection() {
        for d in [2.0, 3.0, 4.5] {
            let cfg = quiet(Formation::Triangle, ApproachAngle::Minus90, d);
            let (scene, layout) = render_scene_with_layout(&cfg).unwrap();
            // camera at (0, d) looking −y: image x grows with −world x
            let r = default_scale(Formation::Triangle) / 2.0;
            let mut expected: Vec<(f64, usize)> = [90.0f64, 210.0, 330.0]
                .iter()
                .enumerate()
                .map(|(slot, a)| {
                    let (x, y) = (r * a.to_radians().cos(), r * a.to_radians().sin());
                    (-x / (d - y), slot)
                })
                .collect();
            expected.sort_by(|a, b| a.0.total_cmp(&b.0));
            let got: Vec<usize> = scene
                .poses
                .iter()
                .map(|p| layout.bodies.iter().find(|b| b.person_id == p.person_id).unwrap().slot.unwrap())
                .collect();
            let want: Vec<usize> = expected.iter().map(|e| e.1).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn confidence_base_curve() {
        assert_eq!(base_confidence(1.0), 0.98);
        assert!((base_confidence(5.0) - 0.7).abs() < 1e-12);
        assert_eq!(base_confidence(20.0), 0.05);
    }

    #[test]
    fn config_validation() {
        assert!(SynthConfig::default().validate().is_ok());
        let too_far = SynthConfig { distance: 6.0, ..SynthConfig::default() };
        assert!(matches!(too_far.validate(), Err(Error::Config(_))));
        assert!(SynthConfig { unrestricted_distance: true, ..too_far }.validate().is_ok());
        assert!(SynthConfig { noise_sigma: -1.0, ..SynthConfig::default() }.validate().is_err());
        let json = r#"{"formation":"triangle","angle_deg":-30,"outliers":1}"#;
        let cfg: SynthConfig = serde_json::from_str(json).unwrap();
        assert_eq!(cfg.angle_deg, ApproachAngle::Minus30);
        assert!(serde_json::from_str::<SynthConfig>(r#"{"bogus":1}"#).is_err());
    }

    #[test]
    fn camera_inside_body_is_a_placement_error() {
        let cfg = SynthConfig {
            distance: 0.6,
            unrestricted_distance: true,
            ..quiet(Formation::FaceToFace, ApproachAngle::Zero, 0.6)
        };
        assert!(matches!(render_scene(&cfg), Err(Error::Placement(_))));
    }
}
