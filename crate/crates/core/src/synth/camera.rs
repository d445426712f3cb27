/// Pinhole camera with a horizontal optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Camera {
    pub position: [f64; 3],
    /// Unit ground-plane viewing direction.
    pub forward: [f64; 2],
    pub focal: f64,
    pub width: f64,
    pub height: f64,
}

/// Projected point: pixel coordinates and depth along the optical axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub depth: f64,
}

/// Points closer than this along the optical axis are not imaged.
pub const NEAR_PLANE: f64 = 0.1;

impl Camera {
    /// Camera at ground distance `distance` from `target`, azimuth `azimuth`
    /// (radians, counter-clockwise from +x), looking at `target`.
    pub fn looking_at(target: [f64; 2], distance: f64, azimuth: f64, height: f64, width_px: u32, height_px: u32) -> Self {
        let (s, c) = azimuth.sin_cos();
        let h = f64::from(height_px);
        Camera {
            position: [target[0] + distance * c, target[1] + distance * s, height],
            forward: [-c, -s],
            focal: focal_length(h),
            width: f64::from(width_px),
            height: h,
        }
    }

    /// Image-right direction on the ground plane.
    pub fn right(&self) -> [f64; 2] {
        [self.forward[1], -self.forward[0]]
    }

    pub fn project(&self, p: [f64; 3]) -> Option<Projection> {
        let rel = [p[0] - self.position[0], p[1] - self.position[1], p[2] - self.position[2]];
        let depth = rel[0] * self.forward[0] + rel[1] * self.forward[1];
        if depth < NEAR_PLANE {
            return None;
        }
        let r = self.right();
        let x = rel[0] * r[0] + rel[1] * r[1];
        Some(Projection {
            u: self.width / 2.0 + self.focal * x / depth,
            v: self.height / 2.0 - self.focal * rel[2] / depth,
            depth,
        })
    }

    pub fn in_frame(&self, p: &Projection) -> bool {
        (0.0..=self.width).contains(&p.u) && (0.0..=self.height).contains(&p.v)
    }
}

/// A 1.7 m body at 3.5 m spans 55% of the image height.
pub fn focal_length(image_height: f64) -> f64 {
    0.55 * image_height * 3.5 / 1.7
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn focal_for_vga() {
        assert!((focal_length(480.0) - 543.529_411_764_705_9).abs() < 1e-9);
    }

    #[test]
    fn target_projects_to_center() {
        let cam = Camera::looking_at([0.3, -0.2], 3.0, 0.7, 1.3, 640, 480);
        let p = cam.project([0.3, -0.2, 1.3]).unwrap();
        assert!((p.u - 320.0).abs() < 1e-9 && (p.v - 240.0).abs() < 1e-9);
        assert!((p.depth - 3.0).abs() < 1e-12);
        assert!(cam.project(cam.position).is_none());
    }

    #[test]
    fn right_is_image_right() {
        // camera on −y looking +y: world +x is image right
        let cam = Camera::looking_at([0.0, 0.0], 2.0, -std::f64::consts::FRAC_PI_2, 1.0, 640, 480);
        let p = cam.project([0.5, 0.0, 1.0]).unwrap();
        assert!(p.u > 320.0);
        let up = cam.project([0.0, 0.0, 1.5]).unwrap();
        assert!(up.v < 240.0);
    }
}
