//! Prior-based size check, side coverage from surface normals and resize
//! candidate generation.

use serde::Serialize;

use crate::geometry::{OrientedBox3, Point3, Vec3};
use crate::scene::ClassPrior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SizeCheck {
    pub length: bool,
    pub width: bool,
    pub height: bool,
}

impl SizeCheck {
    pub fn ok(&self) -> bool {
        !(self.length || self.width || self.height)
    }

    pub fn needs_resize(&self) -> bool {
        !self.ok()
    }
}

/// Flags each dimension strictly smaller than `ratio` times the prior.
pub fn size_check(b: &OrientedBox3, prior: &ClassPrior, ratio: f64) -> SizeCheck {
    SizeCheck {
        length: b.length() < ratio * prior.length,
        width: b.width() < ratio * prior.width,
        height: b.height() < ratio * prior.height,
    }
}

/// Vertical box faces, named by their outward normal in the box frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Side {
    PosX,
    NegX,
    PosY,
    NegY,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::PosX, Side::NegX, Side::PosY, Side::NegY];

    /// Outward normal in the box frame.
    pub fn local_normal(self) -> Vec3 {
        match self {
            Side::PosX => Vec3::new(1.0, 0.0, 0.0),
            Side::NegX => Vec3::new(-1.0, 0.0, 0.0),
            Side::PosY => Vec3::new(0.0, 1.0, 0.0),
            Side::NegY => Vec3::new(0.0, -1.0, 0.0),
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Set of box faces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Faces([bool; 4]);

impl Faces {
    pub fn from_sides(sides: &[Side]) -> Self {
        let mut f = Self::default();
        for &s in sides {
            f.insert(s);
        }
        f
    }

    pub fn insert(&mut self, s: Side) {
        self.0[s.index()] = true;
    }

    pub fn contains(&self, s: Side) -> bool {
        self.0[s.index()]
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> bool {
        self.len() == 4
    }

    pub fn sides(&self) -> Vec<Side> {
        Side::ALL.into_iter().filter(|s| self.contains(*s)).collect()
    }
}

/// A side is covered when at least `min_vertices` world-frame normals, once
/// rotated into the frame of a box with heading `yaw`, have a dot product
/// strictly greater than `gamma` with the side's outward normal.
pub fn side_coverage(normals: &[Vec3], yaw: f64, gamma: f64, min_vertices: usize) -> Faces {
    let (s, c) = yaw.sin_cos();
    let mut counts = [0usize; 4];
    for n in normals {
        let local = Vec3::new(n.x * c + n.y * s, -n.x * s + n.y * c, n.z);
        for side in Side::ALL {
            if local.dot(&side.local_normal()) > gamma {
                counts[side.index()] += 1;
            }
        }
    }
    let mut faces = Faces::default();
    for side in Side::ALL {
        if counts[side.index()] >= min_vertices.max(1) {
            faces.insert(side);
        }
    }
    faces
}

/// New interval of extent `target` along one axis, anchored on covered
/// faces. `sensor` is the sensor coordinate along the axis in the box frame.
fn grow_axis(half: f64, target: f64, pos: bool, neg: bool, sensor: f64) -> (f64, f64) {
    if target <= 2.0 * half {
        return (-half, half);
    }
    match (pos, neg) {
        (true, true) => (-half, half),
        (true, false) => (half - target, half),
        (false, true) => (-half, -half + target),
        (false, false) => {
            if sensor < 0.0 {
                (-half, -half + target)
            } else {
                (half - target, half)
            }
        }
    }
}

/// Resizes a box in its own frame: the footprint grows to
/// `target_x` x `target_y` (never shrinking) and the height to at least
/// `min_height` with the bottom fixed.
pub(crate) fn grow_box(
    b: &OrientedBox3,
    target_x: f64,
    target_y: f64,
    min_height: f64,
    anchored: &Faces,
    sensor: &Point3,
) -> OrientedBox3 {
    let sensor_local = b.to_local(sensor);
    let (x0, x1) = grow_axis(
        0.5 * b.length(),
        target_x,
        anchored.contains(Side::PosX),
        anchored.contains(Side::NegX),
        sensor_local.x,
    );
    let (y0, y1) = grow_axis(
        0.5 * b.width(),
        target_y,
        anchored.contains(Side::PosY),
        anchored.contains(Side::NegY),
        sensor_local.y,
    );
    let height = b.height().max(min_height);
    let local_center = Vec3::new(0.5 * (x0 + x1), 0.5 * (y0 + y1), 0.0);
    let mut center = b.from_local(&local_center);
    center.z = b.bottom_z() + 0.5 * height;
    OrientedBox3::new(center, x1 - x0, y1 - y0, height, b.yaw()).expect("grown box is valid")
}

/// Resize candidates for an undersized box. With all four sides covered the
/// box is returned unchanged. Otherwise candidate A keeps the longer side as
/// the length and candidate B treats it as the width; both grow away from
/// covered faces (or away from the sensor on an axis with no covered face)
/// and never shrink a dimension.
pub fn resize_candidates(
    b: &OrientedBox3,
    prior: &ClassPrior,
    coverage: &Faces,
    sensor: &Point3,
    size_ratio: f64,
) -> Vec<OrientedBox3> {
    if coverage.all() {
        return vec![*b];
    }
    let min_h = size_ratio * prior.height;
    let a = grow_box(b, prior.length, prior.width, min_h, coverage, sensor);
    let bb = grow_box(b, prior.width, prior.length, min_h, coverage, sensor);
    vec![a, bb]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Rigidity;

    fn car() -> ClassPrior {
        ClassPrior::new("car", 4.6, 1.8, 1.7, Rigidity::Rigid)
    }

    fn face_center(b: &OrientedBox3, s: Side) -> Point3 {
        let n = s.local_normal();
        b.from_local(&Vec3::new(n.x * 0.5 * b.length(), n.y * 0.5 * b.width(), 0.0))
    }

    #[test]
    fn size_check_boundaries() {
        let p = car();
        let exact = OrientedBox3::new(Point3::origin(), 4.6, 1.8, 1.7, 0.0).unwrap();
        assert!(size_check(&exact, &p, 0.8).ok());
        let short = OrientedBox3::new(Point3::origin(), 0.79 * 4.6, 1.8, 1.7, 0.0).unwrap();
        let c = size_check(&short, &p, 0.8);
        assert!(c.length && !c.width && !c.height);
        let edge = OrientedBox3::new(Point3::origin(), 0.8 * 4.6, 1.8, 1.7, 0.0).unwrap();
        assert!(size_check(&edge, &p, 0.8).ok());
    }

    #[test]
    fn coverage_examples() {
        let n = vec![Vec3::new(1.0, 0.0, 0.0); 6];
        assert_eq!(side_coverage(&n, 0.0, 0.8, 5).sides(), vec![Side::PosX]);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let diag = vec![Vec3::new(h, h, 0.0); 10];
        assert!(side_coverage(&diag, 0.0, 0.8, 5).is_empty());
        assert!(side_coverage(&[], 0.0, 0.8, 5).is_empty());
        // Too few supporting normals.
        assert!(side_coverage(&n[..4], 0.0, 0.8, 5).is_empty());
        // Rotation into the box frame.
        let yaw: f64 = 0.5;
        let world = vec![Vec3::new(-yaw.sin(), yaw.cos(), 0.0); 5];
        assert_eq!(side_coverage(&world, yaw, 0.8, 5).sides(), vec![Side::PosY]);
    }

    #[test]
    fn full_coverage_is_identity() {
        let b = OrientedBox3::new(Point3::new(10.0, 2.0, 0.5), 2.0, 1.0, 1.0, 0.3).unwrap();
        let all = Faces::from_sides(&Side::ALL);
        assert_eq!(resize_candidates(&b, &car(), &all, &Point3::origin(), 0.8), vec![b]);
    }

    #[test]
    fn one_covered_side_keeps_face_and_rotates_second_candidate() {
        let b = OrientedBox3::new(Point3::new(10.0, 0.0, 0.75), 2.0, 1.0, 1.5, 0.2).unwrap();
        let cov = Faces::from_sides(&[Side::NegX]);
        let cands = resize_candidates(&b, &car(), &cov, &Point3::origin(), 0.8);
        assert_eq!(cands.len(), 2);
        let anchor = face_center(&b, Side::NegX);
        let a = cands[0];
        assert!((a.yaw() - b.yaw()).abs() < 1e-12);
        assert!((a.length() - 4.6).abs() < 1e-9 && (a.width() - 1.8).abs() < 1e-9);
        let c = cands[1];
        let dyaw = crate::geometry::normalize_angle(c.yaw() - b.yaw()).abs();
        assert!((dyaw - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        // The covered face plane stays where it was in both candidates.
        let n = b.axes().0;
        let offset = anchor.coords.dot(&n);
        for cand in &cands {
            let min_proj = cand.corners().iter().map(|p| p.coords.dot(&n)).fold(f64::MAX, f64::min);
            assert!((min_proj - offset).abs() < 1e-6);
        }
        for cand in &cands {
            assert!((cand.bottom_z() - b.bottom_z()).abs() < 1e-12);
            assert!(cand.height() >= b.height());
        }
    }

    #[test]
    fn never_shrinks_oversized_dimensions() {
        let b = OrientedBox3::new(Point3::new(5.0, 5.0, 1.0), 6.0, 1.0, 2.0, 0.0).unwrap();
        for cand in resize_candidates(&b, &car(), &Faces::default(), &Point3::origin(), 0.8) {
            assert!(cand.length() >= 6.0 - 1e-9);
            assert!(cand.height() >= 2.0 - 1e-12);
        }
    }

    #[test]
    fn uncovered_axis_grows_away_from_sensor() {
        let b = OrientedBox3::new(Point3::new(10.0, 0.0, 0.5), 2.0, 1.8, 1.0, 0.0).unwrap();
        let a = resize_candidates(&b, &car(), &Faces::default(), &Point3::origin(), 0.8)[0];
        // Near face at x = 9 stays, growth toward +x.
        let near = a.corners().iter().map(|p| p.x).fold(f64::MAX, f64::min);
        assert!((near - 9.0).abs() < 1e-9);
    }
}
