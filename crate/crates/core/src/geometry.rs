//! Geometric primitives shared by every stage: rigid poses, the pinhole
//! camera, oriented 3D boxes and the IoU measures used for alignment and
//! evaluation.
//!
//! Frames: LiDAR/ego points use x forward, y left, z up. Camera frames follow
//! the usual optical convention (x right, y down, z forward).

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Vec3 = Vector3<f64>;

/// Smallest accepted box dimension in meters.
pub const MIN_BOX_DIMENSION: f64 = 1e-6;

/// Wraps an angle into `[-pi, pi)`.
pub fn normalize_angle(angle: f64) -> f64 {
    if (-PI..PI).contains(&angle) {
        return angle;
    }
    let mut a = (angle + PI).rem_euclid(TAU) - PI;
    if a >= PI {
        a -= TAU;
    }
    a
}

/// Rigid transform `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 to within 1e-6.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        if !rotation.iter().chain(translation.iter()).all(|v| v.is_finite()) {
            return Err(Error::Geometry("pose contains non-finite values".into()));
        }
        let deviation = orthonormality_error(&rotation);
        if deviation > 1e-6 {
            return Err(Error::Geometry(format!(
                "rotation is not orthonormal (deviation {deviation:.3e})"
            )));
        }
        if rotation.determinant() < 0.0 {
            return Err(Error::Geometry("rotation has negative determinant".into()));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Rotation about +z followed by a translation.
    pub fn from_yaw(yaw: f64, translation: Vec3) -> Self {
        let (s, c) = yaw.sin_cos();
        Self {
            rotation: Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    /// Heading of the rotated x axis projected onto the xy plane.
    pub fn yaw(&self) -> f64 {
        self.rotation[(1, 0)].atan2(self.rotation[(0, 0)])
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn transform(&self, points: &[Point3]) -> Vec<Point3> {
        points.iter().map(|p| self.apply(p)).collect()
    }

    /// Row-major 4x4 homogeneous matrix.
    pub fn to_matrix4(&self) -> [f64; 16] {
        let r = &self.rotation;
        let t = &self.translation;
        [
            r[(0, 0)], r[(0, 1)], r[(0, 2)], t.x,
            r[(1, 0)], r[(1, 1)], r[(1, 2)], t.y,
            r[(2, 0)], r[(2, 1)], r[(2, 2)], t.z,
            0.0, 0.0, 0.0, 1.0,
        ]
    }

    /// Parses a row-major 4x4 matrix. Rotations off by less than `tolerance`
    /// are re-projected onto SO(3) with an SVD; anything worse is rejected.
    pub fn from_matrix4(m: &[f64; 16], tolerance: f64) -> Result<Self> {
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("pose matrix contains non-finite values".into()));
        }
        if m[12].abs() > 1e-9 || m[13].abs() > 1e-9 || m[14].abs() > 1e-9 || (m[15] - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry("pose matrix bottom row must be [0, 0, 0, 1]".into()));
        }
        let rotation = Matrix3::new(m[0], m[1], m[2], m[4], m[5], m[6], m[8], m[9], m[10]);
        let translation = Vec3::new(m[3], m[7], m[11]);
        let deviation = orthonormality_error(&rotation);
        if deviation >= tolerance {
            return Err(Error::Geometry(format!(
                "rotation deviates from orthonormal by {deviation:.3e} (limit {tolerance:.1e})"
            )));
        }
        if rotation.determinant() <= 0.0 {
            return Err(Error::Geometry("rotation has non-positive determinant".into()));
        }
        // Exactly representable rotations are kept bit-for-bit so files round-trip.
        let rotation = if deviation > 1e-12 {
            let svd = rotation.svd(true, true);
            let (u, v_t) = (svd.u.unwrap(), svd.v_t.unwrap());
            let mut r = u * v_t;
            if r.determinant() < 0.0 {
                let mut u = u;
                u.column_mut(2).neg_mut();
                r = u * v_t;
            }
            r
        } else {
            rotation
        };
        Ok(Self {
            rotation,
            translation,
        })
    }
}

fn orthonormality_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).abs().max()
}

/// Applies `pose` to each point.
pub fn transform(points: &[Point3], pose: &Pose) -> Vec<Point3> {
    pose.transform(points)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelCoord {
    pub u: f64,
    pub v: f64,
}

/// Pinhole camera with zero skew. `extrinsics` maps sensor coordinates into
/// the camera's optical frame.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    pub extrinsics: Pose,
}

impl CameraModel {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32, extrinsics: Pose) -> Result<Self> {
        let cam = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
            extrinsics,
        };
        cam.validate()?;
        Ok(cam)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(Error::Geometry("focal lengths must be positive".into()));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::Geometry(format!(
                "principal point ({}, {}) outside {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Projects a point already expressed in the camera frame. Only depth is
    /// checked; the pixel may fall outside the image.
    pub fn project_camera_frame(&self, p: &Point3) -> Option<PixelCoord> {
        if p.z <= 0.0 {
            return None;
        }
        Some(PixelCoord {
            u: self.fx * p.x / p.z + self.cx,
            v: self.fy * p.y / p.z + self.cy,
        })
    }

    /// Sensor-frame point to pixel, ignoring image bounds.
    pub fn project_unbounded(&self, p: &Point3) -> Option<PixelCoord> {
        self.project_camera_frame(&self.extrinsics.apply(p))
    }

    pub fn contains(&self, px: &PixelCoord) -> bool {
        px.u >= 0.0 && px.v >= 0.0 && px.u < self.width as f64 && px.v < self.height as f64
    }

    /// Sensor-frame point to pixel; absent when behind the camera or outside
    /// the image.
    pub fn project(&self, p: &Point3) -> Option<PixelCoord> {
        self.project_unbounded(p).filter(|px| self.contains(px))
    }

    /// Camera optical center in sensor coordinates.
    pub fn center_in_sensor(&self) -> Point3 {
        self.extrinsics.inverse().apply(&Point3::origin())
    }

    /// Unit ray direction (sensor frame) through a pixel position.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Vec3 {
        let d = Vec3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0);
        (self.extrinsics.rotation().transpose() * d).normalize()
    }
}

/// Projects a sensor-frame point through `camera`.
pub fn project(point: &Point3, camera: &CameraModel) -> Option<PixelCoord> {
    camera.project(point)
}

/// Axis-aligned image rectangle in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAlignedBox2 {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl AxisAlignedBox2 {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) || x1 >= x2 || y1 >= y2 {
            return Err(Error::Geometry(format!("invalid 2D box [{x1}, {y1}, {x2}, {y2}]")));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    /// Bounding rectangle of a pixel set; `None` when it has no area.
    pub fn hull(pixels: impl IntoIterator<Item = PixelCoord>) -> Option<Self> {
        let mut it = pixels.into_iter();
        let first = it.next()?;
        let (mut x1, mut y1, mut x2, mut y2) = (first.u, first.v, first.u, first.v);
        for p in it {
            x1 = x1.min(p.u);
            y1 = y1.min(p.v);
            x2 = x2.max(p.u);
            y2 = y2.max(p.v);
        }
        Self::new(x1, y1, x2, y2).ok()
    }

    /// Intersection with the `[0, width) x [0, height)` image rectangle.
    pub fn clip_to_image(&self, width: u32, height: u32) -> Option<Self> {
        Self::new(
            self.x1.max(0.0),
            self.y1.max(0.0),
            self.x2.min(width as f64),
            self.y2.min(height as f64),
        )
        .ok()
    }

    pub fn intersection_area(&self, other: &Self) -> f64 {
        let w = (self.x2.min(other.x2) - self.x1.max(other.x1)).max(0.0);
        let h = (self.y2.min(other.y2) - self.y1.max(other.y1)).max(0.0);
        w * h
    }

    pub fn dilate(&self, margin: f64) -> Self {
        Self {
            x1: self.x1 - margin,
            y1: self.y1 - margin,
            x2: self.x2 + margin,
            y2: self.y2 + margin,
        }
    }
}

pub fn iou2d(a: &AxisAlignedBox2, b: &AxisAlignedBox2) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Upright box with heading `yaw` about +z. Always canonical: `length >=
/// width`, yaw in `[-pi, pi)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox3 {
    center: Point3,
    length: f64,
    width: f64,
    height: f64,
    yaw: f64,
}

impl OrientedBox3 {
    /// Validates and canonicalizes. A box given with `length < width` is
    /// stored with the two swapped and the yaw turned by a quarter turn.
    pub fn new(center: Point3, length: f64, width: f64, height: f64, yaw: f64) -> Result<Self> {
        let finite = center.iter().all(|v| v.is_finite())
            && length.is_finite()
            && width.is_finite()
            && height.is_finite()
            && yaw.is_finite();
        if !finite {
            return Err(Error::Geometry("box has non-finite fields".into()));
        }
        if length <= MIN_BOX_DIMENSION || width <= MIN_BOX_DIMENSION || height <= MIN_BOX_DIMENSION {
            return Err(Error::Geometry(format!(
                "degenerate box dimensions {length} x {width} x {height}"
            )));
        }
        let (length, width, yaw) = if length < width {
            (width, length, yaw + FRAC_PI_2)
        } else {
            (length, width, yaw)
        };
        Ok(Self {
            center,
            length,
            width,
            height,
            yaw: normalize_angle(yaw),
        })
    }

    pub fn center(&self) -> Point3 {
        self.center
    }
    pub fn length(&self) -> f64 {
        self.length
    }
    pub fn width(&self) -> f64 {
        self.width
    }
    pub fn height(&self) -> f64 {
        self.height
    }
    pub fn yaw(&self) -> f64 {
        self.yaw
    }
    pub fn bottom_z(&self) -> f64 {
        self.center.z - 0.5 * self.height
    }
    pub fn top_z(&self) -> f64 {
        self.center.z + 0.5 * self.height
    }
    pub fn volume(&self) -> f64 {
        self.length * self.width * self.height
    }

    /// Unit vectors of the box's local x (length) and y (width) axes.
    pub fn axes(&self) -> (Vec3, Vec3) {
        let (s, c) = self.yaw.sin_cos();
        (Vec3::new(c, s, 0.0), Vec3::new(-s, c, 0.0))
    }

    /// Coordinates of `p` in the box frame (origin at center, x along length).
    pub fn to_local(&self, p: &Point3) -> Vec3 {
        let d = p - self.center;
        let (ex, ey) = self.axes();
        Vec3::new(d.dot(&ex), d.dot(&ey), d.z)
    }

    pub fn from_local(&self, local: &Vec3) -> Point3 {
        let (ex, ey) = self.axes();
        self.center + ex * local.x + ey * local.y + Vec3::z() * local.z
    }

    pub fn contains(&self, p: &Point3, slack: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length + slack
            && l.y.abs() <= 0.5 * self.width + slack
            && l.z.abs() <= 0.5 * self.height + slack
    }

    pub fn contains_bev(&self, p: &Point3, slack: f64) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= 0.5 * self.length + slack && l.y.abs() <= 0.5 * self.width + slack
    }

    /// Footprint corners, counter-clockwise starting at local (+l/2, +w/2).
    pub fn footprint(&self) -> [[f64; 2]; 4] {
        let (ex, ey) = self.axes();
        let (hl, hw) = (0.5 * self.length, 0.5 * self.width);
        let signs = [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)];
        signs.map(|(sx, sy)| {
            let v = ex * (sx * hl) + ey * (sy * hw);
            [self.center.x + v.x, self.center.y + v.y]
        })
    }

    /// Eight corners: the footprint order at the bottom (indices 0..4), then
    /// the same order at the top (4..8).
    pub fn corners(&self) -> [Point3; 8] {
        let fp = self.footprint();
        let (zb, zt) = (self.bottom_z(), self.top_z());
        std::array::from_fn(|i| {
            let [x, y] = fp[i % 4];
            Point3::new(x, y, if i < 4 { zb } else { zt })
        })
    }

    /// The box moved by a rigid transform whose rotation is about +z only.
    pub fn transformed(&self, pose: &Pose) -> Result<Self> {
        let r = pose.rotation();
        if (r[(2, 2)] - 1.0).abs() > 1e-9 {
            return Err(Error::Geometry("only yaw rotations keep boxes upright".into()));
        }
        Self::new(pose.apply(&self.center), self.length, self.width, self.height, self.yaw + pose.yaw())
    }

    pub fn with_center(&self, center: Point3) -> Self {
        Self { center, ..*self }
    }
}

pub fn box_corners(b: &OrientedBox3) -> [Point3; 8] {
    b.corners()
}

/// Signed area; positive for counter-clockwise polygons.
pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let [x0, y0] = poly[i];
        let [x1, y1] = poly[(i + 1) % n];
        acc += x0 * y1 - x1 * y0;
    }
    0.5 * acc
}

/// Sutherland–Hodgman clipping of `subject` against a convex
/// counter-clockwise `clip` polygon.
pub fn clip_convex(subject: &[[f64; 2]], clip: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let a = clip[i];
        let b = clip[(i + 1) % n];
        let side = |p: [f64; 2]| (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let prev = input[(j + m - 1) % m];
            let (sc, sp) = (side(cur), side(prev));
            if sc >= 0.0 {
                if sp < 0.0 {
                    output.push(segment_intersection(prev, cur, sp, sc));
                }
                output.push(cur);
            } else if sp >= 0.0 {
                output.push(segment_intersection(prev, cur, sp, sc));
            }
        }
    }
    output
}

fn segment_intersection(p: [f64; 2], q: [f64; 2], sp: f64, sq: f64) -> [f64; 2] {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Exact area of the intersection of two box footprints.
pub fn bev_intersection_area(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let reach = 0.5 * (a.length.hypot(a.width) + b.length.hypot(b.width));
    let (dx, dy) = (a.center.x - b.center.x, a.center.y - b.center.y);
    if dx * dx + dy * dy > reach * reach {
        return 0.0;
    }
    polygon_area(&clip_convex(&a.footprint(), &b.footprint())).max(0.0)
}

pub fn iou_bev(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let inter = bev_intersection_area(a, b);
    let union = a.length * a.width + b.length * b.width - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

pub fn iou3d(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
    let overlap_z = (a.top_z().min(b.top_z()) - a.bottom_z().max(b.bottom_z())).max(0.0);
    if overlap_z == 0.0 {
        return 0.0;
    }
    let inter = bev_intersection_area(a, b) * overlap_z;
    let union = a.volume() + b.volume() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn camera() -> CameraModel {
        CameraModel::new(100.0, 100.0, 320.0, 240.0, 640, 480, Pose::identity()).unwrap()
    }

    #[test]
    fn principal_axis_projects_to_principal_point() {
        let px = project(&Point3::new(0.0, 0.0, 5.0), &camera()).unwrap();
        assert_eq!((px.u, px.v), (320.0, 240.0));
    }

    #[test]
    fn pinhole_offset() {
        let px = project(&Point3::new(1.0, 0.0, 5.0), &camera()).unwrap();
        assert!((px.u - 340.0).abs() < 1e-12 && (px.v - 240.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_absent() {
        assert!(project(&Point3::new(0.0, 0.0, -1.0), &camera()).is_none());
        assert!(project(&Point3::new(100.0, 0.0, 1.0), &camera()).is_none());
    }

    #[test]
    fn identity_and_quarter_turn() {
        let p = Point3::new(1.5, -2.0, 0.25);
        assert_eq!(transform(&[p], &Pose::identity())[0], p);
        let q = Pose::from_yaw(FRAC_PI_2, Vec3::zeros()).apply(&Point3::new(1.0, 0.0, 0.0));
        assert!((q - Point3::new(0.0, 1.0, 0.0)).norm() < 1e-9);
    }

    #[test]
    fn composition_matches_sequential_application() {
        let a = Pose::from_yaw(0.3, Vec3::new(1.0, 2.0, 3.0));
        let b = Pose::from_yaw(-1.1, Vec3::new(-4.0, 0.5, 0.0));
        let p = Point3::new(0.7, -0.2, 1.9);
        let lhs = a.compose(&b).apply(&p);
        let rhs = a.apply(&b.apply(&p));
        assert!((lhs - rhs).norm() < 1e-12);
        let c = Pose::from_yaw(2.0, Vec3::new(0.0, 0.0, 1.0));
        let l = a.compose(&b).compose(&c).apply(&p);
        let r = a.compose(&b.compose(&c)).apply(&p);
        assert!((l - r).norm() < 1e-12);
        assert!((a.compose(&a.inverse()).apply(&p) - p).norm() < 1e-12);
    }

    #[test]
    fn pose_rejects_non_orthonormal() {
        let mut m = Pose::identity().to_matrix4();
        m[0] = 1.01;
        assert!(Pose::from_matrix4(&m, 1e-3).is_err());
        m[0] = 1.0 + 1e-5;
        let pose = Pose::from_matrix4(&m, 1e-3).unwrap();
        assert!(orthonormality_error(pose.rotation()) < 1e-12);
    }

    #[test]
    fn iou2d_cases() {
        let a = AxisAlignedBox2::new(0.0, 0.0, 1.0, 1.0).unwrap();
        let b = AxisAlignedBox2::new(5.0, 5.0, 6.0, 6.0).unwrap();
        let c = AxisAlignedBox2::new(0.5, 0.0, 1.5, 1.0).unwrap();
        assert_eq!(iou2d(&a, &a), 1.0);
        assert_eq!(iou2d(&a, &b), 0.0);
        assert!((iou2d(&a, &c) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn box_canonicalization() {
        let b = OrientedBox3::new(Point3::origin(), 1.0, 3.0, 1.0, 0.0).unwrap();
        assert_eq!(b.length(), 3.0);
        assert!((b.yaw() - FRAC_PI_2).abs() < 1e-12);
        let c = OrientedBox3::new(Point3::origin(), 2.0, 1.0, 1.0, 3.0 * PI).unwrap();
        assert!((c.yaw() + PI).abs() < 1e-12);
        assert!(OrientedBox3::new(Point3::origin(), 1.0, 1e-7, 1.0, 0.0).is_err());
        assert!(OrientedBox3::new(Point3::origin(), 1.0, 1.0, f64::NAN, 0.0).is_err());
    }

    #[test]
    fn normalize_angle_range() {
        for a in [-10.0, -PI, -1e-18, 0.0, PI, 7.5, 100.0] {
            let n = normalize_angle(a);
            assert!((-PI..PI).contains(&n), "{a} -> {n}");
            assert!(((a - n) / TAU - ((a - n) / TAU).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn unit_cube_corners() {
        let b = OrientedBox3::new(Point3::origin(), 1.0, 1.0, 1.0, 0.0).unwrap();
        for c in b.corners() {
            assert!(c.iter().all(|v| (v.abs() - 0.5).abs() < 1e-12));
        }
        let expected = [(0.5, 0.5), (-0.5, 0.5), (-0.5, -0.5), (0.5, -0.5)];
        for (i, c) in b.corners().iter().enumerate() {
            assert_eq!((c.x, c.y), expected[i % 4]);
            assert_eq!(c.z, if i < 4 { -0.5 } else { 0.5 });
        }
    }

    #[test]
    fn quarter_turn_swaps_footprint_axes() {
        let b = OrientedBox3::new(Point3::origin(), 4.0, 2.0, 1.0, FRAC_PI_2).unwrap();
        let xs: Vec<f64> = b.corners().iter().map(|c| c.x).collect();
        let ys: Vec<f64> = b.corners().iter().map(|c| c.y).collect();
        let span = |v: &[f64]| v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min);
        assert!((span(&xs) - 2.0).abs() < 1e-12);
        assert!((span(&ys) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn corners_round_trip_extents() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let b = random_box(&mut rng);
            let cs = b.corners();
            let centroid = cs.iter().fold(Vec3::zeros(), |acc, c| acc + c.coords) / 8.0;
            assert!((centroid - b.center().coords).norm() < 1e-9);
            let local: Vec<Vec3> = cs.iter().map(|c| b.to_local(c)).collect();
            let ext = |f: fn(&Vec3) -> f64| {
                local.iter().map(f).fold(f64::MIN, f64::max) - local.iter().map(f).fold(f64::MAX, f64::min)
            };
            assert!((ext(|v| v.x) - b.length()).abs() < 1e-9);
            assert!((ext(|v| v.y) - b.width()).abs() < 1e-9);
            assert!((ext(|v| v.z) - b.height()).abs() < 1e-9);
        }
    }

    #[test]
    fn iou3d_cases() {
        let a = OrientedBox3::new(Point3::origin(), 1.0, 1.0, 1.0, 0.0).unwrap();
        let b = OrientedBox3::new(Point3::new(0.5, 0.0, 0.0), 1.0, 1.0, 1.0, 0.0).unwrap();
        assert!((iou3d(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
        let r = OrientedBox3::new(Point3::new(1.0, 2.0, 3.0), 4.0, 2.0, 1.5, 0.7).unwrap();
        assert!((iou3d(&r, &r) - 1.0).abs() < 1e-12);
        let far = r.with_center(Point3::new(10.0, 2.0, 3.0));
        assert_eq!(iou3d(&r, &far), 0.0);
    }

    #[test]
    fn bev_iou_half_turn_symmetry() {
        let a = OrientedBox3::new(Point3::new(1.0, 2.0, 0.0), 4.0, 2.0, 1.0, 0.4).unwrap();
        let b = OrientedBox3::new(Point3::new(1.0, 2.0, 0.0), 4.0, 2.0, 1.0, 0.4 + PI).unwrap();
        assert!((iou_bev(&a, &b) - 1.0).abs() < 1e-9);
    }

    /// Rasterizes both footprints on a 1 cm grid.
    fn raster_intersection(a: &OrientedBox3, b: &OrientedBox3) -> f64 {
        let step = 0.01;
        let fa = a.footprint();
        let xs = fa.iter().map(|p| p[0]);
        let ys = fa.iter().map(|p| p[1]);
        let (x0, x1) = (xs.clone().fold(f64::MAX, f64::min), xs.fold(f64::MIN, f64::max));
        let (y0, y1) = (ys.clone().fold(f64::MAX, f64::min), ys.fold(f64::MIN, f64::max));
        let mut count = 0usize;
        let mut x = x0 + 0.5 * step;
        while x < x1 {
            let mut y = y0 + 0.5 * step;
            while y < y1 {
                let p = Point3::new(x, y, 0.0);
                if a.contains_bev(&p, 0.0) && b.contains_bev(&p, 0.0) {
                    count += 1;
                }
                y += step;
            }
            x += step;
        }
        count as f64 * step * step
    }

    fn random_box(rng: &mut ChaCha8Rng) -> OrientedBox3 {
        OrientedBox3::new(
            Point3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(-0.5..0.5)),
            rng.random_range(0.5..4.0),
            rng.random_range(0.5..3.0),
            rng.random_range(0.5..2.0),
            rng.random_range(-PI..PI),
        )
        .unwrap()
    }

    #[test]
    fn bev_intersection_matches_rasterization() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 25 {
            let (a, b) = (random_box(&mut rng), random_box(&mut rng));
            let exact = bev_intersection_area(&a, &b);
            if exact < 0.2 {
                continue;
            }
            let raster = raster_intersection(&a, &b);
            assert!((exact - raster).abs() / exact < 0.02, "exact {exact} raster {raster}");
            checked += 1;
        }
    }

    #[test]
    fn projection_consistent_with_absorbed_transform() {
        let motion = Pose::from_yaw(0.4, Vec3::new(0.3, -1.0, 0.2));
        let cam_ext = Pose::new(
            Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0),
            Vec3::new(0.1, 0.2, 0.0),
        )
        .unwrap();
        let cam = CameraModel::new(500.0, 500.0, 320.0, 240.0, 640, 480, cam_ext).unwrap();
        let absorbed = CameraModel {
            extrinsics: cam_ext.compose(&motion.inverse()),
            ..cam.clone()
        };
        let p = Point3::new(8.0, 0.5, 0.3);
        let a = absorbed.project(&motion.apply(&p)).unwrap();
        let b = cam.project(&p).unwrap();
        assert!((a.u - b.u).abs() < 1e-6 && (a.v - b.v).abs() < 1e-6);
    }

    fn arb_box() -> impl Strategy<Value = OrientedBox3> {
        (-3.0..3.0f64, -3.0..3.0f64, -1.0..1.0f64, 0.2..5.0f64, 0.2..3.0f64, 0.2..2.0f64, -PI..PI)
            .prop_map(|(x, y, z, l, w, h, yaw)| OrientedBox3::new(Point3::new(x, y, z), l, w, h, yaw).unwrap())
    }

    proptest! {
        #[test]
        fn iou_symmetric_and_bounded(a in arb_box(), b in arb_box()) {
            let (ab, ba) = (iou3d(&a, &b), iou3d(&b, &a));
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            let (ab, ba) = (iou_bev(&a, &b), iou_bev(&b, &a));
            prop_assert!((ab - ba).abs() < 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!((iou3d(&a, &a) - 1.0).abs() < 1e-9);
        }

        #[test]
        fn iou_invariant_under_rigid_motion(a in arb_box(), b in arb_box(), yaw in -PI..PI, tx in -50.0..50.0f64, ty in -50.0..50.0f64, tz in -5.0..5.0f64) {
            let pose = Pose::from_yaw(yaw, Vec3::new(tx, ty, tz));
            let before = iou3d(&a, &b);
            let after = iou3d(&a.transformed(&pose).unwrap(), &b.transformed(&pose).unwrap());
            prop_assert!((before - after).abs() < 1e-6);
        }
    }
}
