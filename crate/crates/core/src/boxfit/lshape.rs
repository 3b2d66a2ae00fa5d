//! Closeness-to-edge rectangle search in bird's-eye view.

use std::f64::consts::FRAC_PI_2;

use crate::geometry::{OrientedBox3, Point3};

/// Width/height floor applied to degenerate (collinear or flat) inputs.
pub const THIN_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy)]
pub struct LShapeParams {
    pub yaw_step_deg: f64,
    pub d_min: f64,
}

impl Default for LShapeParams {
    fn default() -> Self {
        Self {
            yaw_step_deg: 0.5,
            d_min: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LShapeFit {
    pub box3: OrientedBox3,
    /// Search angle in `[0, pi/2)` that maximized the criterion.
    pub search_angle: f64,
    pub degenerate: bool,
}

/// Sum over points of `1 / max(d, d_min)`, where `d` is the distance to the
/// nearer of the two rectangle edges the point is closest to, for a
/// rectangle aligned with angle `theta`.
pub fn closeness_score(xy: &[[f64; 2]], theta: f64, d_min: f64) -> f64 {
    let (s, c) = theta.sin_cos();
    let (mut min1, mut max1, mut min2, mut max2) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &[x, y] in xy {
        let c1 = x * c + y * s;
        let c2 = -x * s + y * c;
        min1 = min1.min(c1);
        max1 = max1.max(c1);
        min2 = min2.min(c2);
        max2 = max2.max(c2);
    }
    let mut score = 0.0;
    for &[x, y] in xy {
        let c1 = x * c + y * s;
        let c2 = -x * s + y * c;
        let d1 = (max1 - c1).min(c1 - min1);
        let d2 = (max2 - c2).min(c2 - min2);
        score += 1.0 / d1.min(d2).max(d_min);
    }
    score
}

/// Best angle on a uniform grid over `[0, pi/2)`; ties keep the smaller angle.
pub fn search_yaw(xy: &[[f64; 2]], step: f64, d_min: f64) -> f64 {
    let steps = ((FRAC_PI_2 / step) - 1e-9).ceil().max(1.0) as usize;
    let mut best = (0.0, f64::MIN);
    for i in 0..steps {
        let theta = i as f64 * step;
        let score = closeness_score(xy, theta, d_min);
        if score > best.1 {
            best = (theta, score);
        }
    }
    best.0
}

/// Axis-aligned extents in a frame rotated by `yaw`, before any length/width
/// canonicalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingRect {
    pub yaw: f64,
    /// Interval along the heading axis.
    pub x: (f64, f64),
    /// Interval along the left-normal axis.
    pub y: (f64, f64),
    pub z: (f64, f64),
}

impl HeadingRect {
    pub fn to_box(&self) -> Option<OrientedBox3> {
        let (s, c) = self.yaw.sin_cos();
        let m1 = 0.5 * (self.x.0 + self.x.1);
        let m2 = 0.5 * (self.y.0 + self.y.1);
        let center = Point3::new(m1 * c - m2 * s, m1 * s + m2 * c, 0.5 * (self.z.0 + self.z.1));
        OrientedBox3::new(
            center,
            self.x.1 - self.x.0,
            self.y.1 - self.y.0,
            self.z.1 - self.z.0,
            self.yaw,
        )
        .ok()
    }

    /// Coordinates of a world point along the heading and normal axes.
    pub fn local(&self, p: &Point3) -> (f64, f64) {
        let (s, c) = self.yaw.sin_cos();
        (p.x * c + p.y * s, -p.x * s + p.y * c)
    }
}

/// Tight rectangle with a fixed heading. Footprint extents thinner than
/// [`THIN_FLOOR`] are widened about their midpoint, and the returned flag
/// reports that this happened.
pub fn heading_rect(points: &[Point3], yaw: f64) -> Option<(HeadingRect, bool)> {
    let first = points.first()?;
    let (s, c) = yaw.sin_cos();
    let (mut min1, mut max1, mut min2, mut max2) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    let (mut zmin, mut zmax) = (first.z, first.z);
    for p in points {
        let c1 = p.x * c + p.y * s;
        let c2 = -p.x * s + p.y * c;
        min1 = min1.min(c1);
        max1 = max1.max(c1);
        min2 = min2.min(c2);
        max2 = max2.max(c2);
        zmin = zmin.min(p.z);
        zmax = zmax.max(p.z);
    }
    let mut thin = false;
    for (lo, hi) in [(&mut min1, &mut max1), (&mut min2, &mut max2)] {
        thin |= widen(lo, hi);
    }
    widen(&mut zmin, &mut zmax);
    let rect = HeadingRect {
        yaw,
        x: (min1, max1),
        y: (min2, max2),
        z: (zmin, zmax),
    };
    Some((rect, thin))
}

fn widen(lo: &mut f64, hi: &mut f64) -> bool {
    if *hi - *lo < THIN_FLOOR {
        let mid = 0.5 * (*lo + *hi);
        *lo = mid - 0.5 * THIN_FLOOR;
        *hi = mid + 0.5 * THIN_FLOOR;
        true
    } else {
        false
    }
}

/// Tight oriented box at a fixed yaw; see [`heading_rect`].
pub fn tight_box(points: &[Point3], yaw: f64) -> Option<(OrientedBox3, bool)> {
    let (rect, thin) = heading_rect(points, yaw)?;
    Some((rect.to_box()?, thin))
}

/// Fits an oriented box to the bird's-eye footprint of `points`; height spans
/// the observed z range. Fewer than three points or collinear input yields a
/// box flagged degenerate with thin extents floored.
pub fn lshape_fit(points: &[Point3], params: &LShapeParams) -> Option<LShapeFit> {
    if points.is_empty() {
        return None;
    }
    let xy: Vec<[f64; 2]> = points.iter().map(|p| [p.x, p.y]).collect();
    let theta = search_yaw(&xy, params.yaw_step_deg.to_radians(), params.d_min);
    let (box3, thin) = tight_box(points, theta)?;
    Some(LShapeFit {
        box3,
        search_angle: theta,
        degenerate: points.len() < 3 || thin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::normalize_angle;

    fn l_points(yaw: f64, length: f64, width: f64) -> Vec<Point3> {
        let (s, c) = yaw.sin_cos();
        let mut pts = Vec::new();
        for i in 0..=40 {
            let t = i as f64 / 40.0;
            let local = [(t * length, 0.0), (0.0, t * width)];
            for (x, y) in local {
                for z in [0.2, 1.0] {
                    pts.push(Point3::new(x * c - y * s + 3.0, x * s + y * c - 1.0, z));
                }
            }
        }
        pts
    }

    fn yaw_error_mod_quarter(a: f64, b: f64) -> f64 {
        let d = (a - b).rem_euclid(FRAC_PI_2);
        d.min(FRAC_PI_2 - d)
    }

    #[test]
    fn axis_aligned_edges() {
        let fit = lshape_fit(&l_points(0.0, 4.0, 2.0), &LShapeParams::default()).unwrap();
        assert!(yaw_error_mod_quarter(fit.box3.yaw(), 0.0) <= 0.5f64.to_radians() + 1e-12);
        assert!((fit.box3.length() - 4.0).abs() < 1e-9);
        assert!((fit.box3.width() - 2.0).abs() < 1e-9);
        assert!(!fit.degenerate);
    }

    #[test]
    fn rotated_thirty_degrees_matches_fine_grid() {
        let pts = l_points(30f64.to_radians(), 4.0, 2.0);
        let fit = lshape_fit(&pts, &LShapeParams::default()).unwrap();
        let xy: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
        // Independent brute force over a 0.1 degree grid.
        let mut best = (0.0, f64::MIN);
        for i in 0..900 {
            let th = (i as f64 * 0.1).to_radians();
            let s = closeness_score(&xy, th, 0.01);
            if s > best.1 {
                best = (th, s);
            }
        }
        assert!(yaw_error_mod_quarter(best.0, 30f64.to_radians()) < 0.15f64.to_radians());
        assert!(yaw_error_mod_quarter(fit.box3.yaw(), best.0) <= 0.5f64.to_radians() + 1e-9);
    }

    #[test]
    fn collinear_points_get_thin_box() {
        let pts: Vec<Point3> = (0..10).map(|i| Point3::new(i as f64 * 0.3, 0.0, i as f64 * 0.1)).collect();
        let fit = lshape_fit(&pts, &LShapeParams::default()).unwrap();
        assert!(fit.degenerate);
        assert!((fit.box3.width() - THIN_FLOOR).abs() < 1e-12);
    }

    #[test]
    fn translation_invariant_and_rotation_equivariant() {
        let pts = l_points(0.3, 3.5, 1.6);
        let base = lshape_fit(&pts, &LShapeParams::default()).unwrap();
        let shifted: Vec<Point3> = pts.iter().map(|p| Point3::new(p.x + 100.0, p.y - 40.0, p.z)).collect();
        let moved = lshape_fit(&shifted, &LShapeParams::default()).unwrap();
        assert!(yaw_error_mod_quarter(base.box3.yaw(), moved.box3.yaw()) < 1e-9);
        for phi in [0.2, 0.9, 2.0] {
            let (s, c) = f64::sin_cos(phi);
            let rot: Vec<Point3> = pts.iter().map(|p| Point3::new(p.x * c - p.y * s, p.x * s + p.y * c, p.z)).collect();
            let r = lshape_fit(&rot, &LShapeParams::default()).unwrap();
            let expected = normalize_angle(base.box3.yaw() + phi);
            assert!(yaw_error_mod_quarter(r.box3.yaw(), expected) <= 0.5f64.to_radians() + 1e-9);
        }
    }
}
