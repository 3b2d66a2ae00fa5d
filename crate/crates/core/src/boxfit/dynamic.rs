//! Boxes for moving rigid objects: heading from the trajectory, extension
//! away from the faces the sensor can see.

use super::lshape::{heading_rect, lshape_fit, HeadingRect, LShapeParams};
use super::resize::{Faces, Side};
use crate::geometry::{OrientedBox3, Point3};
use crate::scene::ClassPrior;

/// Heading at position `at` of a `(frame, centroid)` trajectory from the
/// centered difference of its neighbors. `None` when there is no neighbor or
/// the per-frame planar displacement is below `min_step`.
pub fn trajectory_yaw(track: &[(u64, Point3)], at: usize, min_step: f64) -> Option<f64> {
    if track.len() < 2 || at >= track.len() {
        return None;
    }
    let lo = at.saturating_sub(1);
    let hi = (at + 1).min(track.len() - 1);
    let (fa, a) = track[lo];
    let (fb, b) = track[hi];
    let frames = fb.saturating_sub(fa).max(1) as f64;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    if dx.hypot(dy) / frames < min_step {
        return None;
    }
    Some(dy.atan2(dx))
}

/// Faces whose outward normal points toward the sensor, i.e. the ray from
/// the sensor to the face center has a negative dot product with it.
pub fn visible_faces(rect: &HeadingRect, sensor: &Point3) -> Faces {
    let (sx, sy) = rect.local(sensor);
    // Only the ray component along each face normal enters the dot product.
    let mut faces = Faces::default();
    let checks = [
        (Side::PosX, rect.x.1 - sx),
        (Side::NegX, sx - rect.x.0),
        (Side::PosY, rect.y.1 - sy),
        (Side::NegY, sy - rect.y.0),
    ];
    for (side, dot) in checks {
        if dot < 0.0 {
            faces.insert(side);
        }
    }
    faces
}

fn extend(interval: (f64, f64), target: f64, pos_anchor: bool, neg_anchor: bool) -> (f64, f64) {
    let (lo, hi) = interval;
    let size = (hi - lo).max(target);
    match (pos_anchor, neg_anchor) {
        (true, false) => (hi - size, hi),
        (false, true) => (lo, lo + size),
        _ => (lo, hi),
    }
}

/// Grows `rect` to the prior footprint away from its visible faces. Axes
/// without a visible face keep their extent.
pub fn extend_from_visible(rect: &HeadingRect, length: f64, width: f64, visible: &Faces) -> HeadingRect {
    HeadingRect {
        x: extend(rect.x, length, visible.contains(Side::PosX), visible.contains(Side::NegX)),
        y: extend(rect.y, width, visible.contains(Side::PosY), visible.contains(Side::NegY)),
        ..*rect
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicFit {
    pub box3: OrientedBox3,
    pub visible: Faces,
    /// Heading came from the L-shape fit because the trajectory was too slow.
    pub yaw_fallback: bool,
    pub degenerate: bool,
}

/// Fits one frame of a moving rigid object. `heading` is the trajectory yaw
/// when available; otherwise the L-shape yaw is used and the longer visible
/// extent is taken as the length.
pub fn dynamic_orient_and_extend(
    points: &[Point3],
    heading: Option<f64>,
    prior: &ClassPrior,
    sensor: &Point3,
    lshape: &LShapeParams,
) -> Option<DynamicFit> {
    let (yaw, fallback) = match heading {
        Some(y) => (y, false),
        None => (lshape_fit(points, lshape)?.box3.yaw(), true),
    };
    let (rect, degenerate) = heading_rect(points, yaw)?;
    let (lx, ly) = if fallback && rect.y.1 - rect.y.0 > rect.x.1 - rect.x.0 {
        (prior.width, prior.length)
    } else {
        (prior.length, prior.width)
    };
    let visible = visible_faces(&rect, sensor);
    let grown = extend_from_visible(&rect, lx, ly, &visible);
    Some(DynamicFit {
        box3: grown.to_box()?,
        visible,
        yaw_fallback: fallback,
        degenerate,
    })
}
