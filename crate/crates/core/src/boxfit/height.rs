//! Ground-contact refinement of a box's bottom face.

use crate::alignment::GroundModel;
use crate::geometry::{OrientedBox3, Point3};

#[derive(Debug, Clone, Copy)]
pub struct HeightParams {
    /// Lower percentile of nearby z values taken as the ground.
    pub percentile: f64,
    /// Below this many nearby points the ground plane is used instead.
    pub min_points: usize,
}

impl Default for HeightParams {
    fn default() -> Self {
        Self {
            percentile: 0.01,
            min_points: 10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroundSource {
    Percentile,
    Plane,
    /// Neither enough points nor a plane; the box bottom was kept.
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeightRefinement {
    pub box3: OrientedBox3,
    pub ground_z: f64,
    pub source: GroundSource,
}

/// Half of the footprint diagonal.
pub fn search_radius(length: f64, width: f64) -> f64 {
    length.hypot(width) / 2.0
}

/// Value at 0-based rank `ceil(p * n)` (clamped) of the ascending order.
pub fn lower_percentile(values: &mut [f64], p: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let rank = ((p * values.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    Some(values[rank.min(values.len() - 1)])
}

/// Estimates ground height under the box from frame points strictly within
/// the footprint half-diagonal of `position`, then snaps the bottom to it and
/// re-measures the height up to the box's current top, never below
/// `min_height`.
pub fn refine_height(
    b: &OrientedBox3,
    frame_points: &[Point3],
    position: &Point3,
    ground: Option<&GroundModel>,
    params: &HeightParams,
    min_height: f64,
) -> HeightRefinement {
    let radius = search_radius(b.length(), b.width());
    let mut zs: Vec<f64> = frame_points
        .iter()
        .filter(|p| (*p - position).norm() < radius)
        .map(|p| p.z)
        .collect();
    let (ground_z, source) = if zs.len() >= params.min_points.max(1) {
        (lower_percentile(&mut zs, params.percentile).unwrap(), GroundSource::Percentile)
    } else if let Some(g) = ground {
        let c = b.center();
        (g.z_at(c.x, c.y), GroundSource::Plane)
    } else {
        (b.bottom_z(), GroundSource::Unchanged)
    };
    let top = b.top_z();
    let height = (top - ground_z).max(min_height).max(super::lshape::THIN_FLOOR);
    let mut center = b.center();
    center.z = ground_z + 0.5 * height;
    let box3 = OrientedBox3::new(center, b.length(), b.width(), height, b.yaw()).expect("valid height");
    HeightRefinement { box3, ground_z, source }
}
