//! Static/dynamic decomposition and physical-type assignment.
//!
//! Persistence is measured per point as the normalized entropy of its
//! neighbor counts across a window of frames: a surface that is present in
//! every frame spreads its neighbors evenly (score near 1), a moving surface
//! only has neighbors in the frame it was observed in (score near 0).

use crate::geometry::Point3;
use crate::grid::HashGrid;
use crate::scene::{ClassPriors, MotionState, PhysicalType};

#[derive(Debug, Clone, PartialEq)]
pub struct PersistenceScore {
    pub per_point: Vec<f64>,
    /// Median of `per_point`.
    pub aggregate: f64,
}

/// Evenly strided selection of at most `k` items, always keeping both ends.
pub fn strided_window<T: Copy>(items: &[T], k: usize) -> Vec<T> {
    let n = items.len();
    if n <= k || k < 2 {
        return items.to_vec();
    }
    (0..k)
        .map(|i| items[((i * (n - 1)) as f64 / (k - 1) as f64).round() as usize])
        .collect()
}

/// Normalized entropy of a count vector; 0 when the total is at most one.
pub fn normalized_entropy(counts: &[usize]) -> f64 {
    let k = counts.len();
    let total: usize = counts.iter().sum();
    if total <= 1 || k < 2 {
        return 0.0;
    }
    let t = total as f64;
    let h: f64 = counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / t;
            -p * p.ln()
        })
        .sum();
    // Adding zero turns a negative zero from a single nonzero count into 0.
    (h / (k as f64).ln()).clamp(0.0, 1.0) + 0.0
}

/// Persistence of each query point against the global point grids of the
/// window frames (neighbors strictly within `radius`). `None` when the window
/// has fewer than two frames or there are no query points.
pub fn persistence_scores(points: &[Point3], window: &[&HashGrid], radius: f64) -> Option<PersistenceScore> {
    if window.len() < 2 || points.is_empty() {
        return None;
    }
    let mut counts = vec![0usize; window.len()];
    let per_point: Vec<f64> = points
        .iter()
        .map(|p| {
            for (c, grid) in counts.iter_mut().zip(window) {
                *c = grid.count_within(p, radius);
            }
            normalized_entropy(&counts)
        })
        .collect();
    let aggregate = median(&per_point);
    Some(PersistenceScore { per_point, aggregate })
}

pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MotionParams {
    pub pp_threshold: f64,
    pub displacement_min: f64,
}

impl Default for MotionParams {
    fn default() -> Self {
        Self {
            pp_threshold: 0.7,
            displacement_min: 0.5,
        }
    }
}

/// Planar distance between the first and last centroid of a track.
pub fn track_displacement(centroids: &[Point3]) -> f64 {
    match (centroids.first(), centroids.last()) {
        (Some(a), Some(b)) => (b.x - a.x).hypot(b.y - a.y),
        _ => 0.0,
    }
}

/// How much the union of a track's per-frame planar extents outgrows the
/// largest single-frame extent, measured on bounding-rectangle diagonals.
/// A fixed object seen from a moving sensor exposes different faces in each
/// frame, which shifts its point centroid but not its footprint; a moving
/// object's union footprint grows by roughly the distance travelled.
pub fn extent_growth<'a>(frames: impl IntoIterator<Item = &'a [Point3]>) -> f64 {
    let diag = |lo: [f64; 2], hi: [f64; 2]| (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    let mut union: Option<([f64; 2], [f64; 2])> = None;
    let mut largest: f64 = 0.0;
    for pts in frames {
        let Some(first) = pts.first() else { continue };
        let mut lo = [first.x, first.y];
        let mut hi = lo;
        for p in pts {
            lo = [lo[0].min(p.x), lo[1].min(p.y)];
            hi = [hi[0].max(p.x), hi[1].max(p.y)];
        }
        largest = largest.max(diag(lo, hi));
        union = Some(match union {
            None => (lo, hi),
            Some((ul, uh)) => ([ul[0].min(lo[0]), ul[1].min(lo[1])], [uh[0].max(hi[0]), uh[1].max(hi[1])]),
        });
    }
    union.map_or(0.0, |(lo, hi)| (diag(lo, hi) - largest).max(0.0))
}

/// Static iff the aggregate persistence reaches the threshold and the track
/// moved less than `displacement_min`. A missing score means the motion is
/// unknown, which is treated as dynamic.
pub fn classify_motion(score: Option<f64>, displacement: f64, params: &MotionParams) -> MotionState {
    match score {
        Some(s) if s >= params.pp_threshold && displacement < params.displacement_min => MotionState::Static,
        _ => MotionState::Dynamic,
    }
}

/// Physical type from the class prior's rigidity and the motion state. The
/// boolean reports that the class was missing and the fallback prior used.
pub fn assign_physical_type(class_label: &str, motion: MotionState, priors: &ClassPriors) -> (PhysicalType, bool) {
    let (prior, fallback) = priors.lookup(class_label);
    if fallback {
        log::warn!("class '{class_label}' has no prior; using '{}'", prior.class_label);
    }
    (PhysicalType::from_parts(prior.rigidity, motion), fallback)
}
