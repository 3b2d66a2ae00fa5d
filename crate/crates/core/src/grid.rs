//! Uniform hash grid for fixed-radius neighbor queries.

use std::collections::HashMap;

use crate::geometry::Point3;

pub struct HashGrid<'a> {
    points: &'a [Point3],
    cell: f64,
    cells: HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> HashGrid<'a> {
    pub fn new(points: &'a [Point3], cell: f64) -> Self {
        assert!(cell > 0.0, "grid cell must be positive");
        let mut cells: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(key(p, cell)).or_default().push(i as u32);
        }
        Self { points, cell, cells }
    }

    pub fn points(&self) -> &'a [Point3] {
        self.points
    }

    /// Visits every point index that could lie within `radius` of `p`,
    /// in a deterministic order. Callers apply the exact distance test.
    pub fn for_each_candidate(&self, p: &Point3, radius: f64, mut f: impl FnMut(usize)) {
        let reach = (radius / self.cell).ceil() as i64;
        let [kx, ky, kz] = key(p, self.cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(ids) = self.cells.get(&[kx + dx, ky + dy, kz + dz]) {
                        for &i in ids {
                            f(i as usize);
                        }
                    }
                }
            }
        }
    }

    /// True iff some point lies strictly closer than `radius`.
    pub fn any_within(&self, p: &Point3, radius: f64) -> bool {
        let reach = (radius / self.cell).ceil() as i64;
        let [kx, ky, kz] = key(p, self.cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(ids) = self.cells.get(&[kx + dx, ky + dy, kz + dz]) {
                        if ids.iter().any(|&i| (self.points[i as usize] - p).norm() < radius) {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Number of points strictly closer than `radius`.
    pub fn count_within(&self, p: &Point3, radius: f64) -> usize {
        let mut n = 0;
        self.for_each_candidate(p, radius, |i| {
            if (self.points[i] - p).norm() < radius {
                n += 1;
            }
        });
        n
    }

    /// Indices strictly closer than `radius`, ascending.
    pub fn within(&self, p: &Point3, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_candidate(p, radius, |i| {
            if (self.points[i] - p).norm() < radius {
                out.push(i);
            }
        });
        out.sort_unstable();
        out
    }
}

#[inline]
fn key(p: &Point3, cell: f64) -> [i64; 3] {
    [
        (p.x / cell).floor() as i64,
        (p.y / cell).floor() as i64,
        (p.z / cell).floor() as i64,
    ]
}

/// Axis-aligned bounds of a point set, `None` when empty.
pub fn bounds(points: &[Point3]) -> Option<(Point3, Point3)> {
    let first = points.first()?;
    let (mut lo, mut hi) = (*first, *first);
    for p in points {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    Some((lo, hi))
}

/// Total lexicographic order on coordinates.
pub fn lex_cmp(a: &Point3, b: &Point3) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)).then(a.z.total_cmp(&b.z))
}
