//! Sparse truncated signed distance volume and zero-crossing surface
//! extraction.

use std::collections::HashMap;

use crate::geometry::{Point3, Vec3};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Voxel {
    sdf: f64,
    weight: f64,
}

/// Sparse voxel volume; only voxels within the truncation band of some
/// observed return are stored.
#[derive(Debug, Clone)]
pub struct TsdfVolume {
    voxel: f64,
    truncation: f64,
    voxels: HashMap<[i64; 3], Voxel>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceVertex {
    pub position: Point3,
    /// Unit normal pointing out of the surface, toward free space.
    pub normal: Vec3,
}

impl TsdfVolume {
    pub fn new(voxel: f64, truncation: f64) -> Self {
        assert!(voxel > 0.0 && truncation >= voxel);
        Self {
            voxel,
            truncation,
            voxels: HashMap::new(),
        }
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel
    }

    pub fn len(&self) -> usize {
        self.voxels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.voxels.is_empty()
    }

    fn center(&self, k: [i64; 3]) -> Point3 {
        Point3::new(
            (k[0] as f64 + 0.5) * self.voxel,
            (k[1] as f64 + 0.5) * self.voxel,
            (k[2] as f64 + 0.5) * self.voxel,
        )
    }

    fn key(&self, p: &Point3) -> [i64; 3] {
        [
            (p.x / self.voxel).floor() as i64,
            (p.y / self.voxel).floor() as i64,
            (p.z / self.voxel).floor() as i64,
        ]
    }

    /// Fuses one return observed from `origin`. Voxels along the ray within
    /// the truncation band receive the projective signed distance (positive
    /// in front of the surface), clamped to the truncation.
    pub fn integrate_point(&mut self, point: &Point3, origin: &Point3) {
        let ray = point - origin;
        let range = ray.norm();
        if range < 1e-9 {
            return;
        }
        let dir = ray / range;
        let step = 0.5 * self.voxel;
        let n = (2.0 * self.truncation / step).ceil() as i64;
        let mut touched: Vec<[i64; 3]> = Vec::with_capacity(n as usize + 1);
        for i in 0..=n {
            let t = range - self.truncation + i as f64 * step;
            if t <= 0.0 {
                continue;
            }
            let k = self.key(&(origin + dir * t));
            if touched.contains(&k) {
                continue;
            }
            touched.push(k);
            let sdf = range - (self.center(k) - origin).dot(&dir);
            if sdf < -self.truncation {
                continue;
            }
            let sdf = sdf.min(self.truncation);
            let v = self.voxels.entry(k).or_default();
            v.sdf = (v.sdf * v.weight + sdf) / (v.weight + 1.0);
            v.weight += 1.0;
        }
    }

    fn value(&self, k: [i64; 3]) -> Option<f64> {
        self.voxels.get(&k).filter(|v| v.weight > 0.0).map(|v| v.sdf)
    }

    fn gradient(&self, k: [i64; 3]) -> Vec3 {
        let mut g = Vec3::zeros();
        let here = self.value(k);
        for a in 0..3 {
            let mut up = k;
            up[a] += 1;
            let mut dn = k;
            dn[a] -= 1;
            g[a] = match (self.value(up), self.value(dn), here) {
                (Some(u), Some(d), _) => (u - d) / (2.0 * self.voxel),
                (Some(u), None, Some(h)) => (u - h) / self.voxel,
                (None, Some(d), Some(h)) => (h - d) / self.voxel,
                _ => 0.0,
            };
        }
        g
    }

    /// Vertices where the signed distance changes sign between a voxel and
    /// its positive-axis neighbor, both observed and not clamped. Output is
    /// ordered by voxel key then axis.
    pub fn extract_surface(&self) -> Vec<SurfaceVertex> {
        let mut keys: Vec<[i64; 3]> = self.voxels.keys().copied().collect();
        keys.sort_unstable();
        let unclamped = |s: f64| s.abs() < self.truncation;
        let mut out = Vec::new();
        for k in keys {
            let Some(s0) = self.value(k) else { continue };
            if !unclamped(s0) {
                continue;
            }
            for a in 0..3 {
                let mut nb = k;
                nb[a] += 1;
                let Some(s1) = self.value(nb) else { continue };
                if !unclamped(s1) || (s0 > 0.0) == (s1 > 0.0) {
                    continue;
                }
                let t = s0 / (s0 - s1);
                let c0 = self.center(k);
                let c1 = self.center(nb);
                let position = c0 + (c1 - c0) * t;
                let g = self.gradient(k) * (1.0 - t) + self.gradient(nb) * t;
                let norm = g.norm();
                if norm < 1e-9 {
                    continue;
                }
                out.push(SurfaceVertex {
                    position,
                    normal: g / norm,
                });
            }
        }
        out
    }
}

/// Whether the vertex normal points toward at least one of the sensor
/// origins. Normals at the rim of an observed patch can tilt toward faces no
/// sensor saw; this rejects them.
pub fn faces_any_sensor(vertex: &SurfaceVertex, sensors: &[Point3]) -> bool {
    sensors.iter().any(|s| vertex.normal.dot(&(s - vertex.position)) > 0.0)
}

/// Fuses every `(point, origin)` pair in order.
pub fn tsdf_integrate<'a>(
    observations: impl IntoIterator<Item = (&'a Point3, &'a Point3)>,
    voxel: f64,
    truncation: f64,
) -> TsdfVolume {
    let mut vol = TsdfVolume::new(voxel, truncation);
    for (p, o) in observations {
        vol.integrate_point(p, o);
    }
    vol
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_vertices_sit_on_plane_with_normals_toward_sensor() {
        let origin = Point3::origin();
        let mut pts = Vec::new();
        for i in -25..=25 {
            for j in -25..=25 {
                pts.push(Point3::new(2.0, i as f64 * 0.02, j as f64 * 0.02));
            }
        }
        let vol = tsdf_integrate(pts.iter().map(|p| (p, &origin)), 0.1, 0.3);
        let verts = vol.extract_surface();
        assert!(verts.len() > 50);
        for v in &verts {
            assert!((v.position.x - 2.0).abs() < 0.1, "{:?}", v.position);
        }
        let inner: Vec<_> = verts
            .iter()
            .filter(|v| v.position.y.abs() < 0.3 && v.position.z.abs() < 0.3)
            .collect();
        assert!(!inner.is_empty());
        for v in inner {
            assert!(v.normal.x < -0.9, "{:?}", v.normal);
        }
    }

    #[test]
    fn sensor_facing_filter() {
        let v = SurfaceVertex {
            position: Point3::new(2.0, 0.0, 0.0),
            normal: Vec3::new(-1.0, 0.0, 0.0),
        };
        assert!(faces_any_sensor(&v, &[Point3::origin()]));
        assert!(!faces_any_sensor(&v, &[Point3::new(5.0, 0.0, 0.0)]));
        assert!(faces_any_sensor(&v, &[Point3::new(5.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)]));
        assert!(!faces_any_sensor(&v, &[]));
        // Perpendicular to the ray counts as not facing.
        assert!(!faces_any_sensor(&v, &[Point3::new(2.0, 3.0, 0.0)]));
    }

    #[test]
    fn sphere_vertices_within_a_voxel_of_radius() {
        let origin = Point3::origin();
        let center = Point3::new(4.0, 0.3, 0.2);
        let r = 1.0;
        let mut pts = Vec::new();
        // Dense samples of the hemisphere facing the sensor.
        for i in 0..60 {
            for j in 0..120 {
                let theta = std::f64::consts::PI * (i as f64 + 0.5) / 60.0;
                let phi = 2.0 * std::f64::consts::PI * j as f64 / 120.0;
                let n = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
                let p = center + n * r;
                if (origin - p).dot(&n) > 0.0 {
                    pts.push(p);
                }
            }
        }
        let vol = tsdf_integrate(pts.iter().map(|p| (p, &origin)), 0.1, 0.3);
        let verts = vol.extract_surface();
        assert!(verts.len() > 100);
        for v in &verts {
            let d = (v.position - center).norm();
            assert!((d - r).abs() <= 0.1, "distance {d}");
        }
    }

    #[test]
    fn empty_volume_has_no_surface() {
        assert!(TsdfVolume::new(0.1, 0.3).extract_surface().is_empty());
    }
}
