//! Cross-modal instance alignment: ground removal, density clustering, mask
//! erosion, mask-based unprojection and cluster-level context refinement.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Point3, Vec3};
use crate::grid::{bounds, lex_cmp, HashGrid};
use crate::mask::BitMask;
use crate::geometry::AxisAlignedBox2;
use crate::scene::FrameBundle;

// ---------------------------------------------------------------------------
// Ground.

/// Plane `normal . p + offset = 0` with unit normal pointing up.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroundModel {
    pub normal: Vec3,
    pub offset: f64,
    pub threshold: f64,
}

impl GroundModel {
    /// Signed height of `p` above the plane.
    pub fn height(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) + self.offset
    }

    /// Plane z directly below/above `(x, y)`.
    pub fn z_at(&self, x: f64, y: f64) -> f64 {
        -(self.normal.x * x + self.normal.y * y + self.offset) / self.normal.z
    }

    /// The same plane expressed after applying `pose` to space.
    pub fn transformed(&self, pose: &crate::geometry::Pose) -> Self {
        let normal = pose.apply_vector(&self.normal);
        Self {
            normal,
            offset: self.offset - normal.dot(pose.translation()),
            threshold: self.threshold,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct GroundParams {
    pub iterations: usize,
    pub threshold: f64,
    pub min_normal_z: f64,
    pub seed: u64,
}

impl Default for GroundParams {
    fn default() -> Self {
        Self {
            iterations: 200,
            threshold: 0.1,
            min_normal_z: 0.7,
            seed: 0,
        }
    }
}

/// RANSAC plane segmentation. Returns the indices of non-ground points and
/// the fitted plane; when no near-horizontal plane is found every point is
/// kept and the model is absent.
pub fn segment_ground(points: &[Point3], params: &GroundParams) -> (Vec<usize>, Option<GroundModel>) {
    let all = || (0..points.len()).collect::<Vec<_>>();
    if points.len() < 3 {
        return (all(), None);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = points.len();
    let mut best: Option<(usize, Vec3, f64)> = None;
    for _ in 0..params.iterations {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let k = rng.random_range(0..n);
        if i == j || j == k || i == k {
            continue;
        }
        let (a, b, c) = (points[i], points[j], points[k]);
        let cross = (b - a).cross(&(c - a));
        let norm = cross.norm();
        if norm < 1e-9 {
            continue;
        }
        let mut normal = cross / norm;
        if normal.z < 0.0 {
            normal = -normal;
        }
        if normal.z < params.min_normal_z {
            continue;
        }
        let offset = -normal.dot(&a.coords);
        let count = points
            .iter()
            .filter(|p| (normal.dot(&p.coords) + offset).abs() < params.threshold)
            .count();
        if best.as_ref().is_none_or(|(c, _, _)| count > *c) {
            best = Some((count, normal, offset));
        }
    }
    let Some((_, normal, offset)) = best else {
        return (all(), None);
    };
    let mut model = GroundModel {
        normal,
        offset,
        threshold: params.threshold,
    };
    // Least-squares polish on the consensus set.
    let inliers: Vec<Point3> = points.iter().filter(|p| model.height(p).abs() < params.threshold).cloned().collect();
    if let Some(refit) = fit_plane(&inliers) {
        if refit.0.z >= params.min_normal_z {
            model.normal = refit.0;
            model.offset = refit.1;
        }
    }
    let keep = (0..n).filter(|&i| model.height(&points[i]).abs() >= params.threshold).collect();
    (keep, Some(model))
}

/// Removes ground inliers; see [`segment_ground`].
pub fn remove_ground(points: &[Point3], params: &GroundParams) -> (Vec<Point3>, Option<GroundModel>) {
    let (keep, model) = segment_ground(points, params);
    (keep.into_iter().map(|i| points[i]).collect(), model)
}

fn fit_plane(points: &[Point3]) -> Option<(Vec3, f64)> {
    if points.len() < 3 {
        return None;
    }
    let centroid = points.iter().fold(Vec3::zeros(), |acc, p| acc + p.coords) / points.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in points {
        let d = p.coords - centroid;
        cov += d * d.transpose();
    }
    let eig = cov.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))?;
    let mut normal: Vec3 = eig.eigenvectors.column(idx).into_owned();
    if normal.z < 0.0 {
        normal = -normal;
    }
    let normal = normal.normalize();
    Some((normal, -normal.dot(&centroid)))
}

/// Indices of points at least `z_floor` above the plane (or all points when
/// no plane is known).
pub fn above_floor(points: &[Point3], indices: &[usize], ground: Option<&GroundModel>, z_floor: f64) -> Vec<usize> {
    match ground {
        Some(g) => indices.iter().copied().filter(|&i| g.height(&points[i]) >= z_floor).collect(),
        None => indices.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Clustering.

/// Result of density clustering; entries are indices into the input slice.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClusterSet {
    pub clusters: Vec<Vec<usize>>,
    pub noise: Vec<usize>,
}

impl ClusterSet {
    pub fn cluster_points(&self, points: &[Point3]) -> Vec<Vec<Point3>> {
        self.clusters.iter().map(|c| c.iter().map(|&i| points[i]).collect()).collect()
    }
}

/// Clustering backend consumed by context refinement.
pub trait Clusterer {
    fn cluster(&self, points: &[Point3]) -> ClusterSet;
}

#[derive(Debug, Clone, Copy)]
pub struct Dbscan {
    pub eps: f64,
    pub min_pts: usize,
}

impl Clusterer for Dbscan {
    fn cluster(&self, points: &[Point3]) -> ClusterSet {
        cluster(points, self.eps, self.min_pts)
    }
}

/// DBSCAN over Euclidean distance (`<= eps`, neighborhood includes the point
/// itself). Points are first put in lexicographic order, so labels do not
/// depend on input order; clusters are numbered by their first core point in
/// that order and a border point joins the earliest cluster that reaches it.
/// Clusters that end up smaller than `min_pts` are demoted to noise.
pub fn cluster(points: &[Point3], eps: f64, min_pts: usize) -> ClusterSet {
    assert!(eps > 0.0 && min_pts >= 1);
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| lex_cmp(&points[a], &points[b]).then(a.cmp(&b)));
    let sorted: Vec<Point3> = order.iter().map(|&i| points[i]).collect();

    // Cells with a diagonal of eps: points sharing a cell are always
    // neighbors, and neighbors are at most two cells apart per axis.
    let side = eps / 3f64.sqrt();
    let key = |p: &Point3| [(p.x / side).floor() as i64, (p.y / side).floor() as i64, (p.z / side).floor() as i64];
    let mut cells: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in sorted.iter().enumerate() {
        cells.entry(key(p)).or_default().push(i);
    }
    let nearby = |c: [i64; 3]| {
        (-2..=2).flat_map(move |dx| {
            (-2..=2).flat_map(move |dy| (-2..=2).map(move |dz| [c[0] + dx, c[1] + dy, c[2] + dz]))
        })
    };
    let within = |a: usize, b: usize| (sorted[a] - sorted[b]).norm() <= eps;

    let core: Vec<bool> = (0..n)
        .map(|i| {
            let c = key(&sorted[i]);
            let own = cells[&c].len();
            if own >= min_pts {
                return true;
            }
            let mut count = own;
            for nc in nearby(c).filter(|&nc| nc != c) {
                if let Some(members) = cells.get(&nc) {
                    count += members.iter().filter(|&&j| within(i, j)).count();
                    if count >= min_pts {
                        return true;
                    }
                }
            }
            false
        })
        .collect();

    // Connected components of the core points.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let union = |parent: &mut Vec<usize>, a: usize, b: usize| {
        let (ra, rb) = (find(parent, a), find(parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    };
    let core_cells: HashMap<[i64; 3], Vec<usize>> = cells
        .iter()
        .filter_map(|(c, m)| {
            let cores: Vec<usize> = m.iter().copied().filter(|&i| core[i]).collect();
            (!cores.is_empty()).then_some((*c, cores))
        })
        .collect();
    let mut keys: Vec<[i64; 3]> = core_cells.keys().copied().collect();
    keys.sort_unstable();
    for c in &keys {
        let a = &core_cells[c];
        for &i in &a[1..] {
            union(&mut parent, a[0], i);
        }
        for nc in nearby(*c).filter(|nc| nc > c) {
            let Some(b) = core_cells.get(&nc) else { continue };
            if find(&mut parent, a[0]) == find(&mut parent, b[0]) {
                continue;
            }
            if a.iter().any(|&i| b.iter().any(|&j| within(i, j))) {
                union(&mut parent, a[0], b[0]);
            }
        }
    }

    // Components are numbered by their first core point; a border point
    // joins the lowest-numbered component among its core neighbors.
    const UNSET: usize = usize::MAX;
    let mut id_of_root = vec![UNSET; n];
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut label = vec![UNSET; n];
    for i in (0..n).filter(|&i| core[i]) {
        let r = find(&mut parent, i);
        if id_of_root[r] == UNSET {
            id_of_root[r] = members.len();
            members.push(Vec::new());
        }
        label[i] = id_of_root[r];
    }
    for i in (0..n).filter(|&i| !core[i]) {
        let mut best = UNSET;
        for nc in nearby(key(&sorted[i])) {
            if let Some(b) = core_cells.get(&nc) {
                for &j in b {
                    if label[j] < best && within(i, j) {
                        best = label[j];
                    }
                }
            }
        }
        label[i] = best;
    }
    for i in 0..n {
        if label[i] != UNSET {
            members[label[i]].push(i);
        }
    }

    let mut out = ClusterSet::default();
    for m in members {
        let mut idx: Vec<usize> = m.iter().map(|&s| order[s]).collect();
        idx.sort_unstable();
        if idx.len() >= min_pts {
            out.clusters.push(idx);
        } else {
            out.noise.extend(idx);
        }
    }
    out.noise.extend((0..n).filter(|&s| label[s] == UNSET).map(|s| order[s]));
    out.noise.sort_unstable();
    out
}

// ---------------------------------------------------------------------------
// Masks.

#[derive(Debug, Clone)]
pub struct ErodedMask {
    pub mask: BitMask,
    pub radius: u32,
    /// Erosion emptied the mask and a single centroid pixel was kept instead.
    pub fallback: bool,
}

/// Erosion radius that scales with the 2D box size.
pub fn erosion_radius(box2d: &AxisAlignedBox2) -> u32 {
    (0.03 * box2d.width().min(box2d.height())).round().clamp(1.0, 8.0) as u32
}

/// Size-adaptive mask erosion. The result is always a subset of the input.
pub fn erode_mask(mask: &BitMask, box2d: &AxisAlignedBox2) -> ErodedMask {
    let radius = erosion_radius(box2d);
    let eroded = mask.eroded(radius);
    if !eroded.is_empty() || mask.is_empty() {
        let fallback = eroded.is_empty();
        return ErodedMask {
            mask: eroded,
            radius,
            fallback,
        };
    }
    let pixels: Vec<(u32, u32)> = mask.pixels().collect();
    let n = pixels.len() as f64;
    let cx = pixels.iter().map(|p| p.0 as f64).sum::<f64>() / n;
    let cy = pixels.iter().map(|p| p.1 as f64).sum::<f64>() / n;
    let nearest = pixels
        .iter()
        .min_by(|a, b| {
            let da = (a.0 as f64 - cx).powi(2) + (a.1 as f64 - cy).powi(2);
            let db = (b.0 as f64 - cx).powi(2) + (b.1 as f64 - cy).powi(2);
            da.total_cmp(&db)
        })
        .copied()
        .unwrap();
    let mut single = BitMask::new(mask.width(), mask.height());
    single.set(nearest.0, nearest.1, true);
    ErodedMask {
        mask: single,
        radius,
        fallback: true,
    }
}

// ---------------------------------------------------------------------------
// Unprojection.

/// Per-instance 3D points. `frames[i]` is the frame index of `points[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct InstancePoints {
    pub track_id: u64,
    pub class_label: String,
    pub points: Vec<Point3>,
    pub frames: Vec<u64>,
    /// Set once context refinement replaced the raw unprojection.
    pub refined: bool,
}

impl InstancePoints {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct SkipRecord {
    pub frame: u64,
    pub track_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub camera: Option<u32>,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct Unprojection {
    pub instances: Vec<InstancePoints>,
    /// Per instance, the indices into `frame.points` that were collected.
    pub point_indices: Vec<Vec<usize>>,
    pub skipped: Vec<SkipRecord>,
    pub warnings: Vec<SkipRecord>,
}

/// Collects, for every cue, the frame points whose projection lands on a set
/// mask pixel. Cues sharing a track id across cameras are merged.
pub fn unproject_instances(frame: &FrameBundle, erode: bool) -> Unprojection {
    let mut per_track: BTreeMap<u64, (String, f64, std::collections::BTreeSet<usize>)> = BTreeMap::new();
    let mut out = Unprojection::default();
    for view in &frame.cameras {
        let pixels: Vec<Option<(u32, u32)>> = frame
            .points
            .iter()
            .map(|p| view.camera.project(p).map(|px| (px.u as u32, px.v as u32)))
            .collect();
        for cue in &view.cues {
            let record = |reason: &str| SkipRecord {
                frame: frame.index,
                track_id: cue.track_id,
                camera: Some(view.id),
                reason: reason.to_string(),
            };
            let Ok(bits) = cue.mask.decode() else {
                out.skipped.push(record("undecodable mask"));
                continue;
            };
            let mask = if erode {
                let e = erode_mask(&bits, &cue.box2d);
                if e.fallback {
                    out.warnings.push(record("erosion emptied mask; kept centroid pixel"));
                }
                e.mask
            } else {
                bits
            };
            let entry = per_track
                .entry(cue.track_id)
                .or_insert_with(|| (cue.class_label.clone(), f64::MIN, Default::default()));
            if cue.score > entry.1 {
                entry.0 = cue.class_label.clone();
                entry.1 = cue.score;
            }
            for (i, px) in pixels.iter().enumerate() {
                if let Some((x, y)) = px {
                    if mask.get(*x, *y) {
                        entry.2.insert(i);
                    }
                }
            }
        }
    }
    for (track_id, (class_label, _, indices)) in per_track {
        if indices.is_empty() {
            out.skipped.push(SkipRecord {
                frame: frame.index,
                track_id,
                camera: None,
                reason: "no LiDAR points on mask".into(),
            });
            continue;
        }
        let idx: Vec<usize> = indices.into_iter().collect();
        out.instances.push(InstancePoints {
            track_id,
            class_label,
            points: idx.iter().map(|&i| frame.points[i]).collect(),
            frames: vec![frame.index; idx.len()],
            refined: false,
        });
        out.point_indices.push(idx);
    }
    out
}

// ---------------------------------------------------------------------------
// Context-aware refinement.

#[derive(Debug, Clone, Copy)]
pub struct RefineParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    /// Count instance points near the cluster for the second ratio instead of
    /// reusing the cluster-side count.
    pub symmetric: bool,
}

impl Default for RefineParams {
    fn default() -> Self {
        Self {
            alpha: 0.3,
            beta: 0.2,
            delta: 0.1,
            symmetric: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    /// One entry per input instance, ordered by track id.
    pub instances: Vec<InstancePoints>,
    /// Track id each cluster was assigned to, indexed like the input clusters.
    pub assignments: Vec<Option<u64>>,
}

/// Inclusion counts `(cluster-side, instance-side)` for one cluster/instance
/// pair. With `symmetric == false` both entries are the cluster-side count.
pub fn inclusion_counts(cluster: &[Point3], instance_grid: &HashGrid, delta: f64, symmetric: bool) -> (usize, usize) {
    let n = cluster.iter().filter(|p| instance_grid.any_within(p, delta)).count();
    if !symmetric {
        return (n, n);
    }
    let cluster_grid = HashGrid::new(cluster, delta);
    let m = instance_grid
        .points()
        .iter()
        .filter(|f| cluster_grid.any_within(f, delta))
        .count();
    (n, m)
}

/// Assigns each cluster to at most one instance when both inclusion ratios
/// clear their thresholds, then replaces each instance's points by the union
/// of its clusters. Ties go to the larger cluster-side ratio, then the lower
/// track id. Instances without clusters keep their points, unrefined.
pub fn context_aware_refine(clusters: &[Vec<Point3>], instances: &[InstancePoints], params: &RefineParams) -> RefineOutcome {
    let mut order: Vec<usize> = (0..instances.len()).collect();
    order.sort_by_key(|&i| instances[i].track_id);

    let grids: Vec<HashGrid> = instances.iter().map(|inst| HashGrid::new(&inst.points, params.delta)).collect();
    let inst_bounds: Vec<Option<(Point3, Point3)>> = instances.iter().map(|i| bounds(&i.points)).collect();

    let mut assignments = Vec::with_capacity(clusters.len());
    for cluster in clusters {
        let mut best: Option<(usize, u64, usize)> = None;
        if let Some((clo, chi)) = bounds(cluster) {
            for &ii in &order {
                let inst = &instances[ii];
                if inst.points.is_empty() {
                    continue;
                }
                let (ilo, ihi) = inst_bounds[ii].unwrap();
                let apart = (0..3).any(|k| clo[k] - params.delta > ihi[k] || ilo[k] - params.delta > chi[k]);
                if apart {
                    continue;
                }
                let (n, m) = inclusion_counts(cluster, &grids[ii], params.delta, params.symmetric);
                let r1 = n as f64 / cluster.len() as f64;
                let r2 = m as f64 / inst.points.len() as f64;
                if r1 > params.alpha && r2 > params.beta {
                    let better = match best {
                        None => true,
                        Some((bn, bt, _)) => n > bn || (n == bn && inst.track_id < bt),
                    };
                    if better {
                        best = Some((n, inst.track_id, ii));
                    }
                }
            }
        }
        assignments.push(best.map(|(_, t, ii)| (t, ii)));
    }

    let mut refined: Vec<Vec<Point3>> = vec![Vec::new(); instances.len()];
    for (k, a) in assignments.iter().enumerate() {
        if let Some((_, ii)) = a {
            refined[*ii].extend_from_slice(&clusters[k]);
        }
    }
    let out = order
        .iter()
        .map(|&ii| {
            let inst = &instances[ii];
            let mut pts = std::mem::take(&mut refined[ii]);
            if pts.is_empty() {
                return InstancePoints {
                    refined: false,
                    ..inst.clone()
                };
            }
            pts.sort_by(lex_cmp);
            let frame = inst.frames.first().copied().unwrap_or(0);
            InstancePoints {
                track_id: inst.track_id,
                class_label: inst.class_label.clone(),
                frames: vec![frame; pts.len()],
                points: pts,
                refined: true,
            }
        })
        .collect();
    RefineOutcome {
        instances: out,
        assignments: assignments.into_iter().map(|a| a.map(|(t, _)| t)).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraModel, Pose};
    use crate::scene::{CameraView, InstanceCue2D};

    fn inst(track_id: u64, pts: &[(f64, f64, f64)]) -> InstancePoints {
        InstancePoints {
            track_id,
            class_label: "car".into(),
            points: pts.iter().map(|&(x, y, z)| Point3::new(x, y, z)).collect(),
            frames: vec![0; pts.len()],
            refined: false,
        }
    }

    #[test]
    fn flat_ground_and_one_obstacle() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Point3::new(i as f64 * 0.5, j as f64 * 0.5, 0.0));
            }
        }
        pts.push(Point3::new(1.0, 1.0, 2.0));
        let (rest, model) = remove_ground(&pts, &GroundParams::default());
        let model = model.unwrap();
        assert!((model.normal - Vec3::z()).norm() < 1e-9);
        assert!(model.offset.abs() < 1e-9);
        assert_eq!(rest, vec![Point3::new(1.0, 1.0, 2.0)]);

        let (rest, _) = remove_ground(&pts[..400], &GroundParams::default());
        assert!(rest.is_empty());
    }

    #[test]
    fn no_horizontal_plane_keeps_everything() {
        let pts: Vec<Point3> = (0..50).map(|i| Point3::new(0.0, (i % 10) as f64, (i / 10) as f64)).collect();
        let (rest, model) = remove_ground(&pts, &GroundParams::default());
        assert!(model.is_none());
        assert_eq!(rest.len(), pts.len());
    }

    #[test]
    fn two_blobs() {
        let mut pts = Vec::new();
        for i in 0..30 {
            let t = i as f64 * 0.05;
            pts.push(Point3::new(t, 0.0, 0.0));
            pts.push(Point3::new(10.0 + t, 0.0, 0.0));
        }
        let set = cluster(&pts, 0.5, 5);
        assert_eq!(set.clusters.len(), 2);
        assert!(set.noise.is_empty());
    }

    #[test]
    fn sparse_points_are_noise() {
        let pts: Vec<Point3> = (0..20).map(|i| Point3::new(i as f64, 0.0, 0.0)).collect();
        let set = cluster(&pts, 0.5, 2);
        assert!(set.clusters.is_empty());
        assert_eq!(set.noise.len(), 20);
    }

    #[test]
    fn clustering_ignores_input_order() {
        let mut pts = Vec::new();
        for i in 0..40 {
            pts.push(Point3::new((i % 7) as f64 * 0.3, (i / 7) as f64 * 0.3, 0.0));
        }
        let a = cluster(&pts, 0.35, 4);
        let mut rev = pts.clone();
        rev.reverse();
        let b = cluster(&rev, 0.35, 4);
        let map = |s: &ClusterSet, p: &[Point3]| {
            let mut v: Vec<Vec<(i64, i64)>> = s
                .clusters
                .iter()
                .map(|c| {
                    let mut q: Vec<(i64, i64)> = c.iter().map(|&i| ((p[i].x * 100.0) as i64, (p[i].y * 100.0) as i64)).collect();
                    q.sort();
                    q
                })
                .collect();
            v.sort();
            v
        };
        assert_eq!(map(&a, &pts), map(&b, &rev));
    }

    #[test]
    fn erosion_radius_and_fallback() {
        let mut m = BitMask::new(200, 200);
        for x in 50..150 {
            for y in 50..150 {
                m.set(x, y, true);
            }
        }
        let b = AxisAlignedBox2::new(50.0, 50.0, 150.0, 150.0).unwrap();
        let e = erode_mask(&m, &b);
        assert_eq!(e.radius, 3);
        assert_eq!(e.mask.count(), 94 * 94);
        assert!(!e.fallback);

        let mut one = BitMask::new(10, 10);
        one.set(4, 5, true);
        let e = erode_mask(&one, &AxisAlignedBox2::new(4.0, 5.0, 5.0, 6.0).unwrap());
        assert!(e.fallback);
        assert_eq!(e.mask.pixels().collect::<Vec<_>>(), vec![(4, 5)]);
    }

    #[test]
    fn erosion_radius_is_clamped() {
        assert_eq!(erosion_radius(&AxisAlignedBox2::new(0.0, 0.0, 10.0, 10.0).unwrap()), 1);
        assert_eq!(erosion_radius(&AxisAlignedBox2::new(0.0, 0.0, 1000.0, 900.0).unwrap()), 8);
    }

    #[test]
    fn unprojection_follows_masks() {
        let camera = CameraModel::new(100.0, 100.0, 50.0, 50.0, 100, 100, Pose::identity()).unwrap();
        let mut mask = BitMask::new(100, 100);
        for x in 40..60 {
            for y in 40..60 {
                mask.set(x, y, true);
            }
        }
        let frame = FrameBundle {
            index: 0,
            ego_pose: Pose::identity(),
            points: vec![
                Point3::new(0.0, 0.0, 5.0),   // center pixel -> on mask
                Point3::new(4.0, 0.0, 5.0),   // pixel (130, 50) -> outside image
                Point3::new(0.0, 0.0, -5.0),  // behind
                Point3::new(0.5, 0.5, 5.0),   // (60, 60) -> off mask
            ],
            cameras: vec![CameraView {
                id: 0,
                camera,
                cues: vec![InstanceCue2D {
                    track_id: 4,
                    class_label: "car".into(),
                    box2d: AxisAlignedBox2::new(40.0, 40.0, 60.0, 60.0).unwrap(),
                    mask: mask.encode(),
                    score: 0.8,
                }],
            }],
        };
        let u = unproject_instances(&frame, false);
        assert_eq!(u.instances.len(), 1);
        assert_eq!(u.point_indices[0], vec![0]);
        assert_eq!(u.instances[0].track_id, 4);
    }

    #[test]
    fn refine_identity_and_disjoint() {
        let f = inst(1, &[(0.0, 0.0, 0.0), (0.05, 0.0, 0.0), (0.1, 0.0, 0.0)]);
        let same = f.points.clone();
        let far: Vec<Point3> = same.iter().map(|p| Point3::new(p.x + 10.0, p.y, p.z)).collect();
        let out = context_aware_refine(&[same.clone(), far], &[f], &RefineParams::default());
        assert_eq!(out.assignments, vec![Some(1), None]);
        assert!(out.instances[0].refined);
        assert_eq!(out.instances[0].points, same);
    }

    #[test]
    fn refine_worked_example() {
        let r = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(0.05, 0.0, 0.0), Point3::new(10.0, 0.0, 0.0)];
        let f = inst(9, &[(0.02, 0.0, 0.0), (0.04, 0.01, 0.0)]);
        let grid = HashGrid::new(&f.points, 0.1);
        assert_eq!(inclusion_counts(&r, &grid, 0.1, false), (2, 2));
        let out = context_aware_refine(&[r.clone()], &[f], &RefineParams::default());
        assert_eq!(out.assignments, vec![Some(9)]);
        assert_eq!(out.instances[0].points.len(), 3);
    }

    #[test]
    fn unassigned_instance_is_kept_unrefined() {
        let f = inst(2, &[(0.0, 0.0, 0.0)]);
        let out = context_aware_refine(&[vec![Point3::new(5.0, 0.0, 0.0)]], &[f.clone()], &RefineParams::default());
        assert!(!out.instances[0].refined);
        assert_eq!(out.instances[0].points, f.points);
    }

    #[test]
    fn tie_goes_to_lower_track_id() {
        let pts = [(0.0, 0.0, 0.0), (0.05, 0.0, 0.0)];
        let a = inst(8, &pts);
        let b = inst(3, &pts);
        let cluster: Vec<Point3> = a.points.clone();
        let out = context_aware_refine(&[cluster.clone()], &[a.clone(), b.clone()], &RefineParams::default());
        assert_eq!(out.assignments, vec![Some(3)]);
        let swapped = context_aware_refine(&[cluster], &[b, a], &RefineParams::default());
        assert_eq!(swapped.assignments, out.assignments);
        assert_eq!(swapped.instances, out.instances);
    }

    #[test]
    fn symmetric_switch_changes_second_ratio() {
        // One cluster point near many instance points: n = 1 but m = 10.
        let r: Vec<Point3> = vec![Point3::new(0.0, 0.0, 0.0), Point3::new(3.0, 0.0, 0.0)];
        let f = inst(1, &(0..10).map(|i| (i as f64 * 0.005, 0.0, 0.0)).collect::<Vec<_>>());
        let grid = HashGrid::new(&f.points, 0.1);
        assert_eq!(inclusion_counts(&r, &grid, 0.1, false), (1, 1));
        assert_eq!(inclusion_counts(&r, &grid, 0.1, true), (1, 10));
        let sym = RefineParams {
            symmetric: true,
            ..Default::default()
        };
        assert_eq!(context_aware_refine(&[r.clone()], &[f.clone()], &RefineParams::default()).assignments, vec![None]);
        assert_eq!(context_aware_refine(&[r], &[f], &sym).assignments, vec![Some(1)]);
    }
}
