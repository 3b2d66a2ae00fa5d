//! Candidate selection by agreement between projected 3D boxes and 2D cues.

use crate::config::IouAggregation;
use crate::geometry::{iou2d, normalize_angle, AxisAlignedBox2, CameraModel, OrientedBox3, PixelCoord, Point3, Pose};

/// Depth of the clipping plane in front of the camera (m).
const NEAR: f64 = 0.05;

const EDGES: [(usize, usize); 12] = [
    (0, 1),
    (1, 2),
    (2, 3),
    (3, 0),
    (4, 5),
    (5, 6),
    (6, 7),
    (7, 4),
    (0, 4),
    (1, 5),
    (2, 6),
    (3, 7),
];

/// One 2D observation of a track: the cue box in a camera of some frame.
#[derive(Debug, Clone, Copy)]
pub struct CueView<'a> {
    pub camera: &'a CameraModel,
    /// Global to sensor for the frame the cue belongs to.
    pub world_to_sensor: Pose,
    pub box2d: AxisAlignedBox2,
}

/// Image-space hull of a global-frame box, with edges clipped at the near
/// plane and the result clipped to the image. The flag reports whether any
/// box corner itself projects inside the image.
pub fn projected_hull(b: &OrientedBox3, camera: &CameraModel, world_to_sensor: &Pose) -> Option<(AxisAlignedBox2, bool)> {
    let cam: Vec<Point3> = b
        .corners()
        .iter()
        .map(|c| camera.extrinsics.apply(&world_to_sensor.apply(c)))
        .collect();
    let mut pixels: Vec<PixelCoord> = Vec::with_capacity(20);
    let mut corner_inside = false;
    for p in &cam {
        if p.z >= NEAR {
            let px = camera.project_camera_frame(p)?;
            corner_inside |= camera.contains(&px);
            pixels.push(px);
        }
    }
    for &(i, j) in &EDGES {
        let (a, c) = (cam[i], cam[j]);
        if (a.z < NEAR) != (c.z < NEAR) {
            let t = (NEAR - a.z) / (c.z - a.z);
            let p = a + (c - a) * t;
            pixels.extend(camera.project_camera_frame(&Point3::new(p.x, p.y, NEAR)));
        }
    }
    let hull = AxisAlignedBox2::hull(pixels)?.clip_to_image(camera.width, camera.height)?;
    Some((hull, corner_inside))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub box3: OrientedBox3,
    pub index: usize,
    /// Aggregated IoU of the chosen candidate, absent when unverified.
    pub score: Option<f64>,
    pub verified: bool,
}

fn yaw_gap(a: f64, b: f64) -> f64 {
    // Boxes are symmetric under a half turn.
    let d = normalize_angle(a - b).abs();
    d.min(std::f64::consts::PI - d)
}

/// Picks the candidate whose projections best match the 2D cue boxes. A view
/// qualifies when some candidate has a corner inside the image; within a
/// qualifying view a candidate without a visible hull scores zero. Ties go
/// to the candidate closer in yaw to `reference_yaw`.
pub fn iou_align_select(
    candidates: &[OrientedBox3],
    views: &[CueView],
    reference_yaw: f64,
    aggregation: IouAggregation,
) -> Option<Selection> {
    let first = *candidates.first()?;
    if candidates.len() == 1 {
        return Some(Selection {
            box3: first,
            index: 0,
            score: None,
            verified: true,
        });
    }
    let mut per_candidate: Vec<Vec<f64>> = vec![Vec::new(); candidates.len()];
    for view in views {
        let hulls: Vec<Option<(AxisAlignedBox2, bool)>> = candidates
            .iter()
            .map(|c| projected_hull(c, view.camera, &view.world_to_sensor))
            .collect();
        if !hulls.iter().flatten().any(|(_, inside)| *inside) {
            continue;
        }
        for (scores, hull) in per_candidate.iter_mut().zip(&hulls) {
            scores.push(hull.map_or(0.0, |(h, _)| iou2d(&h, &view.box2d)));
        }
    }
    if per_candidate[0].is_empty() {
        return Some(Selection {
            box3: first,
            index: 0,
            score: None,
            verified: false,
        });
    }
    let aggregate = |s: &[f64]| match aggregation {
        IouAggregation::Mean => s.iter().sum::<f64>() / s.len() as f64,
        IouAggregation::Max => s.iter().copied().fold(0.0, f64::max),
    };
    let mut best = 0;
    let mut best_score = aggregate(&per_candidate[0]);
    for (i, scores) in per_candidate.iter().enumerate().skip(1) {
        let s = aggregate(scores);
        let closer = yaw_gap(candidates[i].yaw(), reference_yaw) < yaw_gap(candidates[best].yaw(), reference_yaw);
        if s > best_score || (s == best_score && closer) {
            best = i;
            best_score = s;
        }
    }
    Some(Selection {
        box3: candidates[best],
        index: best,
        score: Some(best_score),
        verified: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use nalgebra::Matrix3;

    /// Forward-looking camera at the sensor origin: camera z along sensor x.
    fn front_camera() -> CameraModel {
        let r = Matrix3::new(0.0, -1.0, 0.0, 0.0, 0.0, -1.0, 1.0, 0.0, 0.0);
        let ext = Pose::new(r, Vec3::zeros()).unwrap();
        CameraModel::new(400.0, 400.0, 400.0, 225.0, 800, 450, ext).unwrap()
    }

    #[test]
    fn single_candidate_unchanged() {
        let b = OrientedBox3::new(Point3::new(10.0, 0.0, 1.0), 4.0, 2.0, 1.5, 0.0).unwrap();
        let s = iou_align_select(&[b], &[], 0.0, IouAggregation::Mean).unwrap();
        assert_eq!(s.box3, b);
        assert!(s.verified);
    }

    #[test]
    fn picks_true_orientation() {
        let cam = front_camera();
        let truth = OrientedBox3::new(Point3::new(12.0, 2.0, 0.8), 4.6, 1.8, 1.6, 0.0).unwrap();
        let rotated = OrientedBox3::new(truth.center(), 4.6, 1.8, 1.6, std::f64::consts::FRAC_PI_2).unwrap();
        let (cue, _) = projected_hull(&truth, &cam, &Pose::identity()).unwrap();
        let views = [CueView {
            camera: &cam,
            world_to_sensor: Pose::identity(),
            box2d: cue,
        }];
        let s = iou_align_select(&[rotated, truth], &views, 0.0, IouAggregation::Mean).unwrap();
        assert_eq!(s.index, 1);
        assert!((s.score.unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn behind_camera_is_unverified() {
        let cam = front_camera();
        let a = OrientedBox3::new(Point3::new(-10.0, 0.0, 0.8), 4.6, 1.8, 1.6, 0.0).unwrap();
        let b = OrientedBox3::new(Point3::new(-10.0, 0.0, 0.8), 4.6, 1.8, 1.6, 1.0).unwrap();
        let views = [CueView {
            camera: &cam,
            world_to_sensor: Pose::identity(),
            box2d: AxisAlignedBox2::new(0.0, 0.0, 10.0, 10.0).unwrap(),
        }];
        let s = iou_align_select(&[a, b], &views, 0.0, IouAggregation::Mean).unwrap();
        assert!(!s.verified);
        assert_eq!(s.index, 0);
    }

    #[test]
    fn straddling_box_is_clipped_at_near_plane() {
        let cam = front_camera();
        let b = OrientedBox3::new(Point3::new(0.5, 0.0, 0.0), 4.0, 2.0, 1.0, 0.0).unwrap();
        let (hull, _) = projected_hull(&b, &cam, &Pose::identity()).unwrap();
        // The visible part is huge and fills the image.
        assert_eq!((hull.x1, hull.y1, hull.x2, hull.y2), (0.0, 0.0, 800.0, 450.0));
    }
}
