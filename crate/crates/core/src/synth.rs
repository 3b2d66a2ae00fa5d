//! Deterministic synthetic scenes with exact ground truth.
//!
//! A ray-cast LiDAR sweeps a fixed azimuth/elevation grid against a flat
//! ground, box-shaped objects and vertical walls. Cameras render instance
//! masks by casting a ray through each pixel center, and 2D boxes by
//! projecting the true 3D box. Walls can be marked transparent to cameras,
//! which reproduces LiDAR returns from glass in front of a visible object.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use crate::boxfit::projected_hull;
use crate::error::{Error, Result};
use crate::geometry::{bev_intersection_area, AxisAlignedBox2, CameraModel, OrientedBox3, Point3, Pose, Vec3};
use crate::mask::BitMask;
use crate::scene::{
    load_sequence, read_annotations, write_annotations, write_json, write_priors, write_sequence, Annotation,
    CameraView, ClassPriors, FrameBundle, InstanceCue2D, MotionState, PhysicalType,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MotionProfile {
    Parked,
    /// Moves along its heading by `speed` meters per frame.
    ConstantVelocity { speed: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub class_label: String,
    /// Footprint center at frame 0.
    pub center: [f64; 2],
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub yaw: f64,
    /// Gap between the ground and the lowest LiDAR-visible surface.
    #[serde(default)]
    pub ground_clearance: f64,
    pub motion: MotionProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EgoSpec {
    pub start: [f64; 2],
    pub yaw: f64,
    /// Meters per frame along the heading.
    pub speed: f64,
    /// Radians per frame.
    pub yaw_rate: f64,
    pub sensor_height: f64,
}

impl Default for EgoSpec {
    fn default() -> Self {
        Self {
            start: [0.0, 0.0],
            yaw: 0.0,
            speed: 0.3,
            yaw_rate: 0.0,
            sensor_height: 1.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    pub max_range: f64,
    pub azimuth_step_deg: f64,
    pub beams: usize,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    /// Standard deviation of additive range noise (m).
    pub noise_sigma: f64,
    /// Fraction of ground returns pushed below the ground surface.
    pub subground_noise_fraction: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        Self {
            max_range: 60.0,
            azimuth_step_deg: 0.2,
            beams: 32,
            elevation_min_deg: -25.0,
            elevation_max_deg: 5.0,
            noise_sigma: 0.01,
            subground_noise_fraction: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraSpec {
    /// Viewing direction relative to the ego heading.
    pub yaw_deg: f64,
    pub hfov_deg: f64,
    pub width: u32,
    pub height: u32,
    /// Optical center in the sensor frame.
    pub offset: [f64; 3],
}

impl CameraSpec {
    /// Four horizontal cameras at right angles, slightly offset from the LiDAR.
    pub fn surround() -> Vec<CameraSpec> {
        [0.0f64, 90.0, 180.0, 270.0]
            .iter()
            .map(|&yaw_deg| {
                let (s, c) = yaw_deg.to_radians().sin_cos();
                CameraSpec {
                    yaw_deg,
                    hfov_deg: 100.0,
                    width: 800,
                    height: 450,
                    offset: [0.3 * c, 0.3 * s, -0.3],
                }
            })
            .collect()
    }

    pub fn model(&self) -> Result<CameraModel> {
        let f = 0.5 * self.width as f64 / (0.5 * self.hfov_deg.to_radians()).tan();
        let (s, c) = self.yaw_deg.to_radians().sin_cos();
        // Rows are the camera axes (right, down, forward) in the sensor frame.
        let r = nalgebra::Matrix3::new(s, -c, 0.0, 0.0, 0.0, -1.0, c, s, 0.0);
        let center = Vec3::new(self.offset[0], self.offset[1], self.offset[2]);
        let ext = Pose::new(r, -(r * center))?;
        CameraModel::new(f, f, 0.5 * self.width as f64, 0.5 * self.height as f64, self.width, self.height, ext)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WallSpec {
    pub start: [f64; 2],
    pub end: [f64; 2],
    pub height: f64,
    /// Open intervals along the wall, in meters from `start`.
    #[serde(default)]
    pub gaps: Vec<[f64; 2]>,
    /// Seen by the LiDAR but not by cameras (glass).
    #[serde(default)]
    pub camera_transparent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SceneSpec {
    pub seed: u64,
    pub frames: usize,
    pub ego: EgoSpec,
    pub objects: Vec<ObjectSpec>,
    pub sensor: SensorSpec,
    pub cameras: Vec<CameraSpec>,
    pub walls: Vec<WallSpec>,
    /// Mask growth in pixels, mimicking segmentation bleed at edges.
    pub mask_dilation_px: u32,
    /// Cue scores are drawn uniformly from this range.
    pub score_range: [f64; 2],
    /// Minimum mask pixels for a cue to be emitted.
    pub min_mask_pixels: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 10,
            ego: EgoSpec::default(),
            objects: Vec::new(),
            sensor: SensorSpec::default(),
            cameras: CameraSpec::surround(),
            walls: Vec::new(),
            mask_dilation_px: 1,
            score_range: [0.6, 1.0],
            min_mask_pixels: 20,
        }
    }
}

fn car(x: f64, y: f64, yaw: f64, motion: MotionProfile) -> ObjectSpec {
    ObjectSpec {
        class_label: "car".into(),
        center: [x, y],
        length: 4.5,
        width: 1.85,
        height: 1.6,
        yaw,
        ground_clearance: 0.15,
        motion,
    }
}

fn pedestrian(x: f64, y: f64, yaw: f64, motion: MotionProfile) -> ObjectSpec {
    ObjectSpec {
        class_label: "pedestrian".into(),
        center: [x, y],
        length: 0.6,
        width: 0.5,
        height: 1.75,
        yaw,
        ground_clearance: 0.0,
        motion,
    }
}

impl SceneSpec {
    /// Street scene with parked and moving cars, standing and walking
    /// pedestrians and a wall behind the parked row.
    pub fn street(seed: u64) -> Self {
        use MotionProfile::*;
        Self {
            seed,
            frames: 50,
            objects: vec![
                car(6.0, 6.0, 0.0, Parked),
                car(13.0, 6.2, 0.05, Parked),
                car(21.0, 6.0, -0.04, Parked),
                car(12.0, -7.0, 0.3, Parked),
                car(26.0, -6.5, PI / 2.0, Parked),
                car(-12.0, -2.5, 0.0, ConstantVelocity { speed: 0.8 }),
                car(45.0, 2.8, PI, ConstantVelocity { speed: 1.0 }),
                car(-6.0, -12.0, 0.0, ConstantVelocity { speed: 0.6 }),
                pedestrian(9.5, -5.0, 0.3, Parked),
                pedestrian(18.0, -5.0, 1.2, Parked),
                pedestrian(0.0, -5.5, 0.0, ConstantVelocity { speed: 0.12 }),
                pedestrian(31.0, 5.5, PI, ConstantVelocity { speed: 0.12 }),
            ],
            walls: vec![WallSpec {
                start: [-10.0, 8.5],
                end: [40.0, 8.5],
                height: 2.5,
                gaps: vec![[14.0, 16.0]],
                camera_transparent: false,
            }],
            ..Default::default()
        }
    }

    /// One parked car in front of a wall; mask bleed puts wall points in the
    /// car's mask.
    pub fn car_before_wall(seed: u64) -> Self {
        Self {
            seed,
            frames: 10,
            ego: EgoSpec {
                speed: 0.0,
                ..Default::default()
            },
            objects: vec![car(10.0, 4.0, 0.0, MotionProfile::Parked)],
            walls: vec![WallSpec {
                start: [0.0, 6.5],
                end: [25.0, 6.5],
                height: 3.0,
                gaps: vec![],
                camera_transparent: false,
            }],
            mask_dilation_px: 2,
            ..Default::default()
        }
    }

    /// A parked car seen through a glass pane: cameras see the car, the
    /// LiDAR partly hits the glass.
    pub fn car_behind_glass(seed: u64) -> Self {
        Self {
            seed,
            frames: 5,
            ego: EgoSpec {
                speed: 0.0,
                ..Default::default()
            },
            objects: vec![car(12.0, 0.0, 0.0, MotionProfile::Parked)],
            walls: vec![WallSpec {
                start: [8.0, -4.0],
                end: [8.0, 4.0],
                height: 1.0,
                gaps: vec![[3.5, 4.5]],
                camera_transparent: true,
            }],
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SceneSpec(m));
        if self.frames == 0 {
            return bad("frames must be positive".into());
        }
        let s = &self.sensor;
        if !(s.max_range > 0.0 && s.azimuth_step_deg > 0.0 && s.beams >= 1 && s.noise_sigma >= 0.0) {
            return bad("invalid sensor".into());
        }
        if s.elevation_max_deg < s.elevation_min_deg {
            return bad("elevation range is reversed".into());
        }
        if !(0.0..=1.0).contains(&s.subground_noise_fraction) {
            return bad("subground_noise_fraction must lie in [0, 1]".into());
        }
        if !(self.score_range[0] >= 0.0 && self.score_range[0] <= self.score_range[1] && self.score_range[1] <= 1.0) {
            return bad("score_range must satisfy 0 <= lo <= hi <= 1".into());
        }
        for (i, o) in self.objects.iter().enumerate() {
            if !(o.length > 0.0 && o.width > 0.0 && o.height > o.ground_clearance && o.ground_clearance >= 0.0) {
                return bad(format!("object {i} has invalid dimensions"));
            }
        }
        for c in &self.cameras {
            if !(c.hfov_deg > 0.0 && c.hfov_deg < 180.0 && c.width > 0 && c.height > 0) {
                return bad("invalid camera".into());
            }
        }
        for t in 0..self.frames {
            let boxes: Vec<OrientedBox3> = (0..self.objects.len()).map(|i| self.object_box(i, t)).collect::<Result<_>>()?;
            for i in 0..boxes.len() {
                for j in i + 1..boxes.len() {
                    if bev_intersection_area(&boxes[i], &boxes[j]) > 1e-9 {
                        return bad(format!("objects {i} and {j} overlap in frame {t}"));
                    }
                }
            }
        }
        Ok(())
    }

    /// True box of object `i` at frame `t`, global frame.
    pub fn object_box(&self, i: usize, t: usize) -> Result<OrientedBox3> {
        let o = &self.objects[i];
        let travel = match o.motion {
            MotionProfile::Parked => 0.0,
            MotionProfile::ConstantVelocity { speed } => speed * t as f64,
        };
        let (s, c) = o.yaw.sin_cos();
        let center = Point3::new(o.center[0] + travel * c, o.center[1] + travel * s, 0.5 * o.height);
        OrientedBox3::new(center, o.length, o.width, o.height, o.yaw)
    }

    /// Sensor-to-global pose at frame `t`.
    pub fn ego_pose(&self, t: usize) -> Pose {
        let e = &self.ego;
        let (mut x, mut y, mut yaw) = (e.start[0], e.start[1], e.yaw);
        for _ in 0..t {
            x += e.speed * yaw.cos();
            y += e.speed * yaw.sin();
            yaw += e.yaw_rate;
        }
        Pose::from_yaw(yaw, Vec3::new(x, y, e.sensor_height))
    }

    pub fn track_id(i: usize) -> u64 {
        i as u64 + 1
    }
}

/// Point labels written next to the truth annotations.
pub const LABEL_GROUND: i32 = -1;
pub const LABEL_WALL: i32 = -2;

#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub frames: Vec<FrameBundle>,
    /// Per frame, per point: a track id, [`LABEL_GROUND`] or [`LABEL_WALL`].
    pub labels: Vec<Vec<i32>>,
    pub truth: Vec<Annotation>,
    pub priors: ClassPriors,
}

/// Ray entry distance into an oriented box restricted to `z in [z_lo, z_hi]`.
/// Rays starting inside the box never hit it.
fn ray_box(o: &Point3, d: &Vec3, b: &OrientedBox3, z_lo: f64, z_hi: f64) -> Option<f64> {
    let lo = b.to_local(o);
    let (s, c) = b.yaw().sin_cos();
    let dl = Vec3::new(d.x * c + d.y * s, -d.x * s + d.y * c, d.z);
    let cz = b.center().z;
    let bounds = [
        (-0.5 * b.length(), 0.5 * b.length()),
        (-0.5 * b.width(), 0.5 * b.width()),
        (z_lo - cz, z_hi - cz),
    ];
    let (mut t0, mut t1) = (f64::MIN, f64::MAX);
    for k in 0..3 {
        let (a, bb) = bounds[k];
        if dl[k].abs() < 1e-15 {
            if lo[k] < a || lo[k] > bb {
                return None;
            }
            continue;
        }
        let ta = (a - lo[k]) / dl[k];
        let tb = (bb - lo[k]) / dl[k];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    (t0 <= t1 && t0 > 1e-9).then_some(t0)
}

fn ray_wall(o: &Point3, d: &Vec3, w: &WallSpec) -> Option<f64> {
    let a = Vec3::new(w.start[0], w.start[1], 0.0);
    let along = Vec3::new(w.end[0] - w.start[0], w.end[1] - w.start[1], 0.0);
    let len = along.norm();
    let u = along / len;
    let n = Vec3::new(-u.y, u.x, 0.0);
    let denom = d.dot(&n);
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = (a - o.coords).dot(&n) / denom;
    if t <= 1e-9 {
        return None;
    }
    let p = o + d * t;
    let s = (p.coords - a).dot(&u);
    if s < 0.0 || s > len || p.z < 0.0 || p.z > w.height {
        return None;
    }
    if w.gaps.iter().any(|g| s > g[0] && s < g[1]) {
        return None;
    }
    Some(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Hit {
    Object(usize),
    Wall,
    Ground,
}

/// Closest hit along a ray. `camera` selects full object boxes and skips
/// camera-transparent walls and the ground.
fn cast(o: &Point3, d: &Vec3, boxes: &[(OrientedBox3, f64)], walls: &[WallSpec], camera: bool, candidates: Option<&[usize]>) -> Option<(f64, Hit)> {
    let mut best: Option<(f64, Hit)> = None;
    let mut consider = |t: f64, h: Hit| {
        if best.is_none_or(|(bt, _)| t < bt) {
            best = Some((t, h));
        }
    };
    let mut test = |i: usize| {
        let (b, clearance) = &boxes[i];
        let z_lo = if camera { b.bottom_z() } else { b.bottom_z() + clearance };
        if let Some(t) = ray_box(o, d, b, z_lo, b.top_z()) {
            consider(t, Hit::Object(i));
        }
    };
    match candidates {
        Some(ids) => ids.iter().for_each(|&i| test(i)),
        None => (0..boxes.len()).for_each(&mut test),
    }
    for w in walls {
        if camera && w.camera_transparent {
            continue;
        }
        if let Some(t) = ray_wall(o, d, w) {
            consider(t, Hit::Wall);
        }
    }
    if !camera && d.z < 0.0 {
        consider(-o.z / d.z, Hit::Ground);
    }
    best
}

/// Renders the visible-pixel mask of every object in one camera.
fn render_masks(
    camera: &CameraModel,
    sensor_to_world: &Pose,
    world_to_sensor: &Pose,
    boxes: &[(OrientedBox3, f64)],
    walls: &[WallSpec],
) -> Vec<Option<(AxisAlignedBox2, BitMask)>> {
    let hulls: Vec<Option<AxisAlignedBox2>> = boxes
        .iter()
        .map(|(b, _)| projected_hull(b, camera, world_to_sensor).map(|(h, _)| h))
        .collect();
    let mut masks: Vec<Option<BitMask>> = hulls.iter().map(|h| h.map(|_| BitMask::new(camera.width, camera.height))).collect();
    let Some(region) = hulls.iter().flatten().copied().reduce(|a, b| AxisAlignedBox2 {
        x1: a.x1.min(b.x1),
        y1: a.y1.min(b.y1),
        x2: a.x2.max(b.x2),
        y2: a.y2.max(b.y2),
    }) else {
        return vec![None; boxes.len()];
    };
    let origin = sensor_to_world.apply(&camera.center_in_sensor());
    let mut ids = Vec::new();
    for y in region.y1.floor() as u32..(region.y2.ceil() as u32).min(camera.height) {
        for x in region.x1.floor() as u32..(region.x2.ceil() as u32).min(camera.width) {
            let (u, v) = (x as f64 + 0.5, y as f64 + 0.5);
            ids.clear();
            ids.extend(
                hulls
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| h.is_some_and(|h| u >= h.x1 && u <= h.x2 && v >= h.y1 && v <= h.y2))
                    .map(|(i, _)| i),
            );
            if ids.is_empty() {
                continue;
            }
            let d = sensor_to_world.apply_vector(&camera.pixel_ray(u, v));
            if let Some((_, Hit::Object(i))) = cast(&origin, &d, boxes, walls, true, Some(&ids)) {
                masks[i].as_mut().unwrap().set(x, y, true);
            }
        }
    }
    hulls
        .into_iter()
        .zip(masks)
        .map(|(h, m)| Some((h?, m?)))
        .collect()
}

/// Pixels of `mask` inside the pixel footprint of `b`.
fn clip_mask(mask: &BitMask, b: &AxisAlignedBox2) -> BitMask {
    let mut out = BitMask::new(mask.width(), mask.height());
    for (x, y) in mask.pixels() {
        if (x as f64) >= b.x1.floor() && (x as f64) < b.x2.ceil() && (y as f64) >= b.y1.floor() && (y as f64) < b.y2.ceil() {
            out.set(x, y, true);
        }
    }
    out
}

/// Generates a scene in memory.
pub fn generate(spec: &SceneSpec) -> Result<GeneratedScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sensor.noise_sigma.max(1e-300)).expect("valid sigma");
    let priors = ClassPriors::defaults();
    let cameras: Vec<CameraModel> = spec.cameras.iter().map(|c| c.model()).collect::<Result<_>>()?;
    let s = &spec.sensor;
    let n_az = (360.0 / s.azimuth_step_deg).round() as usize;
    let elevations: Vec<f64> = (0..s.beams)
        .map(|b| {
            let f = if s.beams == 1 { 0.0 } else { b as f64 / (s.beams - 1) as f64 };
            (s.elevation_min_deg + f * (s.elevation_max_deg - s.elevation_min_deg)).to_radians()
        })
        .collect();

    let mut frames = Vec::with_capacity(spec.frames);
    let mut labels = Vec::with_capacity(spec.frames);
    let mut truth = Vec::new();
    for t in 0..spec.frames {
        let pose = spec.ego_pose(t);
        let inv = pose.inverse();
        let origin = Point3::from(*pose.translation());
        let boxes: Vec<(OrientedBox3, f64)> = (0..spec.objects.len())
            .map(|i| Ok((spec.object_box(i, t)?, spec.objects[i].ground_clearance)))
            .collect::<Result<_>>()?;

        let mut points = Vec::new();
        let mut point_labels = Vec::new();
        let mut hits_per_object = vec![0usize; boxes.len()];
        let ego_yaw = pose.yaw();
        for a in 0..n_az {
            let az = ego_yaw + (a as f64 * s.azimuth_step_deg).to_radians();
            let (sa, ca) = az.sin_cos();
            for &el in &elevations {
                let (se, ce) = el.sin_cos();
                let d = Vec3::new(ce * ca, ce * sa, se);
                let Some((range, hit)) = cast(&origin, &d, &boxes, &spec.walls, false, None) else {
                    continue;
                };
                if range > s.max_range {
                    continue;
                }
                let r = if s.noise_sigma > 0.0 { range + rng.sample(noise) } else { range };
                let mut p = origin + d * r;
                let label = match hit {
                    Hit::Object(i) => {
                        hits_per_object[i] += 1;
                        SceneSpec::track_id(i) as i32
                    }
                    Hit::Wall => LABEL_WALL,
                    Hit::Ground => {
                        if s.subground_noise_fraction > 0.0 && rng.random::<f64>() < s.subground_noise_fraction {
                            p.z -= rng.random_range(0.1..0.5);
                        }
                        LABEL_GROUND
                    }
                };
                points.push(inv.apply(&p));
                point_labels.push(label);
            }
        }

        let mut views = Vec::with_capacity(cameras.len());
        let mut has_cue = vec![false; boxes.len()];
        for (j, cam) in cameras.iter().enumerate() {
            let rendered = render_masks(cam, &pose, &inv, &boxes, &spec.walls);
            let mut cues = Vec::new();
            for (i, r) in rendered.into_iter().enumerate() {
                let Some((box2d, mask)) = r else { continue };
                if mask.count() < spec.min_mask_pixels {
                    continue;
                }
                let grown = clip_mask(&mask.dilated(spec.mask_dilation_px), &box2d);
                let score = rng.random_range(spec.score_range[0]..=spec.score_range[1]);
                has_cue[i] = true;
                cues.push(InstanceCue2D {
                    track_id: SceneSpec::track_id(i),
                    class_label: spec.objects[i].class_label.clone(),
                    box2d,
                    mask: grown.encode(),
                    score,
                });
            }
            views.push(CameraView {
                id: j as u32,
                camera: cam.clone(),
                cues,
            });
        }

        for (i, (b, _)) in boxes.iter().enumerate() {
            if hits_per_object[i] < 3 || !has_cue[i] {
                continue;
            }
            let o = &spec.objects[i];
            let motion_state = match o.motion {
                MotionProfile::Parked => MotionState::Static,
                MotionProfile::ConstantVelocity { .. } => MotionState::Dynamic,
            };
            let (prior, _) = priors.lookup(&o.class_label);
            truth.push(Annotation {
                frame: t as u64,
                track_id: SceneSpec::track_id(i),
                class_label: o.class_label.clone(),
                box3: *b,
                score: 1.0,
                motion_state,
                physical_type: PhysicalType::from_parts(prior.rigidity, motion_state),
                provenance: "truth".into(),
                flags: vec![],
            });
        }
        frames.push(FrameBundle {
            index: t as u64,
            ego_pose: pose,
            points,
            cameras: views,
        });
        labels.push(point_labels);
    }
    Ok(GeneratedScene {
        frames,
        labels,
        truth,
        priors,
    })
}

/// Generates a scene and writes it to `dir`: the scene layout plus
/// `priors.json`, `spec.json`, `truth/annotations.json` and per-frame point
/// labels in `truth/labels/<frame>.bin` (little-endian i32).
pub fn generate_to_dir(spec: &SceneSpec, dir: &Path) -> Result<GeneratedScene> {
    let scene = generate(spec)?;
    write_sequence(dir, &scene.frames)?;
    write_priors(&dir.join("priors.json"), &scene.priors)?;
    write_json(&dir.join("spec.json"), spec)?;
    let truth_dir = dir.join("truth");
    let label_dir = truth_dir.join("labels");
    fs::create_dir_all(&label_dir).map_err(|e| Error::io(&label_dir, e))?;
    write_annotations(&scene.truth, &truth_dir.join("annotations.json"))?;
    for (f, l) in scene.frames.iter().zip(&scene.labels) {
        let path = label_dir.join(format!("{}.bin", f.index));
        let bytes: Vec<u8> = l.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(scene)
}

pub fn read_labels(path: &Path) -> Result<Vec<i32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::parse(path, "label file length is not a multiple of 4"));
    }
    Ok(bytes.chunks_exact(4).map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
}

pub fn load_spec(path: &Path) -> Result<SceneSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SceneSpec = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct OracleReport {
    pub frames: usize,
    pub object_points: usize,
    /// Object points whose projection fell inside an image with a cue.
    pub projected: usize,
    pub occluded: usize,
    pub violations: Vec<String>,
}

impl OracleReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// True when another surface lies between `eye` and `point` (both global),
/// which is on object `object`.
fn hidden_from(eye: &Point3, point: &Point3, object: usize, boxes: &[(OrientedBox3, f64)], walls: &[WallSpec]) -> bool {
    let ray = point - eye;
    let dist = ray.norm();
    cast(eye, &(ray / dist), boxes, walls, true, None).is_some_and(|(d, h)| h != Hit::Object(object) && d < dist - 1e-6)
}

/// Whether a sensor-frame point on object `object` at frame `t` is seen by
/// `camera`: it projects into the image and nothing else is in the way.
pub fn camera_sees(spec: &SceneSpec, t: usize, camera: &CameraModel, point: &Point3, object: usize) -> Result<bool> {
    if camera.project(point).is_none() {
        return Ok(false);
    }
    let boxes: Vec<(OrientedBox3, f64)> = (0..spec.objects.len())
        .map(|i| Ok((spec.object_box(i, t)?, spec.objects[i].ground_clearance)))
        .collect::<Result<_>>()?;
    let pose = spec.ego_pose(t);
    let eye = pose.apply(&camera.center_in_sensor());
    Ok(!hidden_from(&eye, &pose.apply(point), object, &boxes, &spec.walls))
}

/// Checks a generated scene directory: truth boxes are canonical, every
/// object point that projects into a camera with a cue for its track falls
/// on the mask (within one pixel) unless another surface hides it from that
/// camera.
pub fn oracle_check(dir: &Path) -> Result<OracleReport> {
    let spec = load_spec(&dir.join("spec.json"))?;
    let frames = load_sequence(dir)?;
    let truth = read_annotations(&dir.join("truth").join("annotations.json"))?;
    let mut report = OracleReport {
        frames: frames.len(),
        ..Default::default()
    };
    for a in &truth {
        let b = &a.box3;
        let canonical = b.length() >= b.width() && b.height() > 0.0 && (-PI..PI).contains(&b.yaw());
        if !canonical {
            report.violations.push(format!("frame {} track {}: truth box is not canonical", a.frame, a.track_id));
        }
    }
    for frame in &frames {
        let t = frame.index as usize;
        let labels = read_labels(&dir.join("truth").join("labels").join(format!("{t}.bin")))?;
        if labels.len() != frame.points.len() {
            report.violations.push(format!("frame {t}: {} labels for {} points", labels.len(), frame.points.len()));
            continue;
        }
        let boxes: Vec<(OrientedBox3, f64)> = (0..spec.objects.len())
            .map(|i| Ok((spec.object_box(i, t)?, spec.objects[i].ground_clearance)))
            .collect::<Result<_>>()?;
        for view in &frame.cameras {
            let masks: Vec<(u64, BitMask)> = view
                .cues
                .iter()
                .filter_map(|c| c.mask.decode().ok().map(|m| (c.track_id, m)))
                .collect();
            let cam_origin = frame.ego_pose.apply(&view.camera.center_in_sensor());
            for (p, &label) in frame.points.iter().zip(&labels) {
                if label <= 0 {
                    continue;
                }
                let Some((_, mask)) = masks.iter().find(|(id, _)| *id == label as u64) else { continue };
                let Some(px) = view.camera.project(p) else { continue };
                report.projected += 1;
                let (x, y) = (px.u as i64, px.v as i64);
                let hit = (-1..=1).any(|dx| {
                    (-1..=1).any(|dy| {
                        let (xx, yy) = (x + dx, y + dy);
                        xx >= 0 && yy >= 0 && mask.get(xx as u32, yy as u32)
                    })
                });
                if hit {
                    continue;
                }
                let blocked = hidden_from(&cam_origin, &frame.ego_pose.apply(p), label as usize - 1, &boxes, &spec.walls);
                if blocked {
                    report.occluded += 1;
                } else {
                    report.violations.push(format!(
                        "frame {t} camera {} track {label}: point {:?} misses its mask",
                        view.id,
                        p.coords.as_slice()
                    ));
                }
            }
        }
        report.object_points += labels.iter().filter(|&&l| l > 0).count();
    }
    Ok(report)
}
