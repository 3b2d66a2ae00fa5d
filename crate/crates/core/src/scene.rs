//! On-disk scene layout, class priors and annotation documents.
//!
//! ```text
//! scene/frames/<t>/points.bin        little-endian f32 x,y,z triples (sensor frame)
//! scene/frames/<t>/pose.json         sensor -> global, row-major 4x4
//! scene/frames/<t>/cam<j>/calib.json intrinsics, image size, sensor -> camera 4x4
//! scene/frames/<t>/cam<j>/cues.json  2D instance cues with RLE masks
//! ```
//!
//! Every JSON document carries `format_version` (currently 1).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{AxisAlignedBox2, CameraModel, OrientedBox3, Point3, Pose};
use crate::mask::RleMask;

pub const FORMAT_VERSION: u32 = 1;

/// Rotations further than this from orthonormal are treated as corrupt.
pub const POSE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceCue2D {
    pub track_id: u64,
    pub class_label: String,
    pub box2d: AxisAlignedBox2,
    pub mask: RleMask,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub id: u32,
    pub camera: CameraModel,
    pub cues: Vec<InstanceCue2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameBundle {
    pub index: u64,
    /// Sensor to global.
    pub ego_pose: Pose,
    /// Sensor frame.
    pub points: Vec<Point3>,
    pub cameras: Vec<CameraView>,
}

impl FrameBundle {
    /// LiDAR origin in the global frame.
    pub fn sensor_origin(&self) -> Point3 {
        Point3::from(*self.ego_pose.translation())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rigidity {
    Rigid,
    Deformable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPrior {
    pub class_label: String,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    pub rigidity: Rigidity,
}

impl ClassPrior {
    pub fn new(label: &str, length: f64, width: f64, height: f64, rigidity: Rigidity) -> Self {
        Self {
            class_label: normalize_label(label),
            length,
            width,
            height,
            rigidity,
        }
    }

    /// Stand-in for classes missing from the table.
    pub fn generic() -> Self {
        Self::new("generic object", 1.0, 1.0, 1.0, Rigidity::Rigid)
    }

    /// Planar diagonal-based radius used when searching around an instance.
    pub fn footprint_radius(&self) -> f64 {
        0.5 * self.length.hypot(self.width)
    }
}

/// Class-label -> prior table.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassPriors {
    entries: BTreeMap<String, ClassPrior>,
    pub fallback: ClassPrior,
}

impl ClassPriors {
    pub fn new(priors: impl IntoIterator<Item = ClassPrior>) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for p in priors {
            validate_prior(&p).map_err(|m| Error::Config(m))?;
            let label = normalize_label(&p.class_label);
            if entries.contains_key(&label) {
                return Err(Error::Config(format!("duplicate class prior '{label}'")));
            }
            entries.insert(label.clone(), ClassPrior { class_label: label, ..p });
        }
        Ok(Self {
            entries,
            fallback: ClassPrior::generic(),
        })
    }

    /// Approximate per-class mean sizes of common driving-dataset labels.
    pub fn defaults() -> Self {
        use Rigidity::*;
        let table = [
            ("car", 4.6, 1.8, 1.7, Rigid),
            ("bus", 11.0, 2.9, 3.5, Rigid),
            ("truck", 6.9, 2.5, 2.8, Rigid),
            ("construction vehicle", 6.4, 2.9, 3.2, Rigid),
            ("trailer", 12.3, 2.9, 3.9, Rigid),
            ("barrier", 2.5, 0.5, 1.0, Rigid),
            ("traffic cone", 0.4, 0.4, 1.1, Rigid),
            ("fire hydrant", 0.4, 0.4, 0.8, Rigid),
            ("person", 0.75, 0.65, 1.75, Deformable),
            ("pedestrian", 0.75, 0.65, 1.75, Deformable),
            ("bicycle", 1.7, 0.6, 1.3, Deformable),
            ("motorcycle", 2.1, 0.8, 1.5, Deformable),
            ("dog", 0.9, 0.4, 0.6, Deformable),
            ("stroller", 1.0, 0.6, 1.1, Rigid),
        ];
        Self::new(table.iter().map(|&(l, a, b, c, r)| ClassPrior::new(l, a, b, c, r))).expect("default priors are valid")
    }

    /// Prior for `label` and whether the fallback was used.
    pub fn lookup(&self, label: &str) -> (&ClassPrior, bool) {
        match self.entries.get(&normalize_label(label)) {
            Some(p) => (p, false),
            None => (&self.fallback, true),
        }
    }

    pub fn get(&self, label: &str) -> Option<&ClassPrior> {
        self.entries.get(&normalize_label(label))
    }

    pub fn iter(&self) -> impl Iterator<Item = &ClassPrior> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn validate_prior(p: &ClassPrior) -> std::result::Result<(), String> {
    for (name, v) in [("length", p.length), ("width", p.width), ("height", p.height)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(format!("class '{}': {name} must be positive, got {v}", p.class_label));
        }
    }
    if p.class_label.trim().is_empty() {
        return Err("empty class label".into());
    }
    Ok(())
}

pub fn normalize_label(label: &str) -> String {
    label.trim().to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MotionState {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysicalType {
    StaticRigid,
    DynamicRigid,
    Deformable,
}

impl PhysicalType {
    pub fn from_parts(rigidity: Rigidity, motion: MotionState) -> Self {
        match (rigidity, motion) {
            (Rigidity::Deformable, _) => PhysicalType::Deformable,
            (Rigidity::Rigid, MotionState::Static) => PhysicalType::StaticRigid,
            (Rigidity::Rigid, MotionState::Dynamic) => PhysicalType::DynamicRigid,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PhysicalType::StaticRigid => "static_rigid",
            PhysicalType::DynamicRigid => "dynamic_rigid",
            PhysicalType::Deformable => "deformable",
        }
    }
}

/// One output box. `box3` lives in the global frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub frame: u64,
    pub track_id: u64,
    pub class_label: String,
    pub box3: OrientedBox3,
    pub score: f64,
    pub motion_state: MotionState,
    pub physical_type: PhysicalType,
    pub provenance: String,
    pub flags: Vec<String>,
}

// ---------------------------------------------------------------------------
// Serialized document shapes.

#[derive(Debug, Serialize, Deserialize)]
struct PoseDoc {
    format_version: u32,
    matrix: [f64; 16],
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibDoc {
    format_version: u32,
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: u32,
    height: u32,
    extrinsics: [f64; 16],
}

#[derive(Debug, Serialize, Deserialize)]
struct CueDoc {
    track_id: u64,
    class_label: String,
    box2d: [f64; 4],
    score: f64,
    mask: RleMask,
}

#[derive(Debug, Serialize, Deserialize)]
struct CuesDoc {
    format_version: u32,
    cues: Vec<CueDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorsDoc {
    format_version: u32,
    classes: Vec<PriorDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct PriorDoc {
    class_label: String,
    length: f64,
    width: f64,
    height: f64,
    rigidity: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct AnnotationDoc {
    frame: u64,
    track_id: u64,
    class_label: String,
    score: f64,
    center: [f64; 3],
    length: f64,
    width: f64,
    height: f64,
    yaw: f64,
    motion_state: MotionState,
    physical_type: PhysicalType,
    provenance: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    flags: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationsDoc {
    format_version: u32,
    annotations: Vec<AnnotationDoc>,
}

impl From<&Annotation> for AnnotationDoc {
    fn from(a: &Annotation) -> Self {
        let c = a.box3.center();
        Self {
            frame: a.frame,
            track_id: a.track_id,
            class_label: a.class_label.clone(),
            score: a.score,
            center: [c.x, c.y, c.z],
            length: a.box3.length(),
            width: a.box3.width(),
            height: a.box3.height(),
            yaw: a.box3.yaw(),
            motion_state: a.motion_state,
            physical_type: a.physical_type,
            provenance: a.provenance.clone(),
            flags: a.flags.clone(),
        }
    }
}

impl AnnotationDoc {
    fn into_annotation(self) -> std::result::Result<Annotation, String> {
        let [x, y, z] = self.center;
        let box3 = OrientedBox3::new(Point3::new(x, y, z), self.length, self.width, self.height, self.yaw)
            .map_err(|e| format!("frame {} track {}: {e}", self.frame, self.track_id))?;
        if !(0.0..=1.0).contains(&self.score) {
            return Err(format!("frame {} track {}: score {} outside [0, 1]", self.frame, self.track_id, self.score));
        }
        Ok(Annotation {
            frame: self.frame,
            track_id: self.track_id,
            class_label: normalize_label(&self.class_label),
            box3,
            score: self.score,
            motion_state: self.motion_state,
            physical_type: self.physical_type,
            provenance: self.provenance,
            flags: self.flags,
        })
    }
}

// ---------------------------------------------------------------------------
// Helpers.

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_slice(&bytes).map_err(|e| Error::parse(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn check_version(path: &Path, version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::validation(path, format!("unsupported format_version {version}")));
    }
    Ok(())
}

pub fn read_points(path: &Path) -> Result<Vec<Point3>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 12 != 0 {
        return Err(Error::validation(path, format!("{} bytes is not a multiple of 12", bytes.len())));
    }
    let mut points = Vec::with_capacity(bytes.len() / 12);
    for chunk in bytes.chunks_exact(12) {
        let f = |i: usize| f32::from_le_bytes(chunk[i..i + 4].try_into().unwrap()) as f64;
        let p = Point3::new(f(0), f(4), f(8));
        if !p.iter().all(|v| v.is_finite()) {
            return Err(Error::validation(path, "non-finite point coordinate"));
        }
        points.push(p);
    }
    Ok(points)
}

pub fn write_points(path: &Path, points: &[Point3]) -> Result<()> {
    let mut bytes = Vec::with_capacity(points.len() * 12);
    for p in points {
        for v in [p.x, p.y, p.z] {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn numbered_entries(dir: &Path, prefix: &str) -> Result<Vec<(u64, PathBuf)>> {
    let mut out = Vec::new();
    let rd = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in rd {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if !entry.path().is_dir() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(num) = name.strip_prefix(prefix).and_then(|s| s.parse::<u64>().ok()) {
            out.push((num, entry.path()));
        }
    }
    out.sort_by_key(|(n, _)| *n);
    Ok(out)
}

// ---------------------------------------------------------------------------
// Scene loading and writing.

/// Loads every frame under `scene/frames`, sorted by timestamp index. All
/// invariants are validated eagerly.
pub fn load_sequence(scene: &Path) -> Result<Vec<FrameBundle>> {
    let frames_dir = scene.join("frames");
    if !frames_dir.is_dir() {
        return Err(Error::NoFrames(scene.to_path_buf()));
    }
    let entries = numbered_entries(&frames_dir, "")?;
    if entries.is_empty() {
        return Err(Error::NoFrames(scene.to_path_buf()));
    }
    entries.par_iter().map(|(index, dir)| load_frame(*index, dir)).collect()
}

/// Ego poses of every frame, without loading points or cues.
pub fn load_poses(scene: &Path) -> Result<BTreeMap<u64, Pose>> {
    let frames_dir = scene.join("frames");
    if !frames_dir.is_dir() {
        return Err(Error::NoFrames(scene.to_path_buf()));
    }
    numbered_entries(&frames_dir, "")?
        .into_iter()
        .map(|(index, dir)| Ok((index, read_pose(&dir.join("pose.json"))?)))
        .collect()
}

fn read_pose(path: &Path) -> Result<Pose> {
    let doc: PoseDoc = read_json(path)?;
    check_version(path, doc.format_version)?;
    Pose::from_matrix4(&doc.matrix, POSE_TOLERANCE).map_err(|e| Error::validation(path, e))
}

fn load_frame(index: u64, dir: &Path) -> Result<FrameBundle> {
    let points = read_points(&dir.join("points.bin"))?;
    let ego_pose = read_pose(&dir.join("pose.json"))?;
    let mut cameras = Vec::new();
    for (id, cam_dir) in numbered_entries(dir, "cam")? {
        cameras.push(load_camera(id as u32, &cam_dir)?);
    }
    Ok(FrameBundle {
        index,
        ego_pose,
        points,
        cameras,
    })
}

fn load_camera(id: u32, dir: &Path) -> Result<CameraView> {
    let calib_path = dir.join("calib.json");
    let calib: CalibDoc = read_json(&calib_path)?;
    check_version(&calib_path, calib.format_version)?;
    let extrinsics = Pose::from_matrix4(&calib.extrinsics, POSE_TOLERANCE).map_err(|e| Error::validation(&calib_path, e))?;
    let camera = CameraModel::new(calib.fx, calib.fy, calib.cx, calib.cy, calib.width, calib.height, extrinsics)
        .map_err(|e| Error::validation(&calib_path, e))?;

    let cues_path = dir.join("cues.json");
    let doc: CuesDoc = read_json(&cues_path)?;
    check_version(&cues_path, doc.format_version)?;
    let mut seen = BTreeSet::new();
    let mut cues = Vec::with_capacity(doc.cues.len());
    for c in doc.cues {
        let fail = |m: String| Error::validation(&cues_path, format!("track {}: {m}", c.track_id));
        if !seen.insert(c.track_id) {
            return Err(fail("duplicate track_id in camera".into()));
        }
        let [x1, y1, x2, y2] = c.box2d;
        let box2d = AxisAlignedBox2::new(x1, y1, x2, y2).map_err(|e| fail(e.to_string()))?;
        if !(0.0..=1.0).contains(&c.score) {
            return Err(fail(format!("score {} outside [0, 1]", c.score)));
        }
        if c.mask.size != [camera.height, camera.width] {
            return Err(fail(format!(
                "mask size {:?} does not match image {}x{}",
                c.mask.size, camera.width, camera.height
            )));
        }
        let bits = c.mask.decode().map_err(|e| fail(e.0))?;
        if let Some(mb) = bits.bounding_box() {
            let allowed = box2d.dilate(2.0);
            if mb.x1 < allowed.x1 || mb.y1 < allowed.y1 || mb.x2 > allowed.x2 || mb.y2 > allowed.y2 {
                return Err(fail("mask extends beyond its 2D box".into()));
            }
        }
        cues.push(InstanceCue2D {
            track_id: c.track_id,
            class_label: normalize_label(&c.class_label),
            box2d,
            mask: c.mask,
            score: c.score,
        });
    }
    Ok(CameraView { id, camera, cues })
}

/// Writes frames in the layout read by [`load_sequence`].
pub fn write_sequence(scene: &Path, frames: &[FrameBundle]) -> Result<()> {
    for frame in frames {
        let dir = scene.join("frames").join(frame.index.to_string());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write_points(&dir.join("points.bin"), &frame.points)?;
        write_json(
            &dir.join("pose.json"),
            &PoseDoc {
                format_version: FORMAT_VERSION,
                matrix: frame.ego_pose.to_matrix4(),
            },
        )?;
        for view in &frame.cameras {
            let cam_dir = dir.join(format!("cam{}", view.id));
            fs::create_dir_all(&cam_dir).map_err(|e| Error::io(&cam_dir, e))?;
            let c = &view.camera;
            write_json(
                &cam_dir.join("calib.json"),
                &CalibDoc {
                    format_version: FORMAT_VERSION,
                    fx: c.fx,
                    fy: c.fy,
                    cx: c.cx,
                    cy: c.cy,
                    width: c.width,
                    height: c.height,
                    extrinsics: c.extrinsics.to_matrix4(),
                },
            )?;
            let cues = view
                .cues
                .iter()
                .map(|q| CueDoc {
                    track_id: q.track_id,
                    class_label: q.class_label.clone(),
                    box2d: [q.box2d.x1, q.box2d.y1, q.box2d.x2, q.box2d.y2],
                    score: q.score,
                    mask: q.mask.clone(),
                })
                .collect();
            write_json(
                &cam_dir.join("cues.json"),
                &CuesDoc {
                    format_version: FORMAT_VERSION,
                    cues,
                },
            )?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Priors.

pub fn load_priors(path: &Path) -> Result<ClassPriors> {
    let doc: PriorsDoc = read_json(path)?;
    check_version(path, doc.format_version)?;
    let mut priors = Vec::with_capacity(doc.classes.len());
    for c in doc.classes {
        let rigidity = match c.rigidity.trim().to_lowercase().as_str() {
            "rigid" => Rigidity::Rigid,
            "deformable" => Rigidity::Deformable,
            other => {
                return Err(Error::validation(
                    path,
                    format!("class '{}': unknown rigidity '{other}'", c.class_label),
                ))
            }
        };
        priors.push(ClassPrior::new(&c.class_label, c.length, c.width, c.height, rigidity));
    }
    ClassPriors::new(priors).map_err(|e| match e {
        Error::Config(m) => Error::validation(path, m),
        other => other,
    })
}

pub fn write_priors(path: &Path, priors: &ClassPriors) -> Result<()> {
    let classes = priors
        .iter()
        .map(|p| PriorDoc {
            class_label: p.class_label.clone(),
            length: p.length,
            width: p.width,
            height: p.height,
            rigidity: match p.rigidity {
                Rigidity::Rigid => "rigid".into(),
                Rigidity::Deformable => "deformable".into(),
            },
        })
        .collect();
    write_json(
        path,
        &PriorsDoc {
            format_version: FORMAT_VERSION,
            classes,
        },
    )
}

// ---------------------------------------------------------------------------
// Annotations.

pub fn annotations_to_json(annotations: &[Annotation]) -> String {
    let doc = AnnotationsDoc {
        format_version: FORMAT_VERSION,
        annotations: annotations.iter().map(AnnotationDoc::from).collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("annotation documents always serialize");
    s.push('\n');
    s
}

pub fn write_annotations(annotations: &[Annotation], path: &Path) -> Result<()> {
    fs::write(path, annotations_to_json(annotations)).map_err(|e| Error::io(path, e))
}

pub fn read_annotations(path: &Path) -> Result<Vec<Annotation>> {
    let doc: AnnotationsDoc = read_json(path)?;
    check_version(path, doc.format_version)?;
    doc.annotations
        .into_iter()
        .map(|a| a.into_annotation().map_err(|m| Error::validation(path, m)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::mask::BitMask;
    use proptest::prelude::*;

    fn one_frame() -> FrameBundle {
        let camera = CameraModel::new(100.0, 100.0, 32.0, 24.0, 64, 48, Pose::identity()).unwrap();
        let mut mask = BitMask::new(64, 48);
        for x in 10..20 {
            for y in 10..20 {
                mask.set(x, y, true);
            }
        }
        FrameBundle {
            index: 3,
            ego_pose: Pose::from_yaw(0.25, Vec3::new(1.0, 2.0, 1.8)),
            points: vec![Point3::new(1.0, 2.0, 3.0), Point3::new(-0.5, 0.25, 0.125)],
            cameras: vec![CameraView {
                id: 0,
                camera,
                cues: vec![InstanceCue2D {
                    track_id: 7,
                    class_label: "car".into(),
                    box2d: AxisAlignedBox2::new(10.0, 10.0, 20.0, 20.0).unwrap(),
                    mask: mask.encode(),
                    score: 0.9,
                }],
            }],
        }
    }

    #[test]
    fn empty_scene_has_no_frames() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_sequence(dir.path()).unwrap_err();
        assert!(err.to_string().contains("no frames found"));
        fs::create_dir_all(dir.path().join("frames")).unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::NoFrames(_))));
    }

    #[test]
    fn single_frame_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let frame = one_frame();
        write_sequence(dir.path(), std::slice::from_ref(&frame)).unwrap();
        let loaded = load_sequence(dir.path()).unwrap();
        assert_eq!(loaded.len(), 1);
        assert_eq!(loaded[0].cameras[0].cues.len(), 1);
        assert_eq!(loaded[0], frame);
    }

    #[test]
    fn missing_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), &[one_frame()]).unwrap();
        let pose = dir.path().join("frames/3/pose.json");
        fs::remove_file(&pose).unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("pose.json"), "{err}");
    }

    #[test]
    fn corrupt_pose_rejected() {
        let dir = tempfile::tempdir().unwrap();
        write_sequence(dir.path(), &[one_frame()]).unwrap();
        let path = dir.path().join("frames/3/pose.json");
        let mut m = Pose::identity().to_matrix4();
        m[0] = 1.1;
        write_json(&path, &PoseDoc { format_version: 1, matrix: m }).unwrap();
        assert!(matches!(load_sequence(dir.path()), Err(Error::Validation { .. })));
    }

    #[test]
    fn rle_size_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut frame = one_frame();
        frame.cameras[0].cues[0].mask.counts.push(5);
        write_sequence(dir.path(), &[frame]).unwrap();
        let err = load_sequence(dir.path()).unwrap_err().to_string();
        assert!(err.contains("run lengths"), "{err}");
    }

    #[test]
    fn mask_outside_box_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut frame = one_frame();
        frame.cameras[0].cues[0].box2d = AxisAlignedBox2::new(15.0, 15.0, 17.0, 17.0).unwrap();
        write_sequence(dir.path(), &[frame]).unwrap();
        assert!(load_sequence(dir.path()).is_err());
    }

    #[test]
    fn priors_parsing() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("priors.json");
        fs::write(
            &path,
            r#"{"format_version":1,"classes":[
                {"class_label":"Car","length":4.6,"width":1.8,"height":1.7,"rigidity":"rigid"},
                {"class_label":"pedestrian","length":0.75,"width":0.65,"height":1.75,"rigidity":"deformable"}]}"#,
        )
        .unwrap();
        let priors = load_priors(&path).unwrap();
        let (car, fallback) = priors.lookup("CAR");
        assert!(!fallback);
        assert_eq!((car.length, car.width, car.height, car.rigidity), (4.6, 1.8, 1.7, Rigidity::Rigid));
        assert_eq!(priors.lookup("pedestrian").0.rigidity, Rigidity::Deformable);
        assert!(priors.lookup("wheelbarrow").1);

        fs::write(
            &path,
            r#"{"format_version":1,"classes":[
                {"class_label":"car","length":4.6,"width":1.8,"height":1.7,"rigidity":"rigid"},
                {"class_label":"car","length":4.0,"width":1.8,"height":1.7,"rigidity":"rigid"}]}"#,
        )
        .unwrap();
        assert!(load_priors(&path).unwrap_err().to_string().contains("duplicate"));

        fs::write(
            &path,
            r#"{"format_version":1,"classes":[{"class_label":"car","length":4.6,"width":1.8,"height":1.7,"rigidity":"bendy"}]}"#,
        )
        .unwrap();
        assert!(load_priors(&path).unwrap_err().to_string().contains("rigidity"));

        fs::write(
            &path,
            r#"{"format_version":1,"classes":[{"class_label":"car","length":0.0,"width":1.8,"height":1.7,"rigidity":"rigid"}]}"#,
        )
        .unwrap();
        assert!(load_priors(&path).is_err());
    }

    #[test]
    fn empty_annotation_document() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        write_annotations(&[], &path).unwrap();
        assert!(read_annotations(&path).unwrap().is_empty());
    }

    fn arb_annotation() -> impl Strategy<Value = Annotation> {
        (
            0u64..1000,
            0u64..500,
            prop::sample::select(vec!["car", "pedestrian", "bus"]),
            (-100.0..100.0f64, -100.0..100.0f64, -3.0..3.0f64),
            (0.1..12.0f64, 0.1..4.0f64, 0.1..4.0f64, -10.0..10.0f64),
            0.0..=1.0f64,
            prop::sample::select(vec![PhysicalType::StaticRigid, PhysicalType::DynamicRigid, PhysicalType::Deformable]),
        )
            .prop_map(|(frame, track_id, label, (x, y, z), (l, w, h, yaw), score, pt)| Annotation {
                frame,
                track_id,
                class_label: label.into(),
                box3: OrientedBox3::new(Point3::new(x, y, z), l, w, h, yaw).unwrap(),
                score,
                motion_state: if pt == PhysicalType::StaticRigid { MotionState::Static } else { MotionState::Dynamic },
                physical_type: pt,
                provenance: format!("{}/test", pt.as_str()),
                flags: vec![],
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(8))]
        #[test]
        fn annotations_round_trip(list in proptest::collection::vec(arb_annotation(), 0..1000)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("a.json");
            write_annotations(&list, &path).unwrap();
            let back = read_annotations(&path).unwrap();
            prop_assert_eq!(&back, &list);
            let bytes = fs::read(&path).unwrap();
            write_annotations(&back, &path).unwrap();
            prop_assert_eq!(fs::read(&path).unwrap(), bytes);
        }
    }
}
