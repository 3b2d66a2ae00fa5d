//! End-to-end annotation of a loaded sequence.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::alignment::{
    above_floor, cluster, context_aware_refine, segment_ground, unproject_instances, GroundModel, GroundParams,
    InstancePoints, RefineParams, SkipRecord,
};
use crate::boxfit::{fit, CueView, FitContext, TrackFrame};
use crate::config::PipelineConfig;
use crate::geometry::{AxisAlignedBox2, CameraModel, Point3, Pose};
use crate::grid::HashGrid;
use crate::motion::{
    assign_physical_type, classify_motion, persistence_scores, strided_window, extent_growth, MotionParams,
};
use crate::scene::{Annotation, ClassPriors, FrameBundle, MotionState, PhysicalType};

/// Everything the box stage needs from one frame, in the global frame.
struct FrameState<'a> {
    index: u64,
    world_to_sensor: Pose,
    sensor: Point3,
    cloud: Vec<Point3>,
    /// Points that survived ground removal and the height floor.
    non_ground: Vec<Point3>,
    /// Track ids whose instance contains each non-ground point.
    owners: Vec<Vec<u64>>,
    ground: Option<GroundModel>,
    instances: Vec<InstancePoints>,
    cues: Vec<Cue<'a>>,
    skipped: Vec<SkipRecord>,
    warnings: Vec<SkipRecord>,
}

struct Cue<'a> {
    track_id: u64,
    class_label: &'a str,
    camera: &'a CameraModel,
    box2d: AxisAlignedBox2,
    score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrackSummary {
    pub track_id: u64,
    pub class_label: String,
    pub motion_state: MotionState,
    pub physical_type: PhysicalType,
    pub persistence: Option<f64>,
    pub displacement: f64,
    pub frames_observed: usize,
    pub boxes: usize,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunReport {
    pub frames: usize,
    pub tracks: Vec<TrackSummary>,
    pub skipped: Vec<SkipRecord>,
    pub warnings: Vec<SkipRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct AnnotateOutput {
    /// Sorted by `(frame, track_id)`.
    pub annotations: Vec<Annotation>,
    pub report: RunReport,
}

fn frame_seed(seed: u64, index: u64) -> u64 {
    seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn process_frame<'a>(frame: &'a FrameBundle, cfg: &PipelineConfig) -> FrameState<'a> {
    let params = GroundParams {
        iterations: cfg.ground_iterations,
        threshold: cfg.ground_threshold,
        min_normal_z: cfg.ground_min_normal_z,
        seed: frame_seed(cfg.seed, frame.index),
    };
    let (kept, ground) = segment_ground(&frame.points, &params);
    let non_ground_idx = above_floor(&frame.points, &kept, ground.as_ref(), cfg.z_floor);
    let ng_local: Vec<Point3> = non_ground_idx.iter().map(|&i| frame.points[i]).collect();
    let clusters = cluster(&ng_local, cfg.cluster_eps, cfg.cluster_min_pts);
    let unproj = unproject_instances(frame, cfg.erode_masks);
    let refine = context_aware_refine(
        &clusters.cluster_points(&ng_local),
        &unproj.instances,
        &RefineParams {
            alpha: cfg.refine_alpha,
            beta: cfg.refine_beta,
            delta: cfg.refine_delta,
            symmetric: cfg.refine_symmetric,
        },
    );

    let mut owners: Vec<Vec<u64>> = vec![Vec::new(); ng_local.len()];
    for (k, a) in refine.assignments.iter().enumerate() {
        if let Some(t) = a {
            for &i in &clusters.clusters[k] {
                owners[i].push(*t);
            }
        }
    }
    // Unrefined instances keep their raw points; claim the non-ground ones.
    let mut position = vec![usize::MAX; frame.points.len()];
    for (j, &i) in non_ground_idx.iter().enumerate() {
        position[i] = j;
    }
    for (inst, idx) in refine.instances.iter().zip(&unproj.point_indices) {
        if !inst.refined {
            for &i in idx {
                if position[i] != usize::MAX {
                    owners[position[i]].push(inst.track_id);
                }
            }
        }
    }

    let pose = &frame.ego_pose;
    let instances = refine
        .instances
        .into_iter()
        .map(|mut inst| {
            inst.points = pose.transform(&inst.points);
            inst
        })
        .collect();
    let cues = frame
        .cameras
        .iter()
        .flat_map(|view| {
            view.cues.iter().map(move |c| Cue {
                track_id: c.track_id,
                class_label: &c.class_label,
                camera: &view.camera,
                box2d: c.box2d,
                score: c.score,
            })
        })
        .collect();
    FrameState {
        index: frame.index,
        world_to_sensor: pose.inverse(),
        sensor: frame.sensor_origin(),
        cloud: pose.transform(&frame.points),
        non_ground: pose.transform(&ng_local),
        owners,
        ground: ground.map(|g| g.transformed(pose)),
        instances,
        cues,
        skipped: unproj.skipped,
        warnings: unproj.warnings,
    }
}

/// Strided subsample of at most `max` items.
fn subsample(points: &[Point3], max: usize) -> Vec<Point3> {
    if points.len() <= max || max == 0 {
        return points.to_vec();
    }
    let step = points.len() as f64 / max as f64;
    (0..max).map(|i| points[(i as f64 * step) as usize]).collect()
}

/// Per-track bookkeeping gathered across frames: `(frame position, instance
/// position)` pairs in frame order.
struct TrackIndex {
    track_id: u64,
    class_label: String,
    appearances: Vec<(usize, usize)>,
}

fn index_tracks(states: &[FrameState]) -> Vec<TrackIndex> {
    let mut map: BTreeMap<u64, Vec<(usize, usize)>> = BTreeMap::new();
    for (fi, s) in states.iter().enumerate() {
        for (ii, inst) in s.instances.iter().enumerate() {
            map.entry(inst.track_id).or_default().push((fi, ii));
        }
    }
    // Label of the highest-scoring cue of the track; ties keep the smaller label.
    let mut labels: BTreeMap<u64, (f64, &str)> = BTreeMap::new();
    for s in states {
        for c in &s.cues {
            let e = labels.entry(c.track_id).or_insert((f64::MIN, c.class_label));
            if c.score > e.0 || (c.score == e.0 && c.class_label < e.1) {
                *e = (c.score, c.class_label);
            }
        }
    }
    map.into_iter()
        .map(|(track_id, appearances)| TrackIndex {
            track_id,
            class_label: labels.get(&track_id).map(|l| l.1.to_string()).unwrap_or_default(),
            appearances,
        })
        .collect()
}

/// Runs instance alignment on every frame, classifies each track and fits
/// its boxes. Frames and tracks are processed in parallel on the current
/// rayon pool; the output does not depend on the number of threads.
pub fn annotate(frames: &[FrameBundle], priors: &ClassPriors, cfg: &PipelineConfig) -> AnnotateOutput {
    let states: Vec<FrameState> = frames.par_iter().map(|f| process_frame(f, cfg)).collect();
    let mut report = RunReport {
        frames: frames.len(),
        ..Default::default()
    };
    for s in &states {
        report.skipped.extend(s.skipped.iter().cloned());
        report.warnings.extend(s.warnings.iter().cloned());
    }
    let tracks = index_tracks(&states);
    let grids: Vec<HashGrid> = states.iter().map(|s| HashGrid::new(&s.non_ground, cfg.pp_radius)).collect();
    let motion = MotionParams {
        pp_threshold: cfg.pp_threshold,
        displacement_min: cfg.displacement_min,
    };

    let results: Vec<(TrackSummary, crate::boxfit::FitOutcome)> = tracks
        .par_iter()
        .map(|t| {
            let window = strided_window(&t.appearances, cfg.pp_window);
            let window_grids: Vec<&HashGrid> = window.iter().map(|&(fi, _)| &grids[fi]).collect();
            let query: Vec<Point3> = window
                .iter()
                .flat_map(|&(fi, ii)| states[fi].instances[ii].points.iter().copied())
                .collect();
            let persistence =
                persistence_scores(&subsample(&query, cfg.pp_max_points), &window_grids, cfg.pp_radius).map(|s| s.aggregate);
            let displacement = extent_growth(
                t.appearances.iter().map(|&(fi, ii)| states[fi].instances[ii].points.as_slice()),
            );
            let motion_state = classify_motion(persistence, displacement, &motion);
            let (physical_type, prior_fallback) = assign_physical_type(&t.class_label, motion_state, priors);
            let prior = priors.lookup(&t.class_label).0.clone();

            let track_frames: Vec<TrackFrame> = t
                .appearances
                .iter()
                .map(|&(fi, ii)| {
                    let s = &states[fi];
                    let cues: Vec<&Cue> = s.cues.iter().filter(|c| c.track_id == t.track_id).collect();
                    let score = if cues.is_empty() {
                        0.0
                    } else {
                        cues.iter().map(|c| c.score).sum::<f64>() / cues.len() as f64
                    };
                    TrackFrame {
                        frame: s.index,
                        points: s.instances[ii].points.clone(),
                        sensor: s.sensor,
                        cloud: &s.cloud,
                        ground: s.ground,
                        score,
                        views: cues
                            .iter()
                            .map(|c| CueView {
                                camera: c.camera,
                                world_to_sensor: s.world_to_sensor,
                                box2d: c.box2d,
                            })
                            .collect(),
                    }
                })
                .collect();
            let background = if physical_type == PhysicalType::StaticRigid {
                background_points(&states, t, &track_frames, cfg.background_margin)
            } else {
                Vec::new()
            };
            let ctx = FitContext {
                track_id: t.track_id,
                class_label: t.class_label.clone(),
                physical_type,
                motion_state,
                prior,
                prior_fallback,
                frames: track_frames,
                background,
            };
            let outcome = fit(&ctx, cfg);
            let summary = TrackSummary {
                track_id: t.track_id,
                class_label: t.class_label.clone(),
                motion_state,
                physical_type,
                persistence,
                displacement,
                frames_observed: t.appearances.len(),
                boxes: outcome.annotations.len(),
            };
            (summary, outcome)
        })
        .collect();

    let mut annotations = Vec::new();
    for (summary, outcome) in results {
        report.tracks.push(summary);
        annotations.extend(outcome.annotations);
        report.skipped.extend(outcome.skipped);
    }
    annotations.sort_by_key(|a| (a.frame, a.track_id));
    report.skipped.sort_by(|a, b| (a.frame, a.track_id, a.camera).cmp(&(b.frame, b.track_id, b.camera)));
    report.warnings.sort_by(|a, b| (a.frame, a.track_id, a.camera).cmp(&(b.frame, b.track_id, b.camera)));
    AnnotateOutput { annotations, report }
}

/// Non-ground points of the track's frames that belong to other instances,
/// other clusters or noise, within `margin` of the instance's bounding
/// sphere.
fn background_points(states: &[FrameState], t: &TrackIndex, frames: &[TrackFrame], margin: f64) -> Vec<Point3> {
    let all: Vec<Point3> = frames.iter().flat_map(|f| f.points.iter().copied()).collect();
    let Some((lo, hi)) = crate::grid::bounds(&all) else {
        return Vec::new();
    };
    let center = nalgebra::center(&lo, &hi);
    let radius = all.iter().map(|p| (p - center).norm()).fold(0.0, f64::max) + margin;
    let mut out = Vec::new();
    for &(fi, _) in &t.appearances {
        let s = &states[fi];
        for (p, owners) in s.non_ground.iter().zip(&s.owners) {
            if !owners.contains(&t.track_id) && (p - center).norm() <= radius {
                out.push(*p);
            }
        }
    }
    out
}
