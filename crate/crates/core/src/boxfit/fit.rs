//! Per-instance dispatch to the fitting path of its physical type.

use super::align::{iou_align_select, CueView};
use super::dynamic::{dynamic_orient_and_extend, trajectory_yaw};
use super::height::{refine_height, GroundSource, HeightParams};
use super::lshape::{lshape_fit, LShapeParams};
use super::resize::{resize_candidates, side_coverage, size_check};
use super::tsdf::{faces_any_sensor, tsdf_integrate};
use super::vote::surface_vote;
use crate::alignment::{GroundModel, SkipRecord};
use crate::config::PipelineConfig;
use crate::geometry::{OrientedBox3, Point3};
use crate::scene::{Annotation, ClassPrior, MotionState, PhysicalType};

/// Fewer aggregated points than this skip surface reconstruction.
pub const MIN_SURFACE_POINTS: usize = 10;

/// One frame of a track, everything in the global frame.
#[derive(Debug, Clone)]
pub struct TrackFrame<'a> {
    pub frame: u64,
    pub points: Vec<Point3>,
    pub sensor: Point3,
    /// Whole point cloud of the frame, used for ground-contact refinement.
    pub cloud: &'a [Point3],
    pub ground: Option<GroundModel>,
    /// Mean score of the cues of this track in this frame.
    pub score: f64,
    pub views: Vec<CueView<'a>>,
}

#[derive(Debug, Clone)]
pub struct FitContext<'a> {
    pub track_id: u64,
    pub class_label: String,
    pub physical_type: PhysicalType,
    pub motion_state: MotionState,
    pub prior: ClassPrior,
    pub prior_fallback: bool,
    /// Ordered by frame index.
    pub frames: Vec<TrackFrame<'a>>,
    /// Nearby points not belonging to this instance.
    pub background: Vec<Point3>,
}

#[derive(Debug, Clone, Default)]
pub struct FitOutcome {
    pub annotations: Vec<Annotation>,
    pub skipped: Vec<SkipRecord>,
}

fn lshape_params(cfg: &PipelineConfig) -> LShapeParams {
    LShapeParams {
        yaw_step_deg: cfg.yaw_step_deg,
        d_min: cfg.closeness_d_min,
    }
}

fn height_params(cfg: &PipelineConfig) -> HeightParams {
    HeightParams {
        percentile: cfg.height_percentile,
        min_points: cfg.height_min_points,
    }
}

fn centroid(points: &[Point3]) -> Point3 {
    let sum = points.iter().fold(nalgebra::Vector3::zeros(), |acc, p| acc + p.coords);
    Point3::from(sum / points.len() as f64)
}

fn bottom_center(b: &OrientedBox3) -> Point3 {
    let c = b.center();
    Point3::new(c.x, c.y, b.bottom_z())
}

fn height_flag(source: GroundSource, flags: &mut Vec<String>) {
    match source {
        GroundSource::Percentile => {}
        GroundSource::Plane => flags.push("height_from_plane".into()),
        GroundSource::Unchanged => flags.push("height_unrefined".into()),
    }
}

/// Same footprint as `b` with the z range replaced.
fn with_z_range(b: &OrientedBox3, bottom: f64, top: f64) -> OrientedBox3 {
    let mut c = b.center();
    c.z = 0.5 * (bottom + top);
    OrientedBox3::new(c, b.length(), b.width(), top - bottom, b.yaw()).expect("z range is valid")
}

impl<'a> FitContext<'a> {
    fn annotation(&self, frame: &TrackFrame, box3: OrientedBox3, provenance: String, flags: Vec<String>) -> Annotation {
        Annotation {
            frame: frame.frame,
            track_id: self.track_id,
            class_label: self.class_label.clone(),
            box3,
            score: frame.score,
            motion_state: self.motion_state,
            physical_type: self.physical_type,
            provenance,
            flags,
        }
    }

    fn skip(&self, frame: u64, reason: &str) -> SkipRecord {
        SkipRecord {
            frame,
            track_id: self.track_id,
            camera: None,
            reason: reason.into(),
        }
    }

    fn base_flags(&self) -> Vec<String> {
        if self.prior_fallback {
            vec!["prior_fallback".into()]
        } else {
            Vec::new()
        }
    }
}

/// Fits boxes for one track. Static rigid tracks get one box shared by every
/// frame they were observed in; dynamic and deformable tracks get one box
/// per frame.
pub fn fit(ctx: &FitContext, cfg: &PipelineConfig) -> FitOutcome {
    let mut out = match ctx.physical_type {
        PhysicalType::StaticRigid => fit_static(ctx, cfg),
        PhysicalType::DynamicRigid => fit_dynamic(ctx, cfg),
        PhysicalType::Deformable => fit_deformable(ctx, cfg),
    };
    let r = cfg.max_size_ratio;
    let p = &ctx.prior;
    let (kept, dropped): (Vec<Annotation>, Vec<Annotation>) = out.annotations.into_iter().partition(|a| {
        a.box3.length() <= r * p.length && a.box3.width() <= r * p.width && a.box3.height() <= r * p.height
    });
    out.annotations = kept;
    out.skipped
        .extend(dropped.iter().map(|a| ctx.skip(a.frame, "box exceeds the class prior by more than max_size_ratio")));
    out
}

fn fit_static(ctx: &FitContext, cfg: &PipelineConfig) -> FitOutcome {
    let mut out = FitOutcome::default();
    let observed: Vec<&TrackFrame> = ctx.frames.iter().filter(|f| !f.points.is_empty()).collect();
    let Some(anchor) = observed.iter().copied().max_by(|a, b| a.points.len().cmp(&b.points.len()).then(b.frame.cmp(&a.frame))) else {
        return out;
    };
    let fg: Vec<Point3> = observed.iter().flat_map(|f| f.points.iter().copied()).collect();
    let mut flags = ctx.base_flags();
    let lp = lshape_params(cfg);

    let (initial, provenance, min_height) = if fg.len() < MIN_SURFACE_POINTS {
        flags.push("surface_skipped".into());
        let Some(lf) = lshape_fit(&fg, &lp) else { return out };
        if lf.degenerate {
            flags.push("degenerate".into());
        }
        (lf.box3, "static_rigid/lshape_fallback", 0.0)
    } else {
        let origins = observed.iter().flat_map(|f| std::iter::repeat_n(&f.sensor, f.points.len()));
        let volume = tsdf_integrate(fg.iter().zip(origins), cfg.tsdf_voxel, cfg.tsdf_truncation);
        let vertices = volume.extract_surface();
        let positions: Vec<Point3> = vertices.iter().map(|v| v.position).collect();
        let vote = surface_vote(&positions, &fg, &ctx.background, cfg.vote_tau);
        let mut refined: Vec<Point3> = vote.foreground.iter().map(|&i| fg[i]).collect();
        if refined.len() < 3 {
            flags.push("vote_empty".into());
            refined = fg.clone();
        }
        let Some(lf) = lshape_fit(&refined, &lp) else { return out };
        if lf.degenerate {
            flags.push("degenerate".into());
        }
        let check = size_check(&lf.box3, &ctx.prior, cfg.size_ratio);
        if check.ok() {
            (lf.box3, "static_rigid/lshape", 0.0)
        } else {
            let sensors: Vec<Point3> = observed.iter().map(|f| f.sensor).collect();
            let normals: Vec<_> = vote
                .kept_vertices
                .iter()
                .map(|&i| &vertices[i])
                .filter(|v| faces_any_sensor(v, &sensors))
                .map(|v| v.normal)
                .collect();
            let coverage = side_coverage(&normals, lf.box3.yaw(), cfg.coverage_gamma, cfg.coverage_min_vertices);
            let candidates = resize_candidates(&lf.box3, &ctx.prior, &coverage, &anchor.sensor, cfg.size_ratio);
            let min_h = cfg.size_ratio * ctx.prior.height;
            if candidates.len() == 1 {
                (candidates[0], "static_rigid/full_coverage", min_h)
            } else {
                let views: Vec<CueView> = ctx.frames.iter().flat_map(|f| f.views.iter().copied()).collect();
                let sel = iou_align_select(&candidates, &views, lf.box3.yaw(), cfg.iou_aggregation).expect("two candidates");
                if !sel.verified {
                    flags.push("unverified".into());
                }
                // Height is re-measured from the observed top below.
                let chosen = with_z_range(&sel.box3, lf.box3.bottom_z(), lf.box3.top_z());
                (chosen, "static_rigid/iou_aligned", min_h)
            }
        }
    };

    let h = refine_height(
        &initial,
        anchor.cloud,
        &bottom_center(&initial),
        anchor.ground.as_ref(),
        &height_params(cfg),
        min_height,
    );
    height_flag(h.source, &mut flags);
    for f in observed {
        out.annotations.push(ctx.annotation(f, h.box3, provenance.into(), flags.clone()));
    }
    out
}

fn fit_dynamic(ctx: &FitContext, cfg: &PipelineConfig) -> FitOutcome {
    let mut out = FitOutcome::default();
    let observed: Vec<&TrackFrame> = ctx.frames.iter().filter(|f| !f.points.is_empty()).collect();
    let track: Vec<(u64, Point3)> = observed.iter().map(|f| (f.frame, centroid(&f.points))).collect();
    let lp = lshape_params(cfg);
    let min_h = cfg.size_ratio * ctx.prior.height;
    for (i, f) in observed.iter().enumerate() {
        if f.points.len() < cfg.min_box_points {
            out.skipped.push(ctx.skip(f.frame, "too few instance points for a box"));
            continue;
        }
        let heading = trajectory_yaw(&track, i, cfg.min_track_displacement);
        let Some(d) = dynamic_orient_and_extend(&f.points, heading, &ctx.prior, &f.sensor, &lp) else {
            out.skipped.push(ctx.skip(f.frame, "dynamic fit failed"));
            continue;
        };
        let mut flags = ctx.base_flags();
        if d.yaw_fallback {
            flags.push("yaw_fallback".into());
        }
        if d.degenerate {
            flags.push("degenerate".into());
        }
        let h = refine_height(&d.box3, f.cloud, &bottom_center(&d.box3), f.ground.as_ref(), &height_params(cfg), min_h);
        height_flag(h.source, &mut flags);
        let provenance = if d.yaw_fallback {
            "dynamic_rigid/lshape_yaw"
        } else {
            "dynamic_rigid/trajectory_extended"
        };
        out.annotations.push(ctx.annotation(f, h.box3, provenance.into(), flags));
    }
    out
}

/// Tight single-frame box; no priors, no aggregation.
pub fn deformable_fit(points: &[Point3], params: &LShapeParams) -> Option<super::lshape::LShapeFit> {
    lshape_fit(points, params)
}

fn fit_deformable(ctx: &FitContext, cfg: &PipelineConfig) -> FitOutcome {
    let mut out = FitOutcome::default();
    let lp = lshape_params(cfg);
    for f in ctx.frames.iter().filter(|f| !f.points.is_empty()) {
        if f.points.len() < cfg.min_box_points {
            out.skipped.push(ctx.skip(f.frame, "too few instance points for a box"));
            continue;
        }
        let Some(lf) = deformable_fit(&f.points, &lp) else { continue };
        let mut flags = ctx.base_flags();
        if lf.degenerate {
            flags.push("degenerate".into());
        }
        let h = refine_height(&lf.box3, f.cloud, &bottom_center(&lf.box3), f.ground.as_ref(), &height_params(cfg), 0.0);
        height_flag(h.source, &mut flags);
        out.annotations.push(ctx.annotation(f, h.box3, "deformable/single_frame".into(), flags));
    }
    out
}
