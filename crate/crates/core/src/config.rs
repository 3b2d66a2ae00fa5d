//! Tunable thresholds for the whole pipeline. Every key has a default; a
//! config file only needs the keys it overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How per-view 2D IoUs are combined when ranking resize candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IouAggregation {
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// RANSAC / RNG seed.
    pub seed: u64,

    pub ground_iterations: usize,
    /// Plane inlier distance (m).
    pub ground_threshold: f64,
    /// Minimum z component of an acceptable ground normal.
    pub ground_min_normal_z: f64,
    /// Points closer than this above the ground plane are dropped after RANSAC (m).
    pub z_floor: f64,

    pub cluster_eps: f64,
    pub cluster_min_pts: usize,

    pub erode_masks: bool,
    pub refine_alpha: f64,
    pub refine_beta: f64,
    pub refine_delta: f64,
    /// Use the instance-side count for the second inclusion ratio.
    pub refine_symmetric: bool,

    pub pp_radius: f64,
    pub pp_window: usize,
    pub pp_threshold: f64,
    pub displacement_min: f64,
    /// Upper bound on points scored per instance; larger sets are strided.
    pub pp_max_points: usize,

    pub yaw_step_deg: f64,
    pub closeness_d_min: f64,
    pub size_ratio: f64,
    pub tsdf_voxel: f64,
    pub tsdf_truncation: f64,
    pub vote_tau: f64,
    pub coverage_gamma: f64,
    pub coverage_min_vertices: usize,
    pub background_margin: f64,
    pub iou_aggregation: IouAggregation,
    /// Per-frame centroid motion below which trajectory heading is unreliable (m).
    pub min_track_displacement: f64,
    pub height_percentile: f64,
    pub height_min_points: usize,
    /// Minimum instance points in a frame before a box is emitted for it.
    pub min_box_points: usize,
    /// Boxes with any dimension above this multiple of the class prior are
    /// dropped as implausible.
    pub max_size_ratio: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ground_iterations: 200,
            ground_threshold: 0.1,
            ground_min_normal_z: 0.7,
            z_floor: 0.05,
            cluster_eps: 0.7,
            cluster_min_pts: 5,
            erode_masks: true,
            refine_alpha: 0.3,
            refine_beta: 0.2,
            refine_delta: 0.1,
            refine_symmetric: false,
            pp_radius: 0.3,
            pp_window: 10,
            pp_threshold: 0.7,
            displacement_min: 0.5,
            pp_max_points: 2000,
            yaw_step_deg: 0.5,
            closeness_d_min: 0.01,
            size_ratio: 0.8,
            tsdf_voxel: 0.1,
            tsdf_truncation: 0.3,
            vote_tau: 0.15,
            coverage_gamma: 0.8,
            coverage_min_vertices: 5,
            background_margin: 2.0,
            iou_aggregation: IouAggregation::Mean,
            min_track_displacement: 0.1,
            height_percentile: 0.01,
            height_min_points: 10,
            min_box_points: 3,
            max_size_ratio: 3.0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("ground_threshold", self.ground_threshold),
            ("cluster_eps", self.cluster_eps),
            ("refine_delta", self.refine_delta),
            ("pp_radius", self.pp_radius),
            ("yaw_step_deg", self.yaw_step_deg),
            ("closeness_d_min", self.closeness_d_min),
            ("size_ratio", self.size_ratio),
            ("tsdf_voxel", self.tsdf_voxel),
            ("tsdf_truncation", self.tsdf_truncation),
            ("vote_tau", self.vote_tau),
            ("max_size_ratio", self.max_size_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("refine_alpha", self.refine_alpha), ("refine_beta", self.refine_beta)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        if !(0.0..1.0).contains(&self.height_percentile) {
            return Err(Error::Config("height_percentile must lie in [0, 1)".into()));
        }
        if self.cluster_min_pts == 0 {
            return Err(Error::Config("cluster_min_pts must be at least 1".into()));
        }
        if self.pp_window < 2 {
            return Err(Error::Config("pp_window must be at least 2".into()));
        }
        if self.tsdf_truncation < self.tsdf_voxel {
            return Err(Error::Config("tsdf_truncation must be at least one voxel".into()));
        }
        Ok(())
    }
}
