//! Physical-type-aware 3D box generation.

pub mod align;
pub mod dynamic;
pub mod fit;
pub mod height;
pub mod lshape;
pub mod resize;
pub mod tsdf;
pub mod vote;

pub use align::{iou_align_select, projected_hull, CueView, Selection};
pub use dynamic::{dynamic_orient_and_extend, trajectory_yaw, visible_faces, DynamicFit};
pub use fit::{deformable_fit, fit, FitContext, FitOutcome, TrackFrame};
pub use height::{refine_height, search_radius, GroundSource, HeightParams, HeightRefinement};
pub use lshape::{lshape_fit, LShapeFit, LShapeParams};
pub use resize::{resize_candidates, side_coverage, size_check, Faces, Side, SizeCheck};
pub use tsdf::{faces_any_sensor, tsdf_integrate, SurfaceVertex, TsdfVolume};
pub use vote::{surface_vote, VoteOutcome};
