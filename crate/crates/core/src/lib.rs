//! Camera features to bird's-eye-view maps through parametric depth.
//!
//! Per-pixel depth is modeled as a Laplace distribution (location mu,
//! diversity b). Image features are lifted into an ego-frame voxel grid
//! weighted by the depth likelihood of each voxel, normalized per column
//! into an occupancy distribution, and compressed to a BEV feature map.
//! The same distributions give closed-form per-voxel visibility, which
//! splits segmentation metrics into camera-visible and occluded regions.
//! A built-in ray-casting synthesizer provides exact scenes to validate
//! the whole chain against.
//!
//! Heavy kernels run data-parallel under the default `parallel` feature
//! and sequentially without it; results are bit-identical either way.

pub use nalgebra;

pub mod aggregation;
pub mod config;
pub mod depth;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod lifting;
pub mod metrics;
pub mod pipeline;
pub mod synth;
pub mod tensor;
pub mod visibility;

pub use aggregation::{compress, concat_pillars, occupancy, to_bev_grid, DEFAULT_OCCUPANCY_BIAS};
pub use config::{load_grid, load_rig, load_scene, save_grid, save_rig, save_scene, Rig};
pub use depth::{
    depth_nll, depth_nll_grad, laplace_cdf, laplace_pdf, nll_grad_term, occlusion_prob,
    sparse_from_tensor, visibility_prob, DepthParamMap, DepthSample, LaplaceParams, NllReduction,
    B_MIN,
};
pub use error::{Error, Result};
pub use exec::with_threads;
pub use geometry::{bilinear_sample, project_point, CameraModel, VoxelGrid, DEPTH_EPSILON};
pub use lifting::{lift, lift_uniform, ViewInput};
pub use metrics::{iou, seg_loss, visibility_iou, VisReport};
pub use pipeline::{
    run_aggregate, run_eval, run_lift, run_pipeline, run_synth, run_visibility, AggMode, EvalOpts,
    LiftMode, PipelineConfig, PredSource, SynthOpts, VisSource,
};
pub use synth::{
    delta_params, make_rig, raycast_depth, render_gt_bev, Aabb, Rect, Scene, FAR_DEPTH,
};
pub use tensor::{read_tensor, write_tensor, Tensor};
pub use visibility::{gt_visibility, visibility_bev, visibility_volume};
