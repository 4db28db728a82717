//! File-based orchestration: each stage reads its inputs from a working
//! directory and writes its products back, so stages can run as separate
//! processes or fused in one call with identical results.
//!
//! Per camera `<name>` the synth stage writes `dense_<name>.pdbt` (depth),
//! `depth_<name>.pdbt` (Laplace parameters), `feat_<name>.pdbt` (features:
//! pixel u, pixel v, ground indicator), `sparse_<name>.pdbt` (subsampled
//! depth as rows of row/col/depth), and `mask_<name>.pdbt` (hit mask),
//! plus the BEV labels `gt_seg.pdbt` and `gt_vis.pdbt`. Later stages add
//! `feat3d/lik3d/occ3d/bev_feat/bev_mass/vis_bev/pred_seg.pdbt`.

use crate::aggregation;
use crate::config::Rig;
use crate::depth::DepthParamMap;
use crate::error::{Error, Result};
use crate::geometry::VoxelGrid;
use crate::lifting::{self, ViewInput};
use crate::metrics::{self, VisReport};
use crate::synth::{self, Scene};
use crate::tensor::{read_tensor, write_tensor, Tensor};
use crate::visibility;
use std::fs;
use std::path::{Path, PathBuf};

pub fn view_file(out: &Path, stem: &str, cam: &str) -> PathBuf {
    out.join(format!("{}_{}.pdbt", stem, cam))
}

#[derive(Debug, Clone)]
pub struct SynthOpts {
    /// Diversity given to the delta-like parameter maps.
    pub b_gt: f64,
}

impl Default for SynthOpts {
    fn default() -> Self {
        Self { b_gt: 0.05 }
    }
}

/// Per-pixel features carrying the pixel's own coordinates and whether its
/// ray landed on the ground. The coordinate channels make lifted features
/// decodable back to pixels; the ground channel drives segmentation.
fn encode_features(ground: &Tensor) -> Result<Tensor> {
    let (rows, cols) = (ground.dim(0), ground.dim(1));
    let mut data = Vec::with_capacity(rows * cols * 3);
    for r in 0..rows {
        for c in 0..cols {
            data.push(c as f32);
            data.push(r as f32);
            data.push(ground.at(&[r, c]));
        }
    }
    Tensor::from_vec(&[rows, cols, 3], data)
}

/// Depth subsampled on a coarse pixel stride, as rows of (row, col,
/// depth). Falls back to every pixel when the stride misses the image.
fn sparse_samples(depth: &Tensor) -> Result<Tensor> {
    let (rows, cols) = (depth.dim(0), depth.dim(1));
    let mut data = Vec::new();
    for r in (2..rows).step_by(5) {
        for c in (2..cols).step_by(5) {
            data.extend([r as f32, c as f32, depth.at(&[r, c])]);
        }
    }
    if data.is_empty() {
        for r in 0..rows {
            for c in 0..cols {
                data.extend([r as f32, c as f32, depth.at(&[r, c])]);
            }
        }
    }
    let n = data.len() / 3;
    Tensor::from_vec(&[n, 3], data)
}

/// Renders the scene through every camera and writes the per-view inputs
/// and BEV ground-truth labels into `out`.
pub fn run_synth(
    scene: &Scene,
    rig: &Rig,
    grid: &VoxelGrid,
    out: &Path,
    opts: &SynthOpts,
) -> Result<()> {
    fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut dense_views = Vec::with_capacity(rig.cameras.len());
    for cam in &rig.cameras {
        let (depth, ground, hit) = synth::raycast_full(scene, cam)?;
        let params = synth::delta_params(&depth, opts.b_gt)?;
        write_tensor(&view_file(out, "dense", &cam.name), &depth)?;
        write_tensor(&view_file(out, "depth", &cam.name), params.tensor())?;
        write_tensor(
            &view_file(out, "feat", &cam.name),
            &encode_features(&ground)?,
        )?;
        write_tensor(
            &view_file(out, "sparse", &cam.name),
            &sparse_samples(&depth)?,
        )?;
        write_tensor(&view_file(out, "mask", &cam.name), &hit)?;
        dense_views.push((cam.clone(), depth));
    }
    write_tensor(
        &out.join("gt_seg.pdbt"),
        &synth::render_gt_bev(scene, grid)?,
    )?;
    let gt_vis = visibility::gt_visibility(&dense_views, grid, opts.b_gt)?;
    write_tensor(&out.join("gt_vis.pdbt"), &gt_vis)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftMode {
    Parametric,
    Uniform,
}

/// Lifts the per-view feature maps in `out` onto the voxel grid, writing
/// `feat3d.pdbt` and, in parametric mode, `lik3d.pdbt`.
pub fn run_lift(rig: &Rig, grid: &VoxelGrid, out: &Path, mode: LiftMode) -> Result<()> {
    let mut views = Vec::with_capacity(rig.cameras.len());
    for cam in &rig.cameras {
        let feat = read_tensor(&view_file(out, "feat", &cam.name))?;
        let params = DepthParamMap::new(read_tensor(&view_file(out, "depth", &cam.name))?)?;
        views.push(ViewInput::new(cam.clone(), feat, params)?);
    }
    match mode {
        LiftMode::Parametric => {
            let (feat3d, lik3d) = lifting::lift(&views, grid)?;
            write_tensor(&out.join("feat3d.pdbt"), &feat3d)?;
            write_tensor(&out.join("lik3d.pdbt"), &lik3d)
        }
        LiftMode::Uniform => {
            let feat3d = lifting::lift_uniform(&views, grid)?;
            write_tensor(&out.join("feat3d.pdbt"), &feat3d)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggMode {
    Occupancy,
    Concat,
}

/// Collapses the lifted volume in `out` to BEV. Occupancy mode writes
/// `occ3d.pdbt`, `bev_feat.pdbt`, and the evidence-mass map
/// `bev_mass.pdbt`; concat mode writes only `bev_feat.pdbt` with
/// channels stacked along height.
pub fn run_aggregate(grid: &VoxelGrid, out: &Path, mode: AggMode, bias: f64) -> Result<()> {
    let feat3d = read_tensor(&out.join("feat3d.pdbt"))?;
    match mode {
        AggMode::Occupancy => {
            let lik = read_tensor(&out.join("lik3d.pdbt"))?;
            let occ = aggregation::occupancy(&lik, bias)?;
            write_tensor(&out.join("occ3d.pdbt"), &occ)?;
            let comp = aggregation::compress(&feat3d, &occ)?;
            write_tensor(
                &out.join("bev_feat.pdbt"),
                &aggregation::to_bev_grid(&comp, grid)?,
            )?;
            let (nx, ny, nz) = (lik.dim(0), lik.dim(1), lik.dim(2));
            let as_channel = Tensor::from_vec(&[nx, ny, nz, 1], lik.data().to_vec())?;
            let mass = aggregation::compress(&as_channel, &occ)?;
            let mass = Tensor::from_vec(&[nx, ny], mass.into_data())?;
            write_tensor(
                &out.join("bev_mass.pdbt"),
                &aggregation::to_bev_grid(&mass, grid)?,
            )
        }
        AggMode::Concat => {
            let stacked = aggregation::concat_pillars(&feat3d)?;
            write_tensor(
                &out.join("bev_feat.pdbt"),
                &aggregation::to_bev_grid(&stacked, grid)?,
            )
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VisSource {
    /// Closed form from the per-view parameter maps.
    Params,
    /// From the rendered dense depth, treated as near-delta with `b_gt`.
    Dense,
}

/// Computes the BEV visibility map `vis_bev.pdbt` from the per-view data
/// in `out`.
pub fn run_visibility(
    rig: &Rig,
    grid: &VoxelGrid,
    out: &Path,
    source: VisSource,
    b_gt: f64,
) -> Result<()> {
    let bev = match source {
        VisSource::Params => {
            let mut views = Vec::with_capacity(rig.cameras.len());
            for cam in &rig.cameras {
                let params = DepthParamMap::new(read_tensor(&view_file(out, "depth", &cam.name))?)?;
                views.push((cam.clone(), params));
            }
            let vol = visibility::visibility_volume(&views, grid)?;
            visibility::visibility_bev(&vol, grid)?
        }
        VisSource::Dense => {
            let mut views = Vec::with_capacity(rig.cameras.len());
            for cam in &rig.cameras {
                views.push((
                    cam.clone(),
                    read_tensor(&view_file(out, "dense", &cam.name))?,
                ));
            }
            visibility::gt_visibility(&views, grid, b_gt)?
        }
    };
    write_tensor(&out.join("vis_bev.pdbt"), &bev)
}

#[derive(Debug, Clone)]
pub enum PredSource {
    /// Load a prediction tensor from this path.
    File(PathBuf),
    /// Threshold the aggregated evidence: a cell is positive when feature
    /// `channel` captures at least `thresh` of the cell's evidence mass.
    Evidence { channel: usize, thresh: f64 },
}

#[derive(Debug, Clone)]
pub struct EvalOpts {
    pub tau_vis: f64,
    pub tau_occ: f64,
    /// Binarization threshold applied to the prediction when scoring.
    pub seg_thresh: f64,
    /// Ground-truth segmentation override; defaults to `gt_seg.pdbt`.
    pub gt: Option<PathBuf>,
    /// Visibility-map override; defaults to `vis_bev.pdbt`.
    pub vis: Option<PathBuf>,
}

impl Default for EvalOpts {
    fn default() -> Self {
        Self {
            tau_vis: 0.5,
            tau_occ: 0.5,
            seg_thresh: 0.5,
            gt: None,
            vis: None,
        }
    }
}

fn evidence_prediction(
    feat: &Tensor,
    mass: &Tensor,
    channel: usize,
    thresh: f64,
) -> Result<Tensor> {
    if feat.rank() != 3 {
        return Err(Error::shape(
            "bev features",
            "X x Y x CH",
            format!("{:?}", feat.dims()),
        ));
    }
    let (bx, by, ch) = (feat.dim(0), feat.dim(1), feat.dim(2));
    if channel >= ch {
        return Err(Error::invalid(
            "channel",
            format!("feature has {} channels, asked for {}", ch, channel),
        ));
    }
    if mass.dims() != [bx, by] {
        return Err(Error::shape(
            "evidence mass",
            format!("{} x {}", bx, by),
            format!("{:?}", mass.dims()),
        ));
    }
    let mut out = Tensor::zeros(&[bx, by])?;
    for i in 0..bx {
        for j in 0..by {
            let m = mass.at(&[i, j]) as f64;
            let positive = m > 0.0 && (feat.at(&[i, j, channel]) as f64) >= thresh * m;
            *out.at_mut(&[i, j]) = positive as u32 as f32;
        }
    }
    Ok(out)
}

/// Scores a BEV segmentation against the labels in `out` and returns the
/// report. Evidence-sourced predictions are also written to
/// `pred_seg.pdbt`.
pub fn run_eval(out: &Path, pred: &PredSource, opts: &EvalOpts) -> Result<VisReport> {
    let gt_path = opts.gt.clone().unwrap_or_else(|| out.join("gt_seg.pdbt"));
    let vis_path = opts.vis.clone().unwrap_or_else(|| out.join("vis_bev.pdbt"));
    let gt = read_tensor(&gt_path)?;
    let vis = read_tensor(&vis_path)?;
    let pred = match pred {
        PredSource::File(p) => read_tensor(p)?,
        PredSource::Evidence { channel, thresh } => {
            let feat = read_tensor(&out.join("bev_feat.pdbt"))?;
            let mass = read_tensor(&out.join("bev_mass.pdbt"))?;
            let seg = evidence_prediction(&feat, &mass, *channel, *thresh)?;
            write_tensor(&out.join("pred_seg.pdbt"), &seg)?;
            seg
        }
    };
    metrics::visibility_iou(
        &pred,
        &gt,
        &vis,
        opts.tau_vis,
        opts.tau_occ,
        opts.seg_thresh,
    )
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub b_gt: f64,
    pub bias: f64,
    pub tau_vis: f64,
    pub tau_occ: f64,
    pub seg_thresh: f64,
    pub pred_channel: usize,
    pub pred_thresh: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            b_gt: 0.05,
            bias: aggregation::DEFAULT_OCCUPANCY_BIAS,
            tau_vis: 0.5,
            tau_occ: 0.5,
            seg_thresh: 0.5,
            pred_channel: 2,
            pred_thresh: 0.5,
        }
    }
}

/// Runs synth, lift, aggregate, visibility, and eval back to back in one
/// process, leaving the same artifacts as the staged commands.
pub fn run_pipeline(
    scene: &Scene,
    rig: &Rig,
    grid: &VoxelGrid,
    out: &Path,
    cfg: &PipelineConfig,
) -> Result<VisReport> {
    run_synth(scene, rig, grid, out, &SynthOpts { b_gt: cfg.b_gt })?;
    run_lift(rig, grid, out, LiftMode::Parametric)?;
    run_aggregate(grid, out, AggMode::Occupancy, cfg.bias)?;
    run_visibility(rig, grid, out, VisSource::Params, cfg.b_gt)?;
    run_eval(
        out,
        &PredSource::Evidence {
            channel: cfg.pred_channel,
            thresh: cfg.pred_thresh,
        },
        &EvalOpts {
            tau_vis: cfg.tau_vis,
            tau_occ: cfg.tau_occ,
            seg_thresh: cfg.seg_thresh,
            gt: None,
            vis: None,
        },
    )
}
