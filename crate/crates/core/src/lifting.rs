//! Lifts per-view image features into a shared 3D voxel lattice.
//!
//! Every voxel center is projected into every view. Where the projection
//! lands inside the image, the view contributes its bilinearly sampled
//! feature vector weighted by the Laplace density of the voxel's depth under
//! that pixel's distribution. Weights and weighted features accumulate over
//! views; voxels seen by no view stay exactly zero.

use crate::depth::DepthParamMap;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{bilinear_taps, project_point, CameraModel, Taps, VoxelGrid};
use crate::tensor::Tensor;

/// Lifted features, X' x Y' x Z' x CH row-major.
pub type FeatureVolume = Tensor;
/// Accumulated depth-likelihood mass, X' x Y' x Z'.
pub type LikelihoodVolume = Tensor;

/// One camera's inputs: image features and the depth distribution map, all
/// sharing the camera's pixel raster.
#[derive(Debug, Clone)]
pub struct ViewInput {
    pub cam: CameraModel,
    pub features: Tensor,
    pub depth: DepthParamMap,
}

impl ViewInput {
    pub fn new(cam: CameraModel, features: Tensor, depth: DepthParamMap) -> Result<ViewInput> {
        if features.rank() != 3 {
            return Err(Error::shape(
                "view features",
                "H x W x CH",
                format!("{:?}", features.dims()),
            ));
        }
        let (rows, cols) = cam.image_size;
        if features.dim(0) != rows || features.dim(1) != cols {
            return Err(Error::shape(
                format!("features for camera {}", cam.name),
                format!("{} x {} x CH", rows, cols),
                format!("{:?}", features.dims()),
            ));
        }
        if depth.rows() != rows || depth.cols() != cols {
            return Err(Error::shape(
                format!("depth map for camera {}", cam.name),
                format!("{} x {} x 2", rows, cols),
                format!("{} x {} x 2", depth.rows(), depth.cols()),
            ));
        }
        Ok(ViewInput {
            cam,
            features,
            depth,
        })
    }

    pub fn channels(&self) -> usize {
        self.features.dim(2)
    }
}

fn check_views(views: &[ViewInput]) -> Result<usize> {
    let first = views
        .first()
        .ok_or_else(|| Error::domain("lifting needs at least one view"))?;
    let ch = first.channels();
    for v in &views[1..] {
        if v.channels() != ch {
            return Err(Error::shape(
                format!("features for camera {}", v.cam.name),
                format!("{} channels", ch),
                format!("{} channels", v.channels()),
            ));
        }
    }
    Ok(ch)
}

/// Depth-likelihood weighting for one projected voxel, or `None` when the
/// view cannot see the position at all.
fn view_weight(view: &ViewInput, center: &nalgebra::Vector3<f64>) -> Option<(f64, Taps)> {
    let ((u, v), d) = project_point(&view.cam, center)?;
    let taps = bilinear_taps(view.depth.rows(), view.depth.cols(), u, v)?;
    let prm = view.depth.sample_taps(&taps);
    Some((crate::depth::laplace_pdf(d, &prm), taps))
}

/// Parametric-depth lifting. Returns the feature volume (X' x Y' x Z' x CH)
/// and the accumulated likelihood mass per voxel (X' x Y' x Z').
pub fn lift(views: &[ViewInput], grid: &VoxelGrid) -> Result<(FeatureVolume, LikelihoodVolume)> {
    run_lift(views, grid, Weighting::Parametric)
}

/// Baseline lifting that weights every valid projection equally (weight 1)
/// instead of by depth likelihood. Returns only the feature volume.
pub fn lift_uniform(views: &[ViewInput], grid: &VoxelGrid) -> Result<FeatureVolume> {
    Ok(run_lift(views, grid, Weighting::Uniform)?.0)
}

enum Weighting {
    Parametric,
    Uniform,
}

fn run_lift(
    views: &[ViewInput],
    grid: &VoxelGrid,
    weighting: Weighting,
) -> Result<(FeatureVolume, LikelihoodVolume)> {
    let ch = check_views(views)?;
    let (nx, ny, nz) = grid.counts;
    let mut feat = Tensor::zeros(&[nx, ny, nz, ch])?;
    let mut lik = Tensor::zeros(&[nx, ny, nz])?;

    let feat_chunk = nz * ch;
    let uniform = matches!(weighting, Weighting::Uniform);
    // One chunk per (x, y) column; each voxel's accumulation runs in a fixed
    // view order so the result does not depend on scheduling.
    exec::for_each_chunk_pair(
        feat.data_mut(),
        feat_chunk,
        lik.data_mut(),
        nz,
        |col, feat_col, lik_col| {
            let ix = col / ny;
            let iy = col % ny;
            let mut acc = vec![0.0f64; ch];
            for k in 0..nz {
                let center = grid.center_unchecked(ix, iy, k);
                acc.fill(0.0);
                let mut mass = 0.0f64;
                for view in views {
                    let Some((alpha, taps)) = view_weight(view, &center) else {
                        continue;
                    };
                    let alpha = if uniform { 1.0 } else { alpha };
                    mass += alpha;
                    let data = view.features.data();
                    let cols = view.features.dim(1);
                    for &(r, c, w) in &taps {
                        if w == 0.0 {
                            continue;
                        }
                        let base = (r * cols + c) * ch;
                        let aw = alpha * w;
                        for (ci, a) in acc.iter_mut().enumerate() {
                            *a += aw * data[base + ci] as f64;
                        }
                    }
                }
                lik_col[k] = mass as f32;
                let out = &mut feat_col[k * ch..(k + 1) * ch];
                for (o, a) in out.iter_mut().zip(&acc) {
                    *o = *a as f32;
                }
            }
        },
    );
    Ok((feat, lik))
}
