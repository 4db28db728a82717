//! Closed-form visibility from parametric depth.
//!
//! A voxel is visible to a camera with the probability that the camera's
//! ray terminates behind it, which the Laplace depth model gives in closed
//! form. Multiple cameras fuse by maximum: one clear line of sight is
//! enough. The BEV visibility of a column is the maximum over its voxels,
//! pooled onto the BEV raster.

use crate::depth::{visibility_prob, DepthParamMap};
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{project_point, CameraModel, VoxelGrid};
use crate::tensor::Tensor;

/// Per-voxel visibility in [0, 1], X' x Y' x Z'. Voxels observed by no
/// camera get 0.
pub fn visibility_volume(
    views: &[(CameraModel, DepthParamMap)],
    grid: &VoxelGrid,
) -> Result<Tensor> {
    if views.is_empty() {
        return Err(Error::domain("visibility needs at least one camera"));
    }
    for (cam, map) in views {
        let (rows, cols) = cam.image_size;
        if map.rows() != rows || map.cols() != cols {
            return Err(Error::shape(
                format!("depth map for camera {}", cam.name),
                format!("{} x {} x 2", rows, cols),
                format!("{} x {} x 2", map.rows(), map.cols()),
            ));
        }
    }
    let (nx, ny, nz) = grid.counts;
    let mut vol = Tensor::zeros(&[nx, ny, nz])?;
    exec::for_each_chunk(vol.data_mut(), nz, |col, out| {
        let ix = col / ny;
        let iy = col % ny;
        for (k, slot) in out.iter_mut().enumerate() {
            let center = grid.center_unchecked(ix, iy, k);
            let mut best = 0.0f64;
            for (cam, map) in views {
                let Some(((u, v), d)) = project_point(cam, &center) else {
                    continue;
                };
                let Some(prm) = map.sample(u, v) else {
                    continue;
                };
                best = best.max(visibility_prob(d, &prm));
            }
            *slot = best as f32;
        }
    });
    Ok(vol)
}

/// Collapses a visibility volume to the BEV raster: maximum over height,
/// then block-average pooling.
pub fn visibility_bev(vol: &Tensor, grid: &VoxelGrid) -> Result<Tensor> {
    if vol.rank() != 3 {
        return Err(Error::shape(
            "visibility volume",
            "X' x Y' x Z'",
            format!("{:?}", vol.dims()),
        ));
    }
    let (nx, ny, nz) = (vol.dim(0), vol.dim(1), vol.dim(2));
    let mut flat = Tensor::zeros(&[nx, ny])?;
    let data = vol.data();
    exec::for_each_chunk(flat.data_mut(), 1, |cell, out| {
        let base = cell * nz;
        let mut best = 0.0f32;
        for k in 0..nz {
            best = best.max(data[base + k]);
        }
        out[0] = best;
    });
    crate::aggregation::to_bev_grid(&flat, grid)
}

/// Ground-truth visibility from dense depth maps: treats each rendered
/// depth as a near-delta Laplace distribution with diversity `b_gt` and
/// runs the closed-form chain. Returns the X x Y BEV visibility map.
pub fn gt_visibility(
    views: &[(CameraModel, Tensor)],
    grid: &VoxelGrid,
    b_gt: f64,
) -> Result<Tensor> {
    if !(b_gt.is_finite() && b_gt >= 0.0) {
        return Err(Error::invalid(
            "b_gt",
            format!("must be non-negative and finite, got {}", b_gt),
        ));
    }
    let mut param_views = Vec::with_capacity(views.len());
    for (cam, dense) in views {
        let map = crate::synth::delta_params(dense, b_gt)?;
        param_views.push((cam.clone(), map));
    }
    let vol = visibility_volume(&param_views, grid)?;
    visibility_bev(&vol, grid)
}
