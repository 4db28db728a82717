//! Cameras, voxel grids, and the projective plumbing between them.
//!
//! Conventions used across the crate:
//! - ego frame: X right, Y forward, Z up; units are meters
//! - camera frame: +Z is the viewing direction; `p_cam = R * p_ego + T`
//! - pixels: (0,0) is the top-left sample center, `u` indexes columns and
//!   `v` indexes rows, and anything in `[0, W-1] x [0, H-1]` is in bounds
//! - grids: `origin` is the minimum corner; voxel (i,j,k) has center
//!   `origin + ((i+0.5)*sx, (j+0.5)*sy, (k+0.5)*sz)`

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Points closer to the image plane than this are treated as behind the
/// camera and never project.
pub const DEPTH_EPSILON: f64 = 1e-6;

const ROTATION_TOL: f64 = 1e-6;

/// Pinhole camera with extrinsics mapping ego coordinates into the camera
/// frame.
#[derive(Debug, Clone)]
pub struct CameraModel {
    pub name: String,
    pub k: Matrix3<f64>,
    pub r: Matrix3<f64>,
    pub t: Vector3<f64>,
    /// (rows, cols)
    pub image_size: (usize, usize),
}

impl CameraModel {
    pub fn new(
        name: impl Into<String>,
        k: Matrix3<f64>,
        r: Matrix3<f64>,
        t: Vector3<f64>,
        image_size: (usize, usize),
    ) -> Result<CameraModel> {
        let name = name.into();
        if name.is_empty() {
            return Err(Error::invalid("camera.name", "must not be empty"));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::invalid(
                "camera.image_size",
                format!("extents must be positive, got {:?}", image_size),
            ));
        }
        if k.iter().any(|v| !v.is_finite())
            || r.iter().any(|v| !v.is_finite())
            || t.iter().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("camera", "K, R, T must be finite"));
        }
        for (row, col) in [(1, 0), (2, 0), (2, 1)] {
            if k[(row, col)] != 0.0 {
                return Err(Error::invalid(
                    "camera.K",
                    format!(
                        "must be upper-triangular, entry ({},{}) is {}",
                        row,
                        col,
                        k[(row, col)]
                    ),
                ));
            }
        }
        if k[(0, 0)] <= 0.0 || k[(1, 1)] <= 0.0 || k[(2, 2)] <= 0.0 {
            return Err(Error::invalid(
                "camera.K",
                "diagonal entries must be positive",
            ));
        }
        let gram = r.transpose() * r - Matrix3::identity();
        let dev = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > ROTATION_TOL {
            return Err(Error::invalid(
                "camera.R",
                format!("not orthonormal, max |R'R - I| = {:.3e}", dev),
            ));
        }
        if r.determinant() <= 0.0 {
            return Err(Error::invalid("camera.R", "determinant must be positive"));
        }
        Ok(CameraModel {
            name,
            k,
            r,
            t,
            image_size,
        })
    }

    /// Camera center in ego coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.r.transpose() * self.t)
    }
}

/// Projects an ego-frame point into a camera.
///
/// Returns the subpixel position and the camera-frame z-depth, or `None`
/// when the point lies at or behind the image plane. Callers decide what to
/// do with positions outside the pixel rectangle; this function only rejects
/// non-positive depth.
pub fn project_point(cam: &CameraModel, p: &Vector3<f64>) -> Option<((f64, f64), f64)> {
    let pc = cam.r * p + cam.t;
    let d = pc.z;
    if d <= DEPTH_EPSILON {
        return None;
    }
    let ph = cam.k * pc;
    Some(((ph.x / ph.z, ph.y / ph.z), d))
}

/// Axis-aligned voxel lattice plus the coarser BEV raster that shares its
/// footprint.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    pub origin: Vector3<f64>,
    /// (sx, sy, sz) in meters
    pub voxel_size: (f64, f64, f64),
    /// (X', Y', Z') voxel counts
    pub counts: (usize, usize, usize),
    /// (X, Y) BEV cell counts
    pub bev_counts: (usize, usize),
    /// BEV cell edge length in meters
    pub bev_cell: f64,
}

impl VoxelGrid {
    pub fn new(
        origin: Vector3<f64>,
        voxel_size: (f64, f64, f64),
        counts: (usize, usize, usize),
        bev_counts: (usize, usize),
        bev_cell: f64,
    ) -> Result<VoxelGrid> {
        if origin.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid.origin", "must be finite"));
        }
        for (name, s) in [
            ("grid.voxel_size[0]", voxel_size.0),
            ("grid.voxel_size[1]", voxel_size.1),
            ("grid.voxel_size[2]", voxel_size.2),
            ("grid.bev_cell", bev_cell),
        ] {
            if !(s.is_finite() && s > 0.0) {
                return Err(Error::invalid(name, format!("must be positive, got {}", s)));
            }
        }
        if counts.0 == 0 || counts.1 == 0 || counts.2 == 0 {
            return Err(Error::invalid(
                "grid.counts",
                format!("must be positive, got {:?}", counts),
            ));
        }
        if bev_counts.0 == 0 || bev_counts.1 == 0 {
            return Err(Error::invalid(
                "grid.bev_counts",
                format!("must be positive, got {:?}", bev_counts),
            ));
        }
        for (axis, fine, cell, coarse) in [
            (
                "x",
                counts.0 as f64 * voxel_size.0,
                bev_cell,
                bev_counts.0 as f64,
            ),
            (
                "y",
                counts.1 as f64 * voxel_size.1,
                bev_cell,
                bev_counts.1 as f64,
            ),
        ] {
            let bev_extent = coarse * cell;
            if (fine - bev_extent).abs() > 1e-6 * fine.max(bev_extent).max(1.0) {
                return Err(Error::invalid(
                    "grid.bev_counts",
                    format!(
                        "BEV footprint {} m does not match voxel footprint {} m on axis {}",
                        bev_extent, fine, axis
                    ),
                ));
            }
        }
        Ok(VoxelGrid {
            origin,
            voxel_size,
            counts,
            bev_counts,
            bev_cell,
        })
    }

    /// Center of voxel (i, j, k); errors when any index is out of range.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Result<Vector3<f64>> {
        let (nx, ny, nz) = self.counts;
        if i >= nx || j >= ny || k >= nz {
            return Err(Error::invalid(
                "voxel index",
                format!("({}, {}, {}) outside counts {:?}", i, j, k, self.counts),
            ));
        }
        Ok(self.center_unchecked(i, j, k))
    }

    pub(crate) fn center_unchecked(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.origin.x + (i as f64 + 0.5) * self.voxel_size.0,
            self.origin.y + (j as f64 + 0.5) * self.voxel_size.1,
            self.origin.z + (k as f64 + 0.5) * self.voxel_size.2,
        )
    }

    /// Center of BEV cell (i, j) in the ego XY plane.
    pub fn bev_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.x + (i as f64 + 0.5) * self.bev_cell,
            self.origin.y + (j as f64 + 0.5) * self.bev_cell,
        )
    }

    pub fn num_voxels(&self) -> usize {
        self.counts.0 * self.counts.1 * self.counts.2
    }
}

/// The four (row, col, weight) taps of one bilinear read.
pub(crate) type Taps = [(usize, usize, f64); 4];

/// Taps for a bilinear read at subpixel position (u, v), or `None` outside
/// `[0, W-1] x [0, H-1]`.
///
/// At the exact upper edge the fractional part is zero, so the clamped
/// neighbor index carries zero weight and never biases the sample.
pub(crate) fn bilinear_taps(rows: usize, cols: usize, u: f64, v: f64) -> Option<Taps> {
    let max_u = (cols - 1) as f64;
    let max_v = (rows - 1) as f64;
    if !(u >= 0.0 && u <= max_u && v >= 0.0 && v <= max_v) {
        return None;
    }
    let u0 = u.floor() as usize;
    let v0 = v.floor() as usize;
    let u1 = (u0 + 1).min(cols - 1);
    let v1 = (v0 + 1).min(rows - 1);
    let fu = u - u0 as f64;
    let fv = v - v0 as f64;
    Some([
        (v0, u0, (1.0 - fu) * (1.0 - fv)),
        (v0, u1, fu * (1.0 - fv)),
        (v1, u0, (1.0 - fu) * fv),
        (v1, u1, fu * fv),
    ])
}

/// Bilinearly samples an H x W x C map at subpixel position `p = (u, v)`.
///
/// Returns one value per channel, or `None` when `p` falls outside the pixel
/// rectangle. Sampling at integer positions returns stored values exactly.
pub fn bilinear_sample(map: &Tensor, p: (f64, f64)) -> Result<Option<Vec<f32>>> {
    if map.rank() != 3 {
        return Err(Error::shape(
            "bilinear_sample map",
            "rank 3 (H x W x C)",
            format!("rank {}", map.rank()),
        ));
    }
    let (rows, cols, ch) = (map.dim(0), map.dim(1), map.dim(2));
    let taps = match bilinear_taps(rows, cols, p.0, p.1) {
        Some(t) => t,
        None => return Ok(None),
    };
    let data = map.data();
    let mut out = vec![0.0f32; ch];
    for c in 0..ch {
        let mut acc = 0.0f64;
        for &(r, col, w) in &taps {
            acc += w * data[(r * cols + col) * ch + c] as f64;
        }
        out[c] = acc as f32;
    }
    Ok(Some(out))
}
