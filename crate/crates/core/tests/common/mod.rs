//! Independent reference implementations used to cross-check the library.
//!
//! Everything here recomputes its quantity from first principles (numeric
//! quadrature, finite differences, per-pixel splatting, segment casting)
//! rather than calling the code under test, so agreement between the two
//! paths is meaningful.

#![allow(dead_code)]

use pdbev_core::nalgebra::{Matrix3, Vector3};
use pdbev_core::{CameraModel, Tensor, VoxelGrid};

/// Laplace density evaluated directly from its formula.
pub fn laplace_density(x: f64, mu: f64, b: f64) -> f64 {
    (-(x - mu).abs() / b).exp() / (2.0 * b)
}

fn trapezoid(lo: f64, hi: f64, steps: usize, mu: f64, b: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let h = (hi - lo) / steps as f64;
    let mut acc = 0.5 * (laplace_density(lo, mu, b) + laplace_density(hi, mu, b));
    for i in 1..steps {
        acc += laplace_density(lo + i as f64 * h, mu, b);
    }
    acc * h
}

/// Numeric mass of the Laplace density over [0, d].
///
/// The quadrature window is clipped to forty scale lengths around the mode,
/// where all but ~1e-17 of the mass lives, and split at the kink so the
/// trapezoid rule only ever sees smooth pieces. 1e5 nodes total.
pub fn quadrature_mass(d: f64, mu: f64, b: f64) -> f64 {
    let lo = (mu - 40.0 * b).max(0.0);
    let hi = (mu + 40.0 * b).min(d);
    if hi <= lo {
        // The interval [0, d] carries only far-tail mass; the clipped
        // integral is zero and the true value is below 1e-17.
        return 0.0;
    }
    if lo < mu && mu < hi {
        trapezoid(lo, mu, 50_000, mu, b) + trapezoid(mu, hi, 50_000, mu, b)
    } else {
        trapezoid(lo, hi, 100_000, mu, b)
    }
}

/// Negative log-likelihood of one depth sample, written out directly.
pub fn nll_of(mu: f64, b: f64, d_gt: f64) -> f64 {
    (2.0 * b).ln() + (d_gt - mu).abs() / b
}

/// Back-projects pixel (u, v) at camera depth d into ego coordinates.
pub fn unproject(cam: &CameraModel, u: f64, v: f64, d: f64) -> Vector3<f64> {
    let inv_k = cam.k.try_inverse().expect("intrinsics must be invertible");
    let p_cam = inv_k * Vector3::new(u, v, 1.0) * d;
    cam.r.transpose() * (p_cam - cam.t)
}

/// Index of the voxel containing an ego-frame point, if any.
pub fn voxel_of(grid: &VoxelGrid, p: &Vector3<f64>) -> Option<[usize; 3]> {
    let size = [grid.voxel_size.0, grid.voxel_size.1, grid.voxel_size.2];
    let counts = [grid.counts.0, grid.counts.1, grid.counts.2];
    let mut idx = [0usize; 3];
    for a in 0..3 {
        let rel = (p[a] - grid.origin[a]) / size[a];
        if rel < 0.0 || rel >= counts[a] as f64 {
            return None;
        }
        idx[a] = rel as usize;
    }
    Some(idx)
}

/// Reference lifting path: walks the pixels instead of the voxels.
///
/// Each pixel back-projects to its measured depth and deposits
/// `density-peak * feature` into the single voxel containing that point.
/// For surfaces aligned so voxel centers sit exactly on back-projected
/// pixels, this forward splat and the library's gather must agree.
pub fn splat_lift(
    views: &[(CameraModel, Tensor, Tensor)],
    grid: &VoxelGrid,
    b: f64,
) -> (Vec<f64>, Vec<f64>) {
    let (nx, ny, nz) = grid.counts;
    let ch = views[0].1.dims()[2];
    let mut feat = vec![0.0f64; nx * ny * nz * ch];
    let mut mass = vec![0.0f64; nx * ny * nz];
    let peak = 1.0 / (2.0 * b);
    for (cam, features, depth) in views {
        let (rows, cols) = cam.image_size;
        for r in 0..rows {
            for c in 0..cols {
                let d = depth.at(&[r, c]) as f64;
                let p = unproject(cam, c as f64, r as f64, d);
                let Some([i, j, k]) = voxel_of(grid, &p) else {
                    continue;
                };
                let cell = (i * ny + j) * nz + k;
                mass[cell] += peak;
                for q in 0..ch {
                    feat[cell * ch + q] += peak * features.at(&[r, c, q]) as f64;
                }
            }
        }
    }
    (feat, mass)
}

/// Axis-aligned box for the segment caster below.
pub struct Slab {
    pub min: Vector3<f64>,
    pub max: Vector3<f64>,
}

/// Whether the open segment from `origin` toward `target` crosses `boxes`
/// strictly before reaching the target.
///
/// A plain slab test per box, written against parametric t in [0, 1] along
/// the segment so it needs no normalization or depth bookkeeping.
pub fn segment_blocked(origin: &Vector3<f64>, target: &Vector3<f64>, boxes: &[Slab]) -> bool {
    let dir = target - origin;
    for slab in boxes {
        let mut t_in = f64::NEG_INFINITY;
        let mut t_out = f64::INFINITY;
        let mut miss = false;
        for a in 0..3 {
            if dir[a].abs() < 1e-15 {
                if origin[a] < slab.min[a] || origin[a] > slab.max[a] {
                    miss = true;
                    break;
                }
                continue;
            }
            let mut t0 = (slab.min[a] - origin[a]) / dir[a];
            let mut t1 = (slab.max[a] - origin[a]) / dir[a];
            if t0 > t1 {
                std::mem::swap(&mut t0, &mut t1);
            }
            t_in = t_in.max(t0);
            t_out = t_out.min(t1);
            if t_in > t_out {
                miss = true;
                break;
            }
        }
        if miss {
            continue;
        }
        let entry = if t_in > 1e-9 { t_in } else { t_out };
        if entry > 1e-9 && entry < 1.0 - 1e-9 {
            return true;
        }
    }
    false
}

/// Whether an ego point lands inside the camera's image with positive depth.
pub fn in_frustum(cam: &CameraModel, p: &Vector3<f64>) -> bool {
    let p_cam = cam.r * p + cam.t;
    if p_cam.z <= 1e-6 {
        return false;
    }
    let u = cam.k[(0, 0)] * p_cam.x / p_cam.z + cam.k[(0, 2)];
    let v = cam.k[(1, 1)] * p_cam.y / p_cam.z + cam.k[(1, 2)];
    let (rows, cols) = cam.image_size;
    u >= 0.0 && u <= (cols - 1) as f64 && v >= 0.0 && v <= (rows - 1) as f64
}

/// Hand-built camera with explicit pose, for fixtures that need exact
/// pixel-to-voxel alignment. Intrinsics arrive as `[fx, fy, cx, cy]`.
pub fn aligned_camera(
    name: &str,
    center: Vector3<f64>,
    intr: [f64; 4],
    rows: usize,
    cols: usize,
) -> CameraModel {
    let [fx, fy, cx, cy] = intr;
    // Looks down +y: ego x stays image x, ego -z becomes image y.
    let r = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let t = -r * center;
    let k = Matrix3::new(fx, 0.0, cx, 0.0, fy, cy, 0.0, 0.0, 1.0);
    CameraModel {
        name: name.to_string(),
        k,
        r,
        t,
        image_size: (rows, cols),
    }
}
