//! Collapses lifted volumes onto the BEV plane.
//!
//! The main path turns per-voxel likelihood mass into a normalized
//! occupancy distribution along each vertical column and compresses
//! features as the occupancy-weighted sum over height. `concat_pillars` is
//! the flatten-everything baseline for comparison.

use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::VoxelGrid;
use crate::tensor::Tensor;

/// Default occupancy bias: keeps empty columns well-defined without
/// noticeably disturbing columns that carry real mass.
pub const DEFAULT_OCCUPANCY_BIAS: f64 = 1e-3;

/// Normalizes likelihood mass into per-column occupancy:
/// `O(z) = (P(z) + b_o) / (sum_z' P(z') + Z' * b_o)`.
///
/// Every column sums to 1. A column with zero total mass comes out uniform,
/// via the bias when `b_o > 0` and via an explicit `1/Z'` fallback when
/// `b_o == 0`.
pub fn occupancy(lik: &Tensor, b_o: f64) -> Result<Tensor> {
    if lik.rank() != 3 {
        return Err(Error::shape(
            "likelihood volume",
            "X' x Y' x Z'",
            format!("{:?}", lik.dims()),
        ));
    }
    if !(b_o.is_finite() && b_o >= 0.0) {
        return Err(Error::invalid(
            "occupancy bias",
            format!("must be non-negative and finite, got {}", b_o),
        ));
    }
    let nz = lik.dim(2);
    let mut out = lik.clone();
    exec::for_each_chunk(out.data_mut(), nz, |_, col| {
        let total: f64 = col.iter().map(|&v| v as f64).sum();
        let denom = total + nz as f64 * b_o;
        if denom == 0.0 {
            col.fill((1.0 / nz as f64) as f32);
        } else {
            for v in col.iter_mut() {
                *v = ((*v as f64 + b_o) / denom) as f32;
            }
        }
    });
    Ok(out)
}

/// Occupancy-weighted reduction over height:
/// `out(x, y, c) = sum_z occ(x, y, z) * feat(x, y, z, c)`.
pub fn compress(feat: &Tensor, occ: &Tensor) -> Result<Tensor> {
    if feat.rank() != 4 {
        return Err(Error::shape(
            "feature volume",
            "X' x Y' x Z' x CH",
            format!("{:?}", feat.dims()),
        ));
    }
    if occ.dims() != &feat.dims()[..3] {
        return Err(Error::shape(
            "occupancy volume",
            format!("{:?}", &feat.dims()[..3]),
            format!("{:?}", occ.dims()),
        ));
    }
    let (nx, ny, nz, ch) = (feat.dim(0), feat.dim(1), feat.dim(2), feat.dim(3));
    let mut out = Tensor::zeros(&[nx, ny, ch])?;
    let feat_data = feat.data();
    let occ_data = occ.data();
    exec::for_each_chunk(out.data_mut(), ch, |col, cell| {
        let fbase = col * nz * ch;
        let obase = col * nz;
        for (c, o) in cell.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for k in 0..nz {
                acc += occ_data[obase + k] as f64 * feat_data[fbase + k * ch + c] as f64;
            }
            *o = acc as f32;
        }
    });
    Ok(out)
}

/// Flattens each column into one long channel vector: voxel (x, y, z)
/// channel c lands at output channel `z * CH + c`. Purely a relabeling of
/// the row-major layout.
pub fn concat_pillars(feat: &Tensor) -> Result<Tensor> {
    if feat.rank() != 4 {
        return Err(Error::shape(
            "feature volume",
            "X' x Y' x Z' x CH",
            format!("{:?}", feat.dims()),
        ));
    }
    let dims = [feat.dim(0), feat.dim(1), feat.dim(2) * feat.dim(3)];
    Tensor::from_vec(&dims, feat.data().to_vec())
}

/// Block-average pooling from the fine raster to the BEV raster. Accepts
/// X' x Y' or X' x Y' x C input; pooling factors must divide exactly.
pub fn to_bev_grid(map: &Tensor, grid: &VoxelGrid) -> Result<Tensor> {
    let (rank_ok, ch) = match map.rank() {
        2 => (true, 1),
        3 => (true, map.dim(2)),
        _ => (false, 0),
    };
    if !rank_ok {
        return Err(Error::shape(
            "BEV pooling input",
            "X' x Y' or X' x Y' x C",
            format!("{:?}", map.dims()),
        ));
    }
    let (fine_x, fine_y) = (map.dim(0), map.dim(1));
    let (bev_x, bev_y) = grid.bev_counts;
    if fine_x % bev_x != 0 || fine_y % bev_y != 0 {
        return Err(Error::invalid(
            "grid.bev_counts",
            format!(
                "pooling factor must be an integer: {} x {} input onto {} x {} BEV",
                fine_x, fine_y, bev_x, bev_y
            ),
        ));
    }
    let (px, py) = (fine_x / bev_x, fine_y / bev_y);
    let norm = 1.0 / (px * py) as f64;

    let mut out = if map.rank() == 2 {
        Tensor::zeros(&[bev_x, bev_y])?
    } else {
        Tensor::zeros(&[bev_x, bev_y, ch])?
    };
    let data = map.data();
    exec::for_each_chunk(out.data_mut(), ch, |cell, vals| {
        let bx = cell / bev_y;
        let by = cell % bev_y;
        for (c, v) in vals.iter_mut().enumerate() {
            let mut acc = 0.0f64;
            for dx in 0..px {
                for dy in 0..py {
                    let fx = bx * px + dx;
                    let fy = by * py + dy;
                    acc += data[(fx * fine_y + fy) * ch + c] as f64;
                }
            }
            *v = (acc * norm) as f32;
        }
    });
    Ok(out)
}
