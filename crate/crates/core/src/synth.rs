//! Synthetic ground truth: analytic scenes rendered by exact ray casting.
//!
//! Scenes are axis-aligned occluder boxes over an optional ground plane at
//! z = 0, plus road rectangles that define BEV segmentation labels. Every
//! intersection is closed form, so rendered depth is exact up to floating
//! point and serves as an independent oracle for the lifting and
//! visibility code.

use crate::depth::DepthParamMap;
use crate::error::{Error, Result};
use crate::exec;
use crate::geometry::{CameraModel, VoxelGrid};
use crate::tensor::Tensor;
use nalgebra::{Matrix3, Vector3};

/// Depth recorded for rays that escape the scene. Also the cap: anything
/// farther counts as a miss.
pub const FAR_DEPTH: f64 = 200.0;

const RAY_EPS: f64 = 1e-9;

/// Axis-aligned box occluder.
#[derive(Debug, Clone)]
pub struct Aabb {
    min: Vector3<f64>,
    max: Vector3<f64>,
}

impl Aabb {
    pub fn new(min: Vector3<f64>, max: Vector3<f64>) -> Result<Self> {
        for i in 0..3 {
            if !(min[i].is_finite() && max[i].is_finite()) {
                return Err(Error::invalid("box", "corners must be finite"));
            }
            if min[i] >= max[i] {
                return Err(Error::invalid(
                    "box",
                    format!(
                        "min must be below max per axis, got {} >= {}",
                        min[i], max[i]
                    ),
                ));
            }
        }
        Ok(Self { min, max })
    }

    pub fn min(&self) -> Vector3<f64> {
        self.min
    }

    pub fn max(&self) -> Vector3<f64> {
        self.max
    }
}

/// Axis-aligned road rectangle in the ground plane.
#[derive(Debug, Clone)]
pub struct Rect {
    min: [f64; 2],
    max: [f64; 2],
}

impl Rect {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        for i in 0..2 {
            if !(min[i].is_finite() && max[i].is_finite()) {
                return Err(Error::invalid("rect", "corners must be finite"));
            }
            if min[i] >= max[i] {
                return Err(Error::invalid(
                    "rect",
                    format!(
                        "min must be below max per axis, got {} >= {}",
                        min[i], max[i]
                    ),
                ));
            }
        }
        Ok(Self { min, max })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.min[0] && x <= self.max[0] && y >= self.min[1] && y <= self.max[1]
    }

    pub fn min(&self) -> [f64; 2] {
        self.min
    }

    pub fn max(&self) -> [f64; 2] {
        self.max
    }
}

/// World model for the synthetic oracle.
#[derive(Debug, Clone)]
pub struct Scene {
    occluders: Vec<Aabb>,
    road_rects: Vec<Rect>,
    ground: bool,
}

impl Scene {
    pub fn new(occluders: Vec<Aabb>, road_rects: Vec<Rect>, ground: bool) -> Self {
        Self {
            occluders,
            road_rects,
            ground,
        }
    }

    pub fn occluders(&self) -> &[Aabb] {
        &self.occluders
    }

    pub fn road_rects(&self) -> &[Rect] {
        &self.road_rects
    }

    pub fn has_ground(&self) -> bool {
        self.ground
    }
}

/// First positive hit of the ray `o + t*d` with the box, by the slab
/// method. A ray starting inside reports the exit face.
fn ray_box(o: &Vector3<f64>, d: &Vector3<f64>, b: &Aabb) -> Option<f64> {
    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for i in 0..3 {
        if d[i].abs() < 1e-15 {
            if o[i] < b.min[i] || o[i] > b.max[i] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[i];
        let ta = (b.min[i] - o[i]) * inv;
        let tb = (b.max[i] - o[i]) * inv;
        let (lo, hi) = if ta <= tb { (ta, tb) } else { (tb, ta) };
        t_enter = t_enter.max(lo);
        t_exit = t_exit.min(hi);
        if t_enter > t_exit {
            return None;
        }
    }
    if t_enter > RAY_EPS {
        Some(t_enter)
    } else if t_exit > RAY_EPS {
        Some(t_exit)
    } else {
        None
    }
}

/// Casts one ray and returns (depth along the camera axis, hit ground,
/// hit anything). `d` must be scaled so its camera-frame z component is 1,
/// making the slab parameter equal to camera z-depth.
fn cast(scene: &Scene, o: &Vector3<f64>, d: &Vector3<f64>) -> (f64, bool, bool) {
    let mut best = f64::INFINITY;
    let mut on_ground = false;
    for b in &scene.occluders {
        if let Some(t) = ray_box(o, d, b) {
            if t < best {
                best = t;
                on_ground = false;
            }
        }
    }
    if scene.ground && d.z.abs() > 1e-15 {
        let t = -o.z / d.z;
        if t > RAY_EPS && t < best {
            best = t;
            on_ground = true;
        }
    }
    if best < FAR_DEPTH {
        (best, on_ground, true)
    } else {
        (FAR_DEPTH, false, false)
    }
}

/// Renders dense depth plus per-pixel masks for ground hits and hits of
/// any kind. Misses read exactly `FAR_DEPTH` with both masks zero.
pub(crate) fn raycast_full(scene: &Scene, cam: &CameraModel) -> Result<(Tensor, Tensor, Tensor)> {
    let (rows, cols) = cam.image_size;
    let inv_k = cam
        .k
        .try_inverse()
        .ok_or_else(|| Error::invalid("K", "intrinsics must be invertible"))?;
    let r_t = cam.r.transpose();
    let origin = cam.center();

    // One ray pass fills depth, ground flag, and hit flag side by side.
    let mut packed = vec![0.0f32; rows * cols * 3];
    exec::for_each_chunk(&mut packed, cols * 3, |row, out| {
        for col in 0..cols {
            let px = Vector3::new(col as f64, row as f64, 1.0);
            let mut dir_cam = inv_k * px;
            dir_cam /= dir_cam.z;
            let dir = r_t * dir_cam;
            let (d, g, h) = cast(scene, &origin, &dir);
            out[col * 3] = d as f32;
            out[col * 3 + 1] = g as u32 as f32;
            out[col * 3 + 2] = h as u32 as f32;
        }
    });
    let mut depth = Tensor::zeros(&[rows, cols])?;
    let mut ground = Tensor::zeros(&[rows, cols])?;
    let mut hit = Tensor::zeros(&[rows, cols])?;
    for i in 0..rows * cols {
        depth.data_mut()[i] = packed[i * 3];
        ground.data_mut()[i] = packed[i * 3 + 1];
        hit.data_mut()[i] = packed[i * 3 + 2];
    }
    Ok((depth, ground, hit))
}

/// Dense depth map for a camera: nearest intersection per pixel,
/// `FAR_DEPTH` where the ray escapes.
pub fn raycast_depth(scene: &Scene, cam: &CameraModel) -> Result<Tensor> {
    Ok(raycast_full(scene, cam)?.0)
}

/// Wraps a dense depth map as a near-delta parametric map: location is the
/// rendered depth, diversity is `b_small` everywhere (clamped to the model
/// floor).
pub fn delta_params(depth: &Tensor, b_small: f64) -> Result<DepthParamMap> {
    if depth.rank() != 2 {
        return Err(Error::shape(
            "depth",
            "H x W",
            format!("{:?}", depth.dims()),
        ));
    }
    if !(b_small.is_finite() && b_small >= 0.0) {
        return Err(Error::invalid(
            "b_small",
            format!("must be non-negative and finite, got {}", b_small),
        ));
    }
    let (rows, cols) = (depth.dim(0), depth.dim(1));
    let mut data = Vec::with_capacity(rows * cols * 2);
    for &d in depth.data() {
        if d <= 0.0 {
            return Err(Error::invalid(
                "depth",
                format!("must be positive, got {}", d),
            ));
        }
        data.push(d);
        data.push(b_small as f32);
    }
    DepthParamMap::new(Tensor::from_vec(&[rows, cols, 2], data)?)
}

/// Rasterizes road rectangles onto the BEV grid: a cell is road iff its
/// center lies inside any rectangle. Rectangles must sit inside the grid
/// footprint.
pub fn render_gt_bev(scene: &Scene, grid: &VoxelGrid) -> Result<Tensor> {
    let (bx, by) = grid.bev_counts;
    let x0 = grid.origin.x;
    let y0 = grid.origin.y;
    let x1 = x0 + bx as f64 * grid.bev_cell;
    let y1 = y0 + by as f64 * grid.bev_cell;
    for (i, r) in scene.road_rects.iter().enumerate() {
        let inside = r.min[0] >= x0 - 1e-9
            && r.min[1] >= y0 - 1e-9
            && r.max[0] <= x1 + 1e-9
            && r.max[1] <= y1 + 1e-9;
        if !inside {
            return Err(Error::invalid(
                format!("road_rects[{}]", i),
                "rectangle extends beyond the grid footprint",
            ));
        }
    }
    let mut mask = Tensor::zeros(&[bx, by])?;
    for ix in 0..bx {
        for iy in 0..by {
            let (cx, cy) = grid.bev_center(ix, iy);
            let road = scene.road_rects.iter().any(|r| r.contains(cx, cy));
            *mask.at_mut(&[ix, iy]) = road as u32 as f32;
        }
    }
    Ok(mask)
}

/// Builds an `n`-camera surround rig at the given height: camera 0 looks
/// down ego +Y, and successive cameras step the yaw by 360/n degrees.
/// Intrinsics come from the horizontal field of view with square pixels
/// and the principal point at the image center.
pub fn make_rig(
    n: usize,
    fov_deg: f64,
    image_size: (usize, usize),
    height_m: f64,
) -> Result<Vec<CameraModel>> {
    if n == 0 {
        return Err(Error::invalid("n", "rig needs at least one camera"));
    }
    if !(fov_deg.is_finite() && fov_deg > 0.0 && fov_deg < 180.0) {
        return Err(Error::invalid(
            "fov_deg",
            format!("must lie in (0, 180), got {}", fov_deg),
        ));
    }
    if !height_m.is_finite() {
        return Err(Error::invalid("height_m", "must be finite"));
    }
    let (rows, cols) = image_size;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("image_size", "extents must be positive"));
    }
    let f = (cols as f64 / 2.0) / (fov_deg.to_radians() / 2.0).tan();
    let k = Matrix3::new(
        f,
        0.0,
        (cols as f64 - 1.0) / 2.0,
        0.0,
        f,
        (rows as f64 - 1.0) / 2.0,
        0.0,
        0.0,
        1.0,
    );
    // Maps ego axes (X right, Y forward, Z up) to camera axes (X right,
    // Y down, Z forward) for a camera looking down +Y.
    let forward = Matrix3::new(1.0, 0.0, 0.0, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0);
    let center = Vector3::new(0.0, 0.0, height_m);
    let mut cams = Vec::with_capacity(n);
    for i in 0..n {
        let yaw = i as f64 * std::f64::consts::TAU / n as f64;
        let (s, c) = yaw.sin_cos();
        // Rotation about ego Z by -yaw applied to points, so the camera
        // pans counterclockwise around the rig.
        let spin = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
        let r = forward * spin;
        let t = -r * center;
        cams.push(CameraModel::new(format!("cam{}", i), k, r, t, image_size)?);
    }
    Ok(cams)
}
