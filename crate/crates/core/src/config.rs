//! JSON configuration files for camera rigs, voxel grids, and scenes.

use crate::error::{Error, Result};
use crate::geometry::{CameraModel, VoxelGrid};
use crate::synth::{Aabb, Rect, Scene};
use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

/// A set of cameras sharing one image size.
#[derive(Debug, Clone)]
pub struct Rig {
    pub image_size: (usize, usize),
    pub cameras: Vec<CameraModel>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    image_size: [usize; 2],
    cameras: Vec<CameraFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CameraFile {
    name: String,
    #[serde(rename = "K")]
    k: [[f64; 3]; 3],
    #[serde(rename = "R")]
    r: [[f64; 3]; 3],
    #[serde(rename = "T")]
    t: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    origin: [f64; 3],
    counts: [usize; 3],
    voxel_size: [f64; 3],
    bev_counts: [usize; 2],
    bev_cell: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    #[serde(default)]
    occluders: Vec<BoxFile>,
    #[serde(default)]
    road_rects: Vec<RectFile>,
    #[serde(default)]
    ground: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoxFile {
    min: [f64; 3],
    max: [f64; 3],
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RectFile {
    min: [f64; 2],
    max: [f64; 2],
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        what: e.to_string(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        what: e.to_string(),
    })?;
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn mat3(rows: &[[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| rows[i][j])
}

pub fn load_rig(path: &Path) -> Result<Rig> {
    let file: RigFile = read_json(path)?;
    let image_size = (file.image_size[0], file.image_size[1]);
    let mut cameras = Vec::with_capacity(file.cameras.len());
    for (i, c) in file.cameras.iter().enumerate() {
        let cam = CameraModel::new(
            c.name.clone(),
            mat3(&c.k),
            mat3(&c.r),
            Vector3::from_column_slice(&c.t),
            image_size,
        )
        .map_err(|e| Error::invalid(format!("cameras[{}]", i), e.to_string()))?;
        cameras.push(cam);
    }
    if cameras.is_empty() {
        return Err(Error::invalid("cameras", "rig needs at least one camera"));
    }
    Ok(Rig {
        image_size,
        cameras,
    })
}

pub fn save_rig(path: &Path, rig: &Rig) -> Result<()> {
    let cameras = rig
        .cameras
        .iter()
        .map(|c| CameraFile {
            name: c.name.clone(),
            k: [
                [c.k[(0, 0)], c.k[(0, 1)], c.k[(0, 2)]],
                [c.k[(1, 0)], c.k[(1, 1)], c.k[(1, 2)]],
                [c.k[(2, 0)], c.k[(2, 1)], c.k[(2, 2)]],
            ],
            r: [
                [c.r[(0, 0)], c.r[(0, 1)], c.r[(0, 2)]],
                [c.r[(1, 0)], c.r[(1, 1)], c.r[(1, 2)]],
                [c.r[(2, 0)], c.r[(2, 1)], c.r[(2, 2)]],
            ],
            t: [c.t.x, c.t.y, c.t.z],
        })
        .collect();
    write_json(
        path,
        &RigFile {
            image_size: [rig.image_size.0, rig.image_size.1],
            cameras,
        },
    )
}

pub fn load_grid(path: &Path) -> Result<VoxelGrid> {
    let file: GridFile = read_json(path)?;
    VoxelGrid::new(
        Vector3::from_column_slice(&file.origin),
        (file.voxel_size[0], file.voxel_size[1], file.voxel_size[2]),
        (file.counts[0], file.counts[1], file.counts[2]),
        (file.bev_counts[0], file.bev_counts[1]),
        file.bev_cell,
    )
}

pub fn save_grid(path: &Path, grid: &VoxelGrid) -> Result<()> {
    write_json(
        path,
        &GridFile {
            origin: [grid.origin.x, grid.origin.y, grid.origin.z],
            counts: [grid.counts.0, grid.counts.1, grid.counts.2],
            voxel_size: [grid.voxel_size.0, grid.voxel_size.1, grid.voxel_size.2],
            bev_counts: [grid.bev_counts.0, grid.bev_counts.1],
            bev_cell: grid.bev_cell,
        },
    )
}

pub fn load_scene(path: &Path) -> Result<Scene> {
    let file: SceneFile = read_json(path)?;
    let mut occluders = Vec::with_capacity(file.occluders.len());
    for (i, b) in file.occluders.iter().enumerate() {
        let aabb = Aabb::new(
            Vector3::from_column_slice(&b.min),
            Vector3::from_column_slice(&b.max),
        )
        .map_err(|e| Error::invalid(format!("occluders[{}]", i), e.to_string()))?;
        occluders.push(aabb);
    }
    let mut rects = Vec::with_capacity(file.road_rects.len());
    for (i, r) in file.road_rects.iter().enumerate() {
        let rect = Rect::new(r.min, r.max)
            .map_err(|e| Error::invalid(format!("road_rects[{}]", i), e.to_string()))?;
        rects.push(rect);
    }
    Ok(Scene::new(occluders, rects, file.ground))
}

pub fn save_scene(path: &Path, scene: &Scene) -> Result<()> {
    write_json(
        path,
        &SceneFile {
            occluders: scene
                .occluders()
                .iter()
                .map(|b| BoxFile {
                    min: [b.min().x, b.min().y, b.min().z],
                    max: [b.max().x, b.max().y, b.max().z],
                })
                .collect(),
            road_rects: scene
                .road_rects()
                .iter()
                .map(|r| RectFile {
                    min: r.min(),
                    max: r.max(),
                })
                .collect(),
            ground: scene.has_ground(),
        },
    )
}
