//! Scene container: `meta.json` plus one little-endian `f32` file per channel.

use std::fs;
use std::path::Path;

use chrono::{DateTime, SecondsFormat, Utc};
use serde::{Deserialize, Serialize};

use super::{Grid2D, Scene, WORKING_SPACING_M};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub id: String,
    /// RFC 3339 UTC timestamp.
    pub time: String,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub heading_deg: f64,
    pub rows: usize,
    pub cols: usize,
    pub channels: Vec<String>,
}

impl SceneMeta {
    pub fn acquisition_time(&self) -> Result<DateTime<Utc>> {
        DateTime::parse_from_rfc3339(&self.time)
            .map(|t| t.with_timezone(&Utc))
            .map_err(|e| Error::Data(format!("scene {}: bad time `{}`: {e}", self.id, self.time)))
    }
}

pub(crate) fn encode_f32(grid: &Grid2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(grid.values().len() * 4);
    for &v in grid.values() {
        let x = if grid.is_fill(v) { f32::NAN } else { v as f32 };
        out.extend_from_slice(&x.to_le_bytes());
    }
    out
}

pub(crate) fn decode_f32(bytes: &[u8], rows: usize, cols: usize, what: &Path) -> Result<Grid2D> {
    if bytes.len() != rows * cols * 4 {
        return Err(Error::Data(format!(
            "{}: expected {} bytes for {rows}x{cols}, found {}",
            what.display(),
            rows * cols * 4,
            bytes.len()
        )));
    }
    let values = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect();
    Grid2D::new(rows, cols, WORKING_SPACING_M, values)
}

pub(crate) fn meta_bytes(meta: &SceneMeta) -> Vec<u8> {
    serde_json::to_vec_pretty(meta).expect("meta serializes")
}

/// File name and contents of every file in a scene directory.
pub fn scene_files(scene: &Scene) -> Result<Vec<(String, Vec<u8>)>> {
    let (rows, cols) = scene
        .dims()
        .ok_or_else(|| Error::Data(format!("scene {} has no channels", scene.id)))?;
    let meta = SceneMeta {
        id: scene.id.clone(),
        time: scene
            .acquisition_time
            .to_rfc3339_opts(SecondsFormat::Secs, true),
        origin_lat: scene.origin_lat,
        origin_lon: scene.origin_lon,
        heading_deg: scene.heading,
        rows,
        cols,
        channels: scene.channels.keys().cloned().collect(),
    };
    let mut files = vec![("meta.json".to_string(), meta_bytes(&meta))];
    for (name, grid) in &scene.channels {
        files.push((format!("{name}.f32"), encode_f32(grid)));
    }
    Ok(files)
}

pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (name, bytes) in scene_files(scene)? {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn read_scene_meta(dir: &Path) -> Result<SceneMeta> {
    let path = dir.join("meta.json");
    let text = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_slice(&text).map_err(|e| Error::json(&path, e))
}

pub fn read_scene(dir: &Path) -> Result<Scene> {
    let meta = read_scene_meta(dir)?;
    let names: Vec<&str> = meta.channels.iter().map(String::as_str).collect();
    load(dir, &meta, &names)
}

/// Loads only the listed channels.
pub fn read_scene_channels(dir: &Path, names: &[&str]) -> Result<Scene> {
    let meta = read_scene_meta(dir)?;
    for n in names {
        if !meta.channels.iter().any(|c| c == n) {
            return Err(Error::Config(format!(
                "scene {} has no `{n}` channel",
                meta.id
            )));
        }
    }
    load(dir, &meta, names)
}

fn load(dir: &Path, meta: &SceneMeta, names: &[&str]) -> Result<Scene> {
    let mut scene = Scene::new(
        meta.id.clone(),
        meta.acquisition_time()?,
        meta.origin_lat,
        meta.origin_lon,
        meta.heading_deg,
    );
    for name in names {
        let path = dir.join(format!("{name}.f32"));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        scene.insert(name, decode_f32(&bytes, meta.rows, meta.cols, &path)?)?;
    }
    Ok(scene)
}
