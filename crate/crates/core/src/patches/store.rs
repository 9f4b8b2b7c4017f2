//! Patch tensors and the JSON-lines catalog.
//!
//! A tensor file `<scene_id>_<row0>_<col0>.f32` holds the channels of
//! [`PATCH_CHANNELS`] in that order, each 256x256 row-major little-endian `f32`,
//! fill encoded as NaN.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{patch_id, Patch, PatchClass, PATCH_SIZE, SSR_VV};
use crate::error::{Error, Result};
use crate::scene::io::{decode_f32, encode_f32};
use crate::scene::{channel, Grid2D};

pub const PATCH_CHANNELS: [&str; 8] = [
    SSR_VV,
    channel::SIGMA0_VH,
    channel::INCIDENCE,
    channel::WDIR_PRIOR,
    channel::WSPD_GMF,
    channel::WSPD_MODEL,
    channel::SIGMA0_VV,
    channel::RAIN_CLASS,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        })
    }
}

/// One catalog line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub scene_id: String,
    pub row0: usize,
    pub col0: usize,
    pub class: PatchClass,
    pub rain_fraction: f64,
    pub delta: Option<f64>,
    pub mean_label_wind: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<Subset>,
}

impl PatchRecord {
    pub fn id(&self) -> String {
        patch_id(&self.scene_id, self.row0, self.col0)
    }
}

pub fn tensor_file_name(scene_id: &str, row0: usize, col0: usize) -> String {
    format!("{}.f32", patch_id(scene_id, row0, col0))
}

pub fn encode_patch_tensor(patch: &Patch) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(PATCH_CHANNELS.len() * PATCH_SIZE * PATCH_SIZE * 4);
    for name in PATCH_CHANNELS {
        let grid = patch.channel(name)?;
        if grid.dims() != (PATCH_SIZE, PATCH_SIZE) {
            return Err(Error::Dimension(format!(
                "patch {} channel `{name}` is not {PATCH_SIZE}x{PATCH_SIZE}",
                patch.id()
            )));
        }
        out.extend_from_slice(&encode_f32(grid));
    }
    Ok(out)
}

pub fn decode_patch_tensor(bytes: &[u8], what: &Path) -> Result<BTreeMap<String, Grid2D>> {
    let plane = PATCH_SIZE * PATCH_SIZE * 4;
    if bytes.len() != plane * PATCH_CHANNELS.len() {
        return Err(Error::Data(format!(
            "{}: expected {} bytes, found {}",
            what.display(),
            plane * PATCH_CHANNELS.len(),
            bytes.len()
        )));
    }
    PATCH_CHANNELS
        .iter()
        .zip(bytes.chunks_exact(plane))
        .map(|(name, chunk)| {
            Ok((
                name.to_string(),
                decode_f32(chunk, PATCH_SIZE, PATCH_SIZE, what)?,
            ))
        })
        .collect()
}

pub fn encode_catalog(records: &[PatchRecord]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("record serializes");
        out.push(b'\n');
    }
    out
}

pub fn decode_catalog(bytes: &[u8], what: &Path) -> Result<Vec<PatchRecord>> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| Error::Data(format!("{}: {e}", what.display())))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| Error::json(what, e)))
        .collect()
}
