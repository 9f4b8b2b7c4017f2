//! Tiling into 256x256 patches, rain/rainless classification and the
//! model-agreement filter.

mod store;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmf;
use crate::scene::{channel, Grid2D, Scene};

pub use store::{
    decode_catalog, decode_patch_tensor, encode_catalog, encode_patch_tensor, tensor_file_name,
    PatchRecord, Subset, PATCH_CHANNELS,
};

pub const PATCH_SIZE: usize = 256;

/// Derived sea-surface-roughness channel added to every patch.
pub const SSR_VV: &str = "ssr_vv";

/// Rain class at and above which a pixel counts as >= 3 mm/h.
const HEAVY_RAIN_CLASS: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PatchClass {
    Rain,
    Rainless,
    Discarded,
}

impl fmt::Display for PatchClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatchClass::Rain => "rain",
            PatchClass::Rainless => "rainless",
            PatchClass::Discarded => "discarded",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchConfig {
    /// A rain patch has strictly more than this fraction of >= 3 mm/h pixels.
    pub rain_fraction_min: f64,
    /// Lowest rain class that counts as a rain signature for rainless patches.
    pub signature_class: u8,
    /// Patches are kept when their rainless-pixel MSE is strictly below this, (m/s)^2.
    pub delta_threshold: f64,
}

impl Default for PatchConfig {
    fn default() -> Self {
        PatchConfig {
            rain_fraction_min: 0.05,
            signature_class: 1,
            delta_threshold: 1.0,
        }
    }
}

/// Split of the valid pixels into >= 3 mm/h (`a_plus`) and the rest (`a_minus`).
#[derive(Debug, Clone, PartialEq)]
pub struct RainPartition {
    pub rows: usize,
    pub cols: usize,
    pub a_plus: Vec<bool>,
    pub a_minus: Vec<bool>,
}

impl RainPartition {
    pub fn plus_count(&self) -> usize {
        self.a_plus.iter().filter(|&&b| b).count()
    }

    pub fn minus_count(&self) -> usize {
        self.a_minus.iter().filter(|&&b| b).count()
    }

    pub fn valid_count(&self) -> usize {
        self.plus_count() + self.minus_count()
    }

    /// Fraction of valid pixels at >= 3 mm/h; zero when nothing is valid.
    pub fn rain_fraction(&self) -> f64 {
        let valid = self.valid_count();
        if valid == 0 {
            0.0
        } else {
            self.plus_count() as f64 / valid as f64
        }
    }
}

pub fn partition_rain(rain_class: &Grid2D) -> Result<RainPartition> {
    let n = rain_class.values().len();
    let mut a_plus = vec![false; n];
    let mut a_minus = vec![false; n];
    for (i, &v) in rain_class.values().iter().enumerate() {
        if rain_class.is_fill(v) {
            continue;
        }
        if !matches!(v, 0.0 | 1.0 | 2.0 | 3.0) {
            return Err(Error::Data(format!("invalid rain class {v} at pixel {i}")));
        }
        if v >= HEAVY_RAIN_CLASS {
            a_plus[i] = true;
        } else {
            a_minus[i] = true;
        }
    }
    Ok(RainPartition {
        rows: rain_class.rows(),
        cols: rain_class.cols(),
        a_plus,
        a_minus,
    })
}

/// Mean squared model/GMF difference over `a_minus`; `None` when `a_minus` has
/// no pixel where both winds are valid.
pub fn delta_rainless(
    wspd_model: &Grid2D,
    wspd_gmf: &Grid2D,
    part: &RainPartition,
) -> Result<Option<f64>> {
    wspd_model.check_same_dims(wspd_gmf)?;
    if wspd_model.dims() != (part.rows, part.cols) {
        return Err(Error::Dimension(
            "rain partition does not match wind grids".into(),
        ));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &keep) in part.a_minus.iter().enumerate() {
        let (m, g) = (wspd_model.values()[i], wspd_gmf.values()[i]);
        if keep && !wspd_model.is_fill(m) && !wspd_gmf.is_fill(g) {
            sum += (m - g) * (m - g);
            n += 1;
        }
    }
    Ok((n > 0).then(|| sum / n as f64))
}

/// Keep a patch iff its Δ is defined and strictly below `threshold`.
pub fn filter_by_delta(delta: Option<f64>, threshold: f64) -> bool {
    matches!(delta, Some(d) if d < threshold)
}

/// Rain/rainless decision before the Δ filter.
pub fn classify(rain_fraction: f64, has_signature: bool, cfg: &PatchConfig) -> PatchClass {
    if rain_fraction > cfg.rain_fraction_min {
        PatchClass::Rain
    } else if !has_signature {
        PatchClass::Rainless
    } else {
        PatchClass::Discarded
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub scene_id: String,
    pub row0: usize,
    pub col0: usize,
    pub size: usize,
    pub channels: BTreeMap<String, Grid2D>,
    pub rain_fraction_3mm: f64,
    /// No pixel at or above the signature class.
    pub rainless: bool,
    pub delta: Option<f64>,
    pub class: PatchClass,
    pub mean_label_wind: Option<f64>,
}

impl Patch {
    pub fn id(&self) -> String {
        patch_id(&self.scene_id, self.row0, self.col0)
    }

    pub fn label_wind(&self) -> Result<&Grid2D> {
        self.channel(channel::WSPD_MODEL)
    }

    pub fn channel(&self, name: &str) -> Result<&Grid2D> {
        self.channels
            .get(name)
            .ok_or_else(|| Error::Config(format!("patch {} has no `{name}` channel", self.id())))
    }

    pub fn record(&self) -> PatchRecord {
        PatchRecord {
            scene_id: self.scene_id.clone(),
            row0: self.row0,
            col0: self.col0,
            class: self.class,
            rain_fraction: self.rain_fraction_3mm,
            delta: self.delta,
            mean_label_wind: self.mean_label_wind,
            subset: None,
        }
    }
}

pub fn patch_id(scene_id: &str, row0: usize, col0: usize) -> String {
    format!("{scene_id}_{row0}_{col0}")
}

/// Final class of a patch: the rain/rainless decision, then the Δ filter.
pub fn classify_patch(p: &Patch, cfg: &PatchConfig) -> PatchClass {
    final_class(p.rain_fraction_3mm, p.rainless, p.delta, cfg)
}

fn final_class(
    rain_fraction: f64,
    rainless: bool,
    delta: Option<f64>,
    cfg: &PatchConfig,
) -> PatchClass {
    match classify(rain_fraction, !rainless, cfg) {
        PatchClass::Discarded => PatchClass::Discarded,
        _ if !filter_by_delta(delta, cfg.delta_threshold) => PatchClass::Discarded,
        c => c,
    }
}

fn tile_origins(scene: &Scene, stride: usize) -> Result<Vec<(usize, usize)>> {
    if stride == 0 {
        return Err(Error::Config("patch stride must be positive".into()));
    }
    let (rows, cols) = scene
        .dims()
        .ok_or_else(|| Error::Data(format!("scene {} has no channels", scene.id)))?;
    if rows < PATCH_SIZE || cols < PATCH_SIZE {
        warn!(
            "scene {} ({rows}x{cols}) is smaller than one {PATCH_SIZE}px tile",
            scene.id
        );
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for row0 in (0..=rows - PATCH_SIZE).step_by(stride) {
        for col0 in (0..=cols - PATCH_SIZE).step_by(stride) {
            out.push((row0, col0));
        }
    }
    Ok(out)
}

/// Non-overlapping (for the default stride) tiles from the top-left corner;
/// partial edge tiles are dropped.
pub fn extract_patches(scene: &Scene, stride: usize, cfg: &PatchConfig) -> Result<Vec<Patch>> {
    tile_origins(scene, stride)?
        .into_iter()
        .map(|(row0, col0)| patch_at(scene, row0, col0, cfg))
        .collect()
}

/// Catalog records of the tiles [`extract_patches`] would return. Needs only
/// the rain class, label wind and GMF wind channels.
pub fn candidate_records(
    scene: &Scene,
    stride: usize,
    cfg: &PatchConfig,
) -> Result<Vec<PatchRecord>> {
    let crop = |name: &str, row0, col0| {
        scene
            .channel(name)?
            .crop(row0, col0, PATCH_SIZE, PATCH_SIZE)
    };
    tile_origins(scene, stride)?
        .into_iter()
        .map(|(row0, col0)| {
            let a = assess(
                &crop(channel::RAIN_CLASS, row0, col0)?,
                &crop(channel::WSPD_MODEL, row0, col0)?,
                &crop(channel::WSPD_GMF, row0, col0)?,
                cfg,
            )?;
            Ok(PatchRecord {
                scene_id: scene.id.clone(),
                row0,
                col0,
                class: a.class,
                rain_fraction: a.rain_fraction_3mm,
                delta: a.delta,
                mean_label_wind: a.mean_label_wind,
                subset: None,
            })
        })
        .collect()
}

struct Assessment {
    rain_fraction_3mm: f64,
    rainless: bool,
    delta: Option<f64>,
    class: PatchClass,
    mean_label_wind: Option<f64>,
}

fn assess(rc: &Grid2D, label: &Grid2D, gmf_wind: &Grid2D, cfg: &PatchConfig) -> Result<Assessment> {
    let part = partition_rain(rc)?;
    let delta = delta_rainless(label, gmf_wind, &part)?;
    let signature = cfg.signature_class as f64;
    let rainless = !rc
        .values()
        .iter()
        .any(|&v| !rc.is_fill(v) && v >= signature);
    let rain_fraction_3mm = part.rain_fraction();
    Ok(Assessment {
        rain_fraction_3mm,
        rainless,
        delta,
        class: final_class(rain_fraction_3mm, rainless, delta, cfg),
        mean_label_wind: label.valid_mean(),
    })
}

/// The classified tile with top-left corner `(row0, col0)`.
pub fn patch_at(scene: &Scene, row0: usize, col0: usize, cfg: &PatchConfig) -> Result<Patch> {
    let mut channels = BTreeMap::new();
    for (name, grid) in &scene.channels {
        channels.insert(name.clone(), grid.crop(row0, col0, PATCH_SIZE, PATCH_SIZE)?);
    }
    let get = |name: &str| {
        channels
            .get(name)
            .ok_or_else(|| Error::Config(format!("scene {} has no `{name}` channel", scene.id)))
    };
    let ssr = ssr_grid(get(channel::SIGMA0_VV)?, get(channel::INCIDENCE)?)?;
    let a = assess(
        get(channel::RAIN_CLASS)?,
        get(channel::WSPD_MODEL)?,
        get(channel::WSPD_GMF)?,
        cfg,
    )?;
    channels.insert(SSR_VV.to_string(), ssr);
    Ok(Patch {
        scene_id: scene.id.clone(),
        row0,
        col0,
        size: PATCH_SIZE,
        rain_fraction_3mm: a.rain_fraction_3mm,
        rainless: a.rainless,
        delta: a.delta,
        class: a.class,
        mean_label_wind: a.mean_label_wind,
        channels,
    })
}

fn ssr_grid(sigma0: &Grid2D, incidence: &Grid2D) -> Result<Grid2D> {
    // the reference depends on incidence alone, which repeats along rows
    let mut reference: HashMap<u64, f64> = HashMap::new();
    sigma0.zip_map(incidence, |s, theta| {
        if !(s > 0.0) {
            return f64::NAN;
        }
        let r = *reference
            .entry(theta.to_bits())
            .or_insert_with(|| gmf::neutral_reference(theta).unwrap_or(f64::NAN));
        s / r
    })
}
