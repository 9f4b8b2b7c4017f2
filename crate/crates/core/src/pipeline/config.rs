//! Pipeline configuration: scale presets, a TOML file and flag overrides.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::balance::{Bins, Policy};
use crate::error::{Error, Result};
use crate::gmf::InversionConfig;
use crate::metrics::{Binning, CollocationConfig};
use crate::patches::{PatchConfig, PATCH_SIZE};
use crate::split::SplitConfig;
use crate::synth::SynthParams;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 200 scenes of 770x770 px.
    #[default]
    Desk,
    /// 24 scenes of 520x520 px.
    Smoke,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Desk => "desk",
            Scale::Smoke => "smoke",
        })
    }
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "smoke" => Ok(Scale::Smoke),
            _ => Err(Error::Config(format!(
                "unknown scale `{s}`; expected desk or smoke"
            ))),
        }
    }
}

/// Uniform wind bins with an optional overflow bin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinsConfig {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub overflow: bool,
}

impl Default for BinsConfig {
    fn default() -> Self {
        BinsConfig {
            lo: 0.0,
            hi: 30.0,
            count: 30,
            overflow: true,
        }
    }
}

impl BinsConfig {
    pub fn bins(&self) -> Result<Bins> {
        Bins::uniform(self.lo, self.hi, self.count, self.overflow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSettings {
    pub iterations: u64,
    pub min_frac: f64,
    pub max_frac: f64,
    pub target_frac: f64,
    pub lanes: u32,
}

impl Default for SplitSettings {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitSettings {
            iterations: 20_000,
            min_frac: d.min_frac,
            max_frac: d.max_frac,
            target_frac: d.target_frac,
            lanes: d.lanes,
        }
    }
}

impl SplitSettings {
    pub fn with_seed(&self, seed: u64) -> SplitConfig {
        SplitConfig {
            iterations: self.iterations,
            min_frac: self.min_frac,
            max_frac: self.max_frac,
            target_frac: self.target_frac,
            seed,
            lanes: self.lanes,
        }
    }
}

/// Which scenes the evaluation draws on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalScope {
    /// Test scenes and scenes that contributed no patch to the dataset.
    #[default]
    HeldOut,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub binning: Binning,
    pub scope: EvalScope,
    pub collocation: CollocationConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            binning: Binning::Table3,
            scope: EvalScope::HeldOut,
            collocation: CollocationConfig::default(),
        }
    }
}

/// Thresholds of the report checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Gates {
    /// Maximum balance error, percentage points squared.
    pub balance_error_max: f64,
    /// Minimum GMF bias over >= 3 mm/h rain, m/s.
    pub heavy_rain_bias_min: f64,
    /// Maximum rainless GMF RMSE as a multiple of the speckle floor.
    pub rainless_rmse_floor_multiple: f64,
}

impl Default for Gates {
    fn default() -> Self {
        Gates {
            balance_error_max: 10.0,
            heavy_rain_bias_min: 1.0,
            rainless_rmse_floor_multiple: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub scale: Scale,
    pub synth: SynthParams,
    pub inversion: InversionConfig,
    pub patches: PatchConfig,
    pub stride: usize,
    pub bins: BinsConfig,
    pub policy: Policy,
    pub split: SplitSettings,
    pub evaluation: EvalConfig,
    pub gates: Gates,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig::for_scale(Scale::Desk)
    }
}

impl PipelineConfig {
    pub fn for_scale(scale: Scale) -> Self {
        PipelineConfig {
            seed: 0,
            scale,
            synth: match scale {
                Scale::Desk => SynthParams::default(),
                Scale::Smoke => SynthParams::smoke(),
            },
            inversion: InversionConfig::default(),
            patches: PatchConfig::default(),
            stride: PATCH_SIZE,
            bins: BinsConfig::default(),
            policy: Policy::Scheme1,
            split: SplitSettings::default(),
            evaluation: EvalConfig::default(),
            gates: Gates::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.synth.validate()?;
        self.inversion.validate()?;
        self.bins.bins()?;
        self.split.with_seed(0).validate()?;
        if self.stride == 0 {
            return Err(Error::Config("patch stride must be positive".into()));
        }
        Ok(())
    }
}

/// Command-line values that take precedence over every file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub scale: Option<Scale>,
    pub iterations: Option<u64>,
    pub binning: Option<Binning>,
    pub policy: Option<Policy>,
}

/// Layers, lowest first: the workspace's recorded config (or the scale
/// preset), the preset of an explicit scale, the TOML file, the flags.
pub fn resolve_config(
    recorded: Option<&serde_json::Value>,
    file: Option<&str>,
    overrides: &Overrides,
) -> Result<PipelineConfig> {
    let file: Option<serde_json::Value> = match file {
        Some(text) => {
            let t: toml::Value =
                toml::from_str(text).map_err(|e| Error::Config(format!("config file: {e}")))?;
            Some(serde_json::to_value(t).map_err(|e| Error::Config(format!("config file: {e}")))?)
        }
        None => None,
    };
    let file_scale = match file.as_ref().and_then(|f| f.get("scale")) {
        Some(v) => Some(
            v.as_str()
                .ok_or_else(|| Error::Config("`scale` must be a string".into()))?
                .parse::<Scale>()?,
        ),
        None => None,
    };
    let mut base = match (overrides.scale.or(file_scale), recorded) {
        (Some(scale), _) => to_json(&PipelineConfig::for_scale(scale))?,
        (None, Some(rec)) if !rec.is_null() => rec.clone(),
        (None, _) => to_json(&PipelineConfig::default())?,
    };
    if let Some(f) = file {
        merge(&mut base, f);
    }
    let mut cfg: PipelineConfig = serde_json::from_value(base)
        .map_err(|e| Error::Config(format!("invalid configuration: {e}")))?;
    if let Some(s) = overrides.seed {
        cfg.seed = s;
    }
    if let Some(s) = overrides.scale {
        cfg.scale = s;
    }
    if let Some(n) = overrides.iterations {
        cfg.split.iterations = n;
    }
    if let Some(b) = overrides.binning {
        cfg.evaluation.binning = b;
    }
    if let Some(p) = overrides.policy {
        cfg.policy = p;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub(crate) fn to_json(cfg: &PipelineConfig) -> Result<serde_json::Value> {
    serde_json::to_value(cfg)
        .map_err(|e| Error::Config(format!("configuration does not serialize: {e}")))
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layers_apply_in_order() {
        let file = "seed = 3\n[synth]\nscenes = 5\n[split]\niterations = 100\n";
        let cfg = resolve_config(None, Some(file), &Overrides::default()).unwrap();
        assert_eq!(
            (cfg.seed, cfg.synth.scenes, cfg.split.iterations),
            (3, 5, 100)
        );
        assert_eq!(cfg.synth.rows, 1540);

        let o = Overrides {
            seed: Some(9),
            iterations: Some(7),
            ..Overrides::default()
        };
        let cfg = resolve_config(None, Some(file), &o).unwrap();
        assert_eq!((cfg.seed, cfg.split.iterations), (9, 7));

        let recorded = to_json(&cfg).unwrap();
        let again = resolve_config(Some(&recorded), None, &Overrides::default()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn scale_preset_and_typos() {
        let cfg = resolve_config(None, Some("scale = \"smoke\""), &Overrides::default()).unwrap();
        assert_eq!(cfg.synth, SynthParams::smoke());
        let e = resolve_config(None, Some("sede = 1"), &Overrides::default()).unwrap_err();
        assert!(e.to_string().contains("sede"), "{e}");
    }
}
