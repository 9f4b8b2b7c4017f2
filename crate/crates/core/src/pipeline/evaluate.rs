//! Buoy validation of the held-out scenes and model-referenced scores of the test patches.

use std::collections::{BTreeMap, BTreeSet};

use log::info;
use serde::{Deserialize, Serialize};

use super::{Check, EvalScope, Gates, Pipeline, SceneIndex, BUOYS, EVALUATION, SPECKLE_FLOOR};
use crate::error::Result;
use crate::metrics::{
    bias, build_report, collocate_scene, group_by_station, read_buoys, rmse, Binning, EvalRecord,
    Report, Source,
};
use crate::patches::{PatchRecord, Subset, PATCH_SIZE};
use crate::scene::{channel, read_scene_channels, read_scene_meta};
use crate::split::SplitAssignment;
use crate::synth::SpeckleFloor;

/// GMF buoy scores behind the end-to-end checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateValues {
    /// GMF bias over collocations at or above 3 mm/h, m/s.
    pub heavy_rain_bias: Option<f64>,
    pub heavy_rain_n: usize,
    /// GMF RMSE over collocations below 1 mm/h, m/s.
    pub rainless_rmse: Option<f64>,
    pub rainless_n: usize,
    pub speckle_floor: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub scope: EvalScope,
    pub binning: Binning,
    pub scenes: Vec<String>,
    pub collocations: usize,
    pub skips: usize,
    pub columns: Vec<String>,
    pub gates: GateValues,
    pub buoy_report: Report,
    pub model_report: Option<Report>,
    pub buoy_table: String,
}

impl Evaluation {
    pub(super) fn checks(&self, gates: &Gates) -> Vec<Check> {
        let g = &self.gates;
        let bias_check = match g.heavy_rain_bias {
            Some(b) => Check::new(
                "rain bias",
                b >= gates.heavy_rain_bias_min,
                format!(
                    "GMF bias {b:.3} m/s over {} collocations >= 3 mm/h (minimum {})",
                    g.heavy_rain_n, gates.heavy_rain_bias_min
                ),
            ),
            None => Check::new("rain bias", false, "no collocation at or above 3 mm/h"),
        };
        let rmse_check = match (g.rainless_rmse, g.speckle_floor) {
            (Some(r), Some(f)) => Check::new(
                "rainless rmse",
                r <= gates.rainless_rmse_floor_multiple * f,
                format!(
                    "GMF RMSE {r:.3} m/s over {} collocations < 1 mm/h, limit {:.3} ({} x floor {f:.3})",
                    g.rainless_n,
                    gates.rainless_rmse_floor_multiple * f,
                    gates.rainless_rmse_floor_multiple
                ),
            ),
            (None, _) => Check::new("rainless rmse", false, "no collocation below 1 mm/h"),
            (_, None) => Check::new("rainless rmse", false, format!("{SPECKLE_FLOOR} is missing")),
        };
        vec![bias_check, rmse_check]
    }
}

fn prediction_channels(channels: &[String]) -> Vec<String> {
    channels
        .iter()
        .filter(|c| c.starts_with(channel::PREDICTION_PREFIX))
        .cloned()
        .collect()
}

pub(super) fn run(
    p: &mut Pipeline,
    index: &SceneIndex,
    catalog: &[PatchRecord],
    assignment: &SplitAssignment,
) -> Result<Evaluation> {
    let cfg = p.cfg.evaluation;
    let used: BTreeSet<&str> = catalog.iter().map(|r| r.scene_id.as_str()).collect();
    let scenes: Vec<String> = index
        .scenes
        .iter()
        .filter(|id| match cfg.scope {
            EvalScope::All => true,
            EvalScope::HeldOut => {
                !used.contains(id.as_str()) || assignment.subset_of(id) == Subset::Test
            }
        })
        .cloned()
        .collect();

    let buoys = read_buoys(&p.ws.read(BUOYS)?)?;
    let stations = group_by_station(&buoys);
    let mut buoy_records: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
    let mut collocations = Vec::new();
    let mut skips = Vec::new();
    let mut all_columns = BTreeSet::new();
    for id in &scenes {
        let dir = p.scene_dir(id);
        let preds = prediction_channels(&read_scene_meta(&dir)?.channels);
        for c in &preds {
            p.ws.adopt(&format!("scenes/{id}/{c}.f32"))?;
        }
        if !preds.is_empty() {
            p.ws.adopt(&format!("scenes/{id}/meta.json"))?;
        }
        let mut columns = vec![channel::WSPD_GMF.to_string()];
        columns.extend(preds);
        let mut names = vec![channel::RAIN_CLASS];
        names.extend(columns.iter().map(String::as_str));
        let scene = read_scene_channels(&dir, &names)?;
        let cols: Vec<&str> = columns.iter().map(String::as_str).collect();
        let (m, s) = collocate_scene(&scene, &stations, &cols, &cfg.collocation)?;
        for c in &m {
            for col in &cols {
                if let Some(r) = c.record(col, cfg.collocation.convention)? {
                    buoy_records.entry(col.to_string()).or_default().push(r);
                }
            }
        }
        all_columns.extend(columns);
        collocations.extend(m);
        skips.extend(s);
    }
    info!(
        "{} collocations and {} skips over {} scenes",
        collocations.len(),
        skips.len(),
        scenes.len()
    );

    let gmf = buoy_records
        .get(channel::WSPD_GMF)
        .cloned()
        .unwrap_or_default();
    let heavy: Vec<EvalRecord> = gmf.iter().filter(|r| r.rain_class >= 2).copied().collect();
    let dry: Vec<EvalRecord> = gmf.iter().filter(|r| r.rain_class == 0).copied().collect();
    let floor = if p.ws.exists(SPECKLE_FLOOR) {
        Some(p.ws.read_json::<SpeckleFloor>(SPECKLE_FLOOR)?.rmse)
    } else {
        None
    };
    let gates = GateValues {
        heavy_rain_bias: bias(&heavy).ok(),
        heavy_rain_n: heavy.len(),
        rainless_rmse: rmse(&dry).ok(),
        rainless_n: dry.len(),
        speckle_floor: floor,
    };

    let tag = cfg.binning.to_string();
    let buoy_report = build_report("Buoy validation", &buoy_records, cfg.binning);
    let model_report = model_reference(p, catalog, cfg.binning)?;

    let mut lines = Vec::with_capacity(collocations.len());
    for c in &collocations {
        let mut l = serde_json::to_vec(c).expect("collocation serializes");
        l.push(b'\n');
        lines.extend(l);
    }
    p.ws.write("reports/collocations.jsonl", &lines)?;
    p.ws.write_json("reports/skips.json", &skips)?;
    p.ws.write(
        &format!("reports/buoy_{tag}.csv"),
        buoy_report.to_csv().as_bytes(),
    )?;
    let buoy_table = buoy_report.to_text();
    p.ws.write(&format!("reports/buoy_{tag}.txt"), buoy_table.as_bytes())?;
    if let Some(r) = &model_report {
        p.ws.write(&format!("reports/model_{tag}.csv"), r.to_csv().as_bytes())?;
        p.ws.write(&format!("reports/model_{tag}.txt"), r.to_text().as_bytes())?;
    }
    let eval = Evaluation {
        scope: cfg.scope,
        binning: cfg.binning,
        scenes,
        collocations: collocations.len(),
        skips: skips.len(),
        columns: all_columns.into_iter().collect(),
        gates,
        buoy_report,
        model_report,
        buoy_table,
    };
    p.ws.write_json(EVALUATION, &eval)?;
    Ok(eval)
}

/// Pixelwise scores against the atmospheric-model wind over the test patches.
fn model_reference(
    p: &Pipeline,
    catalog: &[PatchRecord],
    binning: Binning,
) -> Result<Option<Report>> {
    let mut by_scene: BTreeMap<&str, Vec<&PatchRecord>> = BTreeMap::new();
    for r in catalog.iter().filter(|r| r.subset == Some(Subset::Test)) {
        by_scene.entry(&r.scene_id).or_default().push(r);
    }
    if by_scene.is_empty() {
        return Ok(None);
    }
    let mut records: BTreeMap<String, Vec<EvalRecord>> = BTreeMap::new();
    for (id, patches) in by_scene {
        let dir = p.scene_dir(id);
        let mut columns = vec![channel::WSPD_GMF.to_string()];
        columns.extend(prediction_channels(&read_scene_meta(&dir)?.channels));
        let mut names = vec![channel::RAIN_CLASS, channel::WSPD_MODEL];
        names.extend(columns.iter().map(String::as_str));
        let scene = read_scene_channels(&dir, &names)?;
        let class = scene.channel(channel::RAIN_CLASS)?;
        let model = scene.channel(channel::WSPD_MODEL)?;
        for col in &columns {
            let pred = scene.channel(col)?;
            let out = records.entry(col.clone()).or_default();
            for patch in &patches {
                for r in patch.row0..patch.row0 + PATCH_SIZE {
                    for c in patch.col0..patch.col0 + PATCH_SIZE {
                        let (k, m, v) = (class.get(r, c), model.get(r, c), pred.get(r, c));
                        if class.is_fill(k) || model.is_fill(m) || pred.is_fill(v) {
                            continue;
                        }
                        out.push(EvalRecord::new(m, v, k as u8, Source::Model));
                    }
                }
            }
        }
    }
    Ok(Some(build_report(
        "Model reference, test patches",
        &records,
        binning,
    )))
}
