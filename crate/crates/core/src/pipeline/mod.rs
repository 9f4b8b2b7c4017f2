//! Stage driver: synth, invert, extract, balance, split, stats, evaluate, report.
//!
//! Each stage reads its inputs from the workspace, deletes the artifacts it
//! and every later stage own, writes its outputs and saves the manifest.
//! Stage seeds are derived from the single configured seed and recorded in
//! the manifest.

mod config;
mod evaluate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use log::info;
use serde::{Deserialize, Serialize};

use crate::balance::{self, class_counts, histograms_csv, BalancePlan};
use crate::error::{Error, Result};
use crate::gmf::invert_scene;
use crate::patches::{
    candidate_records, decode_catalog, decode_patch_tensor, encode_catalog, encode_patch_tensor,
    patch_at, tensor_file_name, PatchClass, PatchRecord, Subset,
};
use crate::rng::{derive_seed, seeded};
use crate::scene::{channel, read_scene, read_scene_channels, read_scene_meta, scene_files};
use crate::split::{
    apply_assignment, scene_counts, stochastic_split, verify_no_leakage, LeakageReport,
    SplitAssignment,
};
use crate::stats::{StatsBuilder, INPUT_CHANNELS};
use crate::store::{verify_workspace, VerifyReport, Workspace};
use crate::synth::{self, SpeckleFloor, SynthParams};

pub use config::{
    resolve_config, BinsConfig, EvalConfig, EvalScope, Gates, Overrides, PipelineConfig, Scale,
    SplitSettings,
};
pub use evaluate::{Evaluation, GateValues};

pub const SCENE_INDEX: &str = "scenes/index.json";
pub const BUOYS: &str = "scenes/buoys.csv";
pub const SPECKLE_FLOOR: &str = "scenes/speckle_floor.json";
pub const CANDIDATES: &str = "patches/candidates.jsonl";
pub const CATALOG: &str = "patches/patches.jsonl";
pub const PLAN: &str = "plans/balance_plan.json";
pub const HISTOGRAMS: &str = "plans/histograms.csv";
pub const ASSIGNMENT: &str = "splits/assignment.json";
pub const TRACE: &str = "splits/trace.csv";
pub const LEAKAGE: &str = "splits/leakage.json";
pub const STATS: &str = "stats/stats.json";
pub const EVALUATION: &str = "reports/evaluation.json";
pub const SUMMARY: &str = "reports/summary.json";

const SEED_SYNTH: u64 = 1;
const SEED_BALANCE: u64 = 2;
const SEED_SPLIT: u64 = 3;
const STREAM_STATIONS: u64 = 1 << 32;
const STREAM_BUOYS: u64 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Synth,
    Invert,
    Extract,
    Balance,
    Split,
    Stats,
    Evaluate,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Synth,
        Stage::Invert,
        Stage::Extract,
        Stage::Balance,
        Stage::Split,
        Stage::Stats,
        Stage::Evaluate,
        Stage::Report,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Stage::Synth => "synth",
            Stage::Invert => "invert",
            Stage::Extract => "extract",
            Stage::Balance => "balance",
            Stage::Split => "split",
            Stage::Stats => "stats",
            Stage::Evaluate => "evaluate",
            Stage::Report => "report",
        }
    }

    /// The stage that writes `rel`; `None` for files from other tools.
    pub fn owner_of(rel: &str) -> Option<Stage> {
        if let Some(rest) = rel.strip_prefix("scenes/") {
            let file = rest.rsplit('/').next().unwrap_or(rest);
            return if file.starts_with(channel::PREDICTION_PREFIX) {
                None
            } else if file == format!("{}.f32", channel::WSPD_GMF) {
                Some(Stage::Invert)
            } else {
                Some(Stage::Synth)
            };
        }
        if rel == CANDIDATES {
            Some(Stage::Extract)
        } else if rel.starts_with("patches/") || rel.starts_with("plans/") {
            Some(Stage::Balance)
        } else if rel.starts_with("splits/") {
            Some(Stage::Split)
        } else if rel.starts_with("stats/") {
            Some(Stage::Stats)
        } else if rel == SUMMARY {
            Some(Stage::Report)
        } else if rel.starts_with("reports/") {
            Some(Stage::Evaluate)
        } else {
            None
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}`")))
    }
}

/// One named pass/fail validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_string(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneIndex {
    pub scenes: Vec<String>,
    pub rain_cells: usize,
    /// Corpus fraction of pixels at or above 3 mm/h.
    pub heavy_rain_fraction: f64,
    pub buoy_records: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub index: SceneIndex,
    pub speckle_floor: SpeckleFloor,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractSummary {
    pub scenes: usize,
    pub counts: BTreeMap<PatchClass, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub assignment: SplitAssignment,
    pub leakage: LeakageReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub checks: Vec<Check>,
    pub pass: bool,
    pub table: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunAll {
    pub summary: Summary,
    pub verify: VerifyReport,
    /// sha256 of the final manifest.
    pub manifest_sha256: String,
}

impl RunAll {
    pub fn pass(&self) -> bool {
        self.summary.pass && self.verify.pass()
    }
}

#[derive(Debug)]
pub struct Pipeline {
    pub ws: Workspace,
    pub cfg: PipelineConfig,
}

impl Pipeline {
    pub fn new(ws: Workspace, cfg: PipelineConfig) -> Self {
        Pipeline { ws, cfg }
    }

    /// Opens `root` and layers the TOML text `config_toml` and the flags
    /// over the recorded configuration.
    pub fn open(root: &Path, config_toml: Option<&str>, overrides: &Overrides) -> Result<Self> {
        let ws = Workspace::open(root)?;
        let recorded = (!ws.manifest.config.is_null()).then_some(&ws.manifest.config);
        let cfg = resolve_config(recorded, config_toml, overrides)?;
        Ok(Pipeline { ws, cfg })
    }

    pub fn stage_seed(&self, stage: Stage) -> Option<u64> {
        match stage {
            Stage::Synth => Some(derive_seed(self.cfg.seed, SEED_SYNTH)),
            Stage::Balance => Some(derive_seed(self.cfg.seed, SEED_BALANCE)),
            Stage::Split => Some(derive_seed(self.cfg.seed, SEED_SPLIT)),
            _ => None,
        }
    }

    fn begin(&mut self, stage: Stage) -> Result<()> {
        info!("stage {stage}");
        self.ws
            .remove_where(|rel| Stage::owner_of(rel).is_some_and(|o| o >= stage))?;
        self.ws.forget_stages_from(stage.name());
        self.ws.manifest.config = config::to_json(&self.cfg)?;
        self.ws.manifest.seeds.insert("seed".into(), self.cfg.seed);
        if let Some(s) = self.stage_seed(stage) {
            self.ws.manifest.seeds.insert(stage.name().into(), s);
        }
        // seeds of stages that no longer have outputs are dropped
        let done: BTreeSet<String> = self.ws.manifest.stages.iter().cloned().collect();
        self.ws
            .manifest
            .seeds
            .retain(|k, _| k == "seed" || k == stage.name() || done.contains(k));
        Ok(())
    }

    fn finish(&mut self, stage: Stage) -> Result<()> {
        self.ws.mark_stage(stage.name());
        self.ws.save_manifest()
    }

    fn scene_index(&self, stage: &'static str) -> Result<SceneIndex> {
        self.ws
            .require(stage, SCENE_INDEX, "run `sarwind synth` first")?;
        self.ws.read_json(SCENE_INDEX)
    }

    fn scene_dir(&self, id: &str) -> std::path::PathBuf {
        self.ws.path(&format!("scenes/{id}"))
    }

    fn read_catalog(&self, stage: &'static str, hint: &str) -> Result<Vec<PatchRecord>> {
        self.ws.require(stage, CATALOG, hint)?;
        decode_catalog(&self.ws.read(CATALOG)?, &self.ws.path(CATALOG))
    }

    /// Synthetic corpus, buoy table and speckle floor.
    pub fn synth(&mut self) -> Result<SynthSummary> {
        self.begin(Stage::Synth)?;
        let p: SynthParams = self.cfg.synth.clone();
        let seed = self.stage_seed(Stage::Synth).expect("synth seed");
        let weight = p.mean_wind_weight();
        let stations = synth::gen_stations(
            &mut seeded(derive_seed(seed, STREAM_STATIONS)),
            &p.buoys,
            p.lat_range,
            p.lon_range,
        );
        let mut ids = Vec::with_capacity(p.scenes);
        let (mut heavy, mut pixels, mut cells) = (0usize, 0usize, 0usize);
        let mut buoys = Vec::new();
        for i in 0..p.scenes {
            let truth = synth::draw_truth(&p, i, seed, weight)?;
            let fields = synth::gen_fields(&p, &truth)?;
            let scene =
                synth::render_channels(&p, &truth, &fields, synth::RenderOptions::default())?;
            heavy += fields
                .rain_class
                .values()
                .iter()
                .filter(|&&c| c >= 2.0)
                .count();
            pixels += fields.rain_class.values().len();
            cells += truth.cells.len();
            let mut rng = seeded(derive_seed(truth.seed, STREAM_BUOYS));
            buoys.extend(synth::gen_buoys(
                &mut rng,
                &stations,
                &scene.geo_frame(),
                &fields.speed,
                truth.time,
                &p.buoys,
            )?);
            for (name, bytes) in scene_files(&scene)? {
                self.ws
                    .write(&format!("scenes/{}/{name}", scene.id), &bytes)?;
            }
            self.ws
                .write_json(&format!("scenes/{}/truth.json", scene.id), &truth)?;
            info!("synth {} ({} cells)", scene.id, truth.cells.len());
            ids.push(scene.id);
        }
        synth::sort_buoys(&mut buoys);
        self.ws
            .write(BUOYS, &crate::metrics::write_buoys(&buoys)?)?;
        let floor = synth::measure_speckle_floor(&p, seed, &self.cfg.inversion)?;
        self.ws.write_json(SPECKLE_FLOOR, &floor)?;
        let index = SceneIndex {
            scenes: ids,
            rain_cells: cells,
            heavy_rain_fraction: heavy as f64 / pixels.max(1) as f64,
            buoy_records: buoys.len(),
        };
        self.ws.write_json(SCENE_INDEX, &index)?;
        self.finish(Stage::Synth)?;
        Ok(SynthSummary {
            index,
            speckle_floor: floor,
        })
    }

    /// GMF wind for every scene.
    pub fn invert(&mut self) -> Result<usize> {
        let index = self.scene_index("invert")?;
        self.begin(Stage::Invert)?;
        for id in &index.scenes {
            let dir = self.scene_dir(id);
            let scene = read_scene_channels(
                &dir,
                &[channel::SIGMA0_VV, channel::INCIDENCE, channel::WDIR_PRIOR],
            )?;
            let mut gmf = invert_scene(&scene, &self.cfg.inversion)?;
            gmf.quantize_f32();
            let mut meta = read_scene_meta(&dir)?;
            if !meta.channels.iter().any(|c| c == channel::WSPD_GMF) {
                meta.channels.push(channel::WSPD_GMF.to_string());
                meta.channels.sort();
            }
            self.ws.write(
                &format!("scenes/{id}/{}.f32", channel::WSPD_GMF),
                &crate::scene::io::encode_f32(&gmf),
            )?;
            self.ws.write(
                &format!("scenes/{id}/meta.json"),
                &crate::scene::io::meta_bytes(&meta),
            )?;
            info!("invert {id}");
        }
        self.finish(Stage::Invert)?;
        Ok(index.scenes.len())
    }

    /// Tiles every scene and writes the candidate catalog.
    pub fn extract(&mut self) -> Result<ExtractSummary> {
        let index = self.scene_index("extract")?;
        if !self
            .ws
            .manifest
            .stages
            .iter()
            .any(|s| s == Stage::Invert.name())
        {
            return Err(Error::MissingArtifact {
                stage: "extract",
                artifact: format!("scenes/*/{}.f32", channel::WSPD_GMF),
                hint: "run `sarwind invert` first".into(),
            });
        }
        self.begin(Stage::Extract)?;
        let mut records = Vec::new();
        for id in &index.scenes {
            let scene = read_scene_channels(
                &self.scene_dir(id),
                &[channel::RAIN_CLASS, channel::WSPD_MODEL, channel::WSPD_GMF],
            )?;
            records.extend(candidate_records(
                &scene,
                self.cfg.stride,
                &self.cfg.patches,
            )?);
        }
        self.ws.write(CANDIDATES, &encode_catalog(&records))?;
        self.finish(Stage::Extract)?;
        Ok(ExtractSummary {
            scenes: index.scenes.len(),
            counts: class_counts(&records),
        })
    }

    /// Balances the candidates and writes the selected patch tensors.
    pub fn balance(&mut self) -> Result<BalancePlan> {
        self.ws
            .require("balance", CANDIDATES, "run `sarwind extract` first")?;
        let candidates = decode_catalog(&self.ws.read(CANDIDATES)?, &self.ws.path(CANDIDATES))?;
        self.begin(Stage::Balance)?;
        let bins = self.cfg.bins.bins()?;
        let seed = self.stage_seed(Stage::Balance).expect("balance seed");
        let balanced = balance::balance(&candidates, &bins, self.cfg.policy, seed)?;

        let mut by_scene: BTreeMap<&str, Vec<&PatchRecord>> = BTreeMap::new();
        for r in &balanced.selected {
            by_scene.entry(&r.scene_id).or_default().push(r);
        }
        for (scene_id, wanted) in &by_scene {
            let scene = read_scene(&self.scene_dir(scene_id))?;
            for r in wanted {
                let p = patch_at(&scene, r.row0, r.col0, &self.cfg.patches)?;
                if p.class != r.class {
                    return Err(Error::Data(format!(
                        "patch {} re-extracts as {} but the candidates list {}; rerun `sarwind extract`",
                        r.id(),
                        p.class,
                        r.class
                    )));
                }
                let rel = format!("patches/{}", tensor_file_name(&p.scene_id, p.row0, p.col0));
                self.ws.write(&rel, &encode_patch_tensor(&p)?)?;
            }
        }
        self.ws
            .write(CATALOG, &encode_catalog(&balanced.selected))?;
        self.ws.write_json(PLAN, &balanced.plan)?;
        self.ws
            .write(HISTOGRAMS, histograms_csv(&balanced.plan).as_bytes())?;
        self.finish(Stage::Balance)?;
        Ok(balanced.plan)
    }

    /// Scene-grouped train/val/test assignment of the balanced catalog.
    pub fn split(&mut self) -> Result<SplitSummary> {
        let mut catalog = self.read_catalog("split", "run `sarwind balance` first")?;
        self.begin(Stage::Split)?;
        let bins = self.cfg.bins.bins()?;
        let counts = scene_counts(&catalog, |w| bins.index(w), bins.len())?;
        let seed = self.stage_seed(Stage::Split).expect("split seed");
        let outcome = stochastic_split(&counts, &self.cfg.split.with_seed(seed))?;
        apply_assignment(&mut catalog, &outcome.assignment);
        let leakage = verify_no_leakage(&outcome.assignment, &catalog);
        let mut trace = String::from("lane,iteration,e\n");
        for t in &outcome.trace {
            trace.push_str(&format!("{},{},{}\n", t.lane, t.iteration, t.e));
        }
        self.ws.write(CATALOG, &encode_catalog(&catalog))?;
        self.ws.write_json(ASSIGNMENT, &outcome.assignment)?;
        self.ws.write(TRACE, trace.as_bytes())?;
        self.ws.write_json(LEAKAGE, &leakage)?;
        self.finish(Stage::Split)?;
        Ok(SplitSummary {
            assignment: outcome.assignment,
            leakage,
        })
    }

    /// Normalization statistics over the training patches.
    pub fn stats(&mut self) -> Result<crate::stats::ChannelStats> {
        self.ws
            .require("stats", ASSIGNMENT, "run `sarwind split` first")?;
        let catalog = self.read_catalog("stats", "run `sarwind balance` first")?;
        self.begin(Stage::Stats)?;
        let mut builder = StatsBuilder::new(&INPUT_CHANNELS);
        for r in catalog.iter().filter(|r| r.subset == Some(Subset::Train)) {
            let rel = format!("patches/{}", tensor_file_name(&r.scene_id, r.row0, r.col0));
            let tensor = decode_patch_tensor(&self.ws.read(&rel)?, &self.ws.path(&rel))?;
            builder.add(&r.id(), &tensor)?;
        }
        let stats = builder.finish()?;
        self.ws.write_json(STATS, &stats)?;
        self.finish(Stage::Stats)?;
        Ok(stats)
    }

    pub fn evaluate(&mut self) -> Result<Evaluation> {
        let index = self.scene_index("evaluate")?;
        self.ws
            .require("evaluate", BUOYS, "run `sarwind synth` first")?;
        self.ws
            .require("evaluate", ASSIGNMENT, "run `sarwind split` first")?;
        let catalog = self.read_catalog("evaluate", "run `sarwind balance` first")?;
        let assignment: SplitAssignment = self.ws.read_json(ASSIGNMENT)?;
        self.begin(Stage::Evaluate)?;
        let out = evaluate::run(self, &index, &catalog, &assignment)?;
        self.finish(Stage::Evaluate)?;
        Ok(out)
    }

    /// Collects the stage validations into `reports/summary.json`.
    pub fn report(&mut self) -> Result<Summary> {
        self.ws
            .require("report", PLAN, "run `sarwind balance` first")?;
        self.ws
            .require("report", LEAKAGE, "run `sarwind split` first")?;
        self.ws
            .require("report", EVALUATION, "run `sarwind evaluate` first")?;
        let plan: BalancePlan = self.ws.read_json(PLAN)?;
        let leakage: LeakageReport = self.ws.read_json(LEAKAGE)?;
        let eval: Evaluation = self.ws.read_json(EVALUATION)?;
        self.begin(Stage::Report)?;

        let mut checks = vec![
            Check::new(
                "balance",
                plan.n_plus == plan.n_minus
                    && plan.rain_removed_fraction == 0.0
                    && plan.balance_error <= self.cfg.gates.balance_error_max,
                format!(
                    "n+ = {}, n- = {}, rain removed {:.1}%, balance error {:.3} (maximum {})",
                    plan.n_plus,
                    plan.n_minus,
                    100.0 * plan.rain_removed_fraction,
                    plan.balance_error,
                    self.cfg.gates.balance_error_max
                ),
            ),
            Check::new(
                "split",
                leakage.pass,
                if leakage.pass {
                    format!(
                        "no leakage, val {:.4}, test {:.4}",
                        leakage.val_fraction, leakage.test_fraction
                    )
                } else {
                    leakage.problems.join("; ")
                },
            ),
        ];
        checks.extend(eval.checks(&self.cfg.gates));
        let pass = checks.iter().all(|c| c.pass);
        let summary = Summary {
            checks,
            pass,
            table: eval.buoy_table.clone(),
        };
        self.ws.write_json(SUMMARY, &summary)?;
        self.finish(Stage::Report)?;
        Ok(summary)
    }

    pub fn run(&mut self, stage: Stage) -> Result<()> {
        match stage {
            Stage::Synth => self.synth().map(drop),
            Stage::Invert => self.invert().map(drop),
            Stage::Extract => self.extract().map(drop),
            Stage::Balance => self.balance().map(drop),
            Stage::Split => self.split().map(drop),
            Stage::Stats => self.stats().map(drop),
            Stage::Evaluate => self.evaluate().map(drop),
            Stage::Report => self.report().map(drop),
        }
    }

    /// Every stage in order, then a workspace verification.
    pub fn run_all(&mut self) -> Result<RunAll> {
        for stage in &Stage::ALL[..Stage::ALL.len() - 1] {
            self.run(*stage)?;
        }
        let summary = self.report()?;
        let verify = verify_workspace(self.ws.root())?;
        Ok(RunAll {
            summary,
            verify,
            manifest_sha256: self.ws.manifest.digest(),
        })
    }
}
