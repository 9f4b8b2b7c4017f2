//! Scene-level train/validation/test assignment by stochastic search.
//!
//! Each iteration draws `n` uniformly in `[max(2, len/10), max(len/10, len/3)]`
//! (floors), draws `n` scenes without replacement, sends the first `floor(n/2)` to the
//! validation candidate and the rest to the test candidate, and scores
//!
//! `e_val = MAE(0.1 P+, c+_val / N+) + MAE(0.1 P-, c-_val / N-)`
//!
//! where `c_val` are the candidate's per-bin patch counts and `N` the corpus
//! totals per class; likewise `e_test`, and `e` is their harmonic mean. The
//! lowest `e` over all iterations wins; ties keep the earliest.

use std::collections::{BTreeMap, BTreeSet};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patches::{PatchClass, PatchRecord, Subset};
use crate::rng::{derive_seed, sample_indices, seeded, uniform_int};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub iterations: u64,
    pub min_frac: f64,
    pub max_frac: f64,
    pub target_frac: f64,
    pub seed: u64,
    /// Independent search lanes, each with a derived seed.
    pub lanes: u32,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            iterations: 1_000_000,
            min_frac: 0.1,
            max_frac: 1.0 / 3.0,
            target_frac: 0.1,
            seed: 0,
            lanes: 1,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.min_frac && self.min_frac < self.max_frac && self.max_frac <= 1.0) {
            return Err(Error::Config(format!(
                "split fractions need 0 < min_frac < max_frac <= 1, got {} and {}",
                self.min_frac, self.max_frac
            )));
        }
        if !(0.0 < self.target_frac && self.target_frac < 0.5) {
            return Err(Error::Config(format!(
                "target_frac {} is not in (0, 0.5)",
                self.target_frac
            )));
        }
        if self.iterations == 0 || self.lanes == 0 {
            return Err(Error::Config(
                "split needs at least one iteration and one lane".into(),
            ));
        }
        Ok(())
    }
}

/// Per-scene class-conditional bin counts.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneCounts {
    pub id: String,
    pub rain: Vec<u64>,
    pub rainless: Vec<u64>,
}

impl SceneCounts {
    pub fn patches(&self) -> u64 {
        self.rain.iter().sum::<u64>() + self.rainless.iter().sum::<u64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub seed: u64,
    pub iterations: u64,
    pub val: Vec<String>,
    pub test: Vec<String>,
    pub e_val: f64,
    pub e_test: f64,
    pub e: f64,
}

impl SplitAssignment {
    pub fn subset_of(&self, scene_id: &str) -> Subset {
        if self.val.iter().any(|s| s == scene_id) {
            Subset::Val
        } else if self.test.iter().any(|s| s == scene_id) {
            Subset::Test
        } else {
            Subset::Train
        }
    }

    pub fn subsets(&self) -> BTreeMap<&str, Subset> {
        let mut m = BTreeMap::new();
        for s in &self.val {
            m.insert(s.as_str(), Subset::Val);
        }
        for s in &self.test {
            m.insert(s.as_str(), Subset::Test);
        }
        m
    }
}

/// A new best-so-far point of the search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub lane: u32,
    pub iteration: u64,
    pub e: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutcome {
    pub assignment: SplitAssignment,
    pub trace: Vec<TracePoint>,
}

/// The objective, precomputed over a scene list.
#[derive(Debug, Clone)]
pub struct Objective {
    target_rain: Vec<f64>,
    target_rainless: Vec<f64>,
    n_rain: f64,
    n_rainless: f64,
}

impl Objective {
    pub fn new(scenes: &[SceneCounts], target_frac: f64) -> Result<Self> {
        let bins = scenes.first().map_or(0, |s| s.rain.len());
        if scenes
            .iter()
            .any(|s| s.rain.len() != bins || s.rainless.len() != bins)
        {
            return Err(Error::Dimension(
                "scenes disagree on histogram bin count".into(),
            ));
        }
        let mut rain = vec![0u64; bins];
        let mut rainless = vec![0u64; bins];
        for s in scenes {
            for b in 0..bins {
                rain[b] += s.rain[b];
                rainless[b] += s.rainless[b];
            }
        }
        let (n_rain, n_rainless) = (
            rain.iter().sum::<u64>() as f64,
            rainless.iter().sum::<u64>() as f64,
        );
        if n_rain + n_rainless == 0.0 {
            return Err(Error::Degenerate("no patches to split".into()));
        }
        let target = |counts: &[u64], n: f64| -> Vec<f64> {
            counts
                .iter()
                .map(|&c| {
                    if n > 0.0 {
                        target_frac * c as f64 / n
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        Ok(Objective {
            target_rain: target(&rain, n_rain),
            target_rainless: target(&rainless, n_rainless),
            n_rain,
            n_rainless,
        })
    }

    /// Error of one subset; summed per-bin counts of its scenes.
    pub fn subset_error(&self, rain: &[u64], rainless: &[u64]) -> f64 {
        mae_term(&self.target_rain, rain, self.n_rain)
            + mae_term(&self.target_rainless, rainless, self.n_rainless)
    }

    pub fn score(&self, scenes: &[SceneCounts], val: &[usize], test: &[usize]) -> (f64, f64, f64) {
        let e_val = self.error_of(scenes, val);
        let e_test = self.error_of(scenes, test);
        (e_val, e_test, harmonic(e_val, e_test))
    }

    fn error_of(&self, scenes: &[SceneCounts], members: &[usize]) -> f64 {
        let bins = self.target_rain.len();
        let mut rain = vec![0u64; bins];
        let mut rainless = vec![0u64; bins];
        for &i in members {
            for b in 0..bins {
                rain[b] += scenes[i].rain[b];
                rainless[b] += scenes[i].rainless[b];
            }
        }
        self.subset_error(&rain, &rainless)
    }
}

fn mae_term(target: &[f64], counts: &[u64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    target
        .iter()
        .zip(counts)
        .map(|(t, &c)| (t - c as f64 / total).abs())
        .sum::<f64>()
        / target.len() as f64
}

/// `2ab / (a + b)`, zero when `a + b = 0`.
pub fn harmonic(a: f64, b: f64) -> f64 {
    if a + b == 0.0 {
        0.0
    } else {
        2.0 * a * b / (a + b)
    }
}

/// Inclusive candidate-size range for `len` scenes.
pub fn candidate_size_range(len: usize, cfg: &SplitConfig) -> (usize, usize) {
    let lo = ((len as f64 * cfg.min_frac).floor() as usize).max(1);
    let hi = ((len as f64 * cfg.max_frac).floor() as usize).max(lo);
    (lo, hi)
}

pub fn stochastic_split(scenes: &[SceneCounts], cfg: &SplitConfig) -> Result<SplitOutcome> {
    cfg.validate()?;
    if scenes.len() < 3 {
        return Err(Error::Degenerate(format!(
            "split needs at least 3 scenes, got {}",
            scenes.len()
        )));
    }
    let mut sorted: Vec<&SceneCounts> = scenes.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let scenes: Vec<SceneCounts> = sorted.into_iter().cloned().collect();
    let objective = Objective::new(&scenes, cfg.target_frac)?;
    let (lo, hi) = candidate_size_range(scenes.len(), cfg);
    if hi < 2 {
        return Err(Error::Degenerate(format!(
            "{} scenes allow at most {hi} held-out scenes; val and test need one each",
            scenes.len()
        )));
    }
    let lo = lo.max(2);

    let per_lane = cfg.iterations.div_ceil(cfg.lanes as u64);
    // (e, lane, iteration, val, test, e_val, e_test)
    type Best = (f64, u32, u64, Vec<usize>, Vec<usize>, f64, f64);
    let mut best: Option<Best> = None;
    let mut trace = Vec::new();
    let mut done = 0u64;
    for lane in 0..cfg.lanes {
        let mut rng = seeded(if cfg.lanes == 1 {
            cfg.seed
        } else {
            derive_seed(cfg.seed, lane as u64)
        });
        let mut lane_best = f64::INFINITY;
        let count = per_lane.min(cfg.iterations - done);
        done += count;
        for it in 0..count {
            let n = uniform_int(&mut rng, lo as u64, hi as u64) as usize;
            let picks = sample_indices(&mut rng, scenes.len(), n);
            let (val, test) = picks.split_at(n / 2);
            let (e_val, e_test, e) = objective.score(&scenes, val, test);
            if e < lane_best {
                lane_best = e;
                trace.push(TracePoint {
                    lane,
                    iteration: it,
                    e,
                });
                debug!("lane {lane} iteration {it}: best e = {e:.6}");
            }
            let better = match &best {
                None => true,
                Some((be, bl, bi, ..)) => (e, lane, it) < (*be, *bl, *bi),
            };
            if better {
                best = Some((e, lane, it, val.to_vec(), test.to_vec(), e_val, e_test));
            }
        }
    }
    let (e, _, _, val, test, e_val, e_test) = best.expect("at least one iteration");
    let ids = |idx: &[usize]| {
        let mut v: Vec<String> = idx.iter().map(|&i| scenes[i].id.clone()).collect();
        v.sort();
        v
    };
    info!("split: e = {e:.6} (e_val {e_val:.6}, e_test {e_test:.6})");
    Ok(SplitOutcome {
        assignment: SplitAssignment {
            seed: cfg.seed,
            iterations: cfg.iterations,
            val: ids(&val),
            test: ids(&test),
            e_val,
            e_test,
            e,
        },
        trace,
    })
}

/// Per-scene bin counts of rain and rainless catalog entries.
pub fn scene_counts(
    catalog: &[PatchRecord],
    bin_of: impl Fn(f64) -> Option<usize>,
    bins: usize,
) -> Result<Vec<SceneCounts>> {
    let mut by_scene: BTreeMap<&str, SceneCounts> = BTreeMap::new();
    for r in catalog {
        let class = match r.class {
            PatchClass::Rain | PatchClass::Rainless => r.class,
            PatchClass::Discarded => continue,
        };
        let w = r
            .mean_label_wind
            .ok_or_else(|| Error::Data(format!("patch {} has no mean label wind", r.id())))?;
        let b = bin_of(w).ok_or_else(|| {
            Error::Domain(format!("patch {} wind {w} is outside the bins", r.id()))
        })?;
        let entry = by_scene.entry(&r.scene_id).or_insert_with(|| SceneCounts {
            id: r.scene_id.clone(),
            rain: vec![0; bins],
            rainless: vec![0; bins],
        });
        if class == PatchClass::Rain {
            entry.rain[b] += 1;
        } else {
            entry.rainless[b] += 1;
        }
    }
    Ok(by_scene.into_values().collect())
}

/// Sets every catalog entry's subset from its scene.
pub fn apply_assignment(catalog: &mut [PatchRecord], assignment: &SplitAssignment) {
    let subsets = assignment.subsets();
    for r in catalog {
        r.subset = Some(
            subsets
                .get(r.scene_id.as_str())
                .copied()
                .unwrap_or(Subset::Train),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub pass: bool,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub counts: BTreeMap<Subset, usize>,
    pub problems: Vec<String>,
}

pub const FRACTION_BOUNDS: (f64, f64) = (0.08, 0.12);

pub fn verify_no_leakage(assignment: &SplitAssignment, catalog: &[PatchRecord]) -> LeakageReport {
    let mut problems = Vec::new();
    let val: BTreeSet<&str> = assignment.val.iter().map(String::as_str).collect();
    let test: BTreeSet<&str> = assignment.test.iter().map(String::as_str).collect();
    for s in val.intersection(&test) {
        problems.push(format!("scene {s} is in both val and test"));
    }
    let mut seen: BTreeMap<&str, Subset> = BTreeMap::new();
    let mut counts: BTreeMap<Subset, usize> = [Subset::Train, Subset::Val, Subset::Test]
        .map(|s| (s, 0))
        .into();
    for r in catalog {
        let expected = assignment.subset_of(&r.scene_id);
        let Some(actual) = r.subset else {
            problems.push(format!("patch {} has no subset", r.id()));
            continue;
        };
        if actual != expected {
            problems.push(format!(
                "scene {}: patch {} is in {actual} but the scene is in {expected}",
                r.scene_id,
                r.id()
            ));
        }
        if let Some(prev) = seen.insert(&r.scene_id, actual) {
            if prev != actual {
                problems.push(format!(
                    "scene {} has patches in both {prev} and {actual}",
                    r.scene_id
                ));
            }
        }
        *counts.get_mut(&actual).expect("all subsets present") += 1;
    }
    let total = catalog.len().max(1) as f64;
    let frac = |s| counts[&s] as f64 / total;
    let (lo, hi) = FRACTION_BOUNDS;
    for s in [Subset::Val, Subset::Test] {
        if !(lo..=hi).contains(&frac(s)) {
            problems.push(format!(
                "{s} fraction {:.4} is outside [{lo}, {hi}]",
                frac(s)
            ));
        }
    }
    problems.dedup();
    LeakageReport {
        pass: problems.is_empty(),
        train_fraction: frac(Subset::Train),
        val_fraction: frac(Subset::Val),
        test_fraction: frac(Subset::Test),
        counts,
        problems,
    }
}
