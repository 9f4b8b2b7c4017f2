//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
//!
//! The end-to-end and determinism checks run the desk-scale pipeline twice
//! (200 scenes each); the balancing and split checks read the first run.

#[path = "support/cmod5n_oracle.rs"]
mod cmod5n_oracle;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarwind::balance::{target_rainless, BalancePlan, Bins, WindHistogram};
use sarwind::gmf::{cmod5n_sigma0, invert_wind, ssr, GmfInputs, InversionConfig};
use sarwind::metrics::{bias, pcc, rmse, wind_at_height, Binning, EvalRecord, Source};
use sarwind::patches::decode_catalog;
use sarwind::pipeline::{
    Evaluation, Overrides, Pipeline, RunAll, Stage, CATALOG, EVALUATION, LEAKAGE, PLAN,
    SPECKLE_FLOOR,
};
use sarwind::split::{
    scene_counts, stochastic_split, LeakageReport, Objective, SceneCounts, SplitAssignment,
};
use sarwind::synth::SpeckleFloor;

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, failures: Vec<String>, detail: String) -> Outcome {
    let pass = failures.is_empty();
    Outcome {
        name,
        pass,
        detail: if pass { detail } else { failures.join("; ") },
    }
}

fn gmf_oracle() -> Outcome {
    let t = Instant::now();
    let mut failures = Vec::new();
    let c = cmod5n_oracle::coefficients();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_rel: f64 = 0.0;
    for _ in 0..10 {
        let (v, phi, theta) = (
            rng.random_range(0.5..60.0),
            rng.random_range(0.0..360.0),
            rng.random_range(15.0..=50.0),
        );
        let expected = cmod5n_oracle::sigma0(&c, v, phi, theta);
        let got = cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap();
        worst_rel = worst_rel.max(((got - expected) / expected).abs());
    }
    if worst_rel > 1e-10 {
        failures.push(format!("forward relative error {worst_rel:e} > 1e-10"));
    }
    let cfg = InversionConfig::default();
    let mut worst: f64 = 0.0;
    for phi in [0.0, 45.0, 90.0, 135.0, 180.0] {
        for theta in [20.0, 25.0, 30.0, 35.0, 40.0, 45.0] {
            for i in 0..=48 {
                let v = 1.0 + 0.5 * i as f64;
                let s = cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap();
                worst = worst.max((invert_wind(s, theta, phi, &cfg).unwrap().speed - v).abs());
            }
        }
    }
    if worst > 0.02 {
        failures.push(format!("round trip error {worst:.4} m/s > 0.02"));
    }
    let secs = t.elapsed().as_secs_f64();
    if secs >= 5.0 {
        failures.push(format!("took {secs:.1} s"));
    }
    outcome(
        "gmf oracle",
        failures,
        format!("forward rel err {worst_rel:.1e}, round trip {worst:.4} m/s over 1470 points, {secs:.2} s"),
    )
}

fn ssr_identity() -> Outcome {
    let mut worst: f64 = 0.0;
    for k in 0..=5 {
        let theta = 20.0 + 5.0 * k as f64;
        let s = cmod5n_sigma0(GmfInputs::new(10.0, 45.0, theta)).unwrap();
        worst = worst.max((ssr(s, theta, 45.0).unwrap() - 1.0).abs());
    }
    let failures = if worst > 1e-12 {
        vec![format!("|ssr - 1| = {worst:e}")]
    } else {
        Vec::new()
    };
    outcome(
        "ssr identity",
        failures,
        format!("max |ssr - 1| = {worst:.1e} for theta 20..45"),
    )
}

fn balancing(plan: &BalancePlan) -> Outcome {
    let mut failures = Vec::new();
    if plan.n_plus != plan.n_minus {
        failures.push(format!("n+ = {} but n- = {}", plan.n_plus, plan.n_minus));
    }
    if plan.rain_removed_fraction != 0.0 {
        failures.push(format!(
            "{:.2}% of rain patches dropped",
            100.0 * plan.rain_removed_fraction
        ));
    }
    if plan.balance_error > 10.0 {
        failures.push(format!("balance error {:.3} > 10", plan.balance_error));
    }
    // hand cases: 2P - P+ with and without the clamp
    let bins = Bins::uniform(0.0, 2.0, 2, false).unwrap();
    let h = |p: [f64; 2]| WindHistogram::from_probs(&bins, p.to_vec()).unwrap();
    let (t, relaxed) = target_rainless(&h([0.5, 0.5]), &h([1.0, 0.0])).unwrap();
    if t.probs != [0.0, 1.0] || !relaxed.is_empty() {
        failures.push(format!(
            "hand case 1 gave {:?} relaxed {relaxed:?}",
            t.probs
        ));
    }
    let (t, relaxed) = target_rainless(&h([0.3, 0.7]), &h([0.8, 0.2])).unwrap();
    if t.probs != [0.0, 1.0] || relaxed != [0] {
        failures.push(format!("clamp case gave {:?} relaxed {relaxed:?}", t.probs));
    }
    outcome(
        "balancing",
        failures,
        format!(
            "200 scenes: n+ = n- = {}, rain removed 0, balance error {:.4}; hand cases exact",
            plan.n_plus, plan.balance_error
        ),
    )
}

fn exhaustive_optimum(scenes: &[SceneCounts]) -> f64 {
    let objective = Objective::new(scenes, 0.1).unwrap();
    let mut best = f64::INFINITY;
    for code in 0..3usize.pow(scenes.len() as u32) {
        let (mut val, mut test, mut c) = (Vec::new(), Vec::new(), code);
        for i in 0..scenes.len() {
            match c % 3 {
                1 => val.push(i),
                2 => test.push(i),
                _ => {}
            }
            c /= 3;
        }
        if !val.is_empty() && !test.is_empty() {
            best = best.min(objective.score(scenes, &val, &test).2);
        }
    }
    best
}

fn split(ws: &Path, pipeline: &Pipeline) -> Outcome {
    let mut failures = Vec::new();
    let leakage: LeakageReport =
        serde_json::from_slice(&fs::read(ws.join(LEAKAGE)).unwrap()).unwrap();
    if !leakage.pass {
        failures.extend(leakage.problems.iter().cloned());
    }
    let recorded: SplitAssignment =
        serde_json::from_slice(&fs::read(ws.join(sarwind::pipeline::ASSIGNMENT)).unwrap()).unwrap();

    // repeated seed on the desk catalog, timed at the configured iterations
    let catalog = decode_catalog(&fs::read(ws.join(CATALOG)).unwrap(), &ws.join(CATALOG)).unwrap();
    let bins = pipeline.cfg.bins.bins().unwrap();
    let counts = scene_counts(&catalog, |w| bins.index(w), bins.len()).unwrap();
    let cfg = pipeline
        .cfg
        .split
        .with_seed(pipeline.stage_seed(Stage::Split).unwrap());
    let t = Instant::now();
    let again = stochastic_split(&counts, &cfg).unwrap().assignment;
    let secs = t.elapsed().as_secs_f64();
    if again != recorded || again.e.to_bits() != recorded.e.to_bits() {
        failures.push("repeated seed gave a different assignment".into());
    }
    if cfg.iterations != 20_000 {
        failures.push(format!("configured for {} iterations", cfg.iterations));
    }
    if secs >= 60.0 {
        failures.push(format!("20,000 iterations took {secs:.1} s"));
    }

    // 12-scene toy against the exhaustive optimum
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let toy: Vec<SceneCounts> = (0..12)
        .map(|i| SceneCounts {
            id: format!("T{i:02}"),
            rain: (0..4).map(|_| rng.random_range(0..4)).collect(),
            rainless: (0..4).map(|_| rng.random_range(0..7)).collect(),
        })
        .collect();
    let best = exhaustive_optimum(&toy);
    let got = stochastic_split(
        &toy,
        &sarwind::split::SplitConfig {
            iterations: 20_000,
            seed: 1,
            ..Default::default()
        },
    )
    .unwrap()
    .assignment
    .e;
    if got > 1.5 * best {
        failures.push(format!("toy e {got:.5} > 1.5 x optimum {best:.5}"));
    }
    outcome(
        "split",
        failures,
        format!(
            "no leakage, val {:.4}, test {:.4}; repeat identical in {secs:.2} s; toy e {got:.5} vs optimum {best:.5}",
            leakage.val_fraction, leakage.test_fraction
        ),
    )
}

fn metrics() -> Outcome {
    let mut failures = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let records: Vec<EvalRecord> = (0..100)
        .map(|_| {
            let y: f64 = rng.random_range(0.0..25.0);
            EvalRecord::new(
                y,
                (y + rng.random_range(-3.0..3.0f64)).max(0.0),
                rng.random_range(0..4),
                Source::Model,
            )
        })
        .collect();
    let (n, mut sy, mut sp, mut syy, mut spp, mut syp, mut sd, mut sdd) =
        (100.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for r in &records {
        let (y, p) = (r.reference, r.predicted);
        sy += y;
        sp += p;
        syy += y * y;
        spp += p * p;
        syp += y * p;
        sd += p - y;
        sdd += (p - y) * (p - y);
    }
    let oracle_pcc =
        (n * syp - sy * sp) / ((n * syy - sy * sy).sqrt() * (n * spp - sp * sp).sqrt());
    let errs = [
        (bias(&records).unwrap() - sd / n).abs(),
        (rmse(&records).unwrap() - (sdd / n).sqrt()).abs() / (sdd / n).sqrt(),
        (pcc(&records).unwrap() - oracle_pcc).abs() / oracle_pcc,
    ];
    if errs.iter().any(|&e| e > 1e-12) {
        failures.push(format!("oracle errors {errs:?}"));
    }
    let hand: Vec<EvalRecord> = [(1.0, 1.0), (2.0, 3.0), (3.0, 2.0), (4.0, 4.0)]
        .iter()
        .map(|&(y, p)| EvalRecord::new(y, p, 0, Source::Buoy))
        .collect();
    let hand_pcc = pcc(&hand).unwrap();
    if (hand_pcc - 0.8).abs() > 1e-12 {
        failures.push(format!("hand pcc {hand_pcc}"));
    }
    let h = wind_at_height(10.0, 4.1).unwrap();
    if (h - 9.066).abs() > 0.001 {
        failures.push(format!("wind_at_height(10, 4.1) = {h}"));
    }
    let bin = |rate: f64| {
        let mut r = EvalRecord::new(5.0, 5.0, 0, Source::Model);
        r.rain_rate = Some(rate);
        r.bin(Binning::Table2)
    };
    let edges = [
        (0.999, 0),
        (1.0, 1),
        (2.999, 1),
        (3.0, 2),
        (9.999, 2),
        (10.0, 3),
    ];
    if edges.iter().any(|&(rate, b)| bin(rate) != b) {
        failures.push("stratification is not half-open at 1, 3, 10 mm/h".into());
    }
    outcome(
        "metrics",
        failures,
        format!("oracle errors <= {:.1e}; hand pcc {hand_pcc:.12}; wind_at_height {h:.4}; bins half-open", errs.iter().fold(0.0f64, |a, &b| a.max(b))),
    )
}

fn end_to_end(ws: &Path, run: &RunAll, secs: f64) -> Outcome {
    let mut failures = Vec::new();
    let eval: Evaluation = serde_json::from_slice(&fs::read(ws.join(EVALUATION)).unwrap()).unwrap();
    let floor: SpeckleFloor =
        serde_json::from_slice(&fs::read(ws.join(SPECKLE_FLOOR)).unwrap()).unwrap();
    if eval.binning != Binning::Table3 || !ws.join("reports/buoy_table3.txt").exists() {
        failures.push("no Table-3-format report".into());
    }
    let bias = eval.gates.heavy_rain_bias;
    match bias {
        Some(b) if b >= 1.0 => {}
        _ => failures.push(format!(
            "heavy-rain bias {bias:?} over {} collocations",
            eval.gates.heavy_rain_n
        )),
    }
    let limit = 2.0 * floor.rmse;
    let rainless = eval.gates.rainless_rmse;
    match rainless {
        Some(r) if r <= limit => {}
        _ => failures.push(format!("rainless rmse {rainless:?} > {limit:.3}")),
    }
    if !run.verify.pass() {
        failures.push(format!("verify failed: {:?}", run.verify));
    }
    if secs >= 600.0 {
        failures.push(format!("run-all took {secs:.0} s"));
    }
    outcome(
        "end to end",
        failures,
        format!(
            "GMF bias {:.2} m/s over {} collocations >= 3 mm/h; rainless rmse {:.3} <= {limit:.3}; {secs:.0} s",
            bias.unwrap_or(f64::NAN),
            eval.gates.heavy_rain_n,
            rainless.unwrap_or(f64::NAN)
        ),
    )
}

fn run_all(ws: &Path) -> (Pipeline, RunAll, f64) {
    let o = Overrides {
        seed: Some(7),
        ..Overrides::default()
    };
    let t = Instant::now();
    let mut p = Pipeline::open(ws, None, &o).unwrap();
    let run = p.run_all().unwrap();
    (p, run, t.elapsed().as_secs_f64())
}

fn main() -> ExitCode {
    let mut results = vec![gmf_oracle(), ssr_identity(), metrics()];

    let scratch = tempfile::tempdir().unwrap();
    let (a, b) = (scratch.path().join("a"), scratch.path().join("b"));
    let (pa, first, secs) = run_all(&a);
    let plan: BalancePlan = serde_json::from_slice(&fs::read(a.join(PLAN)).unwrap()).unwrap();
    results.push(balancing(&plan));
    results.push(split(&a, &pa));
    results.push(end_to_end(&a, &first, secs));
    drop(pa);
    // two desk workspaces do not fit on disk together
    fs::remove_dir_all(&a).unwrap();

    let (_, second, _) = run_all(&b);
    results.push(outcome(
        "determinism",
        if first.manifest_sha256 == second.manifest_sha256 {
            Vec::new()
        } else {
            vec![format!(
                "manifests differ: {} vs {}",
                first.manifest_sha256, second.manifest_sha256
            )]
        },
        format!("two run-all --seed 7 manifests: {}", first.manifest_sha256),
    ));

    for r in &results {
        println!(
            "{} {}: {}",
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        );
    }
    if results.iter().all(|r| r.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
