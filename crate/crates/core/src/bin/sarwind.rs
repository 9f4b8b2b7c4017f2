//! `sarwind`: runs the dataset pipeline stages on a workspace directory.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sarwind::balance::Policy;
use sarwind::metrics::Binning;
use sarwind::pipeline::{Overrides, Pipeline, Scale, Stage};
use sarwind::store::verify_workspace;

#[derive(Parser)]
#[command(
    name = "sarwind",
    version,
    about = "Rain-robust SAR wind dataset pipeline"
)]
struct Cli {
    /// Workspace directory.
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,
    /// Master seed; stage seeds are derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// TOML configuration file layered over the recorded configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Split search iterations.
    #[arg(long, global = true)]
    iterations: Option<u64>,
    /// Rain stratification of the reports: table2 or table3.
    #[arg(long, global = true)]
    bins: Option<Binning>,
    /// Balancing policy: scheme1, scheme2 or eq5-as-printed.
    #[arg(long, global = true)]
    policy: Option<Policy>,
    /// Synthetic corpus preset: desk or smoke.
    #[arg(long, global = true)]
    scale: Option<Scale>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic scenes, buoy table and speckle floor.
    Synth,
    /// Invert the GMF wind of every scene.
    Invert,
    /// Tile the scenes into the candidate patch catalog.
    Extract,
    /// Balance rain and rainless patches and write their tensors.
    Balance,
    /// Assign scenes to train, validation and test.
    Split,
    /// Compute normalization statistics on the training patches.
    Stats,
    /// Collocate buoys and score the GMF and prediction channels.
    Evaluate,
    /// Collect the stage validations and print the report.
    Report,
    /// Recompute every artifact hash and cross-check the catalog.
    Verify,
    /// Run every stage, then verify.
    RunAll,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("summary serializes")
}

fn run(cli: Cli) -> sarwind::Result<bool> {
    if let Command::Verify = cli.command {
        let r = verify_workspace(&cli.workspace)?;
        println!("{}", to_json(&r));
        println!("verify: {}", if r.pass() { "PASS" } else { "FAIL" });
        return Ok(r.pass());
    }
    let file = match &cli.config {
        Some(p) => Some(
            std::fs::read_to_string(p)
                .map_err(|e| sarwind::Error::Config(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let overrides = Overrides {
        seed: cli.seed,
        scale: cli.scale,
        iterations: cli.iterations,
        binning: cli.bins,
        policy: cli.policy,
    };
    let mut p = Pipeline::open(&cli.workspace, file.as_deref(), &overrides)?;
    let stage = match cli.command {
        Command::Synth => Stage::Synth,
        Command::Invert => Stage::Invert,
        Command::Extract => Stage::Extract,
        Command::Balance => Stage::Balance,
        Command::Split => Stage::Split,
        Command::Stats => Stage::Stats,
        Command::Evaluate => Stage::Evaluate,
        Command::Report => Stage::Report,
        Command::Verify => unreachable!("handled above"),
        Command::RunAll => {
            let r = p.run_all()?;
            println!("{}", r.summary.table);
            for c in &r.summary.checks {
                println!("{c}");
            }
            println!("verify: {}", if r.verify.pass() { "PASS" } else { "FAIL" });
            println!("manifest sha256 {}", r.manifest_sha256);
            return Ok(r.pass());
        }
    };
    Ok(match stage {
        Stage::Synth => {
            let s = p.synth()?;
            println!(
                "{} scenes, {} rain cells, {:.3}% pixels >= 3 mm/h, {} buoy records, speckle floor {:.4} m/s",
                s.index.scenes.len(),
                s.index.rain_cells,
                100.0 * s.index.heavy_rain_fraction,
                s.index.buoy_records,
                s.speckle_floor.rmse
            );
            true
        }
        Stage::Invert => {
            println!("inverted {} scenes", p.invert()?);
            true
        }
        Stage::Extract => {
            let s = p.extract()?;
            println!("{} scenes: {}", s.scenes, to_json(&s.counts));
            true
        }
        Stage::Balance => {
            let plan = p.balance()?;
            println!(
                "{}: n+ = {}, n- = {} (pools {} / {}), balance error {:.3}",
                plan.policy,
                plan.n_plus,
                plan.n_minus,
                plan.rain_pool,
                plan.rainless_pool,
                plan.balance_error
            );
            plan.n_plus == plan.n_minus
        }
        Stage::Split => {
            let s = p.split()?;
            let l = &s.leakage;
            println!(
                "val {} scenes, test {} scenes, e = {:.5}; patch fractions train {:.4} val {:.4} test {:.4}",
                s.assignment.val.len(),
                s.assignment.test.len(),
                s.assignment.e,
                l.train_fraction,
                l.val_fraction,
                l.test_fraction
            );
            for problem in &l.problems {
                println!("problem: {problem}");
            }
            l.pass
        }
        Stage::Stats => {
            println!("{}", to_json(&p.stats()?));
            true
        }
        Stage::Evaluate => {
            let e = p.evaluate()?;
            println!("{}", e.buoy_table);
            if let Some(r) = &e.model_report {
                println!("{}", r.to_text());
            }
            println!(
                "{} collocations over {} scenes",
                e.collocations,
                e.scenes.len()
            );
            true
        }
        Stage::Report => {
            let s = p.report()?;
            println!("{}", s.table);
            for c in &s.checks {
                println!("{c}");
            }
            s.pass
        }
    })
}
