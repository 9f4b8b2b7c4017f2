//! Every pipeline stage on the smoke-scale corpus, then the report checks
//! and the workspace verification. `sarwind run-all` does the same.
//!
//! cargo run --release --example end_to_end -- [workspace]

use std::path::PathBuf;

use sarwind::pipeline::{Overrides, Pipeline, Scale};

fn main() -> sarwind::Result<()> {
    let root = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "smoke_workspace".into()),
    );
    let overrides = Overrides {
        seed: Some(7),
        scale: Some(Scale::Smoke),
        ..Overrides::default()
    };
    let mut pipeline = Pipeline::open(&root, None, &overrides)?;
    let run = pipeline.run_all()?;
    print!("{}", run.summary.table);
    for check in &run.summary.checks {
        println!("{check}");
    }
    println!(
        "verify: {}",
        if run.verify.pass() { "PASS" } else { "FAIL" }
    );
    println!("manifest sha256 {}", run.manifest_sha256);
    Ok(())
}
