//! Content-addressed workspace: write artifacts, verify, then detect a flipped byte.
//!
//! cargo run --example workspace_verify -- [dir]

use std::fs;
use std::path::PathBuf;

use sarwind::store::{verify_workspace, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "example_workspace".into()),
    );
    let mut ws = Workspace::open(&root)?;
    ws.write("stats/example.json", b"{\"mean\": 1.0}\n")?;
    ws.write("patches/example.f32", &[0u8; 64])?;
    ws.save_manifest()?;
    let report = verify_workspace(&root)?;
    println!(
        "fresh: pass = {}, {} artifacts checked",
        report.pass(),
        report.checked
    );

    let path = ws.path("patches/example.f32");
    let mut bytes = fs::read(&path)?;
    bytes[7] ^= 0x80;
    fs::write(&path, &bytes)?;
    let report = verify_workspace(&root)?;
    println!(
        "tampered: pass = {}, modified {:?}",
        report.pass(),
        report.modified
    );
    Ok(())
}
