//! Per-channel normalization statistics over training patches, and the
//! normalize/denormalize round trip.
//!
//! cargo run --release --example channel_stats

use sarwind::gmf::InversionConfig;
use sarwind::patches::{extract_patches, PatchConfig, PATCH_SIZE};
use sarwind::stats::{compute_stats, denormalize, normalize, INPUT_CHANNELS};
use sarwind::synth::{draw_truth, gen_fields, render_scene, RenderOptions, SynthParams};

fn main() -> sarwind::Result<()> {
    let p = SynthParams {
        rows: 520,
        cols: 520,
        ..SynthParams::default()
    };
    let mut patches = Vec::new();
    for i in 0..3 {
        let truth = draw_truth(&p, i, 4, p.mean_wind_weight())?;
        let scene = render_scene(
            &p,
            &truth,
            &gen_fields(&p, &truth)?,
            RenderOptions::default(),
            &InversionConfig::default(),
        )?;
        patches.extend(extract_patches(
            &scene,
            PATCH_SIZE,
            &PatchConfig::default(),
        )?);
    }
    let ids: Vec<String> = patches.iter().map(|p| p.id()).collect();
    let stats = compute_stats(
        ids.iter()
            .map(String::as_str)
            .zip(patches.iter().map(|p| &p.channels)),
        &INPUT_CHANNELS,
    )?;
    for (name, s) in &stats.channels {
        println!("{name:<12} mean {:>12.6e}  std {:>12.6e}", s.mean, s.std);
    }
    println!("train fingerprint {}", stats.train_fingerprint);

    let n = normalize(&patches[0].channels, &stats, &INPUT_CHANNELS)?;
    let back = denormalize(&n, &stats, &INPUT_CHANNELS)?;
    let worst = INPUT_CHANNELS
        .iter()
        .flat_map(|c| {
            back[*c]
                .values()
                .iter()
                .zip(patches[0].channels[*c].values())
                .map(|(a, b)| (a - b).abs() / b.abs().max(1e-30))
        })
        .fold(0.0f64, f64::max);
    println!("round trip max relative error {worst:.1e}");
    Ok(())
}
