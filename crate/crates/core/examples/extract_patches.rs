//! Tile a rendered scene into 256 px patches and classify each as rain,
//! rainless or discarded.
//!
//! cargo run --release --example extract_patches

use sarwind::gmf::InversionConfig;
use sarwind::patches::{extract_patches, PatchConfig, PATCH_SIZE};
use sarwind::synth::{draw_truth, gen_fields, render_scene, RainCell, RenderOptions, SynthParams};

fn main() -> sarwind::Result<()> {
    let p = SynthParams {
        rows: 770,
        cols: 770,
        ..SynthParams::default()
    };
    let mut truth = draw_truth(&p, 1, 9, p.mean_wind_weight())?;
    // one heavy cell centered in the middle tile
    truth.cells = vec![RainCell {
        row: 384.0,
        col: 384.0,
        sigma: 25.0,
        peak: 20.0,
    }];
    let fields = gen_fields(&p, &truth)?;
    let scene = render_scene(
        &p,
        &truth,
        &fields,
        RenderOptions::default(),
        &InversionConfig::default(),
    )?;

    let patches = extract_patches(&scene, PATCH_SIZE, &PatchConfig::default())?;
    println!(
        "{:<16} {:>10} {:>8} {:>8} {:>10}",
        "patch", "class", "rain %", "delta", "label m/s"
    );
    for patch in &patches {
        let r = patch.record();
        println!(
            "{:<16} {:>10} {:>8.2} {:>8.4} {:>10.2}",
            r.id(),
            r.class.to_string(),
            100.0 * r.rain_fraction,
            r.delta.unwrap_or(f64::NAN),
            r.mean_label_wind.unwrap_or(f64::NAN)
        );
    }
    println!(
        "channels per patch: {:?}",
        patches[0].channels.keys().collect::<Vec<_>>()
    );
    Ok(())
}
