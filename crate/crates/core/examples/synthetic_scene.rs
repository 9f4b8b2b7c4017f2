//! Render one synthetic scene with rain and write it as a scene directory.
//!
//! cargo run --release --example synthetic_scene -- [out_dir]

use std::path::PathBuf;

use sarwind::gmf::InversionConfig;
use sarwind::scene::{channel, write_scene};
use sarwind::synth::{draw_truth, gen_fields, gmf_rmse, render_scene, RenderOptions, SynthParams};

fn main() -> sarwind::Result<()> {
    let out = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "synthetic_scene".into()),
    );
    let mut p = SynthParams {
        rows: 600,
        cols: 600,
        ..SynthParams::default()
    };
    // denser rain than the corpus so a small scene shows some
    p.rain.cells_per_10k_km2 = 6.0;
    let truth = draw_truth(&p, 0, 42, p.mean_wind_weight())?;
    let fields = gen_fields(&p, &truth)?;
    let scene = render_scene(
        &p,
        &truth,
        &fields,
        RenderOptions::default(),
        &InversionConfig::default(),
    )?;

    let rc = scene.channel(channel::RAIN_CLASS)?;
    let heavy = rc.values().iter().filter(|&&c| c >= 2.0).count();
    println!("scene {} at {}", scene.id, scene.acquisition_time);
    println!(
        "mean wind {:.2} m/s, {} rain cells",
        truth.wind.mean,
        truth.cells.len()
    );
    println!(
        "{:.3}% of pixels at >= 3 mm/h",
        100.0 * heavy as f64 / rc.values().len() as f64
    );
    println!("GMF wind RMSE against truth {:.3} m/s", gmf_rmse(&scene)?);
    write_scene(&out, &scene)?;
    println!("wrote {}", out.display());
    Ok(())
}
