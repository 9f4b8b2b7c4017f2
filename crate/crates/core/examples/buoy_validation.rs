//! Collocate synthetic buoys with a scene's GMF wind and print a Table-3 style report.
//!
//! cargo run --release --example buoy_validation

use std::collections::BTreeMap;

use sarwind::gmf::InversionConfig;
use sarwind::metrics::{
    build_report, collocate_scene, group_by_station, Binning, CollocationConfig,
};
use sarwind::rng::seeded;
use sarwind::scene::channel;
use sarwind::synth::{
    draw_truth, gen_buoys, gen_fields, gen_stations, render_scene, BuoyParams, RenderOptions,
    SynthParams,
};

fn main() -> sarwind::Result<()> {
    let mut p = SynthParams {
        rows: 1000,
        cols: 1000,
        ..SynthParams::default()
    };
    p.rain.cells_per_10k_km2 = 40.0;
    let truth = draw_truth(&p, 0, 21, p.mean_wind_weight())?;
    let fields = gen_fields(&p, &truth)?;
    let scene = render_scene(
        &p,
        &truth,
        &fields,
        RenderOptions::default(),
        &InversionConfig::default(),
    )?;

    // stations scattered over the scene's bounding box
    let frame = scene.geo_frame();
    let corners = [(0.0, 0.0), (0.0, 999.0), (999.0, 0.0), (999.0, 999.0)]
        .map(|(r, c)| frame.pixel_to_latlon(r, c));
    let lat = corners
        .iter()
        .map(|c| c.0)
        .fold((f64::MAX, f64::MIN), |a, v| (a.0.min(v), a.1.max(v)));
    let lon = corners
        .iter()
        .map(|c| c.1)
        .fold((f64::MAX, f64::MIN), |a, v| (a.0.min(v), a.1.max(v)));
    let bp = BuoyParams {
        stations: 400,
        ..BuoyParams::default()
    };
    let mut rng = seeded(8);
    let stations = gen_stations(&mut rng, &bp, lat, lon);
    let buoys = gen_buoys(&mut rng, &stations, &frame, &fields.speed, truth.time, &bp)?;

    let cfg = CollocationConfig::default();
    let (matches, skips) = collocate_scene(
        &scene,
        &group_by_station(&buoys),
        &[channel::WSPD_GMF],
        &cfg,
    )?;
    let records = matches
        .iter()
        .filter_map(|m| m.record(channel::WSPD_GMF, cfg.convention).transpose())
        .collect::<sarwind::Result<Vec<_>>>()?;
    println!("{} collocations, {} skipped", matches.len(), skips.len());
    let report = build_report(
        "Buoy validation",
        &BTreeMap::from([(channel::WSPD_GMF.to_string(), records)]),
        Binning::Table3,
    );
    print!("{}", report.to_text());
    Ok(())
}
