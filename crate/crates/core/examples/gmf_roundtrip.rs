//! Forward CMOD5.N, inversion back to wind speed, and SSR against the neutral reference.
//!
//! cargo run --example gmf_roundtrip

use sarwind::gmf::{
    cmod5n_sigma0, invert_wind, neutral_reference, ssr, GmfInputs, InversionConfig,
};

fn main() -> sarwind::Result<()> {
    let cfg = InversionConfig::default();
    println!(
        "{:>6} {:>6} {:>6} {:>12} {:>8} {:>8}",
        "v", "phi", "theta", "sigma0", "v*", "ssr"
    );
    for &(v, phi, theta) in &[
        (3.0, 0.0, 25.0),
        (8.3, 120.0, 40.0),
        (10.0, 45.0, 35.0),
        (18.0, 90.0, 30.0),
        (25.0, 180.0, 45.0),
    ] {
        let s = cmod5n_sigma0(GmfInputs::new(v, phi, theta))?;
        let inv = invert_wind(s, theta, phi, &cfg)?;
        println!(
            "{v:>6.1} {phi:>6.0} {theta:>6.0} {s:>12.6e} {:>8.3} {:>8.4}",
            inv.speed,
            ssr(s, theta, phi)?
        );
    }
    println!(
        "neutral reference at 35 deg: {:.6e}",
        neutral_reference(35.0)?
    );
    Ok(())
}
