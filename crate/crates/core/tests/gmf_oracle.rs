//! CMOD5.N against an independent straight-line transcription, plus the
//! inversion round-trip lattice.

#[path = "support/cmod5n_oracle.rs"]
mod cmod5n_oracle;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sarwind::gmf::{cmod5n_sigma0, invert_wind, ssr, GmfInputs, InversionConfig};

#[test]
fn forward_matches_transcription_on_random_points() {
    let c = cmod5n_oracle::coefficients();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..10 {
        let v = rng.random_range(0.5..60.0);
        let phi = rng.random_range(0.0..360.0);
        let theta = rng.random_range(15.0..=50.0);
        let expected = cmod5n_oracle::sigma0(&c, v, phi, theta);
        let got = cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap();
        assert!(
            ((got - expected) / expected).abs() <= 1e-10,
            "v={v} phi={phi} theta={theta}: {got} vs {expected}"
        );
    }
}

#[test]
fn ssr_matches_oracle_ratio() {
    let c = cmod5n_oracle::coefficients();
    let sigma0 = cmod5n_oracle::sigma0(&c, 15.0, 45.0, 30.0);
    let expected = sigma0 / cmod5n_oracle::sigma0(&c, 10.0, 45.0, 30.0);
    let got = ssr(sigma0, 30.0, 45.0).unwrap();
    assert!(((got - expected) / expected).abs() <= 1e-12);
}

#[test]
fn monotone_in_speed_for_tested_geometries() {
    for phi in [0.0, 45.0, 90.0, 135.0, 180.0] {
        for theta in [20.0, 30.0, 35.0, 40.0] {
            let mut last = 0.0;
            for i in 0..=48 {
                let v = 1.0 + 0.5 * i as f64;
                let s = cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap();
                assert!(s > last, "phi={phi} theta={theta} v={v}");
                last = s;
            }
        }
    }
}

#[test]
fn inversion_round_trip_lattice() {
    let cfg = InversionConfig::default();
    let mut worst: f64 = 0.0;
    for phi in [0.0, 45.0, 90.0, 135.0, 180.0] {
        for theta in [20.0, 30.0, 40.0] {
            for i in 0..=48 {
                let v = 1.0 + 0.5 * i as f64;
                let s = cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap();
                let inv = invert_wind(s, theta, phi, &cfg).unwrap();
                worst = worst.max((inv.speed - v).abs());
                assert!(
                    (inv.speed - v).abs() <= 0.02,
                    "phi={phi} theta={theta} v={v}: {}",
                    inv.speed
                );
            }
        }
    }
    assert!(worst <= 0.02);
}
