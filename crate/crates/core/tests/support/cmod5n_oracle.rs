//! Straight-line CMOD5.N transcription used as an independent reference.
//!
//! Written directly from the published coefficient table and the original
//! Fortran listing, with no shared code with the library.

use std::path::Path;

pub fn coefficients() -> Vec<f64> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/cmod5n_coefficients.txt");
    let text = std::fs::read_to_string(path).expect("coefficient file");
    let mut c = vec![0.0]; // 1-based like the Fortran listing
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        c.push(line.parse::<f64>().expect("coefficient"));
    }
    assert_eq!(c.len(), 29);
    c
}

/// sigma0 (linear) for wind speed `v`, relative direction `phi_deg`, incidence `theta_deg`.
pub fn sigma0(c: &[f64], v: f64, phi_deg: f64, theta_deg: f64) -> f64 {
    let y0 = c[19];
    let pn = c[20];
    let a = c[19] - (c[19] - 1.0) / c[20];
    let b = 1.0 / (c[20] * (c[19] - 1.0).powf(c[20] - 1.0));

    let thetm = 40.0;
    let thethr = 25.0;
    let zpow = 1.6;

    let fi = phi_deg * std::f64::consts::PI / 180.0;
    let csfi = fi.cos();
    let cs2fi = 2.0 * csfi * csfi - 1.0;

    let x = (theta_deg - thetm) / thethr;
    let xx = x * x;

    let a0 = c[1] + c[2] * x + c[3] * xx + c[4] * x * xx;
    let a1 = c[5] + c[6] * x;
    let a2 = c[7] + c[8] * x;

    let gam = c[9] + c[10] * x + c[11] * xx;
    let s0 = c[12] + c[13] * x;

    let s = a2 * v;
    let mut a3 = 1.0 / (1.0 + (-(s.max(s0))).exp());
    if s < s0 {
        a3 *= (s / s0).powf(s0 * (1.0 - a3));
    }
    let b0 = a3.powf(gam) * 10f64.powf(a0 + a1 * v);

    let mut b1 = c[15] * v * (0.5 + x - (4.0 * (x + c[16] + c[17] * v)).tanh());
    b1 = c[14] * (1.0 + x) - b1;
    b1 /= (0.34 * (v - c[18])).exp() + 1.0;

    let v0 = c[21] + c[22] * x + c[23] * xx;
    let d1 = c[24] + c[25] * x + c[26] * xx;
    let d2 = c[27] + c[28] * x;

    let mut v2 = v / v0 + 1.0;
    if v2 < y0 {
        v2 = a + b * (v2 - 1.0).powf(pn);
    }
    let b2 = (-d1 + d2 * v2) * (-v2).exp();

    b0 * (1.0 + b1 * csfi + b2 * cs2fi).powf(zpow)
}
