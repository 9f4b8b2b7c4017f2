//! CMOD5.N forward model.

use std::sync::LazyLock;

use crate::error::{Error, Result};

const COEFFICIENT_TABLE: &str = include_str!("../../data/cmod5n_coefficients.txt");

/// Floor returned where the model's backscatter vanishes (it is exactly zero at
/// zero wind). Linear power, -80 dB.
pub const SIGMA0_FLOOR: f64 = 1.0e-8;

const THETA_MID: f64 = 40.0;
const THETA_HALF_RANGE: f64 = 25.0;
const HARMONIC_POWER: f64 = 1.6;

/// The 28 CMOD5.N coefficients, `c[0]` being c1 of the published table.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(pub [f64; 28]);

impl Coefficients {
    pub fn parse(text: &str) -> Result<Self> {
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|e| Error::Data(format!("bad coefficient `{l}`: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let array: [f64; 28] = values.try_into().map_err(|v: Vec<f64>| {
            Error::Data(format!("expected 28 coefficients, found {}", v.len()))
        })?;
        Ok(Coefficients(array))
    }

    /// 1-based access matching the published numbering.
    #[inline]
    fn c(&self, i: usize) -> f64 {
        self.0[i - 1]
    }
}

static COEFFICIENTS: LazyLock<Coefficients> = LazyLock::new(|| {
    Coefficients::parse(COEFFICIENT_TABLE).expect("shipped coefficient table is valid")
});

pub fn coefficients() -> &'static Coefficients {
    &COEFFICIENTS
}

/// Forward-model inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmfInputs {
    /// Neutral 10 m wind speed, m/s.
    pub wind_speed: f64,
    /// Wind direction relative to the antenna look direction, degrees.
    pub phi_rel: f64,
    /// Incidence angle, degrees.
    pub incidence: f64,
}

impl GmfInputs {
    pub fn new(wind_speed: f64, phi_rel: f64, incidence: f64) -> Self {
        GmfInputs {
            wind_speed,
            phi_rel,
            incidence,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=60.0).contains(&self.wind_speed) {
            return Err(Error::Domain(format!(
                "wind speed {} outside [0, 60] m/s",
                self.wind_speed
            )));
        }
        check_angles(self.incidence, self.phi_rel)
    }
}

pub(crate) fn check_angles(incidence: f64, phi_rel: f64) -> Result<()> {
    if !(15.0..=50.0).contains(&incidence) {
        return Err(Error::Domain(format!(
            "incidence {incidence} outside [15, 50] deg"
        )));
    }
    if !(0.0..360.0).contains(&phi_rel) {
        return Err(Error::Domain(format!(
            "relative direction {phi_rel} outside [0, 360) deg"
        )));
    }
    Ok(())
}

/// Model terms that depend only on incidence, reused across speeds.
#[derive(Debug, Clone, Copy)]
pub struct IncidenceTerms {
    x: f64,
    a0: f64,
    a1: f64,
    a2: f64,
    gamma: f64,
    s0: f64,
    a3_s0: f64,
    v0: f64,
    d1: f64,
    d2: f64,
}

impl IncidenceTerms {
    pub fn new(incidence: f64) -> Self {
        let c = coefficients();
        let x = (incidence - THETA_MID) / THETA_HALF_RANGE;
        let xx = x * x;
        let s0 = c.c(12) + c.c(13) * x;
        IncidenceTerms {
            x,
            a0: c.c(1) + c.c(2) * x + c.c(3) * xx + c.c(4) * x * xx,
            a1: c.c(5) + c.c(6) * x,
            a2: c.c(7) + c.c(8) * x,
            gamma: c.c(9) + c.c(10) * x + c.c(11) * xx,
            s0,
            a3_s0: sigmoid(s0),
            v0: c.c(21) + c.c(22) * x + c.c(23) * xx,
            d1: c.c(24) + c.c(25) * x + c.c(26) * xx,
            d2: c.c(27) + c.c(28) * x,
        }
    }

    /// Backscatter for speed `v` given the relative-direction harmonics.
    pub fn sigma0(&self, v: f64, harmonics: Harmonics) -> f64 {
        let c = coefficients();

        let s = self.a2 * v;
        let a3 = if s < self.s0 {
            self.a3_s0 * (s / self.s0).powf(self.s0 * (1.0 - self.a3_s0))
        } else {
            sigmoid(s)
        };
        // a3^gamma * 10^(a0 + a1 v) as one exponential
        let b0 = (self.gamma * a3.ln() + std::f64::consts::LN_10 * (self.a0 + self.a1 * v)).exp();

        let x = self.x;
        let b1 = (c.c(14) * (1.0 + x)
            - c.c(15) * v * (0.5 + x - (4.0 * (x + c.c(16) + c.c(17) * v)).tanh()))
            / ((0.34 * (v - c.c(18))).exp() + 1.0);

        let y0 = c.c(19);
        let n = c.c(20);
        let mut y = v / self.v0 + 1.0;
        if y < y0 {
            let a = y0 - (y0 - 1.0) / n;
            let b = 1.0 / (n * (y0 - 1.0).powf(n - 1.0));
            y = a + b * (y - 1.0).powf(n);
        }
        let b2 = (-self.d1 + self.d2 * y) * (-y).exp();

        let value =
            b0 * (1.0 + b1 * harmonics.cos_phi + b2 * harmonics.cos_2phi).powf(HARMONIC_POWER);
        value.max(SIGMA0_FLOOR)
    }
}

/// `cos(phi)` and `cos(2 phi)` of the relative wind direction.
#[derive(Debug, Clone, Copy)]
pub struct Harmonics {
    cos_phi: f64,
    cos_2phi: f64,
}

impl Harmonics {
    pub fn new(phi_rel_deg: f64) -> Self {
        let cos_phi = phi_rel_deg.to_radians().cos();
        Harmonics {
            cos_phi,
            cos_2phi: 2.0 * cos_phi * cos_phi - 1.0,
        }
    }
}

#[inline]
fn sigmoid(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// CMOD5.N VV backscatter in linear power.
pub fn cmod5n_sigma0(inputs: GmfInputs) -> Result<f64> {
    inputs.validate()?;
    Ok(IncidenceTerms::new(inputs.incidence)
        .sigma0(inputs.wind_speed, Harmonics::new(inputs.phi_rel)))
}

/// Reference backscatter of a 10 m/s wind at 45 deg relative direction.
pub fn neutral_reference(incidence: f64) -> Result<f64> {
    cmod5n_sigma0(GmfInputs::new(10.0, 45.0, incidence))
}

/// Sea surface roughness: `sigma0_vv` over the neutral reference at the same incidence.
///
/// The reference always uses a 45 deg relative direction; `phi_rel` is only
/// range-checked.
pub fn ssr(sigma0_vv: f64, incidence: f64, phi_rel: f64) -> Result<f64> {
    check_angles(incidence, phi_rel)?;
    if !(sigma0_vv > 0.0) {
        return Err(Error::Domain(format!(
            "sigma0 must be positive, got {sigma0_vv}"
        )));
    }
    Ok(sigma0_vv / neutral_reference(incidence)?)
}
