//! Wind-speed inversion with a fixed direction prior.

use log::debug;
use serde::{Deserialize, Serialize};

use super::cmod5n::{check_angles, Harmonics, IncidenceTerms};
use crate::error::{Error, Result};
use crate::scene::{self, channel, Grid2D, Scene, WORKING_SPACING_M};

/// Block size, in working-grid pixels, of the 1 km/px inversion grid.
pub const GMF_BLOCK: usize = 10;

/// Spacing of the coarse scan that brackets the solution, m/s.
const SCAN_STEP: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub v_min: f64,
    pub v_max: f64,
    /// Width of the final bracket around the minimizer, m/s.
    pub tolerance: f64,
}

impl Default for InversionConfig {
    fn default() -> Self {
        InversionConfig {
            v_min: 0.2,
            v_max: 50.0,
            tolerance: 0.01,
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_min < self.v_max) || self.v_min < 0.0 || self.v_max > 60.0 {
            return Err(Error::Config(format!(
                "inversion bracket [{}, {}] is invalid",
                self.v_min, self.v_max
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("inversion tolerance must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InversionStatus {
    Converged,
    /// The observation exceeds the model at `v_max`; `v_max` is returned.
    Saturated,
    /// The observation is below the model over the whole bracket.
    BelowRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub speed: f64,
    pub status: InversionStatus,
}

/// Minimizes `(cmod5n(v) - sigma0)^2` over `[v_min, v_max]`.
///
/// A 0.5 m/s scan locates the first sign change of the residual, which is then
/// refined by golden-section search to `cfg.tolerance`.
pub fn invert_wind(
    sigma0_vv: f64,
    incidence: f64,
    phi_rel: f64,
    cfg: &InversionConfig,
) -> Result<Inversion> {
    if !(sigma0_vv > 0.0) || !sigma0_vv.is_finite() {
        return Err(Error::Domain(format!(
            "sigma0 must be positive, got {sigma0_vv}"
        )));
    }
    check_angles(incidence, phi_rel)?;
    cfg.validate()?;
    Ok(invert_unchecked(
        sigma0_vv,
        &IncidenceTerms::new(incidence),
        Harmonics::new(phi_rel),
        cfg,
    ))
}

fn invert_unchecked(
    target: f64,
    terms: &IncidenceTerms,
    harmonics: Harmonics,
    cfg: &InversionConfig,
) -> Inversion {
    let residual = |v: f64| terms.sigma0(v, harmonics) - target;
    let steps = ((cfg.v_max - cfg.v_min) / SCAN_STEP).ceil().max(1.0) as usize;
    let node = |i: usize| (cfg.v_min + i as f64 * SCAN_STEP).min(cfg.v_max);

    let mut prev = residual(node(0));
    if prev == 0.0 {
        return Inversion {
            speed: node(0),
            status: InversionStatus::Converged,
        };
    }
    let first_sign = prev.signum();
    for i in 1..=steps {
        let r = residual(node(i));
        if r == 0.0 || r.signum() != prev.signum() {
            let speed =
                golden_section(|v| residual(v).powi(2), node(i - 1), node(i), cfg.tolerance);
            return Inversion {
                speed,
                status: InversionStatus::Converged,
            };
        }
        prev = r;
    }
    if first_sign < 0.0 {
        Inversion {
            speed: cfg.v_max,
            status: InversionStatus::Saturated,
        }
    } else {
        // No crossing: take the closest node and refine around it.
        let (best, _) =
            (0..=steps)
                .map(|i| (i, residual(node(i)).abs()))
                .fold(
                    (0, f64::INFINITY),
                    |acc, x| if x.1 < acc.1 { x } else { acc },
                );
        let lo = node(best.saturating_sub(1));
        let hi = node((best + 1).min(steps));
        Inversion {
            speed: golden_section(|v| residual(v).powi(2), lo, hi, cfg.tolerance),
            status: InversionStatus::BelowRange,
        }
    }
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
///
/// Returns the midpoint of the final bracket, whose width is below `tol`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = b - INV_PHI * (b - a);
    let mut x2 = a + INV_PHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INV_PHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (b - a);
            f2 = f(x2);
        }
    }
    0.5 * (a + b)
}

/// Block-averages the inputs of a scene onto the 1 km/px inversion grid.
#[derive(Debug, Clone)]
pub struct CoarseInputs {
    pub sigma0_vv: Grid2D,
    pub incidence: Grid2D,
    pub phi_rel: Grid2D,
}

pub fn coarse_inputs(scene: &Scene) -> Result<CoarseInputs> {
    let sigma0 = scene.channel(channel::SIGMA0_VV)?;
    let incidence = scene.channel(channel::INCIDENCE)?;
    let wdir = scene.channel(channel::WDIR_PRIOR)?;
    let heading = scene.heading;
    let wdir_c = scene::downscale_direction(wdir, GMF_BLOCK)?;
    Ok(CoarseInputs {
        sigma0_vv: scene::downscale_power(sigma0, GMF_BLOCK)?,
        incidence: scene::downscale_power(incidence, GMF_BLOCK)?,
        phi_rel: wdir_c.map(|d| scene::relative_direction(d, heading)),
    })
}

/// Inverts every block of the coarse grid; invalid blocks become fill.
pub fn invert_coarse(inputs: &CoarseInputs, cfg: &InversionConfig) -> Result<Grid2D> {
    cfg.validate()?;
    let mut saturated = 0usize;
    let (rows, cols) = inputs.sigma0_vv.dims();
    let grid = Grid2D::from_fn(rows, cols, inputs.sigma0_vv.pixel_spacing(), |r, c| {
        let s = inputs.sigma0_vv.get(r, c);
        let theta = inputs.incidence.get(r, c);
        let phi = inputs.phi_rel.get(r, c);
        if !(s > 0.0) || check_angles(theta, phi).is_err() {
            return f64::NAN;
        }
        let inv = invert_unchecked(s, &IncidenceTerms::new(theta), Harmonics::new(phi), cfg);
        if inv.status == InversionStatus::Saturated {
            saturated += 1;
        }
        inv.speed
    })?;
    if saturated > 0 {
        debug!("{saturated} saturated blocks at v_max = {}", cfg.v_max);
    }
    Ok(grid)
}

/// GMF wind for a whole scene: 1 km/px inversion interpolated back to 100 m/px.
pub fn invert_scene(scene: &Scene, cfg: &InversionConfig) -> Result<Grid2D> {
    let (rows, cols) = scene
        .dims()
        .ok_or_else(|| Error::Config(format!("scene {} has no channels", scene.id)))?;
    let coarse = invert_coarse(&coarse_inputs(scene)?, cfg)?;
    let fine = scene::interpolate_ancillary(&coarse, rows, cols)?;
    Ok(fine.with_spacing(WORKING_SPACING_M))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmf::{cmod5n_sigma0, GmfInputs};

    fn forward(v: f64, phi: f64, theta: f64) -> f64 {
        cmod5n_sigma0(GmfInputs::new(v, phi, theta)).unwrap()
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section(|x| (x - 1.234).powi(2), -3.0, 5.0, 1e-9);
        assert!((x - 1.234).abs() < 1e-9);
    }

    #[test]
    fn round_trip_mid_range() {
        let cfg = InversionConfig::default();
        let inv = invert_wind(forward(8.3, 120.0, 40.0), 40.0, 120.0, &cfg).unwrap();
        assert_eq!(inv.status, InversionStatus::Converged);
        assert!((inv.speed - 8.3).abs() <= 0.01);
    }

    #[test]
    fn round_trip_upper_range() {
        let cfg = InversionConfig::default();
        for (phi, theta) in [(45.0, 35.0), (0.0, 20.0), (180.0, 40.0)] {
            let inv = invert_wind(forward(25.0, phi, theta), theta, phi, &cfg).unwrap();
            assert!(
                (inv.speed - 25.0).abs() <= 0.02,
                "{phi} {theta}: {}",
                inv.speed
            );
        }
    }

    #[test]
    fn scaled_reference_matches_fine_scan() {
        let cfg = InversionConfig::default();
        let target = 1.5 * forward(10.0, 45.0, 35.0);
        let inv = invert_wind(target, 35.0, 45.0, &cfg).unwrap();

        let mut best = (f64::INFINITY, 0.0);
        let mut v = cfg.v_min;
        while v <= cfg.v_max {
            let e = (forward(v, 45.0, 35.0) - target).powi(2);
            if e < best.0 {
                best = (e, v);
            }
            v += 0.001;
        }
        assert!(
            (inv.speed - best.1).abs() <= cfg.tolerance,
            "{} vs {}",
            inv.speed,
            best.1
        );
        let rel = (forward(inv.speed, 45.0, 35.0) - target).abs() / target;
        assert!(rel < 1e-3);
    }

    #[test]
    fn saturation_is_flagged_not_an_error() {
        let cfg = InversionConfig::default();
        let inv = invert_wind(10.0 * forward(50.0, 0.0, 30.0), 30.0, 0.0, &cfg).unwrap();
        assert_eq!(inv.status, InversionStatus::Saturated);
        assert_eq!(inv.speed, cfg.v_max);
    }

    #[test]
    fn non_positive_sigma0_is_rejected() {
        let cfg = InversionConfig::default();
        assert!(matches!(
            invert_wind(0.0, 30.0, 0.0, &cfg),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            invert_wind(-1.0, 30.0, 0.0, &cfg),
            Err(Error::Domain(_))
        ));
        let bad = InversionConfig {
            v_min: 5.0,
            v_max: 1.0,
            tolerance: 0.01,
        };
        assert!(matches!(
            invert_wind(0.01, 30.0, 0.0, &bad),
            Err(Error::Config(_))
        ));
    }
}
