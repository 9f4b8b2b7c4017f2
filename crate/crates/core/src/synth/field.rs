//! Smooth Gaussian random fields.
//!
//! White noise on a coarse grid (one node every `COARSE_FACTOR` pixels) is
//! convolved with a separable Gaussian kernel of standard deviation
//! `correlation_km` and normalized so the sum of squared 2-D weights is 1,
//! which gives unit variance at every node. The node field is bilinearly
//! upsampled to the pixel grid.

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, seeded};
use crate::scene::{interpolate_ancillary, wrap_degrees, Grid2D, WORKING_SPACING_M};

/// Pixels per coarse node (1 km at 100 m/px).
pub const COARSE_FACTOR: usize = 10;

/// 1-D kernel of standard deviation `sigma` nodes, truncated at 3 sigma and
/// scaled so its squared weights sum to 1.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return vec![1.0];
    }
    let half = (3.0 * sigma).ceil() as i64;
    let raw: Vec<f64> = (-half..=half)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let norm = raw.iter().map(|w| w * w).sum::<f64>().sqrt();
    raw.into_iter().map(|w| w / norm).collect()
}

/// Coarse node count covering `n` pixels with corner nodes on the first and last pixel.
pub fn coarse_len(n: usize) -> usize {
    (n - 1).div_ceil(COARSE_FACTOR) + 1
}

/// Zero-mean, unit-variance field at pixel resolution.
pub fn unit_field(
    rng: &mut impl RngCore,
    rows: usize,
    cols: usize,
    correlation_km: f64,
) -> Result<Grid2D> {
    if rows < 2 || cols < 2 {
        return Err(Error::Dimension(format!(
            "random field needs at least 2x2 pixels, got {rows}x{cols}"
        )));
    }
    let node_km = COARSE_FACTOR as f64 * WORKING_SPACING_M / 1000.0;
    let k = gaussian_kernel(correlation_km / node_km);
    let half = k.len() / 2;
    let (cr, cc) = (coarse_len(rows), coarse_len(cols));
    let (nr, nc) = (cr + 2 * half, cc + 2 * half);
    let noise: Vec<f64> = (0..nr * nc).map(|_| StandardNormal.sample(rng)).collect();

    // rows pass then columns pass
    let mut tmp = vec![0.0; cr * nc];
    for r in 0..cr {
        for c in 0..nc {
            tmp[r * nc + c] = (0..k.len()).map(|t| k[t] * noise[(r + t) * nc + c]).sum();
        }
    }
    let coarse = Grid2D::from_fn(cr, cc, WORKING_SPACING_M * COARSE_FACTOR as f64, |r, c| {
        (0..k.len()).map(|t| k[t] * tmp[r * nc + c + t]).sum()
    })?;
    Ok(interpolate_ancillary(&coarse, rows, cols)?.with_spacing(WORKING_SPACING_M))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindFieldParams {
    pub mean: f64,
    pub std: f64,
    pub correlation_km: f64,
    /// Meteorological direction the field is centered on, degrees.
    pub direction: f64,
    /// Standard deviation of the smooth direction perturbation, degrees.
    pub direction_std: f64,
}

/// Speed (clipped at 0) and direction fields.
pub fn gen_wind_field(
    p: &WindFieldParams,
    rows: usize,
    cols: usize,
    seed: u64,
) -> Result<(Grid2D, Grid2D)> {
    if !(p.mean >= 0.0 && p.std >= 0.0 && p.direction_std >= 0.0) {
        return Err(Error::Config(
            "wind mean and standard deviations must be >= 0".into(),
        ));
    }
    let speed = if p.std == 0.0 {
        Grid2D::filled(rows, cols, WORKING_SPACING_M, p.mean)?
    } else {
        let z = unit_field(
            &mut seeded(derive_seed(seed, 1)),
            rows,
            cols,
            p.correlation_km,
        )?;
        z.map(|v| (p.mean + p.std * v).max(0.0))
    };
    let direction = if p.direction_std == 0.0 {
        Grid2D::filled(rows, cols, WORKING_SPACING_M, wrap_degrees(p.direction))?
    } else {
        let z = unit_field(
            &mut seeded(derive_seed(seed, 2)),
            rows,
            cols,
            p.correlation_km,
        )?;
        z.map(|v| wrap_degrees(p.direction + p.direction_std * v))
    };
    Ok((speed, direction))
}
