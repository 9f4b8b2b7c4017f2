//! Radial rain cells.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::{rain_class_of_rate, Grid2D, WORKING_SPACING_M};

/// Cells are cut off beyond this many standard deviations from the center.
pub const CELL_CUTOFF_SIGMAS: f64 = 4.0;

/// Rate `peak * exp(-d^2 / (2 sigma^2))` within `CELL_CUTOFF_SIGMAS * sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainCell {
    pub row: f64,
    pub col: f64,
    /// Pixels.
    pub sigma: f64,
    /// mm/h.
    pub peak: f64,
}

impl RainCell {
    pub fn rate_at(&self, r: f64, c: f64) -> f64 {
        let d2 = (r - self.row).powi(2) + (c - self.col).powi(2);
        if d2 > (CELL_CUTOFF_SIGMAS * self.sigma).powi(2) {
            0.0
        } else {
            self.peak * (-d2 / (2.0 * self.sigma * self.sigma)).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RainParams {
    /// Expected cells per 10,000 km2 of scene before wind weighting.
    pub cells_per_10k_km2: f64,
    pub sigma_km: (f64, f64),
    pub peak_mm_h: (f64, f64),
    /// Cell counts are weighted by `exp(-(v - center)^2 / (2 width^2))` of the
    /// scene mean wind, normalized to mean 1 over the wind distribution.
    pub wind_center: f64,
    pub wind_width: f64,
}

impl Default for RainParams {
    /// About 0.5% of pixels at >= 3 mm/h.
    fn default() -> Self {
        RainParams {
            cells_per_10k_km2: 0.93,
            sigma_km: (1.5, 3.0),
            peak_mm_h: (8.0, 25.0),
            wind_center: 8.0,
            wind_width: 3.0,
        }
    }
}

impl RainParams {
    pub fn validate(&self) -> Result<()> {
        let ok_range = |(lo, hi): (f64, f64)| lo > 0.0 && lo <= hi;
        if !(self.cells_per_10k_km2 >= 0.0) || !ok_range(self.sigma_km) || !ok_range(self.peak_mm_h)
        {
            return Err(Error::Config(
                "rain parameters must be positive with lo <= hi".into(),
            ));
        }
        if !(self.wind_width > 0.0) {
            return Err(Error::Config("rain wind width must be positive".into()));
        }
        Ok(())
    }

    pub fn wind_weight(&self, v: f64) -> f64 {
        (-(v - self.wind_center).powi(2) / (2.0 * self.wind_width * self.wind_width)).exp()
    }
}

/// Draws cell count and cells for one scene. `expected` is the Poisson mean.
pub fn draw_cells(
    rng: &mut impl Rng,
    p: &RainParams,
    expected: f64,
    rows: usize,
    cols: usize,
) -> Result<Vec<RainCell>> {
    p.validate()?;
    let n = if expected > 0.0 {
        Poisson::new(expected)
            .map_err(|e| Error::Config(format!("rain Poisson mean {expected}: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    let km_to_px = 1000.0 / WORKING_SPACING_M;
    Ok((0..n)
        .map(|_| RainCell {
            row: rng.random_range(0.0..rows as f64),
            col: rng.random_range(0.0..cols as f64),
            sigma: rng.random_range(p.sigma_km.0..=p.sigma_km.1) * km_to_px,
            peak: rng.random_range(p.peak_mm_h.0..=p.peak_mm_h.1),
        })
        .collect())
}

/// Superposed rate field (mm/h) and its rain classes.
pub fn gen_rain(cells: &[RainCell], rows: usize, cols: usize) -> Result<(Grid2D, Grid2D)> {
    let mut rate = Grid2D::filled(rows, cols, WORKING_SPACING_M, 0.0)?;
    for cell in cells {
        let reach = CELL_CUTOFF_SIGMAS * cell.sigma;
        let r0 = (cell.row - reach).floor().max(0.0) as usize;
        let c0 = (cell.col - reach).floor().max(0.0) as usize;
        let r1 = (((cell.row + reach).floor() + 1.0).max(0.0) as usize).min(rows);
        let c1 = (((cell.col + reach).floor() + 1.0).max(0.0) as usize).min(cols);
        for r in r0..r1 {
            for c in c0..c1 {
                let v = rate.get(r, c) + cell.rate_at(r as f64, c as f64);
                rate.set(r, c, v);
            }
        }
    }
    let class = rate.map(|v| rain_class_of_rate(v) as f64);
    Ok((rate, class))
}
