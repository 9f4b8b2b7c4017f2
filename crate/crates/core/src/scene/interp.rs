//! Resampling onto the common working grid.

use crate::error::{Error, Result};

use super::Grid2D;

/// What to do when the coarse grid is a single row or column.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fallback {
    Error,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone)]
pub struct Interpolated {
    pub grid: Grid2D,
    pub method: Method,
}

/// Bilinear upsampling on the normalized index grid.
///
/// Output corners coincide with input corners. An output pixel is fill when any
/// of the four stencil pixels is fill.
pub fn interpolate_ancillary(
    coarse: &Grid2D,
    target_rows: usize,
    target_cols: usize,
) -> Result<Grid2D> {
    interpolate_ancillary_with(coarse, target_rows, target_cols, Fallback::Error).map(|i| i.grid)
}

pub fn interpolate_ancillary_with(
    coarse: &Grid2D,
    target_rows: usize,
    target_cols: usize,
    fallback: Fallback,
) -> Result<Interpolated> {
    let (rows, cols) = coarse.dims();
    if target_rows < rows || target_cols < cols {
        return Err(Error::Dimension(format!(
            "target {target_rows}x{target_cols} is smaller than source {rows}x{cols}"
        )));
    }
    if rows < 2 || cols < 2 {
        return match fallback {
            Fallback::Error => Err(Error::Dimension(format!(
                "bilinear interpolation needs at least 2x2 input, got {rows}x{cols}"
            ))),
            Fallback::Nearest => Ok(Interpolated {
                grid: nearest(coarse, target_rows, target_cols)?,
                method: Method::Nearest,
            }),
        };
    }

    let row_taps: Vec<(usize, f64)> = (0..target_rows)
        .map(|i| tap(i, target_rows, rows))
        .collect();
    let col_taps: Vec<(usize, f64)> = (0..target_cols)
        .map(|j| tap(j, target_cols, cols))
        .collect();
    let spacing = coarse.pixel_spacing() * (cols - 1) as f64 / (target_cols - 1) as f64;

    let grid = Grid2D::from_fn(target_rows, target_cols, spacing, |i, j| {
        let (r0, fy) = row_taps[i];
        let (c0, fx) = col_taps[j];
        let v00 = coarse.get(r0, c0);
        let v01 = coarse.get(r0, c0 + 1);
        let v10 = coarse.get(r0 + 1, c0);
        let v11 = coarse.get(r0 + 1, c0 + 1);
        if [v00, v01, v10, v11].iter().any(|v| coarse.is_fill(*v)) {
            return f64::NAN;
        }
        let top = lerp(v00, v01, fx);
        let bottom = lerp(v10, v11, fx);
        lerp(top, bottom, fy)
    })?;
    Ok(Interpolated {
        grid,
        method: Method::Bilinear,
    })
}

/// Interpolates a direction field (degrees) through its unit-vector components.
///
/// Output is in `[0, 360)`.
pub fn interpolate_direction(
    coarse_deg: &Grid2D,
    target_rows: usize,
    target_cols: usize,
) -> Result<Grid2D> {
    let sin = coarse_deg.map(|d| d.to_radians().sin());
    let cos = coarse_deg.map(|d| d.to_radians().cos());
    let sin = interpolate_ancillary(&sin, target_rows, target_cols)?;
    let cos = interpolate_ancillary(&cos, target_rows, target_cols)?;
    sin.zip_map(&cos, |s, c| wrap_degrees(s.atan2(c).to_degrees()))
}

/// Block mean over `factor x factor` windows, in linear units.
///
/// Fill pixels are excluded; an all-fill block is fill.
pub fn downscale_power(fine: &Grid2D, factor: usize) -> Result<Grid2D> {
    let (rows, cols) = check_factor(fine, factor)?;
    Grid2D::from_fn(
        rows,
        cols,
        fine.pixel_spacing() * factor as f64,
        |br, bc| {
            let mut sum = 0.0;
            let mut n = 0usize;
            for r in br * factor..(br + 1) * factor {
                for c in bc * factor..(bc + 1) * factor {
                    let v = fine.get(r, c);
                    if !fine.is_fill(v) {
                        sum += v;
                        n += 1;
                    }
                }
            }
            if n == 0 {
                f64::NAN
            } else {
                sum / n as f64
            }
        },
    )
}

/// Circular block mean of a direction field (degrees).
pub fn downscale_direction(fine_deg: &Grid2D, factor: usize) -> Result<Grid2D> {
    let sin = downscale_power(&fine_deg.map(|d| d.to_radians().sin()), factor)?;
    let cos = downscale_power(&fine_deg.map(|d| d.to_radians().cos()), factor)?;
    sin.zip_map(&cos, |s, c| wrap_degrees(s.atan2(c).to_degrees()))
}

/// Maps any angle onto `[0, 360)`.
pub fn wrap_degrees(deg: f64) -> f64 {
    let w = deg.rem_euclid(360.0);
    if w >= 360.0 {
        0.0
    } else {
        w
    }
}

fn check_factor(fine: &Grid2D, factor: usize) -> Result<(usize, usize)> {
    if factor == 0 {
        return Err(Error::Domain("downscale factor must be positive".into()));
    }
    let (rows, cols) = fine.dims();
    if rows % factor != 0 || cols % factor != 0 {
        return Err(Error::Dimension(format!(
            "{rows}x{cols} is not divisible by factor {factor}; crop first"
        )));
    }
    Ok((rows / factor, cols / factor))
}

fn tap(i: usize, target: usize, source: usize) -> (usize, f64) {
    let pos = i as f64 * (source - 1) as f64 / (target - 1).max(1) as f64;
    let i0 = (pos.floor() as usize).min(source - 2);
    (i0, pos - i0 as f64)
}

/// Linear interpolation that is exact at both ends and for equal endpoints.
#[inline]
fn lerp(a: f64, b: f64, t: f64) -> f64 {
    if t < 0.5 {
        a + t * (b - a)
    } else {
        b - (1.0 - t) * (b - a)
    }
}

fn nearest(coarse: &Grid2D, target_rows: usize, target_cols: usize) -> Result<Grid2D> {
    let (rows, cols) = coarse.dims();
    let pick = |i: usize, target: usize, source: usize| -> usize {
        if target <= 1 || source <= 1 {
            return 0;
        }
        let pos = i as f64 * (source - 1) as f64 / (target - 1) as f64;
        (pos.round() as usize).min(source - 1)
    };
    Grid2D::from_fn(target_rows, target_cols, coarse.pixel_spacing(), |i, j| {
        coarse.get(pick(i, target_rows, rows), pick(j, target_cols, cols))
    })
}
