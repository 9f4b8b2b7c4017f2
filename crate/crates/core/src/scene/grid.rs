use crate::error::{Error, Result};

/// Pixel spacing of the working grid, in meters.
pub const WORKING_SPACING_M: f64 = 100.0;

/// A row-major raster of reals with a fill marker for invalid pixels.
///
/// NaN is always treated as fill; `fill_value` may name an additional
/// sentinel. Operations emit NaN for pixels they cannot compute.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    rows: usize,
    cols: usize,
    pixel_spacing: f64,
    values: Vec<f64>,
    fill_value: f64,
}

impl Grid2D {
    pub fn new(rows: usize, cols: usize, pixel_spacing: f64, values: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension(format!(
                "grid must be non-empty, got {rows}x{cols}"
            )));
        }
        if values.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} grid needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if !(pixel_spacing > 0.0) {
            return Err(Error::Domain(format!(
                "pixel spacing must be positive, got {pixel_spacing}"
            )));
        }
        Ok(Grid2D {
            rows,
            cols,
            pixel_spacing,
            values,
            fill_value: f64::NAN,
        })
    }

    /// Builds a grid from row-major nested rows (test and fixture helper).
    pub fn from_rows(rows: &[Vec<f64>], pixel_spacing: f64) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Grid2D::new(rows.len(), cols, pixel_spacing, rows.concat())
    }

    pub fn filled(rows: usize, cols: usize, pixel_spacing: f64, value: f64) -> Result<Self> {
        Grid2D::new(rows, cols, pixel_spacing, vec![value; rows * cols])
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        pixel_spacing: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                values.push(f(r, c));
            }
        }
        Grid2D::new(rows, cols, pixel_spacing, values)
    }

    pub fn with_fill_value(mut self, fill_value: f64) -> Self {
        self.fill_value = fill_value;
        self
    }

    pub fn with_spacing(mut self, pixel_spacing: f64) -> Self {
        assert!(pixel_spacing > 0.0);
        self.pixel_spacing = pixel_spacing;
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn fill_value(&self) -> f64 {
        self.fill_value
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.values[r * self.cols + c] = v;
    }

    #[inline]
    pub fn is_fill(&self, v: f64) -> bool {
        v.is_nan() || v == self.fill_value
    }

    pub fn is_valid_at(&self, r: usize, c: usize) -> bool {
        !self.is_fill(self.get(r, c))
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|v| !self.is_fill(**v)).count()
    }

    /// Applies `f` to valid pixels; fill stays fill.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Grid2D {
        let values = self
            .values
            .iter()
            .map(|&v| if self.is_fill(v) { f64::NAN } else { f(v) })
            .collect();
        self.with_values(values)
    }

    /// Combines two same-shape grids pixelwise; fill in either input gives fill.
    pub fn zip_map(&self, other: &Grid2D, mut f: impl FnMut(f64, f64) -> f64) -> Result<Grid2D> {
        self.check_same_dims(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                if self.is_fill(a) || other.is_fill(b) {
                    f64::NAN
                } else {
                    f(a, b)
                }
            })
            .collect();
        Ok(self.with_values(values))
    }

    pub fn check_same_dims(&self, other: &Grid2D) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::Dimension(format!(
                "grid shapes differ: {}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        Ok(())
    }

    pub fn crop(&self, row0: usize, col0: usize, rows: usize, cols: usize) -> Result<Grid2D> {
        if row0 + rows > self.rows || col0 + cols > self.cols {
            return Err(Error::Dimension(format!(
                "crop {rows}x{cols} at ({row0},{col0}) exceeds {}x{}",
                self.rows, self.cols
            )));
        }
        let mut values = Vec::with_capacity(rows * cols);
        for r in row0..row0 + rows {
            let start = r * self.cols + col0;
            values.extend_from_slice(&self.values[start..start + cols]);
        }
        Ok(Grid2D {
            rows,
            cols,
            pixel_spacing: self.pixel_spacing,
            values,
            fill_value: self.fill_value,
        })
    }

    /// Rounds every value through `f32`, the on-disk precision.
    pub fn quantize_f32(&mut self) {
        for v in &mut self.values {
            *v = *v as f32 as f64;
        }
    }

    /// Mean over valid pixels, `None` when every pixel is fill.
    pub fn valid_mean(&self) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .filter(|v| !self.is_fill(**v))
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    fn with_values(&self, values: Vec<f64>) -> Grid2D {
        debug_assert_eq!(values.len(), self.values.len());
        Grid2D {
            rows: self.rows,
            cols: self.cols,
            pixel_spacing: self.pixel_spacing,
            values,
            fill_value: f64::NAN,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        assert!(Grid2D::new(0, 3, 100.0, vec![]).is_err());
        assert!(Grid2D::new(2, 2, 100.0, vec![1.0; 3]).is_err());
        assert!(Grid2D::new(1, 1, 0.0, vec![1.0]).is_err());
    }

    #[test]
    fn custom_fill_value_is_respected() {
        let g = Grid2D::new(1, 3, 100.0, vec![1.0, -999.0, f64::NAN])
            .unwrap()
            .with_fill_value(-999.0);
        assert_eq!(g.valid_count(), 1);
        assert_eq!(g.valid_mean(), Some(1.0));
    }

    #[test]
    fn crop_takes_the_window() {
        let g = Grid2D::from_fn(4, 5, 100.0, |r, c| (r * 10 + c) as f64).unwrap();
        let w = g.crop(1, 2, 2, 3).unwrap();
        assert_eq!(w.values(), &[12.0, 13.0, 14.0, 22.0, 23.0, 24.0]);
        assert!(g.crop(3, 0, 2, 1).is_err());
    }
}
