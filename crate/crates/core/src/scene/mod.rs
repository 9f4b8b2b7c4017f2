//! Raster scene model and resampling onto the 100 m/px working grid.

mod geo;
mod grid;
mod interp;
pub(crate) mod io;

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

pub use geo::{haversine_km, relative_direction, GeoFrame};
pub use grid::{Grid2D, WORKING_SPACING_M};
pub use interp::{
    downscale_direction, downscale_power, interpolate_ancillary, interpolate_ancillary_with,
    interpolate_direction, wrap_degrees, Fallback, Interpolated, Method,
};
pub use io::{
    read_scene, read_scene_channels, read_scene_meta, scene_files, write_scene, SceneMeta,
};

/// Channel names used by the scene container.
pub mod channel {
    /// VV backscatter, linear power.
    pub const SIGMA0_VV: &str = "sigma0_vv";
    /// VH backscatter, linear power.
    pub const SIGMA0_VH: &str = "sigma0_vh";
    /// Incidence angle, degrees.
    pub const INCIDENCE: &str = "incidence";
    /// A priori wind direction, meteorological degrees.
    pub const WDIR_PRIOR: &str = "wdir_prior";
    /// Atmospheric-model wind speed, m/s.
    pub const WSPD_MODEL: &str = "wspd_model";
    /// GMF-inverted wind speed, m/s.
    pub const WSPD_GMF: &str = "wspd_gmf";
    /// Rain class 0..=3 for <1, [1,3), [3,10), >=10 mm/h.
    pub const RAIN_CLASS: &str = "rain_class";
    /// Prefix of prediction channels written by external models, `wspd_pred_<model>_<run>`.
    pub const PREDICTION_PREFIX: &str = "wspd_pred_";

    pub const ALL: [&str; 7] = [
        SIGMA0_VV, SIGMA0_VH, INCIDENCE, WDIR_PRIOR, WSPD_MODEL, WSPD_GMF, RAIN_CLASS,
    ];
}

/// Rain-rate thresholds (mm/h) separating rain classes 0|1|2|3.
pub const RAIN_CLASS_THRESHOLDS: [f64; 3] = [1.0, 3.0, 10.0];

pub fn rain_class_of_rate(rate_mm_h: f64) -> u8 {
    RAIN_CLASS_THRESHOLDS
        .iter()
        .filter(|&&t| rate_mm_h >= t)
        .count() as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub id: String,
    pub acquisition_time: DateTime<Utc>,
    pub origin_lat: f64,
    pub origin_lon: f64,
    /// Platform heading, degrees clockwise from north.
    pub heading: f64,
    pub channels: BTreeMap<String, Grid2D>,
}

impl Scene {
    pub fn new(
        id: impl Into<String>,
        acquisition_time: DateTime<Utc>,
        origin_lat: f64,
        origin_lon: f64,
        heading: f64,
    ) -> Self {
        Scene {
            id: id.into(),
            acquisition_time,
            origin_lat,
            origin_lon,
            heading,
            channels: BTreeMap::new(),
        }
    }

    pub fn dims(&self) -> Option<(usize, usize)> {
        self.channels.values().next().map(Grid2D::dims)
    }

    pub fn insert(&mut self, name: &str, grid: Grid2D) -> Result<()> {
        if let Some(dims) = self.dims() {
            if grid.dims() != dims && !self.channels.contains_key(name) {
                return Err(Error::Dimension(format!(
                    "channel {name} is {}x{}, scene is {}x{}",
                    grid.rows(),
                    grid.cols(),
                    dims.0,
                    dims.1
                )));
            }
        }
        self.channels.insert(name.to_string(), grid);
        Ok(())
    }

    pub fn channel(&self, name: &str) -> Result<&Grid2D> {
        self.channels
            .get(name)
            .ok_or_else(|| Error::Config(format!("scene {} has no `{name}` channel", self.id)))
    }

    pub fn geo_frame(&self) -> GeoFrame {
        GeoFrame {
            origin_lat: self.origin_lat,
            origin_lon: self.origin_lon,
            heading_deg: self.heading,
            pixel_spacing: self
                .channels
                .values()
                .next()
                .map_or(WORKING_SPACING_M, Grid2D::pixel_spacing),
        }
    }

    /// Checks the scene invariants on every valid pixel.
    pub fn validate(&self) -> Result<()> {
        let Some(dims) = self.dims() else {
            return Err(Error::Data(format!("scene {} has no channels", self.id)));
        };
        for (name, grid) in &self.channels {
            if grid.dims() != dims {
                return Err(Error::Dimension(format!(
                    "channel {name} does not match scene dims"
                )));
            }
            let bad = |pred: &dyn Fn(f64) -> bool| {
                grid.values().iter().any(|&v| !grid.is_fill(v) && pred(v))
            };
            let err = match name.as_str() {
                channel::INCIDENCE if bad(&|v| !(15.0..=50.0).contains(&v)) => {
                    Some("incidence outside [15, 50]")
                }
                channel::WSPD_MODEL | channel::WSPD_GMF if bad(&|v| v < 0.0) => {
                    Some("negative wind speed")
                }
                channel::RAIN_CLASS if bad(&|v| !matches!(v, 0.0 | 1.0 | 2.0 | 3.0)) => {
                    Some("rain class outside {0,1,2,3}")
                }
                channel::SIGMA0_VV | channel::SIGMA0_VH if bad(&|v| v < 0.0) => {
                    Some("negative backscatter")
                }
                channel::WDIR_PRIOR if bad(&|v| !(0.0..360.0).contains(&v)) => {
                    Some("direction outside [0, 360)")
                }
                n if n.starts_with(channel::PREDICTION_PREFIX) && bad(&|v| v < 0.0) => {
                    Some("negative predicted wind")
                }
                _ => None,
            };
            if let Some(msg) = err {
                return Err(Error::Data(format!(
                    "scene {} channel {name}: {msg}",
                    self.id
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rain_classes_follow_thresholds() {
        assert_eq!(rain_class_of_rate(0.0), 0);
        assert_eq!(rain_class_of_rate(0.99), 0);
        assert_eq!(rain_class_of_rate(1.0), 1);
        assert_eq!(rain_class_of_rate(3.0), 2);
        assert_eq!(rain_class_of_rate(9.99), 2);
        assert_eq!(rain_class_of_rate(10.0), 3);
    }

    #[test]
    fn validate_flags_bad_channels() {
        let mut s = Scene::new("s", Utc::now(), 0.0, 0.0, 0.0);
        s.insert(
            channel::INCIDENCE,
            Grid2D::filled(2, 2, 100.0, 30.0).unwrap(),
        )
        .unwrap();
        assert!(s.validate().is_ok());
        s.insert(
            channel::RAIN_CLASS,
            Grid2D::filled(2, 2, 100.0, 4.0).unwrap(),
        )
        .unwrap();
        assert!(s.validate().is_err());
        assert!(s
            .insert(channel::WSPD_GMF, Grid2D::filled(3, 2, 100.0, 1.0).unwrap())
            .is_err());
    }
}
