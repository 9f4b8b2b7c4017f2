//! Synthetic buoy fleet sampling the true wind.

use chrono::{DateTime, Utc};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{wind_at_height, BuoyRecord};
use crate::scene::{haversine_km, GeoFrame, Grid2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BuoyParams {
    pub stations: usize,
    pub height_m: (f64, f64),
    pub cadence_minutes: i64,
    /// Records are kept within this many minutes of each scene time.
    pub window_minutes: i64,
    /// Samples averaged into one record; the gust is their maximum.
    pub subsamples: usize,
    /// Standard deviation of each subsample's additive noise, m/s.
    pub noise_std: f64,
}

impl Default for BuoyParams {
    fn default() -> Self {
        BuoyParams {
            stations: 600,
            height_m: (3.8, 4.1),
            cadence_minutes: 10,
            window_minutes: 30,
            subsamples: 5,
            noise_std: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Station {
    pub id: String,
    pub lat: f64,
    pub lon: f64,
    pub height_m: f64,
    /// Offset of the station's sampling clock within one cadence, seconds.
    pub phase_s: i64,
}

pub fn gen_stations(
    rng: &mut impl Rng,
    p: &BuoyParams,
    lat: (f64, f64),
    lon: (f64, f64),
) -> Vec<Station> {
    (0..p.stations)
        .map(|i| Station {
            id: format!("B{i:04}"),
            lat: rng.random_range(lat.0..lat.1),
            lon: rng.random_range(lon.0..lon.1),
            height_m: rng.random_range(p.height_m.0..=p.height_m.1),
            phase_s: rng.random_range(0..p.cadence_minutes * 60),
        })
        .collect()
}

/// Records of every station within 1 km of the nearest scene pixel,
/// at the station cadence within the window around `time`.
pub fn gen_buoys(
    rng: &mut impl Rng,
    stations: &[Station],
    frame: &GeoFrame,
    true_wind: &Grid2D,
    time: DateTime<Utc>,
    p: &BuoyParams,
) -> Result<Vec<BuoyRecord>> {
    if p.subsamples == 0 || p.cadence_minutes <= 0 {
        return Err(Error::Config(
            "buoys need a positive cadence and at least one subsample".into(),
        ));
    }
    let noise =
        Normal::new(0.0, p.noise_std).map_err(|e| Error::Config(format!("buoy noise: {e}")))?;
    let (rows, cols) = true_wind.dims();
    let cadence = p.cadence_minutes * 60;
    let mut out = Vec::new();
    for s in stations {
        let (r, c) = frame.latlon_to_pixel(s.lat, s.lon);
        let pr = r.round().clamp(0.0, (rows - 1) as f64) as usize;
        let pc = c.round().clamp(0.0, (cols - 1) as f64) as usize;
        let (plat, plon) = frame.pixel_to_latlon(pr as f64, pc as f64);
        if haversine_km(s.lat, s.lon, plat, plon) > 1.0 {
            continue;
        }
        let v10 = true_wind.get(pr, pc);
        if true_wind.is_fill(v10) {
            continue;
        }
        let wh = wind_at_height(v10, s.height_m)?;
        // first sample time at or after the window start on the station clock
        let start = time.timestamp() - p.window_minutes * 60;
        let mut t = start + (s.phase_s - start).rem_euclid(cadence);
        while t <= time.timestamp() + p.window_minutes * 60 {
            let samples: Vec<f64> = (0..p.subsamples)
                .map(|_| {
                    let e = if p.noise_std > 0.0 {
                        noise.sample(rng)
                    } else {
                        0.0
                    };
                    (wh + e).max(0.0)
                })
                .collect();
            out.push(BuoyRecord {
                station: s.id.clone(),
                time: DateTime::<Utc>::from_timestamp(t, 0).expect("valid timestamp"),
                lat: s.lat,
                lon: s.lon,
                height_m: s.height_m,
                wspd: samples.iter().sum::<f64>() / samples.len() as f64,
                gust: samples.iter().copied().fold(f64::MIN, f64::max),
            });
            t += cadence;
        }
    }
    Ok(out)
}

/// Buoy table order: by time, then station.
pub fn sort_buoys(records: &mut [BuoyRecord]) {
    records.sort_by(|a, b| a.time.cmp(&b.time).then_with(|| a.station.cmp(&b.station)));
}
