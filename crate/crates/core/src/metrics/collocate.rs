use std::collections::BTreeMap;
use std::io::Write;

use chrono::{DateTime, SecondsFormat, Utc};
use log::{debug, warn};
use serde::{Deserialize, Serialize};

use super::{wind_at_10m, wind_at_height, EvalRecord, Source};
use crate::error::{Error, Result};
use crate::scene::{channel, haversine_km, Scene};

#[derive(Debug, Clone, PartialEq)]
pub struct BuoyRecord {
    pub station: String,
    pub time: DateTime<Utc>,
    pub lat: f64,
    pub lon: f64,
    pub height_m: f64,
    pub wspd: f64,
    pub gust: f64,
}

#[derive(Serialize, Deserialize)]
struct BuoyRow {
    station: String,
    time: String,
    lat: f64,
    lon: f64,
    height_m: f64,
    wspd: f64,
    gust: f64,
}

/// CSV with header `station,time,lat,lon,height_m,wspd,gust`, RFC 3339 times.
pub fn write_buoys(records: &[BuoyRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(BuoyRow {
            station: r.station.clone(),
            time: r.time.to_rfc3339_opts(SecondsFormat::Secs, true),
            lat: r.lat,
            lon: r.lon,
            height_m: r.height_m,
            wspd: r.wspd,
            gust: r.gust,
        })?;
    }
    let mut out = w
        .into_inner()
        .map_err(|e| Error::Data(format!("buoy csv: {e}")))?;
    out.flush().ok();
    Ok(out)
}

pub fn read_buoys(bytes: &[u8]) -> Result<Vec<BuoyRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize::<BuoyRow>()
        .map(|row| {
            let row = row?;
            let time = DateTime::parse_from_rfc3339(&row.time)
                .map_err(|e| {
                    Error::Data(format!(
                        "buoy {}: bad time `{}`: {e}",
                        row.station, row.time
                    ))
                })?
                .with_timezone(&Utc);
            if !(row.height_m > 0.0) {
                return Err(Error::Data(format!(
                    "buoy {}: height {} is not > 0",
                    row.station, row.height_m
                )));
            }
            Ok(BuoyRecord {
                station: row.station,
                time,
                lat: row.lat,
                lon: row.lon,
                height_m: row.height_m,
                wspd: row.wspd,
                gust: row.gust,
            })
        })
        .collect()
}

/// Which side is moved to the other's height before comparison.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HeightConvention {
    /// SAR 10 m winds are converted to the anemometer height.
    #[default]
    SarToBuoyHeight,
    /// Buoy winds are converted to 10 m.
    BuoyTo10m,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollocationConfig {
    pub max_dt_minutes: f64,
    pub max_dist_km: f64,
    pub convention: HeightConvention,
}

impl Default for CollocationConfig {
    fn default() -> Self {
        CollocationConfig {
            max_dt_minutes: 10.0,
            max_dist_km: 1.0,
            convention: HeightConvention::SarToBuoyHeight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SkipReason {
    NoSampleInWindow { nearest_dt_minutes: Option<f64> },
    TooFar { distance_km: f64 },
    FillPixel { channel: String },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skip {
    pub scene_id: String,
    pub station: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Collocation {
    pub scene_id: String,
    pub station: String,
    pub dt_seconds: i64,
    pub row: usize,
    pub col: usize,
    pub distance_km: f64,
    pub height_m: f64,
    pub buoy_wspd: f64,
    pub rain_class: u8,
    /// 10 m SAR-side winds per column; NaN where the pixel is fill.
    pub values: BTreeMap<String, f64>,
}

impl Collocation {
    /// Evaluation record for one column, `None` when that column is fill.
    pub fn record(&self, column: &str, convention: HeightConvention) -> Result<Option<EvalRecord>> {
        let Some(&sar) = self.values.get(column) else {
            return Err(Error::Config(format!(
                "collocation has no `{column}` column"
            )));
        };
        if sar.is_nan() {
            return Ok(None);
        }
        let (reference, predicted) = match convention {
            HeightConvention::SarToBuoyHeight => {
                (self.buoy_wspd, wind_at_height(sar, self.height_m)?)
            }
            HeightConvention::BuoyTo10m => (wind_at_10m(self.buoy_wspd, self.height_m)?, sar),
        };
        Ok(Some(EvalRecord::new(
            reference,
            predicted,
            self.rain_class,
            Source::Buoy,
        )))
    }
}

/// Matches every station to the scene: stations whose nearest pixel center
/// lies within `max_dist` take their record nearest in time within `max_dt`.
/// Stations clearly off the scene are dropped silently; other misses are
/// returned as [`Skip`]s.
pub fn collocate_scene(
    scene: &Scene,
    stations: &BTreeMap<String, Vec<BuoyRecord>>,
    columns: &[&str],
    cfg: &CollocationConfig,
) -> Result<(Vec<Collocation>, Vec<Skip>)> {
    let (rows, cols) = scene
        .dims()
        .ok_or_else(|| Error::Data(format!("scene {} has no channels", scene.id)))?;
    let frame = scene.geo_frame();
    let rain = scene.channel(channel::RAIN_CLASS)?;
    let grids = columns
        .iter()
        .map(|c| scene.channel(c))
        .collect::<Result<Vec<_>>>()?;
    let margin = cfg.max_dist_km * 1000.0 / frame.pixel_spacing + 2.0;
    let max_dt = cfg.max_dt_minutes * 60.0;

    let mut matches = Vec::new();
    let mut skips = Vec::new();
    for (station, records) in stations {
        let Some(first) = records.first() else {
            continue;
        };
        let (r, c) = frame.latlon_to_pixel(first.lat, first.lon);
        if r < -margin
            || c < -margin
            || r > rows as f64 - 1.0 + margin
            || c > cols as f64 - 1.0 + margin
        {
            continue;
        }
        let skip = |reason| Skip {
            scene_id: scene.id.clone(),
            station: station.clone(),
            reason,
        };

        // stations are fixed, so position is checked before time
        let (r, c) = frame.latlon_to_pixel(first.lat, first.lon);
        let (pr, pc, dist) = nearest_pixel(&frame, rows, cols, r, c, first.lat, first.lon);
        if dist > cfg.max_dist_km {
            debug!(
                "scene {}: station {station} is {dist:.2} km from the nearest pixel",
                scene.id
            );
            skips.push(skip(SkipReason::TooFar { distance_km: dist }));
            continue;
        }

        let nearest = records
            .iter()
            .map(|b| {
                (
                    b,
                    (b.time - scene.acquisition_time).num_milliseconds() as f64 / 1000.0,
                )
            })
            .min_by(|a, b| {
                a.1.abs()
                    .total_cmp(&b.1.abs())
                    .then(a.0.time.cmp(&b.0.time))
            });
        let Some((rec, dt)) = nearest.filter(|(_, dt)| dt.abs() <= max_dt) else {
            let reason = SkipReason::NoSampleInWindow {
                nearest_dt_minutes: nearest.map(|(_, dt)| dt / 60.0),
            };
            warn!("scene {}: station {station} skipped: {reason:?}", scene.id);
            skips.push(skip(reason));
            continue;
        };

        let class = rain.get(pr, pc);
        if rain.is_fill(class) {
            warn!(
                "scene {}: station {station} falls on a fill rain-class pixel",
                scene.id
            );
            skips.push(skip(SkipReason::FillPixel {
                channel: channel::RAIN_CLASS.to_string(),
            }));
            continue;
        }
        let values = columns
            .iter()
            .zip(&grids)
            .map(|(name, g)| {
                let v = g.get(pr, pc);
                (name.to_string(), if g.is_fill(v) { f64::NAN } else { v })
            })
            .collect();
        matches.push(Collocation {
            scene_id: scene.id.clone(),
            station: station.clone(),
            dt_seconds: dt.round() as i64,
            row: pr,
            col: pc,
            distance_km: dist,
            height_m: rec.height_m,
            buoy_wspd: rec.wspd,
            rain_class: class as u8,
            values,
        });
    }
    Ok((matches, skips))
}

/// Records grouped by station and sorted by time.
pub fn group_by_station(buoys: &[BuoyRecord]) -> BTreeMap<String, Vec<BuoyRecord>> {
    let mut m: BTreeMap<String, Vec<BuoyRecord>> = BTreeMap::new();
    for b in buoys {
        m.entry(b.station.clone()).or_default().push(b.clone());
    }
    for v in m.values_mut() {
        v.sort_by_key(|b| b.time);
    }
    m
}

/// Nearest pixel center by great-circle distance, searched around the
/// rounded (and clamped) tangent-plane position.
fn nearest_pixel(
    frame: &crate::scene::GeoFrame,
    rows: usize,
    cols: usize,
    r: f64,
    c: f64,
    lat: f64,
    lon: f64,
) -> (usize, usize, f64) {
    let clamp = |x: f64, n: usize| x.round().clamp(0.0, (n - 1) as f64) as usize;
    let (r0, c0) = (clamp(r, rows), clamp(c, cols));
    let mut best = (r0, c0, f64::INFINITY);
    for pr in r0.saturating_sub(1)..=(r0 + 1).min(rows - 1) {
        for pc in c0.saturating_sub(1)..=(c0 + 1).min(cols - 1) {
            let (plat, plon) = frame.pixel_to_latlon(pr as f64, pc as f64);
            let d = haversine_km(lat, lon, plat, plon);
            if d < best.2 {
                best = (pr, pc, d);
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use chrono::{Duration, TimeZone};

    use super::*;
    use crate::scene::Grid2D;

    fn scene() -> Scene {
        let t = Utc.with_ymd_and_hms(2026, 3, 1, 6, 0, 0).unwrap();
        let mut s = Scene::new("S", t, 30.0, -80.0, 15.0);
        s.insert(
            channel::RAIN_CLASS,
            Grid2D::filled(50, 60, 100.0, 0.0).unwrap(),
        )
        .unwrap();
        s.insert(
            channel::WSPD_GMF,
            Grid2D::from_fn(50, 60, 100.0, |r, c| (r * 60 + c) as f64 / 100.0).unwrap(),
        )
        .unwrap();
        s
    }

    fn buoy(s: &Scene, row: f64, col: f64, minutes: i64) -> BuoyRecord {
        let (lat, lon) = s.geo_frame().pixel_to_latlon(row, col);
        BuoyRecord {
            station: "B1".into(),
            time: s.acquisition_time + Duration::minutes(minutes),
            lat,
            lon,
            height_m: 10.0,
            wspd: 5.0,
            gust: 6.0,
        }
    }

    #[test]
    fn exact_pixel_match() {
        let s = scene();
        let st = group_by_station(&[buoy(&s, 10.0, 20.0, 0)]);
        let (m, skips) =
            collocate_scene(&s, &st, &[channel::WSPD_GMF], &CollocationConfig::default()).unwrap();
        assert!(skips.is_empty());
        assert_eq!((m[0].row, m[0].col, m[0].dt_seconds), (10, 20, 0));
        assert!(m[0].distance_km < 1e-6);
        assert_eq!(m[0].values[channel::WSPD_GMF], 6.2);
    }

    #[test]
    fn time_window_is_inclusive() {
        let s = scene();
        let cfg = CollocationConfig::default();
        let st = group_by_station(&[buoy(&s, 10.0, 20.0, 11)]);
        let (m, skips) = collocate_scene(&s, &st, &[channel::WSPD_GMF], &cfg).unwrap();
        assert!(m.is_empty());
        assert!(matches!(
            skips[0].reason,
            SkipReason::NoSampleInWindow { .. }
        ));
        let st = group_by_station(&[buoy(&s, 10.0, 20.0, 10), buoy(&s, 10.0, 20.0, -4)]);
        let (m, _) = collocate_scene(&s, &st, &[channel::WSPD_GMF], &cfg).unwrap();
        assert_eq!(m[0].dt_seconds, -240);
    }

    #[test]
    fn distance_limit() {
        let s = scene();
        let st = group_by_station(&[buoy(&s, 10.0, 70.0, 0)]);
        let (m, skips) =
            collocate_scene(&s, &st, &[channel::WSPD_GMF], &CollocationConfig::default()).unwrap();
        assert!(m.is_empty());
        assert!(matches!(skips[0].reason, SkipReason::TooFar { .. }));
        let st = group_by_station(&[buoy(&s, 10.0, 400.0, 0)]);
        let (m, skips) =
            collocate_scene(&s, &st, &[channel::WSPD_GMF], &CollocationConfig::default()).unwrap();
        assert!(m.is_empty() && skips.is_empty());
    }

    #[test]
    fn csv_round_trip() {
        let s = scene();
        let b = vec![buoy(&s, 1.0, 2.0, 0), buoy(&s, 3.0, 4.0, 10)];
        let bytes = write_buoys(&b).unwrap();
        assert!(bytes.starts_with(b"station,time,lat,lon,height_m,wspd,gust\n"));
        assert_eq!(read_buoys(&bytes).unwrap(), b);
    }

    #[test]
    fn conventions() {
        let c = Collocation {
            scene_id: "S".into(),
            station: "B".into(),
            dt_seconds: 0,
            row: 0,
            col: 0,
            distance_km: 0.0,
            height_m: 4.1,
            buoy_wspd: 9.0,
            rain_class: 2,
            values: BTreeMap::from([("g".to_string(), 10.0), ("f".to_string(), f64::NAN)]),
        };
        let a = c
            .record("g", HeightConvention::SarToBuoyHeight)
            .unwrap()
            .unwrap();
        assert!((a.predicted - 10.0 * 0.41f64.powf(0.11)).abs() < 1e-12 && a.reference == 9.0);
        let b = c.record("g", HeightConvention::BuoyTo10m).unwrap().unwrap();
        assert!(b.predicted == 10.0 && (b.reference - 9.0 / 0.41f64.powf(0.11)).abs() < 1e-12);
        assert_eq!(c.record("f", HeightConvention::BuoyTo10m).unwrap(), None);
    }
}
