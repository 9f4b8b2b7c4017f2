//! Synthetic scenes with known truth.
//!
//! Per scene: a mean wind drawn from a Weibull distribution (clipped), a
//! smooth wind and direction field, Poisson-distributed radial rain cells
//! whose count is weighted toward moderate winds, and a rendering through
//! CMOD5.N with the rain factor `g(rate) = 1 + gain * min(rate, cap)` and
//! unit-mean gamma speckle. The cross-pol channel is
//! `10^((-35 + 0.6 v) / 10)` times independent speckle.

mod buoys;
mod field;
mod rain;

use chrono::{DateTime, Duration, Utc};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gmf::{invert_scene, Harmonics, IncidenceTerms, InversionConfig};
use crate::rng::{derive_seed, seeded};
use crate::scene::{
    channel, relative_direction, wrap_degrees, GeoFrame, Grid2D, Scene, WORKING_SPACING_M,
};

pub use buoys::{gen_buoys, gen_stations, sort_buoys, BuoyParams, Station};
pub use field::{
    coarse_len, gaussian_kernel, gen_wind_field, unit_field, WindFieldParams, COARSE_FACTOR,
};
pub use rain::{draw_cells, gen_rain, RainCell, RainParams, CELL_CUTOFF_SIGMAS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub scenes: usize,
    pub rows: usize,
    pub cols: usize,
    pub wind_scale: f64,
    pub wind_shape: f64,
    pub wind_range: (f64, f64),
    pub wind_std: f64,
    pub correlation_km: f64,
    pub direction_std: f64,
    pub rain: RainParams,
    pub rain_gain: f64,
    pub rain_gain_cap: f64,
    /// Variance of the unit-mean speckle; 0 disables it.
    pub speckle_variance: f64,
    /// Incidence at the first and last column, degrees.
    pub incidence_range: (f64, f64),
    pub lat_range: (f64, f64),
    pub lon_range: (f64, f64),
    pub headings: Vec<f64>,
    pub start_time: DateTime<Utc>,
    pub scene_interval_hours: i64,
    pub buoys: BuoyParams,
    /// Scenes re-rendered without rain to measure the speckle floor.
    pub control_scenes: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            scenes: 200,
            rows: 1540,
            cols: 1540,
            wind_scale: 8.0,
            wind_shape: 2.2,
            wind_range: (2.0, 25.0),
            wind_std: 1.5,
            correlation_km: 15.0,
            direction_std: 15.0,
            rain: RainParams::default(),
            rain_gain: 0.15,
            rain_gain_cap: 10.0,
            speckle_variance: 0.1,
            incidence_range: (30.0, 45.0),
            lat_range: (25.0, 27.0),
            lon_range: (-80.0, -78.0),
            headings: vec![350.0, 190.0],
            start_time: DateTime::<Utc>::from_timestamp(1_767_225_600, 0).expect("valid start"),
            scene_interval_hours: 6,
            buoys: BuoyParams::default(),
            control_scenes: 8,
        }
    }
}

impl SynthParams {
    /// A small corpus for quick runs.
    pub fn smoke() -> Self {
        SynthParams {
            scenes: 24,
            rows: 520,
            cols: 520,
            control_scenes: 3,
            // dense rain so small scenes still yield rain tiles in most scenes
            rain: RainParams {
                cells_per_10k_km2: 6.0,
                ..RainParams::default()
            },
            ..SynthParams::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scenes == 0 || self.rows < 2 || self.cols < 2 {
            return Err(Error::Config(
                "synthesis needs at least one scene of 2x2 pixels".into(),
            ));
        }
        if !self.rows.is_multiple_of(crate::gmf::GMF_BLOCK)
            || !self.cols.is_multiple_of(crate::gmf::GMF_BLOCK)
        {
            return Err(Error::Config(format!(
                "scene dims must be multiples of {} for the GMF grid",
                crate::gmf::GMF_BLOCK
            )));
        }
        if !(self.wind_scale > 0.0
            && self.wind_shape > 0.0
            && self.wind_range.0 <= self.wind_range.1)
        {
            return Err(Error::Config("invalid wind distribution".into()));
        }
        if !(self.rain_gain >= 0.0 && self.rain_gain_cap >= 0.0 && self.speckle_variance >= 0.0) {
            return Err(Error::Config(
                "rain gain and speckle variance must be >= 0".into(),
            ));
        }
        let (i0, i1) = self.incidence_range;
        if !(15.0..=50.0).contains(&i0) || !(15.0..=50.0).contains(&i1) {
            return Err(Error::Config("incidence range must lie in [15, 50]".into()));
        }
        if self.headings.is_empty() {
            return Err(Error::Config(
                "at least one platform heading is required".into(),
            ));
        }
        self.rain.validate()
    }

    /// `g(rate)`; 1 when `rain` is off.
    pub fn rain_factor(&self, rate: f64) -> f64 {
        1.0 + self.rain_gain * rate.min(self.rain_gain_cap)
    }

    /// Mean of the rain wind weight over the clipped Weibull scene-wind law,
    /// by midpoint quadrature in probability.
    pub fn mean_wind_weight(&self) -> f64 {
        const N: usize = 20_000;
        (0..N)
            .map(|i| {
                let u = (i as f64 + 0.5) / N as f64;
                self.rain
                    .wind_weight(self.clip_wind(self.weibull_quantile(u)))
            })
            .sum::<f64>()
            / N as f64
    }

    fn weibull_quantile(&self, u: f64) -> f64 {
        self.wind_scale * (-(1.0 - u).ln()).powf(1.0 / self.wind_shape)
    }

    fn clip_wind(&self, v: f64) -> f64 {
        v.clamp(self.wind_range.0, self.wind_range.1)
    }
}

/// Everything drawn for one scene, written next to it as `truth.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneTruth {
    pub id: String,
    pub index: usize,
    pub seed: u64,
    pub field_seed: u64,
    pub speckle_seed: u64,
    pub time: DateTime<Utc>,
    pub origin_lat: f64,
    pub origin_lon: f64,
    pub heading: f64,
    pub wind: WindFieldParams,
    pub expected_cells: f64,
    pub cells: Vec<RainCell>,
    pub rain_gain: f64,
    pub rain_gain_cap: f64,
    pub speckle_variance: f64,
}

pub fn scene_id(index: usize) -> String {
    format!("S{index:04}")
}

pub fn draw_truth(
    p: &SynthParams,
    index: usize,
    corpus_seed: u64,
    mean_weight: f64,
) -> Result<SceneTruth> {
    let seed = derive_seed(corpus_seed, index as u64);
    let mut rng = seeded(seed);
    let mean = p.clip_wind(p.weibull_quantile(rng.random_range(0.0..1.0)));
    let direction = rng.random_range(0.0..360.0);
    let heading = p.headings[rng.random_range(0..p.headings.len())];
    let center_lat = rng.random_range(p.lat_range.0..p.lat_range.1);
    let center_lon = rng.random_range(p.lon_range.0..p.lon_range.1);
    let centered = GeoFrame {
        origin_lat: center_lat,
        origin_lon: center_lon,
        heading_deg: heading,
        pixel_spacing: WORKING_SPACING_M,
    };
    let (origin_lat, origin_lon) =
        centered.pixel_to_latlon(-((p.rows - 1) as f64) / 2.0, -((p.cols - 1) as f64) / 2.0);
    let area_km2 = p.rows as f64 * p.cols as f64 * (WORKING_SPACING_M / 1000.0).powi(2);
    let per_scene = p.rain.cells_per_10k_km2 * area_km2 / 1.0e4;
    let expected_cells = if mean_weight > 0.0 {
        per_scene * p.rain.wind_weight(mean) / mean_weight
    } else {
        per_scene
    };
    let cells = draw_cells(&mut rng, &p.rain, expected_cells, p.rows, p.cols)?;
    Ok(SceneTruth {
        id: scene_id(index),
        index,
        seed,
        field_seed: derive_seed(seed, 10),
        speckle_seed: derive_seed(seed, 11),
        time: p.start_time + Duration::hours(p.scene_interval_hours * index as i64),
        origin_lat,
        origin_lon,
        heading,
        wind: WindFieldParams {
            mean,
            std: p.wind_std,
            correlation_km: p.correlation_km,
            direction,
            direction_std: p.direction_std,
        },
        expected_cells,
        cells,
        rain_gain: p.rain_gain,
        rain_gain_cap: p.rain_gain_cap,
        speckle_variance: p.speckle_variance,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RenderOptions {
    pub rain: bool,
    pub speckle: bool,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            rain: true,
            speckle: true,
        }
    }
}

/// True geophysical fields of one scene.
#[derive(Debug, Clone)]
pub struct Fields {
    pub speed: Grid2D,
    pub direction: Grid2D,
    pub rain_rate: Grid2D,
    pub rain_class: Grid2D,
}

pub fn gen_fields(p: &SynthParams, truth: &SceneTruth) -> Result<Fields> {
    let (speed, direction) = gen_wind_field(&truth.wind, p.rows, p.cols, truth.field_seed)?;
    let (rain_rate, rain_class) = gen_rain(&truth.cells, p.rows, p.cols)?;
    Ok(Fields {
        speed,
        direction,
        rain_rate,
        rain_class,
    })
}

/// Cross-pol power `10^((-35 + 0.6 v) / 10)`.
fn vh_power(v: f64) -> f64 {
    ((-35.0 + 0.6 * v) * std::f64::consts::LN_10 / 10.0).exp()
}

fn quantized(mut g: Grid2D) -> Grid2D {
    g.quantize_f32();
    g
}

/// Renders every channel but the GMF wind. Stored values are rounded
/// through `f32` so the in-memory scene equals what is read back from disk.
pub fn render_channels(
    p: &SynthParams,
    truth: &SceneTruth,
    fields: &Fields,
    opts: RenderOptions,
) -> Result<Scene> {
    let (rows, cols) = (p.rows, p.cols);
    let (i0, i1) = p.incidence_range;
    let incidence = quantized(Grid2D::from_fn(rows, cols, WORKING_SPACING_M, |_, c| {
        i0 + (i1 - i0) * c as f64 / (cols - 1) as f64
    })?);
    let terms: Vec<IncidenceTerms> = (0..cols)
        .map(|c| IncidenceTerms::new(incidence.get(0, c)))
        .collect();
    let direction = fields.direction.map(|d| wrap_degrees(d as f32 as f64));
    let speed = quantized(fields.speed.clone());

    let var = if opts.speckle {
        truth.speckle_variance
    } else {
        0.0
    };
    let gamma = if var > 0.0 {
        Some(Gamma::new(1.0 / var, var).map_err(|e| Error::Config(format!("speckle: {e}")))?)
    } else {
        None
    };
    let mut rng = seeded(truth.speckle_seed);
    let mut vv = Vec::with_capacity(rows * cols);
    let mut vh = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for (c, term) in terms.iter().enumerate() {
            let v = speed.get(r, c);
            let phi = relative_direction(direction.get(r, c), truth.heading);
            let g = if opts.rain {
                p.rain_factor(fields.rain_rate.get(r, c))
            } else {
                1.0
            };
            let (s1, s2) = match &gamma {
                Some(d) => (d.sample(&mut rng), d.sample(&mut rng)),
                None => (1.0, 1.0),
            };
            vv.push((term.sigma0(v, Harmonics::new(phi)) * g * s1) as f32 as f64);
            vh.push((vh_power(v) * s2) as f32 as f64);
        }
    }

    let mut scene = Scene::new(
        truth.id.clone(),
        truth.time,
        truth.origin_lat,
        truth.origin_lon,
        truth.heading,
    );
    scene.insert(
        channel::SIGMA0_VV,
        Grid2D::new(rows, cols, WORKING_SPACING_M, vv)?,
    )?;
    scene.insert(
        channel::SIGMA0_VH,
        Grid2D::new(rows, cols, WORKING_SPACING_M, vh)?,
    )?;
    scene.insert(channel::INCIDENCE, incidence)?;
    scene.insert(channel::WDIR_PRIOR, direction)?;
    scene.insert(channel::WSPD_MODEL, speed)?;
    let class = if opts.rain {
        fields.rain_class.clone()
    } else {
        Grid2D::filled(rows, cols, WORKING_SPACING_M, 0.0)?
    };
    scene.insert(channel::RAIN_CLASS, class)?;
    Ok(scene)
}

/// [`render_channels`] plus the GMF wind inverted from the rendered backscatter.
pub fn render_scene(
    p: &SynthParams,
    truth: &SceneTruth,
    fields: &Fields,
    opts: RenderOptions,
    inversion: &InversionConfig,
) -> Result<Scene> {
    let mut scene = render_channels(p, truth, fields, opts)?;
    let gmf = quantized(invert_scene(&scene, inversion)?);
    scene.insert(channel::WSPD_GMF, gmf)?;
    Ok(scene)
}

/// Pixel RMSE of the GMF wind against the true wind.
pub fn gmf_rmse(scene: &Scene) -> Result<f64> {
    let model = scene.channel(channel::WSPD_MODEL)?;
    let gmf = scene.channel(channel::WSPD_GMF)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for (a, b) in model.values().iter().zip(gmf.values()) {
        if !a.is_nan() && !b.is_nan() {
            sum += (a - b).powi(2);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Degenerate(format!(
            "scene {} has no valid wind pixels",
            scene.id
        )));
    }
    Ok((sum / n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeckleFloor {
    pub scenes: Vec<String>,
    pub per_scene_rmse: Vec<f64>,
    /// Pooled over all control pixels, m/s.
    pub rmse: f64,
}

/// GMF wind RMSE of rain-free re-renders of the first `p.control_scenes` scenes.
pub fn measure_speckle_floor(
    p: &SynthParams,
    corpus_seed: u64,
    inversion: &InversionConfig,
) -> Result<SpeckleFloor> {
    let n = p.control_scenes.min(p.scenes).max(1);
    let w = p.mean_wind_weight();
    let mut scenes = Vec::new();
    let mut per_scene = Vec::new();
    for i in 0..n {
        let truth = draw_truth(p, i, corpus_seed, w)?;
        let fields = gen_fields(p, &truth)?;
        let opts = RenderOptions {
            rain: false,
            speckle: true,
        };
        let scene = render_scene(p, &truth, &fields, opts, inversion)?;
        scenes.push(truth.id);
        per_scene.push(gmf_rmse(&scene)?);
    }
    // every control scene has the same pixel count
    let rmse = (per_scene.iter().map(|r| r * r).sum::<f64>() / per_scene.len() as f64).sqrt();
    Ok(SpeckleFloor {
        scenes,
        per_scene_rmse: per_scene,
        rmse,
    })
}
