//! Scores, rain-bin stratification, the anemometer height law, buoy
//! collocation and report tables.

mod collocate;
mod report;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use collocate::{
    collocate_scene, group_by_station, read_buoys, write_buoys, BuoyRecord, Collocation,
    CollocationConfig, HeightConvention, Skip, SkipReason,
};
pub use report::{build_report, column_label, BinSummary, ColumnReport, Report, Summary};

/// Power-law exponent of the height conversion.
pub const HEIGHT_EXPONENT: f64 = 0.11;

/// Wind at height `h` meters from the 10 m wind: `w10 (h/10)^0.11`.
pub fn wind_at_height(w10: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("height {h} m is not > 0")));
    }
    if !(w10 >= 0.0) {
        return Err(Error::Domain(format!("wind {w10} m/s is not >= 0")));
    }
    Ok(w10 * (h / 10.0).powf(HEIGHT_EXPONENT))
}

/// Inverse of [`wind_at_height`]: the 10 m wind from a wind measured at `h`.
pub fn wind_at_10m(wh: f64, h: f64) -> Result<f64> {
    Ok(wh / wind_at_height(1.0, h)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Model,
    Buoy,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub reference: f64,
    pub predicted: f64,
    /// Rain class 0..=3 at the matched pixel.
    pub rain_class: u8,
    /// Rain rate when known; takes precedence over the class for binning.
    pub rain_rate: Option<f64>,
    pub source: Source,
}

impl EvalRecord {
    pub fn new(reference: f64, predicted: f64, rain_class: u8, source: Source) -> Self {
        EvalRecord {
            reference,
            predicted,
            rain_class,
            rain_rate: None,
            source,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reference >= 0.0 && self.predicted >= 0.0) {
            return Err(Error::Data(format!(
                "winds must be >= 0, got {} / {}",
                self.reference, self.predicted
            )));
        }
        if self.rain_class > 3 || self.rain_rate.is_some_and(|r| !(r >= 0.0)) {
            return Err(Error::Data("invalid rain bin".into()));
        }
        Ok(())
    }

    pub fn bin(&self, binning: Binning) -> usize {
        match self.rain_rate {
            Some(rate) => binning.bin_of_rate(rate),
            None => binning.bin_of_class(self.rain_class),
        }
    }
}

/// Rain-bin stratification schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binning {
    /// `[0,1)`, `[1,3)`, `[3,10)`, `>=10` mm/h.
    Table2,
    /// `<1`, `[1,3]`, `>3` mm/h.
    Table3,
}

impl Binning {
    pub fn labels(&self) -> &'static [&'static str] {
        match self {
            Binning::Table2 => &["[0,1) mm/h", "[1,3) mm/h", "[3,10) mm/h", ">=10 mm/h"],
            Binning::Table3 => &["< 1 mm/h", "[1,3] mm/h", "> 3 mm/h"],
        }
    }

    pub fn len(&self) -> usize {
        self.labels().len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bin_of_rate(&self, rate: f64) -> usize {
        match self {
            Binning::Table2 => crate::scene::rain_class_of_rate(rate) as usize,
            Binning::Table3 if rate < 1.0 => 0,
            Binning::Table3 if rate <= 3.0 => 1,
            Binning::Table3 => 2,
        }
    }

    /// Classes 2 and 3 (>= 3 mm/h) share the last Table 3 bin.
    pub fn bin_of_class(&self, class: u8) -> usize {
        match self {
            Binning::Table2 => class.min(3) as usize,
            Binning::Table3 => class.min(2) as usize,
        }
    }
}

impl fmt::Display for Binning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Binning::Table2 => "table2",
            Binning::Table3 => "table3",
        })
    }
}

impl FromStr for Binning {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table2" => Ok(Binning::Table2),
            "table3" => Ok(Binning::Table3),
            _ => Err(Error::Config(format!(
                "unknown binning `{s}` (table2|table3)"
            ))),
        }
    }
}

/// Record groups per bin; together they partition the input.
pub fn stratify(records: &[EvalRecord], binning: Binning) -> Vec<Vec<EvalRecord>> {
    let mut groups = vec![Vec::new(); binning.len()];
    for r in records {
        groups[r.bin(binning)].push(*r);
    }
    groups
}

fn nonempty(records: &[EvalRecord]) -> Result<()> {
    if records.is_empty() {
        Err(Error::Degenerate("no records".into()))
    } else {
        Ok(())
    }
}

/// Mean of `predicted - reference`.
pub fn bias(records: &[EvalRecord]) -> Result<f64> {
    nonempty(records)?;
    Ok(records
        .iter()
        .map(|r| r.predicted - r.reference)
        .sum::<f64>()
        / records.len() as f64)
}

pub fn rmse(records: &[EvalRecord]) -> Result<f64> {
    nonempty(records)?;
    let mse = records
        .iter()
        .map(|r| (r.predicted - r.reference).powi(2))
        .sum::<f64>()
        / records.len() as f64;
    Ok(mse.sqrt())
}

/// Pearson correlation with population moments. Zero variance in either
/// series is a degenerate-input error.
pub fn pcc(records: &[EvalRecord]) -> Result<f64> {
    if records.len() < 2 {
        return Err(Error::Degenerate("PCC needs at least 2 records".into()));
    }
    let n = records.len() as f64;
    let my = records.iter().map(|r| r.reference).sum::<f64>() / n;
    let mp = records.iter().map(|r| r.predicted).sum::<f64>() / n;
    let (mut cov, mut vy, mut vp) = (0.0, 0.0, 0.0);
    for r in records {
        let (dy, dp) = (r.reference - my, r.predicted - mp);
        cov += dy * dp;
        vy += dy * dy;
        vp += dp * dp;
    }
    if vy == 0.0 || vp == 0.0 {
        return Err(Error::Degenerate(
            "PCC is undefined for a constant series".into(),
        ));
    }
    Ok(((cov / n) / ((vy / n).sqrt() * (vp / n).sqrt())).clamp(-1.0, 1.0))
}
