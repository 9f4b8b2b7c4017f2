use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bin layout: half-open bins between consecutive `edges`, plus an optional
/// overflow bin `[last edge, +inf)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bins {
    pub edges: Vec<f64>,
    pub overflow: bool,
}

impl Default for Bins {
    /// 1 m/s bins over [0, 30) plus overflow.
    fn default() -> Self {
        Bins::uniform(0.0, 30.0, 30, true).expect("default bins are valid")
    }
}

impl Bins {
    pub fn new(edges: Vec<f64>, overflow: bool) -> Result<Self> {
        if edges.len() < 2 && !(overflow && edges.len() == 1) {
            return Err(Error::Config("histogram needs at least one bin".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "bin edges must be finite and strictly increasing".into(),
            ));
        }
        Ok(Bins { edges, overflow })
    }

    pub fn uniform(lo: f64, hi: f64, n: usize, overflow: bool) -> Result<Self> {
        if n == 0 || !(hi > lo) {
            return Err(Error::Config(format!("bad uniform bins {lo}..{hi} x{n}")));
        }
        let w = (hi - lo) / n as f64;
        let edges = (0..=n)
            .map(|i| if i == n { hi } else { lo + w * i as f64 })
            .collect();
        Bins::new(edges, overflow)
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1 + usize::from(self.overflow)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Bin index of `v`; `None` below the first edge, or above the last without overflow.
    pub fn index(&self, v: f64) -> Option<usize> {
        let last = *self.edges.last().expect("non-empty edges");
        if v.is_nan() || v < self.edges[0] {
            return None;
        }
        if v >= last {
            return self.overflow.then(|| self.edges.len() - 1);
        }
        Some(self.edges.partition_point(|&e| e <= v) - 1)
    }

    pub fn counts(&self, values: impl IntoIterator<Item = f64>) -> Result<Vec<u64>> {
        let mut counts = vec![0u64; self.len()];
        for v in values {
            if v.is_nan() || v < 0.0 {
                return Err(Error::Domain(format!("wind value {v} is not >= 0")));
            }
            let i = self.index(v).ok_or_else(|| {
                Error::Domain(format!("wind value {v} is outside the histogram bins"))
            })?;
            counts[i] += 1;
        }
        Ok(counts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindHistogram {
    pub bins: Bins,
    pub probs: Vec<f64>,
}

impl WindHistogram {
    pub fn from_counts(bins: &Bins, counts: &[u64]) -> Result<Self> {
        if counts.len() != bins.len() {
            return Err(Error::Dimension(format!(
                "{} counts for {} bins",
                counts.len(),
                bins.len()
            )));
        }
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::Degenerate("histogram of an empty set".into()));
        }
        Ok(WindHistogram {
            bins: bins.clone(),
            probs: counts.iter().map(|&c| c as f64 / total as f64).collect(),
        })
    }

    pub fn from_probs(bins: &Bins, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != bins.len() {
            return Err(Error::Dimension(format!(
                "{} probabilities for {} bins",
                probs.len(),
                bins.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::Domain("probabilities must be >= 0".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!("probabilities sum to {sum}, not 1")));
        }
        Ok(WindHistogram {
            bins: bins.clone(),
            probs,
        })
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn check_same_bins(&self, other: &WindHistogram) -> Result<()> {
        if self.bins != other.bins {
            return Err(Error::Dimension(
                "histograms use different bin edges".into(),
            ));
        }
        Ok(())
    }

    /// Human-readable label of bin `i`, e.g. `[5,6)` or `>=30`.
    pub fn bin_label(&self, i: usize) -> String {
        let e = &self.bins.edges;
        if i + 1 < e.len() {
            format!("[{},{})", e[i], e[i + 1])
        } else {
            format!(">={}", e[e.len() - 1])
        }
    }
}

pub fn histogram(values: &[f64], bins: &Bins) -> Result<WindHistogram> {
    if values.is_empty() {
        return Err(Error::Degenerate("histogram of an empty set".into()));
    }
    WindHistogram::from_counts(bins, &bins.counts(values.iter().copied())?)
}

/// Largest-remainder rounding of `total * probs`; ties go to the lower bin.
pub fn largest_remainder(total: usize, probs: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let assigned: usize = quotas.iter().sum();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(assigned)) {
        quotas[i] += 1;
    }
    quotas
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bins() {
        let b = Bins::default();
        assert_eq!(b.len(), 31);
        assert_eq!(b.index(0.0), Some(0));
        assert_eq!(b.index(5.5), Some(5));
        assert_eq!(b.index(29.999), Some(29));
        assert_eq!(b.index(30.0), Some(30));
        assert_eq!(b.index(80.0), Some(30));
        assert_eq!(b.index(-0.1), None);
        let closed = Bins::uniform(0.0, 2.0, 2, false).unwrap();
        assert_eq!(closed.index(2.0), None);
        assert!(Bins::new(vec![0.0, 1.0, 1.0], false).is_err());
    }

    #[test]
    fn trivial_histograms() {
        let b = Bins::default();
        let h = histogram(&[5.5], &b).unwrap();
        assert_eq!(h.probs[5], 1.0);
        let h = histogram(&[0.5, 1.5], &b).unwrap();
        assert_eq!((h.probs[0], h.probs[1]), (0.5, 0.5));
        assert!(histogram(&[], &b).is_err());
        assert!(histogram(&[-1.0], &b).is_err());
        assert_eq!(h.bin_label(0), "[0,1)");
        assert_eq!(h.bin_label(30), ">=30");
    }

    #[test]
    fn largest_remainder_sums_exactly() {
        assert_eq!(largest_remainder(10, &[1.0 / 3.0; 3]), vec![4, 3, 3]);
        assert_eq!(largest_remainder(7, &[0.5, 0.25, 0.25]), vec![3, 2, 2]);
        assert_eq!(largest_remainder(0, &[0.5, 0.5]), vec![0, 0]);
    }
}
