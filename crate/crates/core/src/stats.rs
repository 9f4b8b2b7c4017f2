//! Per-channel normalization statistics over the training subset.
//!
//! Each patch is reduced to a Welford accumulator per channel; patch
//! accumulators are sorted by patch id and merged pairwise (adjacent pairs,
//! level by level) with Chan's update, so the result does not depend on the
//! order patches arrive in.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::patches::SSR_VV;
use crate::scene::{channel, Grid2D};

/// Normalized model inputs. The label (`wspd_model`) is never normalized.
pub const INPUT_CHANNELS: [&str; 5] = [
    SSR_VV,
    channel::SIGMA0_VH,
    channel::INCIDENCE,
    channel::WDIR_PRIOR,
    channel::WSPD_GMF,
];

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    pub m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&self, other: &Moments) -> Moments {
        if self.n == 0 {
            return *other;
        }
        if other.n == 0 {
            return *self;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        Moments {
            n,
            mean: self.mean + d * w,
            m2: self.m2 + other.m2 + d * d * self.n as f64 * w,
        }
    }

    pub fn population_std(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            (self.m2 / self.n as f64).max(0.0).sqrt()
        }
    }

    pub fn of_grid(grid: &Grid2D) -> Moments {
        let mut m = Moments::default();
        for &v in grid.values() {
            if !grid.is_fill(v) && !v.is_nan() {
                m.push(v);
            }
        }
        m
    }
}

/// Adjacent-pair tree reduction.
pub fn merge_pairwise(mut level: Vec<Moments>) -> Moments {
    if level.is_empty() {
        return Moments::default();
    }
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|c| {
                if c.len() == 2 {
                    c[0].merge(&c[1])
                } else {
                    c[0]
                }
            })
            .collect();
    }
    level[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub channels: BTreeMap<String, MeanStd>,
    /// sha256 over the sorted training patch ids, newline separated.
    pub train_fingerprint: String,
}

pub fn fingerprint(ids: &[String]) -> String {
    let mut sorted: Vec<&String> = ids.iter().collect();
    sorted.sort();
    let mut h = Sha256::new();
    for id in sorted {
        h.update(id.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Streaming builder: feed patches in any order, then [`StatsBuilder::finish`].
#[derive(Debug, Clone)]
pub struct StatsBuilder {
    channels: Vec<String>,
    partials: Vec<(String, Vec<Moments>)>,
}

impl StatsBuilder {
    pub fn new(channels: &[&str]) -> Self {
        StatsBuilder {
            channels: channels.iter().map(|c| c.to_string()).collect(),
            partials: Vec::new(),
        }
    }

    pub fn add(&mut self, patch_id: &str, channels: &BTreeMap<String, Grid2D>) -> Result<()> {
        let moments =
            self.channels
                .iter()
                .map(|c| {
                    channels.get(c).map(Moments::of_grid).ok_or_else(|| {
                        Error::Config(format!("patch {patch_id} has no `{c}` channel"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
        self.partials.push((patch_id.to_string(), moments));
        Ok(())
    }

    pub fn finish(mut self) -> Result<ChannelStats> {
        if self.partials.is_empty() {
            return Err(Error::Degenerate(
                "no training patches for statistics".into(),
            ));
        }
        self.partials.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = BTreeMap::new();
        for (k, name) in self.channels.iter().enumerate() {
            let m = merge_pairwise(self.partials.iter().map(|(_, m)| m[k]).collect());
            if m.n == 0 {
                return Err(Error::Degenerate(format!(
                    "channel `{name}` has no valid values"
                )));
            }
            let std = m.population_std();
            if !(std > 0.0) {
                return Err(Error::Degenerate(format!(
                    "channel `{name}` is constant (std 0)"
                )));
            }
            out.insert(name.clone(), MeanStd { mean: m.mean, std });
        }
        let ids: Vec<String> = self.partials.into_iter().map(|(id, _)| id).collect();
        Ok(ChannelStats {
            channels: out,
            train_fingerprint: fingerprint(&ids),
        })
    }
}

pub fn compute_stats<'a>(
    patches: impl IntoIterator<Item = (&'a str, &'a BTreeMap<String, Grid2D>)>,
    channels: &[&str],
) -> Result<ChannelStats> {
    let mut b = StatsBuilder::new(channels);
    for (id, ch) in patches {
        b.add(id, ch)?;
    }
    b.finish()
}

fn transform(
    patch: &BTreeMap<String, Grid2D>,
    stats: &ChannelStats,
    channels: &[&str],
    f: impl Fn(f64, &MeanStd) -> f64,
) -> Result<BTreeMap<String, Grid2D>> {
    let mut out = patch.clone();
    for &c in channels {
        if c == channel::WSPD_MODEL {
            return Err(Error::Config(
                "the label channel is never normalized".into(),
            ));
        }
        let s = stats
            .channels
            .get(c)
            .ok_or_else(|| Error::Config(format!("statistics have no `{c}` channel")))?;
        let g = patch
            .get(c)
            .ok_or_else(|| Error::Config(format!("patch has no `{c}` channel")))?;
        out.insert(c.to_string(), g.map(|v| f(v, s)));
    }
    Ok(out)
}

/// `(x - mean) / std` on the listed channels; everything else is copied.
pub fn normalize(
    patch: &BTreeMap<String, Grid2D>,
    stats: &ChannelStats,
    channels: &[&str],
) -> Result<BTreeMap<String, Grid2D>> {
    transform(patch, stats, channels, |v, s| (v - s.mean) / s.std)
}

pub fn denormalize(
    patch: &BTreeMap<String, Grid2D>,
    stats: &ChannelStats,
    channels: &[&str],
) -> Result<BTreeMap<String, Grid2D>> {
    transform(patch, stats, channels, |v, s| v * s.std + s.mean)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use rand::Rng;

    use super::*;
    use crate::rng::seeded;

    fn one(name: &str, g: Grid2D) -> BTreeMap<String, Grid2D> {
        BTreeMap::from([(name.to_string(), g)])
    }

    #[test]
    fn hand_values() {
        let p = one(
            "a",
            Grid2D::from_rows(&[vec![1.0, 2.0, 3.0]], 100.0).unwrap(),
        );
        let s = compute_stats([("p", &p)], &["a"]).unwrap();
        assert!((s.channels["a"].mean - 2.0).abs() < 1e-15);
        assert!((s.channels["a"].std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn degenerate_channels_rejected() {
        let c = one("a", Grid2D::filled(2, 2, 100.0, 4.0).unwrap());
        assert!(compute_stats([("p", &c)], &["a"]).is_err());
        let nan = one("a", Grid2D::filled(2, 2, 100.0, f64::NAN).unwrap());
        assert!(compute_stats([("p", &nan)], &["a"]).is_err());
        assert!(compute_stats([("p", &c)], &["b"]).is_err());
    }

    #[test]
    fn million_values_match_two_pass() {
        let mut rng = seeded(77);
        let grids: Vec<_> = (0..16)
            .map(|_| {
                one(
                    "a",
                    Grid2D::from_fn(250, 250, 100.0, |_, _| 1e3 + rng.random_range(-5.0..5.0))
                        .unwrap(),
                )
            })
            .collect();
        let ids: Vec<String> = (0..16).map(|i| format!("p{i:02}")).collect();
        let s = compute_stats(ids.iter().map(String::as_str).zip(&grids), &["a"]).unwrap();
        let all: Vec<f64> = grids
            .iter()
            .flat_map(|g| g["a"].values().to_vec())
            .collect();
        let n = all.len() as f64;
        let mean = all.iter().sum::<f64>() / n;
        let var = all.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        assert!(((s.channels["a"].mean - mean) / mean).abs() < 1e-9);
        assert!(((s.channels["a"].std - var.sqrt()) / var.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn label_is_untouched_and_round_trip_holds() {
        let mut rng = seeded(5);
        let mut p = BTreeMap::new();
        for c in [channel::WSPD_MODEL, SSR_VV] {
            p.insert(
                c.to_string(),
                Grid2D::from_fn(8, 8, 100.0, |_, _| rng.random_range(0.0..20.0)).unwrap(),
            );
        }
        let s = compute_stats([("x", &p)], &[SSR_VV]).unwrap();
        let n = normalize(&p, &s, &[SSR_VV]).unwrap();
        let back = denormalize(&n, &s, &[SSR_VV]).unwrap();
        let label_bits = |m: &BTreeMap<String, Grid2D>| {
            m[channel::WSPD_MODEL]
                .values()
                .iter()
                .map(|v| v.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(label_bits(&n), label_bits(&p));
        for (a, b) in back[SSR_VV].values().iter().zip(p[SSR_VV].values()) {
            assert!((a - b).abs() <= 1e-6);
        }
        let m = Moments::of_grid(&n[SSR_VV]);
        assert!(m.mean.abs() < 1e-6 && (m.population_std() - 1.0).abs() < 1e-6);
        assert!(normalize(&p, &s, &[channel::WSPD_MODEL]).is_err());
    }

    #[test]
    fn fingerprint_ignores_order() {
        let a = fingerprint(&["b".into(), "a".into()]);
        assert_eq!(a, fingerprint(&["a".into(), "b".into()]));
        assert_ne!(a, fingerprint(&["a".into()]));
    }

    proptest! {
        #[test]
        fn order_invariant(seed in 0u64..300, rot in 0usize..7) {
            let mut rng = seeded(seed);
            let grids: Vec<_> = (0..7)
                .map(|_| one("a", Grid2D::from_fn(5, 5, 100.0, |_, _| rng.random_range(-1e3..1e3)).unwrap()))
                .collect();
            let ids: Vec<String> = (0..7).map(|i| format!("p{i}")).collect();
            let mut order: Vec<usize> = (0..7).collect();
            order.rotate_left(rot);
            let a = compute_stats(ids.iter().map(String::as_str).zip(&grids), &["a"]).unwrap();
            let b = compute_stats(order.iter().map(|&i| (ids[i].as_str(), &grids[i])), &["a"]).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
