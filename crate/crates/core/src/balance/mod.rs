//! Wind-speed histograms and rain/rainless balancing.
//!
//! Scheme I keeps every rain patch and draws as many rainless patches so that
//! the pooled histogram follows the corpus histogram `P`; the rainless target
//! is `2P - P+`, clamped at zero. Scheme II subsamples both classes so each
//! class histogram follows `P`.

mod histogram;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::patches::{PatchClass, PatchRecord};
use crate::rng::{sample_indices, seeded};

pub use histogram::{histogram, largest_remainder, Bins, WindHistogram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    Scheme1,
    Scheme2,
    /// Scheme I with the rainless target `(P+ - P) / 2`, clamped, for comparison.
    Eq5AsPrinted,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Policy::Scheme1 => "scheme1",
            Policy::Scheme2 => "scheme2",
            Policy::Eq5AsPrinted => "eq5-as-printed",
        })
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheme1" => Ok(Policy::Scheme1),
            "scheme2" => Ok(Policy::Scheme2),
            "eq5-as-printed" => Ok(Policy::Eq5AsPrinted),
            _ => Err(Error::Config(format!(
                "unknown policy `{s}`; expected scheme1, scheme2 or eq5-as-printed"
            ))),
        }
    }
}

/// Rainless target `2P - P+`, negatives clamped to 0 and renormalized.
/// Returns the target and the bins where the clamp applied.
pub fn target_rainless(
    p: &WindHistogram,
    p_plus: &WindHistogram,
) -> Result<(WindHistogram, Vec<usize>)> {
    p.check_same_bins(p_plus)?;
    let raw = p
        .probs
        .iter()
        .zip(&p_plus.probs)
        .map(|(a, b)| 2.0 * a - b)
        .collect();
    clamp_normalize(p, raw)
}

/// Rainless target `(P+ - P) / 2` as printed, clamped and renormalized.
pub fn target_rainless_as_printed(
    p: &WindHistogram,
    p_plus: &WindHistogram,
) -> Result<(WindHistogram, Vec<usize>)> {
    p.check_same_bins(p_plus)?;
    let raw = p
        .probs
        .iter()
        .zip(&p_plus.probs)
        .map(|(a, b)| 0.5 * (b - a))
        .collect();
    clamp_normalize(p, raw)
}

fn clamp_normalize(like: &WindHistogram, raw: Vec<f64>) -> Result<(WindHistogram, Vec<usize>)> {
    let mut relaxed = Vec::new();
    let clamped: Vec<f64> = raw
        .into_iter()
        .enumerate()
        .map(|(i, x)| {
            if x < 0.0 {
                relaxed.push(i);
                0.0
            } else {
                x
            }
        })
        .collect();
    let sum: f64 = clamped.iter().sum();
    if sum <= 0.0 {
        return Err(Error::Degenerate(
            "rainless target is zero in every bin".into(),
        ));
    }
    let probs = clamped.into_iter().map(|x| x / sum).collect();
    Ok((WindHistogram::from_probs(&like.bins, probs)?, relaxed))
}

/// Mean over bins of `(P - (P+ + P-)/2)^2`, times 100.
pub fn balance_error(
    p: &WindHistogram,
    p_plus: &WindHistogram,
    p_minus: &WindHistogram,
) -> Result<f64> {
    p.check_same_bins(p_plus)?;
    p.check_same_bins(p_minus)?;
    let n = p.len() as f64;
    let mse = (0..p.len())
        .map(|i| (p.probs[i] - 0.5 * (p_plus.probs[i] + p_minus.probs[i])).powi(2))
        .sum::<f64>()
        / n;
    Ok(100.0 * mse)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shortfall {
    pub bin: usize,
    pub quota: usize,
    pub available: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub selected: Vec<PatchRecord>,
    pub quotas: Vec<usize>,
    pub shortfalls: Vec<Shortfall>,
}

fn wind_of(r: &PatchRecord) -> Result<f64> {
    r.mean_label_wind
        .ok_or_else(|| Error::Data(format!("patch {} has no mean label wind", r.id())))
}

/// Pool members per bin, each bin sorted by patch id.
fn bin_pool<'a>(pool: &'a [PatchRecord], bins: &Bins) -> Result<Vec<Vec<&'a PatchRecord>>> {
    let mut per_bin = vec![Vec::new(); bins.len()];
    for r in pool {
        let w = wind_of(r)?;
        let i = bins.index(w).ok_or_else(|| {
            Error::Domain(format!("patch {} wind {w} is outside the bins", r.id()))
        })?;
        per_bin[i].push(r);
    }
    for b in &mut per_bin {
        b.sort_by_cached_key(|r| r.id());
    }
    Ok(per_bin)
}

/// Uniform draws without replacement per bin, bins in order from one stream.
fn draw_quotas(
    per_bin: &[Vec<&PatchRecord>],
    quotas: &[usize],
    seed: u64,
) -> (Vec<PatchRecord>, Vec<Shortfall>) {
    let mut rng = seeded(seed);
    let mut selected = Vec::new();
    let mut shortfalls = Vec::new();
    for (bin, (members, &quota)) in per_bin.iter().zip(quotas).enumerate() {
        if members.len() < quota {
            warn!(
                "bin {bin}: quota {quota} exceeds the {} available patches; taking all",
                members.len()
            );
            shortfalls.push(Shortfall {
                bin,
                quota,
                available: members.len(),
            });
            selected.extend(members.iter().map(|r| (*r).clone()));
        } else {
            let mut idx = sample_indices(&mut rng, members.len(), quota);
            idx.sort_unstable();
            selected.extend(idx.into_iter().map(|i| members[i].clone()));
        }
    }
    (selected, shortfalls)
}

/// Draws `n_minus` rainless patches whose histogram follows `p_minus`.
pub fn sample_rainless(
    pool: &[PatchRecord],
    p_minus: &WindHistogram,
    n_minus: usize,
    seed: u64,
) -> Result<Selection> {
    let quotas = largest_remainder(n_minus, &p_minus.probs);
    let per_bin = bin_pool(pool, &p_minus.bins)?;
    if pool.len() < n_minus {
        let short: Vec<String> = per_bin
            .iter()
            .zip(&quotas)
            .enumerate()
            .filter(|(_, (m, &q))| m.len() < q)
            .map(|(i, (m, q))| format!("{}: {} of {q}", p_minus.bin_label(i), m.len()))
            .collect();
        return Err(Error::Degenerate(format!(
            "rainless pool has {} patches, {n_minus} needed; short bins: {}",
            pool.len(),
            short.join(", ")
        )));
    }
    let (selected, shortfalls) = draw_quotas(&per_bin, &quotas, seed);
    Ok(Selection {
        selected,
        quotas,
        shortfalls,
    })
}

/// Largest joint per-bin quota vector for scheme II.
///
/// For the largest total `m`, every bin gets `floor(m P_b)` or `ceil(m P_b)`
/// (extra units by largest remainder among bins with room) without exceeding
/// either class pool in that bin.
pub fn scheme2_quotas(
    rain_counts: &[usize],
    rainless_counts: &[usize],
    p: &[f64],
) -> Result<Vec<usize>> {
    if rain_counts.len() != p.len() || rainless_counts.len() != p.len() {
        return Err(Error::Dimension(
            "scheme II pools and P differ in bin count".into(),
        ));
    }
    let cap: Vec<usize> = rain_counts
        .iter()
        .zip(rainless_counts)
        .map(|(a, b)| *a.min(b))
        .collect();
    let upper = cap.iter().sum::<usize>();
    for m in (1..=upper).rev() {
        if let Some(q) = rounded_within_caps(m, p, &cap) {
            return Ok(q);
        }
    }
    Err(Error::Degenerate(
        "scheme II pools share no bin with positive P".into(),
    ))
}

fn rounded_within_caps(m: usize, p: &[f64], cap: &[usize]) -> Option<Vec<usize>> {
    let exact: Vec<f64> = p.iter().map(|x| x * m as f64).collect();
    let mut q: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    if q.iter().zip(cap).any(|(a, c)| a > c) {
        return None;
    }
    let missing = m - q.iter().sum::<usize>();
    let mut room: Vec<usize> = (0..p.len())
        .filter(|&i| exact[i] > exact[i].floor() && q[i] < cap[i])
        .collect();
    if room.len() < missing {
        return None;
    }
    room.sort_by(|&a, &b| {
        let (fa, fb) = (exact[a] - exact[a].floor(), exact[b] - exact[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in room.iter().take(missing) {
        q[i] += 1;
    }
    Some(q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BalancePlan {
    pub policy: Policy,
    pub seed: u64,
    pub n_plus: usize,
    pub n_minus: usize,
    /// Rainless quotas (scheme I) or joint per-class quotas (scheme II).
    pub quotas: Vec<usize>,
    pub relaxed_bins: Vec<usize>,
    pub shortfalls: Vec<Shortfall>,
    /// Rain patches in the pool before balancing.
    pub rain_pool: usize,
    pub rainless_pool: usize,
    pub rain_removed_fraction: f64,
    /// Probability-MSE times 100.
    pub balance_error: f64,
    pub p: WindHistogram,
    pub p_plus: WindHistogram,
    /// Histogram of the selected rainless patches.
    pub p_minus: WindHistogram,
    /// Target the rainless side was drawn toward.
    pub p_minus_target: WindHistogram,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Balanced {
    pub plan: BalancePlan,
    /// Rain then rainless patches, each sorted by patch id.
    pub selected: Vec<PatchRecord>,
}

fn hist_of(records: &[PatchRecord], bins: &Bins) -> Result<WindHistogram> {
    let winds = records.iter().map(wind_of).collect::<Result<Vec<_>>>()?;
    histogram(&winds, bins)
}

fn counts_of(per_bin: &[Vec<&PatchRecord>]) -> Vec<usize> {
    per_bin.iter().map(Vec::len).collect()
}

/// Balances a candidate catalog. `P` is the histogram of every catalog patch
/// with a defined wind; the pools are the rain and rainless classes.
pub fn balance(
    catalog: &[PatchRecord],
    bins: &Bins,
    policy: Policy,
    seed: u64,
) -> Result<Balanced> {
    let with_wind: Vec<PatchRecord> = catalog
        .iter()
        .filter(|r| r.mean_label_wind.is_some())
        .cloned()
        .collect();
    let dropped = catalog.len() - with_wind.len();
    if dropped > 0 {
        warn!("{dropped} patches have no valid label wind and are left out of P");
    }
    let pool = |class| -> Vec<PatchRecord> {
        with_wind
            .iter()
            .filter(|r| r.class == class)
            .cloned()
            .collect()
    };
    let (rain, rainless) = (pool(PatchClass::Rain), pool(PatchClass::Rainless));
    if rain.is_empty() {
        return Err(Error::Degenerate("no rain patches to balance".into()));
    }
    let p = hist_of(&with_wind, bins)?;
    let p_plus_pool = hist_of(&rain, bins)?;

    let (rain_sel, rainless_sel, quotas, relaxed, shortfalls, target) = match policy {
        Policy::Scheme1 | Policy::Eq5AsPrinted => {
            let (target, relaxed) = if policy == Policy::Scheme1 {
                target_rainless(&p, &p_plus_pool)?
            } else {
                target_rainless_as_printed(&p, &p_plus_pool)?
            };
            if !relaxed.is_empty() {
                info!("rainless target clamped in {} bins", relaxed.len());
            }
            let s = sample_rainless(&rainless, &target, rain.len(), seed)?;
            (
                rain.clone(),
                s.selected,
                s.quotas,
                relaxed,
                s.shortfalls,
                target,
            )
        }
        Policy::Scheme2 => {
            let rain_bins = bin_pool(&rain, bins)?;
            let rainless_bins = bin_pool(&rainless, bins)?;
            let quotas =
                scheme2_quotas(&counts_of(&rain_bins), &counts_of(&rainless_bins), &p.probs)?;
            let (r, _) = draw_quotas(&rain_bins, &quotas, crate::rng::derive_seed(seed, 1));
            let (nr, _) = draw_quotas(&rainless_bins, &quotas, crate::rng::derive_seed(seed, 2));
            (r, nr, quotas, Vec::new(), Vec::new(), p.clone())
        }
    };

    let p_plus = hist_of(&rain_sel, bins)?;
    let p_minus = hist_of(&rainless_sel, bins)?;
    let plan = BalancePlan {
        policy,
        seed,
        n_plus: rain_sel.len(),
        n_minus: rainless_sel.len(),
        quotas,
        relaxed_bins: relaxed,
        shortfalls,
        rain_pool: rain.len(),
        rainless_pool: rainless.len(),
        rain_removed_fraction: 1.0 - rain_sel.len() as f64 / rain.len() as f64,
        balance_error: balance_error(&p, &p_plus, &p_minus)?,
        p,
        p_plus,
        p_minus,
        p_minus_target: target,
    };
    let mut selected = sort_by_id(rain_sel);
    selected.extend(sort_by_id(rainless_sel));
    Ok(Balanced { plan, selected })
}

fn sort_by_id(mut v: Vec<PatchRecord>) -> Vec<PatchRecord> {
    v.sort_by_cached_key(PatchRecord::id);
    v
}

/// CSV with one row per bin: label, P, P+, achieved P-, target P-, quota.
pub fn histograms_csv(plan: &BalancePlan) -> String {
    let mut out = String::from("bin,lower,p,p_plus,p_minus,p_minus_target,quota\n");
    for i in 0..plan.p.len() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            plan.p.bin_label(i),
            plan.p.bins.edges[i.min(plan.p.bins.edges.len() - 1)],
            plan.p.probs[i],
            plan.p_plus.probs[i],
            plan.p_minus.probs[i],
            plan.p_minus_target.probs[i],
            plan.quotas[i]
        ));
    }
    out
}

/// Selected-patch counts per class.
pub fn class_counts(records: &[PatchRecord]) -> BTreeMap<PatchClass, usize> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.class).or_insert(0) += 1;
    }
    m
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn two_bins() -> Bins {
        Bins::uniform(0.0, 2.0, 2, false).unwrap()
    }

    fn h(probs: &[f64]) -> WindHistogram {
        WindHistogram::from_probs(&two_bins(), probs.to_vec()).unwrap()
    }

    fn rec(id: usize, class: PatchClass, wind: f64) -> PatchRecord {
        PatchRecord {
            scene_id: format!("S{id:04}"),
            row0: 0,
            col0: 0,
            class,
            rain_fraction: 0.0,
            delta: Some(0.1),
            mean_label_wind: Some(wind),
            subset: None,
        }
    }

    #[test]
    fn symmetric_target_is_p() {
        let p = h(&[0.25, 0.75]);
        let (t, relaxed) = target_rainless(&p, &p).unwrap();
        assert_eq!(t.probs, p.probs);
        assert!(relaxed.is_empty());
    }

    #[test]
    fn hand_targets() {
        // 2P - P+ = [1 - 1, 1 - 0] = [0, 1]
        let (t, relaxed) = target_rainless(&h(&[0.5, 0.5]), &h(&[1.0, 0.0])).unwrap();
        assert_eq!(t.probs, vec![0.0, 1.0]);
        assert!(relaxed.is_empty());
        // 2P - P+ = [0.6 - 0.8, 1.4 - 0.2] = [-0.2, 1.2] -> [0, 1.2] -> [0, 1]
        let (t, relaxed) = target_rainless(&h(&[0.3, 0.7]), &h(&[0.8, 0.2])).unwrap();
        assert_eq!(t.probs, vec![0.0, 1.0]);
        assert_eq!(relaxed, vec![0]);
        assert!(target_rainless_as_printed(&h(&[0.5, 0.5]), &h(&[0.5, 0.5])).is_err());
    }

    #[test]
    fn hand_balance_errors() {
        let p = h(&[0.4, 0.6]);
        assert_eq!(balance_error(&p, &p, &p).unwrap(), 0.0);
        let e = balance_error(&h(&[1.0, 0.0]), &h(&[0.0, 1.0]), &h(&[1.0, 0.0])).unwrap();
        assert!((e - 25.0).abs() < 1e-12);
    }

    #[test]
    fn sampler_meets_quotas() {
        let pool: Vec<_> = (0..40)
            .map(|i| rec(i, PatchClass::Rainless, (i % 2) as f64 + 0.5))
            .collect();
        let s = sample_rainless(&pool, &h(&[0.3, 0.7]), 10, 5).unwrap();
        assert_eq!(s.quotas, vec![3, 7]);
        let low = s
            .selected
            .iter()
            .filter(|r| r.mean_label_wind < Some(1.0))
            .count();
        assert_eq!((low, s.selected.len() - low), (3, 7));
        assert!(s.shortfalls.is_empty());
        assert_eq!(sample_rainless(&pool, &h(&[0.3, 0.7]), 10, 5).unwrap(), s);
        assert!(sample_rainless(&pool, &h(&[0.3, 0.7]), 41, 5).is_err());
    }

    #[test]
    fn short_bin_is_logged_not_redistributed() {
        let mut pool: Vec<_> = (0..2).map(|i| rec(i, PatchClass::Rainless, 0.5)).collect();
        pool.extend((2..30).map(|i| rec(i, PatchClass::Rainless, 1.5)));
        let s = sample_rainless(&pool, &h(&[0.5, 0.5]), 10, 1).unwrap();
        assert_eq!(
            s.shortfalls,
            vec![Shortfall {
                bin: 0,
                quota: 5,
                available: 2
            }]
        );
        let high = s
            .selected
            .iter()
            .filter(|r| r.mean_label_wind > Some(1.0))
            .count();
        assert_eq!((s.selected.len() - high, high), (2, 5));
    }

    #[test]
    fn scheme1_keeps_every_rain_patch() {
        let mut cat: Vec<_> = (0..20)
            .map(|i| rec(i, PatchClass::Rain, 0.5 + (i % 2) as f64))
            .collect();
        cat.extend(
            (20..200).map(|i| rec(i, PatchClass::Rainless, 0.5 + (i % 3 == 0) as u8 as f64)),
        );
        let b = balance(&cat, &two_bins(), Policy::Scheme1, 3).unwrap();
        assert_eq!(b.plan.n_plus, 20);
        assert_eq!(b.plan.n_minus, 20);
        assert_eq!(b.plan.rain_removed_fraction, 0.0);
        assert_eq!(class_counts(&b.selected)[&PatchClass::Rain], 20);
    }

    #[test]
    fn scheme2_equal_pools_keep_everything() {
        assert_eq!(
            scheme2_quotas(&[3, 5], &[3, 5], &[0.375, 0.625]).unwrap(),
            vec![3, 5]
        );
    }

    #[test]
    fn scheme2_concentrated_rain_removes_most() {
        let bins = Bins::default();
        let mut cat = Vec::new();
        for i in 0..100 {
            cat.push(rec(i, PatchClass::Rain, 8.5));
        }
        for i in 100..2100 {
            cat.push(rec(i, PatchClass::Rainless, 2.0 + (i % 12) as f64 + 0.5));
        }
        for i in 2100..2110 {
            cat.push(rec(i, PatchClass::Rain, 4.5));
        }
        let b = balance(&cat, &bins, Policy::Scheme2, 9).unwrap();
        assert!(
            b.plan.rain_removed_fraction > 0.8,
            "{}",
            b.plan.rain_removed_fraction
        );
        assert_eq!(b.plan.n_plus, b.plan.n_minus);
        assert_eq!(b.plan.p_plus.probs, b.plan.p_minus.probs);
    }

    proptest! {
        #[test]
        fn target_is_a_distribution(a in proptest::collection::vec(0.0f64..1.0, 5), b in proptest::collection::vec(0.0f64..1.0, 5)) {
            let bins = Bins::uniform(0.0, 5.0, 5, false).unwrap();
            let norm = |v: &[f64]| {
                let s: f64 = v.iter().sum();
                v.iter().map(|x| x / s).collect::<Vec<_>>()
            };
            prop_assume!(a.iter().sum::<f64>() > 0.1 && b.iter().sum::<f64>() > 0.1);
            let p = WindHistogram::from_probs(&bins, norm(&a)).unwrap();
            let pp = WindHistogram::from_probs(&bins, norm(&b)).unwrap();
            if let Ok((t, _)) = target_rainless(&p, &pp) {
                prop_assert!(t.probs.iter().all(|&x| x >= 0.0));
                prop_assert!((t.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn sampler_ignores_pool_order(seed in 0u64..200, shift in 0usize..60) {
            let pool: Vec<_> = (0..60).map(|i| rec(i, PatchClass::Rainless, (i % 2) as f64 + 0.5)).collect();
            let mut rotated = pool.clone();
            rotated.rotate_left(shift);
            let a = sample_rainless(&pool, &h(&[0.4, 0.6]), 20, seed).unwrap();
            let b = sample_rainless(&rotated, &h(&[0.4, 0.6]), 20, seed).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn unclamped_pool_matches_p(seed in 0u64..100) {
            // P+ <= 2P everywhere, so rain + sampled rainless follows P within 1/n per bin.
            let bins = Bins::uniform(0.0, 3.0, 3, false).unwrap();
            let mut cat: Vec<_> = (0..30).map(|i| rec(i, PatchClass::Rain, (i % 3) as f64 + 0.5)).collect();
            cat.extend((30..600).map(|i| rec(i, PatchClass::Rainless, [0.5, 1.5, 1.5, 2.5][i % 4])));
            let b = balance(&cat, &bins, Policy::Scheme1, seed).unwrap();
            prop_assert!(b.plan.relaxed_bins.is_empty());
            let pooled = hist_of(&b.selected, &bins).unwrap();
            for i in 0..3 {
                prop_assert!((pooled.probs[i] - b.plan.p.probs[i]).abs() <= 1.0 / b.plan.n_minus as f64 + 1e-12);
            }
        }
    }
}
