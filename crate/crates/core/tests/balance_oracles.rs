use proptest::prelude::*;
use rand::Rng;
use sarwind::balance::{balance, scheme2_quotas, Bins, Policy};
use sarwind::patches::{PatchClass, PatchRecord};
use sarwind::rng::seeded;

/// Every quota vector within the pools, keeping those whose entries are
/// `floor` or `ceil` of `m P_b` for their total `m`; the largest `m` wins.
fn exhaustive_best_total(rain: &[usize], rainless: &[usize], p: &[f64]) -> Option<usize> {
    let cap: Vec<usize> = rain.iter().zip(rainless).map(|(a, b)| *a.min(b)).collect();
    let mut best = None;
    let mut q = vec![0usize; cap.len()];
    loop {
        let m: usize = q.iter().sum();
        let rounded = q.iter().zip(p).all(|(&qb, &pb)| {
            let x = m as f64 * pb;
            qb == x.floor() as usize || qb == x.ceil() as usize
        });
        if m > 0 && rounded && best.is_none_or(|b| m > b) {
            best = Some(m);
        }
        // odometer over 0..=cap
        let mut i = 0;
        loop {
            if i == q.len() {
                return best;
            }
            if q[i] < cap[i] {
                q[i] += 1;
                break;
            }
            q[i] = 0;
            i += 1;
        }
    }
}

fn probs(weights: &[u32]) -> Vec<f64> {
    let s: u32 = weights.iter().sum();
    weights.iter().map(|&w| w as f64 / s as f64).collect()
}

proptest! {
    #[test]
    fn scheme2_matches_exhaustive_search(
        bins in 1usize..=3,
        rain in prop::collection::vec(0usize..7, 3),
        rainless in prop::collection::vec(0usize..7, 3),
        weights in prop::collection::vec(1u32..6, 3),
    ) {
        let (rain, rainless, p) = (&rain[..bins], &rainless[..bins], probs(&weights[..bins]));
        let got = scheme2_quotas(rain, rainless, &p);
        match exhaustive_best_total(rain, rainless, &p) {
            None => prop_assert!(got.is_err()),
            Some(m) => {
                let q = got.unwrap();
                prop_assert_eq!(q.iter().sum::<usize>(), m);
                for b in 0..bins {
                    let x = m as f64 * p[b];
                    prop_assert!(q[b] == x.floor() as usize || q[b] == x.ceil() as usize);
                    prop_assert!(q[b] <= rain[b].min(rainless[b]));
                }
            }
        }
    }
}

fn record(i: usize, class: PatchClass, wind: f64) -> PatchRecord {
    PatchRecord {
        scene_id: format!("S{:04}", i / 36),
        row0: 256 * ((i % 36) / 6),
        col0: 256 * (i % 6),
        class,
        rain_fraction: if class == PatchClass::Rain { 0.1 } else { 0.0 },
        delta: Some(0.1),
        mean_label_wind: Some(wind),
        subset: None,
    }
}

/// Rain patches centered near 8 m/s, rainless spread wider, like the corpus.
fn catalog(seed: u64, rain: usize, rainless: usize) -> Vec<PatchRecord> {
    let mut rng = seeded(seed);
    let mut out = Vec::new();
    for i in 0..rain + rainless {
        let (class, wind) = if i < rain {
            (PatchClass::Rain, 8.0 + rng.random_range(-3.0..3.0))
        } else {
            (
                PatchClass::Rainless,
                rng.random_range(1.0..20.0) * rng.random_range(0.5..1.0f64).sqrt(),
            )
        };
        out.push(record(i, class, wind));
    }
    out
}

#[test]
fn scheme1_on_a_corpus_sized_catalog() {
    let cat = catalog(3, 300, 6900);
    let b = balance(&cat, &Bins::default(), Policy::Scheme1, 11).unwrap();
    assert_eq!(b.plan.n_plus, 300);
    assert_eq!(b.plan.n_plus, b.plan.n_minus);
    assert_eq!(b.plan.rain_removed_fraction, 0.0);
    assert!(
        b.plan.balance_error <= 10.0,
        "balance error {}",
        b.plan.balance_error
    );

    let mut shuffled = cat.clone();
    shuffled.reverse();
    let again = balance(&shuffled, &Bins::default(), Policy::Scheme1, 11).unwrap();
    assert_eq!(again.selected, b.selected);
    assert_eq!(again.plan, b.plan);
}

#[test]
fn scheme2_histograms_follow_p() {
    let cat = catalog(4, 400, 4000);
    let b = balance(&cat, &Bins::default(), Policy::Scheme2, 2).unwrap();
    assert_eq!(b.plan.n_plus, b.plan.n_minus);
    assert_eq!(b.plan.p_plus, b.plan.p_minus);
    let m = b.plan.n_plus as f64;
    for (q, pb) in b.plan.quotas.iter().zip(&b.plan.p.probs) {
        assert!((*q as f64 - m * pb).abs() < 1.0);
    }
}

#[test]
fn discarded_patches_never_selected() {
    let mut cat = catalog(5, 50, 500);
    for r in cat.iter_mut().step_by(7) {
        r.class = PatchClass::Discarded;
    }
    let b = balance(&cat, &Bins::default(), Policy::Scheme1, 1).unwrap();
    assert!(b.selected.iter().all(|r| r.class != PatchClass::Discarded));
}
