//! Balance a catalog of rain and rainless patches under each policy.
//!
//! cargo run --example balance_corpus

use rand::Rng;
use sarwind::balance::{balance, Bins, Policy};
use sarwind::patches::{PatchClass, PatchRecord};
use sarwind::rng::seeded;

fn main() -> sarwind::Result<()> {
    // rain concentrated around moderate winds, rainless spread wider
    let mut rng = seeded(3);
    let catalog: Vec<PatchRecord> = (0..6000)
        .map(|i| {
            let rain = i < 400;
            let wind = if rain {
                rng.random_range(4.0..12.0)
            } else {
                rng.random_range(1.0..20.0f64) * rng.random_range(0.5..1.0f64).sqrt()
            };
            PatchRecord {
                scene_id: format!("S{:04}", i / 36),
                row0: 256 * ((i % 36) / 6),
                col0: 256 * (i % 6),
                class: if rain {
                    PatchClass::Rain
                } else {
                    PatchClass::Rainless
                },
                rain_fraction: if rain { 0.1 } else { 0.0 },
                delta: Some(0.1),
                mean_label_wind: Some(wind),
                subset: None,
            }
        })
        .collect();

    let bins = Bins::default();
    for policy in [Policy::Scheme1, Policy::Scheme2, Policy::Eq5AsPrinted] {
        let b = balance(&catalog, &bins, policy, 11)?;
        let plan = &b.plan;
        println!(
            "{policy:<15} n+ {:>4}  n- {:>4}  rain removed {:>5.1}%  balance error {:.4}  clamped bins {:?}",
            plan.n_plus,
            plan.n_minus,
            100.0 * plan.rain_removed_fraction,
            plan.balance_error,
            plan.relaxed_bins
        );
    }
    Ok(())
}
