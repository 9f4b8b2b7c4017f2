//! Scene-grouped validation/test split of per-scene patch counts.
//!
//! cargo run --release --example split_scenes

use rand::Rng;
use sarwind::rng::seeded;
use sarwind::split::{stochastic_split, SceneCounts, SplitConfig};

fn main() -> sarwind::Result<()> {
    let mut rng = seeded(5);
    let scenes: Vec<SceneCounts> = (0..120)
        .map(|i| SceneCounts {
            id: format!("S{i:04}"),
            rain: (0..31)
                .map(|b| {
                    if (5..12).contains(&b) {
                        rng.random_range(0..2)
                    } else {
                        0
                    }
                })
                .collect(),
            rainless: (0..31)
                .map(|b| if b < 20 { rng.random_range(0..3) } else { 0 })
                .collect(),
        })
        .collect();
    let total: u64 = scenes.iter().map(SceneCounts::patches).sum();
    let cfg = SplitConfig {
        iterations: 20_000,
        seed: 1,
        ..SplitConfig::default()
    };
    let out = stochastic_split(&scenes, &cfg)?;
    let a = &out.assignment;
    let count = |ids: &[String]| -> u64 {
        scenes
            .iter()
            .filter(|s| ids.contains(&s.id))
            .map(SceneCounts::patches)
            .sum()
    };
    println!("{total} patches over {} scenes", scenes.len());
    println!(
        "val  {:>3} scenes, {:.4} of patches, e_val {:.6}",
        a.val.len(),
        count(&a.val) as f64 / total as f64,
        a.e_val
    );
    println!(
        "test {:>3} scenes, {:.4} of patches, e_test {:.6}",
        a.test.len(),
        count(&a.test) as f64 / total as f64,
        a.e_test
    );
    println!("e = {:.6} after {} improvements", a.e, out.trace.len());
    Ok(())
}
