//! Resilience of each learner as the correlation between x and z grows,
//! with and without a direct effect of z on the outcome.
//!
//! `cargo run --release --example corr_sweep -- 100` runs the full 100
//! repeats; the default is a quick 10 at a smaller n.

use oim::experiments::{run_corr_sweep, ExperimentConfig, Scenario};

fn main() -> oim::Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok());
    let mut config = ExperimentConfig::new(Scenario::CorrSweep);
    config.repeats = Some(repeats.unwrap_or(10));
    if repeats.is_none() {
        config.n = Some(2000);
    }
    let results = run_corr_sweep(&config, 0)?;

    println!("{:<18} {:>10} {:>10} {:>10} {:>10}", "condition", "oim", "with-z", "without-z", "eq-odds");
    for c in results.conditions() {
        let cell = |a: &str| results.mean(&c, a, "resilience").map_or("-".into(), |m| format!("{m:.4}"));
        println!(
            "{c:<18} {:>10} {:>10} {:>10} {:>10}",
            cell("oim"),
            cell("traditional-with-z"),
            cell("traditional-without-z"),
            cell("eq-odds")
        );
    }
    Ok(())
}
