//! Dropping a relevant feature from training: how much resilience each
//! learner keeps when part of the signal is unobserved.

use oim::experiments::{run_missing_feature, ExperimentConfig, Scenario};

fn main() -> oim::Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    let mut config = ExperimentConfig::new(Scenario::MissingFeature);
    config.repeats = Some(repeats);
    config.n = Some(5000);
    let results = run_missing_feature(&config, 0)?;
    println!("{}", results.to_table());
    Ok(())
}
