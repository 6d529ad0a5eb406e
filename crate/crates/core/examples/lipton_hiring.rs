//! The hiring scenario: hiring depends on work experience only, but hair
//! length is a proxy for group. Reports relative utility and the weight a
//! learner puts on hair length.

use oim::experiments::{run_lipton, ExperimentConfig, Scenario};

fn main() -> oim::Result<()> {
    let config = ExperimentConfig::new(Scenario::Lipton);
    let results = run_lipton(&config, 0)?;
    let c = "scenario=lipton";
    println!("{:<24} {:>16} {:>12} {:>12}", "learner", "relative utility", "hair coef", "work coef");
    for a in config.algorithms() {
        let m = |metric: &str| results.mean(c, a.name(), metric).map_or("-".into(), |v| format!("{v:.4}"));
        println!("{:<24} {:>16} {:>12} {:>12}", a.name(), m("relative_utility"), m("coef_hair"), m("coef_work"));
    }
    Ok(())
}
