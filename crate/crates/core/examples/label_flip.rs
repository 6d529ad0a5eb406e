//! Half of the positive labels in one group are flipped to negative. Shows
//! per-group cross-risk against the clean labels, and the disparities of
//! each learner's decisions.

use oim::experiments::{run_labelflip, ExperimentConfig, Scenario};

fn main() -> oim::Result<()> {
    let mut config = ExperimentConfig::new(Scenario::Labelflip);
    if let Some(q) = std::env::args().nth(1).and_then(|a| a.parse().ok()) {
        config.params.flip_fraction = q;
    }
    let results = run_labelflip(&config, 0)?;
    let c = &results.conditions()[0];
    let metrics: Vec<String> = results
        .summary
        .iter()
        .filter(|r| &r.condition == c && r.algorithm == "reference")
        .map(|r| r.metric.clone())
        .collect();
    let mut learners = vec!["reference".to_string()];
    learners.extend(config.algorithms().iter().map(|a| a.name().to_string()));
    print!("{:<22}", "");
    for m in &metrics {
        print!(" {m:>18}");
    }
    println!();
    for l in &learners {
        print!("{l:<22}");
        for m in &metrics {
            print!(" {:>18}", results.mean(c, l, m).map_or("-".into(), |v| format!("{v:.4}")));
        }
        println!();
    }
    Ok(())
}
