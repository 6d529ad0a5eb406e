//! Product-form outcomes fitted by an MLP. Prints the empirical CDF of each
//! learner's resilience relative to the MLP mixture, and how often the
//! mixture beats the MLP trained without z.

use oim::experiments::{run_nonlinear_ensemble, ExperimentConfig, Scenario};

fn main() -> oim::Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5);
    let mut config = ExperimentConfig::new(Scenario::NonlinearEnsemble);
    config.repeats = Some(repeats);
    config.n = Some(3000);
    config.mlp.epochs = 60;
    let results = run_nonlinear_ensemble(&config, 0)?;

    for c in results.conditions() {
        println!("{c}");
        let labels: Vec<String> =
            results.summary.iter().filter(|r| r.condition == c && r.metric == "ratio_to_oim").map(|r| r.algorithm.clone()).collect();
        for label in labels {
            let cdf: Vec<String> = results.cdf(&c, &label).iter().map(|(x, p)| format!("{x:.3}@{p:.2}")).collect();
            println!("  {label:<36} {}", cdf.join(" "));
        }
        let oim = results.values(&c, "oim", "resilience");
        let plain = results.values(&c, "traditional-without-z", "resilience");
        let wins = oim.iter().zip(&plain).filter(|(a, b)| a > b).count();
        println!("  mixture beats drop-z in {wins}/{}", oim.len());
    }
    Ok(())
}
