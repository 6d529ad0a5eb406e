//! Random GLM ensemble: random coefficients and correlation matrices, with
//! direct and induced perturbations. Prints the mean resilience per learner
//! for linear and logistic outcomes.

use oim::experiments::{run_glm_ensemble, ExperimentConfig, HypothesisKind, Scenario};

fn main() -> oim::Result<()> {
    let repeats = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(20);
    for kind in [HypothesisKind::GlmIdentity, HypothesisKind::GlmLogit] {
        let mut config = ExperimentConfig::new(Scenario::GlmEnsemble);
        config.hypothesis = Some(kind);
        config.repeats = Some(repeats);
        config.n = Some(5000);
        let results = run_glm_ensemble(&config, 0)?;
        println!("{}", kind.name());
        for c in results.conditions() {
            for a in ["oim", "traditional-with-z", "traditional-without-z"] {
                if let Some(row) = results.summary_row(&c, a, "resilience") {
                    println!("  {c:<24} {a:<22} {:.4} [{:.4}, {:.4}]", row.mean, row.ci_low, row.ci_high);
                }
            }
        }
    }
    Ok(())
}
