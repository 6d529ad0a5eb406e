//! The loan-interest example: the outcome shifts by z, x2 is a proxy for z.
//! Fits the three basic learners on the shifted data and measures each
//! against the unshifted outcome.

use oim::baselines::{fit_algorithm, Algorithm, AlgorithmSettings};
use oim::loss::Loss;
use oim::metrics::cross_risk;
use oim::model::Hypothesis;
use oim::synthdata::loan_pair;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> oim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pair = loan_pair(10_000, 0.8, 3.0, 0.0, &mut rng)?;
    let settings = AlgorithmSettings::new(Hypothesis::GlmIdentity);

    for algorithm in [Algorithm::TraditionalWithZ, Algorithm::TraditionalWithoutZ, Algorithm::Oim] {
        let fit = fit_algorithm(algorithm, &pair.perturbed, &settings)?;
        let risk = cross_risk(&pair.clean, &fit.model, Loss::Quadratic)?;
        println!("{:<24} cross-risk {risk:.4}", algorithm.name());
        if let Some(m) = fit.model.as_oim() {
            for (z, w) in m.mixing.support.iter().zip(&m.mixing.weights) {
                println!("{:<24} weight on z={z}: {w:.4}", "");
            }
        }
    }
    Ok(())
}
