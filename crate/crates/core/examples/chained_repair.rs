//! A feature that is itself shifted by z. The chained mixture first
//! repairs that feature from the others, then predicts the outcome from
//! the repaired row.

use oim::baselines::{fit_algorithm, Algorithm, AlgorithmSettings};
use oim::loss::Loss;
use oim::metrics::cross_risk;
use oim::model::Hypothesis;
use oim::oim::{chained_oim, OimConfig};
use oim::synthdata::{generate_pair, sample_features, CorrelationMatrix, Family, OutcomeSpec, PerturbationSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> oim::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma = CorrelationMatrix::with_pair(4, 1, 3, 0.5)?;
    let sample = sample_features(5000, &sigma, &mut rng)?;
    let outcome = OutcomeSpec::linear(Family::NormalIdentity, vec![1.0, 0.5, -1.0]);
    // x1 = 0.8 x2 - 0.4 x3 + noise on the clean side, plus 2 z when perturbed.
    let feature = OutcomeSpec {
        protected_coefficient: 2.0,
        noise_sd: 0.02,
        ..OutcomeSpec::linear(Family::NormalIdentity, vec![0.8, -0.4])
    };
    let perturbation = PerturbationSpec::Feature { feature: 0, spec: feature };
    let pair = generate_pair(&sample, &outcome, &perturbation, &mut rng)?;
    let eval = pair.evaluation_view()?;

    let chained = chained_oim(&pair.perturbed, 0, &Hypothesis::GlmIdentity, &Hypothesis::GlmIdentity, &OimConfig::default())?;
    println!("{:<24} cross-risk {:.4}", "chained-oim", cross_risk(&eval, &chained.model, Loss::Quadratic)?);

    let settings = AlgorithmSettings::new(Hypothesis::GlmIdentity);
    for a in [Algorithm::Oim, Algorithm::TraditionalWithoutZ] {
        let model = fit_algorithm(a, &pair.perturbed, &settings)?.model;
        println!("{:<24} cross-risk {:.4}", a.name(), cross_risk(&eval, &model, Loss::Quadratic)?);
    }

    let x = eval.row(0);
    println!("row 0 as seen  {x:.3?}");
    println!("row 0 repaired {:.3?}", chained.model.repair(x)?);
    Ok(())
}
