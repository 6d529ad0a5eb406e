use oim::baselines::{fit_algorithm, Algorithm, AlgorithmSettings};
use oim::experiments::repeat_seed;
use oim::loss::Loss;
use oim::metrics::{bootstrap_ci, cross_risk, disparities, resilience_ratio};
use oim::model::Hypothesis;
use oim::synthdata::{generate_pair, loan_pair, sample_features, CorrelationMatrix, Family, OutcomeSpec, PerturbationSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn fit(a: Algorithm, data: &oim::Dataset, h: Hypothesis) -> oim::baselines::TrainedModel {
    fit_algorithm(a, data, &AlgorithmSettings::new(h)).unwrap().model
}

#[test]
fn fit_with_z_on_the_loan_example_has_cross_risk_e_z_squared() {
    let pair = loan_pair(5000, 0.8, 3.0, 0.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let model = fit(Algorithm::TraditionalWithZ, &pair.perturbed, Hypothesis::GlmIdentity);
    let risk = cross_risk(&pair.clean, &model, Loss::Quadratic).unwrap();
    assert!((risk - 1.0).abs() < 1e-9, "{risk}");
}

#[test]
fn training_on_the_clean_data_gives_unit_resilience() {
    let pair = loan_pair(2000, 0.5, 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let a = fit(Algorithm::TraditionalWithoutZ, &pair.clean, Hypothesis::GlmIdentity);
    let b = fit(Algorithm::TraditionalWithoutZ, &pair.clean, Hypothesis::GlmIdentity);
    let omega = resilience_ratio(
        cross_risk(&pair.clean, &a, Loss::Quadratic).unwrap(),
        cross_risk(&pair.clean, &b, Loss::Quadratic).unwrap(),
    );
    assert_eq!(omega, 1.0);
}

#[test]
fn dropping_z_on_the_loan_example_matches_the_closed_form() {
    let pair = loan_pair(10_000, 0.8, 3.0, 1.0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let reference = fit(Algorithm::TraditionalWithoutZ, &pair.clean, Hypothesis::GlmIdentity);
    let plain = fit(Algorithm::TraditionalWithoutZ, &pair.perturbed, Hypothesis::GlmIdentity);
    let omega = resilience_ratio(
        cross_risk(&pair.clean, &reference, Loss::Quadratic).unwrap(),
        cross_risk(&pair.clean, &plain, Loss::Quadratic).unwrap(),
    );
    assert!((omega - 1.0 / 1.64).abs() <= 0.05, "{omega}");
}

#[test]
fn disparities_match_direct_counting() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..100 {
        let n = 50;
        let d: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let y: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let z: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let rate = |g: f64, keep: &dyn Fn(usize) -> bool, hit: &dyn Fn(usize) -> bool| -> Option<f64> {
            let rows: Vec<usize> = (0..n).filter(|&i| z[i] == g && keep(i)).collect();
            (!rows.is_empty()).then(|| rows.iter().filter(|&&i| hit(i)).count() as f64 / rows.len() as f64)
        };
        let gap = |keep: &dyn Fn(usize) -> bool, hit: &dyn Fn(usize) -> bool| -> Option<f64> {
            Some((rate(0.0, keep, hit)? - rate(1.0, keep, hit)?).abs())
        };
        let got = disparities(&d, &y, &z).unwrap();
        assert_eq!(got.dd, gap(&|_| true, &|i| d[i] == 1.0));
        assert_eq!(got.ppd, gap(&|i| d[i] == 1.0, &|i| y[i] == 1.0));
        assert_eq!(got.fpd, gap(&|i| y[i] == 0.0, &|i| d[i] == 1.0));
    }
}

#[test]
fn bootstrap_is_deterministic_given_its_seed() {
    let values: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin()).collect();
    let seed = repeat_seed(9, 1, 2);
    let a = bootstrap_ci(&values, 0.95, 1000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    let b = bootstrap_ci(&values, 0.95, 1000, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
    assert_eq!(a, b);
}

fn sweep_pair(beta: f64, r: f64, seed: u64) -> oim::synthdata::DatasetPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sigma = CorrelationMatrix::with_pair(2, 0, 1, r).unwrap();
    let sample = sample_features(10_000, &sigma, &mut rng).unwrap();
    let spec = OutcomeSpec::linear(Family::BernoulliLogistic, vec![1.0]);
    generate_pair(&sample, &spec, &PerturbationSpec::Direct { beta, centered: false }, &mut rng).unwrap()
}

fn resilience(a: Algorithm, pair: &oim::synthdata::DatasetPair) -> f64 {
    let reference = fit(Algorithm::TraditionalWithoutZ, &pair.clean, Hypothesis::GlmLogit);
    let model = fit(a, &pair.perturbed, Hypothesis::GlmLogit);
    resilience_ratio(
        cross_risk(&pair.clean, &reference, Loss::Nll).unwrap(),
        cross_risk(&pair.clean, &model, Loss::Nll).unwrap(),
    )
}

#[test]
fn dropping_z_is_resilient_without_discrimination() {
    let omega = resilience(Algorithm::TraditionalWithoutZ, &sweep_pair(0.0, 0.6, 5));
    assert!(omega >= 0.99, "{omega}");
}

#[test]
fn dropping_z_is_not_enough_under_a_strong_proxy() {
    for seed in 0..100 {
        let pair = sweep_pair(5.0, 0.9, 100 + seed);
        let (plain, mixture) = (resilience(Algorithm::TraditionalWithoutZ, &pair), resilience(Algorithm::Oim, &pair));
        assert!(plain < mixture, "seed {seed}: drop-z {plain}, mixture {mixture}");
    }
}
