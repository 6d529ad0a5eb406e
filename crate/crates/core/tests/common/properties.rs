//! Randomized invariants shared by the property tests and the acceptance
//! suite. Each check runs a deterministic proptest runner for a given
//! number of cases and returns the first failure as text.

use nalgebra::DVector;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use oim::baselines::{fit_algorithm, Algorithm, AlgorithmSettings, TrainedModel};
use oim::cli::{read_rows, write_rows};
use oim::experiments::ResultRow;
use oim::glm::{fit_glm_with, Design, GlmOptions, Link};
use oim::loss::{sigmoid, Loss};
use oim::metrics::{cross_risk, disparities, resilience_ratio};
use oim::mlp::MlpModel;
use oim::model::Hypothesis;
use oim::oim::{mixture_predict, oim_fit, project_simplex, MixingObjective, MixingProblem, OimConfig, MixingScale};
use oim::predictor::{predict_dataset, OutputKind, Predictor};
use oim::synthdata::{generate_pair, sample_features, CorrelationMatrix, Family, OutcomeSpec, PerturbationSpec};
use oim::tabular::{format_float, load_csv, save_csv, SchemaSpec};
use oim::{Dataset, OutcomeFamily};

pub type Check = fn(u32) -> Result<(), String>;

/// Every invariant with its name.
pub const ALL: [(&str, Check); 10] = [
    ("simplex projection satisfies its optimality conditions", simplex_projection),
    ("mixing solution is a simplex point no worse than uniform or any vertex", mixing_solution),
    ("mixing gradient matches central differences", mixing_gradient),
    ("glm gradient matches central differences", glm_gradient),
    ("mlp gradient matches central differences", mlp_gradient),
    ("irls objective never increases", irls_monotone),
    ("oim predictions ignore the protected value", oim_z_blind),
    ("resilience of a same-objective learner lies in [0, 1.02]", resilience_bounded),
    ("models, datasets and result rows round-trip through files", round_trips),
    ("metrics are symmetric and order-free", metric_symmetries),
];

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;

fn run<S: Strategy>(cases: u32, strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String> {
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 200,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn fd_check(analytic: &[f64], f: impl Fn(usize, f64) -> f64) -> Result<(), TestCaseError> {
    for (j, &g) in analytic.iter().enumerate() {
        let fd = (f(j, FD_STEP) - f(j, -FD_STEP)) / (2.0 * FD_STEP);
        prop_assert!(close(g, fd, FD_TOL), "coordinate {j}: analytic {g}, finite difference {fd}");
    }
    Ok(())
}

/// Random dataset: standard normal features, `levels` protected levels all
/// present, outcome linear in x and z (Bernoulli through a logit when
/// binary, both classes present).
pub fn random_data(seed: u64, n: usize, d: usize, levels: usize, binary: bool, signal: f64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<f64> = (0..n * d).map(|_| StandardNormal.sample(&mut rng)).collect();
    let mut z: Vec<f64> = (0..n).map(|i| (i % levels) as f64).collect();
    z.shuffle(&mut rng);
    let coef: Vec<f64> = (0..d).map(|_| rng.random_range(-signal..=signal)).collect();
    let gamma = rng.random_range(-signal..=signal);
    let mut y: Vec<f64> = (0..n)
        .map(|i| {
            let eta: f64 = features[i * d..(i + 1) * d].iter().zip(&coef).map(|(x, c)| x * c).sum::<f64>() + gamma * z[i];
            if binary {
                f64::from(u8::from(rng.random::<f64>() < sigmoid(eta)))
            } else {
                {
                let noise: f64 = StandardNormal.sample(&mut rng);
                eta + noise
            }
            }
        })
        .collect();
    if binary {
        y[0] = 0.0;
        y[1] = 1.0;
    }
    let names = (1..=d).map(|j| format!("x{j}")).collect();
    let family = if binary { OutcomeFamily::Binary } else { OutcomeFamily::Continuous };
    Dataset::new(names, features, z, y, family).unwrap()
}

pub fn simplex_projection(cases: u32) -> Result<(), String> {
    run(cases, prop::collection::vec(-10.0..10.0f64, 1..7), |v| {
        let p = project_simplex(&v);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        // p = max(v - theta, 0): a common shift on the support, and every
        // dropped coordinate at or below it.
        let support: Vec<usize> = (0..v.len()).filter(|&i| p[i] > 0.0).collect();
        prop_assert!(!support.is_empty());
        let theta = v[support[0]] - p[support[0]];
        for &i in &support {
            prop_assert!((v[i] - p[i] - theta).abs() <= 1e-10);
        }
        for i in (0..v.len()).filter(|i| p[*i] == 0.0) {
            prop_assert!(v[i] <= theta + 1e-10);
        }
        let again = project_simplex(&p);
        for (a, b) in again.iter().zip(&p) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        Ok(())
    })
}

fn mixing_problem(seed: u64, n: usize, k: usize, kind: u8) -> MixingProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let objective = match kind {
        0 => MixingObjective::Quadratic,
        1 => MixingObjective::ProbabilityNll,
        _ => MixingObjective::LogitNll,
    };
    let values: Vec<f64> = (0..n * k)
        .map(|_| match objective {
            MixingObjective::Quadratic => rng.random_range(-3.0..3.0),
            MixingObjective::ProbabilityNll => rng.random_range(0.02..0.98),
            MixingObjective::LogitNll => rng.random_range(-4.0..4.0),
        })
        .collect();
    let targets: Vec<f64> = (0..n)
        .map(|_| match objective {
            MixingObjective::Quadratic => rng.random_range(-3.0..3.0),
            _ => f64::from(u8::from(rng.random::<bool>())),
        })
        .collect();
    MixingProblem::new(k, values, targets, objective).unwrap()
}

pub fn mixing_solution(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 5..40usize, 2..5usize, 0..3u8), |(seed, n, k, kind)| {
        let problem = mixing_problem(seed, n, k, kind);
        let s = problem.solve();
        prop_assert!(s.weights.iter().all(|&w| w >= 0.0));
        prop_assert!((s.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        let uniform = vec![1.0 / k as f64; k];
        let mut best = problem.value(&uniform);
        for v in 0..k {
            let mut e = vec![0.0; k];
            e[v] = 1.0;
            best = best.min(problem.value(&e));
        }
        prop_assert!(s.objective <= best + 1e-9, "solver {} vs best candidate {best}", s.objective);
        prop_assert!((problem.value(&s.weights) - s.objective).abs() <= 1e-12);
        Ok(())
    })
}

pub fn mixing_gradient(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), 5..40usize, 2..5usize, 0..3u8, prop::collection::vec(0.05..1.0f64, 4)),
        |(seed, n, k, kind, raw)| {
            let problem = mixing_problem(seed, n, k, kind);
            let total: f64 = raw[..k].iter().sum();
            let w: Vec<f64> = raw[..k].iter().map(|r| r / total).collect();
            let g = problem.gradient(&w);
            fd_check(&g, |j, h| {
                let mut p = w.clone();
                p[j] += h;
                problem.value(&p)
            })
        },
    )
}

pub fn glm_gradient(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), 10..50usize, 1..4usize, any::<bool>(), any::<bool>(), 0.0..0.5f64),
        |(seed, n, d, logit, with_z, ridge)| {
            let data = random_data(seed, n, d, 2, logit, 1.5);
            let design = Design::new(&data, with_z, ridge).unwrap();
            let link = if logit { Link::Logit } else { Link::Identity };
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xbeef);
            let beta = DVector::from_fn(design.p(), |_, _| rng.random_range(-2.0..2.0));
            let g = design.gradient(link, &beta);
            fd_check(g.as_slice(), |j, h| {
                let mut b = beta.clone();
                b[j] += h;
                design.objective(link, &b)
            })
        },
    )
}

pub fn mlp_gradient(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), 1..4usize, any::<bool>(), any::<bool>()),
        |(seed, d, with_z, probability)| {
            let names = (1..=d).map(|j| format!("x{j}")).collect();
            let output = if probability { OutputKind::Probability } else { OutputKind::Real };
            let mut model = MlpModel::zeros(names, with_z, &[4, 3], output);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params: Vec<f64> = (0..model.parameters().len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            model.set_parameters(&params).unwrap();
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-2.0..2.0)).collect();
            let z = with_z.then(|| f64::from(u8::from(rng.random::<bool>())));
            let target = if probability { f64::from(u8::from(rng.random::<bool>())) } else { rng.random_range(-2.0..2.0) };
            let g = model.parameter_gradient(&x, z, target).unwrap();
            fd_check(&g, |j, h| {
                let mut m = model.clone();
                let mut p = params.clone();
                p[j] += h;
                m.set_parameters(&p).unwrap();
                m.example_loss(&x, z, target).unwrap()
            })
        },
    )
}

pub fn irls_monotone(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), 10..80usize, 1..4usize, any::<bool>(), 0.5..8.0f64),
        |(seed, n, d, with_z, signal)| {
            let data = random_data(seed, n, d, 2, true, signal);
            let fit = match fit_glm_with(&data, Link::Logit, with_z, GlmOptions::default()) {
                Ok(f) => f,
                Err(oim::Error::RankDeficient(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            for w in fit.objective_trace.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), "objective rose from {} to {}", w[0], w[1]);
            }
            Ok(())
        },
    )
}

pub fn oim_z_blind(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), 20..60usize, 1..3usize, 2..4usize, any::<bool>(), any::<bool>()),
        |(seed, n, d, levels, binary, output_scale)| {
            let data = random_data(seed, n, d, levels, binary, 1.5);
            let hypothesis = if binary { Hypothesis::GlmLogit } else { Hypothesis::GlmIdentity };
            let config = OimConfig {
                scale: if output_scale { MixingScale::Output } else { MixingScale::Link },
                ..OimConfig::default()
            };
            let fit = match oim_fit(&data, &hypothesis, &config) {
                Ok(f) => f,
                Err(oim::Error::RankDeficient(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let model = &fit.model;
            prop_assert!(!model.uses_protected());
            model.mixing.validate().map_err(|e| TestCaseError::fail(e.to_string()))?;
            for x in data.rows() {
                let base = model.predict(x, None).unwrap();
                for z in [0.0, 1.0, 2.0, -7.5] {
                    prop_assert_eq!(model.predict(x, Some(z)).unwrap(), base);
                }
                let manual = mixture_predict(&model.full_model, &model.mixing, x, config.scale).unwrap();
                prop_assert!((manual - base).abs() <= 1e-12);
            }
            Ok(())
        },
    )
}

pub fn resilience_bounded(cases: u32) -> Result<(), String> {
    run(
        cases,
        (any::<u64>(), any::<bool>(), -5.0..5.0f64, -0.8..0.8f64),
        |(seed, logistic, beta, r)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let sigma = CorrelationMatrix::with_pair(3, 0, 2, r).unwrap();
            let sample = sample_features(150, &sigma, &mut rng).unwrap();
            let family = if logistic { Family::BernoulliLogistic } else { Family::NormalIdentity };
            let spec = OutcomeSpec::linear(family, vec![1.0, -0.5]);
            let pair = generate_pair(&sample, &spec, &PerturbationSpec::Direct { beta, centered: false }, &mut rng).unwrap();
            let hypothesis = if logistic { Hypothesis::GlmLogit } else { Hypothesis::GlmIdentity };
            let settings = AlgorithmSettings::new(hypothesis);
            let loss = if logistic { Loss::Nll } else { Loss::Quadratic };
            let fits = fit_algorithm(Algorithm::TraditionalWithoutZ, &pair.clean, &settings)
                .and_then(|reference| Ok((reference, fit_algorithm(Algorithm::TraditionalWithoutZ, &pair.perturbed, &settings)?)));
            let (reference, learner) = match fits {
                Ok(f) => f,
                Err(oim::Error::RankDeficient(_)) => return Ok(()),
                Err(e) => return Err(TestCaseError::fail(e.to_string())),
            };
            let reference_risk = cross_risk(&pair.clean, &reference.model, loss).unwrap();
            let omega = resilience_ratio(reference_risk, cross_risk(&pair.clean, &learner.model, loss).unwrap());
            prop_assert!((0.0..=1.02).contains(&omega), "resilience {omega}");
            Ok(())
        },
    )
}

pub fn round_trips(cases: u32) -> Result<(), String> {
    let tmp = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let dir = tmp.path().to_path_buf();
    run(
        cases,
        (any::<u64>(), 20..50usize, any::<bool>(), prop::collection::vec(any::<f64>(), 1..6)),
        move |(seed, n, binary, raw)| {
            let data = random_data(seed, n, 2, 2, binary, 1.0);
            let hypothesis = if binary { Hypothesis::GlmLogit } else { Hypothesis::GlmIdentity };
            let settings = AlgorithmSettings::new(hypothesis);
            for algorithm in [Algorithm::Oim, Algorithm::TraditionalWithZ] {
                let model = match fit_algorithm(algorithm, &data, &settings) {
                    Ok(f) => f.model,
                    Err(oim::Error::RankDeficient(_)) => return Ok(()),
                    Err(e) => return Err(TestCaseError::fail(e.to_string())),
                };
                let text = serde_yaml::to_string(&model).unwrap();
                let back: TrainedModel = serde_yaml::from_str(&text).unwrap();
                prop_assert_eq!(&back, &model);
                prop_assert_eq!(predict_dataset(&back, &data).unwrap(), predict_dataset(&model, &data).unwrap());
            }

            let path = dir.join(format!("d{seed}.csv"));
            save_csv(&data, &path).unwrap();
            let loaded = load_csv(&path, &SchemaSpec::numeric_for(&data)).unwrap();
            prop_assert_eq!(loaded.features(), data.features());
            prop_assert_eq!(loaded.outcome(), data.outcome());

            let finite: Vec<f64> = raw.into_iter().filter(|v| v.is_finite()).collect();
            for &v in &finite {
                prop_assert_eq!(format_float(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
            }
            let rows: Vec<ResultRow> = finite
                .iter()
                .enumerate()
                .map(|(i, &value)| ResultRow {
                    condition: "beta=5;r=0.3".into(),
                    repeat: i,
                    algorithm: "oim".into(),
                    metric: "resilience".into(),
                    value,
                })
                .collect();
            let rpath = dir.join(format!("r{seed}.csv"));
            write_rows(&rpath, &rows).unwrap();
            let back = read_rows(&rpath).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in back.iter().zip(&rows) {
                prop_assert_eq!(a.value.to_bits(), b.value.to_bits());
            }
            Ok(())
        },
    )
}

pub fn metric_symmetries(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 8..80usize), |(seed, n)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let decisions: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=1.0f64).round()).collect();
        let labels: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random::<bool>()))).collect();
        let z: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
        let flipped: Vec<f64> = z.iter().map(|v| 1.0 - v).collect();
        let a = disparities(&decisions, &labels, &z).unwrap();
        let b = disparities(&decisions, &labels, &flipped).unwrap();
        for (x, y) in [(a.dd, b.dd), (a.ppd, b.ppd), (a.fpd, b.fpd)] {
            match (x, y) {
                (Some(x), Some(y)) => prop_assert!((x - y).abs() <= 1e-15),
                (None, None) => {}
                _ => prop_assert!(false, "relabeling changed definedness"),
            }
        }

        let data = random_data(seed, n, 2, 2, false, 1.0);
        let model = oim::glm::GlmModel::new(Link::Identity, data.feature_names().to_vec(), vec![0.7, -0.2], 0.1).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let shuffled = data.subset(&order);
        let r1 = cross_risk(&data, &model, Loss::Quadratic).unwrap();
        let r2 = cross_risk(&shuffled, &model, Loss::Quadratic).unwrap();
        prop_assert!(close(r1, r2, 1e-12));
        Ok(())
    })
}
