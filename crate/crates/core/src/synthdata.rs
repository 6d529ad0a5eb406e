//! Synthetic datasets: correlated features with a binary protected attribute,
//! clean outcomes and their perturbed siblings.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Beta, Distribution, Normal, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::sigmoid;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Validates symmetry, unit diagonal, entry range and positive
    /// semidefiniteness.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("correlation matrix needs dim >= 1".into()));
        }
        if entries.len() != dim * dim {
            return Err(Error::Shape(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        for i in 0..dim {
            if (entries[i * dim + i] - 1.0).abs() > 1e-12 {
                return Err(Error::Numeric(format!("diagonal entry {i} is {}", entries[i * dim + i])));
            }
            for j in 0..dim {
                let v = entries[i * dim + j];
                if !(-1.0..=1.0).contains(&v) || (v - entries[j * dim + i]).abs() > 1e-12 {
                    return Err(Error::Numeric(format!("entry ({i}, {j}) = {v} is not a valid correlation")));
                }
            }
        }
        let m = Self { dim, entries };
        let min = m.min_eigenvalue();
        if min < -1e-10 {
            return Err(Error::Numeric(format!("correlation matrix is not positive semidefinite (eigenvalue {min:.3e})")));
        }
        Ok(m)
    }

    pub fn identity(dim: usize) -> Result<Self> {
        let entries = (0..dim * dim).map(|k| if k / dim.max(1) == k % dim.max(1) { 1.0 } else { 0.0 }).collect();
        Self::from_entries(dim, entries)
    }

    /// Identity except for one off-diagonal pair.
    pub fn with_pair(dim: usize, i: usize, j: usize, r: f64) -> Result<Self> {
        if i >= dim || j >= dim || i == j {
            return Err(Error::InvalidDimension(format!("pair ({i}, {j}) invalid for dim {dim}")));
        }
        let mut m = Self::identity(dim)?.entries;
        m[i * dim + j] = r;
        m[j * dim + i] = r;
        Self::from_entries(dim, m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.entries)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        SymmetricEigen::new(self.matrix()).eigenvalues.iter().copied().collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// A lower factor L with L Lᵀ equal to the matrix; falls back to the
    /// symmetric square root for singular matrices.
    fn factor(&self) -> DMatrix<f64> {
        if let Some(c) = self.matrix().cholesky() {
            return c.l();
        }
        let eig = SymmetricEigen::new(self.matrix());
        let root = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
        &eig.eigenvectors * root * eig.eigenvectors.transpose()
    }
}

/// Normalized Gram matrix of a dim x dim standard-normal matrix.
pub fn random_correlation_matrix(dim: usize, rng: &mut impl Rng) -> Result<CorrelationMatrix> {
    if dim == 0 {
        return Err(Error::InvalidDimension("correlation matrix needs dim >= 1".into()));
    }
    let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| StandardNormal.sample(rng));
    let gram = &a * a.transpose();
    let scale: Vec<f64> = (0..dim).map(|i| gram[(i, i)].sqrt()).collect();
    let mut entries = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            entries[i * dim + j] = if i == j { 1.0 } else { (gram[(i, j)] / (scale[i] * scale[j])).clamp(-1.0, 1.0) };
        }
    }
    // Symmetrize exactly; the two triangles can differ in the last bit.
    for i in 0..dim {
        for j in 0..i {
            entries[i * dim + j] = entries[j * dim + i];
        }
    }
    CorrelationMatrix::from_entries(dim, entries)
}

/// Features plus a sign-binarized protected column.
#[derive(Debug, Clone)]
pub struct FeatureSample {
    pub feature_names: Vec<String>,
    /// Row-major, n x (dim - 1).
    pub features: Vec<f64>,
    /// Protected values in {-1, +1}.
    pub protected: Vec<f64>,
}

impl FeatureSample {
    pub fn n(&self) -> usize {
        self.protected.len()
    }

    pub fn d(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.d();
        &self.features[i * d..(i + 1) * d]
    }
}

fn std_normal(rng: &mut (impl Rng + ?Sized)) -> f64 {
    StandardNormal.sample(rng)
}

pub fn feature_names(d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("x{j}")).collect()
}

/// Draws n rows from the zero-mean multivariate normal with correlation
/// `sigma`; the last coordinate becomes the protected attribute via its sign.
pub fn sample_features(n: usize, sigma: &CorrelationMatrix, rng: &mut impl Rng) -> Result<FeatureSample> {
    if n == 0 {
        return Err(Error::EmptyDataset("cannot sample zero rows".into()));
    }
    let dim = sigma.dim();
    if dim < 2 {
        return Err(Error::InvalidDimension("need at least one feature and the protected coordinate".into()));
    }
    let l = sigma.factor();
    let d = dim - 1;
    let mut features = Vec::with_capacity(n * d);
    let mut protected = Vec::with_capacity(n);
    let mut e = vec![0.0; dim];
    for _ in 0..n {
        for v in &mut e {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..dim {
            let v: f64 = (0..=i).map(|k| l[(i, k)] * e[k]).sum();
            if i < d {
                features.push(v);
            } else {
                protected.push(if v >= 0.0 { 1.0 } else { -1.0 });
            }
        }
    }
    Ok(FeatureSample {
        feature_names: feature_names(d),
        features,
        protected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    BernoulliLogistic,
    NormalIdentity,
}

impl Family {
    pub fn outcome_family(self) -> OutcomeFamily {
        match self {
            Family::BernoulliLogistic => OutcomeFamily::Binary,
            Family::NormalIdentity => OutcomeFamily::Continuous,
        }
    }
}

/// Nonlinear replacements for the linear part of f, on the first two features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "form")]
pub enum NonlinearForm {
    /// a1 * x1 * x2
    Product { a1: f64 },
    /// a1 * exp(a2 * x1 * x2)
    ExpProduct { a1: f64, a2: f64 },
    /// a1 * sin(a2 * x1 * x2)
    SinProduct { a1: f64, a2: f64 },
}

impl NonlinearForm {
    pub fn eval(self, x: &[f64]) -> f64 {
        let t = x[0] * x[1];
        match self {
            NonlinearForm::Product { a1 } => a1 * t,
            NonlinearForm::ExpProduct { a1, a2 } => a1 * (a2 * t).exp(),
            NonlinearForm::SinProduct { a1, a2 } => a1 * (a2 * t).sin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSpec {
    pub family: Family,
    pub coefficients: Vec<f64>,
    #[serde(default)]
    pub protected_coefficient: f64,
    #[serde(default)]
    pub intercept: f64,
    #[serde(default)]
    pub nonlinear: Option<NonlinearForm>,
    /// Standard deviation of the normal noise; outcomes keep the default 1.
    #[serde(default = "unit")]
    pub noise_sd: f64,
}

fn unit() -> f64 {
    1.0
}

impl OutcomeSpec {
    pub fn linear(family: Family, coefficients: Vec<f64>) -> Self {
        Self {
            family,
            coefficients,
            protected_coefficient: 0.0,
            intercept: 0.0,
            nonlinear: None,
            noise_sd: 1.0,
        }
    }

    pub fn nonlinear(family: Family, d: usize, form: NonlinearForm) -> Self {
        Self {
            nonlinear: Some(form),
            ..Self::linear(family, vec![0.0; d])
        }
    }

    pub fn check_width(&self, d: usize) -> Result<()> {
        if self.coefficients.len() != d {
            return Err(Error::Shape(format!("{} coefficients for {d} features", self.coefficients.len())));
        }
        if self.nonlinear.is_some() && d < 2 {
            return Err(Error::Shape("the nonlinear forms need at least two features".into()));
        }
        Ok(())
    }

    /// f(x), before the protected term and the output link.
    pub fn predictor(&self, x: &[f64]) -> f64 {
        self.intercept
            + match self.nonlinear {
                Some(form) => form.eval(x),
                None => self.coefficients.iter().zip(x).map(|(a, v)| a * v).sum(),
            }
    }

    /// Conditional mean given the pre-link value.
    pub fn mean_of(&self, eta: f64) -> f64 {
        match self.family {
            Family::BernoulliLogistic => sigmoid(eta),
            Family::NormalIdentity => eta,
        }
    }

    /// Draws an outcome with pre-link value `eta`.
    pub fn draw(&self, eta: f64, rng: &mut impl Rng) -> f64 {
        match self.family {
            Family::BernoulliLogistic => f64::from(u8::from(rng.random::<f64>() < sigmoid(eta))),
            Family::NormalIdentity => eta + self.noise_sd * std_normal(rng),
        }
    }
}

/// Which labels a label-flip perturbation targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSelector {
    pub z: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum PerturbationSpec {
    None,
    /// Adds beta * z to the clean predictor; `centered` uses z minus its
    /// sample mean so the shift averages to zero.
    Direct {
        beta: f64,
        #[serde(default)]
        centered: bool,
    },
    /// Replaces the linear coefficients.
    Induced { coefficients: Vec<f64> },
    LabelFlip { group: GroupSelector, fraction: f64 },
    /// Regenerates feature `feature` from the other features with its own
    /// spec; the perturbed copy adds `spec.protected_coefficient * z`.
    Feature { feature: usize, spec: OutcomeSpec },
}

impl PerturbationSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PerturbationSpec::None => "none",
            PerturbationSpec::Direct { .. } => "direct",
            PerturbationSpec::Induced { .. } => "induced",
            PerturbationSpec::LabelFlip { .. } => "label-flip",
            PerturbationSpec::Feature { .. } => "feature",
        }
    }
}

/// A clean dataset and its perturbed sibling over the same rows.
#[derive(Debug, Clone)]
pub struct DatasetPair {
    pub clean: Dataset,
    pub perturbed: Dataset,
}

impl DatasetPair {
    pub fn new(clean: Dataset, perturbed: Dataset) -> Result<Self> {
        if clean.n() != perturbed.n() || clean.d() != perturbed.d() {
            return Err(Error::Shape("clean and perturbed datasets differ in shape".into()));
        }
        if clean.protected() != perturbed.protected() {
            return Err(Error::Shape("clean and perturbed datasets differ in the protected column".into()));
        }
        Ok(Self { clean, perturbed })
    }

    /// Rows on which cross-risk is measured: the features a deployed model
    /// sees (perturbed ones when a feature was perturbed) with clean outcomes.
    pub fn evaluation_view(&self) -> Result<Dataset> {
        match self.perturbed.perturbed_feature() {
            None => Ok(self.clean.clone()),
            Some(_) => self.perturbed.with_outcome(self.clean.outcome().to_vec(), self.clean.family()),
        }
    }

    /// Drops feature `j` from the training side only.
    pub fn without_training_feature(&self, j: usize) -> Result<(Dataset, Dataset)> {
        Ok((self.perturbed.drop_feature(j)?, self.evaluation_view()?.drop_feature(j)?))
    }
}

/// Number of flipped labels for fraction q of `count`: rounding with exact
/// halves resolved downward.
pub fn flip_count(q: f64, count: usize) -> usize {
    let t = q * count as f64;
    ((t - 0.5).ceil().max(0.0) as usize).min(count)
}

pub fn generate_pair(
    sample: &FeatureSample,
    clean_spec: &OutcomeSpec,
    perturbation: &PerturbationSpec,
    rng: &mut impl Rng,
) -> Result<DatasetPair> {
    let n = sample.n();
    let d = sample.d();
    clean_spec.check_width(d)?;
    if clean_spec.protected_coefficient != 0.0 {
        return Err(Error::Config("the clean outcome must not depend on the protected attribute".into()));
    }
    let names = sample.feature_names.clone();
    let family = clean_spec.family.outcome_family();
    let z = &sample.protected;

    let draw_all = |features: &[f64], rng: &mut dyn FnMut(f64) -> f64| -> Vec<f64> {
        (0..n).map(|i| rng(clean_spec.predictor(&features[i * d..(i + 1) * d]))).collect()
    };

    let mut clean_features = sample.features.clone();
    let mut perturbed_features = sample.features.clone();
    let mut marked = None;
    if let PerturbationSpec::Feature { feature, spec } = perturbation {
        let j = *feature;
        if j >= d {
            return Err(Error::Shape(format!("feature index {j} out of range for {d} features")));
        }
        spec.check_width(d - 1)?;
        for i in 0..n {
            let rest: Vec<f64> = sample.row(i).iter().enumerate().filter(|(k, _)| *k != j).map(|(_, &v)| v).collect();
            let eta = spec.predictor(&rest);
            let shift = spec.protected_coefficient * z[i];
            let (clean_v, perturbed_v) = match spec.family {
                Family::NormalIdentity => {
                    let noise = spec.noise_sd * std_normal(rng);
                    (eta + noise, eta + shift + noise)
                }
                Family::BernoulliLogistic => {
                    let u: f64 = rng.random();
                    (f64::from(u8::from(u < sigmoid(eta))), f64::from(u8::from(u < sigmoid(eta + shift))))
                }
            };
            clean_features[i * d + j] = clean_v;
            perturbed_features[i * d + j] = perturbed_v;
        }
        marked = Some(j);
    }

    let clean_outcome = draw_all(&clean_features, &mut |eta| clean_spec.draw(eta, rng));

    let perturbed_outcome = match perturbation {
        PerturbationSpec::None => draw_all(&clean_features, &mut |eta| clean_spec.draw(eta, rng)),
        PerturbationSpec::Direct { beta, centered } => {
            let zbar = if *centered { z.iter().sum::<f64>() / n as f64 } else { 0.0 };
            (0..n)
                .map(|i| clean_spec.draw(clean_spec.predictor(sample.row(i)) + beta * (z[i] - zbar), rng))
                .collect()
        }
        PerturbationSpec::Induced { coefficients } => {
            if coefficients.len() != d {
                return Err(Error::Shape(format!("{} induced coefficients for {d} features", coefficients.len())));
            }
            let spec = OutcomeSpec {
                coefficients: coefficients.clone(),
                nonlinear: None,
                ..clean_spec.clone()
            };
            (0..n).map(|i| spec.draw(spec.predictor(sample.row(i)), rng)).collect()
        }
        PerturbationSpec::LabelFlip { group, fraction } => {
            if !(0.0..=1.0).contains(fraction) {
                return Err(Error::Config(format!("flip fraction must lie in [0, 1], got {fraction}")));
            }
            if family != OutcomeFamily::Binary {
                return Err(Error::Family("label flips need a binary outcome".into()));
            }
            let mut y = clean_outcome.clone();
            flip_labels(&mut y, z, *group, *fraction, rng);
            y
        }
        PerturbationSpec::Feature { .. } => draw_all(&perturbed_features, &mut |eta| clean_spec.draw(eta, rng)),
    };

    let clean = Dataset::new(names.clone(), clean_features, z.clone(), clean_outcome, family)?;
    let perturbed = Dataset::new(names, perturbed_features, z.clone(), perturbed_outcome, family)?.with_perturbed_feature(marked);
    DatasetPair::new(clean, perturbed)
}

/// Flips `flip_count(fraction, group size)` labels chosen uniformly without
/// replacement inside the group. Returns the flipped row indices.
pub fn flip_labels(y: &mut [f64], z: &[f64], group: GroupSelector, fraction: f64, rng: &mut impl Rng) -> Vec<usize> {
    let members: Vec<usize> = (0..y.len()).filter(|&i| z[i] == group.z && y[i] == group.y).collect();
    let k = flip_count(fraction, members.len());
    let mut flipped: Vec<usize> = sample(rng, members.len(), k).into_iter().map(|m| members[m]).collect();
    flipped.sort_unstable();
    for &i in &flipped {
        y[i] = 1.0 - y[i];
    }
    flipped
}

/// The hiring scenario: hiring depends on work experience only, while hair
/// length and work experience both differ by group.
pub fn lipton_scenario(n: usize, rng: &mut impl Rng) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyDataset("lipton scenario needs n >= 1".into()));
    }
    let beta_z0 = Beta::new(2.0, 2.0).expect("valid beta parameters");
    let beta_z1 = Beta::new(2.0, 7.0).expect("valid beta parameters");
    let poisson = Poisson::new(25.0).expect("valid poisson rate");
    let offset = Normal::new(20.0, 0.2).expect("valid normal");
    let low = Normal::new(10.0, 2.0).expect("valid normal");
    let high = Normal::new(15.0, 2.0).expect("valid normal");
    let mut rows = Vec::with_capacity(2 * n);
    let mut z = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = rng.random_bool(0.5);
        let (hair, work) = if zi {
            let w = if rng.random_bool(0.2) { low.sample(rng) } else { high.sample(rng) };
            (35.0 * beta_z1.sample(rng), w)
        } else {
            (35.0 * beta_z0.sample(rng), poisson.sample(rng) - offset.sample(rng))
        };
        let p = lipton_probability(work);
        rows.extend([hair, work]);
        z.push(f64::from(u8::from(zi)));
        y.push(f64::from(u8::from(rng.random::<f64>() < p)));
    }
    Dataset::new(vec!["hair_length".into(), "work_exp".into()], rows, z, y, OutcomeFamily::Binary)
}

/// Hiring probability of the true process.
pub fn lipton_probability(work_exp: f64) -> f64 {
    sigmoid(-25.5 + 2.5 * work_exp)
}

/// The loan-interest pair: u = b0 - x1 + noise, y = u + z, with z = ±1
/// balanced, x1 independent of z and corr(x2, z) = r.
pub fn loan_pair(n: usize, r: f64, b0: f64, noise_sd: f64, rng: &mut impl Rng) -> Result<DatasetPair> {
    if n == 0 {
        return Err(Error::EmptyDataset("loan pair needs n >= 1".into()));
    }
    if !(-1.0..=1.0).contains(&r) {
        return Err(Error::Numeric(format!("correlation {r} outside [-1, 1]")));
    }
    let mut rows = Vec::with_capacity(2 * n);
    let mut z = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let zi = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let x1: f64 = StandardNormal.sample(rng);
        let e: f64 = StandardNormal.sample(rng);
        let x2 = r * zi + (1.0 - r * r).sqrt() * e;
        let nu: f64 = noise_sd * std_normal(rng);
        rows.extend([x1, x2]);
        z.push(zi);
        u.push(b0 - x1 + nu);
        y.push(b0 - x1 + nu + zi);
    }
    let names = feature_names(2);
    let clean = Dataset::new(names.clone(), rows.clone(), z.clone(), u, OutcomeFamily::Continuous)?;
    let perturbed = Dataset::new(names, rows, z, y, OutcomeFamily::Continuous)?;
    DatasetPair::new(clean, perturbed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn dim_one_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(random_correlation_matrix(1, &mut rng).unwrap().entries(), &[1.0]);
        assert!(matches!(random_correlation_matrix(0, &mut rng), Err(Error::InvalidDimension(_))));
    }

    #[test]
    fn random_matrix_is_valid_and_spread() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = random_correlation_matrix(3, &mut rng).unwrap();
        assert!(m.eigenvalues().iter().all(|&v| v >= -1e-10));
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..1000 {
            let v = random_correlation_matrix(3, &mut rng).unwrap().get(0, 1);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        assert!(lo <= -0.6 && hi >= 0.6, "spread [{lo}, {hi}]");
    }

    #[test]
    fn identity_sigma_gives_independent_balanced_z() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = sample_features(10_000, &CorrelationMatrix::identity(2).unwrap(), &mut rng).unwrap();
        let x: Vec<f64> = (0..s.n()).map(|i| s.row(i)[0]).collect();
        assert!(corr(&x, &s.protected).abs() < 0.04);
        let share = s.protected.iter().filter(|&&v| v == 1.0).count() as f64 / 1e4;
        assert!((0.47..=0.53).contains(&share));
    }

    #[test]
    fn sign_attenuation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let sigma = CorrelationMatrix::with_pair(2, 0, 1, 0.9).unwrap();
        let s = sample_features(10_000, &sigma, &mut rng).unwrap();
        let x: Vec<f64> = (0..s.n()).map(|i| s.row(i)[0]).collect();
        let expected = 0.9 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((corr(&x, &s.protected) - expected).abs() < 0.03);
    }

    #[test]
    fn infeasible_matrix_rejected() {
        let entries = vec![1.0, 0.9, 0.9, 0.9, 1.0, -0.9, 0.9, -0.9, 1.0];
        assert!(matches!(CorrelationMatrix::from_entries(3, entries), Err(Error::Numeric(_))));
    }

    #[test]
    fn flip_counts() {
        assert_eq!(flip_count(0.5, 1000), 500);
        assert_eq!(flip_count(0.5, 5), 2);
        assert_eq!(flip_count(0.3, 10), 3);
        assert_eq!(flip_count(0.0, 10), 0);
        assert_eq!(flip_count(1.0, 7), 7);
    }

    #[test]
    fn lipton_half_probability_at_break_even() {
        assert_eq!(lipton_probability(10.2), 0.5);
    }

    #[test]
    fn generators_are_deterministic() {
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let sigma = random_correlation_matrix(3, &mut rng).unwrap();
            let s = sample_features(50, &sigma, &mut rng).unwrap();
            let spec = OutcomeSpec::linear(Family::BernoulliLogistic, vec![1.0, -2.0]);
            generate_pair(&s, &spec, &PerturbationSpec::Direct { beta: 2.0, centered: false }, &mut rng).unwrap()
        };
        let (a, b) = (run(), run());
        assert_eq!(a.clean, b.clean);
        assert_eq!(a.perturbed, b.perturbed);
    }
}
