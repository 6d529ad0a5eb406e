//! Linear and logistic regression fitted by least squares and IRLS.

use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::{clamp_probability, sigmoid, Loss};
use crate::predictor::{check_width, OutputKind, Predictor};

/// Coefficients larger than this in magnitude are clamped; it only happens
/// when the classes are (nearly) separable.
pub const COEFFICIENT_CAP: f64 = 1e4;
/// Diagonal jitter added to every linear solve.
pub const SOLVE_JITTER: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-8;
pub const MAX_IRLS_ITERATIONS: usize = 100;
/// Smallest eigenvalue of the column-scaled Gram matrix below which the
/// design counts as rank deficient.
const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Link {
    Identity,
    Logit,
}

impl Link {
    pub fn loss(self) -> Loss {
        match self {
            Link::Identity => Loss::Quadratic,
            Link::Logit => Loss::Nll,
        }
    }

    pub fn output_kind(self) -> OutputKind {
        match self {
            Link::Identity => OutputKind::Real,
            Link::Logit => OutputKind::Probability,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GlmOptions {
    /// L2 penalty on all non-intercept parameters. With a positive ridge,
    /// rank-deficient designs are accepted.
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmModel {
    pub link: Link,
    pub loss: Loss,
    pub feature_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// All protected levels seen in training, reference level first. Empty
    /// when trained without the protected attribute.
    pub protected_levels: Vec<f64>,
    /// One coefficient per non-reference level.
    pub protected_coefficients: Vec<f64>,
}

impl GlmModel {
    /// A model that ignores the protected attribute.
    pub fn new(link: Link, feature_names: Vec<String>, coefficients: Vec<f64>, intercept: f64) -> Result<Self> {
        if feature_names.len() != coefficients.len() {
            return Err(Error::Shape(format!(
                "{} feature names for {} coefficients",
                feature_names.len(),
                coefficients.len()
            )));
        }
        Ok(Self {
            link,
            loss: link.loss(),
            feature_names,
            coefficients,
            intercept,
            protected_levels: Vec::new(),
            protected_coefficients: Vec::new(),
        })
    }

    /// Adds dummy-coded protected effects; `levels[0]` is the reference.
    pub fn with_protected(mut self, levels: Vec<f64>, coefficients: Vec<f64>) -> Result<Self> {
        if levels.is_empty() || coefficients.len() + 1 != levels.len() {
            return Err(Error::Shape(format!(
                "{} protected levels need {} coefficients, got {}",
                levels.len(),
                levels.len().saturating_sub(1),
                coefficients.len()
            )));
        }
        self.protected_levels = levels;
        self.protected_coefficients = coefficients;
        Ok(self)
    }

    pub fn protected_effect(&self, z: f64) -> Result<f64> {
        match self.protected_levels.iter().position(|&l| l == z) {
            Some(0) => Ok(0.0),
            Some(k) => Ok(self.protected_coefficients[k - 1]),
            None => Err(Error::Usage(format!(
                "protected value {z} was not seen in training (levels {:?})",
                self.protected_levels
            ))),
        }
    }

    /// Parameters in the fitting layout: intercept, features, protected dummies.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(1 + self.coefficients.len() + self.protected_coefficients.len());
        p.push(self.intercept);
        p.extend_from_slice(&self.coefficients);
        p.extend_from_slice(&self.protected_coefficients);
        p
    }

    fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }
}

impl Predictor for GlmModel {
    fn feature_count(&self) -> usize {
        self.coefficients.len()
    }

    fn uses_protected(&self) -> bool {
        !self.protected_levels.is_empty()
    }

    fn output_kind(&self) -> OutputKind {
        self.link.output_kind()
    }

    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        check_width(self.coefficients.len(), x)?;
        let eta = self.linear_predictor(x);
        match (self.uses_protected(), z) {
            (true, Some(z)) => Ok(eta + self.protected_effect(z)?),
            (true, None) => Err(Error::Usage("model was trained with the protected attribute; supply z".into())),
            (false, _) => Ok(eta),
        }
    }
}

/// The design matrix for a GLM fit: a leading intercept column, the
/// features, then one dummy column per non-reference protected level.
#[derive(Debug, Clone)]
pub struct Design {
    pub matrix: DMatrix<f64>,
    pub target: DVector<f64>,
    pub levels: Vec<f64>,
    pub ridge: f64,
}

impl Design {
    pub fn new(data: &Dataset, include_protected: bool, ridge: f64) -> Result<Self> {
        let levels = if include_protected { data.protected_levels() } else { Vec::new() };
        let n = data.n();
        let d = data.d();
        let k = levels.len().saturating_sub(1);
        let p = 1 + d + k;
        let matrix = DMatrix::from_fn(n, p, |i, j| {
            if j == 0 {
                1.0
            } else if j <= d {
                data.row(i)[j - 1]
            } else {
                f64::from(u8::from(data.protected()[i] == levels[j - d]))
            }
        });
        Ok(Self {
            matrix,
            target: DVector::from_column_slice(data.outcome()),
            levels,
            ridge,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn p(&self) -> usize {
        self.matrix.ncols()
    }

    fn penalty(&self, beta: &DVector<f64>) -> f64 {
        0.5 * self.ridge * beta.iter().skip(1).map(|b| b * b).sum::<f64>()
    }

    /// Mean training loss plus the ridge penalty.
    pub fn objective(&self, link: Link, beta: &DVector<f64>) -> f64 {
        let eta = &self.matrix * beta;
        let n = self.n() as f64;
        let data_term = match link {
            Link::Identity => eta.iter().zip(self.target.iter()).map(|(e, y)| (y - e).powi(2)).sum::<f64>() / n,
            Link::Logit => {
                eta.iter().zip(self.target.iter()).map(|(&e, &y)| Loss::Nll.value(y, sigmoid(e))).sum::<f64>() / n
            }
        };
        data_term + self.penalty(beta)
    }

    /// Analytic gradient of [`Design::objective`].
    pub fn gradient(&self, link: Link, beta: &DVector<f64>) -> DVector<f64> {
        let eta = &self.matrix * beta;
        let n = self.n() as f64;
        let residual = match link {
            Link::Identity => (eta - &self.target) * 2.0,
            Link::Logit => eta.map(sigmoid) - &self.target,
        };
        let mut g = self.matrix.tr_mul(&residual) / n;
        for j in 1..g.len() {
            g[j] += self.ridge * beta[j];
        }
        g
    }

    fn check_rank(&self) -> Result<()> {
        let gram = self.matrix.tr_mul(&self.matrix) / self.n() as f64;
        let p = gram.nrows();
        let scale: Vec<f64> = (0..p).map(|j| gram[(j, j)].sqrt()).collect();
        if let Some(j) = scale.iter().position(|&s| s == 0.0) {
            return Err(Error::RankDeficient(format!("design column {j} is identically zero")));
        }
        let scaled = DMatrix::from_fn(p, p, |i, j| gram[(i, j)] / (scale[i] * scale[j]));
        let min_eig = SymmetricEigen::new(scaled).eigenvalues.min();
        if min_eig < RANK_TOL {
            return Err(Error::RankDeficient(format!("smallest scaled eigenvalue {min_eig:.3e}")));
        }
        Ok(())
    }

    fn solve(&self, mut a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
        let p = a.nrows();
        for j in 0..p {
            a[(j, j)] += SOLVE_JITTER;
        }
        a.cholesky()
            .map(|c| c.solve(b))
            .ok_or_else(|| Error::RankDeficient("normal equations are not positive definite".into()))
    }
}

/// Result of a GLM fit with its convergence record.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub model: GlmModel,
    /// Objective after each iteration, starting at the initial point.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub converged: bool,
    /// Mean training loss of the final model, without the penalty.
    pub training_risk: f64,
}

pub fn fit_glm(train: &Dataset, link: Link, include_protected: bool) -> Result<GlmModel> {
    fit_glm_with(train, link, include_protected, GlmOptions::default()).map(|f| f.model)
}

pub fn fit_glm_with(train: &Dataset, link: Link, include_protected: bool, options: GlmOptions) -> Result<GlmFit> {
    train.require_nonempty("fit_glm")?;
    if link == Link::Logit && train.family() != OutcomeFamily::Binary {
        return Err(Error::Family("logit link needs a binary outcome".into()));
    }
    if options.ridge < 0.0 || !options.ridge.is_finite() {
        return Err(Error::Config(format!("ridge must be a nonnegative number, got {}", options.ridge)));
    }
    let design = Design::new(train, include_protected, options.ridge)?;
    if train.n() <= design.p() {
        return Err(Error::InvalidDimension(format!(
            "{} rows cannot identify {} parameters",
            train.n(),
            design.p()
        )));
    }
    if options.ridge == 0.0 {
        design.check_rank()?;
    }
    let (beta, trace, iterations, converged) = match link {
        Link::Identity => {
            let beta = solve_least_squares(&design)?;
            let trace = vec![design.objective(link, &beta)];
            (beta, trace, 1, true)
        }
        Link::Logit => irls(&design)?,
    };
    let gradient_norm = design.gradient(link, &beta).norm();
    let model = assemble(train, link, &design.levels, &beta)?;
    let training_risk = design.objective(link, &beta) - design.penalty(&beta);
    Ok(GlmFit {
        model,
        objective_trace: trace,
        iterations,
        gradient_norm,
        converged,
        training_risk,
    })
}

fn ridge_diagonal(design: &Design, a: &mut DMatrix<f64>) {
    for j in 1..a.nrows() {
        a[(j, j)] += design.ridge;
    }
}

fn solve_least_squares(design: &Design) -> Result<DVector<f64>> {
    let n = design.n() as f64;
    let mut a = design.matrix.tr_mul(&design.matrix) / n;
    ridge_diagonal(design, &mut a);
    let b = design.matrix.tr_mul(&design.target) / n;
    design.solve(a, &b)
}

fn irls(design: &Design) -> Result<(DVector<f64>, Vec<f64>, usize, bool)> {
    let link = Link::Logit;
    let n = design.n() as f64;
    let mut beta = DVector::zeros(design.p());
    let mut objective = design.objective(link, &beta);
    let mut trace = vec![objective];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_IRLS_ITERATIONS {
        let g = design.gradient(link, &beta);
        if g.norm() <= GRADIENT_TOL {
            converged = true;
            break;
        }
        let eta = &design.matrix * &beta;
        let w = eta.map(|e| {
            let p = clamp_probability(sigmoid(e));
            p * (1.0 - p)
        });
        let mut weighted = design.matrix.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w[i];
        }
        let mut h = design.matrix.tr_mul(&weighted) / n;
        ridge_diagonal(design, &mut h);
        let step = design.solve(h, &g)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let candidate = &beta - &step * t;
            let value = design.objective(link, &candidate);
            if value <= objective {
                accepted = Some((candidate, value));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        let Some((candidate, value)) = accepted else {
            // No descent along the Newton direction at machine precision.
            converged = g.norm() <= GRADIENT_TOL.sqrt();
            break;
        };
        beta = candidate;
        objective = value;
        trace.push(objective);
        if beta.iter().any(|b| b.abs() > COEFFICIENT_CAP) {
            warn!("logistic fit hit the coefficient cap {COEFFICIENT_CAP:e}; the classes look separable");
            beta.apply(|b| *b = b.clamp(-COEFFICIENT_CAP, COEFFICIENT_CAP));
            objective = design.objective(link, &beta);
            *trace.last_mut().expect("trace is nonempty") = objective;
            break;
        }
    }
    if !converged && iterations >= MAX_IRLS_ITERATIONS {
        warn!("IRLS stopped after {MAX_IRLS_ITERATIONS} iterations without reaching the gradient tolerance");
    }
    Ok((beta, trace, iterations, converged))
}

fn assemble(train: &Dataset, link: Link, levels: &[f64], beta: &DVector<f64>) -> Result<GlmModel> {
    let d = train.d();
    let model = GlmModel::new(link, train.feature_names().to_vec(), beta.rows(1, d).iter().copied().collect(), beta[0])?;
    if levels.is_empty() {
        Ok(model)
    } else {
        model.with_protected(levels.to_vec(), beta.rows(1 + d, levels.len() - 1).iter().copied().collect())
    }
}
