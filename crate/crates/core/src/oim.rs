//! Optimal interventional mixtures: fit a model with the protected attribute,
//! then average its counterfactual predictions over a mixing distribution
//! chosen to minimize training risk.

use log::warn;
use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::{clamp_probability, logit, sigmoid, Loss};
use crate::model::{fit_hypothesis, FittedModel, Hypothesis, TrainOptions};
use crate::predictor::{check_width, OutputKind, Predictor};

pub const MIXING_GRADIENT_TOL: f64 = 1e-8;
pub const MAX_MIXING_ITERATIONS: usize = 10_000;
pub const SIMPLEX_TOL: f64 = 1e-9;
/// Ridge used for GLM fits on repaired features, which are collinear with
/// the remaining columns when the repair model is linear.
pub const REPAIR_RIDGE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixingDistribution {
    pub support: Vec<f64>,
    pub weights: Vec<f64>,
}

impl MixingDistribution {
    pub fn new(support: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let m = Self { support, weights };
        m.validate()?;
        Ok(m)
    }

    pub fn uniform(support: Vec<f64>) -> Result<Self> {
        let k = support.len();
        Self::new(support, vec![1.0 / k as f64; k])
    }

    pub fn point_mass(support: Vec<f64>, level: f64) -> Result<Self> {
        let weights = support.iter().map(|&s| if s == level { 1.0 } else { 0.0 }).collect();
        Self::new(support, weights)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() || self.support.len() != self.weights.len() {
            return Err(Error::Contract(format!(
                "mixing distribution has {} levels and {} weights",
                self.support.len(),
                self.weights.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0)) {
            return Err(Error::Contract(format!("mixing weight {w} is negative")));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Contract(format!("mixing weights sum to {total}")));
        }
        Ok(())
    }

    pub fn weight_of(&self, level: f64) -> Option<f64> {
        self.support.iter().position(|&s| s == level).map(|k| self.weights[k])
    }
}

/// Whether counterfactual predictions of probability models are averaged as
/// probabilities or as logits. Real-valued models are unaffected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingScale {
    Output,
    #[default]
    Link,
}

/// Euclidean projection onto the probability simplex (sort-based).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if u - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// How the mixture is scored against the targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixingObjective {
    /// Squared error of the weighted average of the columns.
    Quadratic,
    /// NLL of the weighted average of probability columns.
    ProbabilityNll,
    /// NLL of the sigmoid of the weighted average of logit columns.
    LogitNll,
}

/// The mixing problem on precomputed counterfactual columns: row i, column k
/// holds the model's output at (x_i, z_k) on the scale being mixed.
#[derive(Debug, Clone)]
pub struct MixingProblem {
    pub columns: usize,
    pub values: Vec<f64>,
    pub targets: Vec<f64>,
    pub objective: MixingObjective,
}

#[derive(Debug, Clone)]
pub struct MixingSolution {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub gradient_mapping_norm: f64,
    pub converged: bool,
    /// The counterfactual columns did not depend on the level.
    pub flat: bool,
}

impl MixingProblem {
    pub fn new(columns: usize, values: Vec<f64>, targets: Vec<f64>, objective: MixingObjective) -> Result<Self> {
        if columns == 0 || values.len() != columns * targets.len() {
            return Err(Error::Shape(format!(
                "{} values for {} rows and {columns} columns",
                values.len(),
                targets.len()
            )));
        }
        if targets.is_empty() {
            return Err(Error::EmptyDataset("mixing needs at least one row".into()));
        }
        Ok(Self { columns, values, targets, objective })
    }

    fn n(&self) -> usize {
        self.targets.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.columns..(i + 1) * self.columns]
    }

    fn mix(&self, i: usize, w: &[f64]) -> f64 {
        self.row(i).iter().zip(w).map(|(v, w)| v * w).sum()
    }

    pub fn value(&self, w: &[f64]) -> f64 {
        let total: f64 = (0..self.n())
            .map(|i| {
                let m = self.mix(i, w);
                let y = self.targets[i];
                match self.objective {
                    MixingObjective::Quadratic => (y - m).powi(2),
                    MixingObjective::ProbabilityNll => Loss::Nll.value(y, m),
                    MixingObjective::LogitNll => Loss::Nll.value(y, sigmoid(m)),
                }
            })
            .sum();
        total / self.n() as f64
    }

    pub fn gradient(&self, w: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.columns];
        for i in 0..self.n() {
            let m = self.mix(i, w);
            let y = self.targets[i];
            let slope = match self.objective {
                MixingObjective::Quadratic => 2.0 * (m - y),
                MixingObjective::ProbabilityNll => {
                    let p = clamp_probability(m);
                    (p - y) / (p * (1.0 - p))
                }
                MixingObjective::LogitNll => sigmoid(m) - y,
            };
            for (gk, v) in g.iter_mut().zip(self.row(i)) {
                *gk += slope * v;
            }
        }
        let n = self.n() as f64;
        g.iter_mut().for_each(|v| *v /= n);
        g
    }

    fn is_flat(&self) -> bool {
        (0..self.n()).all(|i| {
            let r = self.row(i);
            r.iter().all(|v| (v - r[0]).abs() <= 1e-12 * (1.0 + r[0].abs()))
        })
    }

    /// Minimizes the objective over the simplex by projected gradient descent.
    pub fn solve(&self) -> MixingSolution {
        let k = self.columns;
        let uniform = vec![1.0 / k as f64; k];
        if k == 1 || self.is_flat() {
            return MixingSolution {
                objective: self.value(&uniform),
                weights: uniform,
                iterations: 0,
                gradient_mapping_norm: 0.0,
                converged: true,
                flat: true,
            };
        }
        let mut solution = match self.objective {
            MixingObjective::Quadratic => self.solve_quadratic(&uniform),
            MixingObjective::ProbabilityNll | MixingObjective::LogitNll => self.solve_backtracking(&uniform),
        };
        if !solution.converged {
            warn!(
                "mixing optimization stopped after {} iterations with gradient-mapping norm {:.3e}",
                solution.iterations, solution.gradient_mapping_norm
            );
        }
        // Guard the returned point against the uniform mixture and the vertices.
        let mut candidates = vec![uniform];
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            candidates.push(e);
        }
        for c in candidates {
            let v = self.value(&c);
            if v < solution.objective {
                solution.objective = v;
                solution.weights = c;
            }
        }
        solution
    }

    fn solve_quadratic(&self, start: &[f64]) -> MixingSolution {
        let k = self.columns;
        let n = self.n() as f64;
        let mut gram = DMatrix::<f64>::zeros(k, k);
        let mut cross = vec![0.0; k];
        for i in 0..self.n() {
            let r = self.row(i);
            for a in 0..k {
                cross[a] += r[a] * self.targets[i] / n;
                for b in 0..k {
                    gram[(a, b)] += r[a] * r[b] / n;
                }
            }
        }
        let lipschitz = 2.0 * SymmetricEigen::new(gram.clone()).eigenvalues.max();
        let grad = |w: &[f64]| -> Vec<f64> {
            (0..k).map(|a| 2.0 * ((0..k).map(|b| gram[(a, b)] * w[b]).sum::<f64>() - cross[a])).collect()
        };
        let step = 1.0 / lipschitz;
        let mut w = start.to_vec();
        let mut norm = f64::INFINITY;
        let mut iterations = 0;
        while iterations < MAX_MIXING_ITERATIONS {
            let g = grad(&w);
            let next = project_simplex(&w.iter().zip(&g).map(|(w, g)| w - step * g).collect::<Vec<_>>());
            norm = w.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / step;
            w = next;
            iterations += 1;
            if norm <= MIXING_GRADIENT_TOL {
                break;
            }
        }
        MixingSolution {
            objective: self.value(&w),
            weights: w,
            iterations,
            gradient_mapping_norm: norm,
            converged: norm <= MIXING_GRADIENT_TOL,
            flat: false,
        }
    }

    fn solve_backtracking(&self, start: &[f64]) -> MixingSolution {
        let mut w = start.to_vec();
        let mut value = self.value(&w);
        let mut step: f64 = 1.0;
        let mut norm = f64::INFINITY;
        let mut iterations = 0;
        while iterations < MAX_MIXING_ITERATIONS {
            let g = self.gradient(&w);
            step = (step * 2.0).min(1e12);
            // Near the optimum the predicted decrease drops below the rounding
            // error of a mean over n rows. There the step is judged by the
            // curvature seen in the gradients instead of by the values.
            let noise = 64.0 * f64::EPSILON * value.abs().max(1.0);
            let (next, next_value) = loop {
                let next = project_simplex(&w.iter().zip(&g).map(|(w, g)| w - step * g).collect::<Vec<_>>());
                let diff: Vec<f64> = next.iter().zip(&w).map(|(a, b)| a - b).collect();
                let next_value = self.value(&next);
                let linear: f64 = g.iter().zip(&diff).map(|(g, d)| g * d).sum();
                let squared: f64 = diff.iter().map(|d| d * d).sum();
                let model = value + linear + squared / (2.0 * step);
                let accepted = if model - value < -noise {
                    next_value <= model
                } else {
                    let g_next = self.gradient(&next);
                    let curvature: f64 = g_next.iter().zip(&g).zip(&diff).map(|((a, b), d)| (a - b) * d).sum();
                    curvature <= squared / step
                };
                if accepted || step < 1e-20 {
                    break (next, next_value);
                }
                step *= 0.5;
            };
            norm = w.iter().zip(&next).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() / step;
            iterations += 1;
            if next_value <= value + noise {
                w = next;
                value = next_value.min(value);
            }
            if norm <= MIXING_GRADIENT_TOL || step < 1e-20 {
                break;
            }
        }
        MixingSolution {
            objective: value,
            weights: w,
            iterations,
            gradient_mapping_norm: norm,
            converged: norm <= MIXING_GRADIENT_TOL,
            flat: false,
        }
    }
}

fn mixing_objective(kind: OutputKind, loss: Loss, scale: MixingScale) -> Result<MixingObjective> {
    match (kind, loss, scale) {
        (OutputKind::Real, Loss::Quadratic, _) | (OutputKind::Probability, Loss::Quadratic, MixingScale::Output) => {
            Ok(MixingObjective::Quadratic)
        }
        (OutputKind::Probability, Loss::Nll, MixingScale::Output) => Ok(MixingObjective::ProbabilityNll),
        (OutputKind::Probability, Loss::Nll, MixingScale::Link) => Ok(MixingObjective::LogitNll),
        (OutputKind::Probability, Loss::Quadratic, MixingScale::Link) => Err(Error::Contract(
            "quadratic loss on logit-scale mixtures is not convex; use output-scale mixing".into(),
        )),
        (OutputKind::Real, Loss::Nll, _) => Err(Error::Contract("NLL needs a probability model".into())),
        (_, Loss::L1, _) => Err(Error::Contract("l1 is an evaluation loss only".into())),
    }
}

/// Counterfactual outputs of `model` at every support level, on the scale
/// that `scale` mixes.
fn counterfactual_values(model: &dyn Predictor, data: &Dataset, support: &[f64], scale: MixingScale) -> Result<Vec<f64>> {
    let on_link = scale == MixingScale::Link || model.output_kind() == OutputKind::Real;
    let mut values = Vec::with_capacity(data.n() * support.len());
    for x in data.rows() {
        for &z in support {
            values.push(if on_link { model.score(x, Some(z))? } else { model.predict(x, Some(z))? });
        }
    }
    Ok(values)
}

/// Empirical-risk-minimizing mixing distribution for a model fitted with
/// the protected attribute, using the default logit-scale mixing.
pub fn optimize_mixing(full_model: &dyn Predictor, train: &Dataset, loss: Loss) -> Result<MixingDistribution> {
    optimize_mixing_with(full_model, train, loss, MixingScale::default()).map(|(m, _)| m)
}

pub fn optimize_mixing_with(
    full_model: &dyn Predictor,
    train: &Dataset,
    loss: Loss,
    scale: MixingScale,
) -> Result<(MixingDistribution, MixingSolution)> {
    train.require_nonempty("optimize_mixing")?;
    if !full_model.uses_protected() {
        return Err(Error::Usage("the full model must be fitted with the protected attribute".into()));
    }
    let support = train.protected_levels();
    let objective = mixing_objective(full_model.output_kind(), loss, scale)?;
    let values = counterfactual_values(full_model, train, &support, scale)?;
    let problem = MixingProblem::new(support.len(), values, train.outcome().to_vec(), objective)?;
    let solution = problem.solve();
    let mixing = MixingDistribution::new(support, solution.weights.clone())?;
    Ok((mixing, solution))
}

/// Weighted average of the counterfactual predictions at `x`.
pub fn mixture_predict(full_model: &dyn Predictor, mixing: &MixingDistribution, x: &[f64], scale: MixingScale) -> Result<f64> {
    mixing.validate()?;
    let on_link = scale == MixingScale::Link && full_model.output_kind() == OutputKind::Probability;
    let mut total = 0.0;
    for (&z, &w) in mixing.support.iter().zip(&mixing.weights) {
        let v = if on_link { full_model.score(x, Some(z))? } else { full_model.predict(x, Some(z))? };
        total += w * v;
    }
    Ok(if on_link { sigmoid(total) } else { total })
}

/// Where the mixing distribution is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixingSplit {
    /// The same rows that fit the full model.
    #[default]
    Same,
    /// A random held-out fraction of the training rows.
    Holdout { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OimConfig {
    pub scale: MixingScale,
    pub mixing_split: MixingSplit,
    pub seed: u64,
    /// Ridge for GLM full models.
    pub ridge: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OimModel {
    pub full_model: FittedModel,
    pub mixing: MixingDistribution,
    #[serde(default)]
    pub scale: MixingScale,
}

impl OimModel {
    fn on_link(&self) -> bool {
        self.scale == MixingScale::Link || self.full_model.output_kind() == OutputKind::Real
    }
}

impl Predictor for OimModel {
    fn feature_count(&self) -> usize {
        self.full_model.feature_count()
    }

    fn uses_protected(&self) -> bool {
        false
    }

    fn output_kind(&self) -> OutputKind {
        self.full_model.output_kind()
    }

    fn score(&self, x: &[f64], _z: Option<f64>) -> Result<f64> {
        if self.on_link() {
            let mut total = 0.0;
            for (&z, &w) in self.mixing.support.iter().zip(&self.mixing.weights) {
                total += w * self.full_model.score(x, Some(z))?;
            }
            Ok(total)
        } else {
            Ok(logit(self.predict(x, None)?))
        }
    }

    fn predict(&self, x: &[f64], _z: Option<f64>) -> Result<f64> {
        mixture_predict(&self.full_model, &self.mixing, x, self.scale)
    }
}

#[derive(Debug, Clone)]
pub struct OimFit {
    pub model: OimModel,
    pub solution: MixingSolution,
    /// Mean training loss of the full model with the protected attribute.
    pub full_training_risk: f64,
}

pub fn oim_fit(train: &Dataset, hypothesis: &Hypothesis, config: &OimConfig) -> Result<OimFit> {
    train.require_nonempty("oim_fit")?;
    let levels = train.protected_levels();
    if levels.len() < 2 {
        return Err(Error::DegenerateProtected(format!("observed levels {levels:?}")));
    }
    let (fit_rows, mix_rows) = match config.mixing_split {
        MixingSplit::Same => (train.clone(), train.clone()),
        MixingSplit::Holdout { fraction } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::Config(format!("holdout fraction must lie in (0, 1), got {fraction}")));
            }
            let mut idx: Vec<usize> = (0..train.n()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(config.seed ^ 0x6d69_7869_6e67));
            let cut = ((1.0 - fraction) * train.n() as f64).round() as usize;
            let (a, b) = idx.split_at(cut);
            let fit_rows = train.subset(a);
            let mix_rows = train.subset(b);
            for part in [&fit_rows, &mix_rows] {
                if part.protected_levels() != levels {
                    return Err(Error::DegenerateProtected("a split lost a protected level".into()));
                }
            }
            (fit_rows, mix_rows)
        }
    };
    let options = TrainOptions {
        seed: Some(config.seed),
        ridge: config.ridge,
    };
    let full = fit_hypothesis(&fit_rows, hypothesis, true, options)?;
    let loss = full.model.loss();
    let (mixing, solution) = optimize_mixing_with(&full.model, &mix_rows, loss, config.scale)?;
    Ok(OimFit {
        model: OimModel {
            full_model: full.model,
            mixing,
            scale: config.scale,
        },
        solution,
        full_training_risk: full.training_risk,
    })
}

/// Two-stage mixture for data whose feature `feature` was itself perturbed:
/// the first stage repairs that feature, the second predicts the outcome
/// from the repaired features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainedOimModel {
    pub feature: usize,
    pub stage1: OimModel,
    pub stage2: OimModel,
}

impl ChainedOimModel {
    pub fn repair(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_width(self.stage2.feature_count(), x)?;
        let rest: Vec<f64> = x.iter().enumerate().filter(|(j, _)| *j != self.feature).map(|(_, &v)| v).collect();
        let mut repaired = x.to_vec();
        repaired[self.feature] = self.stage1.predict(&rest, None)?;
        Ok(repaired)
    }
}

impl Predictor for ChainedOimModel {
    fn feature_count(&self) -> usize {
        self.stage2.feature_count()
    }

    fn uses_protected(&self) -> bool {
        false
    }

    fn output_kind(&self) -> OutputKind {
        self.stage2.output_kind()
    }

    fn score(&self, x: &[f64], _z: Option<f64>) -> Result<f64> {
        self.stage2.score(&self.repair(x)?, None)
    }

    fn predict(&self, x: &[f64], _z: Option<f64>) -> Result<f64> {
        self.stage2.predict(&self.repair(x)?, None)
    }
}

#[derive(Debug, Clone)]
pub struct ChainedOimFit {
    pub model: ChainedOimModel,
    /// Stage-1 predictions of the perturbed feature on the training rows.
    pub repaired_column: Vec<f64>,
}

pub fn chained_oim(
    train: &Dataset,
    perturbed_feature: usize,
    stage1: &Hypothesis,
    stage2: &Hypothesis,
    config: &OimConfig,
) -> Result<ChainedOimFit> {
    if let Some(marked) = train.perturbed_feature() {
        if marked != perturbed_feature {
            return Err(Error::Usage(format!(
                "feature {perturbed_feature} requested but the dataset marks feature {marked} as perturbed"
            )));
        }
    }
    if perturbed_feature >= train.d() {
        return Err(Error::Shape(format!("feature index {perturbed_feature} out of range for {} features", train.d())));
    }
    if train.d() < 2 {
        return Err(Error::InsufficientCovariates(
            "the perturbed feature is the only feature; nothing is left to repair it from".into(),
        ));
    }
    let target = train.column(perturbed_feature);
    let stage1_data = train.drop_feature(perturbed_feature)?.with_outcome(target, OutcomeFamily::Continuous)?;
    let stage1_fit = oim_fit(&stage1_data, stage1, config)?;
    let repaired_column = stage1_data
        .rows()
        .map(|x| stage1_fit.model.predict(x, None))
        .collect::<Result<Vec<_>>>()?;
    let stage2_data = train.with_feature_column(perturbed_feature, &repaired_column)?;
    let stage2_config = OimConfig {
        ridge: config.ridge.max(REPAIR_RIDGE),
        seed: config.seed.wrapping_add(1),
        ..*config
    };
    let stage2_fit = oim_fit(&stage2_data, stage2, &stage2_config)?;
    Ok(ChainedOimFit {
        model: ChainedOimModel {
            feature: perturbed_feature,
            stage1: stage1_fit.model,
            stage2: stage2_fit.model,
        },
        repaired_column,
    })
}
