//! The named learners the harness compares: traditional fits with and
//! without the protected attribute, OIM, chained OIM, and equalized-odds
//! post-processing.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::model::{fit_hypothesis, FittedModel, Hypothesis, TrainOptions};
use crate::oim::{chained_oim, oim_fit, ChainedOimModel, OimConfig, OimModel};
use crate::predictor::{predict_dataset, OutputKind, Predictor};
use crate::loss::{logit, Loss};
use crate::metrics::{decision_probabilities, THRESHOLD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    Oim,
    TraditionalWithZ,
    TraditionalWithoutZ,
    EqOdds,
    ChainedOim,
}

impl Algorithm {
    pub const ALL: [Algorithm; 5] = [
        Algorithm::Oim,
        Algorithm::TraditionalWithZ,
        Algorithm::TraditionalWithoutZ,
        Algorithm::EqOdds,
        Algorithm::ChainedOim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Oim => "oim",
            Algorithm::TraditionalWithZ => "traditional-with-z",
            Algorithm::TraditionalWithoutZ => "traditional-without-z",
            Algorithm::EqOdds => "eq-odds",
            Algorithm::ChainedOim => "chained-oim",
        }
    }

    pub fn registered() -> String {
        Self::ALL.iter().map(|a| a.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|a| a.name() == name).ok_or_else(|| Error::UnknownAlgorithm {
            name: name.to_string(),
            registered: Self::registered(),
        })
    }
}

/// Everything a learner needs besides the training rows.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSettings {
    pub hypothesis: Hypothesis,
    pub oim: OimConfig,
    /// Hypothesis for the repair stage of chained OIM.
    pub repair_hypothesis: Hypothesis,
    /// Perturbed feature for chained OIM; falls back to the dataset's mark.
    pub perturbed_feature: Option<usize>,
}

impl AlgorithmSettings {
    pub fn new(hypothesis: Hypothesis) -> Self {
        Self {
            hypothesis,
            oim: OimConfig::default(),
            repair_hypothesis: Hypothesis::GlmIdentity,
            perturbed_feature: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.oim.seed = seed;
        self
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.oim.ridge = ridge;
        self
    }

    fn train_options(&self) -> TrainOptions {
        TrainOptions {
            seed: Some(self.oim.seed),
            ridge: self.oim.ridge,
        }
    }
}

/// A fitted model from any registered algorithm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "kebab-case")]
pub enum TrainedModel {
    Traditional { model: FittedModel },
    Oim { model: OimModel },
    ChainedOim { model: ChainedOimModel },
    EqOdds { rule: EqOddsRule },
}

impl TrainedModel {
    fn inner(&self) -> &dyn Predictor {
        match self {
            TrainedModel::Traditional { model } => model,
            TrainedModel::Oim { model } => model,
            TrainedModel::ChainedOim { model } => model,
            TrainedModel::EqOdds { rule } => rule,
        }
    }

    pub fn as_oim(&self) -> Option<&OimModel> {
        match self {
            TrainedModel::Oim { model } => Some(model),
            _ => None,
        }
    }

    /// Decisions on `data` as probabilities of a positive decision: the
    /// thresholded prediction, or the expected randomized decision of an
    /// equalized-odds rule.
    pub fn decisions(&self, data: &Dataset) -> Result<Vec<f64>> {
        let predictions = predict_dataset(self, data)?;
        Ok(match self {
            TrainedModel::EqOdds { .. } => predictions,
            _ => decision_probabilities(&predictions),
        })
    }
}

impl Predictor for TrainedModel {
    fn feature_count(&self) -> usize {
        self.inner().feature_count()
    }
    fn uses_protected(&self) -> bool {
        self.inner().uses_protected()
    }
    fn output_kind(&self) -> OutputKind {
        self.inner().output_kind()
    }
    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        self.inner().score(x, z)
    }
    fn predict(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        self.inner().predict(x, z)
    }
}

/// A fitted algorithm and its mean training loss, measured through the same
/// prediction path that evaluation uses.
#[derive(Debug, Clone)]
pub struct AlgorithmFit {
    pub algorithm: Algorithm,
    pub model: TrainedModel,
    pub training_risk: f64,
}

pub fn traditional(
    train: &Dataset,
    hypothesis: &Hypothesis,
    include_protected: bool,
    options: TrainOptions,
) -> Result<FittedModel> {
    Ok(fit_hypothesis(train, hypothesis, include_protected, options)?.model)
}

pub fn fit_algorithm(algorithm: Algorithm, train: &Dataset, settings: &AlgorithmSettings) -> Result<AlgorithmFit> {
    let model = match algorithm {
        Algorithm::TraditionalWithZ | Algorithm::TraditionalWithoutZ => TrainedModel::Traditional {
            model: traditional(
                train,
                &settings.hypothesis,
                algorithm == Algorithm::TraditionalWithZ,
                settings.train_options(),
            )?,
        },
        Algorithm::Oim => TrainedModel::Oim {
            model: oim_fit(train, &settings.hypothesis, &settings.oim)?.model,
        },
        Algorithm::ChainedOim => {
            let feature = settings.perturbed_feature.or(train.perturbed_feature()).ok_or_else(|| {
                Error::Usage("chained-oim needs a perturbed feature index".into())
            })?;
            TrainedModel::ChainedOim {
                model: chained_oim(train, feature, &settings.repair_hypothesis, &settings.hypothesis, &settings.oim)?
                    .model,
            }
        }
        Algorithm::EqOdds => {
            let base = traditional(train, &settings.hypothesis, true, settings.train_options())?;
            TrainedModel::EqOdds {
                rule: fit_eq_odds(base, train)?,
            }
        }
    };
    let predictions = predict_dataset(&model, train)?;
    let training_risk = model.loss().mean(train.outcome(), &predictions);
    Ok(AlgorithmFit {
        algorithm,
        model,
        training_risk,
    })
}

/// Group-specific randomization of a thresholded base classifier that
/// equalizes true- and false-positive rates across two protected groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EqOddsRule {
    pub levels: [f64; 2],
    /// P(keep a positive base decision) per group.
    pub keep_positive: [f64; 2],
    /// P(keep a negative base decision) per group.
    pub keep_negative: [f64; 2],
    pub base: FittedModel,
}

/// Per-group rates of the thresholded base classifier.
#[derive(Debug, Clone, Copy, PartialEq)]
struct GroupRates {
    tpr: f64,
    fpr: f64,
    /// Share of all rows that are positives / negatives of this group.
    pos_share: f64,
    neg_share: f64,
}

impl EqOddsRule {
    fn group(&self, z: f64) -> Result<usize> {
        self.levels
            .iter()
            .position(|&l| l == z)
            .ok_or_else(|| Error::Usage(format!("protected level {z} was not seen during calibration")))
    }

    /// Probability of a positive decision given the base decision and group.
    pub fn positive_probability(&self, base_positive: bool, z: f64) -> Result<f64> {
        let g = self.group(z)?;
        Ok(if base_positive {
            self.keep_positive[g]
        } else {
            1.0 - self.keep_negative[g]
        })
    }

    /// Samples 0/1 decisions for every row of `data` with a seeded generator.
    pub fn sample_decisions(&self, data: &Dataset, seed: u64) -> Result<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        predict_dataset(self, data)?
            .into_iter()
            .map(|p| Ok(f64::from(u8::from(rng.random::<f64>() < p))))
            .collect()
    }

    /// Expected (TPR, FPR) per group on `data`.
    pub fn expected_rates(&self, data: &Dataset) -> Result<[(f64, f64); 2]> {
        let p = predict_dataset(self, data)?;
        let mut acc = [[0.0f64; 4]; 2];
        for ((&pi, &z), &y) in p.iter().zip(data.protected()).zip(data.outcome()) {
            let g = self.group(z)?;
            let k = if y == 1.0 { 0 } else { 2 };
            acc[g][k] += pi;
            acc[g][k + 1] += 1.0;
        }
        Ok(acc.map(|a| (a[0] / a[1], a[2] / a[3])))
    }
}

impl Predictor for EqOddsRule {
    fn feature_count(&self) -> usize {
        self.base.feature_count()
    }

    fn uses_protected(&self) -> bool {
        true
    }

    fn output_kind(&self) -> OutputKind {
        OutputKind::Probability
    }

    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        Ok(logit(self.predict(x, z)?))
    }

    /// Expected decision: the probability that the randomized rule says yes.
    fn predict(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        let z = z.ok_or_else(|| Error::Usage("eq-odds decisions need the protected value".into()))?;
        let base_z = self.base.uses_protected().then_some(z);
        let positive = self.base.predict(x, base_z)? >= THRESHOLD;
        self.positive_probability(positive, z)
    }

    fn loss(&self) -> Loss {
        Loss::Nll
    }
}

/// Variables are (p0, q0, p1, q1): P(yes | base yes, g) and P(yes | base no, g).
fn post_rates(r: &GroupRates, p: f64, q: f64) -> (f64, f64) {
    (p * r.tpr + q * (1.0 - r.tpr), p * r.fpr + q * (1.0 - r.fpr))
}

fn eq_odds_lp(rates: &[GroupRates; 2]) -> [f64; 4] {
    // Expected error = sum_g pos_g (1 - TPR'_g) + neg_g FPR'_g, linear in v.
    let mut cost = [0.0; 4];
    for (g, r) in rates.iter().enumerate() {
        cost[2 * g] = -r.pos_share * r.tpr + r.neg_share * r.fpr;
        cost[2 * g + 1] = -r.pos_share * (1.0 - r.tpr) + r.neg_share * (1.0 - r.fpr);
    }
    // Equalities A v = 0: TPR'_0 - TPR'_1 and FPR'_0 - FPR'_1.
    let a = [
        [rates[0].tpr, 1.0 - rates[0].tpr, -rates[1].tpr, -(1.0 - rates[1].tpr)],
        [rates[0].fpr, 1.0 - rates[0].fpr, -rates[1].fpr, -(1.0 - rates[1].fpr)],
    ];
    let identity = [1.0, 0.0, 1.0, 0.0];
    let objective = |v: &[f64; 4]| cost.iter().zip(v).map(|(c, x)| c * x).sum::<f64>();
    let distance = |v: &[f64; 4]| v.iter().zip(&identity).map(|(x, i)| (x - i).abs()).sum::<f64>();

    let mut best: Option<([f64; 4], f64)> = None;
    let mut consider = |v: [f64; 4]| {
        if v.iter().any(|&x| !(-1e-12..=1.0 + 1e-12).contains(&x)) {
            return;
        }
        let v = v.map(|x| x.clamp(0.0, 1.0));
        if a.iter().any(|row| row.iter().zip(&v).map(|(c, x)| c * x).sum::<f64>().abs() > 1e-9) {
            return;
        }
        let f = objective(&v);
        let better = match &best {
            None => true,
            Some((b, fb)) => f < fb - 1e-12 || ((f - fb).abs() <= 1e-12 && distance(&v) < distance(b)),
        };
        if better {
            best = Some((v, f));
        }
    };

    // Every vertex fixes at least two variables at a bound; the rest solve
    // the two equalities.
    for mask in 0u32..16 {
        let fixed: Vec<usize> = (0..4).filter(|i| mask & (1 << i) != 0).collect();
        if fixed.len() < 2 {
            continue;
        }
        let free: Vec<usize> = (0..4).filter(|i| mask & (1 << i) == 0).collect();
        for bits in 0u32..(1 << fixed.len()) {
            let mut v = [0.0; 4];
            for (k, &i) in fixed.iter().enumerate() {
                v[i] = f64::from((bits >> k) & 1);
            }
            let rhs: Vec<f64> = a.iter().map(|row| -fixed.iter().map(|&i| row[i] * v[i]).sum::<f64>()).collect();
            match free.len() {
                0 => consider(v),
                1 => {
                    let i = free[0];
                    // Use the better-conditioned equation; `consider` checks both.
                    let r = if a[0][i].abs() >= a[1][i].abs() { 0 } else { 1 };
                    if a[r][i].abs() > 1e-12 {
                        v[i] = rhs[r] / a[r][i];
                        consider(v);
                    } else {
                        for bound in [0.0, 1.0] {
                            v[i] = bound;
                            consider(v);
                        }
                    }
                }
                _ => {
                    let (i, j) = (free[0], free[1]);
                    let det = a[0][i] * a[1][j] - a[0][j] * a[1][i];
                    if det.abs() > 1e-12 {
                        v[i] = (rhs[0] * a[1][j] - a[0][j] * rhs[1]) / det;
                        v[j] = (a[0][i] * rhs[1] - rhs[0] * a[1][i]) / det;
                        consider(v);
                    }
                }
            }
        }
    }
    // Rejecting everyone is always feasible, so some vertex exists.
    best.map(|(v, _)| v).unwrap_or([0.0; 4])
}

/// Calibrates an equalized-odds rule for `base` on `calibration`.
pub fn fit_eq_odds(base: FittedModel, calibration: &Dataset) -> Result<EqOddsRule> {
    calibration.require_nonempty("fit_eq_odds")?;
    if calibration.family() != OutcomeFamily::Binary {
        return Err(Error::Family("equalized odds needs a binary outcome".into()));
    }
    let levels = calibration.protected_levels();
    if levels.len() != 2 {
        return Err(Error::DegenerateGroup(format!(
            "equalized odds needs exactly two protected levels, found {levels:?}"
        )));
    }
    let uses_z = base.uses_protected();
    let n = calibration.n() as f64;
    let mut counts = [[0.0f64; 4]; 2]; // [tp, pos, fp, neg]
    for ((x, &z), &y) in calibration.rows().zip(calibration.protected()).zip(calibration.outcome()) {
        let g = usize::from(z == levels[1]);
        let yes = f64::from(u8::from(base.predict(x, uses_z.then_some(z))? >= THRESHOLD));
        let k = if y == 1.0 { 0 } else { 2 };
        counts[g][k] += yes;
        counts[g][k + 1] += 1.0;
    }
    let mut rates = [GroupRates {
        tpr: 0.0,
        fpr: 0.0,
        pos_share: 0.0,
        neg_share: 0.0,
    }; 2];
    for g in 0..2 {
        let [tp, pos, fp, neg] = counts[g];
        if pos == 0.0 || neg == 0.0 {
            return Err(Error::DegenerateGroup(format!(
                "group z={} has {pos} positives and {neg} negatives",
                levels[g]
            )));
        }
        rates[g] = GroupRates {
            tpr: tp / pos,
            fpr: fp / neg,
            pos_share: pos / n,
            neg_share: neg / n,
        };
    }
    let v = eq_odds_lp(&rates);
    for (g, r) in rates.iter().enumerate() {
        let (tpr, fpr) = post_rates(r, v[2 * g], v[2 * g + 1]);
        log::debug!("eq-odds group {}: tpr {:.4} -> {tpr:.4}, fpr {:.4} -> {fpr:.4}", levels[g], r.tpr, r.fpr);
    }
    Ok(EqOddsRule {
        levels: [levels[0], levels[1]],
        keep_positive: [v[0], v[2]],
        keep_negative: [1.0 - v[1], 1.0 - v[3]],
        base,
    })
}
