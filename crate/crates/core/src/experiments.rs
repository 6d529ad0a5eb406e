//! Scenario runners. Every run is split into units (one repeat of one
//! condition, or one repeat of a whole ensemble draw); each unit owns its
//! random stream and yields long-format rows that are aggregated at the end.
//!
//! Seeds: unit `(stream, repeat)` of a run with master seed `s` uses
//! `repeat_seed(s, stream, repeat)`, a splitmix64 chain, so any unit can be
//! re-run in isolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::warn;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_algorithm, Algorithm, AlgorithmSettings, TrainedModel};
use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::metrics::{
    accuracy, bootstrap_ci, cross_risk, disparities, group_cross_risks, relative_utility,
    resilience_ratio,
};
use crate::mlp::MlpConfig;
use crate::model::Hypothesis;
use crate::oim::MixingScale;
use crate::synthdata::{
    generate_pair, lipton_probability, lipton_scenario, random_correlation_matrix, sample_features,
    CorrelationMatrix, DatasetPair, Family, GroupSelector, NonlinearForm, OutcomeSpec, PerturbationSpec,
};
use crate::tabular::{load_csv, SchemaSpec};

/// Label of rows that mark a failed fit.
pub const FAILED: &str = "failed";
/// Label of the clean-trained reference model in label-flip results.
pub const REFERENCE: &str = "reference";
const SUMMARY_STREAM: u64 = u64::MAX;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn repeat_seed(master: u64, stream: u64, repeat: u64) -> u64 {
    splitmix64(master ^ splitmix64(stream ^ splitmix64(repeat)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    CorrSweep,
    GlmEnsemble,
    NonlinearEnsemble,
    MissingFeature,
    PerturbedX,
    Lipton,
    Labelflip,
    Realdata,
}

impl Scenario {
    pub const ALL: [Scenario; 8] = [
        Scenario::CorrSweep,
        Scenario::GlmEnsemble,
        Scenario::NonlinearEnsemble,
        Scenario::MissingFeature,
        Scenario::PerturbedX,
        Scenario::Lipton,
        Scenario::Labelflip,
        Scenario::Realdata,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::CorrSweep => "corr-sweep",
            Scenario::GlmEnsemble => "glm-ensemble",
            Scenario::NonlinearEnsemble => "nonlinear-ensemble",
            Scenario::MissingFeature => "missing-feature",
            Scenario::PerturbedX => "perturbed-x",
            Scenario::Lipton => "lipton",
            Scenario::Labelflip => "labelflip",
            Scenario::Realdata => "realdata",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|s| s.name()).collect();
            Error::Config(format!("unknown scenario `{name}`; known: {}", known.join(", ")))
        })
    }

    fn default_hypothesis(self) -> HypothesisKind {
        match self {
            Scenario::GlmEnsemble | Scenario::MissingFeature | Scenario::PerturbedX => HypothesisKind::GlmIdentity,
            Scenario::NonlinearEnsemble => HypothesisKind::Mlp,
            Scenario::CorrSweep | Scenario::Lipton | Scenario::Labelflip | Scenario::Realdata => {
                HypothesisKind::GlmLogit
            }
        }
    }

    fn default_repeats(self) -> usize {
        match self {
            Scenario::GlmEnsemble | Scenario::MissingFeature => 200,
            Scenario::CorrSweep | Scenario::NonlinearEnsemble | Scenario::PerturbedX => 100,
            Scenario::Lipton | Scenario::Labelflip => 20,
            Scenario::Realdata => 10,
        }
    }

    fn default_n(self) -> usize {
        match self {
            Scenario::Lipton => 1000,
            _ => 10_000,
        }
    }

    fn default_dim(self) -> usize {
        match self {
            Scenario::CorrSweep => 1,
            Scenario::Labelflip | Scenario::PerturbedX => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisKind {
    GlmIdentity,
    GlmLogit,
    Mlp,
}

impl HypothesisKind {
    pub const ALL: [HypothesisKind; 3] = [HypothesisKind::GlmIdentity, HypothesisKind::GlmLogit, HypothesisKind::Mlp];

    pub fn name(self) -> &'static str {
        match self {
            HypothesisKind::GlmIdentity => "glm-identity",
            HypothesisKind::GlmLogit => "glm-logit",
            HypothesisKind::Mlp => "mlp",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|h| h.name() == name).ok_or_else(|| {
            let known: Vec<_> = Self::ALL.iter().map(|h| h.name()).collect();
            Error::Config(format!("unknown hypothesis `{name}`; expected one of {}", known.join(", ")))
        })
    }

    /// The natural choice for an outcome family: logistic for binary labels,
    /// linear otherwise.
    pub fn for_family(family: OutcomeFamily) -> Self {
        match family {
            OutcomeFamily::Binary => HypothesisKind::GlmLogit,
            OutcomeFamily::Continuous => HypothesisKind::GlmIdentity,
        }
    }

    pub fn is_classification(self) -> bool {
        self != HypothesisKind::GlmIdentity
    }

    pub fn build(self, mlp: &MlpConfig) -> Hypothesis {
        match self {
            HypothesisKind::GlmIdentity => Hypothesis::GlmIdentity,
            HypothesisKind::GlmLogit => Hypothesis::GlmLogit,
            HypothesisKind::Mlp => Hypothesis::Mlp(mlp.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationKind {
    None,
    Direct,
    Induced,
}

impl PerturbationKind {
    fn name(self) -> &'static str {
        match self {
            PerturbationKind::None => "none",
            PerturbationKind::Direct => "direct",
            PerturbationKind::Induced => "induced",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NonlinearKind {
    Product,
    ExpProduct,
    SinProduct,
}

impl NonlinearKind {
    fn form(self, a1: f64, a2: f64) -> NonlinearForm {
        match self {
            NonlinearKind::Product => NonlinearForm::Product { a1 },
            NonlinearKind::ExpProduct => NonlinearForm::ExpProduct { a1, a2 },
            NonlinearKind::SinProduct => NonlinearForm::SinProduct { a1, a2 },
        }
    }
}

/// Scenario-specific knobs. Each scenario reads the ones it needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    /// Number of features (protected attribute excluded).
    pub dim: Option<usize>,
    /// Protected-effect sizes swept by corr-sweep.
    pub betas: Vec<f64>,
    /// Latent correlations between x1 and z swept by corr-sweep.
    pub correlations: Vec<f64>,
    /// Random coefficients are drawn from U[-range, range].
    pub coefficient_range: f64,
    pub noise_sd: f64,
    pub perturbations: Option<Vec<PerturbationKind>>,
    pub nonlinear_form: NonlinearKind,
    /// Also fit logistic versions of the algorithms in nonlinear-ensemble.
    pub misspecified: bool,
    /// Zero-based index of the feature withheld by missing-feature.
    pub removed_feature: usize,
    /// Zero-based index of the feature perturbed by perturbed-x.
    pub perturbed_feature: usize,
    /// Fixed protected effect on the perturbed feature; random when unset.
    pub x_beta: Option<f64>,
    /// Noise of the model that generates the perturbed feature.
    pub x_noise_sd: f64,
    pub flip_fraction: f64,
    pub flip_group: GroupSelector,
    /// Outcome coefficients for labelflip.
    pub coefficients: Option<Vec<f64>>,
    /// Latent correlation between the last feature and z in labelflip.
    pub proxy_correlation: f64,
    pub dataset: Option<PathBuf>,
    pub schema: Option<PathBuf>,
    pub test_fraction: f64,
    /// GLM ridge; realdata defaults to 1e-6 because one-hot columns are
    /// collinear with the intercept.
    pub ridge: Option<f64>,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        Self {
            dim: None,
            betas: vec![0.0, 5.0],
            correlations: vec![0.0, 0.15, 0.3, 0.45, 0.6, 0.75, 0.9],
            coefficient_range: 5.0,
            noise_sd: 1.0,
            perturbations: None,
            nonlinear_form: NonlinearKind::Product,
            misspecified: true,
            removed_feature: 1,
            perturbed_feature: 0,
            x_beta: None,
            x_noise_sd: 0.02,
            flip_fraction: 0.5,
            flip_group: GroupSelector { z: 1.0, y: 1.0 },
            coefficients: None,
            proxy_correlation: 0.5,
            dataset: None,
            schema: None,
            test_fraction: 0.3,
            ridge: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 1000,
            level: 0.95,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    #[serde(default)]
    pub hypothesis: Option<HypothesisKind>,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub repeats: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mixing_scale: MixingScale,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
}

impl ExperimentConfig {
    pub fn new(scenario: Scenario) -> Self {
        Self {
            scenario,
            hypothesis: None,
            mlp: MlpConfig::default(),
            algorithms: Vec::new(),
            n: None,
            repeats: None,
            seed: 0,
            mixing_scale: MixingScale::default(),
            params: ScenarioParams::default(),
            bootstrap: BootstrapConfig::default(),
        }
    }

    pub fn from_yaml_str(text: &str) -> Result<Self> {
        let config: Self = serde_yaml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads a config file; relative dataset and schema paths are taken
    /// relative to the file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut config = Self::from_yaml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut config.params.dataset, &mut config.params.schema].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn hypothesis_kind(&self) -> HypothesisKind {
        self.hypothesis.unwrap_or(self.scenario.default_hypothesis())
    }

    pub fn hypothesis(&self) -> Hypothesis {
        self.hypothesis_kind().build(&self.mlp)
    }

    pub fn n(&self) -> usize {
        self.n.unwrap_or(self.scenario.default_n())
    }

    pub fn repeats(&self) -> usize {
        self.repeats.unwrap_or(self.scenario.default_repeats())
    }

    pub fn dim(&self) -> usize {
        self.params.dim.unwrap_or(self.scenario.default_dim())
    }

    pub fn algorithms(&self) -> Vec<Algorithm> {
        if !self.algorithms.is_empty() {
            return self.algorithms.clone();
        }
        let mut out = Vec::new();
        if self.scenario == Scenario::PerturbedX {
            out.push(Algorithm::ChainedOim);
        }
        out.extend([Algorithm::Oim, Algorithm::TraditionalWithZ, Algorithm::TraditionalWithoutZ]);
        if self.hypothesis_kind().is_classification() && self.scenario != Scenario::PerturbedX {
            out.push(Algorithm::EqOdds);
        }
        out
    }

    pub fn perturbations(&self) -> Vec<PerturbationKind> {
        self.params.perturbations.clone().unwrap_or_else(|| match self.scenario {
            Scenario::NonlinearEnsemble => vec![PerturbationKind::None, PerturbationKind::Direct],
            _ => vec![PerturbationKind::None, PerturbationKind::Direct, PerturbationKind::Induced],
        })
    }

    fn ridge(&self) -> f64 {
        self.params.ridge.unwrap_or(if self.scenario == Scenario::Realdata { 1e-6 } else { 0.0 })
    }

    fn family(&self) -> Family {
        if self.hypothesis_kind().is_classification() {
            Family::BernoulliLogistic
        } else {
            Family::NormalIdentity
        }
    }

    fn loss(&self) -> Loss {
        if self.hypothesis_kind().is_classification() {
            Loss::Nll
        } else {
            Loss::Quadratic
        }
    }

    fn settings(&self, hypothesis: Hypothesis, seed: u64) -> AlgorithmSettings {
        let mut s = AlgorithmSettings::new(hypothesis).with_seed(seed).with_ridge(self.ridge());
        s.oim.scale = self.mixing_scale;
        s
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let fail = |m: String| Err(Error::Config(m));
        if self.repeats() == 0 {
            return fail("repeats must be at least 1".into());
        }
        if self.n() == 0 {
            return fail("n must be at least 1".into());
        }
        if self.hypothesis_kind() == HypothesisKind::Mlp {
            self.mlp.validate()?;
        }
        let algorithms = self.algorithms();
        let classification = self.hypothesis_kind().is_classification();
        if algorithms.contains(&Algorithm::EqOdds) && !classification {
            return fail("eq-odds needs a classification hypothesis (glm-logit or mlp)".into());
        }
        if algorithms.contains(&Algorithm::ChainedOim) && self.scenario != Scenario::PerturbedX {
            return fail("chained-oim only applies to the perturbed-x scenario".into());
        }
        if self.bootstrap.resamples == 0 || !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return fail("bootstrap needs resamples >= 1 and a level in (0, 1)".into());
        }
        let dim = self.dim();
        match self.scenario {
            Scenario::CorrSweep => {
                if p.betas.is_empty() || p.correlations.is_empty() {
                    return fail("corr-sweep needs nonempty betas and correlations".into());
                }
                if dim == 0 {
                    return fail("corr-sweep needs at least one feature".into());
                }
            }
            Scenario::GlmEnsemble | Scenario::MissingFeature | Scenario::NonlinearEnsemble => {
                if self.perturbations().is_empty() {
                    return fail("perturbation list is empty".into());
                }
                if dim == 0 {
                    return fail("need at least one feature".into());
                }
                if self.scenario == Scenario::MissingFeature {
                    if dim < 2 {
                        return fail("removing the only feature leaves nothing to train on".into());
                    }
                    if p.removed_feature >= dim {
                        return fail(format!("removed_feature {} out of range for {dim} features", p.removed_feature));
                    }
                }
                if self.scenario == Scenario::NonlinearEnsemble && dim < 2 {
                    return fail("the nonlinear forms need at least two features".into());
                }
            }
            Scenario::PerturbedX => {
                if dim < 2 {
                    return fail("perturbed-x needs at least two features".into());
                }
                if p.perturbed_feature >= dim {
                    return fail(format!("perturbed_feature {} out of range", p.perturbed_feature));
                }
            }
            Scenario::Lipton => {
                if !classification {
                    return fail("lipton needs a classification hypothesis".into());
                }
            }
            Scenario::Labelflip => {
                if !classification {
                    return fail("labelflip needs a classification hypothesis".into());
                }
                if !(0.0..=1.0).contains(&p.flip_fraction) {
                    return fail(format!("flip_fraction {} outside [0, 1]", p.flip_fraction));
                }
                if let Some(c) = &p.coefficients {
                    if c.len() != dim {
                        return fail(format!("{} coefficients for {dim} features", c.len()));
                    }
                }
            }
            Scenario::Realdata => {
                if p.dataset.is_none() || p.schema.is_none() {
                    return fail("realdata needs params.dataset and params.schema".into());
                }
                if !(p.test_fraction > 0.0 && p.test_fraction < 1.0) {
                    return fail(format!("test_fraction {} outside (0, 1)", p.test_fraction));
                }
            }
        }
        Ok(())
    }
}

/// One long-format result: a metric of one algorithm in one repeat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub condition: String,
    pub repeat: usize,
    pub algorithm: String,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub condition: String,
    pub algorithm: String,
    pub metric: String,
    /// Repeats contributing a value.
    pub repeats: usize,
    pub failures: usize,
    pub mean: f64,
    pub std: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub ci_method: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResults {
    pub scenario: Scenario,
    pub rows: Vec<ResultRow>,
    pub summary: Vec<SummaryRow>,
}

impl ExperimentResults {
    pub fn summary_row(&self, condition: &str, algorithm: &str, metric: &str) -> Option<&SummaryRow> {
        self.summary
            .iter()
            .find(|r| r.condition == condition && r.algorithm == algorithm && r.metric == metric)
    }

    pub fn mean(&self, condition: &str, algorithm: &str, metric: &str) -> Option<f64> {
        self.summary_row(condition, algorithm, metric).map(|r| r.mean)
    }

    /// Per-repeat values, in repeat order.
    pub fn values(&self, condition: &str, algorithm: &str, metric: &str) -> Vec<f64> {
        values_of(&self.rows, condition, algorithm, metric)
    }

    pub fn conditions(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.condition) {
                seen.push(r.condition.clone());
            }
        }
        seen
    }

    /// Sorted ratios Ω_a / Ω_OIM with their empirical CDF levels.
    pub fn cdf(&self, condition: &str, algorithm: &str) -> Vec<(f64, f64)> {
        let mut v = self.values(condition, algorithm, "ratio_to_oim");
        v.sort_by(f64::total_cmp);
        let n = v.len() as f64;
        v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
    }

    pub fn to_table(&self) -> String {
        summary_table(&self.summary)
    }
}

pub fn values_of(rows: &[ResultRow], condition: &str, algorithm: &str, metric: &str) -> Vec<f64> {
    let mut v: Vec<(usize, f64)> = rows
        .iter()
        .filter(|r| r.condition == condition && r.algorithm == algorithm && r.metric == metric)
        .map(|r| (r.repeat, r.value))
        .collect();
    v.sort_by_key(|(i, _)| *i);
    v.into_iter().map(|(_, x)| x).collect()
}

pub fn summary_table(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<28} {:<36} {:<22} {:>5} {:>4} {:>12} {:>12} {:>12} {:>12}",
        "condition", "algorithm", "metric", "n", "fail", "mean", "std", "ci_low", "ci_high"
    );
    for r in summary {
        let _ = writeln!(
            out,
            "{:<28} {:<36} {:<22} {:>5} {:>4} {:>12.6} {:>12.6} {:>12.6} {:>12.6}",
            r.condition, r.algorithm, r.metric, r.repeats, r.failures, r.mean, r.std, r.ci_low, r.ci_high
        );
    }
    if let Some(r) = summary.first() {
        let _ = writeln!(out, "intervals: {}", r.ci_method);
    }
    out
}

/// Aggregates long-format rows. Groups appear in first-seen row order.
pub fn summarize(rows: &[ResultRow], master_seed: u64, bootstrap: BootstrapConfig) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<(String, String, String)> = Vec::new();
    let mut groups: BTreeMap<(String, String, String), Vec<(usize, f64)>> = BTreeMap::new();
    let mut failures: BTreeMap<(String, String), usize> = BTreeMap::new();
    for r in rows {
        if r.metric == FAILED {
            *failures.entry((r.condition.clone(), r.algorithm.clone())).or_default() += 1;
        }
        let key = (r.condition.clone(), r.algorithm.clone(), r.metric.clone());
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Vec::new()
        });
        entry.push((r.repeat, r.value));
    }
    let method = format!(
        "percentile bootstrap of the mean, {} resamples, level {}",
        bootstrap.resamples, bootstrap.level
    );
    let mut out = Vec::with_capacity(order.len());
    for (k, key) in order.into_iter().enumerate() {
        let mut vals = groups.remove(&key).unwrap_or_default();
        vals.sort_by_key(|(i, _)| *i);
        let vals: Vec<f64> = vals.into_iter().map(|(_, v)| v).collect();
        let (condition, algorithm, metric) = key;
        let fails = failures.get(&(condition.clone(), algorithm.clone())).copied().unwrap_or(0);
        let finite: Vec<f64> = vals.iter().copied().filter(|v| v.is_finite()).collect();
        let n = finite.len();
        let (mean, std, lo, hi) = if n == 0 {
            (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
        } else {
            let mean = finite.iter().sum::<f64>() / n as f64;
            let std = if n > 1 {
                (finite.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            } else {
                0.0
            };
            let mut rng = ChaCha8Rng::seed_from_u64(repeat_seed(master_seed, SUMMARY_STREAM, k as u64));
            let (lo, hi) = bootstrap_ci(&finite, bootstrap.level, bootstrap.resamples, &mut rng)?;
            (mean, std, lo, hi)
        };
        out.push(SummaryRow {
            repeats: if metric == FAILED { 0 } else { n },
            failures: fails,
            condition,
            algorithm,
            metric,
            mean,
            std,
            ci_low: lo,
            ci_high: hi,
            ci_method: method.clone(),
        });
    }
    Ok(out)
}

/// One schedulable piece of work.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unit {
    pub index: usize,
    pub stream: u64,
    pub repeat: usize,
    /// Stable identifier, also used for checkpoint files.
    pub id: String,
}

/// Named datasets drawn for one condition of one unit.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub condition: String,
    pub files: Vec<(&'static str, Dataset)>,
}

/// A validated config together with any loaded input data.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    realdata: Option<(Dataset, String)>,
}

fn recoverable(e: &Error) -> bool {
    matches!(
        e,
        Error::TrainingDivergence { .. } | Error::RankDeficient(_) | Error::Numeric(_) | Error::DegenerateGroup(_)
    )
}

struct Sink {
    condition: String,
    repeat: usize,
    rows: Vec<ResultRow>,
}

impl Sink {
    fn new(condition: String, repeat: usize) -> Self {
        Self {
            condition,
            repeat,
            rows: Vec::new(),
        }
    }

    fn push(&mut self, algorithm: &str, metric: &str, value: f64) {
        self.rows.push(ResultRow {
            condition: self.condition.clone(),
            repeat: self.repeat,
            algorithm: algorithm.to_string(),
            metric: metric.to_string(),
            value,
        });
    }

    fn failed(&mut self, algorithm: &str, e: &Error) {
        warn!("{} repeat {}: {algorithm} failed: {e}", self.condition, self.repeat);
        self.push(algorithm, FAILED, 1.0);
    }
}

/// A labelled learner: an algorithm under a given hypothesis.
#[derive(Debug, Clone)]
struct Learner {
    label: String,
    algorithm: Algorithm,
    hypothesis: Hypothesis,
}

fn uniform_vec(rng: &mut ChaCha8Rng, len: usize, range: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-range..=range)).collect()
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let realdata = if config.scenario == Scenario::Realdata {
            let (data_path, schema_path) = (config.params.dataset.as_ref(), config.params.schema.as_ref());
            let (Some(data_path), Some(schema_path)) = (data_path, schema_path) else {
                return Err(Error::Config("realdata needs params.dataset and params.schema".into()));
            };
            let schema = SchemaSpec::from_path(schema_path)?;
            let data = load_csv(data_path, &schema)?;
            let levels = data.protected_levels();
            if levels.len() < 2 {
                return Err(Error::DegenerateProtected(format!(
                    "column `{}` takes the single value {levels:?}",
                    schema.protected.name
                )));
            }
            if data.family() != OutcomeFamily::Binary {
                return Err(Error::Family("realdata needs a binary outcome".into()));
            }
            let name = if schema.name.is_empty() {
                data_path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
            } else {
                schema.name.clone()
            };
            Some((data, name))
        } else {
            None
        };
        Ok(Self { config, realdata })
    }

    pub fn units(&self) -> Vec<Unit> {
        let c = &self.config;
        let mut units = Vec::new();
        let mut push = |stream: u64, repeat: usize, id: String| {
            units.push(Unit {
                index: units.len(),
                stream,
                repeat,
                id,
            })
        };
        if c.scenario == Scenario::CorrSweep {
            let mut stream = 0;
            for (bi, _) in c.params.betas.iter().enumerate() {
                for (ri, _) in c.params.correlations.iter().enumerate() {
                    for rep in 0..c.repeats() {
                        push(stream, rep, format!("b{bi:02}-r{ri:02}-rep{rep:04}"));
                    }
                    stream += 1;
                }
            }
        } else {
            for rep in 0..c.repeats() {
                push(0, rep, format!("rep{rep:04}"));
            }
        }
        units
    }

    fn learners(&self) -> Vec<Learner> {
        let hyp = self.config.hypothesis();
        let mut out: Vec<Learner> = self
            .config
            .algorithms()
            .into_iter()
            .map(|a| Learner {
                label: a.name().to_string(),
                algorithm: a,
                hypothesis: hyp.clone(),
            })
            .collect();
        if self.config.scenario == Scenario::NonlinearEnsemble && self.config.params.misspecified {
            for a in [Algorithm::Oim, Algorithm::TraditionalWithZ, Algorithm::TraditionalWithoutZ] {
                if self.config.algorithms().contains(&a) {
                    out.push(Learner {
                        label: format!("{}[glm-logit]", a.name()),
                        algorithm: a,
                        hypothesis: Hypothesis::GlmLogit,
                    });
                }
            }
        }
        out
    }

    pub fn run_unit(&self, unit: &Unit) -> Result<Vec<ResultRow>> {
        let seed = repeat_seed(self.config.seed, unit.stream, unit.repeat as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self.config.scenario {
            Scenario::CorrSweep => self.corr_sweep_unit(unit, &mut rng, seed),
            Scenario::GlmEnsemble | Scenario::NonlinearEnsemble | Scenario::MissingFeature => {
                self.ensemble_unit(unit, &mut rng, seed)
            }
            Scenario::PerturbedX => self.perturbed_x_unit(unit, &mut rng, seed),
            Scenario::Lipton => self.lipton_unit(unit, &mut rng, seed),
            Scenario::Labelflip => self.labelflip_unit(unit, &mut rng, seed),
            Scenario::Realdata => self.realdata_unit(unit, &mut rng, seed),
        }
    }

    /// The datasets `unit` trains and evaluates on, as named files: clean and
    /// perturbed pairs for synthetic scenarios, the observed sample for
    /// lipton, train and test splits for realdata.
    pub fn generate(&self, unit: &Unit) -> Result<Vec<GeneratedData>> {
        let seed = repeat_seed(self.config.seed, unit.stream, unit.repeat as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pair = |condition: String, pair: DatasetPair| GeneratedData {
            condition,
            files: vec![("clean", pair.clean), ("perturbed", pair.perturbed)],
        };
        Ok(match self.config.scenario {
            Scenario::CorrSweep => {
                let (condition, p) = self.corr_sweep_pair(unit, &mut rng)?;
                vec![pair(condition, p)]
            }
            Scenario::GlmEnsemble | Scenario::NonlinearEnsemble | Scenario::MissingFeature => self
                .ensemble_pairs(&mut rng)?
                .into_iter()
                .map(|(kind, p)| pair(format!("perturbation={}", kind.name()), p))
                .collect(),
            Scenario::PerturbedX => vec![pair("perturbation=feature".into(), self.perturbed_x_pair(&mut rng)?)],
            Scenario::Lipton => vec![GeneratedData {
                condition: "scenario=lipton".into(),
                files: vec![("data", lipton_scenario(self.config.n(), &mut rng)?)],
            }],
            Scenario::Labelflip => vec![pair(format!("q={}", self.config.params.flip_fraction), self.labelflip_pair(&mut rng)?)],
            Scenario::Realdata => {
                let (name, train, test) = self.realdata_split(&mut rng)?;
                vec![GeneratedData {
                    condition: format!("dataset={name}"),
                    files: vec![("train", train), ("test", test)],
                }]
            }
        })
    }

    /// Runs every unit on a pool of `jobs` threads (0 = rayon's default)
    /// and aggregates.
    pub fn run(&self, jobs: usize) -> Result<ExperimentResults> {
        let units = self.units();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::Config(format!("cannot build worker pool: {e}")))?;
        let per_unit: Vec<Result<Vec<ResultRow>>> = pool.install(|| units.par_iter().map(|u| self.run_unit(u)).collect());
        let mut rows = Vec::new();
        for r in per_unit {
            rows.extend(r?);
        }
        self.finish(rows)
    }

    pub fn finish(&self, rows: Vec<ResultRow>) -> Result<ExperimentResults> {
        let summary = summarize(&rows, self.config.seed, self.config.bootstrap)?;
        Ok(ExperimentResults {
            scenario: self.config.scenario,
            rows,
            summary,
        })
    }

    fn learner_seed(seed: u64, k: usize) -> u64 {
        splitmix64(seed ^ (0x5eed_0000 + k as u64))
    }

    /// Fits every learner on `train`, measures cross-risk on `eval` and
    /// resilience against `reference_risk`; returns the resilience per label.
    fn resilience_block(
        &self,
        sink: &mut Sink,
        reference_risk: f64,
        train: &Dataset,
        eval: &Dataset,
        seed: u64,
    ) -> Result<BTreeMap<String, f64>> {
        let loss = self.config.loss();
        let mut out = BTreeMap::new();
        for (k, learner) in self.learners().iter().enumerate() {
            let settings = self.config.settings(learner.hypothesis.clone(), Self::learner_seed(seed, k));
            let fitted = fit_algorithm(learner.algorithm, train, &settings)
                .and_then(|fit| Ok((cross_risk(eval, &fit.model, loss)?, fit)));
            match fitted {
                Ok((cr, _fit)) => {
                    let omega = resilience_ratio(reference_risk, cr);
                    sink.push(&learner.label, "cross_risk", cr);
                    sink.push(&learner.label, "resilience", omega);
                    out.insert(learner.label.clone(), omega);
                }
                Err(e) if recoverable(&e) => sink.failed(&learner.label, &e),
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    /// Clean-trained reference without the protected attribute and its risk
    /// on the clean rows.
    fn reference_risk(&self, clean: &Dataset, seed: u64) -> Result<f64> {
        let settings = self.config.settings(self.config.hypothesis(), Self::learner_seed(seed, usize::MAX >> 1));
        let fit = fit_algorithm(Algorithm::TraditionalWithoutZ, clean, &settings)?;
        cross_risk(clean, &fit.model, self.config.loss())
    }

    fn with_reference<F>(&self, sink: &mut Sink, clean: &Dataset, seed: u64, body: F) -> Result<()>
    where
        F: FnOnce(&mut Sink, f64) -> Result<()>,
    {
        match self.reference_risk(clean, seed) {
            Ok(r) => {
                sink.push(REFERENCE, "risk", r);
                body(sink, r)
            }
            Err(e) if recoverable(&e) => {
                for l in self.learners() {
                    sink.failed(&l.label, &e);
                }
                Ok(())
            }
            Err(e) => Err(e),
        }
    }

    fn corr_sweep_pair(&self, unit: &Unit, rng: &mut ChaCha8Rng) -> Result<(String, DatasetPair)> {
        let c = &self.config;
        let nr = c.params.correlations.len();
        let beta = c.params.betas[unit.stream as usize / nr];
        let r = c.params.correlations[unit.stream as usize % nr];
        let dim = c.dim();
        let sigma = CorrelationMatrix::with_pair(dim + 1, 0, dim, r)?;
        let sample = sample_features(c.n(), &sigma, rng)?;
        let mut coefficients = vec![0.0; dim];
        coefficients[0] = 1.0;
        let spec = OutcomeSpec {
            noise_sd: c.params.noise_sd,
            ..OutcomeSpec::linear(c.family(), coefficients)
        };
        let pair = generate_pair(&sample, &spec, &PerturbationSpec::Direct { beta, centered: false }, rng)?;
        Ok((format!("beta={beta};r={r}"), pair))
    }

    fn corr_sweep_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let (condition, pair) = self.corr_sweep_pair(unit, rng)?;
        let mut sink = Sink::new(condition, unit.repeat);
        self.with_reference(&mut sink, &pair.clean, seed, |sink, reference| {
            self.resilience_block(sink, reference, &pair.perturbed, &pair.clean, seed).map(|_| ())
        })?;
        Ok(sink.rows)
    }

    fn ensemble_pairs(&self, rng: &mut ChaCha8Rng) -> Result<Vec<(PerturbationKind, DatasetPair)>> {
        let c = &self.config;
        let dim = c.dim();
        let range = c.params.coefficient_range;
        let sigma = random_correlation_matrix(dim + 1, rng)?;
        let alpha = uniform_vec(rng, dim, range);
        let alpha_tilde = uniform_vec(rng, dim, range);
        let beta = rng.random_range(-range..=range);
        let (a1, a2) = (rng.random_range(-range..=range), rng.random_range(-range..=range));
        let sample = sample_features(c.n(), &sigma, rng)?;
        let spec = if c.scenario == Scenario::NonlinearEnsemble {
            OutcomeSpec {
                noise_sd: c.params.noise_sd,
                ..OutcomeSpec::nonlinear(c.family(), dim, c.params.nonlinear_form.form(a1, a2))
            }
        } else {
            OutcomeSpec {
                noise_sd: c.params.noise_sd,
                ..OutcomeSpec::linear(c.family(), alpha)
            }
        };
        let mut pairs = Vec::new();
        for kind in c.perturbations() {
            let perturbation = match kind {
                PerturbationKind::None => PerturbationSpec::None,
                PerturbationKind::Direct => PerturbationSpec::Direct { beta, centered: false },
                PerturbationKind::Induced => PerturbationSpec::Induced {
                    coefficients: alpha_tilde.clone(),
                },
            };
            pairs.push((kind, generate_pair(&sample, &spec, &perturbation, rng)?));
        }
        Ok(pairs)
    }

    fn ensemble_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let c = &self.config;
        let mut rows = Vec::new();
        for (kind, pair) in self.ensemble_pairs(rng)? {
            let mut sink = Sink::new(format!("perturbation={}", kind.name()), unit.repeat);
            let (train, eval) = if c.scenario == Scenario::MissingFeature {
                pair.without_training_feature(c.params.removed_feature)?
            } else {
                (pair.perturbed.clone(), pair.clean.clone())
            };
            let nonlinear = c.scenario == Scenario::NonlinearEnsemble;
            self.with_reference(&mut sink, &pair.clean, seed, |sink, reference| {
                let omegas = self.resilience_block(sink, reference, &train, &eval, seed)?;
                if nonlinear {
                    if let Some(&base) = omegas.get(Algorithm::Oim.name()) {
                        for (label, omega) in &omegas {
                            sink.push(label, "ratio_to_oim", omega / base);
                        }
                    }
                }
                Ok(())
            })?;
            rows.extend(sink.rows);
        }
        Ok(rows)
    }

    fn perturbed_x_pair(&self, rng: &mut ChaCha8Rng) -> Result<DatasetPair> {
        let c = &self.config;
        let dim = c.dim();
        let j = c.params.perturbed_feature;
        let range = c.params.coefficient_range;
        let sigma = random_correlation_matrix(dim + 1, rng)?;
        let alpha = uniform_vec(rng, dim, range);
        let gamma = uniform_vec(rng, dim - 1, range);
        let x_beta = match c.params.x_beta {
            Some(b) => b,
            None => rng.random_range(-range..=range),
        };
        let sample = sample_features(c.n(), &sigma, rng)?;
        let x_spec = OutcomeSpec {
            protected_coefficient: x_beta,
            noise_sd: c.params.x_noise_sd,
            ..OutcomeSpec::linear(Family::NormalIdentity, gamma)
        };
        let spec = OutcomeSpec {
            noise_sd: c.params.noise_sd,
            ..OutcomeSpec::linear(c.family(), alpha)
        };
        generate_pair(&sample, &spec, &PerturbationSpec::Feature { feature: j, spec: x_spec }, rng)
    }

    fn perturbed_x_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let pair = self.perturbed_x_pair(rng)?;
        let eval = pair.evaluation_view()?;
        let mut sink = Sink::new("perturbation=feature".to_string(), unit.repeat);
        self.with_reference(&mut sink, &pair.clean, seed, |sink, reference| {
            self.resilience_block(sink, reference, &pair.perturbed, &eval, seed).map(|_| ())
        })?;
        Ok(sink.rows)
    }

    fn lipton_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let data = lipton_scenario(self.config.n(), rng)?;
        let truth: Vec<f64> = data.rows().map(|x| lipton_probability(x[1])).collect();
        let perfect = Loss::Nll.mean(data.outcome(), &truth);
        let mut sink = Sink::new("scenario=lipton".to_string(), unit.repeat);
        sink.push(REFERENCE, "risk", perfect);
        for (k, learner) in self.learners().iter().enumerate() {
            let settings = self.config.settings(learner.hypothesis.clone(), Self::learner_seed(seed, k));
            let fit = match fit_algorithm(learner.algorithm, &data, &settings) {
                Ok(f) => f,
                Err(e) if recoverable(&e) => {
                    sink.failed(&learner.label, &e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            let risk = cross_risk(&data, &fit.model, Loss::Nll)?;
            sink.push(&learner.label, "risk", risk);
            sink.push(&learner.label, "relative_utility", relative_utility(perfect, risk)?);
            self.decision_metrics(&mut sink, &learner.label, &fit.model, &data)?;
            if let Some((hair, work, intercept)) = linear_boundary(&fit.model) {
                sink.push(&learner.label, "coef_hair", hair);
                sink.push(&learner.label, "abs_coef_hair", hair.abs());
                sink.push(&learner.label, "coef_work", work);
                if let Some(b) = intercept {
                    sink.push(&learner.label, "boundary_intercept", b);
                }
            }
        }
        Ok(sink.rows)
    }

    fn decision_metrics(&self, sink: &mut Sink, label: &str, model: &TrainedModel, eval: &Dataset) -> Result<()> {
        let decisions = model.decisions(eval)?;
        sink.push(label, "accuracy", accuracy(&decisions, eval.outcome()));
        let d = disparities(&decisions, eval.outcome(), eval.protected())?;
        for (name, v) in [("dd", d.dd), ("ppd", d.ppd), ("fpd", d.fpd)] {
            if let Some(v) = v {
                sink.push(label, name, v);
            }
        }
        Ok(())
    }

    fn labelflip_pair(&self, rng: &mut ChaCha8Rng) -> Result<DatasetPair> {
        let c = &self.config;
        let dim = c.dim();
        let coefficients = c.params.coefficients.clone().unwrap_or_else(|| {
            let mut v = vec![0.0; dim];
            v[0] = 2.0;
            if dim > 2 {
                v[1] = 1.0;
            }
            v
        });
        let sigma = CorrelationMatrix::with_pair(dim + 1, dim - 1, dim, c.params.proxy_correlation)?;
        let sample = sample_features(c.n(), &sigma, rng)?;
        let spec = OutcomeSpec::linear(Family::BernoulliLogistic, coefficients);
        let perturbation = PerturbationSpec::LabelFlip {
            group: c.params.flip_group,
            fraction: c.params.flip_fraction,
        };
        generate_pair(&sample, &spec, &perturbation, rng)
    }

    fn labelflip_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let c = &self.config;
        let pair = self.labelflip_pair(rng)?;
        let mut sink = Sink::new(format!("q={}", c.params.flip_fraction), unit.repeat);
        let mut candidates: Vec<(String, Result<TrainedModel>)> = Vec::new();
        let reference_settings = c.settings(c.hypothesis(), Self::learner_seed(seed, usize::MAX >> 1));
        candidates.push((
            REFERENCE.to_string(),
            fit_algorithm(Algorithm::TraditionalWithoutZ, &pair.clean, &reference_settings).map(|f| f.model),
        ));
        for (k, learner) in self.learners().iter().enumerate() {
            let settings = c.settings(learner.hypothesis.clone(), Self::learner_seed(seed, k));
            candidates.push((
                learner.label.clone(),
                fit_algorithm(learner.algorithm, &pair.perturbed, &settings).map(|f| f.model),
            ));
        }
        for (label, model) in candidates {
            let model = match model {
                Ok(m) => m,
                Err(e) if recoverable(&e) => {
                    sink.failed(&label, &e);
                    continue;
                }
                Err(e) => return Err(e),
            };
            sink.push(&label, "cross_risk", cross_risk(&pair.clean, &model, Loss::Nll)?);
            for (group, risk) in group_cross_risks(&pair.clean, &model, Loss::Nll)? {
                sink.push(&label, &format!("cross_risk[{group}]"), risk);
            }
            self.decision_metrics(&mut sink, &label, &model, &pair.clean)?;
        }
        Ok(sink.rows)
    }

    fn realdata_split(&self, rng: &mut ChaCha8Rng) -> Result<(String, Dataset, Dataset)> {
        let (data, name) = self.realdata.as_ref().ok_or_else(|| Error::Config("realdata input not loaded".into()))?;
        let (train, test) = stratified_split(data, self.config.params.test_fraction, rng)?;
        Ok((name.clone(), train, test))
    }

    fn realdata_unit(&self, unit: &Unit, rng: &mut ChaCha8Rng, seed: u64) -> Result<Vec<ResultRow>> {
        let (name, train, test) = self.realdata_split(rng)?;
        let mut sink = Sink::new(format!("dataset={name}"), unit.repeat);
        for (k, learner) in self.learners().iter().enumerate() {
            let settings = self.config.settings(learner.hypothesis.clone(), Self::learner_seed(seed, k));
            match fit_algorithm(learner.algorithm, &train, &settings) {
                Ok(fit) => self.decision_metrics(&mut sink, &learner.label, &fit.model, &test)?,
                Err(e) if recoverable(&e) => sink.failed(&learner.label, &e),
                Err(e) => return Err(e),
            }
        }
        Ok(sink.rows)
    }
}

/// Hair and work-experience coefficients of a model whose logit is linear
/// in the features, plus the z-free intercept when there is one.
fn linear_boundary(model: &TrainedModel) -> Option<(f64, f64, Option<f64>)> {
    let (glm, intercept) = match model {
        TrainedModel::Traditional { model } => {
            let glm = model.as_glm()?;
            let b = glm.protected_levels.is_empty().then_some(glm.intercept);
            (glm, b)
        }
        TrainedModel::Oim { model } => {
            let glm = model.full_model.as_glm()?;
            if model.scale != MixingScale::Link {
                return None;
            }
            let mut b = glm.intercept;
            for (&z, &w) in model.mixing.support.iter().zip(&model.mixing.weights) {
                b += w * glm.protected_effect(z).ok()?;
            }
            (glm, Some(b))
        }
        TrainedModel::EqOdds { rule } => (rule.base.as_glm()?, None),
        TrainedModel::ChainedOim { .. } => return None,
    };
    match glm.coefficients.as_slice() {
        [hair, work] => Some((*hair, *work, intercept)),
        _ => None,
    }
}

/// 70/30-style split stratified by the (z, y) cell.
pub fn stratified_split(data: &Dataset, test_fraction: f64, rng: &mut impl Rng) -> Result<(Dataset, Dataset)> {
    let mut cells: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, (&z, &y)) in data.protected().iter().zip(data.outcome()).enumerate() {
        cells.entry(((z * 1e6).round() as i64, (y * 1e6).round() as i64)).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (_, mut idx) in cells {
        idx.shuffle(rng);
        let k = (test_fraction * idx.len() as f64).round() as usize;
        test.extend_from_slice(&idx[..k]);
        train.extend_from_slice(&idx[k..]);
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset("split left an empty side".into()));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

fn run_checked(config: &ExperimentConfig, scenario: Scenario, jobs: usize) -> Result<ExperimentResults> {
    if config.scenario != scenario {
        return Err(Error::Config(format!(
            "config is for `{}`, not `{}`",
            config.scenario.name(),
            scenario.name()
        )));
    }
    Experiment::new(config.clone())?.run(jobs)
}

pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    Experiment::new(config.clone())?.run(jobs)
}

/// Mean resilience per (beta, correlation, algorithm).
pub fn run_corr_sweep(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::CorrSweep, jobs)
}

/// Mean resilience per (perturbation kind, algorithm) over random GLM draws.
pub fn run_glm_ensemble(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::GlmEnsemble, jobs)
}

/// Per-repeat resilience ratios to OIM; see [`ExperimentResults::cdf`].
pub fn run_nonlinear_ensemble(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::NonlinearEnsemble, jobs)
}

pub fn run_missing_feature(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::MissingFeature, jobs)
}

pub fn run_perturbed_x(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::PerturbedX, jobs)
}

/// Relative utility and decision-boundary coefficients per algorithm.
pub fn run_lipton(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::Lipton, jobs)
}

/// Group cross-risks and disparities against a clean-trained reference.
pub fn run_labelflip(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::Labelflip, jobs)
}

/// Accuracy and disparities on held-out splits of a real dataset.
pub fn run_realdata(config: &ExperimentConfig, jobs: usize) -> Result<ExperimentResults> {
    run_checked(config, Scenario::Realdata, jobs)
}
