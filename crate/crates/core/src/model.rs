//! Hypothesis classes and the fitted models they produce.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::Result;
use crate::glm::{fit_glm_with, GlmModel, GlmOptions, Link};
use crate::mlp::{fit_mlp, MlpConfig, MlpModel};
use crate::predictor::{OutputKind, Predictor};

/// Which model family a learner fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Hypothesis {
    GlmIdentity,
    GlmLogit,
    Mlp(MlpConfig),
}

impl Hypothesis {
    pub fn mlp() -> Self {
        Hypothesis::Mlp(MlpConfig::default())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Hypothesis::GlmIdentity => "glm-identity",
            Hypothesis::GlmLogit => "glm-logit",
            Hypothesis::Mlp(_) => "mlp",
        }
    }
}

/// Per-fit knobs that are not part of the hypothesis itself.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrainOptions {
    /// Overrides the MLP seed when set.
    pub seed: Option<u64>,
    /// Ridge penalty for GLM fits.
    pub ridge: f64,
}

impl TrainOptions {
    pub fn seeded(seed: u64) -> Self {
        Self { seed: Some(seed), ridge: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedModel {
    Glm(GlmModel),
    Mlp(MlpModel),
}

impl FittedModel {
    fn inner(&self) -> &dyn Predictor {
        match self {
            FittedModel::Glm(m) => m,
            FittedModel::Mlp(m) => m,
        }
    }

    pub fn as_glm(&self) -> Option<&GlmModel> {
        match self {
            FittedModel::Glm(m) => Some(m),
            FittedModel::Mlp(_) => None,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            FittedModel::Glm(m) => &m.feature_names,
            FittedModel::Mlp(m) => &m.feature_names,
        }
    }
}

impl Predictor for FittedModel {
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
}

/// A fitted model together with its mean training loss.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: FittedModel,
    pub training_risk: f64,
}

pub fn fit_hypothesis(
    train: &Dataset,
    hypothesis: &Hypothesis,
    include_protected: bool,
    options: TrainOptions,
) -> Result<Trained> {
    match hypothesis {
        Hypothesis::GlmIdentity | Hypothesis::GlmLogit => {
            let link = if *hypothesis == Hypothesis::GlmIdentity { Link::Identity } else { Link::Logit };
            let fit = fit_glm_with(train, link, include_protected, GlmOptions { ridge: options.ridge })?;
            Ok(Trained {
                model: FittedModel::Glm(fit.model),
                training_risk: fit.training_risk,
            })
        }
        Hypothesis::Mlp(config) => {
            let mut config = config.clone();
            if let Some(seed) = options.seed {
                config.seed = seed;
            }
            let fit = fit_mlp(train, &config, include_protected)?;
            Ok(Trained {
                model: FittedModel::Mlp(fit.model),
                training_risk: fit.final_loss,
            })
        }
    }
}
