use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::loss::{sigmoid, Loss};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputKind {
    Real,
    Probability,
}

impl OutputKind {
    /// The training loss that matches this output: quadratic for real values,
    /// negative log-likelihood for probabilities.
    pub fn natural_loss(self) -> Loss {
        match self {
            OutputKind::Real => Loss::Quadratic,
            OutputKind::Probability => Loss::Nll,
        }
    }
}

/// A fitted model that maps a feature row, and optionally a protected value,
/// to a prediction.
pub trait Predictor {
    fn feature_count(&self) -> usize;

    /// Whether predictions read the protected value.
    fn uses_protected(&self) -> bool;

    fn output_kind(&self) -> OutputKind;

    /// Pre-link value: the prediction itself for real outputs, the logit for
    /// probability outputs.
    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64>;

    fn predict(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        let s = self.score(x, z)?;
        Ok(match self.output_kind() {
            OutputKind::Real => s,
            OutputKind::Probability => sigmoid(s),
        })
    }

    fn loss(&self) -> Loss {
        self.output_kind().natural_loss()
    }
}

impl<P: Predictor + ?Sized> Predictor for Box<P> {
    fn feature_count(&self) -> usize {
        (**self).feature_count()
    }
    fn uses_protected(&self) -> bool {
        (**self).uses_protected()
    }
    fn output_kind(&self) -> OutputKind {
        (**self).output_kind()
    }
    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        (**self).score(x, z)
    }
    fn predict(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        (**self).predict(x, z)
    }
}

pub(crate) fn check_width(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::Shape(format!("model expects {expected} features, got {}", x.len())));
    }
    Ok(())
}

/// Predictions for every row of `data`, passing each row's protected value
/// to models that use it.
pub fn predict_dataset(model: &dyn Predictor, data: &Dataset) -> Result<Vec<f64>> {
    if data.d() != model.feature_count() {
        return Err(Error::Shape(format!(
            "model expects {} features, dataset has {}",
            model.feature_count(),
            data.d()
        )));
    }
    let uses_z = model.uses_protected();
    data.rows()
        .zip(data.protected())
        .map(|(x, &z)| model.predict(x, uses_z.then_some(z)))
        .collect()
}

/// Converts probability (or real) predictions into 0/1 decisions at `threshold`.
pub fn decisions(predictions: &[f64], threshold: f64) -> Vec<bool> {
    predictions.iter().map(|&p| p >= threshold).collect()
}
