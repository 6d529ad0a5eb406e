//! Pointwise losses shared by training, mixing and evaluation.

use serde::{Deserialize, Serialize};

/// Probabilities are clamped to this distance from 0 and 1 before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// (u - y)^2
    Quadratic,
    /// Bernoulli negative log-likelihood of a probability prediction.
    Nll,
    /// |u - y|, evaluation only.
    L1,
}

impl Loss {
    pub fn value(self, target: f64, prediction: f64) -> f64 {
        match self {
            Loss::Quadratic => (target - prediction).powi(2),
            Loss::L1 => (target - prediction).abs(),
            Loss::Nll => {
                let p = clamp_probability(prediction);
                -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
            }
        }
    }

    pub fn mean(self, targets: &[f64], predictions: &[f64]) -> f64 {
        debug_assert_eq!(targets.len(), predictions.len());
        let total: f64 = targets.iter().zip(predictions).map(|(&t, &p)| self.value(t, p)).sum();
        total / targets.len() as f64
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Quadratic => "quadratic",
            Loss::Nll => "nll",
            Loss::L1 => "l1",
        }
    }
}

pub fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
}

pub fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    let p = clamp_probability(p);
    (p / (1.0 - p)).ln()
}
