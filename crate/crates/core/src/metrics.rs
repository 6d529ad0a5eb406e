//! Cross-risk, resilience, disparities, relative utility and bootstrap
//! intervals.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::Loss;
use crate::predictor::{predict_dataset, OutputKind, Predictor};

/// Decision threshold on probabilities.
pub const THRESHOLD: f64 = 0.5;
/// Added to both sides of the resilience ratio when the reference risk is
/// (numerically) zero.
pub const RESILIENCE_EPSILON: f64 = 1e-9;

fn check_loss(reference: &Dataset, model: &dyn Predictor, loss: Loss) -> Result<()> {
    if loss == Loss::Nll {
        if reference.family() != OutcomeFamily::Binary {
            return Err(Error::Family("NLL needs a binary reference outcome".into()));
        }
        if model.output_kind() != OutputKind::Probability {
            return Err(Error::Family("NLL needs probability predictions".into()));
        }
    }
    Ok(())
}

/// Mean loss of `model` on the reference rows. Models that read the
/// protected attribute get each row's own value.
pub fn cross_risk(reference: &Dataset, model: &dyn Predictor, loss: Loss) -> Result<f64> {
    reference.require_nonempty("cross_risk")?;
    check_loss(reference, model, loss)?;
    let predictions = predict_dataset(model, reference)?;
    Ok(loss.mean(reference.outcome(), &predictions))
}

/// Cross-risk within each (z, y) group, keyed `z=<z>,y=<y>`.
pub fn group_cross_risks(reference: &Dataset, model: &dyn Predictor, loss: Loss) -> Result<BTreeMap<String, f64>> {
    check_loss(reference, model, loss)?;
    let predictions = predict_dataset(model, reference)?;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for ((&z, &y), &p) in reference.protected().iter().zip(reference.outcome()).zip(&predictions) {
        let e = sums.entry(group_key(z, y)).or_default();
        e.0 += loss.value(y, p);
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect())
}

pub fn group_key(z: f64, y: f64) -> String {
    format!("z={z},y={y}")
}

/// Reference risk over algorithm cross-risk, with the epsilon guard for a
/// zero reference risk.
pub fn resilience_ratio(reference_risk: f64, cross_risk: f64) -> f64 {
    if reference_risk < RESILIENCE_EPSILON {
        (reference_risk + RESILIENCE_EPSILON) / (cross_risk + RESILIENCE_EPSILON)
    } else {
        reference_risk / cross_risk
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Disparities {
    /// Gap in positive-decision rates. `None` when a group is empty.
    pub dd: Option<f64>,
    /// Gap in precision. `None` when a group has no positive decisions.
    pub ppd: Option<f64>,
    /// Gap in false-positive rates. `None` when a group has no negatives.
    pub fpd: Option<f64>,
}

/// Group gaps of decision rates. `decisions` holds the probability of a
/// positive decision per row (0/1 for deterministic rules); groups are the
/// two observed protected levels.
pub fn disparities(decisions: &[f64], labels: &[f64], z: &[f64]) -> Result<Disparities> {
    if decisions.len() != labels.len() || labels.len() != z.len() {
        return Err(Error::Shape(format!(
            "{} decisions, {} labels, {} protected values",
            decisions.len(),
            labels.len(),
            z.len()
        )));
    }
    let mut levels = z.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    if levels.len() > 2 {
        return Err(Error::Shape(format!("disparities need a binary protected attribute, got {} levels", levels.len())));
    }
    if levels.len() < 2 {
        return Ok(Disparities::default());
    }
    let rate = |level: f64, weight: &dyn Fn(usize) -> f64| -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for i in (0..z.len()).filter(|&i| z[i] == level) {
            let w = weight(i);
            num += w * decisions[i];
            den += w;
        }
        (den > 0.0).then(|| num / den)
    };
    let gap = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| (a - b).abs());
    let dd = gap(rate(levels[0], &|_| 1.0), rate(levels[1], &|_| 1.0));
    let fpd = gap(rate(levels[0], &|i| 1.0 - labels[i]), rate(levels[1], &|i| 1.0 - labels[i]));
    let precision = |level: f64| -> Option<f64> {
        let (mut num, mut den) = (0.0, 0.0);
        for i in (0..z.len()).filter(|&i| z[i] == level) {
            num += decisions[i] * labels[i];
            den += decisions[i];
        }
        (den > 0.0).then(|| num / den)
    };
    let ppd = gap(precision(levels[0]), precision(levels[1]));
    Ok(Disparities { dd, ppd, fpd })
}

/// Expected accuracy of decisions given as positive-decision probabilities.
pub fn accuracy(decisions: &[f64], labels: &[f64]) -> f64 {
    let hits: f64 = decisions.iter().zip(labels).map(|(&d, &y)| d * y + (1.0 - d) * (1.0 - y)).sum();
    hits / labels.len() as f64
}

/// Thresholded 0/1 decisions, as probabilities.
pub fn decision_probabilities(predictions: &[f64]) -> Vec<f64> {
    predictions.iter().map(|&p| f64::from(u8::from(p >= THRESHOLD))).collect()
}

pub fn relative_utility(reference_risk: f64, method_risk: f64) -> Result<f64> {
    if method_risk == 0.0 {
        if reference_risk == 0.0 {
            return Ok(1.0);
        }
        return Err(Error::Numeric("relative utility undefined: method risk is zero but reference risk is not".into()));
    }
    Ok(reference_risk / method_risk)
}

/// 1-based rank `fraction * count`, snapped to the nearest integer when it
/// is one up to rounding error.
fn percentile_rank(fraction: f64, count: usize, upper: bool) -> usize {
    let x = fraction * count as f64;
    let r = if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else if upper {
        x.floor()
    } else {
        x.ceil()
    };
    (r as usize).clamp(1, count)
}

/// Percentile interval of bootstrap resample means.
pub fn bootstrap_ci(values: &[f64], level: f64, resamples: usize, rng: &mut impl Rng) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyDataset("bootstrap needs at least one value".into()));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::Config(format!("invalid bootstrap level {level} or resample count {resamples}")));
    }
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = percentile_rank(tail, resamples, false);
    let hi = percentile_rank(1.0 - tail, resamples, true);
    Ok((means[lo - 1], means[hi - 1]))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mean loss on the evaluated rows themselves.
    pub risk: Option<f64>,
    pub cross_risk: Option<f64>,
    pub resilience: Option<f64>,
    pub accuracy: Option<f64>,
    pub dd: Option<f64>,
    pub ppd: Option<f64>,
    pub fpd: Option<f64>,
    pub relative_utility: Option<f64>,
    #[serde(default)]
    pub group_cross_risks: BTreeMap<String, f64>,
    /// Bootstrap interval per metric name.
    #[serde(default)]
    pub ci: BTreeMap<String, (f64, f64)>,
    /// Notes such as resilience outside [0, 1] or undefined disparities.
    #[serde(default)]
    pub flags: Vec<String>,
}

impl EvalReport {
    pub fn set_resilience(&mut self, omega: f64) {
        if !(0.0..=1.0).contains(&omega) {
            self.flags.push(format!("resilience {omega:.4} outside [0, 1]"));
        }
        self.resilience = Some(omega);
    }

    pub fn set_disparities(&mut self, d: Disparities) {
        for (name, v) in [("dd", d.dd), ("ppd", d.ppd), ("fpd", d.fpd)] {
            if v.is_none() {
                self.flags.push(format!("{name} undefined: empty conditioning group"));
            }
        }
        self.dd = d.dd;
        self.ppd = d.ppd;
        self.fpd = d.fpd;
    }

    /// Metric name and value pairs in a fixed order, skipping absent ones.
    pub fn metrics(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = [
            ("risk", self.risk),
            ("cross_risk", self.cross_risk),
            ("resilience", self.resilience),
            ("accuracy", self.accuracy),
            ("dd", self.dd),
            ("ppd", self.ppd),
            ("fpd", self.fpd),
            ("relative_utility", self.relative_utility),
        ]
        .into_iter()
        .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
        .collect();
        out.extend(self.group_cross_risks.iter().map(|(k, v)| (format!("cross_risk[{k}]"), *v)));
        out
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<28} {:>12} {:>26}", "metric", "value", "95% ci");
        for (name, v) in self.metrics() {
            let ci = self.ci.get(&name).map(|(a, b)| format!("[{a:.6}, {b:.6}]")).unwrap_or_default();
            let _ = writeln!(s, "{name:<28} {v:>12.6} {ci:>26}");
        }
        for f in &self.flags {
            let _ = writeln!(s, "note: {f}");
        }
        s
    }
}
