//! A three-hidden-layer ReLU network trained by mini-batch SGD with momentum.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, OutcomeFamily};
use crate::error::{Error, Result};
use crate::loss::sigmoid;
use crate::predictor::{check_width, OutputKind, Predictor};

pub const HIDDEN_LAYERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16, 16],
            learning_rate: 0.01,
            momentum: 0.9,
            batch_size: 64,
            epochs: 200,
            seed: 0,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.len() != HIDDEN_LAYERS {
            return Err(Error::Config(format!(
                "the network has exactly {HIDDEN_LAYERS} hidden layers, got widths {:?}",
                self.hidden
            )));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum must lie in [0, 1), got {}", self.momentum)));
        }
        Ok(())
    }
}

/// Dense layer, `weights` row-major with shape outputs x inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let mut layer = Self::zeros(inputs, outputs);
        for w in &mut layer.weights {
            *w = rng.random_range(-limit..limit);
        }
        layer
    }

    fn apply(&self, input: &[f64], out: &mut [f64], relu: bool) {
        for (o, slot) in out.iter_mut().enumerate() {
            let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let s = self.biases[o] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            *slot = if relu { s.max(0.0) } else { s };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub feature_names: Vec<String>,
    pub uses_protected: bool,
    pub output: OutputKind,
    /// Inputs are standardized with these before the first layer; the
    /// protected value, when used, is the last input.
    pub input_mean: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub layers: Vec<Layer>,
}

impl MlpModel {
    /// Network with all weights and biases zero.
    pub fn zeros(feature_names: Vec<String>, uses_protected: bool, hidden: &[usize], output: OutputKind) -> Self {
        let inputs = feature_names.len() + usize::from(uses_protected);
        let widths = layer_widths(inputs, hidden);
        Self {
            feature_names,
            uses_protected,
            output,
            input_mean: vec![0.0; inputs],
            input_scale: vec![1.0; inputs],
            layers: widths.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_mean.len()
    }

    /// Widths from input to the single output.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input_width()];
        w.extend(self.layers.iter().map(|l| l.outputs));
        w
    }

    fn encode(&self, x: &[f64], z: Option<f64>) -> Result<Vec<f64>> {
        check_width(self.feature_names.len(), x)?;
        let mut input = x.to_vec();
        if self.uses_protected {
            let z = z.ok_or_else(|| Error::Usage("model was trained with the protected attribute; supply z".into()))?;
            input.push(z);
        }
        for ((v, m), s) in input.iter_mut().zip(&self.input_mean).zip(&self.input_scale) {
            *v = (*v - m) / s;
        }
        Ok(input)
    }

    /// Forward pass on an encoded input, keeping every layer's output; the
    /// last entry holds the pre-link score.
    fn forward(&self, input: &[f64], acts: &mut Vec<Vec<f64>>) -> f64 {
        acts.resize(self.layers.len() + 1, Vec::new());
        acts[0].clear();
        acts[0].extend_from_slice(input);
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let (done, rest) = acts.split_at_mut(l + 1);
            rest[0].resize(layer.outputs, 0.0);
            layer.apply(&done[l], &mut rest[0], l != last);
        }
        acts[last + 1][0]
    }

    /// Accumulates `scale * d(score)/d(parameters)` into `grads` and returns
    /// d(score)/d(encoded input).
    fn backward(&self, acts: &[Vec<f64>], scale: f64, grads: &mut [Layer]) -> Vec<f64> {
        let mut delta = vec![scale];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let input = &acts[l];
            let g = &mut grads[l];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                g.biases[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &x) in row.iter_mut().zip(input) {
                    *gw += d * x;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if l > 0 {
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }

    fn zero_grads(&self) -> Vec<Layer> {
        self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect()
    }

    /// Derivative of the pointwise training loss with respect to the score.
    fn loss_slope(&self, score: f64, target: f64) -> f64 {
        match self.output {
            OutputKind::Probability => sigmoid(score) - target,
            OutputKind::Real => 2.0 * (score - target),
        }
    }

    fn pointwise_loss(&self, score: f64, target: f64) -> f64 {
        match self.output {
            // Stable form of the Bernoulli NLL on the logit scale.
            OutputKind::Probability => score.max(0.0) - score * target + (-score.abs()).exp().ln_1p(),
            OutputKind::Real => (score - target).powi(2),
        }
    }

    /// All weights and biases, layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum();
        if params.len() != total {
            return Err(Error::Shape(format!("{} parameters for a network with {total}", params.len())));
        }
        let mut it = params.iter().copied();
        for layer in &mut self.layers {
            layer.weights.iter_mut().chain(layer.biases.iter_mut()).for_each(|w| *w = it.next().unwrap_or_default());
        }
        Ok(())
    }

    /// Pointwise training loss at one example.
    pub fn example_loss(&self, x: &[f64], z: Option<f64>, target: f64) -> Result<f64> {
        Ok(self.pointwise_loss(self.score(x, z)?, target))
    }

    /// Gradient of [`MlpModel::example_loss`] in [`MlpModel::parameters`] order.
    pub fn parameter_gradient(&self, x: &[f64], z: Option<f64>, target: f64) -> Result<Vec<f64>> {
        let input = self.encode(x, z)?;
        let mut acts = Vec::new();
        let score = self.forward(&input, &mut acts);
        let mut grads = self.zero_grads();
        self.backward(&acts, self.loss_slope(score, target), &mut grads);
        Ok(grads.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect())
    }

    /// Gradient of the prediction (after the output link) with respect to the
    /// raw feature row.
    pub fn input_gradient(&self, x: &[f64], z: Option<f64>) -> Result<Vec<f64>> {
        let input = self.encode(x, z)?;
        let mut acts = Vec::new();
        let score = self.forward(&input, &mut acts);
        let link_slope = match self.output {
            OutputKind::Probability => {
                let p = sigmoid(score);
                p * (1.0 - p)
            }
            OutputKind::Real => 1.0,
        };
        let mut grads = self.zero_grads();
        let d = self.backward(&acts, link_slope, &mut grads);
        Ok(d.iter().zip(&self.input_scale).take(x.len()).map(|(g, s)| g / s).collect())
    }
}

impl Predictor for MlpModel {
    fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    fn uses_protected(&self) -> bool {
        self.uses_protected
    }

    fn output_kind(&self) -> OutputKind {
        self.output
    }

    fn score(&self, x: &[f64], z: Option<f64>) -> Result<f64> {
        let input = self.encode(x, z)?;
        let mut acts = Vec::new();
        Ok(self.forward(&input, &mut acts))
    }
}

fn layer_widths(inputs: usize, hidden: &[usize]) -> Vec<usize> {
    let mut w = vec![inputs];
    w.extend_from_slice(hidden);
    w.push(1);
    w
}

#[derive(Debug, Clone)]
pub struct MlpFit {
    pub model: MlpModel,
    /// Mean training loss of the initial network.
    pub initial_loss: f64,
    /// Mean training loss of the final network.
    pub final_loss: f64,
    /// Running average of the minibatch losses within each epoch.
    pub epoch_losses: Vec<f64>,
}

pub fn fit_mlp(train: &Dataset, config: &MlpConfig, include_protected: bool) -> Result<MlpFit> {
    config.validate()?;
    train.require_nonempty("fit_mlp")?;
    let output = match train.family() {
        OutcomeFamily::Binary => OutputKind::Probability,
        OutcomeFamily::Continuous => OutputKind::Real,
    };
    let n = train.n();
    let d = train.d();
    let inputs = d + usize::from(include_protected);
    if inputs == 0 {
        return Err(Error::InsufficientCovariates("the network needs at least one input".into()));
    }

    let encoded: Vec<Vec<f64>> = train
        .rows()
        .zip(train.protected())
        .map(|(x, &z)| {
            let mut r = x.to_vec();
            if include_protected {
                r.push(z);
            }
            r
        })
        .collect();
    let mut mean = vec![0.0; inputs];
    let mut scale = vec![0.0; inputs];
    for r in &encoded {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    for r in &encoded {
        for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
            *s += (v - m).powi(2) / n as f64;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let standardized: Vec<Vec<f64>> = encoded
        .iter()
        .map(|r| r.iter().zip(&mean).zip(&scale).map(|((v, m), s)| (v - m) / s).collect())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let widths = layer_widths(inputs, &config.hidden);
    let mut model = MlpModel {
        feature_names: train.feature_names().to_vec(),
        uses_protected: include_protected,
        output,
        input_mean: mean,
        input_scale: scale,
        layers: widths.windows(2).map(|w| Layer::glorot(w[0], w[1], &mut rng)).collect(),
    };

    let targets = train.outcome();
    let mut acts = Vec::new();
    let full_loss = |model: &MlpModel, acts: &mut Vec<Vec<f64>>| -> f64 {
        standardized
            .iter()
            .zip(targets)
            .map(|(x, &t)| model.pointwise_loss(model.forward(x, acts), t))
            .sum::<f64>()
            / n as f64
    };
    let initial_loss = full_loss(&model, &mut acts);

    let mut velocity = model.zero_grads();
    let mut grads = model.zero_grads();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(config.batch_size) {
            for g in &mut grads {
                g.weights.fill(0.0);
                g.biases.fill(0.0);
            }
            let inv = 1.0 / batch.len() as f64;
            for &i in batch {
                let score = model.forward(&standardized[i], &mut acts);
                total += model.pointwise_loss(score, targets[i]);
                let slope = model.loss_slope(score, targets[i]);
                model.backward(&acts, slope * inv, &mut grads);
            }
            for ((layer, v), g) in model.layers.iter_mut().zip(&mut velocity).zip(&grads) {
                let params = layer.weights.iter_mut().chain(layer.biases.iter_mut());
                let vel = v.weights.iter_mut().chain(v.biases.iter_mut());
                let grad = g.weights.iter().chain(&g.biases);
                for ((w, v), g) in params.zip(vel).zip(grad) {
                    *v = config.momentum * *v - config.learning_rate * g;
                    *w += *v;
                }
            }
        }
        let mean_loss = total / n as f64;
        if !mean_loss.is_finite() || model.parameters().iter().any(|w| !w.is_finite()) {
            return Err(Error::TrainingDivergence { epoch });
        }
        epoch_losses.push(mean_loss);
    }
    let final_loss = full_loss(&model, &mut acts);
    if !final_loss.is_finite() {
        return Err(Error::TrainingDivergence { epoch: config.epochs - 1 });
    }
    Ok(MlpFit {
        model,
        initial_loss,
        final_loss,
        epoch_losses,
    })
}
