//! Discrete-time Cox model with a linear or dense-network predictor and a
//! proportional (PH) or non-proportional (non-PH) hazard head.
//!
//! Hazards are `sigmoid(logit)` per interval. The PH head computes a single
//! scalar risk `g(x)` (one neuron, no bias) and adds per-interval baseline
//! biases `alpha_t` with a fixed unit weight, so covariates shift every
//! interval's logit by the same amount. The non-PH head is a fully connected
//! layer from the last hidden layer to `m` logits.
//!
//! The negative log-likelihood treats each interval a patient was at risk in
//! as a Bernoulli trial: intervals `0..=interval` contribute, and only the
//! last one is a success, and only if the event was observed.

mod optim;
mod params;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::survival::{survival_from_hazards, DiscreteLabel, StepFunction, TimeGrid};

pub use optim::{Optimizer, OptimizerKind};
pub use params::{Parameters, Tensor};
pub use train::{train_epoch, train_pooled, LocalTrainer, TrainSettings};

/// Logits are clamped to this range before the sigmoid and the log-loss.
pub const LOGIT_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// `beta^T x`; equivalent to a dense predictor without hidden layers.
    Linear,
    Dense { hidden: Vec<usize> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Ph,
    NonPh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
}

/// The three model families compared in the experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    LinearPh,
    NnPh,
    NnNonph,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::LinearPh, ModelKind::NnPh, ModelKind::NnNonph];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearPh => "linear-ph",
            ModelKind::NnPh => "nn-ph",
            ModelKind::NnNonph => "nn-nonph",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model `{s}`")))
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

pub const DEFAULT_HIDDEN: [usize; 2] = [32, 32];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub predictor: Predictor,
    pub head: Head,
    pub num_intervals: usize,
    pub input_dim: usize,
    #[serde(default)]
    pub activation: Activation,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(kind: ModelKind, input_dim: usize, num_intervals: usize, seed: u64) -> Self {
        let (predictor, head) = match kind {
            ModelKind::LinearPh => (Predictor::Linear, Head::Ph),
            ModelKind::NnPh => (Predictor::Dense { hidden: DEFAULT_HIDDEN.to_vec() }, Head::Ph),
            ModelKind::NnNonph => (Predictor::Dense { hidden: DEFAULT_HIDDEN.to_vec() }, Head::NonPh),
        };
        ModelConfig {
            predictor,
            head,
            num_intervals,
            input_dim,
            activation: Activation::Relu,
            seed,
        }
    }

    pub fn hidden_sizes(&self) -> &[usize] {
        match &self.predictor {
            Predictor::Linear => &[],
            Predictor::Dense { hidden } => hidden,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_intervals == 0 {
            return Err(Error::InvalidArgument("num_intervals must be at least 1".into()));
        }
        if self.input_dim == 0 {
            return Err(Error::InvalidArgument("input_dim must be at least 1".into()));
        }
        if self.hidden_sizes().contains(&0) {
            return Err(Error::InvalidArgument("hidden layers must be non-empty".into()));
        }
        Ok(())
    }

    /// Parameter tensors as `(name, shape, fan_in)` in storage order.
    fn layout(&self) -> Vec<(String, Vec<usize>, usize)> {
        let mut out = Vec::new();
        let mut fan_in = self.input_dim;
        for (l, &width) in self.hidden_sizes().iter().enumerate() {
            out.push((format!("hidden.{l}.weight"), vec![width, fan_in], fan_in));
            out.push((format!("hidden.{l}.bias"), vec![width], fan_in));
            fan_in = width;
        }
        let m = self.num_intervals;
        match self.head {
            Head::NonPh => {
                out.push(("head.weight".into(), vec![m, fan_in], fan_in));
                out.push(("head.bias".into(), vec![m], fan_in));
            }
            Head::Ph => {
                out.push(("head.risk".into(), vec![1, fan_in], fan_in));
                // baseline biases sit behind a fixed unit-weight input
                out.push(("head.baseline".into(), vec![m], 1));
            }
        }
        out
    }
}

/// Per-patient, per-interval hazards, every entry strictly inside `(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HazardMatrix {
    pub values: Array2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    /// Average over patients in the batch.
    #[default]
    Mean,
    /// Plain sum over patients; this is what adds up across centres.
    Sum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: ModelConfig,
    pub params: Parameters,
}

struct Cache {
    /// Inputs to each dense layer plus the last hidden activation.
    activations: Vec<Array2<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Array2<f64>>,
    /// Unclamped output logits, `n x m`.
    logits: Array2<f64>,
}

impl Model {
    /// Initializes every tensor from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`
    /// under `config.seed`.
    pub fn init(config: ModelConfig) -> Result<Model> {
        config.validate()?;
        let mut rng = rng::seeded(config.seed);
        let tensors = config
            .layout()
            .into_iter()
            .map(|(name, shape, fan_in)| {
                let bound = 1.0 / (fan_in as f64).sqrt();
                let len = shape.iter().product();
                let data = (0..len).map(|_| rng.gen_range(-bound..=bound)).collect();
                Tensor { name, shape, data }
            })
            .collect();
        Ok(Model {
            config,
            params: Parameters::new(tensors),
        })
    }

    /// A model of the given configuration with every parameter set to zero.
    pub fn zeros(config: ModelConfig) -> Result<Model> {
        let mut model = Model::init(config)?;
        model.params.map_inplace(|_| 0.0);
        Ok(model)
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.config.input_dim,
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    fn weight(&self, idx: usize) -> ArrayView2<'_, f64> {
        let t = &self.params.tensors[idx];
        ArrayView2::from_shape((t.shape[0], t.shape[1]), &t.data).expect("weight shape")
    }

    fn vector(&self, idx: usize) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params.tensors[idx].data[..])
    }

    fn forward_cached(&self, x: ArrayView2<f64>) -> Cache {
        let depth = self.config.hidden_sizes().len();
        let mut activations = Vec::with_capacity(depth + 1);
        let mut pre = Vec::with_capacity(depth);
        let mut a = x.to_owned();
        for l in 0..depth {
            let z = a.dot(&self.weight(2 * l).t()) + self.vector(2 * l + 1);
            activations.push(a);
            a = z.mapv(|v| v.max(0.0));
            pre.push(z);
        }
        let logits = match self.config.head {
            Head::NonPh => a.dot(&self.weight(2 * depth).t()) + self.vector(2 * depth + 1),
            Head::Ph => {
                let g = a.dot(&self.weight(2 * depth).t());
                &g + &self.vector(2 * depth + 1)
            }
        };
        activations.push(a);
        Cache {
            activations,
            pre,
            logits,
        }
    }

    /// Raw output logits (`n x m`), before clamping.
    pub fn logits(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        Ok(self.forward_cached(x).logits)
    }

    /// Scalar risk `g(x)` of a PH model (`None` for non-PH heads).
    pub fn risk_scores(&self, x: ArrayView2<f64>) -> Result<Option<Array1<f64>>> {
        self.check_input(&x)?;
        if self.config.head != Head::Ph {
            return Ok(None);
        }
        let depth = self.config.hidden_sizes().len();
        let cache = self.forward_cached(x);
        let g = cache.activations[depth].dot(&self.weight(2 * depth).t());
        Ok(Some(g.column(0).to_owned()))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<HazardMatrix> {
        let logits = self.logits(x)?;
        Ok(HazardMatrix {
            values: logits.mapv(|z| sigmoid(z.clamp(-LOGIT_CLAMP, LOGIT_CLAMP))),
        })
    }

    /// Mean negative log-likelihood over the rows of `x`.
    pub fn nll_loss(&self, x: ArrayView2<f64>, labels: &[DiscreteLabel]) -> Result<f64> {
        self.loss(x, labels, LossReduction::Mean)
    }

    /// Summed negative log-likelihood over the rows of `x`.
    pub fn nll_loss_sum(&self, x: ArrayView2<f64>, labels: &[DiscreteLabel]) -> Result<f64> {
        self.loss(x, labels, LossReduction::Sum)
    }

    pub fn loss(&self, x: ArrayView2<f64>, labels: &[DiscreteLabel], reduction: LossReduction) -> Result<f64> {
        self.check_labels(&x, labels)?;
        let logits = self.forward_cached(x).logits;
        Ok(nll_from_logits(&logits, labels, reduction).0)
    }

    fn check_labels(&self, x: &ArrayView2<f64>, labels: &[DiscreteLabel]) -> Result<()> {
        self.check_input(x)?;
        if labels.len() != x.nrows() {
            return Err(Error::DimensionMismatch {
                expected: x.nrows(),
                actual: labels.len(),
            });
        }
        if let Some(l) = labels.iter().find(|l| l.interval >= self.config.num_intervals) {
            return Err(Error::InvalidArgument(format!(
                "label interval {} outside a {}-interval model",
                l.interval, self.config.num_intervals
            )));
        }
        Ok(())
    }

    /// Loss and its exact gradient with respect to every parameter.
    pub fn gradient(
        &self,
        x: ArrayView2<f64>,
        labels: &[DiscreteLabel],
        reduction: LossReduction,
    ) -> Result<(f64, Parameters)> {
        self.check_labels(&x, labels)?;
        let cache = self.forward_cached(x);
        let (loss, d_logits) = nll_from_logits(&cache.logits, labels, reduction);

        let depth = self.config.hidden_sizes().len();
        let mut grads = self.params.zeros_like();
        let last = &cache.activations[depth];
        let mut d_act = match self.config.head {
            Head::NonPh => {
                grads.tensors[2 * depth].data = flat(d_logits.t().dot(last));
                grads.tensors[2 * depth + 1].data = d_logits.sum_axis(Axis(0)).to_vec();
                d_logits.dot(&self.weight(2 * depth))
            }
            Head::Ph => {
                grads.tensors[2 * depth + 1].data = d_logits.sum_axis(Axis(0)).to_vec();
                let d_g = d_logits.sum_axis(Axis(1)).insert_axis(Axis(1));
                grads.tensors[2 * depth].data = flat(d_g.t().dot(last));
                d_g.dot(&self.weight(2 * depth))
            }
        };
        for l in (0..depth).rev() {
            let mut d_pre = d_act;
            d_pre.zip_mut_with(&cache.pre[l], |d, &z| {
                if z <= 0.0 {
                    *d = 0.0;
                }
            });
            grads.tensors[2 * l].data = flat(d_pre.t().dot(&cache.activations[l]));
            grads.tensors[2 * l + 1].data = d_pre.sum_axis(Axis(0)).to_vec();
            d_act = d_pre.dot(&self.weight(2 * l));
        }
        Ok((loss, grads))
    }

    /// Survival curves on the grid cuts, one per row of `x`.
    pub fn predict_survival(&self, x: ArrayView2<f64>, grid: &TimeGrid) -> Result<Vec<StepFunction>> {
        if grid.m() != self.config.num_intervals {
            return Err(Error::DimensionMismatch {
                expected: self.config.num_intervals,
                actual: grid.m(),
            });
        }
        let hazards = self.forward(x)?;
        hazards
            .values
            .rows()
            .into_iter()
            .map(|h| StepFunction::survival(grid.cuts().to_vec(), survival_from_hazards(&h.to_vec())))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Model> {
        let model: Model = serde_json::from_str(s)?;
        let expected = Model::zeros(model.config.clone())?;
        model.params.check_same_shape(&expected.params)?;
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Model> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&s)
    }
}

fn flat(a: Array2<f64>) -> Vec<f64> {
    if a.is_standard_layout() {
        a.into_raw_vec_and_offset().0
    } else {
        a.iter().copied().collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

/// Bernoulli log-loss over the at-risk intervals and its derivative with
/// respect to the unclamped logits.
fn nll_from_logits(logits: &Array2<f64>, labels: &[DiscreteLabel], reduction: LossReduction) -> (f64, Array2<f64>) {
    let scale = match reduction {
        LossReduction::Mean => 1.0 / labels.len().max(1) as f64,
        LossReduction::Sum => 1.0,
    };
    let mut grad = Array2::zeros(logits.raw_dim());
    let mut total = 0.0;
    for (i, label) in labels.iter().enumerate() {
        let row = logits.row(i);
        let mut patient = 0.0;
        for j in 0..=label.interval {
            let raw = row[j];
            let z = raw.clamp(-LOGIT_CLAMP, LOGIT_CLAMP);
            let y = if label.event && j == label.interval { 1.0 } else { 0.0 };
            patient += softplus(z) - y * z;
            if raw.abs() <= LOGIT_CLAMP {
                grad[[i, j]] = (sigmoid(z) - y) * scale;
            }
        }
        total += patient;
    }
    (total * scale, grad)
}

#[cfg(test)]
mod tests;
