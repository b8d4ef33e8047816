//! Single-neuron perceptron: offline training and the all-digital reference
//! inference path.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

use crate::dataset::{DatasetSplit, Sample};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    Unconstrained,
    /// Weights are projected onto `w >= 0` after every step, so they can be
    /// carried as optical line powers.
    #[default]
    Nonnegative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub weight_mode: WeightMode,
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            epochs: 2000,
            seed: 0,
            weight_mode: WeightMode::Nonnegative,
            init_scale: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Domain(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Domain(format!(
                "init_scale must be >= 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainMeta {
    pub seed: u64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub final_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelDoc", into = "ModelDoc")]
pub struct PerceptronModel {
    weights: Vec<f64>,
    bias: f64,
    weight_mode: WeightMode,
    train_meta: Option<TrainMeta>,
}

impl PerceptronModel {
    pub fn new(weights: Vec<f64>, bias: f64, weight_mode: WeightMode) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Shape("model needs at least one weight".into()));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::Domain("model parameters must be finite".into()));
        }
        if weight_mode == WeightMode::Nonnegative {
            if let Some(k) = weights.iter().position(|&w| w < 0.0) {
                return Err(Error::Domain(format!(
                    "weight {k} is negative ({}) in a nonnegative model",
                    weights[k]
                )));
            }
        }
        Ok(Self {
            weights,
            bias,
            weight_mode,
            train_meta: None,
        })
    }

    pub fn with_meta(mut self, meta: TrainMeta) -> Self {
        self.train_meta = Some(meta);
        self
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weight_mode(&self) -> WeightMode {
        self.weight_mode
    }

    pub fn train_meta(&self) -> Option<&TrainMeta> {
        self.train_meta.as_ref()
    }

    /// Returns a copy with every weight multiplied by `factor` and the bias
    /// replaced.
    pub fn rescaled(&self, factor: f64, bias: f64) -> Result<Self> {
        let mut m = Self::new(
            self.weights.iter().map(|w| w * factor).collect(),
            bias,
            self.weight_mode,
        )?;
        m.train_meta = self.train_meta.clone();
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Format(format!("model JSON: {e}")))
    }
}

/// On-disk layout. Parameters are written with 17 significant digits.
#[derive(Serialize, Deserialize)]
struct ModelDoc {
    n: usize,
    #[serde(serialize_with = "ser_f64_vec_17", deserialize_with = "Vec::deserialize")]
    weights: Vec<f64>,
    #[serde(serialize_with = "ser_f64_17", deserialize_with = "f64::deserialize")]
    bias: f64,
    weight_mode: WeightMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    train_meta: Option<TrainMeta>,
}

fn raw_17(v: f64) -> Box<RawValue> {
    RawValue::from_string(format!("{v:.16e}")).expect("finite float is valid JSON")
}

fn ser_f64_17<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    raw_17(*v).serialize(s)
}

fn ser_f64_vec_17<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    v.iter().map(|&x| raw_17(x)).collect::<Vec<_>>().serialize(s)
}

impl From<PerceptronModel> for ModelDoc {
    fn from(m: PerceptronModel) -> Self {
        ModelDoc {
            n: m.weights.len(),
            weights: m.weights,
            bias: m.bias,
            weight_mode: m.weight_mode,
            train_meta: m.train_meta,
        }
    }
}

impl TryFrom<ModelDoc> for PerceptronModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.n != doc.weights.len() {
            return Err(Error::Shape(format!(
                "model declares n = {} but has {} weights",
                doc.n,
                doc.weights.len()
            )));
        }
        let mut m = PerceptronModel::new(doc.weights, doc.bias, doc.weight_mode)?;
        m.train_meta = doc.train_meta;
        Ok(m)
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

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn check_shapes(samples: &[Sample], n: usize) -> Result<()> {
    if let Some(s) = samples.iter().find(|s| s.features.len() != n) {
        return Err(Error::Shape(format!(
            "sample {} has {} features, expected {n}",
            s.id,
            s.features.len()
        )));
    }
    Ok(())
}

fn affine(weights: &[f64], bias: f64, x: &[f64]) -> f64 {
    weights.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() + bias
}

/// Mean binary cross-entropy of `sigmoid(X·W + b)` and its gradient
/// with respect to `(W, b)`.
pub fn loss_and_gradient(weights: &[f64], bias: f64, samples: &[Sample]) -> (f64, Vec<f64>, f64) {
    let m = samples.len() as f64;
    let mut loss = 0.0;
    let mut grad_w = vec![0.0; weights.len()];
    let mut grad_b = 0.0;
    for s in samples {
        let z = affine(weights, bias, &s.features);
        let y = f64::from(s.label);
        loss += softplus(z) - y * z;
        let residual = sigmoid(z) - y;
        for (g, x) in grad_w.iter_mut().zip(&s.features) {
            *g += residual * x;
        }
        grad_b += residual;
    }
    grad_w.iter_mut().for_each(|g| *g /= m);
    (loss / m, grad_w, grad_b / m)
}

pub fn train(split: &DatasetSplit, cfg: &TrainConfig) -> Result<PerceptronModel> {
    train_with_observer(&split.train, cfg, |_, _, _| {})
}

/// Full-batch gradient descent. `observer` sees `(epoch, weights, bias)`
/// after each update.
pub fn train_with_observer(
    samples: &[Sample],
    cfg: &TrainConfig,
    mut observer: impl FnMut(usize, &[f64], f64),
) -> Result<PerceptronModel> {
    cfg.validate()?;
    let n = samples
        .first()
        .map(|s| s.features.len())
        .ok_or_else(|| Error::EmptyInput("training set is empty".into()))?;
    check_shapes(samples, n)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * cfg.init_scale).collect();
    let mut bias = 0.0;

    for epoch in 0..cfg.epochs {
        let (loss, grad_w, grad_b) = loss_and_gradient(&weights, bias, samples);
        if !loss.is_finite() {
            return Err(Error::Divergence { epoch, loss });
        }
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= cfg.learning_rate * g;
            if cfg.weight_mode == WeightMode::Nonnegative {
                *w = w.max(0.0);
            }
        }
        bias -= cfg.learning_rate * grad_b;
        if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Divergence { epoch, loss });
        }
        observer(epoch, &weights, bias);
    }

    let (final_loss, _, _) = loss_and_gradient(&weights, bias, samples);
    if !final_loss.is_finite() {
        return Err(Error::Divergence {
            epoch: cfg.epochs,
            loss: final_loss,
        });
    }
    Ok(PerceptronModel::new(weights, bias, cfg.weight_mode)?.with_meta(TrainMeta {
        seed: cfg.seed,
        epochs: cfg.epochs,
        learning_rate: cfg.learning_rate,
        final_loss,
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub score: f64,
    pub class: u8,
}

/// Class 1 iff `score > 0`; a zero score is class 0.
pub fn decide(score: f64) -> u8 {
    u8::from(score > 0.0)
}

pub fn predict_digital(model: &PerceptronModel, sample: &Sample) -> Result<Prediction> {
    if sample.features.len() != model.n() {
        return Err(Error::Shape(format!(
            "sample {} has {} features, model expects {}",
            sample.id,
            sample.features.len(),
            model.n()
        )));
    }
    let score = affine(&model.weights, model.bias, &sample.features);
    Ok(Prediction {
        score,
        class: decide(score),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    /// `confusion[label][predicted]`.
    pub confusion: [[usize; 2]; 2],
}

impl Evaluation {
    /// Tallies `(label, predicted)` pairs.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (u8, u8)>) -> Result<Self> {
        let mut confusion = [[0usize; 2]; 2];
        for (label, pred) in pairs {
            confusion[usize::from(label.min(1))][usize::from(pred.min(1))] += 1;
        }
        let total: usize = confusion.iter().flatten().sum();
        if total == 0 {
            return Err(Error::EmptyInput("no samples to evaluate".into()));
        }
        Ok(Self {
            accuracy: (confusion[0][0] + confusion[1][1]) as f64 / total as f64,
            confusion,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }
}

pub fn evaluate(model: &PerceptronModel, samples: &[Sample]) -> Result<Evaluation> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("no samples to evaluate".into()));
    }
    let pairs = samples
        .iter()
        .map(|s| predict_digital(model, s).map(|p| (s.label, p.class)))
        .collect::<Result<Vec<_>>>()?;
    Evaluation::from_pairs(pairs)
}
