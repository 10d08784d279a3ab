use std::borrow::Borrow;
use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::kernels;
use super::model::{Architecture, ClassifierModel, DropoutMasks, DropoutRates, FeatureScaler, ModelConfig, Params};
use crate::error::{Error, Result};
use crate::types::{PairExample, RelationshipLabel};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout_rates: DropoutRates,
    pub seed: u64,
    /// Per-class loss multipliers; classes not listed weigh 1.
    pub class_weights: Option<BTreeMap<RelationshipLabel, f64>>,
    pub architecture: Architecture,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            learning_rate: 1e-3,
            dropout_rates: DropoutRates::default(),
            seed: 0,
            class_weights: None,
            architecture: Architecture::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(weights) = &self.class_weights {
            if let Some((label, w)) = weights.iter().find(|(_, w)| !(**w >= 0.0 && w.is_finite())) {
                return Err(Error::Config(format!("class weight for {label} is invalid: {w}")));
            }
        }
        Ok(())
    }

    fn weight_of(&self, label: RelationshipLabel) -> f64 {
        self.class_weights
            .as_ref()
            .and_then(|w| w.get(&label).copied())
            .unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    /// Accuracy of the dropout-perturbed predictions made during the epoch.
    pub accuracy: f64,
}

/// Adam moment estimates, shaped like the parameters.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    step: i32,
    lr: f64,
}

impl Adam {
    pub fn new(like: &Params, lr: f64) -> Self {
        let mut m = like.clone();
        m.zero();
        let v = m.clone();
        Self { m, v, step: 0, lr }
    }

    pub fn update(&mut self, params: &mut Params, grads: &Params) {
        self.step += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.step);
        let c2 = 1.0 - ADAM_BETA2.powi(self.step);
        let tensors = params
            .tensors_mut()
            .into_iter()
            .zip(grads.tensors())
            .zip(self.m.tensors_mut().into_iter().zip(self.v.tensors_mut()));
        for ((p, g), (m, v)) in tensors {
            for i in 0..p.data.len() {
                let gi = g.data[i];
                m.data[i] = ADAM_BETA1 * m.data[i] + (1.0 - ADAM_BETA1) * gi;
                v.data[i] = ADAM_BETA2 * v.data[i] + (1.0 - ADAM_BETA2) * gi * gi;
                let m_hat = m.data[i] / c1;
                let v_hat = v.data[i] / c2;
                p.data[i] -= self.lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
            }
        }
    }
}

/// Independent random streams derived from the training seed, so that changing
/// e.g. the number of epochs does not alter the initial weights.
fn stream(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const DROPOUT_STREAM: u64 = 3;

/// Mini-batch Adam on softmax cross-entropy. A pure function of the dataset
/// order, `classes`, and `config`.
pub fn train<E: Borrow<PairExample>>(
    dataset: &[E],
    classes: &[RelationshipLabel],
    config: &TrainConfig,
) -> Result<(ClassifierModel, Vec<EpochStats>)> {
    config.validate()?;
    let first = dataset
        .first()
        .ok_or_else(|| Error::Config("training set is empty".into()))?
        .borrow();
    let model_config = ModelConfig {
        matrix_size: first.matrix.size,
        pair_dim: first.features.vector.len(),
        architecture: config.architecture,
        dropout: config.dropout_rates,
        classes: classes.to_vec(),
    };
    model_config.validate()?;

    let mut targets = Vec::with_capacity(dataset.len());
    for ex in dataset {
        let ex = ex.borrow();
        if ex.matrix.size != model_config.matrix_size || ex.features.vector.len() != model_config.pair_dim {
            return Err(Error::Shape(format!(
                "example {} / {} was featurized at a different size than the rest",
                ex.left_id, ex.right_id
            )));
        }
        let t = classes
            .iter()
            .position(|&c| c == ex.label)
            .ok_or_else(|| Error::Config(format!("label {} is not in the class list", ex.label)))?;
        targets.push(t);
    }

    let mut model = ClassifierModel::init(model_config, &mut stream(config.seed, INIT_STREAM), config.seed)?;
    model.scaler = FeatureScaler::fit(
        dataset.iter().map(|e| e.borrow().features.vector.as_slice()),
        model.config.pair_dim,
    );
    let mut shuffle_rng = stream(config.seed, SHUFFLE_STREAM);
    let mut dropout_rng = stream(config.seed, DROPOUT_STREAM);
    let mut adam = Adam::new(&model.params, config.learning_rate);
    let mut grads = Params::zeros(&model.config)?;
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let mut total_loss = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grads.zero();
            let mut weight_sum = 0.0;
            for &i in batch {
                let ex = dataset[i].borrow();
                let masks = DropoutMasks::sample(&model.config, &mut dropout_rng)?;
                let acts = model.forward_cached(&ex.matrix, &ex.features, Some(masks))?;
                let weight = config.weight_of(ex.label);
                let loss = ClassifierModel::loss(&acts, targets[i], weight);
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss { epoch, loss });
                }
                total_loss += loss;
                if kernels::argmax(&acts.probs) == targets[i] {
                    correct += 1;
                }
                model.backward(&acts, targets[i], weight, &mut grads);
                weight_sum += 1.0;
            }
            grads.scale(1.0 / weight_sum);
            adam.update(&mut model.params, &grads);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                loss: f64::NAN,
            });
        }
        let stats = EpochStats {
            epoch,
            mean_loss: total_loss / dataset.len() as f64,
            accuracy: correct as f64 / dataset.len() as f64,
        };
        log::debug!(
            "epoch {} loss {:.4} accuracy {:.3}",
            epoch + 1,
            stats.mean_loss,
            stats.accuracy
        );
        history.push(stats);
    }
    Ok((model, history))
}
