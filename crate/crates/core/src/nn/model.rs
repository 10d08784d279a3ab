use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::kernels::{self, conv_out, pool_out};
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::simmat::{PairFeatures, SimilarityMatrix};
use crate::types::RelationshipLabel;

/// Layer widths. The defaults are the desk-scale architecture.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Architecture {
    pub conv1_filters: usize,
    pub conv2_filters: usize,
    pub kernel_size: usize,
    pub pair_hidden: usize,
    pub merge_hidden: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Self {
            conv1_filters: 8,
            conv2_filters: 16,
            kernel_size: 3,
            pair_hidden: 32,
            merge_hidden: 64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DropoutRates {
    /// Applied to the flattened convolution features.
    pub flat: f64,
    /// Applied to the pair-feature hidden layer.
    pub pair: f64,
}

impl Default for DropoutRates {
    fn default() -> Self {
        Self {
            flat: 0.5,
            pair: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub matrix_size: usize,
    pub pair_dim: usize,
    pub architecture: Architecture,
    pub dropout: DropoutRates,
    pub classes: Vec<RelationshipLabel>,
}

/// Derived layer sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Shapes {
    pub side: usize,
    pub conv1: usize,
    pub pool1: usize,
    pub conv2: usize,
    pub pool2: usize,
    pub flat: usize,
}

impl ModelConfig {
    pub fn shapes(&self) -> Result<Shapes> {
        let a = &self.architecture;
        let k = a.kernel_size;
        if k == 0 || self.matrix_size < k {
            return Err(Error::Config("matrix smaller than the convolution kernel".into()));
        }
        let conv1 = conv_out(self.matrix_size, k);
        let pool1 = pool_out(conv1);
        if pool1 < k {
            return Err(Error::Config(format!(
                "matrix size {} is too small for two convolution stages",
                self.matrix_size
            )));
        }
        let conv2 = conv_out(pool1, k);
        let pool2 = pool_out(conv2);
        if pool2 == 0 {
            return Err(Error::Config(format!(
                "matrix size {} is too small for two convolution stages",
                self.matrix_size
            )));
        }
        Ok(Shapes {
            side: self.matrix_size,
            conv1,
            pool1,
            conv2,
            pool2,
            flat: a.conv2_filters * pool2 * pool2,
        })
    }

    pub fn validate(&self) -> Result<Shapes> {
        let a = &self.architecture;
        if [a.conv1_filters, a.conv2_filters, a.pair_hidden, a.merge_hidden, self.pair_dim]
            .contains(&0)
        {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if self.classes.len() < 2 {
            return Err(Error::Config("a classifier needs at least two classes".into()));
        }
        for rate in [self.dropout.flat, self.dropout.pair] {
            if !(0.0..1.0).contains(&rate) {
                return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
            }
        }
        self.shapes()
    }
}

/// All trainable tensors, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub conv1_w: Tensor,
    pub conv1_b: Tensor,
    pub conv2_w: Tensor,
    pub conv2_b: Tensor,
    pub pair_w: Tensor,
    pub pair_b: Tensor,
    pub merge_w: Tensor,
    pub merge_b: Tensor,
    pub out_w: Tensor,
    pub out_b: Tensor,
}

impl Params {
    pub const NAMES: [&'static str; 10] = [
        "conv1.weight",
        "conv1.bias",
        "conv2.weight",
        "conv2.bias",
        "dense_pair.weight",
        "dense_pair.bias",
        "dense_merge.weight",
        "dense_merge.bias",
        "dense_out.weight",
        "dense_out.bias",
    ];

    pub fn zeros(config: &ModelConfig) -> Result<Self> {
        let s = config.validate()?;
        let a = &config.architecture;
        let k = a.kernel_size;
        let n_classes = config.classes.len();
        Ok(Params {
            conv1_w: Tensor::zeros(&[a.conv1_filters, 1, k, k]),
            conv1_b: Tensor::zeros(&[a.conv1_filters]),
            conv2_w: Tensor::zeros(&[a.conv2_filters, a.conv1_filters, k, k]),
            conv2_b: Tensor::zeros(&[a.conv2_filters]),
            pair_w: Tensor::zeros(&[a.pair_hidden, config.pair_dim]),
            pair_b: Tensor::zeros(&[a.pair_hidden]),
            merge_w: Tensor::zeros(&[a.merge_hidden, s.flat + a.pair_hidden]),
            merge_b: Tensor::zeros(&[a.merge_hidden]),
            out_w: Tensor::zeros(&[n_classes, a.merge_hidden]),
            out_b: Tensor::zeros(&[n_classes]),
        })
    }

    pub fn tensors(&self) -> [&Tensor; 10] {
        [
            &self.conv1_w,
            &self.conv1_b,
            &self.conv2_w,
            &self.conv2_b,
            &self.pair_w,
            &self.pair_b,
            &self.merge_w,
            &self.merge_b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 10] {
        [
            &mut self.conv1_w,
            &mut self.conv1_b,
            &mut self.conv2_w,
            &mut self.conv2_b,
            &mut self.pair_w,
            &mut self.pair_b,
            &mut self.merge_w,
            &mut self.merge_b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.is_finite())
    }

    pub fn zero(&mut self) {
        for t in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for t in self.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= factor);
        }
    }
}

/// Per-feature standardization of the pair-feature input, fitted on the
/// training set. Raw summed book vectors can be in the thousands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>, dim: usize) -> Self {
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        let mut sq = vec![0.0; dim];
        for row in rows {
            n += 1;
            for i in 0..dim {
                sum[i] += row[i];
                sq[i] += row[i] * row[i];
            }
        }
        if n == 0 {
            return Self::identity(dim);
        }
        let nf = n as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / nf).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| {
                let var = (q / nf - m * m).max(0.0);
                let sd = var.sqrt();
                if sd > 1e-12 * (1.0 + m.abs()) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Inverted-dropout multipliers: 0 for dropped units, `1 / keep` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    pub flat: Vec<f64>,
    pub pair: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample<R: RngCore + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        let s = config.shapes()?;
        let draw = |n: usize, rate: f64, rng: &mut R| -> Vec<f64> {
            let keep = 1.0 - rate;
            (0..n)
                .map(|_| if rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 })
                .collect()
        };
        let flat = draw(s.flat, config.dropout.flat, rng);
        let pair = draw(config.architecture.pair_hidden, config.dropout.pair, rng);
        Ok(Self { flat, pair })
    }
}

/// Intermediate values kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    input: Vec<f64>,
    conv1: Vec<f64>,
    pool1: Vec<f64>,
    pool1_arg: Vec<usize>,
    conv2: Vec<f64>,
    pool2_arg: Vec<usize>,
    pair_in: Vec<f64>,
    pair_hidden: Vec<f64>,
    merge_in: Vec<f64>,
    merge_out: Vec<f64>,
    masks: Option<DropoutMasks>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl Activations {
    /// Discrete decisions taken by the pass (ReLU gates and pooling winners).
    /// Finite differences are only meaningful while these stay fixed.
    pub fn pattern(&self) -> (Vec<bool>, Vec<usize>) {
        let gates = self
            .conv1
            .iter()
            .chain(&self.conv2)
            .chain(&self.pair_hidden)
            .chain(&self.merge_out)
            .map(|&v| v > 0.0)
            .collect();
        let winners = self.pool1_arg.iter().chain(&self.pool2_arg).copied().collect();
        (gates, winners)
    }
}

/// Two-branch classifier: a convolutional branch over the similarity matrix and
/// a dense branch over the pair features, merged by two dense layers.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierModel {
    pub config: ModelConfig,
    pub params: Params,
    pub scaler: FeatureScaler,
    pub rng_seed: u64,
}

impl ClassifierModel {
    /// Glorot-uniform weights and zero biases drawn from `rng`.
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R, rng_seed: u64) -> Result<Self> {
        let mut params = Params::zeros(&config)?;
        let k2 = config.architecture.kernel_size.pow(2);
        let mut glorot = |t: &mut Tensor, fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for x in t.data.iter_mut() {
                *x = rng.gen_range(-limit..limit);
            }
        };
        let a = config.architecture;
        glorot(&mut params.conv1_w, k2, a.conv1_filters * k2);
        glorot(&mut params.conv2_w, a.conv1_filters * k2, a.conv2_filters * k2);
        glorot(&mut params.pair_w, config.pair_dim, a.pair_hidden);
        let merge_in = params.merge_w.shape[1];
        glorot(&mut params.merge_w, merge_in, a.merge_hidden);
        glorot(&mut params.out_w, a.merge_hidden, config.classes.len());
        let scaler = FeatureScaler::identity(config.pair_dim);
        Ok(Self {
            config,
            params,
            scaler,
            rng_seed,
        })
    }

    pub fn class_index(&self, label: RelationshipLabel) -> Option<usize> {
        self.config.classes.iter().position(|&c| c == label)
    }

    fn check_inputs(&self, matrix: &SimilarityMatrix, pair: &PairFeatures) -> Result<()> {
        if matrix.size != self.config.matrix_size {
            return Err(Error::Shape(format!(
                "model expects {0}x{0} matrices, got {1}x{1}",
                self.config.matrix_size, matrix.size
            )));
        }
        if pair.vector.len() != self.config.pair_dim {
            return Err(Error::Shape(format!(
                "model expects {} pair features, got {}",
                self.config.pair_dim,
                pair.vector.len()
            )));
        }
        Ok(())
    }

    /// Class probabilities. Dropout is applied only when `dropout_rng` is given.
    pub fn forward(
        &self,
        matrix: &SimilarityMatrix,
        pair: &PairFeatures,
        dropout_rng: Option<&mut dyn RngCore>,
    ) -> Result<Vec<f64>> {
        let masks = match dropout_rng {
            Some(rng) => Some(DropoutMasks::sample(&self.config, rng)?),
            None => None,
        };
        Ok(self.forward_cached(matrix, pair, masks)?.probs)
    }

    /// Forward pass keeping every intermediate, with explicit dropout masks.
    pub fn forward_cached(
        &self,
        matrix: &SimilarityMatrix,
        pair: &PairFeatures,
        masks: Option<DropoutMasks>,
    ) -> Result<Activations> {
        self.check_inputs(matrix, pair)?;
        let s = self.config.shapes()?;
        let a = &self.config.architecture;
        let p = &self.params;
        let k = a.kernel_size;

        let input: Vec<f64> = matrix.values.iter().map(|&v| f64::from(v)).collect();
        let mut conv1 = kernels::conv2d_forward(
            &input,
            1,
            s.side,
            &p.conv1_w.data,
            &p.conv1_b.data,
            a.conv1_filters,
            k,
        );
        kernels::relu_in_place(&mut conv1);
        let (pool1, pool1_arg) = kernels::maxpool_forward(&conv1, a.conv1_filters, s.conv1);
        let mut conv2 = kernels::conv2d_forward(
            &pool1,
            a.conv1_filters,
            s.pool1,
            &p.conv2_w.data,
            &p.conv2_b.data,
            a.conv2_filters,
            k,
        );
        kernels::relu_in_place(&mut conv2);
        let (mut flat, pool2_arg) = kernels::maxpool_forward(&conv2, a.conv2_filters, s.conv2);

        let pair_in = self.scaler.apply(&pair.vector);
        let mut pair_hidden = kernels::dense_forward(&pair_in, &p.pair_w.data, &p.pair_b.data);
        kernels::relu_in_place(&mut pair_hidden);
        let mut pair_out = pair_hidden.clone();

        if let Some(m) = &masks {
            flat.iter_mut().zip(&m.flat).for_each(|(x, k)| *x *= k);
            pair_out.iter_mut().zip(&m.pair).for_each(|(x, k)| *x *= k);
        }
        let mut merge_in = flat;
        merge_in.extend_from_slice(&pair_out);
        let mut merge_out = kernels::dense_forward(&merge_in, &p.merge_w.data, &p.merge_b.data);
        kernels::relu_in_place(&mut merge_out);
        let logits = kernels::dense_forward(&merge_out, &p.out_w.data, &p.out_b.data);
        let probs = kernels::softmax(&logits);
        Ok(Activations {
            input,
            conv1,
            pool1,
            pool1_arg,
            conv2,
            pool2_arg,
            pair_in,
            pair_hidden,
            merge_in,
            merge_out,
            masks,
            logits,
            probs,
        })
    }

    /// Weighted cross-entropy of a cached pass.
    pub fn loss(acts: &Activations, target: usize, weight: f64) -> f64 {
        -weight * acts.probs[target].max(f64::MIN_POSITIVE).ln()
    }

    /// Accumulate the gradient of `weight * cross_entropy(target)` into `grads`.
    pub fn backward(&self, acts: &Activations, target: usize, weight: f64, grads: &mut Params) {
        let s = self.config.shapes().expect("validated at construction");
        let a = &self.config.architecture;
        let p = &self.params;
        let k = a.kernel_size;

        let mut d_logits = acts.probs.clone();
        d_logits[target] -= 1.0;
        d_logits.iter_mut().for_each(|g| *g *= weight);

        let mut d_merge_out = kernels::dense_backward(
            &acts.merge_out,
            &p.out_w.data,
            &d_logits,
            &mut grads.out_w.data,
            &mut grads.out_b.data,
        );
        kernels::relu_backward_in_place(&mut d_merge_out, &acts.merge_out);
        let mut d_merge_in = kernels::dense_backward(
            &acts.merge_in,
            &p.merge_w.data,
            &d_merge_out,
            &mut grads.merge_w.data,
            &mut grads.merge_b.data,
        );
        let mut d_pair = d_merge_in.split_off(s.flat);
        let mut d_flat = d_merge_in;
        if let Some(m) = &acts.masks {
            d_flat.iter_mut().zip(&m.flat).for_each(|(g, k)| *g *= k);
            d_pair.iter_mut().zip(&m.pair).for_each(|(g, k)| *g *= k);
        }

        kernels::relu_backward_in_place(&mut d_pair, &acts.pair_hidden);
        kernels::dense_backward(
            &acts.pair_in,
            &p.pair_w.data,
            &d_pair,
            &mut grads.pair_w.data,
            &mut grads.pair_b.data,
        );

        let mut d_conv2 = kernels::maxpool_backward(&d_flat, &acts.pool2_arg, acts.conv2.len());
        kernels::relu_backward_in_place(&mut d_conv2, &acts.conv2);
        let d_pool1 = kernels::conv2d_backward(
            &acts.pool1,
            a.conv1_filters,
            s.pool1,
            &p.conv2_w.data,
            a.conv2_filters,
            k,
            &d_conv2,
            &mut grads.conv2_w.data,
            &mut grads.conv2_b.data,
            true,
        )
        .expect("input gradient requested");
        let mut d_conv1 = kernels::maxpool_backward(&d_pool1, &acts.pool1_arg, acts.conv1.len());
        kernels::relu_backward_in_place(&mut d_conv1, &acts.conv1);
        kernels::conv2d_backward(
            &acts.input,
            1,
            s.side,
            &p.conv1_w.data,
            a.conv1_filters,
            k,
            &d_conv1,
            &mut grads.conv1_w.data,
            &mut grads.conv1_b.data,
            false,
        );
    }

    /// Gradients of the cross-entropy loss for one example, without dropout.
    pub fn gradients(
        &self,
        matrix: &SimilarityMatrix,
        pair: &PairFeatures,
        target: RelationshipLabel,
    ) -> Result<Params> {
        let t = self
            .class_index(target)
            .ok_or_else(|| Error::Config(format!("label {target} is not a model class")))?;
        let acts = self.forward_cached(matrix, pair, None)?;
        let mut grads = Params::zeros(&self.config)?;
        self.backward(&acts, t, 1.0, &mut grads);
        Ok(grads)
    }

    /// Most probable label, ties going to the earliest class.
    pub fn predict(&self, matrix: &SimilarityMatrix, pair: &PairFeatures) -> Result<(RelationshipLabel, Vec<f64>)> {
        let probs = self.forward(matrix, pair, None)?;
        Ok((self.config.classes[kernels::argmax(&probs)], probs))
    }
}
