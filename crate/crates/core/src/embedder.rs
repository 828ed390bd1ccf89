//! Feed-forward embedding network with an L2-normalized output.
//!
//! Hidden layers use a rectifier, the last layer is affine, and the output is
//! projected onto the unit sphere. Forward passes return a cache that
//! [`backward`] consumes to produce exact parameter gradients.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pre-normalization norms below this are treated as a collapsed state.
pub const MIN_PRE_NORM: f64 = 1e-12;

/// Affine layer, weight stored row-major as `out_dim x in_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Layer {
            in_dim,
            out_dim,
            weight: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weight
                .chunks_exact(self.in_dim)
                .zip(&self.bias)
                .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b),
        );
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedderParams {
    pub layers: Vec<Layer>,
}

/// Unit-norm output vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(Vec<f64>);

impl Embedding {
    /// Normalizes `v` onto the unit sphere.
    pub fn normalize(v: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&v);
        if norm.is_nan() || norm < MIN_PRE_NORM {
            return Err(Error::ZeroPreNormVector { norm, sample: None });
        }
        Ok(Embedding(v.into_iter().map(|x| x / norm).collect()))
    }

    /// Wraps a vector the caller guarantees is already unit-norm.
    pub fn from_unit(v: Vec<f64>) -> Self {
        Embedding(v)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn distance(&self, other: &Embedding) -> f64 {
        euclidean(&self.0, &other.0)
    }
}

impl AsRef<[f64]> for Embedding {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the raw feature vector.
    inputs: Vec<Vec<f64>>,
    /// Pre-activation output of each layer.
    pre: Vec<Vec<f64>>,
    pre_norm: f64,
    embedding: Embedding,
}

impl ForwardCache {
    pub fn embedding(&self) -> &Embedding {
        &self.embedding
    }

    pub fn pre_norm(&self) -> f64 {
        self.pre_norm
    }
}

/// Gradient buffers shaped like [`EmbedderParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientAccumulator {
    pub layers: Vec<Layer>,
}

impl GradientAccumulator {
    pub fn zeros_like(params: &EmbedderParams) -> Self {
        GradientAccumulator {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.in_dim, l.out_dim))
                .collect(),
        }
    }

    pub fn zero(&mut self) {
        for l in &mut self.layers {
            l.weight.fill(0.0);
            l.bias.fill(0.0);
        }
    }

    /// Every gradient entry, layer by layer, weights before biases.
    pub fn flat(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(&l.bias).copied())
            .collect()
    }
}

impl EmbedderParams {
    /// Xavier-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 || layer_dims.contains(&0) {
            return Err(Error::BadDims(layer_dims.to_vec()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weight = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..=bound))
                    .collect();
                Layer {
                    in_dim: fan_in,
                    out_dim: fan_out,
                    weight,
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(EmbedderParams { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    /// `[input, hidden..., output]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    /// Checks dimension chaining and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::BadDims(vec![]));
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::BadDims(self.dims()));
            }
            if l.weight.len() != l.in_dim * l.out_dim {
                return Err(Error::ShapeMismatch {
                    expected: l.in_dim * l.out_dim,
                    got: l.weight.len(),
                });
            }
            if l.bias.len() != l.out_dim {
                return Err(Error::ShapeMismatch {
                    expected: l.out_dim,
                    got: l.bias.len(),
                });
            }
            if i > 0 && self.layers[i - 1].out_dim != l.in_dim {
                return Err(Error::ShapeMismatch {
                    expected: self.layers[i - 1].out_dim,
                    got: l.in_dim,
                });
            }
            if !l.weight.iter().chain(&l.bias).all(|v| v.is_finite()) {
                return Err(Error::NonFinite("embedder parameters"));
            }
        }
        Ok(())
    }

    pub fn embed(&self, x: &[f64]) -> Result<Embedding> {
        self.forward(x).map(|c| c.embedding)
    }

    /// Forward pass keeping the intermediates needed by [`backward`].
    pub fn forward(&self, x: &[f64]) -> Result<ForwardCache> {
        if x.len() != self.input_dim() {
            return Err(Error::ShapeMismatch {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("input features"));
        }
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::with_capacity(layer.out_dim);
            layer.apply(&cur, &mut z);
            let next = if i < last {
                z.iter().map(|v| v.max(0.0)).collect()
            } else {
                z.clone()
            };
            inputs.push(std::mem::replace(&mut cur, next));
            pre.push(z);
        }
        let pre_norm = l2_norm(&cur);
        if pre_norm.is_nan() || pre_norm < MIN_PRE_NORM {
            return Err(Error::ZeroPreNormVector {
                norm: pre_norm,
                sample: None,
            });
        }
        let embedding = Embedding(cur.iter().map(|v| v / pre_norm).collect());
        Ok(ForwardCache {
            inputs,
            pre,
            pre_norm,
            embedding,
        })
    }

    /// In-place `p <- p - lr * g`.
    pub fn sgd_step(&mut self, grad: &GradientAccumulator, lr: f64) {
        for (p, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, gw) in p.weight.iter_mut().zip(&g.weight) {
                *w -= lr * gw;
            }
            for (b, gb) in p.bias.iter_mut().zip(&g.bias) {
                *b -= lr * gb;
            }
        }
    }
}

/// Backpropagates `upstream` (gradient w.r.t. the unit-norm embedding) through
/// the normalization and every layer, adding parameter gradients into `acc`.
/// Returns the gradient w.r.t. the raw input features.
pub fn backward(
    params: &EmbedderParams,
    cache: &ForwardCache,
    upstream: &[f64],
    acc: &mut GradientAccumulator,
) -> Result<Vec<f64>> {
    let e = cache.embedding.as_slice();
    if upstream.len() != e.len() {
        return Err(Error::ShapeMismatch {
            expected: e.len(),
            got: upstream.len(),
        });
    }
    if acc.layers.len() != params.layers.len() || cache.inputs.len() != params.layers.len() {
        return Err(Error::ShapeMismatch {
            expected: params.layers.len(),
            got: acc.layers.len().min(cache.inputs.len()),
        });
    }

    // d e / d z = (I - e e^T) / |z|
    let radial: f64 = e.iter().zip(upstream).map(|(a, b)| a * b).sum();
    let mut delta: Vec<f64> = upstream
        .iter()
        .zip(e)
        .map(|(g, ei)| (g - ei * radial) / cache.pre_norm)
        .collect();

    for l in (0..params.layers.len()).rev() {
        let layer = &params.layers[l];
        let grad = &mut acc.layers[l];
        if grad.in_dim != layer.in_dim || grad.out_dim != layer.out_dim {
            return Err(Error::ShapeMismatch {
                expected: layer.weight.len(),
                got: grad.weight.len(),
            });
        }
        let input = &cache.inputs[l];
        for (o, d) in delta.iter().enumerate() {
            grad.bias[o] += d;
            if *d != 0.0 {
                let row = &mut grad.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (gw, xi) in row.iter_mut().zip(input) {
                    *gw += d * xi;
                }
            }
        }
        let mut below = vec![0.0; layer.in_dim];
        for (o, d) in delta.iter().enumerate() {
            if *d != 0.0 {
                let row = &layer.weight[o * layer.in_dim..(o + 1) * layer.in_dim];
                for (b, w) in below.iter_mut().zip(row) {
                    *b += w * d;
                }
            }
        }
        if l > 0 {
            for (b, z) in below.iter_mut().zip(&cache.pre[l - 1]) {
                if *z <= 0.0 {
                    *b = 0.0;
                }
            }
        }
        delta = below;
    }
    Ok(delta)
}
