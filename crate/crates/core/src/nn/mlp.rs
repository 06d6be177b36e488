//! Fully connected network over a flat f64 parameter vector.
//!
//! Parameter layout, fixed across the crate and the checkpoint format: for
//! each layer in order, the weight matrix row-major (out x in), then the
//! bias vector (out). Hidden layers share one activation; the output layer
//! is linear.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Tanh => z.tanh(),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - a * a,
        }
    }
}

/// Layer widths from input to output, plus the hidden activation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let arch = Self {
            layer_sizes,
            activation,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_sizes.len() < 2 {
            return Err(Error::Config(
                "network needs at least an input and an output layer".into(),
            ));
        }
        if self.layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::Config("network layer sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Number of weight layers.
    pub fn num_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Flat offset of layer `l`'s weight block; biases follow the weights.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.layer_sizes
            .windows(2)
            .take(l)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Offset and length of the final layer's parameters (weights + biases),
    /// the slice evolved under final-layer-only fine-tuning.
    pub fn final_layer_span(&self) -> (usize, usize) {
        let l = self.num_layers() - 1;
        let off = self.layer_offset(l);
        (off, self.param_count() - off)
    }
}

/// Flat parameter vector in the crate-wide layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatParams(pub Vec<f64>);

impl FlatParams {
    pub fn zeros(n: usize) -> Self {
        FlatParams(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// He-style init for relu, Xavier-style for tanh; biases zero. Draw
    /// order is fixed (layer by layer, weights row-major), so a seeded rng
    /// reproduces the same parameters everywhere.
    pub fn init(arch: &MlpArchitecture, rng: &mut impl Rng) -> Self {
        let mut v = Vec::with_capacity(arch.param_count());
        for w in arch.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let scale = match arch.activation {
                Activation::Relu => (2.0 / fan_in as f64).sqrt(),
                Activation::Tanh => (1.0 / fan_in as f64).sqrt(),
            };
            for _ in 0..fan_in * fan_out {
                let z: f64 = rng.sample(StandardNormal);
                v.push(scale * z);
            }
            v.extend(std::iter::repeat(0.0).take(fan_out));
        }
        FlatParams(v)
    }

    fn check(&self, arch: &MlpArchitecture) -> Result<()> {
        if self.len() != arch.param_count() {
            return Err(Error::DimMismatch {
                what: "flat parameter vector",
                expected: arch.param_count(),
                got: self.len(),
            });
        }
        Ok(())
    }
}

/// Per-layer outputs kept for the backward pass. `outputs[0]` is the input;
/// `outputs[l]` is layer `l`'s post-activation (the final entry is the
/// linear network output).
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub outputs: Vec<Vec<f64>>,
}

/// Scalar-path forward pass with a fixed left-to-right summation order.
pub fn forward(arch: &MlpArchitecture, params: &FlatParams, input: &[f64]) -> Result<Vec<f64>> {
    Ok(forward_cached(arch, params, input)?.0)
}

pub fn forward_cached(
    arch: &MlpArchitecture,
    params: &FlatParams,
    input: &[f64],
) -> Result<(Vec<f64>, ForwardCache)> {
    params.check(arch)?;
    if input.len() != arch.input_dim() {
        return Err(Error::DimMismatch {
            what: "network input",
            expected: arch.input_dim(),
            got: input.len(),
        });
    }
    let p = params.as_slice();
    let mut outputs = Vec::with_capacity(arch.layer_sizes.len());
    outputs.push(input.to_vec());
    let mut off = 0;
    for (l, w) in arch.layer_sizes.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let last = l + 1 == arch.num_layers();
        let prev = outputs.last().unwrap();
        let bias_off = off + n_in * n_out;
        let mut out = Vec::with_capacity(n_out);
        for i in 0..n_out {
            let row = &p[off + i * n_in..off + (i + 1) * n_in];
            let mut z = p[bias_off + i];
            for j in 0..n_in {
                z += row[j] * prev[j];
            }
            out.push(if last { z } else { arch.activation.apply(z) });
        }
        outputs.push(out);
        off = bias_off + n_out;
    }
    let y = outputs.last().unwrap().clone();
    Ok((y, ForwardCache { outputs }))
}

/// Scalar-path backward pass. `upstream` is dL/d(output); returns
/// (dL/d(params) in flat layout, dL/d(input)).
pub fn backward(
    arch: &MlpArchitecture,
    params: &FlatParams,
    cache: &ForwardCache,
    upstream: &[f64],
) -> Result<(FlatParams, Vec<f64>)> {
    params.check(arch)?;
    if upstream.len() != arch.output_dim() {
        return Err(Error::DimMismatch {
            what: "upstream gradient",
            expected: arch.output_dim(),
            got: upstream.len(),
        });
    }
    let p = params.as_slice();
    let mut grad = vec![0.0; params.len()];
    let mut delta = upstream.to_vec();
    for l in (0..arch.num_layers()).rev() {
        let n_in = arch.layer_sizes[l];
        let n_out = arch.layer_sizes[l + 1];
        let off = arch.layer_offset(l);
        let bias_off = off + n_in * n_out;
        let a_prev = &cache.outputs[l];
        for i in 0..n_out {
            let d = delta[i];
            grad[bias_off + i] = d;
            let g_row = &mut grad[off + i * n_in..off + (i + 1) * n_in];
            for j in 0..n_in {
                g_row[j] = d * a_prev[j];
            }
        }
        let mut d_prev = vec![0.0; n_in];
        for i in 0..n_out {
            let d = delta[i];
            let row = &p[off + i * n_in..off + (i + 1) * n_in];
            for j in 0..n_in {
                d_prev[j] += d * row[j];
            }
        }
        if l > 0 {
            for j in 0..n_in {
                d_prev[j] *= arch.activation.derivative_from_output(cache.outputs[l][j]);
            }
        }
        delta = d_prev;
    }
    Ok((FlatParams(grad), delta))
}
