//! Batched forward/backward over ndarray matrices. Numerically this path is
//! allowed to differ from the scalar path in the last ulps (GEMM blocking
//! reorders sums); it is used for training only, never for rollouts or
//! golden artifacts.

use ndarray::{Array1, Array2, Axis};

use super::mlp::{Activation, FlatParams, MlpArchitecture};

/// Weight/bias matrices materialized from a flat vector.
#[derive(Debug, Clone)]
pub struct MlpMatrices {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
    activation: Activation,
}

/// Per-layer post-activations kept for the backward pass; `outputs[0]` is
/// the input batch.
#[derive(Debug)]
pub struct BatchCache {
    outputs: Vec<Array2<f64>>,
}

impl BatchCache {
    pub fn output(&self) -> &Array2<f64> {
        self.outputs.last().unwrap()
    }
}

impl MlpMatrices {
    /// Panics on layout mismatch; callers validate params against the
    /// architecture before entering the training loop.
    pub fn from_flat(arch: &MlpArchitecture, params: &FlatParams) -> Self {
        assert_eq!(params.len(), arch.param_count(), "flat params length");
        let p = params.as_slice();
        let mut weights = Vec::with_capacity(arch.num_layers());
        let mut biases = Vec::with_capacity(arch.num_layers());
        let mut off = 0;
        for w in arch.layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let wm =
                Array2::from_shape_vec((n_out, n_in), p[off..off + n_in * n_out].to_vec())
                    .unwrap();
            off += n_in * n_out;
            let bv = Array1::from_vec(p[off..off + n_out].to_vec());
            off += n_out;
            weights.push(wm);
            biases.push(bv);
        }
        Self {
            weights,
            biases,
            activation: arch.activation,
        }
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Forward pass for a batch (rows are samples).
    pub fn forward_batch(&self, x: &Array2<f64>) -> BatchCache {
        let mut outputs = Vec::with_capacity(self.num_layers() + 1);
        outputs.push(x.clone());
        for l in 0..self.num_layers() {
            let mut z = outputs[l].dot(&self.weights[l].t());
            z += &self.biases[l];
            if l + 1 < self.num_layers() {
                z.mapv_inplace(|v| self.activation.apply(v));
            }
            outputs.push(z);
        }
        BatchCache { outputs }
    }

    /// Backward pass. `upstream` is dL/d(output) including any 1/batch
    /// scaling; returns summed parameter gradients in flat layout and
    /// dL/d(input).
    pub fn backward_batch(
        &self,
        arch: &MlpArchitecture,
        cache: &BatchCache,
        upstream: &Array2<f64>,
    ) -> (FlatParams, Array2<f64>) {
        let mut grad = vec![0.0; arch.param_count()];
        let mut delta = upstream.clone();
        for l in (0..self.num_layers()).rev() {
            let n_in = arch.layer_sizes[l];
            let n_out = arch.layer_sizes[l + 1];
            let off = arch.layer_offset(l);
            let dw = delta.t().dot(&cache.outputs[l]);
            let db = delta.sum_axis(Axis(0));
            grad[off..off + n_in * n_out].copy_from_slice(dw.as_standard_layout().as_slice().unwrap());
            grad[off + n_in * n_out..off + n_in * n_out + n_out]
                .copy_from_slice(db.as_slice().unwrap());
            let mut d_prev = delta.dot(&self.weights[l]);
            if l > 0 {
                let act = self.activation;
                d_prev.zip_mut_with(&cache.outputs[l], |d, &a| {
                    *d *= act.derivative_from_output(a)
                });
            }
            delta = d_prev;
        }
        (FlatParams(grad), delta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp::{self, Activation, FlatParams, MlpArchitecture};
    use approx::assert_relative_eq;
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn batched_forward_matches_scalar_forward() {
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for act in [Activation::Relu, Activation::Tanh] {
            let arch = MlpArchitecture::new(vec![4, 16, 8, 3], act).unwrap();
            let params = FlatParams::init(&arch, &mut rng);
            let mats = MlpMatrices::from_flat(&arch, &params);
            let batch = 17;
            let mut x = Array2::zeros((batch, 4));
            for mut row in x.rows_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-2.0..2.0);
                }
            }
            let cache = mats.forward_batch(&x);
            for (i, row) in x.rows().into_iter().enumerate() {
                let y = mlp::forward(&arch, &params, row.as_slice().unwrap()).unwrap();
                for (j, v) in y.iter().enumerate() {
                    assert_relative_eq!(
                        *v,
                        cache.output()[[i, j]],
                        max_relative = 1e-12,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn batched_backward_matches_scalar_backward() {
        let mut rng = ChaCha12Rng::seed_from_u64(22);
        let arch = MlpArchitecture::new(vec![3, 10, 2], Activation::Tanh).unwrap();
        let params = FlatParams::init(&arch, &mut rng);
        let mats = MlpMatrices::from_flat(&arch, &params);
        let batch = 5;
        let mut x = Array2::zeros((batch, 3));
        let mut up = Array2::zeros((batch, 2));
        for i in 0..batch {
            for j in 0..3 {
                x[[i, j]] = rng.random_range(-1.0..1.0);
            }
            for j in 0..2 {
                up[[i, j]] = rng.random_range(-1.0..1.0);
            }
        }
        let cache = mats.forward_batch(&x);
        let (grad_b, input_b) = mats.backward_batch(&arch, &cache, &up);

        let mut grad_s = vec![0.0; arch.param_count()];
        for i in 0..batch {
            let xi: Vec<f64> = x.row(i).to_vec();
            let (_, c) = mlp::forward_cached(&arch, &params, &xi).unwrap();
            let ui: Vec<f64> = up.row(i).to_vec();
            let (g, gin) = mlp::backward(&arch, &params, &c, &ui).unwrap();
            for (acc, v) in grad_s.iter_mut().zip(g.as_slice()) {
                *acc += v;
            }
            for j in 0..3 {
                assert_relative_eq!(
                    gin[j],
                    input_b[[i, j]],
                    max_relative = 1e-10,
                    epsilon = 1e-12
                );
            }
        }
        for (a, b) in grad_s.iter().zip(grad_b.as_slice()) {
            assert_relative_eq!(a, b, max_relative = 1e-10, epsilon = 1e-12);
        }
    }
}
