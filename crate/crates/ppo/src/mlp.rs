//! Fully connected network with leaky ReLU and optional batch normalization.
//!
//! Batches are column-major: a batch of `B` inputs is an `in × B` matrix.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub const LEAKY_SLOPE: f64 = 0.01;
pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics (batch norm) and caching for backward.
    Train,
    /// Running statistics.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: DVector<f64>,
    pub beta: DVector<f64>,
    pub running_mean: DVector<f64>,
    pub running_var: DVector<f64>,
}

impl BatchNorm {
    fn new(width: usize) -> Self {
        Self {
            gamma: DVector::from_element(width, 1.0),
            beta: DVector::zeros(width),
            running_mean: DVector::zeros(width),
            running_var: DVector::from_element(width, 1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    /// One per hidden layer when enabled, empty otherwise.
    norms: Vec<BatchNorm>,
}

/// Per-layer intermediates of a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    inputs: Vec<DMatrix<f64>>,
    pre: Vec<DMatrix<f64>>,
    normalized: Vec<DMatrix<f64>>,
    inv_std: Vec<DVector<f64>>,
    batch_mean: Vec<DVector<f64>>,
    batch_var: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub weights: Vec<DMatrix<f64>>,
    pub biases: Vec<DVector<f64>>,
    pub gammas: Vec<DVector<f64>>,
    pub betas: Vec<DVector<f64>>,
}

fn leaky(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        LEAKY_SLOPE * v
    }
}

fn leaky_grad(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else {
        LEAKY_SLOPE
    }
}

impl Mlp {
    /// `sizes = [input, hidden…, output]`. Hidden weights use He scaling; the
    /// output layer is scaled by `output_gain`.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], batch_norm: bool, output_gain: f64, rng: &mut R) -> Self {
        assert!(sizes.len() >= 2, "need input and output sizes");
        let layers = sizes.len() - 1;
        let mut weights = Vec::with_capacity(layers);
        let mut biases = Vec::with_capacity(layers);
        for l in 0..layers {
            let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
            let scale = (2.0 / fan_in as f64).sqrt() * if l + 1 == layers { output_gain } else { 1.0 };
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                let g: f64 = StandardNormal.sample(rng);
                g * scale
            }));
            biases.push(DVector::zeros(fan_out));
        }
        let norms = if batch_norm {
            sizes[1..layers].iter().map(|&w| BatchNorm::new(w)).collect()
        } else {
            Vec::new()
        };
        Self {
            sizes: sizes.to_vec(),
            weights,
            biases,
            norms,
        }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.sizes.last().expect("non-empty sizes")
    }

    pub fn has_batch_norm(&self) -> bool {
        !self.norms.is_empty()
    }

    pub fn zero_output_layer(&mut self) {
        let last = self.weights.len() - 1;
        self.weights[last].fill(0.0);
        self.biases[last].fill(0.0);
    }

    pub fn forward(&self, x: &DMatrix<f64>, mode: Mode) -> (DMatrix<f64>, Cache) {
        let layers = self.weights.len();
        let mut cache = Cache {
            inputs: Vec::with_capacity(layers),
            pre: Vec::with_capacity(layers),
            normalized: Vec::new(),
            inv_std: Vec::new(),
            batch_mean: Vec::new(),
            batch_var: Vec::new(),
        };
        let mut h = x.clone();
        for l in 0..layers {
            let mut z = &self.weights[l] * &h;
            for mut col in z.column_iter_mut() {
                col += &self.biases[l];
            }
            cache.inputs.push(h);
            if l + 1 == layers {
                cache.pre.push(z.clone());
                h = z;
                break;
            }
            if let Some(bn) = self.norms.get(l) {
                let b = z.ncols() as f64;
                let (mean, var) = match mode {
                    Mode::Train => {
                        let mean = z.column_mean();
                        let mut var = DVector::zeros(z.nrows());
                        for col in z.column_iter() {
                            var += (col - &mean).map(|v| v * v);
                        }
                        (mean, var / b)
                    }
                    Mode::Eval => (bn.running_mean.clone(), bn.running_var.clone()),
                };
                let inv_std = var.map(|v| 1.0 / (v + BN_EPS).sqrt());
                let mut xhat = z.clone();
                for mut col in xhat.column_iter_mut() {
                    col -= &mean;
                    col.component_mul_assign(&inv_std);
                }
                let mut y = xhat.clone();
                for mut col in y.column_iter_mut() {
                    col.component_mul_assign(&bn.gamma);
                    col += &bn.beta;
                }
                cache.normalized.push(xhat);
                cache.inv_std.push(inv_std);
                cache.batch_mean.push(mean);
                cache.batch_var.push(var);
                z = y;
            }
            cache.pre.push(z.clone());
            h = z.map(leaky);
        }
        (h, cache)
    }

    /// Single input in evaluation mode.
    pub fn forward_one(&self, x: &[f64]) -> DVector<f64> {
        let m = DMatrix::from_column_slice(x.len(), 1, x);
        let (out, _) = self.forward(&m, Mode::Eval);
        out.column(0).into_owned()
    }

    /// Gradients of a scalar loss given `d_out = ∂loss/∂output`.
    pub fn backward(&self, cache: &Cache, d_out: &DMatrix<f64>) -> MlpGrad {
        let layers = self.weights.len();
        let mut g_w = vec![DMatrix::zeros(0, 0); layers];
        let mut g_b = vec![DVector::zeros(0); layers];
        let mut g_gamma = vec![DVector::zeros(0); self.norms.len()];
        let mut g_beta = vec![DVector::zeros(0); self.norms.len()];
        let mut delta = d_out.clone();
        for l in (0..layers).rev() {
            if l + 1 < layers {
                // through the activation, then batch norm
                delta.zip_apply(&cache.pre[l], |d, z| *d *= leaky_grad(z));
                if let Some(bn) = self.norms.get(l) {
                    let xhat = &cache.normalized[l];
                    let inv_std = &cache.inv_std[l];
                    let b = delta.ncols() as f64;
                    g_beta[l] = delta.column_sum();
                    g_gamma[l] = delta.component_mul(xhat).column_sum();
                    let mut dxhat = delta.clone();
                    for mut col in dxhat.column_iter_mut() {
                        col.component_mul_assign(&bn.gamma);
                    }
                    let sum_dxhat = dxhat.column_sum();
                    let sum_dxhat_xhat = dxhat.component_mul(xhat).column_sum();
                    let mut dz = dxhat * b;
                    for (j, mut col) in dz.column_iter_mut().enumerate() {
                        col -= &sum_dxhat;
                        col -= xhat.column(j).component_mul(&sum_dxhat_xhat);
                        col.component_mul_assign(inv_std);
                    }
                    delta = dz / b;
                }
            }
            g_w[l] = &delta * cache.inputs[l].transpose();
            g_b[l] = delta.column_sum();
            if l > 0 {
                delta = self.weights[l].transpose() * &delta;
            }
        }
        MlpGrad {
            weights: g_w,
            biases: g_b,
            gammas: g_gamma,
            betas: g_beta,
        }
    }

    /// Blends the batch statistics of a training pass into the running ones.
    pub fn update_running_stats(&mut self, cache: &Cache) {
        for (l, bn) in self.norms.iter_mut().enumerate() {
            bn.running_mean = &bn.running_mean * (1.0 - BN_MOMENTUM) + &cache.batch_mean[l] * BN_MOMENTUM;
            bn.running_var = &bn.running_var * (1.0 - BN_MOMENTUM) + &cache.batch_var[l] * BN_MOMENTUM;
        }
    }

    /// Running means then variances, per normalized layer.
    pub fn running_stats(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for n in &self.norms {
            out.extend_from_slice(n.running_mean.as_slice());
            out.extend_from_slice(n.running_var.as_slice());
        }
        out
    }

    pub fn set_running_stats(&mut self, flat: &[f64]) -> Result<(), String> {
        let need: usize = self.norms.iter().map(|n| 2 * n.gamma.len()).sum();
        if flat.len() != need {
            return Err(format!("expected {need} running statistics, got {}", flat.len()));
        }
        let mut off = 0;
        for n in self.norms.iter_mut() {
            let w = n.gamma.len();
            n.running_mean.as_mut_slice().copy_from_slice(&flat[off..off + w]);
            n.running_var.as_mut_slice().copy_from_slice(&flat[off + w..off + 2 * w]);
            off += 2 * w;
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
            + self.norms.iter().map(|n| 2 * n.gamma.len()).sum::<usize>()
    }

    /// Trainable parameters in a fixed order: every `W` then `b` per layer,
    /// then `γ`, `β` per normalized layer.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        for n in &self.norms {
            out.extend_from_slice(n.gamma.as_slice());
            out.extend_from_slice(n.beta.as_slice());
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.param_count(), "parameter count");
        let mut off = 0;
        let mut take = |dst: &mut [f64]| {
            dst.copy_from_slice(&flat[off..off + dst.len()]);
            off += dst.len();
        };
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            take(w.as_mut_slice());
            take(b.as_mut_slice());
        }
        for n in self.norms.iter_mut() {
            take(n.gamma.as_mut_slice());
            take(n.beta.as_mut_slice());
        }
    }
}

impl MlpGrad {
    /// Same order as [`Mlp::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        for (g, b) in self.gammas.iter().zip(&self.betas) {
            out.extend_from_slice(g.as_slice());
            out.extend_from_slice(b.as_slice());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> rand_chacha::ChaCha8Rng {
        rand_chacha::ChaCha8Rng::seed_from_u64(3)
    }

    /// Central differences of `Σ c ⊙ out` against the analytic gradient.
    fn check_grad(batch_norm: bool) {
        let mut r = rng();
        let net = Mlp::new(&[3, 5, 4, 2], batch_norm, 1.0, &mut r);
        let x = DMatrix::from_fn(3, 6, |_, _| r.random_range(-1.0..1.0));
        let c = DMatrix::from_fn(2, 6, |_, _| r.random_range(-1.0..1.0));
        let loss = |n: &Mlp| n.forward(&x, Mode::Train).0.component_mul(&c).sum();
        let (_, cache) = net.forward(&x, Mode::Train);
        let g = net.backward(&cache, &c).flatten();
        let p = net.params();
        let h = 1e-6;
        for i in 0..p.len() {
            let mut plus = net.clone();
            let mut q = p.clone();
            q[i] += h;
            plus.set_params(&q);
            let mut minus = net.clone();
            q[i] -= 2.0 * h;
            minus.set_params(&q);
            let fd = (loss(&plus) - loss(&minus)) / (2.0 * h);
            // biases feeding batch norm have zero gradient; fd leaves rounding noise
            let err = (fd - g[i]).abs() / (fd.abs() + g[i].abs()).max(1e-7);
            assert!(err < 1e-5 || (fd - g[i]).abs() < 1e-9, "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        check_grad(false);
    }

    #[test]
    fn gradient_matches_finite_differences_with_batch_norm() {
        check_grad(true);
    }

    #[test]
    fn params_round_trip() {
        let mut r = rng();
        let mut net = Mlp::new(&[4, 8, 3], true, 1.0, &mut r);
        let p = net.params();
        assert_eq!(p.len(), net.param_count());
        let q: Vec<f64> = p.iter().map(|v| v * 2.0).collect();
        net.set_params(&q);
        assert_eq!(net.params(), q);
    }

    #[test]
    fn forward_is_deterministic() {
        let mut r = rng();
        let net = Mlp::new(&[8, 16, 6], false, 1.0, &mut r);
        let x = [0.1, -0.2, 0.3, 0.0, 0.5, -0.5, 0.2, 0.9];
        assert_eq!(net.forward_one(&x), net.forward_one(&x));
    }

    #[test]
    fn zero_output_layer_gives_zero_output() {
        let mut r = rng();
        let mut net = Mlp::new(&[8, 16, 6], false, 1.0, &mut r);
        net.zero_output_layer();
        assert!(net.forward_one(&[1.0; 8]).iter().all(|&v| v == 0.0));
    }
}
