//! Policy and value networks with their optimizer and input normalization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Observation, ACTIONS, OBS_DIM};
use crate::mlp::{Mlp, Mode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("observation has {got} entries, network expects {want}")]
    DimensionMismatch { got: usize, want: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// No input transform.
    None,
    /// Running mean/variance standardization of observations.
    Running,
    /// Batch normalization after every hidden layer.
    Batch,
}

impl Normalization {
    pub fn name(self) -> &'static str {
        match self {
            Normalization::None => "none",
            Normalization::Running => "running",
            Normalization::Batch => "batch",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Normalization::None),
            "running" => Some(Normalization::Running),
            "batch" => Some(Normalization::Batch),
            _ => None,
        }
    }
}

/// Welford running statistics of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNormalizer {
    pub enabled: bool,
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl ObsNormalizer {
    pub fn new(dim: usize, enabled: bool) -> Self {
        Self {
            enabled,
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn observe(&mut self, x: &[f64]) {
        if !self.enabled {
            return;
        }
        self.count += 1.0;
        for (i, &v) in x.iter().enumerate() {
            let d = v - self.mean[i];
            self.mean[i] += d / self.count;
            self.m2[i] += d * (v - self.mean[i]);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if !self.enabled || self.count < 2.0 {
            return x.to_vec();
        }
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let var = self.m2[i] / self.count;
                ((v - self.mean[i]) / (var + 1e-8).sqrt()).clamp(-10.0, 10.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    /// `α`.
    pub learning_rate: f64,
    /// `γ`.
    pub gamma: f64,
    /// GAE `λ`.
    pub lambda: f64,
    pub clip_start: f64,
    pub clip_end: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub value_coef: f64,
    pub entropy_coef: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
}

impl Default for Hyper {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            gamma: 0.99,
            lambda: 0.95,
            clip_start: 0.2,
            clip_end: 0.05,
            epochs: 4,
            minibatch: 256,
            value_coef: 0.5,
            entropy_coef: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyModel {
    pub policy: Mlp,
    pub value: Mlp,
    pub normalizer: ObsNormalizer,
    pub adam: Adam,
    pub hyper: Hyper,
    pub normalization: Normalization,
}

/// Softmax with the max subtracted.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Log-softmax with the max subtracted.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|&z| (z - m).exp()).sum::<f64>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

impl PolicyModel {
    /// `hidden` lists the hidden widths shared by both networks.
    pub fn new<R: Rng + ?Sized>(hidden: &[usize], normalization: Normalization, hyper: Hyper, rng: &mut R) -> Self {
        let mut sizes = vec![OBS_DIM];
        sizes.extend_from_slice(hidden);
        let bn = normalization == Normalization::Batch;
        let mut ps = sizes.clone();
        ps.push(ACTIONS);
        let mut vs = sizes;
        vs.push(1);
        let policy = Mlp::new(&ps, bn, 0.01, rng);
        let value = Mlp::new(&vs, bn, 1.0, rng);
        let n = policy.param_count() + value.param_count();
        Self {
            policy,
            value,
            normalizer: ObsNormalizer::new(OBS_DIM, normalization == Normalization::Running),
            adam: Adam::new(n),
            hyper,
            normalization,
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        self.policy.sizes()
    }

    /// Action probabilities and value estimate for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<([f64; ACTIONS], f64), ModelError> {
        if obs.len() != self.policy.input_dim() {
            return Err(ModelError::DimensionMismatch {
                got: obs.len(),
                want: self.policy.input_dim(),
            });
        }
        let x = self.normalizer.apply(obs);
        let logits = self.policy.forward_one(&x);
        let p = softmax(logits.as_slice());
        let v = self.value.forward_one(&x)[0];
        let mut probs = [0.0; ACTIONS];
        probs.copy_from_slice(&p);
        Ok((probs, v))
    }

    /// Normalized observations as columns.
    pub fn batch_inputs(&self, obs: &[Observation]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(OBS_DIM, obs.len());
        for (j, o) in obs.iter().enumerate() {
            m.set_column(j, &DVector::from_vec(self.normalizer.apply(o)));
        }
        m
    }

    /// Logits (6 × B) and values (B) in evaluation mode.
    pub fn forward_batch(&self, inputs: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
        let (logits, _) = self.policy.forward(inputs, Mode::Eval);
        let (values, _) = self.value.forward(inputs, Mode::Eval);
        (logits, values.row(0).iter().copied().collect())
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = self.policy.params();
        p.extend(self.value.params());
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let n = self.policy.param_count();
        self.policy.set_params(&flat[..n]);
        self.value.set_params(&flat[n..]);
    }

    pub fn all_finite(&self) -> bool {
        self.params().iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn model() -> PolicyModel {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        PolicyModel::new(&[16, 16], Normalization::None, Hyper::default(), &mut rng)
    }

    #[test]
    fn zero_final_layer_is_uniform() {
        let mut m = model();
        m.policy.zero_output_layer();
        let (p, _) = m.forward(&[0.3; 8]).unwrap();
        for v in p {
            assert!((v - 1.0 / 6.0).abs() < 1e-15);
        }
    }

    #[test]
    fn probabilities_sum_to_one_and_repeat() {
        let m = model();
        let obs = [0.5, -0.1, 0.2, 0.3, -0.7, 0.0, 0.1, 0.25];
        let (p, v) = m.forward(&obs).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(p.iter().all(|&x| x > 0.0));
        let (p2, v2) = m.forward(&obs).unwrap();
        assert_eq!(p, p2);
        assert_eq!(v.to_bits(), v2.to_bits());
    }

    #[test]
    fn softmax_shift_invariance() {
        let z = [0.1, 2.0, -1.0, 0.5, 0.0, 3.0];
        let shifted: Vec<f64> = z.iter().map(|v| v + 7.5).collect();
        for (a, b) in softmax(&z).iter().zip(softmax(&shifted)) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let m = model();
        assert!(matches!(m.forward(&[0.0; 3]), Err(ModelError::DimensionMismatch { .. })));
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut a = Adam::new(2);
        let mut p = vec![1.0, -1.0];
        a.update(&mut p, &[1.0, -1.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn normalizer_standardizes() {
        let mut n = ObsNormalizer::new(1, true);
        for v in [1.0, 2.0, 3.0, 4.0] {
            n.observe(&[v]);
        }
        let z = n.apply(&[2.5])[0];
        assert!(z.abs() < 1e-12);
        let disabled = ObsNormalizer::new(1, false);
        assert_eq!(disabled.apply(&[2.5]), vec![2.5]);
    }
}
