//! Clipped-surrogate loss, its analytic gradient, and advantage estimation.

use nalgebra::DMatrix;

use crate::env::{reward, EnvConfig, Observation, ACTIONS};
use crate::mlp::Mode;
use crate::model::{log_softmax, softmax, PolicyModel};

/// `min(r·A, clip(r, 1-ε, 1+ε)·A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, eps_clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_clip, 1.0 + eps_clip);
    (ratio * advantage).min(clipped * advantage)
}

/// `∂/∂r` of [`clipped_surrogate`]: `A` where the unclipped branch is the
/// minimum, zero otherwise.
fn surrogate_slope(ratio: f64, advantage: f64, eps_clip: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps_clip, 1.0 + eps_clip);
    if ratio * advantage <= clipped * advantage {
        advantage
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub observation: Observation,
    pub action: usize,
    pub log_prob: f64,
    /// Behaviour-policy probabilities, kept for the exact KL.
    pub probs: [f64; ACTIONS],
    pub reward: f64,
    pub value: f64,
    pub done: bool,
    /// 1-based step number `n` after the action.
    pub step_index: usize,
    pub distance: f64,
    pub target_gen_length: usize,
}

impl Transition {
    pub fn was_t(&self) -> bool {
        self.action == qcomp_core::GateId::T.index() || self.action == qcomp_core::GateId::TInv.index()
    }

    /// Reward recomputed from the stored `(n, distance, action)`.
    pub fn recomputed_reward(&self, cfg: &EnvConfig) -> f64 {
        reward(cfg, self.step_index, self.target_gen_length, self.distance, self.was_t())
    }
}

/// Concatenated episodes with their advantages and returns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<Transition>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Trajectory {
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) {
        let rewards: Vec<f64> = self.steps.iter().map(|s| s.reward).collect();
        let values: Vec<f64> = self.steps.iter().map(|s| s.value).collect();
        let dones: Vec<bool> = self.steps.iter().map(|s| s.done).collect();
        let (a, r) = gae(&rewards, &values, &dones, gamma, lambda);
        self.advantages = a;
        self.returns = r;
    }
}

/// Generalized advantage estimation. A `done` step bootstraps from zero;
/// the final step of the slice is treated as terminal.
pub fn gae(rewards: &[f64], values: &[f64], dones: &[bool], gamma: f64, lambda: f64) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for i in (0..n).rev() {
        let terminal = dones[i] || i + 1 == n;
        let next_value = if terminal { 0.0 } else { values[i + 1] };
        if terminal {
            running = 0.0;
        }
        let delta = rewards[i] + gamma * next_value - values[i];
        running = delta + gamma * lambda * running;
        adv[i] = running;
    }
    let returns = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, returns)
}

/// Subtract the mean and divide by the standard deviation.
pub fn normalize(values: &mut [f64]) {
    let n = values.len() as f64;
    if n < 2.0 {
        return;
    }
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-8);
    for v in values.iter_mut() {
        *v = (*v - mean) / sd;
    }
}

/// One optimization batch with network-ready inputs.
#[derive(Debug, Clone)]
pub struct Minibatch {
    /// Normalized observations as columns.
    pub inputs: DMatrix<f64>,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Minibatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossStats {
    pub loss: f64,
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub eps_clip: f64,
    pub value_coef: f64,
    pub entropy_coef: f64,
}

/// `L = -J_clip + v·MSE - e·H` and, if requested, `∂L/∂θ` over policy then
/// value parameters (the order of [`PolicyModel::params`]).
fn evaluate_loss(model: &PolicyModel, mb: &Minibatch, w: LossWeights, want_grad: bool) -> (LossStats, Option<Vec<f64>>) {
    let m = mb.len() as f64;
    let (logits, pcache) = model.policy.forward(&mb.inputs, Mode::Train);
    let (values, vcache) = model.value.forward(&mb.inputs, Mode::Train);
    let mut d_logits = DMatrix::zeros(ACTIONS, mb.len());
    let mut d_values = DMatrix::zeros(1, mb.len());
    let mut stats = LossStats::default();
    let mut clipped = 0usize;
    for j in 0..mb.len() {
        let z: Vec<f64> = logits.column(j).iter().copied().collect();
        let p = softmax(&z);
        let lp = log_softmax(&z);
        let a = mb.actions[j];
        let ratio = (lp[a] - mb.old_log_probs[j]).exp();
        let adv = mb.advantages[j];
        stats.surrogate += clipped_surrogate(ratio, adv, w.eps_clip) / m;
        if (ratio - 1.0).abs() > w.eps_clip {
            clipped += 1;
        }
        let h: f64 = -p.iter().zip(&lp).map(|(pi, li)| pi * li).sum::<f64>();
        stats.entropy += h / m;
        let v = values[(0, j)];
        let err = v - mb.returns[j];
        stats.value_loss += err * err / m;
        if want_grad {
            let g = surrogate_slope(ratio, adv, w.eps_clip) * ratio;
            for k in 0..ACTIONS {
                let onehot = if k == a { 1.0 } else { 0.0 };
                let surrogate = -g * (onehot - p[k]) / m;
                let entropy = w.entropy_coef * p[k] * (lp[k] + h) / m;
                d_logits[(k, j)] = surrogate + entropy;
            }
            d_values[(0, j)] = w.value_coef * 2.0 * err / m;
        }
    }
    stats.clip_fraction = clipped as f64 / m;
    stats.loss = -stats.surrogate + w.value_coef * stats.value_loss - w.entropy_coef * stats.entropy;
    let grad = want_grad.then(|| {
        let mut g = model.policy.backward(&pcache, &d_logits).flatten();
        g.extend(model.value.backward(&vcache, &d_values).flatten());
        g
    });
    (stats, grad)
}

pub fn loss(model: &PolicyModel, mb: &Minibatch, w: LossWeights) -> LossStats {
    evaluate_loss(model, mb, w, false).0
}

pub fn loss_and_grad(model: &PolicyModel, mb: &Minibatch, w: LossWeights) -> (LossStats, Vec<f64>) {
    let (s, g) = evaluate_loss(model, mb, w, true);
    (s, g.expect("gradient requested"))
}

/// Scales `grad` in place to at most `max_norm`; returns the original norm.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if max_norm > 0.0 && norm > max_norm {
        let s = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

/// Mean `KL(old ‖ new)` over a batch of stored behaviour distributions.
pub fn mean_kl(old: &[[f64; ACTIONS]], new_logits: &DMatrix<f64>) -> f64 {
    if old.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (j, p) in old.iter().enumerate() {
        let z: Vec<f64> = new_logits.column(j).iter().copied().collect();
        let lq = log_softmax(&z);
        total += p
            .iter()
            .zip(&lq)
            .filter(|(pi, _)| **pi > 0.0)
            .map(|(pi, li)| pi * (pi.ln() - li))
            .sum::<f64>();
    }
    total / old.len() as f64
}
