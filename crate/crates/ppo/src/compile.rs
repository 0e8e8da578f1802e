//! Policy-guided depth-first search for a gate sequence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qcomp_core::gateset::{evaluate, GateId, GateSequence};
use qcomp_core::linalg::{fidelity_distance, UnitaryGate};

use crate::env::observe;
use crate::model::PolicyModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompileOptions {
    pub tolerance: f64,
    pub max_steps: usize,
    /// Sampled rollouts tried after a failed greedy one.
    pub retries: usize,
    pub seed: u64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_steps: 130,
            retries: 0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompileOutcome {
    pub sequence: GateSequence,
    pub achieved_distance: f64,
    pub success: bool,
    /// Rollouts performed, including the greedy one.
    pub rollouts: usize,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// One rollout; returns the prefix with the smallest distance (shortest on ties).
fn rollout(model: &PolicyModel, target: &UnitaryGate, opts: &CompileOptions, rng: Option<&mut ChaCha8Rng>) -> (GateSequence, f64) {
    let mut rng = rng;
    let mut current = UnitaryGate::identity();
    let mut actions = Vec::with_capacity(opts.max_steps);
    let mut best_len = 0;
    let mut best = fidelity_distance(&current, target);
    while best >= opts.tolerance && actions.len() < opts.max_steps {
        let (probs, _) = model.forward(&observe(target, &current)).expect("observation width");
        let a = match rng.as_deref_mut() {
            None => argmax(&probs),
            Some(r) => {
                let u: f64 = r.random();
                let mut acc = 0.0;
                let mut pick = probs.len() - 1;
                for (i, p) in probs.iter().enumerate() {
                    acc += p;
                    if u < acc {
                        pick = i;
                        break;
                    }
                }
                pick
            }
        };
        let g = GateId::ALL[a];
        current = g.matrix().mul(&current);
        actions.push(g);
        let d = fidelity_distance(&current, target);
        if d < best {
            best = d;
            best_len = actions.len();
        }
    }
    actions.truncate(best_len);
    (GateSequence::new(actions), best)
}

/// Greedy rollout, then up to `retries` sampled ones; the best is returned
/// with its distance recomputed from the sequence.
pub fn compile(model: &PolicyModel, target: &UnitaryGate, opts: &CompileOptions) -> CompileOutcome {
    let (mut seq, mut dist) = rollout(model, target, opts, None);
    let mut rollouts = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    while dist >= opts.tolerance && rollouts <= opts.retries {
        let (s, d) = rollout(model, target, opts, Some(&mut rng));
        rollouts += 1;
        if d < dist || (d == dist && s.len() < seq.len()) {
            seq = s;
            dist = d;
        }
    }
    let achieved_distance = fidelity_distance(&evaluate(&seq), target);
    CompileOutcome {
        success: achieved_distance < opts.tolerance,
        sequence: seq,
        achieved_distance,
        rollouts,
    }
}
