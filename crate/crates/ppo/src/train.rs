//! PPO training loop with a length curriculum, CSV log rows and checkpoints.

use std::collections::VecDeque;
use std::path::Path;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use qcomp_core::gateset::{evaluate, random_sequence_with, GateId};
use qcomp_core::linalg::{fidelity_distance, UnitaryGate};

use crate::config::{ConfigError, TrainConfig};
use crate::env::{CompileEnv, ACTIONS, OBS_DIM};
use crate::mlp::Mode;
use crate::model::{softmax, Adam, ObsNormalizer, PolicyModel};
use crate::ppo::{clip_grad_norm, loss_and_grad, mean_kl, normalize, LossWeights, Minibatch, Trajectory, Transition};

pub const CHECKPOINT_FORMAT: &str = "qcomp-ppo-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Episodes kept for [`LogRow::rolling_reward`].
pub const ROLLING_WINDOW: usize = 100;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed checkpoint {path}: {reason}")]
    Format { path: String, reason: String },
    #[error("checkpoint config hash {found} does not match {expected} (use force to override)")]
    HashMismatch { expected: String, found: String },
    #[error("non-finite parameters after update {0}")]
    NonFinite(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub update: usize,
    /// Mean episode return over this update's episodes.
    pub mean_reward: f64,
    /// Mean final distance.
    pub mean_distance: f64,
    pub success_rate: f64,
    /// Fraction of actions that were `T` or `T'`.
    pub t_rate: f64,
    pub curriculum_length: usize,
    pub kl: f64,
    pub clip_fraction: f64,
    /// Mean return of the last [`ROLLING_WINDOW`] episodes, any stage.
    pub rolling_reward: f64,
    pub episodes: usize,
}

impl LogRow {
    pub const HEADER: &'static str =
        "update,mean_reward,mean_distance,success_rate,t_rate,curriculum_length,kl,clip_frac,rolling_reward,episodes";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{},{:e},{:e},{:e},{}",
            self.update,
            self.mean_reward,
            self.mean_distance,
            self.success_rate,
            self.t_rate,
            self.curriculum_length,
            self.kl,
            self.clip_fraction,
            self.rolling_reward,
            self.episodes
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub length: usize,
    /// Returns at the current stage, most recent last.
    pub window: VecDeque<f64>,
}

impl Curriculum {
    /// Records one episode; returns true when the stage advanced.
    fn record(&mut self, ret: f64, cfg: &TrainConfig) -> bool {
        let cc = &cfg.curriculum;
        self.window.push_back(ret);
        if self.window.len() > cc.window {
            self.window.pop_front();
        }
        let full = self.window.len() == cc.window;
        let mean = self.window.iter().sum::<f64>() / self.window.len() as f64;
        if full && self.length < cc.cap && mean >= cc.threshold * cfg.env.success_scale {
            self.length = (self.length + cc.increment.max(1)).min(cc.cap);
            self.window.clear();
            return true;
        }
        false
    }
}

/// Everything needed to resume training bit-for-bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub config: Vec<(String, String)>,
    /// Index of the next update to run.
    pub update: usize,
    pub curriculum: Curriculum,
    pub rolling: VecDeque<f64>,
    pub policy_sizes: Vec<usize>,
    pub value_sizes: Vec<usize>,
    pub policy_params: Vec<f64>,
    pub value_params: Vec<f64>,
    pub policy_running: Vec<f64>,
    pub value_running: Vec<f64>,
    pub normalizer: ObsNormalizer,
    pub adam: Adam,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), TrainError> {
        let io = |source| TrainError::Io {
            path: path.display().to_string(),
            source,
        };
        let text = serde_json::to_string(self).expect("checkpoint serializes");
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, text).map_err(io)?;
        std::fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, TrainError> {
        let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let bad = |reason: String| TrainError::Format {
            path: path.display().to_string(),
            reason,
        };
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported format {} version {}", ck.format, ck.version)));
        }
        Ok(ck)
    }

    pub fn train_config(&self) -> Result<TrainConfig, TrainError> {
        Ok(TrainConfig::from_entries(&self.config)?)
    }

    /// Rebuilds the model stored in the checkpoint.
    pub fn model(&self) -> Result<PolicyModel, TrainError> {
        let cfg = self.train_config()?;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut m = PolicyModel::new(&cfg.hidden, cfg.normalization, cfg.hyper, &mut rng);
        let bad = |reason: String| TrainError::Format {
            path: "<checkpoint>".into(),
            reason,
        };
        if m.policy.sizes() != self.policy_sizes.as_slice() || m.value.sizes() != self.value_sizes.as_slice() {
            return Err(bad("layer sizes disagree with the embedded config".into()));
        }
        if self.policy_params.len() != m.policy.param_count() || self.value_params.len() != m.value.param_count() {
            return Err(bad("parameter count mismatch".into()));
        }
        if self.adam.m.len() != m.adam.m.len() || self.adam.v.len() != m.adam.v.len() {
            return Err(bad("optimizer state size mismatch".into()));
        }
        m.policy.set_params(&self.policy_params);
        m.value.set_params(&self.value_params);
        m.policy.set_running_stats(&self.policy_running).map_err(bad)?;
        m.value.set_running_stats(&self.value_running).map_err(bad)?;
        if self.normalizer.mean.len() != OBS_DIM {
            return Err(bad("normalizer dimension".into()));
        }
        m.normalizer = self.normalizer.clone();
        m.adam = self.adam.clone();
        Ok(m)
    }
}

/// Stream-separated seed for `(seed, update, env)`.
fn sub_seed(seed: u64, a: u64, b: u64) -> u64 {
    // splitmix64 finalizer over a simple combination
    let mut z = seed ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9).rotate_left(17);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Random target of generator length `len`, never within `tol` of the identity.
pub fn curriculum_target<R: Rng + ?Sized>(len: usize, tol: f64, rng: &mut R) -> UnitaryGate {
    loop {
        let u = evaluate(&random_sequence_with(len, rng));
        if fidelity_distance(&u, &UnitaryGate::identity()) >= tol {
            return u;
        }
    }
}

fn sample(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

#[derive(Debug, Clone, Copy, Default)]
struct Episode {
    ret: f64,
    distance: f64,
    success: bool,
}

struct Slot {
    env: CompileEnv,
    rng: ChaCha8Rng,
    steps: Vec<Transition>,
    ret: f64,
    active: bool,
}

pub struct Trainer {
    cfg: TrainConfig,
    model: PolicyModel,
    curriculum: Curriculum,
    rolling: VecDeque<f64>,
    update: usize,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self, TrainError> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, u64::MAX, 0));
        let model = PolicyModel::new(&cfg.hidden, cfg.normalization, cfg.hyper, &mut rng);
        let curriculum = Curriculum {
            length: cfg.curriculum.start,
            window: VecDeque::new(),
        };
        Ok(Self {
            cfg,
            model,
            curriculum,
            rolling: VecDeque::new(),
            update: 0,
        })
    }

    /// Resumes from a checkpoint; `cfg` may differ only in unhashed keys
    /// unless `force` is set.
    pub fn resume(cfg: TrainConfig, ck: &Checkpoint, force: bool) -> Result<Self, TrainError> {
        cfg.validate()?;
        let expected = cfg.hash();
        if ck.config_hash != expected && !force {
            return Err(TrainError::HashMismatch {
                expected,
                found: ck.config_hash.clone(),
            });
        }
        let mut model = ck.model()?;
        model.hyper = cfg.hyper;
        Ok(Self {
            cfg,
            model,
            curriculum: ck.curriculum.clone(),
            rolling: ck.rolling.clone(),
            update: ck.update,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn model(&self) -> &PolicyModel {
        &self.model
    }

    pub fn into_model(self) -> PolicyModel {
        self.model
    }

    pub fn curriculum(&self) -> &Curriculum {
        &self.curriculum
    }

    /// Index of the next update.
    pub fn next_update(&self) -> usize {
        self.update
    }

    pub fn is_finished(&self) -> bool {
        self.update >= self.cfg.updates
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            config_hash: self.cfg.hash(),
            config: self.cfg.entries(),
            update: self.update,
            curriculum: self.curriculum.clone(),
            rolling: self.rolling.clone(),
            policy_sizes: self.model.policy.sizes().to_vec(),
            value_sizes: self.model.value.sizes().to_vec(),
            policy_params: self.model.policy.params(),
            value_params: self.model.value.params(),
            policy_running: self.model.policy.running_stats(),
            value_running: self.model.value.running_stats(),
            normalizer: self.model.normalizer.clone(),
            adam: self.model.adam.clone(),
        }
    }

    /// Runs whole episodes on `cfg.envs` lockstep environments.
    fn collect(&self) -> (Trajectory, Vec<Episode>) {
        let cfg = &self.cfg;
        let len = self.curriculum.length;
        let mut slots: Vec<Slot> = (0..cfg.envs)
            .map(|e| {
                let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, self.update as u64, e as u64));
                let target = curriculum_target(len, cfg.env.tolerance, &mut rng);
                Slot {
                    env: CompileEnv::new(cfg.env, target, len),
                    rng,
                    steps: Vec::new(),
                    ret: 0.0,
                    active: true,
                }
            })
            .collect();
        let mut episodes: Vec<Vec<Episode>> = vec![Vec::new(); cfg.envs];
        loop {
            let live: Vec<usize> = (0..slots.len()).filter(|&i| slots[i].active).collect();
            if live.is_empty() {
                break;
            }
            let obs: Vec<_> = live.iter().map(|&i| slots[i].env.observation()).collect();
            let inputs = self.model.batch_inputs(&obs);
            let (logits, values) = self.model.forward_batch(&inputs);
            for (j, &i) in live.iter().enumerate() {
                let z: Vec<f64> = logits.column(j).iter().copied().collect();
                let p = softmax(&z);
                let slot = &mut slots[i];
                let a = sample(&p, &mut slot.rng);
                let out = slot.env.step(GateId::ALL[a]).expect("live environment");
                let mut probs = [0.0; ACTIONS];
                probs.copy_from_slice(&p);
                slot.steps.push(Transition {
                    observation: obs[j],
                    action: a,
                    log_prob: p[a].ln(),
                    probs,
                    reward: out.reward,
                    value: values[j],
                    done: out.done,
                    step_index: slot.env.step_index(),
                    distance: out.distance,
                    target_gen_length: len,
                });
                slot.ret += out.reward;
                if out.done {
                    episodes[i].push(Episode {
                        ret: slot.ret,
                        distance: out.distance,
                        success: out.success,
                    });
                    slot.ret = 0.0;
                    if slot.steps.len() >= cfg.steps_per_env {
                        slot.active = false;
                    } else {
                        let target = curriculum_target(len, cfg.env.tolerance, &mut slot.rng);
                        slot.env.reset(target, len);
                    }
                }
            }
        }
        let mut traj = Trajectory::default();
        for s in slots {
            traj.steps.extend(s.steps);
        }
        traj.compute_advantages(self.model.hyper.gamma, self.model.hyper.lambda);
        (traj, episodes.into_iter().flatten().collect())
    }

    fn eps_clip(&self) -> f64 {
        let h = &self.model.hyper;
        let frac = if self.cfg.updates > 1 {
            (self.update as f64 / (self.cfg.updates - 1) as f64).min(1.0)
        } else {
            1.0
        };
        h.clip_start + (h.clip_end - h.clip_start) * frac
    }

    fn optimize(&mut self, traj: &Trajectory) -> f64 {
        let h = self.model.hyper;
        let w = LossWeights {
            eps_clip: self.eps_clip(),
            value_coef: h.value_coef,
            entropy_coef: h.entropy_coef,
        };
        let n = traj.steps.len();
        let obs: Vec<_> = traj.steps.iter().map(|s| s.observation).collect();
        let inputs = self.model.batch_inputs(&obs);
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.cfg.seed, self.update as u64, u64::MAX));
        let mut order: Vec<usize> = (0..n).collect();
        let mut clip_sum = 0.0;
        let mut batches = 0usize;
        for _ in 0..h.epochs {
            order.shuffle(&mut rng);
            for chunk in order.chunks(h.minibatch) {
                if chunk.len() < 2 {
                    continue;
                }
                let mut mb = Minibatch {
                    inputs: DMatrix::from_fn(OBS_DIM, chunk.len(), |r, c| inputs[(r, chunk[c])]),
                    actions: chunk.iter().map(|&i| traj.steps[i].action).collect(),
                    old_log_probs: chunk.iter().map(|&i| traj.steps[i].log_prob).collect(),
                    advantages: chunk.iter().map(|&i| traj.advantages[i]).collect(),
                    returns: chunk.iter().map(|&i| traj.returns[i]).collect(),
                };
                if h.normalize_advantages {
                    normalize(&mut mb.advantages);
                }
                let (stats, mut grad) = loss_and_grad(&self.model, &mb, w);
                clip_grad_norm(&mut grad, h.max_grad_norm);
                let mut params = self.model.params();
                self.model.adam.update(&mut params, &grad, h.learning_rate);
                self.model.set_params(&params);
                if self.model.policy.has_batch_norm() {
                    let (_, pc) = self.model.policy.forward(&mb.inputs, Mode::Train);
                    let (_, vc) = self.model.value.forward(&mb.inputs, Mode::Train);
                    self.model.policy.update_running_stats(&pc);
                    self.model.value.update_running_stats(&vc);
                }
                clip_sum += stats.clip_fraction;
                batches += 1;
            }
        }
        if batches == 0 {
            0.0
        } else {
            clip_sum / batches as f64
        }
    }

    /// One collect → optimize cycle.
    pub fn step(&mut self) -> Result<LogRow, TrainError> {
        let (traj, episodes) = self.collect();
        let clip_fraction = self.optimize(&traj);
        let obs: Vec<_> = traj.steps.iter().map(|s| s.observation).collect();
        let (new_logits, _) = self.model.forward_batch(&self.model.batch_inputs(&obs));
        let old: Vec<_> = traj.steps.iter().map(|s| s.probs).collect();
        let kl = mean_kl(&old, &new_logits);
        for o in &obs {
            self.model.normalizer.observe(o);
        }
        if !self.model.all_finite() || !kl.is_finite() {
            return Err(TrainError::NonFinite(self.update));
        }
        let length = self.curriculum.length;
        let mut advanced = false;
        for e in &episodes {
            self.rolling.push_back(e.ret);
            if self.rolling.len() > ROLLING_WINDOW {
                self.rolling.pop_front();
            }
            if !advanced {
                advanced = self.curriculum.record(e.ret, &self.cfg);
            }
        }
        let ne = episodes.len().max(1) as f64;
        let t_actions = traj.steps.iter().filter(|s| s.was_t()).count();
        let row = LogRow {
            update: self.update,
            mean_reward: episodes.iter().map(|e| e.ret).sum::<f64>() / ne,
            mean_distance: episodes.iter().map(|e| e.distance).sum::<f64>() / ne,
            success_rate: episodes.iter().filter(|e| e.success).count() as f64 / ne,
            t_rate: t_actions as f64 / traj.steps.len().max(1) as f64,
            curriculum_length: length,
            kl,
            clip_fraction,
            rolling_reward: self.rolling.iter().sum::<f64>() / self.rolling.len().max(1) as f64,
            episodes: episodes.len(),
        };
        self.update += 1;
        Ok(row)
    }

    /// Runs the remaining updates, calling `on_row` after each.
    pub fn run<F>(&mut self, mut on_row: F) -> Result<Vec<LogRow>, TrainError>
    where
        F: FnMut(&LogRow, &Trainer) -> Result<(), TrainError>,
    {
        let mut rows = Vec::new();
        while !self.is_finished() {
            let row = self.step()?;
            on_row(&row, self)?;
            rows.push(row);
        }
        Ok(rows)
    }
}

/// Trains from scratch and returns the model with its log.
pub fn train(cfg: &TrainConfig) -> Result<(PolicyModel, Vec<LogRow>), TrainError> {
    let mut t = Trainer::new(cfg.clone())?;
    let rows = t.run(|_, _| Ok(()))?;
    Ok((t.into_model(), rows))
}
