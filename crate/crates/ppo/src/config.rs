//! Flat `section.key = value` training configuration.

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::env::EnvConfig;
use crate::model::{Hyper, Normalization};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("unknown preset `{0}` (expected default, smoke or wide)")]
    UnknownPreset(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurriculumConfig {
    /// Generator length of the first stage.
    pub start: usize,
    pub cap: usize,
    pub increment: usize,
    /// Advance when the rolling mean return reaches `threshold · c`.
    pub threshold: f64,
    pub window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub seed: u64,
    pub env: EnvConfig,
    pub hidden: Vec<usize>,
    pub normalization: Normalization,
    pub hyper: Hyper,
    pub curriculum: CurriculumConfig,
    pub updates: usize,
    /// Environments stepped in lockstep during collection.
    pub envs: usize,
    /// Each environment runs whole episodes until it has this many steps.
    pub steps_per_env: usize,
    /// Checkpoint cadence in updates, 0 for only the final one.
    pub checkpoint_every: usize,
}

/// Keys that do not change what a given update computes. `train.updates`
/// sets the clip schedule, so it is hashed.
const UNHASHED: [&str; 1] = ["train.checkpoint_every"];

pub const KEYS: [&str; 28] = [
    "seed",
    "env.tolerance",
    "env.max_steps",
    "env.success_scale",
    "env.t_cost",
    "network.hidden",
    "network.activation",
    "network.normalization",
    "optimizer.learning_rate",
    "optimizer.gamma",
    "optimizer.lambda",
    "optimizer.clip_start",
    "optimizer.clip_end",
    "optimizer.epochs",
    "optimizer.minibatch",
    "optimizer.value_coef",
    "optimizer.entropy_coef",
    "optimizer.max_grad_norm",
    "optimizer.normalize_advantages",
    "curriculum.start",
    "curriculum.cap",
    "curriculum.increment",
    "curriculum.threshold",
    "curriculum.window",
    "train.updates",
    "train.envs",
    "train.steps_per_env",
    "train.checkpoint_every",
];

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            env: EnvConfig::default(),
            hidden: vec![64, 64],
            normalization: Normalization::Running,
            hyper: Hyper::default(),
            curriculum: CurriculumConfig {
                start: 10,
                cap: 80,
                increment: 2,
                threshold: 0.8,
                window: 100,
            },
            updates: 2000,
            envs: 16,
            steps_per_env: 128,
            checkpoint_every: 100,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.trim().parse().map_err(|e: T::Err| ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn invalid(key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

impl TrainConfig {
    /// Desk-scale run: 2×64 network, short targets.
    pub fn smoke() -> Self {
        let mut c = Self::default();
        c.env.max_steps = 16;
        c.curriculum = CurriculumConfig {
            start: 2,
            cap: 8,
            increment: 1,
            threshold: 0.8,
            window: 100,
        };
        c.hyper.learning_rate = 1e-3;
        c.hyper.minibatch = 256;
        c.updates = 300;
        c.envs = 16;
        c.steps_per_env = 64;
        c.checkpoint_every = 50;
        c
    }

    /// Five 256-unit layers with batch normalization.
    pub fn wide() -> Self {
        Self {
            hidden: vec![256; 5],
            normalization: Normalization::Batch,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        match name {
            "default" => Ok(Self::default()),
            "smoke" => Ok(Self::smoke()),
            "wide" | "paper" => Ok(Self::wide()),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn is_key(key: &str) -> bool {
        KEYS.contains(&key)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "env.tolerance" => self.env.tolerance = parse(key, v)?,
            "env.max_steps" => self.env.max_steps = parse(key, v)?,
            "env.success_scale" => self.env.success_scale = parse(key, v)?,
            "env.t_cost" => self.env.t_cost = parse(key, v)?,
            "network.hidden" => {
                self.hidden = v
                    .split(',')
                    .map(|s| parse::<usize>(key, s))
                    .collect::<Result<_, _>>()?;
            }
            "network.activation" => {
                if v != "leaky_relu" {
                    return Err(invalid(key, v, "only leaky_relu is available"));
                }
            }
            "network.normalization" => {
                self.normalization = Normalization::parse(v).ok_or_else(|| invalid(key, v, "expected none, running or batch"))?;
            }
            "optimizer.learning_rate" => self.hyper.learning_rate = parse(key, v)?,
            "optimizer.gamma" => self.hyper.gamma = parse(key, v)?,
            "optimizer.lambda" => self.hyper.lambda = parse(key, v)?,
            "optimizer.clip_start" => self.hyper.clip_start = parse(key, v)?,
            "optimizer.clip_end" => self.hyper.clip_end = parse(key, v)?,
            "optimizer.epochs" => self.hyper.epochs = parse(key, v)?,
            "optimizer.minibatch" => self.hyper.minibatch = parse(key, v)?,
            "optimizer.value_coef" => self.hyper.value_coef = parse(key, v)?,
            "optimizer.entropy_coef" => self.hyper.entropy_coef = parse(key, v)?,
            "optimizer.max_grad_norm" => self.hyper.max_grad_norm = parse(key, v)?,
            "optimizer.normalize_advantages" => self.hyper.normalize_advantages = parse(key, v)?,
            "curriculum.start" => self.curriculum.start = parse(key, v)?,
            "curriculum.cap" => self.curriculum.cap = parse(key, v)?,
            "curriculum.increment" => self.curriculum.increment = parse(key, v)?,
            "curriculum.threshold" => self.curriculum.threshold = parse(key, v)?,
            "curriculum.window" => self.curriculum.window = parse(key, v)?,
            "train.updates" => self.updates = parse(key, v)?,
            "train.envs" => self.envs = parse(key, v)?,
            "train.steps_per_env" => self.steps_per_env = parse(key, v)?,
            "train.checkpoint_every" => self.checkpoint_every = parse(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Range checks that individual `set` calls cannot make.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let check = |ok: bool, key: &str, value: String, reason: &str| if ok { Ok(()) } else { Err(invalid(key, &value, reason)) };
        check(self.env.tolerance > 0.0, "env.tolerance", self.env.tolerance.to_string(), "must be positive")?;
        check(self.env.max_steps > 0, "env.max_steps", self.env.max_steps.to_string(), "must be positive")?;
        check(!self.hidden.is_empty() && self.hidden.iter().all(|&h| h > 0), "network.hidden", format!("{:?}", self.hidden), "need at least one positive width")?;
        check(self.hyper.clip_start > 0.0 && self.hyper.clip_end > 0.0, "optimizer.clip_start", self.hyper.clip_start.to_string(), "clip ranges must be positive")?;
        check(self.hyper.epochs > 0, "optimizer.epochs", self.hyper.epochs.to_string(), "must be positive")?;
        check(self.hyper.minibatch >= 2, "optimizer.minibatch", self.hyper.minibatch.to_string(), "must be at least 2")?;
        check(self.curriculum.start > 0, "curriculum.start", self.curriculum.start.to_string(), "must be positive")?;
        check(self.curriculum.cap >= self.curriculum.start, "curriculum.cap", self.curriculum.cap.to_string(), "must be at least curriculum.start")?;
        check(self.curriculum.window > 0, "curriculum.window", self.curriculum.window.to_string(), "must be positive")?;
        check(self.envs > 0, "train.envs", self.envs.to_string(), "must be positive")?;
        check(self.steps_per_env > 0, "train.steps_per_env", self.steps_per_env.to_string(), "must be positive")?;
        Ok(())
    }

    /// Every key with its current value, in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(String, String)> {
        let hidden = self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(",");
        let values = [
            self.seed.to_string(),
            self.env.tolerance.to_string(),
            self.env.max_steps.to_string(),
            self.env.success_scale.to_string(),
            self.env.t_cost.to_string(),
            hidden,
            "leaky_relu".to_string(),
            self.normalization.name().to_string(),
            self.hyper.learning_rate.to_string(),
            self.hyper.gamma.to_string(),
            self.hyper.lambda.to_string(),
            self.hyper.clip_start.to_string(),
            self.hyper.clip_end.to_string(),
            self.hyper.epochs.to_string(),
            self.hyper.minibatch.to_string(),
            self.hyper.value_coef.to_string(),
            self.hyper.entropy_coef.to_string(),
            self.hyper.max_grad_norm.to_string(),
            self.hyper.normalize_advantages.to_string(),
            self.curriculum.start.to_string(),
            self.curriculum.cap.to_string(),
            self.curriculum.increment.to_string(),
            self.curriculum.threshold.to_string(),
            self.curriculum.window.to_string(),
            self.updates.to_string(),
            self.envs.to_string(),
            self.steps_per_env.to_string(),
            self.checkpoint_every.to_string(),
        ];
        KEYS.iter().map(|k| k.to_string()).zip(values).collect()
    }

    pub fn from_entries(pairs: &[(String, String)]) -> Result<Self, ConfigError> {
        let mut c = Self::default();
        for (k, v) in pairs {
            c.set(k, v)?;
        }
        c.validate()?;
        Ok(c)
    }

    /// SHA-256 over `key=value` lines of all keys that affect training.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in self.entries() {
            if UNHASHED.contains(&k.as_str()) {
                continue;
            }
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_names_the_key() {
        let mut c = TrainConfig::default();
        let err = c.set("optimizer.learnig_rate", "1e-3").unwrap_err();
        assert!(err.to_string().contains("optimizer.learnig_rate"));
    }

    #[test]
    fn bad_value_names_the_key() {
        let mut c = TrainConfig::default();
        let err = c.set("env.max_steps", "ten").unwrap_err();
        assert!(err.to_string().contains("env.max_steps"));
    }

    #[test]
    fn entries_round_trip() {
        let mut c = TrainConfig::wide();
        c.set("env.t_cost", "2").unwrap();
        c.set("seed", "17").unwrap();
        let back = TrainConfig::from_entries(&c.entries()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn hash_ignores_checkpoint_cadence_only() {
        let a = TrainConfig::smoke();
        let mut b = a.clone();
        b.checkpoint_every += 10;
        assert_eq!(a.hash(), b.hash());
        b.updates += 10;
        assert_ne!(a.hash(), b.hash());
        b.updates = a.updates;
        b.env.t_cost = 2.0;
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn wide_preset_has_five_layers() {
        assert_eq!(TrainConfig::wide().hidden, vec![256; 5]);
        assert_eq!(TrainConfig::wide().normalization, Normalization::Batch);
    }

    #[test]
    fn presets_validate() {
        for p in ["default", "smoke", "wide", "paper"] {
            TrainConfig::preset(p).unwrap().validate().unwrap();
        }
        assert!(TrainConfig::preset("huge").is_err());
    }
}
