//! Reinforcement-learning compiler: environment, networks, PPO training and
//! policy-guided search.

pub mod compile;
pub mod config;
pub mod env;
pub mod mlp;
pub mod model;
pub mod ppo;
pub mod train;

pub use compile::{compile, CompileOptions, CompileOutcome};
pub use config::{ConfigError, TrainConfig};
pub use env::{CompileEnv, EnvConfig, Observation};
pub use model::{Hyper, Normalization, PolicyModel};
pub use train::{train, Checkpoint, LogRow, TrainError, Trainer};
