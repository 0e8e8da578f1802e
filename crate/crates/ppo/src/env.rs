//! Gate-appending compilation environment.

use thiserror::Error;

use qcomp_core::gateset::{GateId, GateSequence};
use qcomp_core::linalg::{fidelity_distance, phase_normalize, UnitaryGate};

pub const OBS_DIM: usize = 8;
pub const ACTIONS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvConfig {
    /// `ε_t`.
    pub tolerance: f64,
    /// `L_max`.
    pub max_steps: usize,
    /// `c`.
    pub success_scale: f64,
    /// `C_T`.
    pub t_cost: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-3,
            max_steps: 130,
            success_scale: 10.0,
            t_cost: 0.0,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("step after the episode ended")]
    EpisodeDone,
}

pub type Observation = [f64; OBS_DIM];

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
    pub success: bool,
    pub distance: f64,
}

/// `r = r_s - C_T·[T action]` with
/// `r_s = c(1 + max(0, 1 - n/(L+10)))` on success and `-d/L_max` otherwise.
pub fn reward(cfg: &EnvConfig, step_index: usize, target_gen_length: usize, distance_after: f64, action_was_t: bool) -> f64 {
    let state = if distance_after < cfg.tolerance {
        let frac = step_index as f64 / (target_gen_length as f64 + 10.0);
        cfg.success_scale * (1.0 + (1.0 - frac).max(0.0))
    } else {
        -distance_after / cfg.max_steps as f64
    };
    if action_was_t {
        state - cfg.t_cost
    } else {
        state
    }
}

/// Residual `target·current†` with its phase fixed, as 8 reals.
pub fn observe(target: &UnitaryGate, current: &UnitaryGate) -> Observation {
    phase_normalize(&target.mul(&current.adjoint())).to_reals()
}

#[derive(Debug, Clone)]
pub struct CompileEnv {
    cfg: EnvConfig,
    target: UnitaryGate,
    target_gen_length: usize,
    current: UnitaryGate,
    actions: GateSequence,
    done: bool,
    success: bool,
    last_distance: f64,
}

impl CompileEnv {
    pub fn new(cfg: EnvConfig, target: UnitaryGate, target_gen_length: usize) -> Self {
        let mut env = Self {
            cfg,
            target,
            target_gen_length,
            current: UnitaryGate::identity(),
            actions: GateSequence::empty(),
            done: false,
            success: false,
            last_distance: 0.0,
        };
        env.reset(target, target_gen_length);
        env
    }

    pub fn reset(&mut self, target: UnitaryGate, target_gen_length: usize) -> Observation {
        self.target = target;
        self.target_gen_length = target_gen_length;
        self.current = UnitaryGate::identity();
        self.actions = GateSequence::empty();
        self.done = false;
        self.success = false;
        self.last_distance = fidelity_distance(&self.current, &self.target);
        self.observation()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn target(&self) -> &UnitaryGate {
        &self.target
    }

    pub fn current(&self) -> &UnitaryGate {
        &self.current
    }

    pub fn actions(&self) -> &GateSequence {
        &self.actions
    }

    pub fn step_index(&self) -> usize {
        self.actions.len()
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn succeeded(&self) -> bool {
        self.success
    }

    pub fn distance(&self) -> f64 {
        self.last_distance
    }

    pub fn observation(&self) -> Observation {
        observe(&self.target, &self.current)
    }

    /// Appends `action` in circuit order: `current ← M(action)·current`.
    pub fn step(&mut self, action: GateId) -> Result<StepOutcome, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        self.current = action.matrix().mul(&self.current);
        self.actions.push(action);
        let distance = fidelity_distance(&self.current, &self.target);
        let n = self.actions.len();
        let r = reward(&self.cfg, n, self.target_gen_length, distance, action.is_t());
        self.success = distance < self.cfg.tolerance;
        self.done = self.success || n >= self.cfg.max_steps;
        self.last_distance = distance;
        Ok(StepOutcome {
            observation: self.observation(),
            reward: r,
            done: self.done,
            success: self.success,
            distance,
        })
    }
}
