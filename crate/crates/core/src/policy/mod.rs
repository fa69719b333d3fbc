//! Value-based learners, the adversarial risk model and action shields.

mod features;
mod mlp;
mod replay;
mod shield;
mod store;
mod tabular;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Action, Env, EnvError, EnvState, Rewards};

pub use features::{one_hot_indices, FeatureView};
pub use mlp::{Mlp, Sample};
pub use replay::{Experience, ReplayBuffer};
pub use shield::{shield_filter, train_risk_model, RiskModel, RiskSpec, Shield, DEFAULT_THRESHOLD};
pub use store::{flatten_state, read_curve, risk_rows, write_curve, write_risk_csv, ModelFile, RiskRow, MODEL_FORMAT};
pub use tabular::{QRow, TabularQ};
pub use train::{train_value_policy, CurvePoint, ShieldAudit, TrainOutcome, TrainSpec};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error("invalid hyperparameters: {0}")]
    Hyperparams(String),
    #[error("model was trained for a different world (hash {found}, expected {expected})")]
    ConfigMismatch { expected: String, found: String },
}

/// Reward signal a value policy maximizes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Instr,
    Resc,
    /// `instr + weight * (push + resc)`.
    Scalarized { weight: f64 },
}

impl Objective {
    pub fn reward(&self, r: &Rewards) -> f64 {
        match self {
            Objective::Instr => r.instr,
            Objective::Resc => r.resc,
            Objective::Scalarized { weight } => r.instr + weight * (r.push + r.resc),
        }
    }
}

/// Estimator family used when training.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Tabular,
    Mlp { hidden: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Tabular(TabularQ),
    Mlp(Mlp),
}

impl Estimator {
    pub fn values(&self, key: &[u16], slots: usize) -> QRow {
        match self {
            Estimator::Tabular(t) => t.row(key),
            Estimator::Mlp(m) => {
                let out = m.forward(&one_hot_indices(key, slots));
                std::array::from_fn(|i| out[i])
            }
        }
    }
}

/// Per-episode exploration rate decaying exponentially from `start` to `end`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub start: f64,
    pub end: f64,
    /// Fraction of episodes after which `end` is reached.
    pub decay_fraction: f64,
}

impl Default for EpsilonSchedule {
    fn default() -> Self {
        EpsilonSchedule { start: 1.0, end: 0.05, decay_fraction: 0.8 }
    }
}

impl EpsilonSchedule {
    pub fn value(&self, episode: usize, episodes: usize) -> f64 {
        let horizon = (self.decay_fraction * episodes as f64).max(1.0);
        if self.start <= 0.0 || self.end >= self.start {
            return self.end.min(self.start);
        }
        let rate = (self.end / self.start).ln() / horizon;
        (self.start * (rate * episode as f64).exp()).max(self.end)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub learning_rate: f64,
    pub gamma: f64,
    pub target_sync_steps: usize,
    pub replay_capacity: usize,
    pub batch_size: usize,
    pub epsilon: EpsilonSchedule,
    pub episodes: usize,
    /// Tabular only: step size 1/n per (state, action) instead of `learning_rate`.
    #[serde(default)]
    pub sample_average: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            learning_rate: 0.001,
            gamma: 0.9,
            target_sync_steps: 1000,
            replay_capacity: 1000,
            batch_size: 32,
            epsilon: EpsilonSchedule::default(),
            episodes: 1000,
            sample_average: false,
        }
    }
}

impl Hyperparams {
    /// Defaults suited to lookup tables: a large step size.
    pub fn tabular(episodes: usize) -> Self {
        Hyperparams { learning_rate: 0.5, episodes, ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |m: &str| Err(PolicyError::Hyperparams(m.to_string()));
        if !(self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.epsilon.end > self.epsilon.start || self.epsilon.end < 0.0 || self.epsilon.start > 1.0 {
            return bad("epsilon schedule must be nonincreasing within [0, 1]");
        }
        if self.batch_size == 0 || self.replay_capacity == 0 || self.target_sync_steps == 0 {
            return bad("batch_size, replay_capacity and target_sync_steps must be positive");
        }
        Ok(())
    }
}

/// Learned action values for one objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicyModel {
    pub objective: Objective,
    pub view: FeatureView,
    pub estimator: Estimator,
    /// Hash of the world configuration the model was trained on.
    pub config_hash: String,
    /// Grid cells plus one, the one-hot slot width per entity.
    pub slots: usize,
}

impl PolicyModel {
    pub fn new_tabular(objective: Objective, view: FeatureView, env: &Env) -> Self {
        PolicyModel {
            objective,
            view,
            estimator: Estimator::Tabular(TabularQ::new()),
            config_hash: env.config().hash(),
            slots: env.layout().off_index() + 1,
        }
    }

    pub fn key(&self, env: &Env, s: &EnvState) -> Vec<u16> {
        self.view.key(env, s)
    }

    pub fn q_values(&self, env: &Env, s: &EnvState) -> QRow {
        self.estimator.values(&self.key(env, s), self.slots)
    }

    pub fn greedy(&self, env: &Env, s: &EnvState) -> Action {
        argmax(&self.q_values(env, s))
    }

    /// Actions sorted by decreasing value, ties in fixed action order.
    pub fn ranking(&self, env: &Env, s: &EnvState) -> Vec<Action> {
        rank(&self.q_values(env, s))
    }
}

/// First action with maximal value.
pub fn argmax(q: &QRow) -> Action {
    let mut best = 0;
    for i in 1..Action::COUNT {
        if q[i] > q[best] {
            best = i;
        }
    }
    Action::from_index(best)
}

pub fn rank(q: &QRow) -> Vec<Action> {
    let mut idx: Vec<usize> = (0..Action::COUNT).collect();
    idx.sort_by(|&a, &b| q[b].partial_cmp(&q[a]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));
    idx.into_iter().map(Action::from_index).collect()
}

/// One tabular Q-learning step; terminal successors bootstrap from zero.
pub fn q_update(
    table: &mut TabularQ,
    key: &[u16],
    action: Action,
    reward: f64,
    next_key: &[u16],
    terminal: bool,
    hp: &Hyperparams,
) -> f64 {
    let next = if terminal { 0.0 } else { table.row(next_key).into_iter().fold(f64::NEG_INFINITY, f64::max) };
    if hp.sample_average {
        table.update_mean(key, action, reward + hp.gamma * next)
    } else {
        table.update(key, action, reward + hp.gamma * next, hp.learning_rate)
    }
}
