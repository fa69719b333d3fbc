//! Ethical embedding: the smallest weight on the ethical rewards that makes every
//! optimal policy of the combined reward ethically optimal.

mod mdp;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mdp::TabularMdp;

use crate::env::{Action, Drowning, Env, EnvError, EnvState, ResetMode, Rewards, Transition};
use crate::exec::Exec;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("exact planning needs a deterministic world")]
    Stochastic,
    #[error("timed out after enumerating {states} states")]
    Timeout { states: usize },
    #[error("state space exceeds the budget of {0} states")]
    StateBudget(usize),
    #[error("no weight up to {0} yields ethically optimal behavior")]
    NoWeight(f64),
    #[error(transparent)]
    Env(#[from] EnvError),
}

/// Where ethical optimality is required.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    /// States reachable from the initial state under optimal play.
    FromS0,
    /// Every state reachable from any random reset.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbedConfig {
    pub scope: Scope,
    pub step: f64,
    pub max_weight: f64,
    pub gamma: f64,
    pub timeout: Duration,
    pub state_budget: usize,
    /// Sample the starting states instead of enumerating the reset support.
    pub sampled: Option<Sampling>,
    /// Keep drowning timers in the planning state. When false, states are
    /// positions only and persons in the water stay there.
    pub track_drowning: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub resets: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        EmbedConfig {
            scope: Scope::Full,
            step: 0.01,
            max_weight: 20.0,
            gamma: 0.9,
            timeout: Duration::from_secs(2 * 60 * 60),
            state_budget: 20_000_000,
            sampled: None,
            track_drowning: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub weight: f64,
    pub scope: Scope,
    pub gamma: f64,
    pub step: f64,
    pub states: usize,
    pub checked_states: usize,
    pub elapsed_secs: f64,
    pub config_hash: String,
}

/// Canonical states visited by random walks from random resets.
pub fn estimate_state_space(env: &Env, resets: usize, steps: usize, seed: u64, exec: Exec) -> Vec<EnvState> {
    let batches = exec.map(resets, |k| {
        let mut env = env.clone();
        env.reseed(seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(k as u64));
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).rotate_left(32));
        let (mut s, _) = env.reset(&ResetMode::Random);
        let mut seen = vec![env.canonical(&s)];
        for _ in 0..steps {
            let tr = env.transition(&s, Action::from_index(rng.gen_range(0..Action::COUNT)));
            if tr.terminated {
                break;
            }
            s = tr.state;
            seen.push(env.canonical(&s));
        }
        seen
    });
    let set: BTreeSet<EnvState> = batches.into_iter().flatten().collect();
    set.into_iter().collect()
}

/// Reward wrapper combining the instrumental signal with weighted ethical signals.
pub fn scalarize(rewards: &Rewards, weight: f64) -> f64 {
    rewards.instr + weight * (rewards.push + rewards.resc)
}

/// Steps an environment and returns the combined reward alongside the transition.
pub fn scalarized_step(env: &mut Env, action: Action, weight: f64) -> (Transition, f64) {
    let tr = env.step(action);
    let r = scalarize(&tr.rewards, weight);
    (tr, r)
}

const TIE: f64 = 1e-9;
const TOL: f64 = 1e-12;

/// Smallest grid weight whose optimal policies are all ethically optimal.
pub fn compute_ethical_weight(env: &Env, cfg: &EmbedConfig, exec: Exec) -> Result<EmbeddingReport, EmbedError> {
    let config_hash = env.config().hash();
    let start = Instant::now();
    let deadline = start + cfg.timeout;
    let planning_env;
    let env = if cfg.track_drowning {
        env
    } else {
        let mut c = env.config().clone();
        c.drowning = Drowning::Disabled;
        planning_env = Env::new(c, 0)?;
        &planning_env
    };
    let s0 = env.initial_state();
    let seeds = match (cfg.scope, cfg.sampled) {
        (Scope::FromS0, _) => vec![s0.clone()],
        (Scope::Full, None) => env.reset_support(),
        (Scope::Full, Some(p)) => estimate_state_space(env, p.resets, p.steps, p.seed, exec),
    };
    let mdp = TabularMdp::build(env, &seeds, cfg.state_budget, Some(deadline))?;
    let gamma = cfg.gamma;
    let eth = mdp.combine(0.0, 1.0, 1.0);
    let v_eth = mdp.solve_values(&eth, gamma, TOL, None, exec);
    let ethical: Vec<[bool; Action::COUNT]> = exec.map(mdp.len(), |s| {
        let q = mdp.q(&eth, &v_eth, gamma, s);
        std::array::from_fn(|a| q[a] >= v_eth[s] - TIE)
    });
    let root = mdp.index_of(env, &s0);
    let mut warm: Option<Vec<f64>> = None;
    let steps = (cfg.max_weight / cfg.step).round() as usize;
    for k in 0..=steps {
        if Instant::now() >= deadline {
            return Err(EmbedError::Timeout { states: mdp.len() });
        }
        let w = k as f64 * cfg.step;
        let rewards = mdp.combine(1.0, w, w);
        let v = mdp.solve_values(&rewards, gamma, TOL, warm.as_deref(), exec);
        let optimal = |s: usize| -> Vec<usize> {
            let q = mdp.q(&rewards, &v, gamma, s);
            (0..Action::COUNT).filter(|&a| q[a] >= v[s] - TIE).collect()
        };
        let (ok, checked) = match cfg.scope {
            Scope::Full => {
                let ok = exec.map(mdp.len(), |s| optimal(s).into_iter().all(|a| ethical[s][a]));
                (ok.into_iter().all(|x| x), mdp.len())
            }
            Scope::FromS0 => {
                let mut seen = vec![false; mdp.len()];
                let mut stack: Vec<usize> = root.into_iter().collect();
                let mut ok = true;
                let mut checked = 0;
                while let Some(s) = stack.pop() {
                    if std::mem::replace(&mut seen[s], true) {
                        continue;
                    }
                    checked += 1;
                    for a in optimal(s) {
                        ok &= ethical[s][a];
                        if let Some(j) = mdp.next[s][a] {
                            stack.push(j as usize);
                        }
                    }
                }
                (ok, checked)
            }
        };
        if ok {
            return Ok(EmbeddingReport {
                weight: w,
                scope: cfg.scope,
                gamma,
                step: cfg.step,
                states: mdp.len(),
                checked_states: checked,
                elapsed_secs: start.elapsed().as_secs_f64(),
                config_hash: config_hash.clone(),
            });
        }
        warm = Some(v);
    }
    Err(EmbedError::NoWeight(cfg.max_weight))
}
