use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    one_hot_indices, Backend, Estimator, Experience, FeatureView, Hyperparams, Mlp, PolicyError, QRow, ReplayBuffer,
    Sample, TabularQ,
};
use crate::env::{Action, Env, EnvState, ResetMode, Termination};

pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// Estimated probability that an action violates a constraint.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskModel {
    pub constraint: String,
    pub view: FeatureView,
    pub estimator: Estimator,
    pub config_hash: String,
    pub slots: usize,
}

impl RiskModel {
    pub fn risks(&self, env: &Env, s: &EnvState) -> QRow {
        self.estimator.values(&self.view.key(env, s), self.slots).map(|r| r.clamp(0.0, 1.0))
    }

    pub fn risk(&self, env: &Env, s: &EnvState, a: Action) -> f64 {
        self.risks(env, s)[a.index()]
    }
}

/// Post-hoc filter allowing only actions whose risk stays within the threshold.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Shield {
    pub risk: RiskModel,
    pub threshold: f64,
}

impl Shield {
    pub fn new(risk: RiskModel, threshold: f64) -> Self {
        Shield { risk, threshold }
    }

    pub fn constraint(&self) -> &str {
        &self.risk.constraint
    }

    pub fn safe_set(&self, env: &Env, s: &EnvState) -> Vec<Action> {
        let r = self.risk.risks(env, s);
        Action::ALL.into_iter().filter(|a| r[a.index()] <= self.threshold).collect()
    }

    pub fn is_safe(&self, env: &Env, s: &EnvState, a: Action) -> bool {
        self.risk.risk(env, s, a) <= self.threshold
    }
}

/// Highest-ranked action every shield accepts.
///
/// When no action passes all shields, returns the action with the least
/// worst-case risk (ties by rank) and flags the fallback.
pub fn shield_filter(shields: &[&Shield], env: &Env, s: &EnvState, ranked: &[Action]) -> (Action, bool) {
    let risks: Vec<QRow> = shields.iter().map(|sh| sh.risk.risks(env, s)).collect();
    let safe = |a: Action| shields.iter().zip(&risks).all(|(sh, r)| r[a.index()] <= sh.threshold);
    if let Some(&a) = ranked.iter().find(|&&a| safe(a)) {
        return (a, false);
    }
    let worst = |a: Action| risks.iter().map(|r| r[a.index()]).fold(0.0, f64::max);
    let mut best = ranked[0];
    for &a in ranked {
        if worst(a) < worst(best) {
            best = a;
        }
    }
    (best, true)
}

/// Setup for adversarial risk training.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskSpec {
    pub constraint: String,
    pub view: FeatureView,
    pub backend: Backend,
    /// `episodes` is the number of single-step resets.
    pub hp: Hyperparams,
    pub reset: ResetMode,
}

impl RiskSpec {
    pub fn bridge_guard(constraint: &str, resets: usize) -> Self {
        RiskSpec {
            constraint: constraint.to_string(),
            view: FeatureView::Window(1),
            backend: Backend::Tabular,
            hp: Hyperparams { gamma: 0.0, ..Hyperparams::tabular(resets) },
            reset: ResetMode::RandomPassable,
        }
    }
}

/// Contextual bandit that seeks out violations: exploits the riskiest action,
/// explores uniformly, and regresses each estimate toward the observed cost.
pub fn train_risk_model(env: &Env, spec: &RiskSpec, seed: u64) -> Result<RiskModel, PolicyError> {
    spec.hp.validate()?;
    let hp = &spec.hp;
    let mut env = env.clone().with_termination(Termination::SingleStep);
    env.reseed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b1d_9e5a_fe);
    let slots = env.layout().off_index() + 1;
    let mut table = TabularQ::new();
    let mut net = match spec.backend {
        Backend::Tabular => None,
        Backend::Mlp { hidden } => Some((
            Mlp::new(spec.view.input_width(&env), hidden, Action::COUNT, &mut rng),
            ReplayBuffer::new(hp.replay_capacity),
        )),
    };
    for episode in 0..hp.episodes {
        let epsilon = hp.epsilon.value(episode, hp.episodes);
        let (s, _) = env.reset(&spec.reset);
        let key = spec.view.key(&env, &s);
        let action = if rng.gen::<f64>() < epsilon {
            Action::from_index(rng.gen_range(0..Action::COUNT))
        } else {
            let r: QRow = match &net {
                None => table.row(&key),
                Some((m, _)) => {
                    let out = m.forward(&one_hot_indices(&key, slots));
                    std::array::from_fn(|i| out[i])
                }
            };
            let top = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let best: Vec<usize> = (0..Action::COUNT).filter(|&i| r[i] == top).collect();
            Action::from_index(best[rng.gen_range(0..best.len())])
        };
        let tr = env.step(action);
        match &mut net {
            None => {
                table.update_mean(&key, action, tr.cost);
            }
            Some((m, buffer)) => {
                buffer.push(Experience { key, action: action.index(), reward: tr.cost, next_key: Vec::new(), done: true });
                if buffer.len() >= hp.batch_size {
                    let batch = buffer.sample(hp.batch_size, &mut rng);
                    let actives: Vec<Vec<usize>> = batch.iter().map(|e| one_hot_indices(&e.key, slots)).collect();
                    let samples: Vec<Sample<'_>> = batch
                        .iter()
                        .zip(&actives)
                        .map(|(e, active)| Sample { active, output: e.action, target: e.reward })
                        .collect();
                    m.train(&samples, hp.learning_rate);
                }
            }
        }
    }
    let estimator = match net {
        None => Estimator::Tabular(table),
        Some((m, _)) => Estimator::Mlp(m.snapshot()),
    };
    Ok(RiskModel {
        constraint: spec.constraint.clone(),
        view: spec.view,
        estimator,
        config_hash: env.config().hash(),
        slots,
    })
}
