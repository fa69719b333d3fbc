use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    argmax, one_hot_indices, q_update, shield_filter, Backend, Estimator, Experience, FeatureView, Hyperparams, Mlp,
    Objective, PolicyError, PolicyModel, ReplayBuffer, Sample, Shield, TabularQ,
};
use crate::env::{Action, Env, ResetMode, Termination};

/// What to learn and how.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub objective: Objective,
    pub view: FeatureView,
    pub backend: Backend,
    pub hp: Hyperparams,
    pub reset: ResetMode,
    pub termination: Termination,
}

impl TrainSpec {
    /// Shortest path to the goal, ignoring persons.
    pub fn instrumental(episodes: usize) -> Self {
        TrainSpec {
            objective: Objective::Instr,
            view: FeatureView::AgentOnly,
            backend: Backend::Tabular,
            hp: Hyperparams { learning_rate: 1.0, ..Hyperparams::tabular(episodes) },
            reset: ResetMode::Random,
            termination: Termination::GoalReached,
        }
    }

    /// Emptying the water as fast as possible.
    pub fn rescue(episodes: usize) -> Self {
        TrainSpec {
            objective: Objective::Resc,
            view: FeatureView::InWater,
            backend: Backend::Tabular,
            hp: Hyperparams { sample_average: true, ..Hyperparams::tabular(episodes) },
            reset: ResetMode::Random,
            termination: Termination::AllRescued,
        }
    }

    /// Linear combination of instrumental and ethical rewards over the full state.
    pub fn scalarized(weight: f64, episodes: usize) -> Self {
        TrainSpec {
            objective: Objective::Scalarized { weight },
            view: FeatureView::Full,
            backend: Backend::Tabular,
            hp: Hyperparams::tabular(episodes),
            reset: ResetMode::Random,
            termination: Termination::GoalReached,
        }
    }

    pub fn with_backend(mut self, backend: Backend) -> Self {
        if let Backend::Mlp { .. } = backend {
            self.hp.learning_rate = Hyperparams::default().learning_rate;
            self.hp.sample_average = false;
        }
        self.backend = backend;
        self
    }
}

/// One row of a training curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub epsilon: f64,
    pub steps: usize,
}

/// Tally of shielded action executions during training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShieldAudit {
    pub executed: usize,
    /// Executed actions outside the safe set of the state they were taken in.
    pub unsafe_executed: usize,
    pub fallbacks: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub model: PolicyModel,
    pub curve: Vec<CurvePoint>,
    pub audit: ShieldAudit,
}

struct DeepState {
    online: Mlp,
    target: Mlp,
    buffer: ReplayBuffer,
    steps: usize,
}

/// Epsilon-greedy value learning; sampled actions pass through `shields` when given.
pub fn train_value_policy(env: &Env, spec: &TrainSpec, shields: &[&Shield], seed: u64) -> Result<TrainOutcome, PolicyError> {
    spec.hp.validate()?;
    let hp = &spec.hp;
    let mut env = env.clone().with_termination(spec.termination);
    env.reseed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_a9e7);
    let slots = env.layout().off_index() + 1;
    let mut model = PolicyModel::new_tabular(spec.objective, spec.view, &env);
    let mut table = TabularQ::new();
    let mut deep = match spec.backend {
        Backend::Tabular => None,
        Backend::Mlp { hidden } => {
            let online = Mlp::new(spec.view.input_width(&env), hidden, Action::COUNT, &mut rng);
            Some(DeepState { target: online.snapshot(), online, buffer: ReplayBuffer::new(hp.replay_capacity), steps: 0 })
        }
    };
    let mut curve = Vec::with_capacity(hp.episodes);
    let mut audit = ShieldAudit::default();
    for episode in 0..hp.episodes {
        let epsilon = hp.epsilon.value(episode, hp.episodes);
        env.reset(&spec.reset);
        let (mut ret, mut steps) = (0.0, 0);
        loop {
            let s = env.state().clone();
            let key = spec.view.key(&env, &s);
            let q = match &deep {
                None => table.row(&key),
                Some(d) => {
                    let out = d.online.forward(&one_hot_indices(&key, slots));
                    std::array::from_fn(|i| out[i])
                }
            };
            let mut action = if rng.gen::<f64>() < epsilon {
                Action::from_index(rng.gen_range(0..Action::COUNT))
            } else {
                argmax(&q)
            };
            if !shields.is_empty() {
                let mut ranked = vec![action];
                ranked.extend(super::rank(&q).into_iter().filter(|&a| a != action));
                let fallback;
                (action, fallback) = shield_filter(shields, &env, &s, &ranked);
                audit.executed += 1;
                audit.fallbacks += usize::from(fallback);
                audit.unsafe_executed += usize::from(!shields.iter().all(|sh| sh.is_safe(&env, &s, action)));
            }
            let tr = env.step(action);
            let reward = spec.objective.reward(&tr.rewards);
            let next_key = spec.view.key(&env, &tr.state);
            match &mut deep {
                None => {
                    q_update(&mut table, &key, action, reward, &next_key, tr.terminated, hp);
                }
                Some(d) => {
                    d.buffer.push(Experience { key, action: action.index(), reward, next_key, done: tr.terminated });
                    if d.buffer.len() >= hp.batch_size {
                        deep_step(d, hp, slots, &mut rng);
                    }
                    d.steps += 1;
                    if d.steps % hp.target_sync_steps == 0 {
                        d.target = d.online.snapshot();
                    }
                }
            }
            ret += reward;
            steps += 1;
            if tr.done() {
                break;
            }
        }
        curve.push(CurvePoint { episode, ret, epsilon, steps });
    }
    model.estimator = match deep {
        None => Estimator::Tabular(table),
        Some(d) => Estimator::Mlp(d.online.snapshot()),
    };
    Ok(TrainOutcome { model, curve, audit })
}

fn deep_step(d: &mut DeepState, hp: &Hyperparams, slots: usize, rng: &mut ChaCha8Rng) {
    let batch = d.buffer.sample(hp.batch_size, rng);
    let actives: Vec<Vec<usize>> = batch.iter().map(|e| one_hot_indices(&e.key, slots)).collect();
    let targets: Vec<f64> = batch
        .iter()
        .map(|e| {
            let next = if e.done {
                0.0
            } else {
                d.target.forward(&one_hot_indices(&e.next_key, slots)).into_iter().fold(f64::NEG_INFINITY, f64::max)
            };
            e.reward + hp.gamma * next
        })
        .collect();
    let samples: Vec<Sample<'_>> = batch
        .iter()
        .zip(&actives)
        .zip(&targets)
        .map(|((e, active), &target)| Sample { active, output: e.action, target })
        .collect();
    d.online.train(&samples, hp.learning_rate);
}
