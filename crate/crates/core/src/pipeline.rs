//! Training and teaching pipelines shared by the command line and tests.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, AgentBundle, AgentError};
use crate::env::{Action, Env, EnvState, ResetMode, Termination};
use crate::eval::episode_seed;
use crate::judge::{Judge, JudgeError, RuleBasedJudge, NO_PUSH, RESCUE};
use crate::policy::{
    train_risk_model, train_value_policy, Backend, PolicyError, RiskSpec, Shield, TrainOutcome, TrainSpec,
    DEFAULT_THRESHOLD,
};
use crate::reason::{ObligationKind, ReasonTheory};

/// Components of the standard agent.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Net {
    Instrumental,
    Rescue,
    BridgeGuard,
}

/// Episode counts for building a standard agent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub instrumental: usize,
    pub rescue: usize,
    pub bridge_guard: usize,
    pub backend: Backend,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { instrumental: 3000, rescue: 10_000, bridge_guard: 50_000, backend: Backend::Tabular }
    }
}

pub fn train_spec(net: Net, episodes: usize, backend: Backend) -> Option<TrainSpec> {
    match net {
        Net::Instrumental => Some(TrainSpec::instrumental(episodes).with_backend(backend)),
        Net::Rescue => Some(TrainSpec::rescue(episodes).with_backend(backend)),
        Net::BridgeGuard => None,
    }
}

pub fn bridge_guard(env: &Env, resets: usize, backend: Backend, seed: u64) -> Result<Shield, PolicyError> {
    let spec = RiskSpec { backend, ..RiskSpec::bridge_guard(NO_PUSH, resets) };
    Ok(Shield::new(train_risk_model(env, &spec, seed)?, DEFAULT_THRESHOLD))
}

pub fn train_instrumental(
    env: &Env,
    episodes: usize,
    backend: Backend,
    shield: Option<&Shield>,
    seed: u64,
) -> Result<TrainOutcome, PolicyError> {
    let shields: Vec<&Shield> = shield.into_iter().collect();
    train_value_policy(env, &TrainSpec::instrumental(episodes).with_backend(backend), &shields, seed)
}

pub fn train_rescue(env: &Env, episodes: usize, backend: Backend, seed: u64) -> Result<TrainOutcome, PolicyError> {
    train_value_policy(env, &TrainSpec::rescue(episodes).with_backend(backend), &[], seed)
}

/// Untaught agent with an instrumental policy, a rescue policy and a bridge guard.
///
/// The instrumental policy is trained under the shield when `shielded` is set.
pub fn standard_agent(env: &Env, budget: &Budget, shielded: bool, seed: u64) -> Result<AgentBundle, PolicyError> {
    let shield = bridge_guard(env, budget.bridge_guard, budget.backend, seed.wrapping_add(2))?;
    let instrumental =
        train_instrumental(env, budget.instrumental, budget.backend, shielded.then_some(&shield), seed)?.model;
    let rescue = train_rescue(env, budget.rescue, budget.backend, seed.wrapping_add(1))?.model;
    Ok(AgentBundle::new(ReasonTheory::new(), instrumental, seed).with_policy(RESCUE, rescue).with_shield(NO_PUSH, shield))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TeachReport {
    pub episodes: usize,
    pub feedback: usize,
    pub rules: usize,
    pub order: Vec<(String, String)>,
}

/// Where teaching episodes start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curriculum {
    pub reset: ResetMode,
    /// Odd-numbered episodes cycle through the non-empty pools, each in turn.
    pub pools: Vec<Vec<EnvState>>,
}

impl Curriculum {
    pub fn random() -> Self {
        Curriculum { reset: ResetMode::Random, pools: Vec::new() }
    }

    pub fn with_probes(probes: &Probes) -> Self {
        Curriculum { reset: ResetMode::Random, pools: vec![probes.calm.clone(), probes.dilemma.clone()] }
    }

    fn start(&self, episode: usize) -> ResetMode {
        let pools: Vec<&Vec<EnvState>> = self.pools.iter().filter(|p| !p.is_empty()).collect();
        if episode % 2 == 0 || pools.is_empty() {
            return self.reset.clone();
        }
        let k = episode / 2;
        let pool = pools[k % pools.len()];
        ResetMode::Fixed(pool[(k / pools.len()) % pool.len()].clone())
    }
}

/// States where the agent could push someone off a bridge.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Probes {
    /// Nobody is in the water.
    pub calm: Vec<EnvState>,
    /// The judge faces a dilemma and every rescue move it expects pushes someone.
    pub dilemma: Vec<EnvState>,
}

/// Collects up to `count` probes of each sort on random walks from random resets.
pub fn find_probes(env: &Env, judge: &RuleBasedJudge, count: usize, walks: usize, seed: u64) -> Result<Probes, JudgeError> {
    let mut env = env.clone().with_termination(Termination::TruncationOnly);
    env.reseed(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut calm, mut dilemma) = (BTreeSet::new(), BTreeSet::new());
    'walks: for _ in 0..walks {
        env.reset(&ResetMode::Random);
        loop {
            let mut s = env.state().clone();
            s.step = 0;
            if Action::ALL.into_iter().any(|a| env.would_collide(&s, a)) {
                if !s.anyone_in_water() {
                    if calm.len() < count {
                        calm.insert(s);
                    }
                } else if dilemma.len() < count && judge.dilemmas(&env, &s)?.iter().any(|(a, b)| {
                    [a, b].into_iter().any(|o| {
                        judge.theory.kind(o) == Some(ObligationKind::Goal)
                            && judge
                                .expected_actions(&env, &s, o)
                                .is_ok_and(|e| e.iter().all(|&m| env.would_collide(&s, m)))
                    })
                }) {
                    dilemma.insert(s);
                }
                if calm.len() >= count && dilemma.len() >= count {
                    break 'walks;
                }
            }
            if env.step(Action::from_index(rng.gen_range(0..Action::COUNT))).done() {
                break;
            }
        }
    }
    Ok(Probes { calm: calm.into_iter().collect(), dilemma: dilemma.into_iter().collect() })
}

/// Runs `episodes` judged episodes, revising the agent's theory.
pub fn teach(
    bundle: &mut AgentBundle,
    env: &Env,
    judge: &mut dyn Judge,
    episodes: usize,
    curriculum: &Curriculum,
    seed: u64,
) -> Result<TeachReport, AgentError> {
    let mut env = env.clone().with_termination(Termination::GoalReached);
    let mut report = TeachReport { episodes, ..Default::default() };
    for i in 0..episodes {
        let s = episode_seed(seed, i);
        env.reseed(s);
        bundle.reseed(s);
        env.reset(&curriculum.start(i));
        report.feedback += run_episode(bundle, &mut env, Some(judge), false)?.summary.feedback_count;
    }
    report.rules = bundle.theory.rules.len();
    report.order = bundle.theory.order().map(|(a, b)| (a.to_string(), b.to_string())).collect();
    Ok(report)
}
