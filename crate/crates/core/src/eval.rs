//! Batch evaluation with per-episode seeds.

use serde::{Deserialize, Serialize};

use crate::agent::{run_episode, AgentBundle, AgentError, EpisodeSummary};
use crate::env::{Env, ResetMode, Termination};
use crate::exec::Exec;
use crate::policy::PolicyModel;

/// What gets evaluated.
#[derive(Clone, Debug)]
pub enum Subject {
    Agent(Box<AgentBundle>),
    /// A single value policy, e.g. trained on a scalarized reward.
    Policy(PolicyModel),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalSpec {
    pub episodes: usize,
    pub reset: ResetMode,
    pub termination: Termination,
    pub seed: u64,
}

impl EvalSpec {
    pub fn new(episodes: usize, seed: u64) -> Self {
        EvalSpec { episodes, reset: ResetMode::Random, termination: Termination::GoalReached, seed }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub episodes: usize,
    pub r_instr: f64,
    pub r_resc: f64,
    pub r_push: f64,
    /// Episodes in which someone was in the water while the agent acted.
    pub count_resc: usize,
    /// Episodes with at least one conflict-flagged step.
    pub count_conflict: usize,
    pub conflict_steps: usize,
    pub pushes: f64,
    pub goal_reached: usize,
    pub nonconforming_steps: usize,
    pub total_steps: usize,
    pub seed: u64,
    pub config_hash: String,
}

impl EvalReport {
    pub fn from_episodes(episodes: &[EpisodeSummary], seed: u64, config_hash: &str) -> Self {
        let mut r = EvalReport { seed, config_hash: config_hash.to_string(), ..Default::default() };
        for e in episodes {
            r.episodes += 1;
            r.r_instr += e.returns.instr;
            r.r_resc += e.returns.resc;
            r.r_push += e.returns.push;
            r.count_resc += usize::from(e.water);
            r.count_conflict += usize::from(e.conflict_steps > 0);
            r.conflict_steps += e.conflict_steps;
            r.pushes += e.cost;
            r.goal_reached += usize::from(e.reached_goal);
            r.nonconforming_steps += e.nonconforming_steps;
            r.total_steps += e.steps;
        }
        r
    }

    pub fn to_table(&self) -> String {
        let rows: [(&str, String); 13] = [
            ("episodes", self.episodes.to_string()),
            ("R_instr", fmt(self.r_instr)),
            ("R_resc", fmt(self.r_resc)),
            ("R_push", fmt(self.r_push)),
            ("count_resc", self.count_resc.to_string()),
            ("count_conflict", self.count_conflict.to_string()),
            ("conflict_steps", self.conflict_steps.to_string()),
            ("pushes", fmt(self.pushes)),
            ("goal_reached", self.goal_reached.to_string()),
            ("nonconforming_steps", self.nonconforming_steps.to_string()),
            ("total_steps", self.total_steps.to_string()),
            ("seed", self.seed.to_string()),
            ("config_hash", self.config_hash.clone()),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        rows.iter().map(|(k, v)| format!("{k:<width$}  {v}\n")).collect()
    }
}

fn fmt(x: f64) -> String {
    if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.4}")
    }
}

/// Seed of episode `i` in a batch; independent of scheduling.
pub fn episode_seed(seed: u64, i: usize) -> u64 {
    let mut z = seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Runs one greedy episode of `policy` from the env's current state.
pub fn run_policy_episode(policy: &PolicyModel, env: &mut Env) -> EpisodeSummary {
    let mut sum = EpisodeSummary::default();
    loop {
        let s = env.state().clone();
        sum.water |= s.anyone_in_water();
        let tr = env.step(policy.greedy(env, &s));
        sum.steps += 1;
        sum.returns.instr += tr.rewards.instr;
        sum.returns.resc += tr.rewards.resc;
        sum.returns.push += tr.rewards.push;
        sum.cost += tr.cost;
        sum.reached_goal |= tr.state.agent == env.layout().goal;
        if tr.done() {
            return sum;
        }
    }
}

/// Evaluates without learning; results do not depend on `exec`.
pub fn evaluate_episodes(subject: &Subject, env: &Env, spec: &EvalSpec, exec: Exec) -> Result<Vec<EpisodeSummary>, AgentError> {
    let base = env.clone().with_termination(spec.termination);
    exec.map(spec.episodes, |i| {
        let seed = episode_seed(spec.seed, i);
        let mut env = base.clone();
        env.reseed(seed);
        env.reset(&spec.reset);
        match subject {
            Subject::Agent(b) => {
                let mut b = b.as_ref().clone();
                b.reseed(seed);
                run_episode(&mut b, &mut env, None, false).map(|r| r.summary)
            }
            Subject::Policy(p) => Ok(run_policy_episode(p, &mut env)),
        }
    })
    .into_iter()
    .collect()
}

pub fn evaluate(subject: &Subject, env: &Env, spec: &EvalSpec, exec: Exec) -> Result<EvalReport, AgentError> {
    let eps = evaluate_episodes(subject, env, spec, exec)?;
    Ok(EvalReport::from_episodes(&eps, spec.seed, &env.config().hash()))
}
