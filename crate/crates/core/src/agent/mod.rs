//! Reason-based agent: derives obligations from its theory, follows goal policies,
//! shields constraints, and revises its theory from judge feedback.

mod store;

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use store::{load_bundle, save_bundle, AgentMeta, AGENT_FORMAT};

use crate::env::{Action, Env, EnvState, Rewards};
use crate::judge::{Feedback, Judge, JudgeError};
use crate::policy::{shield_filter, PolicyError, PolicyModel, Shield};
use crate::reason::{
    build_background, ConflictEncoding, FeedbackOutcome, Formula, ObligationKind, ReasonError, ReasonTheory, Reasoner,
    RuleSet,
};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Reason(#[from] ReasonError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Judge(#[from] JudgeError),
    #[error("no policy for goal obligation {0}")]
    MissingPolicy(String),
    #[error("no shield for constraint obligation {0}")]
    MissingShield(String),
    #[error("obligation {0} has no kind")]
    UnknownObligation(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed agent directory: {0}")]
    Format(String),
}

/// Everything the agent consulted to pick one action.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTrace {
    pub labels: Vec<String>,
    pub background: Vec<Formula>,
    pub conflicts: Vec<(String, String)>,
    pub proper_scenarios: Vec<Vec<String>>,
    pub chosen: Vec<String>,
    #[serde(skip)]
    pub chosen_set: RuleSet,
    pub obligations: Vec<String>,
    /// Goal obligation whose policy acted, if any.
    pub goal: Option<String>,
    pub action: Action,
    /// Actions every active shield accepted, when shields were consulted.
    pub safe_set: Option<Vec<Action>>,
    pub fallback: bool,
    /// The action conforms to every derived obligation.
    pub conforms: bool,
}

/// Theory, instrumental policy, moral policies and shields.
#[derive(Clone, Debug)]
pub struct AgentBundle {
    pub theory: ReasonTheory,
    pub instrumental: PolicyModel,
    pub moral_policies: BTreeMap<String, PolicyModel>,
    pub shields: BTreeMap<String, Shield>,
    pub encoding: ConflictEncoding,
    rng: ChaCha8Rng,
}

impl AgentBundle {
    pub fn new(theory: ReasonTheory, instrumental: PolicyModel, seed: u64) -> Self {
        AgentBundle {
            theory,
            instrumental,
            moral_policies: BTreeMap::new(),
            shields: BTreeMap::new(),
            encoding: ConflictEncoding::Pairwise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn with_policy(mut self, obligation: &str, policy: PolicyModel) -> Self {
        self.moral_policies.insert(obligation.to_string(), policy);
        self
    }

    pub fn with_shield(mut self, obligation: &str, shield: Shield) -> Self {
        self.shields.insert(obligation.to_string(), shield);
        self
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn kind(&self, obligation: &str) -> Result<ObligationKind, AgentError> {
        self.theory.kind(obligation).ok_or_else(|| AgentError::UnknownObligation(obligation.into()))
    }

    /// Actions conforming to an obligation: the goal policy's choice, or a shield's safe set.
    pub fn conformance_set(&self, env: &Env, s: &EnvState, obligation: &str) -> Result<Vec<Action>, AgentError> {
        match self.kind(obligation)? {
            ObligationKind::Goal => {
                let p = self.moral_policies.get(obligation).ok_or_else(|| AgentError::MissingPolicy(obligation.into()))?;
                Ok(vec![p.greedy(env, s)])
            }
            ObligationKind::Constraint => {
                let sh = self.shields.get(obligation).ok_or_else(|| AgentError::MissingShield(obligation.into()))?;
                Ok(sh.safe_set(env, s))
            }
        }
    }

    /// Pairs of triggered conclusions with no jointly conforming action.
    pub fn detect_conflicts(&self, env: &Env, s: &EnvState, triggered: RuleSet) -> Result<Vec<(String, String)>, AgentError> {
        let mut concl: Vec<&String> = triggered.iter().map(|i| &self.theory.rules[i].conclusion).collect();
        concl.sort();
        concl.dedup();
        let sets: Vec<Vec<Action>> =
            concl.iter().map(|o| self.conformance_set(env, s, o)).collect::<Result<_, _>>()?;
        let mut out = Vec::new();
        for i in 0..concl.len() {
            for j in i + 1..concl.len() {
                if !sets[i].iter().any(|a| sets[j].contains(a)) {
                    out.push((concl[i].clone(), concl[j].clone()));
                }
            }
        }
        Ok(out)
    }

    /// Goal rule of `s` not below any other goal rule of `s`.
    fn leading_goal(&self, s: RuleSet) -> Option<usize> {
        let goals: Vec<usize> = s
            .iter()
            .filter(|&i| self.theory.kind(&self.theory.rules[i].conclusion) == Some(ObligationKind::Goal))
            .collect();
        goals.iter().copied().find(|&i| !goals.iter().any(|&j| self.theory.is_lower_idx(i, j)))
    }

    pub fn select_action(&mut self, env: &Env, s: &EnvState) -> Result<(Action, DecisionTrace), AgentError> {
        let labels = env.labels(s).atoms();
        let knowledge = self.theory.knowledge.clone();
        let w0 = build_background(&labels, &knowledge, &[], self.encoding);
        let triggered = Reasoner::new(&self.theory, &w0)?.triggered(RuleSet::EMPTY);
        let conflicts = self.detect_conflicts(env, s, triggered)?;
        let background = build_background(&labels, &knowledge, &conflicts, self.encoding);
        let scenarios = Reasoner::new(&self.theory, &background)?.proper_scenarios()?;
        let chosen = match scenarios.len() {
            0 => RuleSet::EMPTY,
            1 => scenarios[0],
            n => scenarios[self.rng.gen_range(0..n)],
        };
        let obligations: Vec<String> = self.theory.derive_obligations(chosen).into_iter().collect();
        let mut safe_set = None;
        let mut fallback = false;
        let goal = self.leading_goal(chosen).map(|i| self.theory.rules[i].conclusion.clone());
        let action = match &goal {
            Some(g) => self.conformance_set(env, s, g)?[0],
            None => {
                let shields: Vec<&Shield> = obligations
                    .iter()
                    .filter(|o| self.theory.kind(o) == Some(ObligationKind::Constraint))
                    .map(|o| self.shields.get(o).ok_or_else(|| AgentError::MissingShield(o.clone())))
                    .collect::<Result<_, _>>()?;
                let ranked = self.instrumental.ranking(env, s);
                if shields.is_empty() {
                    ranked[0]
                } else {
                    let (a, fb) = shield_filter(&shields, env, s, &ranked);
                    safe_set = Some(
                        Action::ALL.into_iter().filter(|&a| shields.iter().all(|sh| sh.is_safe(env, s, a))).collect(),
                    );
                    fallback = fb;
                    a
                }
            }
        };
        let mut conforms = true;
        for o in &obligations {
            conforms &= self.conformance_set(env, s, o)?.contains(&action);
        }
        let trace = DecisionTrace {
            labels,
            background,
            conflicts,
            proper_scenarios: scenarios.iter().map(|sc| sc.ids(&self.theory)).collect(),
            chosen: chosen.ids(&self.theory),
            chosen_set: chosen,
            obligations,
            goal,
            action,
            safe_set,
            fallback,
            conforms,
        };
        Ok((action, trace))
    }

    /// Revises the theory from a verdict on an action taken under `chosen`.
    pub fn integrate(&mut self, chosen: RuleSet, feedback: &Feedback) -> Result<FeedbackOutcome, AgentError> {
        let (next, outcome) =
            self.theory.apply_feedback(chosen, &feedback.obligation, &feedback.reason_formula(), feedback.kind)?;
        self.theory = next;
        Ok(outcome)
    }
}

/// One executed step.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub state: EnvState,
    pub trace: DecisionTrace,
    pub rewards: Rewards,
    pub cost: f64,
    pub feedback: Option<(Feedback, FeedbackOutcome)>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub steps: usize,
    pub returns: Rewards,
    pub cost: f64,
    /// Steps on which a conflict between obligations was detected.
    pub conflict_steps: usize,
    /// Someone was in the water in a state the agent acted in.
    pub water: bool,
    pub nonconforming_steps: usize,
    pub feedback_count: usize,
    pub reached_goal: bool,
}

#[derive(Clone, Debug, Default)]
pub struct EpisodeRecord {
    pub summary: EpisodeSummary,
    /// Filled only when recording was requested.
    pub steps: Vec<StepRecord>,
}

/// Runs the agent from the environment's current state until the episode ends.
pub fn run_episode(
    bundle: &mut AgentBundle,
    env: &mut Env,
    mut judge: Option<&mut dyn Judge>,
    record: bool,
) -> Result<EpisodeRecord, AgentError> {
    let mut out = EpisodeRecord::default();
    loop {
        let s = env.state().clone();
        let (action, trace) = bundle.select_action(env, &s)?;
        let sum = &mut out.summary;
        sum.water |= s.anyone_in_water();
        sum.conflict_steps += usize::from(!trace.conflicts.is_empty());
        sum.nonconforming_steps += usize::from(!trace.conforms);
        let tr = env.step(action);
        sum.steps += 1;
        sum.returns.instr += tr.rewards.instr;
        sum.returns.resc += tr.rewards.resc;
        sum.returns.push += tr.rewards.push;
        sum.cost += tr.cost;
        sum.reached_goal |= tr.state.agent == env.layout().goal;
        let mut feedback = None;
        if let Some(j) = judge.as_deref_mut() {
            if let Some(f) = j.judge(env, &s, action, &trace.chosen)? {
                let outcome = bundle.integrate(trace.chosen_set, &f)?;
                out.summary.feedback_count += 1;
                feedback = Some((f, outcome));
            }
        }
        if record {
            out.steps.push(StepRecord { state: s, trace, rewards: tr.rewards, cost: tr.cost, feedback });
        }
        if tr.done() {
            return Ok(out);
        }
    }
}
