use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use super::EmbedError;
use crate::env::{Action, Env, EnvState, Termination};
use crate::exec::Exec;

/// Explicit deterministic MDP over canonical states.
#[derive(Clone, Debug)]
pub struct TabularMdp {
    pub states: Vec<EnvState>,
    index: HashMap<EnvState, usize>,
    /// Successor per action, `None` when the step ends the episode.
    pub next: Vec<[Option<u32>; Action::COUNT]>,
    /// Instrumental, normative (push) and evaluative (rescue) rewards.
    pub r_instr: Vec<[f64; Action::COUNT]>,
    pub r_push: Vec<[f64; Action::COUNT]>,
    pub r_resc: Vec<[f64; Action::COUNT]>,
}

impl TabularMdp {
    /// Closes `seeds` under every action, reaching the goal being terminal.
    pub fn build(env: &Env, seeds: &[EnvState], budget: usize, deadline: Option<Instant>) -> Result<Self, EmbedError> {
        if !env.config().is_deterministic() {
            return Err(EmbedError::Stochastic);
        }
        let mut env = env.clone().with_termination(Termination::GoalReached);
        let mut mdp = TabularMdp {
            states: Vec::new(),
            index: HashMap::new(),
            next: Vec::new(),
            r_instr: Vec::new(),
            r_push: Vec::new(),
            r_resc: Vec::new(),
        };
        let mut queue = VecDeque::new();
        for s in seeds {
            let c = env.canonical(s);
            if !mdp.index.contains_key(&c) {
                queue.push_back(mdp.intern(c));
            }
        }
        let mut expanded = 0usize;
        while let Some(i) = queue.pop_front() {
            expanded += 1;
            if expanded % 4096 == 0 {
                if let Some(d) = deadline {
                    if Instant::now() >= d {
                        return Err(EmbedError::Timeout { states: mdp.states.len() });
                    }
                }
            }
            let s = mdp.states[i].clone();
            let mut next = [None; Action::COUNT];
            let (mut ri, mut rp, mut rr) = ([0.0; Action::COUNT], [0.0; Action::COUNT], [0.0; Action::COUNT]);
            for a in Action::ALL {
                let tr = env.transition(&s, a);
                ri[a.index()] = tr.rewards.instr;
                rp[a.index()] = tr.rewards.push;
                rr[a.index()] = tr.rewards.resc;
                if !tr.terminated {
                    let c = env.canonical(&tr.state);
                    let j = match mdp.index.get(&c) {
                        Some(&j) => j,
                        None => {
                            if mdp.states.len() >= budget {
                                return Err(EmbedError::StateBudget(budget));
                            }
                            let j = mdp.intern(c);
                            queue.push_back(j);
                            j
                        }
                    };
                    next[a.index()] = Some(j as u32);
                }
            }
            mdp.next[i] = next;
            mdp.r_instr[i] = ri;
            mdp.r_push[i] = rp;
            mdp.r_resc[i] = rr;
        }
        Ok(mdp)
    }

    fn intern(&mut self, s: EnvState) -> usize {
        let i = self.states.len();
        self.index.insert(s.clone(), i);
        self.states.push(s);
        self.next.push([None; Action::COUNT]);
        self.r_instr.push([0.0; Action::COUNT]);
        self.r_push.push([0.0; Action::COUNT]);
        self.r_resc.push([0.0; Action::COUNT]);
        i
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, env: &Env, s: &EnvState) -> Option<usize> {
        self.index.get(&env.canonical(s)).copied()
    }

    /// Per-(state, action) reward table for a linear combination of the three signals.
    pub fn combine(&self, w_instr: f64, w_push: f64, w_resc: f64) -> Vec<[f64; Action::COUNT]> {
        (0..self.len())
            .map(|i| std::array::from_fn(|a| w_instr * self.r_instr[i][a] + w_push * self.r_push[i][a] + w_resc * self.r_resc[i][a]))
            .collect()
    }

    pub fn q(&self, rewards: &[[f64; Action::COUNT]], values: &[f64], gamma: f64, s: usize) -> [f64; Action::COUNT] {
        std::array::from_fn(|a| rewards[s][a] + self.next[s][a].map_or(0.0, |j| gamma * values[j as usize]))
    }

    /// Optimal values by synchronous value iteration from `warm` (or zero).
    pub fn solve_values(
        &self,
        rewards: &[[f64; Action::COUNT]],
        gamma: f64,
        tol: f64,
        warm: Option<&[f64]>,
        exec: Exec,
    ) -> Vec<f64> {
        let mut v = warm.map_or_else(|| vec![0.0; self.len()], <[f64]>::to_vec);
        let mut out = vec![0.0; self.len()];
        loop {
            exec.for_each_mut(&mut out, |s, x| {
                *x = self.q(rewards, &v, gamma, s).into_iter().fold(f64::NEG_INFINITY, f64::max);
            });
            let delta = out.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut v, &mut out);
            if delta <= tol {
                return v;
            }
        }
    }

    /// Values of a fixed policy restricted to allowed actions, maximizing within them.
    pub fn solve_restricted(
        &self,
        rewards: &[[f64; Action::COUNT]],
        allowed: &[[bool; Action::COUNT]],
        gamma: f64,
        tol: f64,
        exec: Exec,
    ) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        let mut out = vec![0.0; self.len()];
        loop {
            exec.for_each_mut(&mut out, |s, x| {
                let q = self.q(rewards, &v, gamma, s);
                *x = (0..Action::COUNT).filter(|&a| allowed[s][a]).map(|a| q[a]).fold(f64::NEG_INFINITY, f64::max);
            });
            let delta = out.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            std::mem::swap(&mut v, &mut out);
            if delta <= tol {
                return v;
            }
        }
    }
}
