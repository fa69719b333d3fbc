use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::{Action, Env, EnvState, PersonStatus, TileKind};

/// Maps an obligation to the actions that conform to it in a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Translator {
    /// First steps of every shortest walk toward the person who fell first.
    Rescue,
    /// Never step onto an occupied bridge tile; stand still while sharing a bridge.
    NoPush,
}

impl Translator {
    pub fn expected(self, env: &Env, s: &EnvState) -> Vec<Action> {
        match self {
            Translator::Rescue => rescue_moves(env, s),
            Translator::NoPush => no_push_moves(env, s),
        }
    }
}

fn rescue_moves(env: &Env, s: &EnvState) -> Vec<Action> {
    let layout = env.layout();
    let Some(cell) = s.earliest_fallen().and_then(|p| p.pos()) else {
        return Action::ALL.to_vec();
    };
    if s.agent.manhattan(cell) == 1 {
        return vec![Action::PullOut];
    }
    let mut dist = vec![usize::MAX; layout.n_cells()];
    let mut queue = VecDeque::new();
    for n in layout.neighbors(cell).filter(|&n| layout.passable(n)) {
        dist[layout.index(n)] = 0;
        queue.push_back(n);
    }
    while let Some(c) = queue.pop_front() {
        let d = dist[layout.index(c)];
        for n in layout.neighbors(c).filter(|&n| layout.passable(n)) {
            if dist[layout.index(n)] == usize::MAX {
                dist[layout.index(n)] = d + 1;
                queue.push_back(n);
            }
        }
    }
    let here = dist[layout.index(s.agent)];
    if here == usize::MAX {
        return Action::ALL.to_vec();
    }
    Action::ALL
        .into_iter()
        .filter(|&a| {
            let to = env.move_target(s.agent, a);
            to != s.agent && dist[layout.index(to)] + 1 == here
        })
        .collect()
}

fn no_push_moves(env: &Env, s: &EnvState) -> Vec<Action> {
    let layout = env.layout();
    if layout.tile(s.agent) == TileKind::Bridge {
        let shared = s.persons.iter().any(|p| match p.status {
            PersonStatus::OnMap { cell, .. } => {
                cell.x == s.agent.x && cell != s.agent && layout.tile(cell) == TileKind::Bridge
            }
            _ => false,
        });
        if shared {
            return vec![Action::Idle];
        }
    }
    Action::ALL.into_iter().filter(|&a| !env.would_collide(s, a)).collect()
}
