//! Bridge grid world: an agent crossing a river while persons walk, fall and drown.
//!
//! Dynamics run in fixed phases per step: agent move or rescue, collision,
//! person movement, drowning, reappearance, then rewards and labels.

mod config;
pub mod fixtures;
mod layout;
mod observe;
mod render;

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{Cell, Drowning, EnvConfig, ObservationKind, STROLLER_ID};
pub use layout::{bridge_columns, person_specs, Layout, PersonSpec, TileKind};
pub use observe::{decode_flat, Observation};
pub use render::{render_png, render_text};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Action {
    Right,
    Down,
    Left,
    Up,
    PullOut,
    Idle,
}

impl Action {
    pub const ALL: [Action; 6] =
        [Action::Right, Action::Down, Action::Left, Action::Up, Action::PullOut, Action::Idle];
    pub const COUNT: usize = 6;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    pub fn delta(self) -> Option<(i32, i32)> {
        match self {
            Action::Right => Some((1, 0)),
            Action::Down => Some((0, 1)),
            Action::Left => Some((-1, 0)),
            Action::Up => Some((0, -1)),
            Action::PullOut | Action::Idle => None,
        }
    }

    pub fn name(self) -> &'static str {
        ["right", "down", "left", "up", "pullOut", "idle"][self.index()]
    }

    pub fn parse(s: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(s))
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PersonStatus {
    /// Walking; `cell` is `path[waypoint]`.
    OnMap { cell: Cell, waypoint: usize },
    /// In the water for `steps`; resumes its route at `resume` once rescued.
    InWater { cell: Cell, steps: u32, resume: usize },
    /// Off the map, returning to the start of its route after `reappear_in` steps.
    Away { reappear_in: u32 },
    /// Removed for the rest of the episode.
    Gone,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonState {
    pub id: u8,
    pub status: PersonStatus,
}

impl PersonState {
    pub fn pos(&self) -> Option<Cell> {
        match self.status {
            PersonStatus::OnMap { cell, .. } | PersonStatus::InWater { cell, .. } => Some(cell),
            _ => None,
        }
    }

    pub fn in_water(&self) -> bool {
        matches!(self.status, PersonStatus::InWater { .. })
    }

    pub fn water_steps(&self) -> Option<u32> {
        match self.status {
            PersonStatus::InWater { steps, .. } => Some(steps),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvState {
    pub agent: Cell,
    pub persons: Vec<PersonState>,
    pub step: u32,
}

impl EnvState {
    pub fn anyone_in_water(&self) -> bool {
        self.persons.iter().any(PersonState::in_water)
    }

    /// Water person that fell first, ties to the lowest id.
    pub fn earliest_fallen(&self) -> Option<&PersonState> {
        self.persons
            .iter()
            .filter(|p| p.in_water())
            .max_by_key(|p| (p.water_steps(), std::cmp::Reverse(p.id)))
    }
}

/// Propositions observable in a state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Labels {
    /// Someone stands on a bridge.
    pub bridge: bool,
    /// Someone is in the water.
    pub drowning: bool,
}

impl Labels {
    pub const BRIDGE: &'static str = "B";
    pub const DROWNING: &'static str = "D";

    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.bridge {
            out.push(Self::BRIDGE.to_string());
        }
        if self.drowning {
            out.push(Self::DROWNING.to_string());
        }
        out
    }

    pub fn contains(&self, atom: &str) -> bool {
        (atom == Self::BRIDGE && self.bridge) || (atom == Self::DROWNING && self.drowning)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Rewards {
    pub instr: f64,
    pub resc: f64,
    pub push: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub state: EnvState,
    pub rewards: Rewards,
    /// 1 when a person was pushed this step.
    pub cost: f64,
    pub labels: Labels,
    pub terminated: bool,
    pub truncated: bool,
    pub pushed: usize,
    pub drowned: usize,
    pub rescued: Option<u8>,
}

impl Transition {
    pub fn done(&self) -> bool {
        self.terminated || self.truncated
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    #[default]
    GoalReached,
    AllRescued,
    SingleStep,
    TruncationOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetMode {
    /// Agent in the top-left corner, persons at the start of their routes.
    Initial,
    /// Agent uniform over land, persons uniform over their routes.
    Random,
    /// Like `Random` with the agent uniform over land and bridge tiles.
    RandomPassable,
    Fixed(EnvState),
}

#[derive(Clone, Debug)]
pub struct Env {
    config: EnvConfig,
    layout: Layout,
    specs: Vec<PersonSpec>,
    dangerous: BTreeSet<Cell>,
    termination: Termination,
    rng: ChaCha8Rng,
    state: EnvState,
}

impl Env {
    pub fn new(config: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let specs = person_specs(&config, &layout);
        let dangerous = config.dangerous_spots.iter().copied().collect();
        let mut env = Env {
            layout,
            specs,
            dangerous,
            termination: Termination::GoalReached,
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: EnvState { agent: Cell::new(0, 0), persons: Vec::new(), step: 0 },
            config,
        };
        env.state = env.initial_state();
        Ok(env)
    }

    pub fn with_termination(mut self, termination: Termination) -> Self {
        self.termination = termination;
        self
    }

    pub fn set_termination(&mut self, termination: Termination) {
        self.termination = termination;
    }

    pub fn termination(&self) -> Termination {
        self.termination
    }

    pub fn reseed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    pub fn config(&self) -> &EnvConfig {
        &self.config
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn specs(&self) -> &[PersonSpec] {
        &self.specs
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn set_state(&mut self, state: EnvState) {
        self.state = state;
    }

    pub fn is_dangerous(&self, c: Cell) -> bool {
        self.dangerous.contains(&c)
    }

    fn placed(&self, spec: &PersonSpec, waypoint: usize) -> PersonStatus {
        let cell = spec.path[waypoint];
        if self.layout.tile(cell) == TileKind::Water {
            PersonStatus::InWater { cell, steps: 0, resume: waypoint + 1 }
        } else {
            PersonStatus::OnMap { cell, waypoint }
        }
    }

    pub fn initial_state(&self) -> EnvState {
        let persons = self.specs.iter().map(|s| PersonState { id: s.id, status: self.placed(s, 0) }).collect();
        EnvState { agent: Cell::new(0, 0), persons, step: 0 }
    }

    pub fn reset(&mut self, mode: &ResetMode) -> (EnvState, Observation) {
        let state = match mode {
            ResetMode::Initial => self.initial_state(),
            ResetMode::Random | ResetMode::RandomPassable => {
                let cells = if *mode == ResetMode::Random {
                    self.layout.cells_of(TileKind::Land)
                } else {
                    self.layout.passable_cells()
                };
                let agent = *cells.choose(&mut self.rng).expect("map has land");
                let lens: Vec<usize> = self.specs.iter().map(|s| s.path.len()).collect();
                let waypoints: Vec<usize> = lens.into_iter().map(|len| self.rng.gen_range(0..len)).collect();
                let persons = self
                    .specs
                    .iter()
                    .zip(waypoints)
                    .map(|(s, wp)| PersonState { id: s.id, status: self.placed(s, wp) })
                    .collect();
                EnvState { agent, persons, step: 0 }
            }
            ResetMode::Fixed(s) => s.clone(),
        };
        self.state = state.clone();
        let obs = self.observe(&state);
        (state, obs)
    }

    /// Every state a `Random` reset can produce.
    pub fn reset_support(&self) -> Vec<EnvState> {
        let mut out: Vec<EnvState> = self
            .layout
            .cells_of(TileKind::Land)
            .into_iter()
            .map(|agent| EnvState { agent, persons: Vec::new(), step: 0 })
            .collect();
        for spec in &self.specs {
            out = out
                .into_iter()
                .flat_map(|s| {
                    (0..spec.path.len()).map(move |wp| {
                        let mut s = s.clone();
                        s.persons.push(PersonState { id: spec.id, status: self.placed(spec, wp) });
                        s
                    })
                })
                .collect();
        }
        out
    }

    pub fn labels(&self, s: &EnvState) -> Labels {
        let bridge = s.persons.iter().any(|p| match p.status {
            PersonStatus::OnMap { cell, .. } => self.layout.tile(cell) == TileKind::Bridge,
            _ => false,
        });
        Labels { bridge, drowning: s.anyone_in_water() }
    }

    pub fn observe(&self, s: &EnvState) -> Observation {
        observe::encode(self, s)
    }

    pub fn step(&mut self, action: Action) -> Transition {
        let state = std::mem::replace(&mut self.state, EnvState { agent: Cell::new(0, 0), persons: Vec::new(), step: 0 });
        let tr = self.transition(&state, action);
        self.state = tr.state.clone();
        tr
    }

    /// Where the agent ends up after a move, ignoring persons.
    pub fn move_target(&self, from: Cell, action: Action) -> Cell {
        match action.delta() {
            Some((dx, dy)) => match self.layout.offset(from, dx, dy) {
                Some(c) if self.layout.passable(c) => c,
                _ => from,
            },
            None => from,
        }
    }

    /// Persons a move would collide with.
    pub fn would_collide(&self, s: &EnvState, action: Action) -> bool {
        let to = self.move_target(s.agent, action);
        to != s.agent
            && self.layout.tile(to) == TileKind::Bridge
            && s.persons.iter().any(|p| matches!(p.status, PersonStatus::OnMap { cell, .. } if cell == to))
    }

    pub fn transition(&mut self, s: &EnvState, action: Action) -> Transition {
        let cfg = &self.config;
        let n = s.persons.len();
        let mut next = s.clone();
        next.step += 1;
        let mut fresh = vec![false; n];
        let mut rescued = None;

        // agent
        if action == Action::PullOut {
            let target = s
                .persons
                .iter()
                .enumerate()
                .filter(|(_, p)| p.in_water() && p.pos().is_some_and(|c| c.manhattan(s.agent) == 1))
                .max_by_key(|(_, p)| (p.water_steps(), std::cmp::Reverse(p.id)))
                .map(|(i, _)| i);
            if let Some(i) = target {
                let spec = &self.specs[i];
                let PersonStatus::InWater { resume, .. } = s.persons[i].status else { unreachable!() };
                next.persons[i].status = match spec.next_land_waypoint(&self.layout, resume) {
                    Some(wp) => PersonStatus::OnMap { cell: spec.path[wp], waypoint: wp },
                    None => PersonStatus::Away { reappear_in: cfg.reappearance_time.max(1) },
                };
                fresh[i] = true;
                rescued = Some(spec.id);
            }
        } else {
            next.agent = self.move_target(s.agent, action);
        }

        // collision
        let mut pushed = 0;
        if next.agent != s.agent && self.layout.tile(next.agent) == TileKind::Bridge {
            let mut blocked = false;
            for i in 0..n {
                if let PersonStatus::OnMap { cell, waypoint } = s.persons[i].status {
                    if cell != next.agent || fresh[i] {
                        continue;
                    }
                    if self.rng.gen_bool(cfg.p_push) {
                        let landing = self.layout.push_target(cell);
                        next.persons[i].status = PersonStatus::InWater { cell: landing, steps: 0, resume: waypoint + 1 };
                        fresh[i] = true;
                        pushed += 1;
                    } else {
                        // the person holds their ground
                        blocked = true;
                    }
                }
            }
            if blocked {
                next.agent = s.agent;
            }
        }

        // persons
        for i in 0..n {
            if fresh[i] || self.specs[i].is_static {
                continue;
            }
            if let PersonStatus::OnMap { cell, waypoint } = next.persons[i].status {
                let spec = &self.specs[i];
                next.persons[i].status = if self.dangerous.contains(&cell) && self.rng.gen_bool(cfg.p_fall) {
                    PersonStatus::InWater { cell: self.layout.fall_target(cell), steps: 0, resume: waypoint + 1 }
                } else if waypoint + 1 < spec.path.len() {
                    PersonStatus::OnMap { cell: spec.path[waypoint + 1], waypoint: waypoint + 1 }
                } else {
                    fresh[i] = true;
                    PersonStatus::Away { reappear_in: cfg.reappearance_time.max(1) }
                };
            }
        }

        // drowning
        let mut drowned = 0;
        for p in next.persons.iter_mut() {
            if let PersonStatus::InWater { steps, .. } = &mut p.status {
                *steps += 1;
                let gone = match cfg.drowning {
                    Drowning::Fixed(t) => *steps >= t,
                    Drowning::Stochastic(q) => self.rng.gen_bool(q),
                    Drowning::Disabled => false,
                };
                if gone {
                    p.status = PersonStatus::Gone;
                    drowned += 1;
                }
            }
        }

        // reappearance
        for i in 0..n {
            if fresh[i] {
                continue;
            }
            if let PersonStatus::Away { reappear_in } = &mut next.persons[i].status {
                *reappear_in -= 1;
                if *reappear_in == 0 {
                    next.persons[i].status = self.placed(&self.specs[i], 0);
                }
            }
        }

        let rewards = Rewards {
            instr: if next.agent == self.layout.goal { 1.0 } else { 0.0 },
            resc: if s.anyone_in_water() && !next.anyone_in_water() && drowned == 0 { cfg.r_resc } else { 0.0 },
            push: if pushed > 0 { cfg.r_push } else { 0.0 },
        };
        let terminated = match self.termination {
            Termination::GoalReached => next.agent == self.layout.goal,
            Termination::AllRescued => rewards.resc != 0.0,
            Termination::SingleStep => true,
            Termination::TruncationOnly => false,
        };
        let truncated = !terminated && next.step >= cfg.truncation_limit;
        let labels = self.labels(&next);
        Transition {
            state: next,
            rewards,
            cost: if pushed > 0 { 1.0 } else { 0.0 },
            labels,
            terminated,
            truncated,
            pushed,
            drowned,
            rescued,
        }
    }

    /// Time-independent representative of a state, used as a key for exact planning.
    pub fn canonical(&self, s: &EnvState) -> EnvState {
        let mut c = s.clone();
        c.step = 0;
        let never_back = self.config.reappearance_time >= self.config.truncation_limit;
        for p in c.persons.iter_mut() {
            if never_back && matches!(p.status, PersonStatus::Away { .. }) {
                p.status = PersonStatus::Gone;
            }
        }
        if self.config.drowning == Drowning::Disabled {
            // only the order of falls matters
            let mut steps: Vec<u32> = c.persons.iter().filter_map(|p| p.water_steps()).collect();
            steps.sort_unstable();
            steps.dedup();
            for p in c.persons.iter_mut() {
                if let PersonStatus::InWater { steps: t, .. } = &mut p.status {
                    *t = steps.iter().position(|v| v == t).unwrap() as u32 + 1;
                }
            }
        }
        c
    }

    /// Checks structural invariants of a state against this world.
    pub fn check_state(&self, s: &EnvState) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidState(m));
        if s.agent.x >= self.layout.width || s.agent.y >= self.layout.height || !self.layout.passable(s.agent) {
            return bad(format!("agent at {:?} is not on a passable tile", s.agent));
        }
        if s.persons.len() != self.specs.len() {
            return bad(format!("expected {} persons, got {}", self.specs.len(), s.persons.len()));
        }
        for (p, spec) in s.persons.iter().zip(&self.specs) {
            if p.id != spec.id {
                return bad(format!("person id {} where {} expected", p.id, spec.id));
            }
            match p.status {
                PersonStatus::OnMap { cell, waypoint } => {
                    if spec.path.get(waypoint) != Some(&cell) || self.layout.tile(cell) == TileKind::Water {
                        return bad(format!("person {} off its route", p.id));
                    }
                }
                PersonStatus::InWater { cell, .. } => {
                    if self.layout.tile(cell) != TileKind::Water {
                        return bad(format!("person {} marked in water on dry tile", p.id));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}
