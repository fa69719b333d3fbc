use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::EnvError;

/// A map coordinate, serialized as `[x, y]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Cell {
    pub x: usize,
    pub y: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize) -> Self {
        Cell { x, y }
    }

    pub fn manhattan(self, other: Cell) -> usize {
        self.x.abs_diff(other.x) + self.y.abs_diff(other.y)
    }

    pub fn chebyshev(self, other: Cell) -> usize {
        self.x.abs_diff(other.x).max(self.y.abs_diff(other.y))
    }
}

impl From<[usize; 2]> for Cell {
    fn from(v: [usize; 2]) -> Self {
        Cell { x: v[0], y: v[1] }
    }
}

impl From<Cell> for [usize; 2] {
    fn from(c: Cell) -> Self {
        [c.x, c.y]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Drowning {
    /// Removed after this many steps in the water.
    Fixed(u32),
    /// Removed with this probability on every step in the water.
    Stochastic(f64),
    Disabled,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObservationKind {
    #[default]
    Flat,
    OneHotGrid,
}

fn default_truncation() -> u32 {
    100
}

fn default_r_resc() -> f64 {
    1.0
}

fn default_r_push() -> f64 {
    -1.0
}

/// Full parameterization of a bridge world.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub grid_width: usize,
    pub grid_height: usize,
    pub n_bridges: usize,
    pub goal: Cell,
    #[serde(default)]
    pub moving_person_ids: Vec<u8>,
    #[serde(default)]
    pub static_persons: Vec<Cell>,
    pub reappearance_time: u32,
    #[serde(default)]
    pub dangerous_spots: Vec<Cell>,
    pub p_fall: f64,
    pub p_push: f64,
    pub drowning: Drowning,
    #[serde(default = "default_truncation")]
    pub truncation_limit: u32,
    #[serde(default = "default_r_resc")]
    pub r_resc: f64,
    #[serde(default = "default_r_push")]
    pub r_push: f64,
    #[serde(default)]
    pub observation: ObservationKind,
    #[serde(default)]
    pub include_drowning_timer: bool,
    #[serde(default)]
    pub view_window: Option<usize>,
}

/// Person id reserved for the shore stroller.
pub const STROLLER_ID: u8 = 4;

impl EnvConfig {
    pub fn from_json(text: &str) -> Result<Self, EnvError> {
        let cfg: EnvConfig =
            serde_json::from_str(text).map_err(|e| EnvError::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    /// True when every transition is a function of state and action.
    pub fn is_deterministic(&self) -> bool {
        let binary = |p: f64| p == 0.0 || p == 1.0;
        binary(self.p_fall) && binary(self.p_push) && !matches!(self.drowning, Drowning::Stochastic(_))
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidConfig(msg));
        let (w, h) = (self.grid_width, self.grid_height);
        if w < 1 || h < 5 {
            return bad(format!("grid {w}x{h} too small, need width >= 1 and height >= 5"));
        }
        if self.n_bridges == 0 || self.n_bridges > w {
            return bad(format!("n_bridges = {} must be in 1..={w}", self.n_bridges));
        }
        let in_bounds = |c: Cell| c.x < w && c.y < h;
        let is_water = |c: Cell| c.y >= 2 && c.y + 2 < h && !super::layout::bridge_columns(w, self.n_bridges).contains(&c.x);
        if !in_bounds(self.goal) || is_water(self.goal) {
            return bad(format!("goal {:?} must be a passable tile", self.goal));
        }
        let mut seen = Vec::new();
        for &id in &self.moving_person_ids {
            let ok = id == STROLLER_ID || (id >= 1 && (id as usize) <= self.n_bridges.min(3));
            if !ok {
                return bad(format!("moving person id {id} has no trajectory"));
            }
            if seen.contains(&id) {
                return bad(format!("moving person id {id} listed twice"));
            }
            seen.push(id);
        }
        if self.moving_person_ids.len() > self.n_bridges + 1 {
            return bad("more moving persons than n_bridges + 1".into());
        }
        for &c in &self.static_persons {
            if !in_bounds(c) {
                return bad(format!("static person {c:?} out of bounds"));
            }
        }
        for &c in &self.dangerous_spots {
            if !in_bounds(c) || is_water(c) {
                return bad(format!("dangerous spot {c:?} must be a passable tile"));
            }
        }
        for (name, p) in [("p_fall", self.p_fall), ("p_push", self.p_push)] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} outside [0, 1]"));
            }
        }
        match self.drowning {
            Drowning::Fixed(0) => return bad("fixed drowning time must be positive".into()),
            Drowning::Stochastic(p) if !(0.0..=1.0).contains(&p) => {
                return bad(format!("p_drown = {p} outside [0, 1]"))
            }
            _ => {}
        }
        if self.truncation_limit == 0 {
            return bad("truncation_limit must be positive".into());
        }
        Ok(())
    }
}
