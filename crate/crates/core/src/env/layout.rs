use serde::{Deserialize, Serialize};

use super::config::{Cell, EnvConfig, STROLLER_ID};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileKind {
    Land,
    Water,
    Bridge,
}

/// Columns of the bridges, spread evenly over the width.
pub fn bridge_columns(width: usize, n_bridges: usize) -> Vec<usize> {
    (0..n_bridges).map(|i| (2 * i + 1) * width / (2 * n_bridges)).collect()
}

/// Static map: two land rows on each shore, water in between, bridges crossing it.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub width: usize,
    pub height: usize,
    pub goal: Cell,
    pub bridge_cols: Vec<usize>,
    tiles: Vec<TileKind>,
}

impl Layout {
    pub fn new(cfg: &EnvConfig) -> Self {
        let (width, height) = (cfg.grid_width, cfg.grid_height);
        let bridge_cols = bridge_columns(width, cfg.n_bridges);
        let mut tiles = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let water_row = y >= 2 && y + 2 < height;
                tiles.push(match (water_row, bridge_cols.contains(&x)) {
                    (false, _) => TileKind::Land,
                    (true, true) => TileKind::Bridge,
                    (true, false) => TileKind::Water,
                });
            }
        }
        Layout { width, height, goal: cfg.goal, bridge_cols, tiles }
    }

    pub fn tile(&self, c: Cell) -> TileKind {
        self.tiles[self.index(c)]
    }

    pub fn index(&self, c: Cell) -> usize {
        c.y * self.width + c.x
    }

    pub fn cell(&self, index: usize) -> Cell {
        Cell::new(index % self.width, index / self.width)
    }

    /// Index used for positions off the map.
    pub fn off_index(&self) -> usize {
        self.width * self.height
    }

    pub fn n_cells(&self) -> usize {
        self.width * self.height
    }

    /// Tiles the agent may occupy.
    pub fn passable(&self, c: Cell) -> bool {
        self.tile(c) != TileKind::Water
    }

    pub fn offset(&self, c: Cell, dx: i32, dy: i32) -> Option<Cell> {
        let x = c.x as i64 + dx as i64;
        let y = c.y as i64 + dy as i64;
        (x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| Cell::new(x as usize, y as usize))
    }

    pub fn neighbors(&self, c: Cell) -> impl Iterator<Item = Cell> + '_ {
        [(1, 0), (0, 1), (-1, 0), (0, -1)].into_iter().filter_map(move |(dx, dy)| self.offset(c, dx, dy))
    }

    pub fn cells_of(&self, kind: TileKind) -> Vec<Cell> {
        (0..self.n_cells()).map(|i| self.cell(i)).filter(|&c| self.tile(c) == kind).collect()
    }

    pub fn passable_cells(&self) -> Vec<Cell> {
        (0..self.n_cells()).map(|i| self.cell(i)).filter(|&c| self.passable(c)).collect()
    }

    /// Nearest water tile by Manhattan distance, ties to the west then north.
    pub fn fall_target(&self, from: Cell) -> Cell {
        self.cells_of(TileKind::Water)
            .into_iter()
            .min_by_key(|&c| (c.manhattan(from), c.x, c.y))
            .expect("map has water")
    }

    /// Water tile a pushed person lands in: west neighbor, else east, else nearest.
    pub fn push_target(&self, from: Cell) -> Cell {
        [(-1, 0), (1, 0)]
            .into_iter()
            .filter_map(|(dx, dy)| self.offset(from, dx, dy))
            .find(|&c| self.tile(c) == TileKind::Water)
            .unwrap_or_else(|| self.fall_target(from))
    }
}

/// Fixed route of one person.
#[derive(Clone, Debug, PartialEq)]
pub struct PersonSpec {
    pub id: u8,
    pub path: Vec<Cell>,
    pub is_static: bool,
}

impl PersonSpec {
    /// First land waypoint at or after `from`.
    pub fn next_land_waypoint(&self, layout: &Layout, from: usize) -> Option<usize> {
        (from..self.path.len()).find(|&i| layout.tile(self.path[i]) == TileKind::Land)
    }
}

/// Persons ordered by id; static persons are numbered after the stroller.
pub fn person_specs(cfg: &EnvConfig, layout: &Layout) -> Vec<PersonSpec> {
    let mut ids = cfg.moving_person_ids.clone();
    ids.sort_unstable();
    let h = layout.height;
    let mut specs: Vec<PersonSpec> = ids
        .into_iter()
        .map(|id| {
            let path = if id == STROLLER_ID {
                (0..layout.width).map(|x| Cell::new(x, h - 2)).collect()
            } else {
                let col = layout.bridge_cols[id as usize - 1];
                (1..h).map(|y| Cell::new(col, y)).collect()
            };
            PersonSpec { id, path, is_static: false }
        })
        .collect();
    let first_static = STROLLER_ID + 1;
    for (k, &c) in cfg.static_persons.iter().enumerate() {
        specs.push(PersonSpec { id: first_static + k as u8, path: vec![c], is_static: true });
    }
    specs
}
