use serde::{Deserialize, Serialize};

use super::{Cell, Env, EnvState, ObservationKind};

/// Integer-valued observation tensor in row-major order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Observation {
    pub values: Vec<i32>,
    pub shape: Vec<usize>,
}

fn visible(env: &Env, s: &EnvState, c: Cell) -> bool {
    env.config().view_window.is_none_or(|r| c.chebyshev(s.agent) <= r)
}

pub(super) fn encode(env: &Env, s: &EnvState) -> Observation {
    let layout = env.layout();
    let cfg = env.config();
    let positions: Vec<Option<Cell>> =
        s.persons.iter().map(|p| p.pos().filter(|&c| visible(env, s, c))).collect();
    let timers: Vec<i32> = s
        .persons
        .iter()
        .zip(&positions)
        .map(|(p, pos)| if pos.is_some() { p.water_steps().unwrap_or(0) as i32 } else { 0 })
        .collect();
    match cfg.observation {
        ObservationKind::Flat => {
            let off = layout.off_index() as i32;
            let mut values = vec![layout.index(s.agent) as i32];
            values.extend(positions.iter().map(|p| p.map_or(off, |c| layout.index(c) as i32)));
            if cfg.include_drowning_timer {
                values.extend(&timers);
            }
            let shape = vec![values.len()];
            Observation { values, shape }
        }
        ObservationKind::OneHotGrid => {
            let plane = layout.n_cells();
            let channels = 1 + positions.len() + usize::from(cfg.include_drowning_timer);
            let mut values = vec![0; channels * plane];
            values[layout.index(s.agent)] = 1;
            for (k, pos) in positions.iter().enumerate() {
                if let Some(c) = pos {
                    values[(k + 1) * plane + layout.index(*c)] = 1;
                    if cfg.include_drowning_timer && timers[k] > 0 {
                        values[(channels - 1) * plane + layout.index(*c)] = timers[k];
                    }
                }
            }
            Observation { values, shape: vec![channels, layout.height, layout.width] }
        }
    }
}

/// Recovers agent and person positions from an observation of `env`.
pub fn decode_flat(env: &Env, obs: &Observation) -> (Cell, Vec<Option<Cell>>) {
    let layout = env.layout();
    let n = env.specs().len();
    match env.config().observation {
        ObservationKind::Flat => {
            let cell = |v: i32| ((v as usize) < layout.n_cells()).then(|| layout.cell(v as usize));
            let agent = cell(obs.values[0]).expect("agent is on the map");
            (agent, obs.values[1..=n].iter().map(|&v| cell(v)).collect())
        }
        ObservationKind::OneHotGrid => {
            let plane = layout.n_cells();
            let find = |ch: usize| (0..plane).find(|&i| obs.values[ch * plane + i] == 1).map(|i| layout.cell(i));
            (find(0).expect("agent is on the map"), (1..=n).map(find).collect())
        }
    }
}
