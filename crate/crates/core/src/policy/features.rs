use serde::{Deserialize, Serialize};

use crate::env::{Env, EnvState};

/// Which parts of the state a learner sees.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureView {
    /// Agent and every person position.
    Full,
    /// Agent position only.
    AgentOnly,
    /// Agent and the positions of persons in the water.
    InWater,
    /// Agent and persons within this Chebyshev radius.
    Window(usize),
}

impl FeatureView {
    /// Entity positions as grid indices, with the off-map index for hidden persons.
    pub fn key(&self, env: &Env, s: &EnvState) -> Vec<u16> {
        let layout = env.layout();
        let off = layout.off_index() as u16;
        let mut key = vec![layout.index(s.agent) as u16];
        if *self == FeatureView::AgentOnly {
            return key;
        }
        for p in &s.persons {
            let shown = match (self, p.pos()) {
                (_, None) => None,
                (FeatureView::Full, pos) => pos,
                (FeatureView::InWater, pos) => pos.filter(|_| p.in_water()),
                (FeatureView::Window(r), Some(c)) => (c.chebyshev(s.agent) <= *r).then_some(c),
                (FeatureView::AgentOnly, _) => unreachable!(),
            };
            key.push(shown.map_or(off, |c| layout.index(c) as u16));
        }
        key
    }

    pub fn entities(&self, env: &Env) -> usize {
        match self {
            FeatureView::AgentOnly => 1,
            _ => 1 + env.specs().len(),
        }
    }

    /// Input width of the one-hot encoding used by function approximators.
    pub fn input_width(&self, env: &Env) -> usize {
        self.entities(env) * (env.layout().off_index() + 1)
    }
}

/// Active input units of the one-hot encoding of a key.
pub fn one_hot_indices(key: &[u16], slots: usize) -> Vec<usize> {
    key.iter().enumerate().map(|(k, &v)| k * slots + v as usize).collect()
}
