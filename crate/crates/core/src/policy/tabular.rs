use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::env::Action;

pub type QRow = [f64; Action::COUNT];

/// Lookup-table action values with visit counts; unseen entries read as zero.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "TableFile", into = "TableFile")]
pub struct TabularQ {
    values: HashMap<Vec<u16>, QRow>,
    visits: HashMap<Vec<u16>, [u32; Action::COUNT]>,
}

impl TabularQ {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn row(&self, key: &[u16]) -> QRow {
        self.values.get(key).copied().unwrap_or([0.0; Action::COUNT])
    }

    pub fn get(&self, key: &[u16], a: Action) -> f64 {
        self.row(key)[a.index()]
    }

    pub fn set(&mut self, key: &[u16], a: Action, v: f64) {
        self.visits.entry(key.to_vec()).or_insert([0; Action::COUNT]);
        self.values.entry(key.to_vec()).or_insert([0.0; Action::COUNT])[a.index()] = v;
    }

    pub fn visits(&self, key: &[u16], a: Action) -> u32 {
        self.visits.get(key).map_or(0, |v| v[a.index()])
    }

    /// Moves `Q(s, a)` toward `target` with step `alpha`; returns the new value.
    pub fn update(&mut self, key: &[u16], a: Action, target: f64, alpha: f64) -> f64 {
        self.visits.entry(key.to_vec()).or_insert([0; Action::COUNT])[a.index()] += 1;
        let q = self.values.entry(key.to_vec()).or_insert([0.0; Action::COUNT]);
        q[a.index()] += alpha * (target - q[a.index()]);
        q[a.index()]
    }

    /// Running mean of all targets seen for `(s, a)`.
    pub fn update_mean(&mut self, key: &[u16], a: Action, target: f64) -> f64 {
        let n = self.visits(key, a) + 1;
        self.update(key, a, target, 1.0 / n as f64)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct TableFile {
    entries: Vec<(Vec<u16>, QRow, [u32; Action::COUNT])>,
}

impl From<TabularQ> for TableFile {
    fn from(t: TabularQ) -> Self {
        let mut entries: Vec<_> = t
            .values
            .iter()
            .map(|(k, q)| (k.clone(), *q, t.visits.get(k).copied().unwrap_or_default()))
            .collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        TableFile { entries }
    }
}

impl From<TableFile> for TabularQ {
    fn from(f: TableFile) -> Self {
        let mut t = TabularQ::new();
        for (k, q, n) in f.entries {
            t.values.insert(k.clone(), q);
            t.visits.insert(k, n);
        }
        t
    }
}
