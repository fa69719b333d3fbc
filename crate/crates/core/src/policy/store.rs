use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CurvePoint, PolicyError, PolicyModel, QRow, RiskModel};
use crate::env::{Action, Env, EnvState};

pub const MODEL_FORMAT: &str = "rbama-model/1";

/// Self-describing model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "role", rename_all = "snake_case")]
pub enum ModelFile {
    Policy { format: String, model: PolicyModel },
    Risk { format: String, model: RiskModel },
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        let text = serde_json::to_string(self).map_err(|e| PolicyError::Format(e.to_string()))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        let text = fs::read_to_string(path)?;
        let file: ModelFile = serde_json::from_str(&text).map_err(|e| PolicyError::Format(format!("{}: {e}", path.display())))?;
        let format = match &file {
            ModelFile::Policy { format, .. } | ModelFile::Risk { format, .. } => format,
        };
        if format != MODEL_FORMAT {
            return Err(PolicyError::Format(format!("unsupported format {format}")));
        }
        Ok(file)
    }
}

impl PolicyModel {
    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        ModelFile::Policy { format: MODEL_FORMAT.into(), model: self.clone() }.save(path)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        match ModelFile::load(path)? {
            ModelFile::Policy { model, .. } => Ok(model),
            ModelFile::Risk { .. } => Err(PolicyError::Format(format!("{} holds a risk model", path.display()))),
        }
    }

    pub fn check_config(&self, hash: &str) -> Result<(), PolicyError> {
        check(&self.config_hash, hash)
    }
}

impl RiskModel {
    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        ModelFile::Risk { format: MODEL_FORMAT.into(), model: self.clone() }.save(path)
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        match ModelFile::load(path)? {
            ModelFile::Risk { model, .. } => Ok(model),
            ModelFile::Policy { .. } => Err(PolicyError::Format(format!("{} holds a policy model", path.display()))),
        }
    }

    pub fn check_config(&self, hash: &str) -> Result<(), PolicyError> {
        check(&self.config_hash, hash)
    }
}

fn check(found: &str, expected: &str) -> Result<(), PolicyError> {
    if found == expected {
        Ok(())
    } else {
        Err(PolicyError::ConfigMismatch { expected: expected.into(), found: found.into() })
    }
}

/// Writes `episode,return,epsilon,steps` rows.
pub fn write_curve(path: &Path, curve: &[CurvePoint]) -> Result<(), PolicyError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PolicyError::Format(e.to_string()))?;
    for p in curve {
        w.serialize(p).map_err(|e| PolicyError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_curve(path: &Path) -> Result<Vec<CurvePoint>, PolicyError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| PolicyError::Format(e.to_string()))?;
    r.deserialize().map(|row| row.map_err(|e| PolicyError::Format(e.to_string()))).collect()
}

/// A state-action pair the risk model flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskRow {
    pub action: Action,
    /// Agent cell index, then one cell index per person by id; `W·H` when absent.
    pub state: Vec<usize>,
    pub risks: QRow,
}

pub fn flatten_state(env: &Env, s: &EnvState) -> Vec<usize> {
    let layout = env.layout();
    let mut persons: Vec<_> = s.persons.iter().collect();
    persons.sort_by_key(|p| p.id);
    let mut out = vec![layout.index(s.agent)];
    out.extend(persons.iter().map(|p| p.pos().map_or(layout.off_index(), |c| layout.index(c))));
    out
}

/// Every (state, action) in `states` with risk above `threshold`, in input order.
pub fn risk_rows(model: &RiskModel, env: &Env, states: &[EnvState], threshold: f64) -> Vec<RiskRow> {
    let mut out = Vec::new();
    for s in states {
        let risks = model.risks(env, s);
        for a in Action::ALL {
            if risks[a.index()] > threshold {
                out.push(RiskRow { action: a, state: flatten_state(env, s), risks });
            }
        }
    }
    out
}

/// Writes `action,state,risk_right,…` rows; the state is a bracketed list.
pub fn write_risk_csv(path: &Path, rows: &[RiskRow]) -> Result<(), PolicyError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| PolicyError::Format(e.to_string()))?;
    let mut header = vec!["action".to_string(), "state".to_string()];
    header.extend(Action::ALL.iter().map(|a| format!("risk_{}", a.name())));
    w.write_record(&header).map_err(|e| PolicyError::Format(e.to_string()))?;
    for r in rows {
        let state: Vec<String> = r.state.iter().map(|v| v.to_string()).collect();
        let mut rec = vec![r.action.name().to_string(), format!("[{}]", state.join(", "))];
        rec.extend(r.risks.iter().map(|v| format!("{v:.4}")));
        w.write_record(&rec).map_err(|e| PolicyError::Format(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}
