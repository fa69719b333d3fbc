use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentBundle, AgentError};
use crate::policy::{PolicyModel, RiskModel, Shield};
use crate::reason::{ConflictEncoding, ReasonTheory};

pub const AGENT_FORMAT: &str = "rbama-agent/1";

/// Contents of `meta.json` in an agent directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentMeta {
    pub format: String,
    pub config_hash: String,
    #[serde(default)]
    pub encoding: ConflictEncoding,
    /// Shield threshold per constraint obligation.
    #[serde(default)]
    pub thresholds: BTreeMap<String, f64>,
    #[serde(default)]
    pub goals: Vec<String>,
    #[serde(default)]
    pub seed: u64,
}

fn format_err(path: &Path, e: impl std::fmt::Display) -> AgentError {
    AgentError::Format(format!("{}: {e}", path.display()))
}

/// Writes `theory.json`, `instrumental.model`, `moral_<φ>.model`, `risk_<φ>.model` and `meta.json`.
pub fn save_bundle(bundle: &AgentBundle, dir: &Path, seed: u64) -> Result<(), AgentError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("theory.json"), bundle.theory.to_json())?;
    bundle.instrumental.save(&dir.join("instrumental.model"))?;
    for (o, p) in &bundle.moral_policies {
        p.save(&dir.join(format!("moral_{o}.model")))?;
    }
    for (o, sh) in &bundle.shields {
        sh.risk.save(&dir.join(format!("risk_{o}.model")))?;
    }
    let meta = AgentMeta {
        format: AGENT_FORMAT.into(),
        config_hash: bundle.instrumental.config_hash.clone(),
        encoding: bundle.encoding,
        thresholds: bundle.shields.iter().map(|(o, s)| (o.clone(), s.threshold)).collect(),
        goals: bundle.moral_policies.keys().cloned().collect(),
        seed,
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| format_err(dir, e))?;
    fs::write(dir.join("meta.json"), text)?;
    Ok(())
}

/// Loads an agent directory, checking every model against `config_hash` when given.
pub fn load_bundle(dir: &Path, config_hash: Option<&str>) -> Result<(AgentBundle, AgentMeta), AgentError> {
    let meta_path = dir.join("meta.json");
    let meta: AgentMeta =
        serde_json::from_str(&fs::read_to_string(&meta_path)?).map_err(|e| format_err(&meta_path, e))?;
    if meta.format != AGENT_FORMAT {
        return Err(format_err(&meta_path, format!("unsupported format {}", meta.format)));
    }
    let theory = ReasonTheory::from_json(&fs::read_to_string(dir.join("theory.json"))?)?;
    let hash = config_hash.unwrap_or(&meta.config_hash);
    let instrumental = PolicyModel::load(&dir.join("instrumental.model"))?;
    instrumental.check_config(hash)?;
    let mut bundle = AgentBundle::new(theory, instrumental, meta.seed);
    bundle.encoding = meta.encoding;
    for o in &meta.goals {
        let p = PolicyModel::load(&dir.join(format!("moral_{o}.model")))?;
        p.check_config(hash)?;
        bundle.moral_policies.insert(o.clone(), p);
    }
    for (o, &t) in &meta.thresholds {
        let r = RiskModel::load(&dir.join(format!("risk_{o}.model")))?;
        r.check_config(hash)?;
        bundle.shields.insert(o.clone(), Shield::new(r, t));
    }
    Ok((bundle, meta))
}
