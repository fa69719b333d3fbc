//! Bundled scenario configurations.

use super::{EnvConfig, EnvError};

pub const NAMES: [&str; 9] = [
    "moral_dilemma",
    "stochastic_moral_dilemma",
    "stochastic_moral_dilemma_high",
    "left_bridge_blocked",
    "right_bridge_blocked",
    "circular_path",
    "dangerous_shore",
    "dangerous_bridge",
    "enlarged_state_space",
];

pub fn source(name: &str) -> Option<&'static str> {
    Some(match name {
        "moral_dilemma" => include_str!("../../fixtures/moral_dilemma.json"),
        "stochastic_moral_dilemma" => include_str!("../../fixtures/stochastic_moral_dilemma.json"),
        "stochastic_moral_dilemma_high" => include_str!("../../fixtures/stochastic_moral_dilemma_high.json"),
        "left_bridge_blocked" => include_str!("../../fixtures/left_bridge_blocked.json"),
        "right_bridge_blocked" => include_str!("../../fixtures/right_bridge_blocked.json"),
        "circular_path" => include_str!("../../fixtures/circular_path.json"),
        "dangerous_shore" => include_str!("../../fixtures/dangerous_shore.json"),
        "dangerous_bridge" => include_str!("../../fixtures/dangerous_bridge.json"),
        "enlarged_state_space" => include_str!("../../fixtures/enlarged_state_space.json"),
        _ => return None,
    })
}

/// Loads a bundled configuration by name.
pub fn load(name: &str) -> Result<EnvConfig, EnvError> {
    let text = source(name).ok_or_else(|| EnvError::InvalidConfig(format!("unknown fixture {name}")))?;
    EnvConfig::from_json(text)
}
