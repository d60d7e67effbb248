use std::path::{Path, PathBuf};

use mechrl_core::agent::TrainConfig;
use mechrl_core::lattice::TilingSpec;
use mechrl_core::mechanisms::{builtin, Scenario};
use mechrl_core::{CellParams, Error};
use serde::{Deserialize, Serialize};

/// Experiment description read from a TOML file.
///
/// ```toml
/// scenario = "latch-guided"   # built-in name or path to a scenario JSON
/// out = "runs/latch-guided"
///
/// [tiling]
/// strategy = "spiral"
/// direction = "inward"
/// axis = "horizontal"
///
/// [train]
/// episodes = 2000
/// seed = 7
///
/// [cell]
/// thickness = 1.2
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiling: Option<TilingSpec>,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellParams>,
    /// Directory relative scenario paths are resolved against.
    #[serde(skip)]
    pub base: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn for_scenario(scenario: &str) -> Self {
        Self { scenario: scenario.to_string(), out: None, tiling: None, train: TrainConfig::default(), cell: None, base: None }
    }

    pub fn from_toml(text: &str) -> Result<Self, Error> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.train.validate()?;
        if let Some(cell) = &config.cell {
            cell.validate()?;
        }
        Ok(config)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config = Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        config.base = path.parent().map(Path::to_path_buf);
        Ok(config)
    }

    /// The scenario with the config's cell parameters and tiling applied.
    pub fn resolve_scenario(&self) -> Result<Scenario, Error> {
        let mut scenario = load_scenario(&self.scenario, self.base.as_deref())?;
        if let Some(cell) = self.cell {
            scenario.params = cell;
        }
        if let Some(tiling) = self.tiling {
            scenario.tiling = tiling;
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

/// A built-in scenario name, or a scenario JSON file.
pub fn load_scenario(selector: &str, base: Option<&Path>) -> Result<Scenario, Error> {
    if let Some(s) = builtin(selector) {
        return Ok(s);
    }
    let path = Path::new(selector);
    let path = match base {
        Some(b) if path.is_relative() && !path.exists() => b.join(path),
        _ => path.to_path_buf(),
    };
    if !path.exists() {
        return Err(Error::Config(format!(
            "{selector:?} is neither a built-in scenario ({}) nor an existing file",
            mechrl_core::mechanisms::BUILTIN_SCENARIOS.join(", ")
        )));
    }
    Scenario::load(&path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
scenario = "toy-latch"
out = "runs/toy"

[tiling]
strategy = "zigzag"
direction = "outward"
axis = "vertical"

[train]
episodes = 40
seed = 3
epsilon_decay = 0.99
trunk = [32, 32]

[cell]
thickness = 1.5
"#;

    #[test]
    fn round_trips() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(c.train.episodes, 40);
        assert_eq!(c.cell.unwrap().thickness, 1.5);
        let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        let bare = ExperimentConfig::for_scenario("gripper");
        assert_eq!(ExperimentConfig::from_toml(&bare.to_toml()).unwrap(), bare);
    }

    #[test]
    fn unknown_keys_report_their_location() {
        let text = SAMPLE.replace("seed = 3", "seed = 3\nlearning_rat = 0.1");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("learning_rat"), "{err}");
        assert!(err.contains("line 13"), "{err}");
        assert!(ExperimentConfig::from_toml("scenario = \"toy-latch\"\nextra = 1").is_err());
    }

    #[test]
    fn overrides_apply_to_the_scenario() {
        let c = ExperimentConfig::from_toml(SAMPLE).unwrap();
        let s = c.resolve_scenario().unwrap();
        assert_eq!(s.params.thickness, 1.5);
        assert_eq!(s.tiling, c.tiling.unwrap());
        assert!(load_scenario("nope", None).is_err());
    }
}
