//! Run configuration: flat `key = value` files, UTF-8, `#` comments.
//!
//! Every parameter key uses its external spelling (`tempThreshold`,
//! `Cpuct`, ...); unknown keys are rejected rather than ignored. Command
//! line flags overlay file values, and the resolved configuration is
//! snapshotted into the run directory in the same format, so a snapshot
//! reproduces its run when fed back in.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::net::{Activation, NetworkConfig};
use crate::params::{Parameter, ParameterError, ParameterSet};
use crate::pipeline::RunOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("malformed line {line_no}: {line:?} (expected key = value)")]
    Malformed { line_no: usize, line: String },
    #[error(transparent)]
    Param(#[from] ParameterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Parses the flat format into (key, value) pairs, preserving order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut pairs = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line_no: no + 1,
            line: raw.to_string(),
        })?;
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

/// The supported games.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GameChoice {
    Othello4,
    Othello6,
}

impl GameChoice {
    pub fn board_size(self) -> usize {
        match self {
            GameChoice::Othello4 => 4,
            GameChoice::Othello6 => 6,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GameChoice::Othello4 => "othello4",
            GameChoice::Othello6 => "othello6",
        }
    }

    pub fn from_name(name: &str) -> Option<GameChoice> {
        match name {
            "othello4" => Some(GameChoice::Othello4),
            "othello6" => Some(GameChoice::Othello6),
            _ => None,
        }
    }

    pub fn for_board_size(size: usize) -> Option<GameChoice> {
        match size {
            4 => Some(GameChoice::Othello4),
            6 => Some(GameChoice::Othello6),
            _ => None,
        }
    }
}

/// A full run configuration as assembled from files and flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub params: ParameterSet,
    pub hidden_layers: Vec<usize>,
    pub activation: Activation,
    pub out_dir: Option<PathBuf>,
    pub parallel: bool,
    pub augment_symmetries: bool,
    /// Budget overrides (`override.<param>` keys), used by sweeps.
    pub overrides: BTreeMap<Parameter, f64>,
    /// Whether `seed` was given explicitly; otherwise the caller draws one
    /// from entropy and records it.
    pub seed_was_set: bool,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            params: ParameterSet::default(),
            hidden_layers: vec![128, 128],
            activation: Activation::Relu,
            out_dir: None,
            parallel: false,
            augment_symmetries: false,
            overrides: BTreeMap::new(),
            seed_was_set: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, ConfigError> {
        let mut config = RunConfig::default();
        config.apply_text(&std::fs::read_to_string(path)?)?;
        Ok(config)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (key, value) in parse_kv(text)? {
            self.apply_key(&key, &value)?;
        }
        Ok(())
    }

    /// Applies one key; rejects unknown keys by name.
    pub fn apply_key(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if let Ok(parameter) = Parameter::from_name(key) {
            let number: f64 = value.parse().map_err(|_| ConfigError::InvalidValue {
                key: key.to_string(),
                reason: format!("{value:?} is not a number"),
            })?;
            parameter.apply(&mut self.params, number)?;
            return Ok(());
        }
        match key {
            "seed" => {
                self.params.seed = value.parse().map_err(|_| ConfigError::InvalidValue {
                    key: key.into(),
                    reason: format!("{value:?} is not an unsigned integer"),
                })?;
                self.seed_was_set = true;
            }
            "game" => {
                let game = GameChoice::from_name(value).ok_or_else(|| ConfigError::InvalidValue {
                    key: key.into(),
                    reason: format!("{value:?} is not othello4 or othello6"),
                })?;
                self.params.board_size = game.board_size();
            }
            "hidden" => {
                self.hidden_layers = parse_widths(value).map_err(|reason| {
                    ConfigError::InvalidValue {
                        key: key.into(),
                        reason,
                    }
                })?;
            }
            "activation" => {
                self.activation = value.parse().map_err(|reason| ConfigError::InvalidValue {
                    key: key.into(),
                    reason,
                })?;
            }
            "out" => self.out_dir = Some(PathBuf::from(value)),
            "parallel" => self.parallel = parse_bool(key, value)?,
            "augment" => self.augment_symmetries = parse_bool(key, value)?,
            _ => {
                if let Some(name) = key.strip_prefix("override.") {
                    let parameter = Parameter::from_name(name)?;
                    let number: f64 = value.parse().map_err(|_| ConfigError::InvalidValue {
                        key: key.to_string(),
                        reason: format!("{value:?} is not a number"),
                    })?;
                    self.overrides.insert(parameter, number);
                } else {
                    return Err(ConfigError::UnknownKey(key.to_string()));
                }
            }
        }
        Ok(())
    }

    pub fn game(&self) -> GameChoice {
        GameChoice::for_board_size(self.params.board_size).expect("validated board size")
    }

    /// The resolved configuration in the same flat format, suitable for the
    /// run-directory snapshot and for feeding back in.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("game = {}\n", self.game().name()));
        out.push_str(&format!("seed = {}\n", self.params.seed));
        for parameter in Parameter::ALL {
            out.push_str(&format!(
                "{} = {}\n",
                parameter.name(),
                parameter.get(&self.params)
            ));
        }
        let widths: Vec<String> = self.hidden_layers.iter().map(|w| w.to_string()).collect();
        out.push_str(&format!("hidden = {}\n", widths.join(",")));
        out.push_str(&format!("activation = {}\n", self.activation));
        out.push_str(&format!("parallel = {}\n", self.parallel));
        out.push_str(&format!("augment = {}\n", self.augment_symmetries));
        for (parameter, value) in &self.overrides {
            out.push_str(&format!("override.{} = {}\n", parameter.name(), value));
        }
        out
    }

    pub fn network_config(&self) -> NetworkConfig {
        NetworkConfig {
            board_size: self.params.board_size,
            hidden_layers: self.hidden_layers.clone(),
            activation: self.activation,
            dropout_rate: self.params.dropout,
        }
    }

    pub fn to_run_options(&self) -> RunOptions {
        RunOptions {
            params: self.params.clone(),
            net: self.network_config(),
            parallel: self.parallel,
            augment_symmetries: self.augment_symmetries,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(ConfigError::InvalidValue {
            key: key.into(),
            reason: format!("{value:?} is not true or false"),
        }),
    }
}

fn parse_widths(value: &str) -> Result<Vec<usize>, String> {
    if value.trim().is_empty() {
        return Ok(Vec::new());
    }
    value
        .split(',')
        .map(|w| {
            w.trim()
                .parse::<usize>()
                .map_err(|_| format!("{w:?} is not a layer width"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_kv_handles_comments_and_blanks() {
        let text = "# a comment\n\nepisode = 10  # trailing\nseed = 7\n";
        let pairs = parse_kv(text).unwrap();
        assert_eq!(
            pairs,
            vec![
                ("episode".to_string(), "10".to_string()),
                ("seed".to_string(), "7".to_string())
            ]
        );
        assert!(parse_kv("no equals sign\n").is_err());
    }

    #[test]
    fn defaults_match_reference_table() {
        let config = RunConfig::default();
        assert_eq!(config.params, ParameterSet::default());
        assert_eq!(config.game(), GameChoice::Othello6);
    }

    #[test]
    fn unknown_key_rejected() {
        let mut config = RunConfig::default();
        let err = config.apply_key("episodes", "10").unwrap_err();
        assert!(matches!(err, ConfigError::UnknownKey(k) if k == "episodes"));
    }

    #[test]
    fn invariant_violations_name_the_key() {
        let mut config = RunConfig::default();
        let err = config.apply_key("updateThreshold", "1.5").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("updateThreshold"), "message was {text:?}");
    }

    #[test]
    fn snapshot_round_trips() {
        let mut config = RunConfig::default();
        config.apply_key("game", "othello4").unwrap();
        config.apply_key("episode", "12").unwrap();
        config.apply_key("Cpuct", "2.5").unwrap();
        config.apply_key("seed", "99").unwrap();
        config.apply_key("hidden", "64,32").unwrap();
        config.apply_key("override.mctssimu", "25").unwrap();
        let snapshot = config.snapshot();
        let mut reparsed = RunConfig::default();
        reparsed.apply_text(&snapshot).unwrap();
        assert_eq!(reparsed.params, config.params);
        assert_eq!(reparsed.hidden_layers, config.hidden_layers);
        assert_eq!(reparsed.overrides, config.overrides);
        assert_eq!(reparsed.snapshot(), snapshot);
    }

    #[test]
    fn game_key_sets_board_size() {
        let mut config = RunConfig::default();
        config.apply_key("game", "othello4").unwrap();
        assert_eq!(config.params.board_size, 4);
        assert!(config.apply_key("game", "chess").is_err());
    }

    #[test]
    fn override_keys_accumulate() {
        let mut config = RunConfig::default();
        config.apply_key("override.iteration", "15").unwrap();
        config.apply_key("override.episode", "10").unwrap();
        assert_eq!(config.overrides.len(), 2);
        assert!(config.apply_key("override.bogus", "1").is_err());
    }
}
