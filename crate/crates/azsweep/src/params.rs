//! The twelve tunable parameters of the training loop, plus the run seed
//! and board size.
//!
//! External surfaces (config files, CLI flags, sweep manifests, reports)
//! spell the parameters exactly as [`Parameter::name`] does; those names are
//! part of the artifact's stable interface.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ParameterError {
    #[error("parameter {name}: {reason}")]
    Invalid { name: &'static str, reason: String },
    #[error("unknown parameter {0:?}")]
    Unknown(String),
}

/// All knobs of one training run.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ParameterSet {
    /// Outer self-play → train → arena cycles.
    pub iterations: u32,
    /// Self-play games per iteration.
    pub episodes: u32,
    /// Plies sampled from π before play turns greedy (strict `<`).
    pub temp_threshold: u32,
    /// Search descents per move.
    pub mcts_simulations: u32,
    /// Exploration constant in the child-selection rule.
    pub cpuct: f64,
    /// Replay window: iterations of examples kept for training.
    pub retrain_length: u32,
    /// Passes over the training pool per iteration.
    pub epochs: u32,
    /// Examples per optimizer step.
    pub batch_size: u32,
    pub learning_rate: f64,
    /// Hidden-unit drop probability during training.
    pub dropout: f64,
    /// Head-to-head games per candidate evaluation.
    pub arena_compare: u32,
    /// Decisive-game win rate a candidate needs for acceptance.
    pub update_threshold: f64,
    /// Root seed; every random stream in a run derives from it.
    pub seed: u64,
    /// Othello board side length (4 or 6).
    pub board_size: usize,
}

impl Default for ParameterSet {
    /// The reference default setting for every parameter.
    fn default() -> ParameterSet {
        ParameterSet {
            iterations: 100,
            episodes: 50,
            temp_threshold: 15,
            mcts_simulations: 100,
            cpuct: 1.0,
            retrain_length: 20,
            epochs: 10,
            batch_size: 64,
            learning_rate: 0.005,
            dropout: 0.3,
            arena_compare: 40,
            update_threshold: 0.6,
            seed: 0,
            board_size: 6,
        }
    }
}

impl ParameterSet {
    pub fn validate(&self) -> Result<(), ParameterError> {
        for (name, value) in [
            ("iteration", self.iterations),
            ("episode", self.episodes),
            ("tempThreshold", self.temp_threshold),
            ("mctssimu", self.mcts_simulations),
            ("retrainlength", self.retrain_length),
            ("epoch", self.epochs),
            ("batchsize", self.batch_size),
            ("arenacompare", self.arena_compare),
        ] {
            if value < 1 {
                return Err(invalid(name, "must be >= 1"));
            }
        }
        if !(self.cpuct > 0.0) || !self.cpuct.is_finite() {
            return Err(invalid("Cpuct", "must be > 0"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(invalid("learningrate", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(invalid("dropout", "must be in [0, 1)"));
        }
        if !(self.update_threshold > 0.0 && self.update_threshold < 1.0) {
            return Err(invalid("updateThreshold", "must be in (0, 1)"));
        }
        if !crate::othello::SUPPORTED_SIZES.contains(&self.board_size) {
            return Err(ParameterError::Invalid {
                name: "board_size",
                reason: format!("{} is not a supported board size", self.board_size),
            });
        }
        Ok(())
    }
}

fn invalid(name: &'static str, reason: &str) -> ParameterError {
    ParameterError::Invalid {
        name,
        reason: reason.to_string(),
    }
}

/// Identifier for one of the twelve swept parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Parameter {
    Iteration,
    Episode,
    TempThreshold,
    MctsSimu,
    Cpuct,
    RetrainLength,
    Epoch,
    BatchSize,
    LearningRate,
    Dropout,
    ArenaCompare,
    UpdateThreshold,
}

impl Parameter {
    pub const ALL: [Parameter; 12] = [
        Parameter::Iteration,
        Parameter::Episode,
        Parameter::TempThreshold,
        Parameter::MctsSimu,
        Parameter::Cpuct,
        Parameter::RetrainLength,
        Parameter::Epoch,
        Parameter::BatchSize,
        Parameter::LearningRate,
        Parameter::Dropout,
        Parameter::ArenaCompare,
        Parameter::UpdateThreshold,
    ];

    /// The external spelling used in config files, flags and reports.
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Iteration => "iteration",
            Parameter::Episode => "episode",
            Parameter::TempThreshold => "tempThreshold",
            Parameter::MctsSimu => "mctssimu",
            Parameter::Cpuct => "Cpuct",
            Parameter::RetrainLength => "retrainlength",
            Parameter::Epoch => "epoch",
            Parameter::BatchSize => "batchsize",
            Parameter::LearningRate => "learningrate",
            Parameter::Dropout => "dropout",
            Parameter::ArenaCompare => "arenacompare",
            Parameter::UpdateThreshold => "updateThreshold",
        }
    }

    pub fn from_name(name: &str) -> Result<Parameter, ParameterError> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.name() == name)
            .ok_or_else(|| ParameterError::Unknown(name.to_string()))
    }

    pub fn is_count(self) -> bool {
        !matches!(
            self,
            Parameter::Cpuct
                | Parameter::LearningRate
                | Parameter::Dropout
                | Parameter::UpdateThreshold
        )
    }

    /// Current value as a real number (counts widen exactly).
    pub fn get(self, ps: &ParameterSet) -> f64 {
        match self {
            Parameter::Iteration => f64::from(ps.iterations),
            Parameter::Episode => f64::from(ps.episodes),
            Parameter::TempThreshold => f64::from(ps.temp_threshold),
            Parameter::MctsSimu => f64::from(ps.mcts_simulations),
            Parameter::Cpuct => ps.cpuct,
            Parameter::RetrainLength => f64::from(ps.retrain_length),
            Parameter::Epoch => f64::from(ps.epochs),
            Parameter::BatchSize => f64::from(ps.batch_size),
            Parameter::LearningRate => ps.learning_rate,
            Parameter::Dropout => ps.dropout,
            Parameter::ArenaCompare => f64::from(ps.arena_compare),
            Parameter::UpdateThreshold => ps.update_threshold,
        }
    }

    /// Sets the parameter, enforcing integrality for counts and the
    /// parameter-set invariants afterwards.
    pub fn apply(self, ps: &mut ParameterSet, value: f64) -> Result<(), ParameterError> {
        if self.is_count() {
            if !value.is_finite() || value.fract() != 0.0 || !(1.0..=u32::MAX as f64).contains(&value) {
                return Err(ParameterError::Invalid {
                    name: self.name(),
                    reason: format!("{value} is not a positive integer"),
                });
            }
            let v = value as u32;
            match self {
                Parameter::Iteration => ps.iterations = v,
                Parameter::Episode => ps.episodes = v,
                Parameter::TempThreshold => ps.temp_threshold = v,
                Parameter::MctsSimu => ps.mcts_simulations = v,
                Parameter::RetrainLength => ps.retrain_length = v,
                Parameter::Epoch => ps.epochs = v,
                Parameter::BatchSize => ps.batch_size = v,
                Parameter::ArenaCompare => ps.arena_compare = v,
                _ => unreachable!("count parameters handled above"),
            }
        } else {
            match self {
                Parameter::Cpuct => ps.cpuct = value,
                Parameter::LearningRate => ps.learning_rate = value,
                Parameter::Dropout => ps.dropout = value,
                Parameter::UpdateThreshold => ps.update_threshold = value,
                _ => unreachable!("real parameters handled above"),
            }
        }
        ps.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_match_reference() {
        let ps = ParameterSet::default();
        ps.validate().unwrap();
        let expected = [
            (Parameter::Iteration, 100.0),
            (Parameter::Episode, 50.0),
            (Parameter::TempThreshold, 15.0),
            (Parameter::MctsSimu, 100.0),
            (Parameter::Cpuct, 1.0),
            (Parameter::RetrainLength, 20.0),
            (Parameter::Epoch, 10.0),
            (Parameter::BatchSize, 64.0),
            (Parameter::LearningRate, 0.005),
            (Parameter::Dropout, 0.3),
            (Parameter::ArenaCompare, 40.0),
            (Parameter::UpdateThreshold, 0.6),
        ];
        for (p, v) in expected {
            assert_eq!(p.get(&ps), v, "{}", p.name());
        }
    }

    #[test]
    fn invariants_enforced() {
        let mut ps = ParameterSet::default();
        ps.update_threshold = 1.5;
        assert!(matches!(
            ps.validate(),
            Err(ParameterError::Invalid { name: "updateThreshold", .. })
        ));

        let mut ps = ParameterSet::default();
        ps.episodes = 0;
        assert!(ps.validate().is_err());

        let mut ps = ParameterSet::default();
        ps.board_size = 8;
        assert!(ps.validate().is_err());
    }

    #[test]
    fn names_round_trip() {
        for p in Parameter::ALL {
            assert_eq!(Parameter::from_name(p.name()).unwrap(), p);
        }
        assert!(Parameter::from_name("Episodes").is_err());
    }

    #[test]
    fn apply_checks_count_integrality() {
        let mut ps = ParameterSet::default();
        assert!(Parameter::Episode.apply(&mut ps, 12.5).is_err());
        assert!(Parameter::Episode.apply(&mut ps, 0.0).is_err());
        Parameter::Episode.apply(&mut ps, 12.0).unwrap();
        assert_eq!(ps.episodes, 12);
        Parameter::Cpuct.apply(&mut ps, 2.5).unwrap();
        assert_eq!(ps.cpuct, 2.5);
        assert!(Parameter::Dropout.apply(&mut ps, 1.0).is_err());
    }
}
