//! Wall-clock accounting and the runtime cost model.
//!
//! Each training iteration decomposes into three measured phases —
//! self-play, network training and arena comparison — which the run
//! records per iteration alongside work counters. A calibrated predictor
//! estimates whole-run cost from the same three-term decomposition, and
//! a ratio rule classifies parameters as time-sensitive or time-friendly
//! from the run times of their min/default/max settings.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::params::ParameterSet;

/// A parameter is time-sensitive when its extreme settings spread total
/// run time by more than this max/min ratio.
pub const SENSITIVITY_RATIO: f64 = 1.25;

#[derive(Debug, Error, PartialEq)]
pub enum TimingError {
    #[error("unknown phase {0:?} (expected self_play, train or arena)")]
    UnknownPhase(String),
    #[error("iteration {0} has no recorded breakdown")]
    MissingIteration(u32),
}

/// The three accounted phases of one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    SelfPlay,
    Train,
    Arena,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::SelfPlay => "self_play",
            Phase::Train => "train",
            Phase::Arena => "arena",
        }
    }
}

impl FromStr for Phase {
    type Err = TimingError;

    fn from_str(s: &str) -> Result<Phase, TimingError> {
        match s {
            "self_play" => Ok(Phase::SelfPlay),
            "train" => Ok(Phase::Train),
            "arena" => Ok(Phase::Arena),
            other => Err(TimingError::UnknownPhase(other.into())),
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Work counters accumulated along with phase durations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct PhaseCounters {
    /// Self-play episodes completed.
    pub episodes: u64,
    /// Game plies across all games played (self-play, arena, rating).
    pub plies: u64,
    /// Search simulations across all games played.
    pub simulations: u64,
    /// Optimizer steps taken.
    pub batches: u64,
    /// Games completed across all game-playing phases.
    pub games: u64,
}

impl PhaseCounters {
    pub fn add(&mut self, other: &PhaseCounters) {
        self.episodes += other.episodes;
        self.plies += other.plies;
        self.simulations += other.simulations;
        self.batches += other.batches;
        self.games += other.games;
    }
}

/// Per-iteration wall-clock decomposition.
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PhaseBreakdown {
    pub self_play_s: f64,
    pub train_s: f64,
    pub arena_s: f64,
    /// Full iteration wall clock, including bookkeeping outside the phases.
    pub total_s: f64,
    pub counters: PhaseCounters,
}

impl PhaseBreakdown {
    pub fn phase_sum(&self) -> f64 {
        self.self_play_s + self.train_s + self.arena_s
    }
}

/// Accumulator for one run: a breakdown per iteration, appended by the
/// coordinating worker.
#[derive(Clone, Debug, Default)]
pub struct RunTimings {
    iterations: Vec<PhaseBreakdown>,
}

impl RunTimings {
    pub fn new() -> RunTimings {
        RunTimings::default()
    }

    /// Adds a measured duration and its counters to an iteration's phase.
    /// Iterations are indexed from 1 and allocated on first touch.
    pub fn record_phase(
        &mut self,
        iteration: u32,
        phase: Phase,
        duration_s: f64,
        counters: PhaseCounters,
    ) {
        let idx = iteration.saturating_sub(1) as usize;
        while self.iterations.len() <= idx {
            self.iterations.push(PhaseBreakdown::default());
        }
        let row = &mut self.iterations[idx];
        match phase {
            Phase::SelfPlay => row.self_play_s += duration_s,
            Phase::Train => row.train_s += duration_s,
            Phase::Arena => row.arena_s += duration_s,
        }
        row.counters.add(&counters);
    }

    /// Records the iteration's total wall clock (set once, not accumulated).
    pub fn set_total(&mut self, iteration: u32, total_s: f64) {
        let idx = iteration.saturating_sub(1) as usize;
        while self.iterations.len() <= idx {
            self.iterations.push(PhaseBreakdown::default());
        }
        self.iterations[idx].total_s = total_s;
    }

    pub fn breakdown(&self, iteration: u32) -> Result<&PhaseBreakdown, TimingError> {
        self.iterations
            .get(iteration.saturating_sub(1) as usize)
            .ok_or(TimingError::MissingIteration(iteration))
    }

    pub fn iterations(&self) -> &[PhaseBreakdown] {
        &self.iterations
    }

    pub fn total_seconds(&self) -> f64 {
        self.iterations.iter().map(|b| b.total_s).sum()
    }

    /// The run's breakdown as CSV, one row per iteration.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("iteration,self_play_s,train_s,arena_s,total_s,plies,simulations,batches\n");
        for (i, b) in self.iterations.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                i + 1,
                b.self_play_s,
                b.train_s,
                b.arena_s,
                b.total_s,
                b.counters.plies,
                b.counters.simulations,
                b.counters.batches
            ));
        }
        out
    }
}

/// Measured per-unit costs feeding [`predict_time`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeCalibration {
    /// Seconds per search simulation.
    pub t_sim_s: f64,
    /// Seconds per optimizer step.
    pub t_batch_s: f64,
    /// Mean plies per game.
    pub avg_plies: f64,
    /// Mean new training examples generated per iteration.
    pub avg_examples_per_iter: f64,
}

impl TimeCalibration {
    /// Derives the calibration constants from one measured iteration of a
    /// probe run (its breakdown plus the number of new examples it added).
    pub fn from_probe(breakdown: &PhaseBreakdown, new_examples: usize) -> TimeCalibration {
        let c = &breakdown.counters;
        TimeCalibration {
            t_sim_s: (breakdown.self_play_s + breakdown.arena_s) / (c.simulations.max(1) as f64),
            t_batch_s: breakdown.train_s / (c.batches.max(1) as f64),
            avg_plies: c.plies as f64 / (c.games.max(1) as f64),
            avg_examples_per_iter: new_examples as f64,
        }
    }
}

/// Predicted whole-run seconds: per iteration, self-play and arena cost one
/// simulation-time per (game × ply × simulation), training costs one
/// batch-time per (epoch × batch), with the steady-state pool holding
/// `retrainlength` iterations of examples.
pub fn predict_time(ps: &ParameterSet, calib: &TimeCalibration) -> f64 {
    let sim = calib.t_sim_s * calib.avg_plies * f64::from(ps.mcts_simulations);
    let self_play = f64::from(ps.episodes) * sim;
    let arena = f64::from(ps.arena_compare) * sim;
    let retained = f64::from(ps.retrain_length) * calib.avg_examples_per_iter;
    let batches = (retained / f64::from(ps.batch_size)).ceil();
    let train = f64::from(ps.epochs) * batches * calib.t_batch_s;
    f64::from(ps.iterations) * (self_play + train + arena)
}

/// Time-cost typing of a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TimeSensitivity {
    TimeSensitive,
    TimeFriendly,
}

impl TimeSensitivity {
    pub fn as_str(self) -> &'static str {
        match self {
            TimeSensitivity::TimeSensitive => "time-sensitive",
            TimeSensitivity::TimeFriendly => "time-friendly",
        }
    }
}

impl fmt::Display for TimeSensitivity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TimeSensitivity {
    type Err = String;

    fn from_str(s: &str) -> Result<TimeSensitivity, String> {
        match s {
            "time-sensitive" => Ok(TimeSensitivity::TimeSensitive),
            "time-friendly" => Ok(TimeSensitivity::TimeFriendly),
            other => Err(format!("unknown sensitivity type {other:?}")),
        }
    }
}

/// Total run times under a parameter's minimum, default and maximum value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeTriple {
    pub t_min: f64,
    pub t_default: f64,
    pub t_max: f64,
}

/// Classifies a parameter from its three measured run times: sensitive when
/// the largest-to-smallest ratio exceeds [`SENSITIVITY_RATIO`].
pub fn classify(times: &TimeTriple) -> TimeSensitivity {
    let values = [times.t_min, times.t_default, times.t_max];
    debug_assert!(values.iter().all(|t| *t > 0.0), "times must be positive");
    let max = values.iter().cloned().fold(f64::MIN, f64::max);
    let min = values.iter().cloned().fold(f64::MAX, f64::min);
    if max / min > SENSITIVITY_RATIO {
        TimeSensitivity::TimeSensitive
    } else {
        TimeSensitivity::TimeFriendly
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Parameter;

    #[test]
    fn phase_accumulation() {
        let mut timings = RunTimings::new();
        timings.record_phase(1, Phase::SelfPlay, 1.0, PhaseCounters::default());
        timings.record_phase(1, Phase::SelfPlay, 1.0, PhaseCounters::default());
        assert_eq!(timings.breakdown(1).unwrap().self_play_s, 2.0);
        assert_eq!(timings.breakdown(1).unwrap().train_s, 0.0);
        assert!(timings.breakdown(2).is_err());

        for iter in 1..=3 {
            timings.record_phase(iter, Phase::Train, 0.5, PhaseCounters::default());
        }
        assert_eq!(timings.iterations().len(), 3);
    }

    #[test]
    fn phase_names_round_trip_and_reject_unknown() {
        for phase in [Phase::SelfPlay, Phase::Train, Phase::Arena] {
            assert_eq!(Phase::from_str(phase.as_str()).unwrap(), phase);
        }
        assert_eq!(
            Phase::from_str("rating"),
            Err(TimingError::UnknownPhase("rating".into()))
        );
    }

    #[test]
    fn predictor_matches_direct_evaluation() {
        // episode=10, plies=30, sims=25 at 1 ms each -> 7.5 s self-play;
        // 10 epochs of 20 batches at 5 ms -> 1.0 s train;
        // arenacompare=20 -> 15.0 s arena.
        let mut ps = ParameterSet::default();
        ps.iterations = 1;
        ps.episodes = 10;
        ps.mcts_simulations = 25;
        ps.epochs = 10;
        ps.batch_size = 32;
        ps.retrain_length = 1;
        ps.arena_compare = 20;
        let calib = TimeCalibration {
            t_sim_s: 0.001,
            t_batch_s: 0.005,
            avg_plies: 30.0,
            avg_examples_per_iter: 640.0, // ceil(640/32) = 20 batches
        };
        let predicted = predict_time(&ps, &calib);
        assert!((predicted - 23.5).abs() < 1e-9, "got {predicted}");

        // Doubling episode doubles only the self-play term.
        let mut doubled = ps.clone();
        doubled.episodes *= 2;
        assert!((predict_time(&doubled, &calib) - (23.5 + 7.5)).abs() < 1e-9);

        // An arena-free predictor input zeroes the arena term. The
        // parameter-set invariant keeps real runs at >= 1 game, so build
        // the variant directly.
        let mut no_arena = ps.clone();
        no_arena.arena_compare = 0;
        assert!((predict_time(&no_arena, &calib) - 8.5).abs() < 1e-9);
    }

    #[test]
    fn predictor_is_monotone() {
        let base = {
            let mut ps = ParameterSet::default();
            ps.iterations = 4;
            ps.episodes = 6;
            ps.mcts_simulations = 20;
            ps.epochs = 3;
            ps.batch_size = 16;
            ps.retrain_length = 2;
            ps.arena_compare = 8;
            ps
        };
        let calib = TimeCalibration {
            t_sim_s: 0.002,
            t_batch_s: 0.004,
            avg_plies: 12.0,
            avg_examples_per_iter: 90.0,
        };
        let t0 = predict_time(&base, &calib);
        let grow = [
            Parameter::Iteration,
            Parameter::Episode,
            Parameter::MctsSimu,
            Parameter::Epoch,
            Parameter::ArenaCompare,
            Parameter::RetrainLength,
        ];
        for p in grow {
            let mut ps = base.clone();
            p.apply(&mut ps, p.get(&base) * 2.0).unwrap();
            assert!(
                predict_time(&ps, &calib) >= t0,
                "{} not monotone non-decreasing",
                p.name()
            );
        }
        let mut ps = base.clone();
        Parameter::BatchSize.apply(&mut ps, 64.0).unwrap();
        assert!(predict_time(&ps, &calib) <= t0, "batchsize not non-increasing");
    }

    #[test]
    fn classify_ratio_rule() {
        // Reference rows: episode is sensitive, Cpuct friendly.
        let episode = TimeTriple {
            t_min: 17.4,
            t_default: 44.0,
            t_max: 87.7,
        };
        assert_eq!(classify(&episode), TimeSensitivity::TimeSensitive);
        let cpuct = TimeTriple {
            t_min: 50.7,
            t_default: 44.0,
            t_max: 49.1,
        };
        assert_eq!(classify(&cpuct), TimeSensitivity::TimeFriendly);
        let flat = TimeTriple {
            t_min: 10.0,
            t_default: 10.0,
            t_max: 10.0,
        };
        assert_eq!(classify(&flat), TimeSensitivity::TimeFriendly);
    }

    #[test]
    fn csv_has_one_row_per_iteration() {
        let mut timings = RunTimings::new();
        for iter in 1..=2 {
            timings.record_phase(
                iter,
                Phase::SelfPlay,
                1.5,
                PhaseCounters {
                    episodes: 3,
                    plies: 90,
                    simulations: 900,
                    batches: 0,
                    games: 3,
                },
            );
            timings.record_phase(
                iter,
                Phase::Train,
                0.5,
                PhaseCounters {
                    batches: 10,
                    ..Default::default()
                },
            );
            timings.set_total(iter, 2.2);
        }
        let csv = timings.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(
            lines[0],
            "iteration,self_play_s,train_s,arena_s,total_s,plies,simulations,batches"
        );
        assert!(lines[1].starts_with("1,1.5,0.5,0,2.2,90,900,10"));
    }

    #[test]
    fn calibration_from_probe() {
        let breakdown = PhaseBreakdown {
            self_play_s: 6.0,
            train_s: 2.0,
            arena_s: 4.0,
            total_s: 12.5,
            counters: PhaseCounters {
                episodes: 10,
                plies: 600,
                simulations: 20_000,
                batches: 40,
                games: 20,
            },
        };
        let calib = TimeCalibration::from_probe(&breakdown, 300);
        assert!((calib.t_sim_s - 0.0005).abs() < 1e-12);
        assert!((calib.t_batch_s - 0.05).abs() < 1e-12);
        assert!((calib.avg_plies - 30.0).abs() < 1e-12);
        assert_eq!(calib.avg_examples_per_iter, 300.0);
    }
}
