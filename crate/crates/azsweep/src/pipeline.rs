//! The training coach: self-play → replay-window training → arena gating,
//! iterated, with per-iteration records streamed to a sink.
//!
//! Every random stream is derived from the run seed, so a run is
//! reproducible bit-for-bit; with parallelism enabled, episodes and games
//! within an iteration run concurrently over read-only model snapshots and
//! still produce the same records (only wall-clock times differ).

use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::elo::{GameResult, KPolicy, RatingError, RatingLedger};
use crate::mcts::{search, select_action, Evaluator, SearchError};
use crate::net::{EpochLoss, Model, NetError, NetworkConfig, TrainOptions, TrainingExample};
use crate::othello::{GameState, MoveId, OthelloError, Outcome, Player};
use crate::params::{ParameterError, ParameterSet};
use crate::timing::{Phase, PhaseCounters, RunTimings};

/// Games played against each rating opponent when a checkpoint is accepted.
pub const RATING_GAMES: u32 = 20;
/// Player id of the fixed random-policy rating anchor.
pub const ANCHOR_ID: &str = "random";
/// Player id of the initial (untrained) model.
pub const INITIAL_ID: &str = "init";

// Stream tags for seed derivation.
const STREAM_INIT: u64 = 1;
const STREAM_SELF_PLAY: u64 = 2;
const STREAM_TRAIN: u64 = 3;
const STREAM_RATING: u64 = 5;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Params(#[from] ParameterError),
    #[error(transparent)]
    Game(#[from] OthelloError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Rating(#[from] RatingError),
    #[error(transparent)]
    Timing(#[from] crate::timing::TimingError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("configuration mismatch: {0}")]
    Mismatch(String),
}

/// Splitmix-style finalizer; the building block of seed derivation.
fn mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for (run seed, stream, tags): every worker gets an
/// independent stream whose identity does not depend on scheduling.
pub fn derive_seed(base: u64, tags: &[u64]) -> u64 {
    let mut x = mix(base);
    for t in tags {
        x = mix(x ^ mix(*t));
    }
    x
}

/// Sliding replay window: the example lists of the last `capacity`
/// iterations, oldest first.
#[derive(Clone, Debug, Default)]
pub struct ReplayBuffer {
    lists: VecDeque<Vec<TrainingExample>>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> ReplayBuffer {
        assert!(capacity >= 1, "capacity must be >= 1");
        ReplayBuffer {
            lists: VecDeque::new(),
            capacity,
        }
    }

    /// Appends one iteration's examples; evicts exactly the oldest list
    /// when the window overflows.
    pub fn push(&mut self, examples: Vec<TrainingExample>) {
        self.lists.push_back(examples);
        if self.lists.len() > self.capacity {
            self.lists.pop_front();
        }
    }

    pub fn list_count(&self) -> usize {
        self.lists.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn total_examples(&self) -> usize {
        self.lists.iter().map(Vec::len).sum()
    }

    /// All retained examples flattened in window order.
    pub fn flattened(&self) -> Vec<TrainingExample> {
        self.lists.iter().flatten().cloned().collect()
    }
}

/// Everything observed about one iteration.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    pub iteration: u32,
    pub epoch_losses: Vec<EpochLoss>,
    pub arena_wins: u32,
    pub arena_losses: u32,
    pub arena_draws: u32,
    pub accepted: bool,
    pub examples_new: usize,
    pub examples_trained: usize,
    /// Elo estimate of the best model after this iteration.
    pub elo: f64,
    /// Digest of the model that generated this iteration's self-play games.
    pub self_play_model_digest: String,
    pub self_play_s: f64,
    pub train_s: f64,
    pub arena_s: f64,
    pub total_s: f64,
    pub counters: PhaseCounters,
}

impl IterationRecord {
    /// Mean total loss across the iteration's epochs.
    pub fn mean_total_loss(&self) -> f64 {
        if self.epoch_losses.is_empty() {
            return f64::NAN;
        }
        self.epoch_losses.iter().map(EpochLoss::total).sum::<f64>() / self.epoch_losses.len() as f64
    }

    pub fn mean_policy_loss(&self) -> f64 {
        self.epoch_losses.iter().map(|e| e.policy).sum::<f64>() / self.epoch_losses.len() as f64
    }

    pub fn mean_value_loss(&self) -> f64 {
        self.epoch_losses.iter().map(|e| e.value).sum::<f64>() / self.epoch_losses.len() as f64
    }

    /// Header of the deterministic metrics CSV (no wall-clock columns).
    pub fn metrics_csv_header() -> &'static str {
        "iteration,loss_pi,loss_v,loss_total,wins,losses,draws,accepted,examples_new,examples_trained,elo,model_digest"
    }

    pub fn metrics_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.mean_policy_loss(),
            self.mean_value_loss(),
            self.mean_total_loss(),
            self.arena_wins,
            self.arena_losses,
            self.arena_draws,
            self.accepted,
            self.examples_new,
            self.examples_trained,
            self.elo,
            self.self_play_model_digest,
        )
    }
}

/// Receiver for run artifacts, called by the coordinating worker as they
/// are produced. All methods default to no-ops.
pub trait RunSink {
    fn on_iteration(&mut self, _record: &IterationRecord) -> Result<(), PipelineError> {
        Ok(())
    }
    /// The freshly trained candidate of an iteration (accepted or not).
    fn on_candidate(&mut self, _iteration: u32, _model: &Model) -> Result<(), PipelineError> {
        Ok(())
    }
    /// The current best model (at run start and after each acceptance).
    fn on_best(&mut self, _model: &Model) -> Result<(), PipelineError> {
        Ok(())
    }
    fn on_rating_game(&mut self, _game: &GameResult) -> Result<(), PipelineError> {
        Ok(())
    }
}

/// Sink that keeps nothing.
pub struct NullSink;

impl RunSink for NullSink {}

/// A full run configuration: parameters plus the pieces that are not swept.
#[derive(Clone, Debug)]
pub struct RunOptions {
    pub params: ParameterSet,
    pub net: NetworkConfig,
    /// Run episodes and evaluation games concurrently.
    pub parallel: bool,
    /// Expand each example with its 8 dihedral transforms (off by default;
    /// the training loop proper does not include augmentation).
    pub augment_symmetries: bool,
}

impl RunOptions {
    pub fn new(params: ParameterSet) -> RunOptions {
        let mut net = NetworkConfig::default_for(params.board_size);
        net.dropout_rate = params.dropout;
        RunOptions {
            params,
            net,
            parallel: false,
            augment_symmetries: false,
        }
    }
}

/// A player in evaluation games.
pub trait Agent {
    fn choose_move(&mut self, state: &GameState) -> Result<MoveId, PipelineError>;
    /// Search simulations this agent spends per move (for accounting).
    fn simulations_per_move(&self) -> u64 {
        0
    }
}

/// Greedy search-guided player: full search per move, argmax of the visit
/// policy, no temperature.
pub struct MctsAgent<'a> {
    evaluator: &'a (dyn Evaluator + Sync),
    cpuct: f64,
    simulations: u32,
}

impl<'a> MctsAgent<'a> {
    pub fn new(evaluator: &'a (dyn Evaluator + Sync), cpuct: f64, simulations: u32) -> MctsAgent<'a> {
        MctsAgent {
            evaluator,
            cpuct,
            simulations,
        }
    }

    pub fn from_params(evaluator: &'a (dyn Evaluator + Sync), ps: &ParameterSet) -> MctsAgent<'a> {
        MctsAgent::new(evaluator, ps.cpuct, ps.mcts_simulations)
    }
}

impl Agent for MctsAgent<'_> {
    fn choose_move(&mut self, state: &GameState) -> Result<MoveId, PipelineError> {
        let policy = search(state, self.evaluator, self.cpuct, self.simulations)?;
        Ok(policy.argmax())
    }

    fn simulations_per_move(&self) -> u64 {
        u64::from(self.simulations)
    }
}

/// Uniform-random legal player; the rating anchor.
pub struct RandomAgent {
    rng: ChaCha8Rng,
}

impl RandomAgent {
    pub fn new(seed: u64) -> RandomAgent {
        RandomAgent {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Agent for RandomAgent {
    fn choose_move(&mut self, state: &GameState) -> Result<MoveId, PipelineError> {
        let moves = state.legal_moves()?;
        Ok(moves[self.rng.gen_range(0..moves.len())])
    }
}

/// One finished game.
#[derive(Clone, Copy, Debug)]
pub struct GameRecord {
    pub winner: Option<Player>,
    pub plies: u64,
    pub simulations: u64,
}

/// Plays one game from the initial position; `black` moves first.
pub fn play_game(
    black: &mut dyn Agent,
    white: &mut dyn Agent,
    board_size: usize,
) -> Result<GameRecord, PipelineError> {
    let mut state = GameState::initial(board_size)?;
    let mut plies = 0u64;
    let mut simulations = 0u64;
    while !state.is_terminal() {
        let agent: &mut dyn Agent = match state.to_move() {
            Player::Black => black,
            Player::White => white,
        };
        let mv = agent.choose_move(&state)?;
        simulations += agent.simulations_per_move();
        state = state.apply_move(mv)?;
        plies += 1;
    }
    let winner = match state.terminal_value(Player::Black).expect("terminal") {
        Outcome::Win => Some(Player::Black),
        Outcome::Loss => Some(Player::White),
        Outcome::Draw => None,
    };
    Ok(GameRecord {
        winner,
        plies,
        simulations,
    })
}

/// Aggregate result of a series from the candidate's perspective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SeriesOutcome {
    pub wins: u32,
    pub losses: u32,
    pub draws: u32,
    pub plies: u64,
    pub simulations: u64,
    pub games: u64,
}

/// Plays `games` games between fresh agents from the two factories,
/// alternating colours: the candidate moves first in odd-numbered games
/// (1-based), second in even ones.
pub fn play_series<'a, FC, FO>(
    make_candidate: FC,
    make_opponent: FO,
    games: u32,
    board_size: usize,
    parallel: bool,
) -> Result<SeriesOutcome, PipelineError>
where
    FC: Fn(u32) -> Box<dyn Agent + 'a> + Sync,
    FO: Fn(u32) -> Box<dyn Agent + 'a> + Sync,
{
    let run_one = |game: u32| -> Result<(i8, u64, u64), PipelineError> {
        let candidate_first = game % 2 == 1;
        let mut candidate = make_candidate(game);
        let mut opponent = make_opponent(game);
        let record = if candidate_first {
            play_game(candidate.as_mut(), opponent.as_mut(), board_size)?
        } else {
            play_game(opponent.as_mut(), candidate.as_mut(), board_size)?
        };
        let sign = match record.winner {
            None => 0,
            Some(Player::Black) => {
                if candidate_first {
                    1
                } else {
                    -1
                }
            }
            Some(Player::White) => {
                if candidate_first {
                    -1
                } else {
                    1
                }
            }
        };
        Ok((sign, record.plies, record.simulations))
    };

    let results: Vec<(i8, u64, u64)> = if parallel {
        (1..=games)
            .into_par_iter()
            .map(run_one)
            .collect::<Result<_, _>>()?
    } else {
        (1..=games).map(run_one).collect::<Result<_, _>>()?
    };

    let mut outcome = SeriesOutcome::default();
    for (sign, plies, simulations) in results {
        match sign {
            1 => outcome.wins += 1,
            -1 => outcome.losses += 1,
            _ => outcome.draws += 1,
        }
        outcome.plies += plies;
        outcome.simulations += simulations;
        outcome.games += 1;
    }
    Ok(outcome)
}

/// Head-to-head gate: `arena_compare` games between the trained candidate
/// and the incumbent, colours alternating, both playing greedily.
pub fn arena<C, I>(
    candidate: &C,
    incumbent: &I,
    ps: &ParameterSet,
    parallel: bool,
) -> Result<SeriesOutcome, PipelineError>
where
    C: Evaluator + Sync,
    I: Evaluator + Sync,
{
    play_series(
        |_| Box::new(MctsAgent::from_params(candidate, ps)),
        |_| Box::new(MctsAgent::from_params(incumbent, ps)),
        ps.arena_compare,
        ps.board_size,
        parallel,
    )
}

/// Accepts the candidate iff its decisive-game win rate reaches the
/// threshold; draws are excluded, and an all-draw series rejects.
pub fn accept_model(wins: u32, losses: u32, draws: u32, update_threshold: f64) -> bool {
    let _ = draws;
    let decisive = wins + losses;
    if decisive == 0 {
        return false;
    }
    f64::from(wins) / f64::from(decisive) >= update_threshold
}

/// What one self-play game produced.
#[derive(Clone, Debug)]
pub struct EpisodeOutput {
    pub examples: Vec<TrainingExample>,
    pub plies: u64,
    pub simulations: u64,
    pub outcome_for_black: Outcome,
}

/// Plays one complete self-play game: a fresh search per ply, temperature
/// sampling below `tempThreshold`, greedy play from there on. Each ply's
/// canonical encoding and search policy are recorded; at termination every
/// example receives the outcome z from its own mover's perspective.
pub fn execute_episode<E: Evaluator>(
    model: &E,
    ps: &ParameterSet,
    rng: &mut ChaCha8Rng,
    augment_symmetries: bool,
) -> Result<EpisodeOutput, PipelineError> {
    let mut state = GameState::initial(ps.board_size)?;
    let mut pending: Vec<(GameState, Vec<f64>, Player)> = Vec::new();
    let mut plies = 0u64;
    let mut simulations = 0u64;
    let mut step = 0u32;
    while !state.is_terminal() {
        let policy = search(&state, model, ps.cpuct, ps.mcts_simulations)?;
        simulations += u64::from(ps.mcts_simulations);
        let probabilities = policy.probabilities().to_vec();
        pending.push((state.clone(), probabilities, state.to_move()));
        let mv = select_action(&policy, step, ps.temp_threshold, rng);
        state = state.apply_move(mv)?;
        step += 1;
        plies += 1;
    }
    let outcome_for_black = state.terminal_value(Player::Black).expect("terminal");

    let mut examples = Vec::new();
    for (position, probabilities, mover) in pending {
        let outcome = match mover {
            Player::Black => outcome_for_black,
            Player::White => outcome_for_black.flipped(),
        };
        if augment_symmetries {
            for (sym_state, sym_policy) in position.symmetries(&probabilities) {
                examples.push(TrainingExample {
                    encoding: sym_state.encode(),
                    policy: sym_policy,
                    outcome: outcome.value(),
                });
            }
        } else {
            examples.push(TrainingExample {
                encoding: position.encode(),
                policy: probabilities,
                outcome: outcome.value(),
            });
        }
    }
    Ok(EpisodeOutput {
        examples,
        plies,
        simulations,
        outcome_for_black,
    })
}

/// The run's outcome: the final best model and everything recorded.
pub struct TrainingOutput {
    pub best: Model,
    pub records: Vec<IterationRecord>,
    pub timings: RunTimings,
}

/// Runs the full training loop: `iterations` cycles of self-play over the
/// current best model, training a candidate on the flattened replay window,
/// and an arena gate deciding whether the candidate replaces the best.
/// Accepted checkpoints play rating games against the random anchor and
/// their predecessor; records stream to the sink as they complete.
pub fn run_training(opts: &RunOptions, sink: &mut dyn RunSink) -> Result<TrainingOutput, PipelineError> {
    opts.params.validate()?;
    if opts.net.board_size != opts.params.board_size {
        return Err(PipelineError::Mismatch(format!(
            "network board_size {} does not match run board_size {}",
            opts.net.board_size, opts.params.board_size
        )));
    }
    let ps = &opts.params;

    let mut incumbent = Model::new(opts.net.clone(), derive_seed(ps.seed, &[STREAM_INIT]))?;
    let mut incumbent_id = INITIAL_ID.to_string();
    sink.on_best(&incumbent)?;

    let mut ledger = RatingLedger::new(ANCHOR_ID);
    ledger.add_player(INITIAL_ID)?;
    let k_policy = KPolicy::standard();
    // Kept for rating games when the next candidate is accepted.
    let mut previous_best: Option<(String, Model)> = None;

    let mut buffer = ReplayBuffer::new(ps.retrain_length as usize);
    let mut timings = RunTimings::new();
    let mut records: Vec<IterationRecord> = Vec::with_capacity(ps.iterations as usize);

    for iteration in 1..=ps.iterations {
        let iteration_start = Instant::now();
        let self_play_digest = incumbent.digest();

        // Stage 1: self-play episodes over a read-only snapshot of the best.
        let phase_start = Instant::now();
        let episode_seeds: Vec<u64> = (1..=ps.episodes)
            .map(|e| derive_seed(ps.seed, &[STREAM_SELF_PLAY, u64::from(iteration), u64::from(e)]))
            .collect();
        let run_episode = |seed: &u64| -> Result<EpisodeOutput, PipelineError> {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            execute_episode(&incumbent, ps, &mut rng, opts.augment_symmetries)
        };
        let episodes: Vec<EpisodeOutput> = if opts.parallel {
            episode_seeds
                .par_iter()
                .map(run_episode)
                .collect::<Result<_, _>>()?
        } else {
            episode_seeds
                .iter()
                .map(run_episode)
                .collect::<Result<_, _>>()?
        };
        let self_play_s = phase_start.elapsed().as_secs_f64();
        let mut self_play_counters = PhaseCounters {
            episodes: u64::from(ps.episodes),
            games: u64::from(ps.episodes),
            ..Default::default()
        };
        let mut new_examples = Vec::new();
        for episode in episodes {
            self_play_counters.plies += episode.plies;
            self_play_counters.simulations += episode.simulations;
            new_examples.extend(episode.examples);
        }
        let examples_new = new_examples.len();
        buffer.push(new_examples);
        timings.record_phase(iteration, Phase::SelfPlay, self_play_s, self_play_counters);

        // Stage 2: train a candidate on the flattened window.
        let phase_start = Instant::now();
        let pool = buffer.flattened();
        let examples_trained = pool.len();
        let mut candidate = incumbent.clone();
        let report = candidate.train(
            &pool,
            &TrainOptions {
                epochs: ps.epochs,
                batch_size: ps.batch_size,
                learning_rate: ps.learning_rate,
                dropout: ps.dropout,
                seed: derive_seed(ps.seed, &[STREAM_TRAIN, u64::from(iteration)]),
            },
        )?;
        let train_s = phase_start.elapsed().as_secs_f64();
        timings.record_phase(
            iteration,
            Phase::Train,
            train_s,
            PhaseCounters {
                batches: report.optimizer_steps,
                ..Default::default()
            },
        );
        sink.on_candidate(iteration, &candidate)?;

        // Stage 3: arena gate, plus rating games on acceptance.
        let phase_start = Instant::now();
        let arena_outcome = arena(&candidate, &incumbent, ps, opts.parallel)?;
        let accepted = accept_model(
            arena_outcome.wins,
            arena_outcome.losses,
            arena_outcome.draws,
            ps.update_threshold,
        );
        let mut arena_counters = PhaseCounters {
            plies: arena_outcome.plies,
            simulations: arena_outcome.simulations,
            games: arena_outcome.games,
            ..Default::default()
        };

        if accepted {
            let new_id = format!("iter_{iteration}");
            let prior_rating = ledger.rating(&incumbent_id)?;
            ledger.add_player_at(&new_id, prior_rating)?;

            // 20 games against the fixed random anchor.
            let anchor_series = play_series(
                |_| Box::new(MctsAgent::from_params(&candidate, ps)),
                |game| {
                    Box::new(RandomAgent::new(derive_seed(
                        ps.seed,
                        &[STREAM_RATING, u64::from(iteration), 1, u64::from(game)],
                    )))
                },
                RATING_GAMES,
                ps.board_size,
                opts.parallel,
            )?;
            record_rating_series(
                &mut ledger,
                sink,
                &k_policy,
                &new_id,
                ANCHOR_ID,
                &anchor_series,
            )?;
            arena_counters.plies += anchor_series.plies;
            arena_counters.simulations += anchor_series.simulations;
            arena_counters.games += anchor_series.games;

            // 20 games against the previous accepted checkpoint.
            let (prev_id, prev_model) = previous_best
                .take()
                .unwrap_or((incumbent_id.clone(), incumbent.clone()));
            let prev_series = play_series(
                |_| Box::new(MctsAgent::from_params(&candidate, ps)),
                |_| Box::new(MctsAgent::from_params(&prev_model, ps)),
                RATING_GAMES,
                ps.board_size,
                opts.parallel,
            )?;
            record_rating_series(&mut ledger, sink, &k_policy, &new_id, &prev_id, &prev_series)?;
            arena_counters.plies += prev_series.plies;
            arena_counters.simulations += prev_series.simulations;
            arena_counters.games += prev_series.games;

            previous_best = Some((incumbent_id.clone(), incumbent.clone()));
            incumbent = candidate;
            incumbent_id = new_id;
            sink.on_best(&incumbent)?;
        }
        let arena_s = phase_start.elapsed().as_secs_f64();
        timings.record_phase(iteration, Phase::Arena, arena_s, arena_counters);

        let total_s = iteration_start.elapsed().as_secs_f64();
        timings.set_total(iteration, total_s);

        let record = IterationRecord {
            iteration,
            epoch_losses: report.epoch_losses,
            arena_wins: arena_outcome.wins,
            arena_losses: arena_outcome.losses,
            arena_draws: arena_outcome.draws,
            accepted,
            examples_new,
            examples_trained,
            elo: ledger.rating(&incumbent_id)?,
            self_play_model_digest: self_play_digest,
            self_play_s,
            train_s,
            arena_s,
            total_s,
            counters: timings.breakdown(iteration)?.counters,
        };
        sink.on_iteration(&record)?;
        records.push(record);
    }

    Ok(TrainingOutput {
        best: incumbent,
        records,
        timings,
    })
}

/// Feeds one rating series into the ledger and the sink, game by game, in
/// deterministic (checkpoint, game index) order. Wins are recorded from the
/// new checkpoint's perspective.
fn record_rating_series(
    ledger: &mut RatingLedger,
    sink: &mut dyn RunSink,
    k_policy: &KPolicy,
    player: &str,
    opponent: &str,
    series: &SeriesOutcome,
) -> Result<(), PipelineError> {
    let scores = std::iter::repeat(1.0)
        .take(series.wins as usize)
        .chain(std::iter::repeat(0.0).take(series.losses as usize))
        .chain(std::iter::repeat(0.5).take(series.draws as usize));
    for score_a in scores {
        let game = GameResult {
            player_a: player.to_string(),
            player_b: opponent.to_string(),
            score_a,
        };
        ledger.record(&game, k_policy)?;
        sink.on_rating_game(&game)?;
    }
    Ok(())
}
