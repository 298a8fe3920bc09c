//! On-disk layout of one training run.
//!
//! ```text
//! <run>/
//!   config.txt           resolved configuration snapshot
//!   iterations.csv       deterministic per-iteration metrics
//!   time_breakdown.csv   per-iteration wall-clock phases and counters
//!   events.jsonl         one full record per iteration
//!   rating_games.csv     rating game log (checkpoint_id, opponent_id, score)
//!   checkpoints/
//!     best.ckpt          current best model
//!     iter_<k>.ckpt      candidate trained at iteration k
//! ```
//!
//! Everything appends as the run progresses, so an aborted run leaves all
//! completed iterations on disk. Reports and exports only read.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::elo::GameResult;
use crate::net::Model;
use crate::pipeline::{IterationRecord, PipelineError, RunSink};

pub const CONFIG_FILE: &str = "config.txt";
pub const ITERATIONS_FILE: &str = "iterations.csv";
pub const TIME_FILE: &str = "time_breakdown.csv";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const RATING_GAMES_FILE: &str = "rating_games.csv";
pub const CHECKPOINT_DIR: &str = "checkpoints";

const TIME_HEADER: &str = "iteration,self_play_s,train_s,arena_s,total_s,plies,simulations,batches";

/// Writer half: a run directory being produced by `run_training`.
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the layout and writes the configuration snapshot. Fails if
    /// the directory already holds a run (metrics file present).
    pub fn create(root: &Path, config_snapshot: &str) -> Result<RunDir, PipelineError> {
        std::fs::create_dir_all(root.join(CHECKPOINT_DIR))?;
        if root.join(ITERATIONS_FILE).exists() {
            return Err(PipelineError::Mismatch(format!(
                "{} already contains a run",
                root.display()
            )));
        }
        std::fs::write(root.join(CONFIG_FILE), config_snapshot)?;
        std::fs::write(
            root.join(ITERATIONS_FILE),
            format!("{}\n", IterationRecord::metrics_csv_header()),
        )?;
        std::fs::write(root.join(TIME_FILE), format!("{TIME_HEADER}\n"))?;
        std::fs::write(root.join(EVENTS_FILE), "")?;
        std::fs::write(root.join(RATING_GAMES_FILE), "checkpoint_id,opponent_id,score\n")?;
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn best_checkpoint(&self) -> PathBuf {
        self.root.join(CHECKPOINT_DIR).join("best.ckpt")
    }

    fn append(&self, file: &str, line: &str) -> Result<(), PipelineError> {
        let mut f = OpenOptions::new()
            .append(true)
            .open(self.root.join(file))?;
        writeln!(f, "{line}")?;
        f.flush()?;
        Ok(())
    }
}

impl RunSink for RunDir {
    fn on_iteration(&mut self, record: &IterationRecord) -> Result<(), PipelineError> {
        self.append(ITERATIONS_FILE, &record.metrics_csv_row())?;
        self.append(
            TIME_FILE,
            &format!(
                "{},{},{},{},{},{},{},{}",
                record.iteration,
                record.self_play_s,
                record.train_s,
                record.arena_s,
                record.total_s,
                record.counters.plies,
                record.counters.simulations,
                record.counters.batches
            ),
        )?;
        let json = serde_json::to_string(record).map_err(std::io::Error::other)?;
        self.append(EVENTS_FILE, &json)?;
        Ok(())
    }

    fn on_candidate(&mut self, iteration: u32, model: &Model) -> Result<(), PipelineError> {
        let path = self
            .root
            .join(CHECKPOINT_DIR)
            .join(format!("iter_{iteration}.ckpt"));
        model.save(&path)?;
        Ok(())
    }

    fn on_best(&mut self, model: &Model) -> Result<(), PipelineError> {
        model.save(&self.best_checkpoint())?;
        Ok(())
    }

    fn on_rating_game(&mut self, game: &GameResult) -> Result<(), PipelineError> {
        self.append(RATING_GAMES_FILE, &game.to_csv_row())
    }
}

/// Reader half: everything a finished (or aborted) run left behind.
pub struct RunData {
    pub root: PathBuf,
    pub records: Vec<IterationRecord>,
}

impl RunData {
    pub fn load(root: &Path) -> Result<RunData, PipelineError> {
        let events = root.join(EVENTS_FILE);
        if !events.exists() {
            return Err(PipelineError::Mismatch(format!(
                "{} is not a run directory ({EVENTS_FILE} missing)",
                root.display()
            )));
        }
        let mut records = Vec::new();
        for (no, line) in std::fs::read_to_string(&events)?.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: IterationRecord = serde_json::from_str(line).map_err(|e| {
                PipelineError::Mismatch(format!(
                    "corrupt event log {}:{}: {e}",
                    events.display(),
                    no + 1
                ))
            })?;
            records.push(record);
        }
        Ok(RunData {
            root: root.to_path_buf(),
            records,
        })
    }

    pub fn config_text(&self) -> Result<String, PipelineError> {
        Ok(std::fs::read_to_string(self.root.join(CONFIG_FILE))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParameterSet;
    use crate::pipeline::{run_training, RunOptions};

    fn tiny_options(seed: u64) -> RunOptions {
        let mut ps = ParameterSet::default();
        ps.iterations = 2;
        ps.episodes = 1;
        ps.temp_threshold = 2;
        ps.mcts_simulations = 2;
        ps.retrain_length = 2;
        ps.epochs = 1;
        ps.batch_size = 8;
        ps.arena_compare = 2;
        ps.board_size = 4;
        ps.seed = seed;
        RunOptions::new(ps)
    }

    #[test]
    fn run_dir_layout_written() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        let mut sink = RunDir::create(&root, "seed = 5\n").unwrap();
        let output = run_training(&tiny_options(5), &mut sink).unwrap();

        for file in [CONFIG_FILE, ITERATIONS_FILE, TIME_FILE, EVENTS_FILE, RATING_GAMES_FILE] {
            assert!(root.join(file).exists(), "{file} missing");
        }
        assert!(root.join(CHECKPOINT_DIR).join("best.ckpt").exists());
        assert!(root.join(CHECKPOINT_DIR).join("iter_1.ckpt").exists());
        assert!(root.join(CHECKPOINT_DIR).join("iter_2.ckpt").exists());

        let csv = std::fs::read_to_string(root.join(ITERATIONS_FILE)).unwrap();
        assert_eq!(csv.lines().count(), 3, "header plus two iterations");

        let data = RunData::load(&root).unwrap();
        assert_eq!(data.records.len(), 2);
        assert_eq!(data.records[0], output.records[0]);
        assert_eq!(data.config_text().unwrap(), "seed = 5\n");
    }

    #[test]
    fn existing_run_not_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        RunDir::create(&root, "").unwrap();
        assert!(RunDir::create(&root, "").is_err());
    }

    #[test]
    fn load_rejects_non_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(RunData::load(dir.path()).is_err());
    }

    #[test]
    fn best_checkpoint_tracks_acceptance() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("run");
        let mut sink = RunDir::create(&root, "").unwrap();
        let output = run_training(&tiny_options(8), &mut sink).unwrap();
        let best = Model::load(&root.join(CHECKPOINT_DIR).join("best.ckpt")).unwrap();
        assert_eq!(best.digest(), output.best.digest());
    }
}
