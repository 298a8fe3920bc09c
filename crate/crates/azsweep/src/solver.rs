//! Full-depth exact solver for small boards.
//!
//! Negamax with memoization; tractable for 4×4 Othello, where the test
//! suites use it as an independent oracle for search and self-play.

use std::collections::HashMap;
use std::sync::Mutex;

use crate::mcts::{Evaluator, SearchError};
use crate::othello::{GameState, MoveId, Player};

type Key = (Vec<Option<Player>>, Player, u8);

/// Exact game solver with a per-instance transposition cache.
#[derive(Default)]
pub struct Solver {
    cache: Mutex<HashMap<Key, i8>>,
}

impl Solver {
    pub fn new() -> Solver {
        Solver::default()
    }

    /// Exact value of `state` for the player to move: +1 win, 0 draw, −1 loss
    /// under perfect play by both sides.
    pub fn solve(&self, state: &GameState) -> i8 {
        if let Some(outcome) = state.terminal_value(state.to_move()) {
            return outcome.value() as i8;
        }
        let key = key_of(state);
        if let Some(v) = self.cache.lock().unwrap().get(&key) {
            return *v;
        }
        let mut best = i8::MIN;
        for mv in state.legal_moves().expect("non-terminal") {
            let child = state.apply_move(mv).expect("legal move");
            best = best.max(-self.solve(&child));
            if best == 1 {
                break;
            }
        }
        self.cache.lock().unwrap().insert(key, best);
        best
    }

    /// All moves achieving the optimal value, in ascending index order.
    pub fn optimal_moves(&self, state: &GameState) -> Vec<MoveId> {
        let moves = state.legal_moves().expect("non-terminal");
        let values: Vec<i8> = moves
            .iter()
            .map(|mv| -self.solve(&state.apply_move(*mv).expect("legal move")))
            .collect();
        let best = *values.iter().max().expect("at least one move");
        moves
            .into_iter()
            .zip(values)
            .filter(|(_, v)| *v == best)
            .map(|(mv, _)| mv)
            .collect()
    }

    /// Longest possible number of plies until the game ends, capped at
    /// `limit`. Returns `None` when some line exceeds the cap.
    pub fn depth_to_end(&self, state: &GameState, limit: u32) -> Option<u32> {
        if state.is_terminal() {
            return Some(0);
        }
        if limit == 0 {
            return None;
        }
        let mut worst = 0;
        for mv in state.legal_moves().expect("non-terminal") {
            let child = state.apply_move(mv).expect("legal move");
            worst = worst.max(self.depth_to_end(&child, limit - 1)? + 1);
        }
        Some(worst)
    }
}

/// Exact-value evaluator for search tests: uniform priors plus the solver's
/// negamax value.
#[derive(Default)]
pub struct SolverEvaluator {
    solver: Solver,
}

impl SolverEvaluator {
    pub fn new() -> SolverEvaluator {
        SolverEvaluator::default()
    }
}

impl Evaluator for SolverEvaluator {
    fn evaluate(&self, state: &GameState) -> Result<(Vec<f64>, f64), SearchError> {
        let n = state.action_count();
        Ok((vec![1.0 / n as f64; n], f64::from(self.solver.solve(state))))
    }
}

fn key_of(state: &GameState) -> Key {
    let cells = (0..state.size())
        .flat_map(|r| (0..state.size()).map(move |c| (r, c)))
        .map(|(r, c)| state.cell(r, c))
        .collect();
    (cells, state.to_move(), state.consecutive_passes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::othello::Outcome;

    #[test]
    fn terminal_values_pass_through() {
        let mut cells = vec![Some(Player::Black); 16];
        for cell in cells.iter_mut().take(6) {
            *cell = Some(Player::White);
        }
        let state = GameState::from_parts(4, cells, Player::White, 0).unwrap();
        assert_eq!(state.terminal_value(Player::White), Some(Outcome::Loss));
        let solver = Solver::new();
        assert_eq!(solver.solve(&state), -1);
    }

    #[test]
    fn value_is_antisymmetric_across_a_move() {
        // v(state) == max over children of -v(child); spot-check the root.
        let solver = Solver::new();
        let state = GameState::initial(4).unwrap();
        let root = solver.solve(&state);
        let best_child = state
            .legal_moves()
            .unwrap()
            .into_iter()
            .map(|mv| -solver.solve(&state.apply_move(mv).unwrap()))
            .max()
            .unwrap();
        assert_eq!(root, best_child);
    }

    #[test]
    fn optimal_moves_nonempty_and_legal() {
        let solver = Solver::new();
        let state = GameState::initial(4).unwrap();
        let optimal = solver.optimal_moves(&state);
        assert!(!optimal.is_empty());
        let legal = state.legal_moves().unwrap();
        for mv in optimal {
            assert!(legal.contains(&mv));
        }
    }

    #[test]
    fn depth_to_end_respects_cap() {
        let solver = Solver::new();
        let state = GameState::initial(4).unwrap();
        assert_eq!(solver.depth_to_end(&state, 2), None);
        assert!(solver.depth_to_end(&state, 64).is_some());
    }
}
