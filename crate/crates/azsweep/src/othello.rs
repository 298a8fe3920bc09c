//! Rules engine for square-board Othello (4×4 and 6×6).
//!
//! States are immutable values: every operation returns a fresh state, so
//! any number of workers can share positions without locking. The 4×4 board
//! is small enough for full-depth exact solving, which the test suites use
//! as an oracle target.

use std::fmt;

use thiserror::Error;

/// Board sizes supported by the engine.
pub const SUPPORTED_SIZES: [usize; 2] = [4, 6];

const DIRECTIONS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OthelloError {
    #[error("unsupported board size {0} (supported: 4, 6)")]
    UnsupportedSize(usize),
    #[error("operation called on a terminal position")]
    TerminalPosition,
    #[error("illegal move at index {index}")]
    IllegalMove { index: usize },
    #[error("board text is malformed: {0}")]
    Parse(String),
}

/// Disc colour; Black always moves first.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Player {
    Black,
    White,
}

impl Player {
    pub fn opponent(self) -> Player {
        match self {
            Player::Black => Player::White,
            Player::White => Player::Black,
        }
    }

    fn letter(self) -> char {
        match self {
            Player::Black => 'B',
            Player::White => 'W',
        }
    }
}

/// Game outcome from a stated player's perspective.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Win,
    Loss,
    Draw,
}

impl Outcome {
    /// The z value used as the value-head regression target.
    pub fn value(self) -> f64 {
        match self {
            Outcome::Win => 1.0,
            Outcome::Loss => -1.0,
            Outcome::Draw => 0.0,
        }
    }

    /// The same result seen from the other player.
    pub fn flipped(self) -> Outcome {
        match self {
            Outcome::Win => Outcome::Loss,
            Outcome::Loss => Outcome::Win,
            Outcome::Draw => Outcome::Draw,
        }
    }
}

/// Action index in `[0, n*n]`; index `n*n` encodes a pass.
///
/// The same index addresses the action's entry in a policy vector of
/// length `n*n + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoveId(usize);

impl MoveId {
    pub fn from_index(index: usize) -> MoveId {
        MoveId(index)
    }

    pub fn from_cell(board_size: usize, row: usize, col: usize) -> MoveId {
        debug_assert!(row < board_size && col < board_size);
        MoveId(row * board_size + col)
    }

    pub fn pass(board_size: usize) -> MoveId {
        MoveId(board_size * board_size)
    }

    pub fn index(self) -> usize {
        self.0
    }

    pub fn is_pass(self, board_size: usize) -> bool {
        self.0 == board_size * board_size
    }

    /// `(row, col)` for a placement, `None` for a pass.
    pub fn cell(self, board_size: usize) -> Option<(usize, usize)> {
        if self.is_pass(board_size) {
            None
        } else {
            Some((self.0 / board_size, self.0 % board_size))
        }
    }
}

/// A canonical Othello position: board contents plus the player to move and
/// the current run of consecutive passes (two passes end the game).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GameState {
    size: usize,
    cells: Vec<Option<Player>>,
    to_move: Player,
    consecutive_passes: u8,
}

impl GameState {
    /// The standard start: four discs in the central 2×2, same colours on a
    /// diagonal, Black to move.
    pub fn initial(size: usize) -> Result<GameState, OthelloError> {
        if !SUPPORTED_SIZES.contains(&size) {
            return Err(OthelloError::UnsupportedSize(size));
        }
        let mut cells = vec![None; size * size];
        let lo = size / 2 - 1;
        let hi = size / 2;
        cells[lo * size + lo] = Some(Player::White);
        cells[hi * size + hi] = Some(Player::White);
        cells[lo * size + hi] = Some(Player::Black);
        cells[hi * size + lo] = Some(Player::Black);
        Ok(GameState {
            size,
            cells,
            to_move: Player::Black,
            consecutive_passes: 0,
        })
    }

    /// Builds an arbitrary position, for fixtures and exhaustive tests.
    pub fn from_parts(
        size: usize,
        cells: Vec<Option<Player>>,
        to_move: Player,
        consecutive_passes: u8,
    ) -> Result<GameState, OthelloError> {
        if !SUPPORTED_SIZES.contains(&size) {
            return Err(OthelloError::UnsupportedSize(size));
        }
        if cells.len() != size * size {
            return Err(OthelloError::Parse(format!(
                "expected {} cells, got {}",
                size * size,
                cells.len()
            )));
        }
        if consecutive_passes > 2 {
            return Err(OthelloError::Parse(format!(
                "consecutive_passes {consecutive_passes} out of range"
            )));
        }
        Ok(GameState {
            size,
            cells,
            to_move,
            consecutive_passes,
        })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of cells; the pass action index equals this.
    pub fn cell_count(&self) -> usize {
        self.size * self.size
    }

    /// Length of a policy vector for this board: one entry per cell plus pass.
    pub fn action_count(&self) -> usize {
        self.cell_count() + 1
    }

    pub fn to_move(&self) -> Player {
        self.to_move
    }

    pub fn consecutive_passes(&self) -> u8 {
        self.consecutive_passes
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<Player> {
        self.cells[row * self.size + col]
    }

    pub fn pass_move(&self) -> MoveId {
        MoveId::pass(self.size)
    }

    pub fn disc_count(&self, player: Player) -> usize {
        self.cells.iter().filter(|c| **c == Some(player)).count()
    }

    fn occupied(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_terminal(&self) -> bool {
        self.consecutive_passes >= 2 || self.occupied() == self.cell_count()
    }

    /// Indices of the opponent discs flipped by placing at `(row, col)`.
    /// Empty means the placement is illegal.
    fn flips_at(&self, row: usize, col: usize, player: Player) -> Vec<usize> {
        let mut flips = Vec::new();
        if self.cells[row * self.size + col].is_some() {
            return flips;
        }
        let opponent = player.opponent();
        for (dr, dc) in DIRECTIONS {
            let mut ray = Vec::new();
            let mut r = row as isize + dr;
            let mut c = col as isize + dc;
            while r >= 0 && c >= 0 && (r as usize) < self.size && (c as usize) < self.size {
                let idx = r as usize * self.size + c as usize;
                match self.cells[idx] {
                    Some(p) if p == opponent => ray.push(idx),
                    Some(_) => {
                        if !ray.is_empty() {
                            flips.extend(ray);
                        }
                        break;
                    }
                    None => break,
                }
                r += dr;
                c += dc;
            }
        }
        flips
    }

    fn has_placement(&self, player: Player) -> bool {
        for row in 0..self.size {
            for col in 0..self.size {
                if !self.flips_at(row, col, player).is_empty() {
                    return true;
                }
            }
        }
        false
    }

    /// All flanking placements for the player to move, in ascending index
    /// order; exactly `[pass]` when no placement flanks anything.
    pub fn legal_moves(&self) -> Result<Vec<MoveId>, OthelloError> {
        if self.is_terminal() {
            return Err(OthelloError::TerminalPosition);
        }
        let mut moves = Vec::new();
        for row in 0..self.size {
            for col in 0..self.size {
                if !self.flips_at(row, col, self.to_move).is_empty() {
                    moves.push(MoveId::from_cell(self.size, row, col));
                }
            }
        }
        if moves.is_empty() {
            moves.push(self.pass_move());
        }
        Ok(moves)
    }

    /// Applies a move, returning the successor state. Illegal moves are
    /// rejected, never silently ignored.
    pub fn apply_move(&self, mv: MoveId) -> Result<GameState, OthelloError> {
        if self.is_terminal() {
            return Err(OthelloError::TerminalPosition);
        }
        let mut next = self.clone();
        if mv.is_pass(self.size) {
            if self.has_placement(self.to_move) {
                return Err(OthelloError::IllegalMove { index: mv.index() });
            }
            next.consecutive_passes += 1;
        } else {
            let Some((row, col)) = mv.cell(self.size) else {
                return Err(OthelloError::IllegalMove { index: mv.index() });
            };
            let flips = self.flips_at(row, col, self.to_move);
            if flips.is_empty() {
                return Err(OthelloError::IllegalMove { index: mv.index() });
            }
            next.cells[row * self.size + col] = Some(self.to_move);
            for idx in flips {
                next.cells[idx] = Some(self.to_move);
            }
            next.consecutive_passes = 0;
        }
        next.to_move = self.to_move.opponent();
        Ok(next)
    }

    /// Disc-majority result if the position is terminal, `None` otherwise.
    pub fn terminal_value(&self, perspective: Player) -> Option<Outcome> {
        if !self.is_terminal() {
            return None;
        }
        let own = self.disc_count(perspective);
        let opp = self.disc_count(perspective.opponent());
        Some(match own.cmp(&opp) {
            std::cmp::Ordering::Greater => Outcome::Win,
            std::cmp::Ordering::Less => Outcome::Loss,
            std::cmp::Ordering::Equal => Outcome::Draw,
        })
    }

    /// Fixed-shape numeric encoding from the mover's perspective: own discs
    /// are +1, opponent discs −1, empty 0. Colour-swapping the position and
    /// the player to move yields the identical encoding.
    pub fn encode(&self) -> Encoding {
        let own = self.to_move;
        let values = self
            .cells
            .iter()
            .map(|c| match c {
                Some(p) if *p == own => 1.0,
                Some(_) => -1.0,
                None => 0.0,
            })
            .collect();
        Encoding {
            size: self.size,
            values,
        }
    }

    /// The 8 dihedral transforms of a `(state, policy)` pair with policy
    /// entries permuted consistently; the pass entry stays in place.
    pub fn symmetries(&self, policy: &[f64]) -> Vec<(GameState, Vec<f64>)> {
        assert_eq!(policy.len(), self.action_count(), "policy length mismatch");
        let n = self.size;
        let mut out = Vec::with_capacity(8);
        for mirror in [false, true] {
            for quarter_turns in 0..4 {
                let mut cells = vec![None; n * n];
                let mut pol = vec![0.0; policy.len()];
                pol[n * n] = policy[n * n];
                for row in 0..n {
                    for col in 0..n {
                        let (r, c) = transform_cell(row, col, n, quarter_turns, mirror);
                        cells[r * n + c] = self.cells[row * n + col];
                        pol[r * n + c] = policy[row * n + col];
                    }
                }
                let state = GameState {
                    size: n,
                    cells,
                    to_move: self.to_move,
                    consecutive_passes: self.consecutive_passes,
                };
                out.push((state, pol));
            }
        }
        out
    }

    /// Parses the plain-text fixture format: `size` lines of `size`
    /// characters from `{., B, W}`, then a `to-move: B|W` line.
    pub fn from_text(text: &str) -> Result<GameState, OthelloError> {
        let lines: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
        if lines.len() < 2 {
            return Err(OthelloError::Parse("expected board rows and a to-move line".into()));
        }
        let (rows, footer) = lines.split_at(lines.len() - 1);
        let size = rows.len();
        if !SUPPORTED_SIZES.contains(&size) {
            return Err(OthelloError::UnsupportedSize(size));
        }
        let mut cells = Vec::with_capacity(size * size);
        for row in rows {
            if row.chars().count() != size {
                return Err(OthelloError::Parse(format!(
                    "row {row:?} does not have {size} cells"
                )));
            }
            for ch in row.chars() {
                cells.push(match ch {
                    '.' => None,
                    'B' => Some(Player::Black),
                    'W' => Some(Player::White),
                    other => return Err(OthelloError::Parse(format!("bad cell {other:?}"))),
                });
            }
        }
        let to_move = match footer[0].trim() {
            "to-move: B" => Player::Black,
            "to-move: W" => Player::White,
            other => return Err(OthelloError::Parse(format!("bad to-move line {other:?}"))),
        };
        GameState::from_parts(size, cells, to_move, 0)
    }

    /// Renders the position in the fixture format accepted by [`from_text`].
    ///
    /// [`from_text`]: GameState::from_text
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in 0..self.size {
            for col in 0..self.size {
                out.push(match self.cell(row, col) {
                    None => '.',
                    Some(p) => p.letter(),
                });
            }
            out.push('\n');
        }
        out.push_str(&format!("to-move: {}\n", self.to_move.letter()));
        out
    }
}

impl fmt::Display for GameState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

fn transform_cell(
    row: usize,
    col: usize,
    n: usize,
    quarter_turns: u8,
    mirror: bool,
) -> (usize, usize) {
    let (mut r, mut c) = if mirror { (row, n - 1 - col) } else { (row, col) };
    for _ in 0..quarter_turns {
        let (nr, nc) = (c, n - 1 - r);
        r = nr;
        c = nc;
    }
    (r, c)
}

/// Canonical numeric board encoding, the network input for one position.
///
/// Values are laid out row-major; `+1` marks the discs of the player to
/// move. The original position (up to colour choice) can be reconstructed,
/// which is how inference recovers the legal-move mask.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Encoding {
    size: usize,
    values: Vec<f64>,
}

impl Encoding {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Rebuilds the canonical position: the mover's discs come back as
    /// Black, so `to_move` is always Black.
    pub fn to_state(&self) -> GameState {
        let cells = self
            .values
            .iter()
            .map(|v| {
                if *v > 0.5 {
                    Some(Player::Black)
                } else if *v < -0.5 {
                    Some(Player::White)
                } else {
                    None
                }
            })
            .collect();
        GameState {
            size: self.size,
            cells,
            to_move: Player::Black,
            consecutive_passes: 0,
        }
    }

    /// Legal-move mask over the `n*n + 1` action indices for the encoded
    /// position. A full board masks everything but the pass entry.
    pub fn legal_mask(&self) -> Vec<bool> {
        let state = self.to_state();
        let mut mask = vec![false; state.action_count()];
        match state.legal_moves() {
            Ok(moves) => {
                for mv in moves {
                    mask[mv.index()] = true;
                }
            }
            Err(_) => {
                mask[state.cell_count()] = true;
            }
        }
        mask
    }
}
