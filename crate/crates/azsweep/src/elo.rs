//! Incremental Elo ratings for checkpoint strength curves.
//!
//! Expected score `E_A = 1 / (1 + 10^((R_B - R_A)/400))`, update
//! `R_A += K·(S_A - E_A)`, draws scoring ½. A designated anchor player
//! (the fixed random-policy opponent) stays pinned at rating 0 so curves
//! from different runs share a scale.

use std::collections::BTreeMap;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RatingError {
    #[error("unknown player id {0:?}")]
    UnknownPlayer(String),
    #[error("player id {0:?} already registered")]
    DuplicatePlayer(String),
    #[error("invalid game score {0} (expected 0, 0.5 or 1)")]
    InvalidScore(f64),
    #[error("malformed game log line {0:?}")]
    Parse(String),
}

/// Expectation that a player rated `r_a` beats one rated `r_b`.
pub fn expected_score(r_a: f64, r_b: f64) -> f64 {
    1.0 / (1.0 + 10f64.powf((r_b - r_a) / 400.0))
}

/// One rating step: `r_a + k·(s_a − e_a)`.
pub fn update_rating(r_a: f64, e_a: f64, s_a: f64, k: f64) -> f64 {
    r_a + k * (s_a - e_a)
}

/// Maximum per-game adjustment. The two-stage policy uses a bigger K while
/// a player is young and a smaller one once established.
#[derive(Clone, Copy, Debug)]
pub enum KPolicy {
    Fixed(f64),
    TwoStage {
        early_k: f64,
        early_games: u32,
        late_k: f64,
    },
}

impl KPolicy {
    /// The default used by the training pipeline.
    pub fn standard() -> KPolicy {
        KPolicy::Fixed(32.0)
    }

    /// K = 40 for a player's first 30 games, 20 afterwards.
    pub fn staged() -> KPolicy {
        KPolicy::TwoStage {
            early_k: 40.0,
            early_games: 30,
            late_k: 20.0,
        }
    }

    fn k_for(&self, games_played: u32) -> f64 {
        match self {
            KPolicy::Fixed(k) => *k,
            KPolicy::TwoStage {
                early_k,
                early_games,
                late_k,
            } => {
                if games_played < *early_games {
                    *early_k
                } else {
                    *late_k
                }
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RatedPlayer {
    pub id: String,
    pub rating: f64,
    pub games_played: u32,
}

/// One game between two registered players; `score_a` is 1 for an A win,
/// 0 for a loss and 0.5 for a draw.
#[derive(Clone, Debug, PartialEq)]
pub struct GameResult {
    pub player_a: String,
    pub player_b: String,
    pub score_a: f64,
}

impl GameResult {
    /// CSV row `player_a,player_b,score_a`.
    pub fn to_csv_row(&self) -> String {
        format!("{},{},{}", self.player_a, self.player_b, self.score_a)
    }

    pub fn from_csv_row(row: &str) -> Result<GameResult, RatingError> {
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(RatingError::Parse(row.into()));
        }
        let score_a: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| RatingError::Parse(row.into()))?;
        Ok(GameResult {
            player_a: fields[0].trim().to_string(),
            player_b: fields[1].trim().to_string(),
            score_a,
        })
    }
}

/// Single-owner rating ledger. Results are applied in the order given;
/// Elo updates do not commute, so the order is part of the contract.
#[derive(Clone, Debug)]
pub struct RatingLedger {
    players: BTreeMap<String, RatedPlayer>,
    anchor: String,
}

impl RatingLedger {
    /// Creates a ledger whose anchor is pinned at rating 0.
    pub fn new(anchor_id: &str) -> RatingLedger {
        let mut players = BTreeMap::new();
        players.insert(
            anchor_id.to_string(),
            RatedPlayer {
                id: anchor_id.to_string(),
                rating: 0.0,
                games_played: 0,
            },
        );
        RatingLedger {
            players,
            anchor: anchor_id.to_string(),
        }
    }

    pub fn anchor(&self) -> &str {
        &self.anchor
    }

    pub fn add_player(&mut self, id: &str) -> Result<(), RatingError> {
        self.add_player_at(id, 0.0)
    }

    /// Registers a player with a chosen initial rating (for example the
    /// rating of the checkpoint it was trained from).
    pub fn add_player_at(&mut self, id: &str, rating: f64) -> Result<(), RatingError> {
        if self.players.contains_key(id) {
            return Err(RatingError::DuplicatePlayer(id.into()));
        }
        self.players.insert(
            id.to_string(),
            RatedPlayer {
                id: id.to_string(),
                rating,
                games_played: 0,
            },
        );
        Ok(())
    }

    pub fn rating(&self, id: &str) -> Result<f64, RatingError> {
        self.players
            .get(id)
            .map(|p| p.rating)
            .ok_or_else(|| RatingError::UnknownPlayer(id.into()))
    }

    pub fn player(&self, id: &str) -> Result<&RatedPlayer, RatingError> {
        self.players
            .get(id)
            .ok_or_else(|| RatingError::UnknownPlayer(id.into()))
    }

    /// Applies one game: both non-anchor participants are updated from the
    /// pre-game ratings; the anchor's rating never moves.
    pub fn record(&mut self, game: &GameResult, k_policy: &KPolicy) -> Result<(), RatingError> {
        if ![0.0, 0.5, 1.0].contains(&game.score_a) {
            return Err(RatingError::InvalidScore(game.score_a));
        }
        let r_a = self.rating(&game.player_a)?;
        let r_b = self.rating(&game.player_b)?;
        let e_a = expected_score(r_a, r_b);

        let a = self.players.get_mut(&game.player_a).expect("checked");
        let k_a = k_policy.k_for(a.games_played);
        if a.id != self.anchor {
            a.rating = update_rating(r_a, e_a, game.score_a, k_a);
        }
        a.games_played += 1;

        let b = self.players.get_mut(&game.player_b).expect("checked");
        let k_b = k_policy.k_for(b.games_played);
        if b.id != self.anchor {
            b.rating = update_rating(r_b, 1.0 - e_a, 1.0 - game.score_a, k_b);
        }
        b.games_played += 1;
        Ok(())
    }
}

/// Processes a game log in chronological order and returns each registered
/// player's final rating, in registration (id) order.
pub fn rate_run(
    ledger: &mut RatingLedger,
    log: &[GameResult],
    k_policy: &KPolicy,
) -> Result<Vec<(String, f64)>, RatingError> {
    for game in log {
        ledger.record(game, k_policy)?;
    }
    Ok(ledger
        .players
        .values()
        .map(|p| (p.id.clone(), p.rating))
        .collect())
}
