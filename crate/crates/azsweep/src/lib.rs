//! Desk-scale AlphaZero-style training for small-board Othello, built for
//! hyper-parameter sweeps: self-play, network training and arena gating in
//! one instrumented loop, plus Elo tracking, a wall-clock cost model and a
//! one-at-a-time sweep harness.

pub mod elo;
pub mod mcts;
pub mod net;
pub mod othello;
pub mod params;
pub mod pipeline;
pub mod solver;
pub mod timing;
