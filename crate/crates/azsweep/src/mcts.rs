//! Monte-Carlo tree search with prior-guided child selection.
//!
//! Each search owns its tree; fresh tree per move, no reuse. Children are
//! scored by `Q(s,a) + cpuct * P(s,a) * sqrt(sum_b N(s,b)) / (1 + N(s,a))`
//! with unvisited Q treated as 0 and ties broken towards the lowest action
//! index, so a search is fully deterministic for a given evaluator.

use std::fmt;

use rand::Rng;
use thiserror::Error;

use crate::othello::{GameState, MoveId};

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("search called on a terminal root")]
    TerminalRoot,
    #[error("invalid search configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("evaluator failed: {0}")]
    Evaluation(String),
    #[error("evaluator returned a non-finite {0}")]
    NonFinite(&'static str),
}

/// Position evaluator feeding the search: a prior over all `n*n + 1` actions
/// and a value in `[-1, 1]`, both from the perspective of the player to move.
///
/// The search masks and renormalizes the prior over legal moves itself, so
/// implementations may return unmasked distributions.
pub trait Evaluator {
    fn evaluate(&self, state: &GameState) -> Result<(Vec<f64>, f64), SearchError>;
}

/// Uniform prior, zero value: the weakest well-formed evaluator, handy as a
/// baseline and in tests.
pub struct UniformEvaluator;

impl Evaluator for UniformEvaluator {
    fn evaluate(&self, state: &GameState) -> Result<(Vec<f64>, f64), SearchError> {
        let n = state.action_count();
        Ok((vec![1.0 / n as f64; n], 0.0))
    }
}

/// The improved policy produced by a search: probabilities proportional to
/// root visit counts over the `n*n + 1` action indices.
#[derive(Clone, Debug, PartialEq)]
pub struct SearchPolicy {
    probabilities: Vec<f64>,
}

impl SearchPolicy {
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.probabilities
    }

    pub fn prob(&self, mv: MoveId) -> f64 {
        self.probabilities[mv.index()]
    }

    /// Highest-probability action, ties broken by lowest index.
    pub fn argmax(&self) -> MoveId {
        let mut best = 0;
        for (i, p) in self.probabilities.iter().enumerate() {
            if *p > self.probabilities[best] {
                best = i;
            }
        }
        MoveId::from_index(best)
    }
}

/// Per-edge root statistics, dumpable as a text table for debugging.
#[derive(Clone, Debug)]
pub struct RootStats {
    pub simulations: u32,
    pub edges: Vec<EdgeStats>,
}

#[derive(Clone, Debug)]
pub struct EdgeStats {
    pub mv: MoveId,
    pub visits: u32,
    pub q: f64,
    pub prior: f64,
}

impl fmt::Display for RootStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>6}  {:>7}  {:>8}  {:>8}", "move", "N", "Q", "P")?;
        for e in &self.edges {
            writeln!(
                f,
                "{:>6}  {:>7}  {:>8.4}  {:>8.4}",
                e.mv.index(),
                e.visits,
                e.q,
                e.prior
            )?;
        }
        Ok(())
    }
}

struct Edge {
    mv: MoveId,
    prior: f64,
    visits: u32,
    total_value: f64,
    child: Option<usize>,
}

impl Edge {
    fn q(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.total_value / self.visits as f64
        }
    }
}

struct Node {
    state: GameState,
    /// Exact outcome for the player to move when the state is terminal.
    terminal: Option<f64>,
    /// Present once the node has been expanded (priors set).
    edges: Option<Vec<Edge>>,
}

impl Node {
    fn new(state: GameState) -> Node {
        let terminal = state.terminal_value(state.to_move()).map(|o| o.value());
        Node {
            state,
            terminal,
            edges: None,
        }
    }
}

/// Runs `simulations` root-to-leaf descents and returns the visit-count
/// policy. The root is expanded up front, so the returned counts sum to
/// exactly `simulations`.
pub fn search(
    root: &GameState,
    evaluator: &dyn Evaluator,
    cpuct: f64,
    simulations: u32,
) -> Result<SearchPolicy, SearchError> {
    search_with_stats(root, evaluator, cpuct, simulations).map(|(p, _)| p)
}

/// As [`search`], also returning the root's `(N, Q, P)` table.
pub fn search_with_stats(
    root: &GameState,
    evaluator: &dyn Evaluator,
    cpuct: f64,
    simulations: u32,
) -> Result<(SearchPolicy, RootStats), SearchError> {
    if !(cpuct > 0.0) {
        return Err(SearchError::InvalidConfig("cpuct must be > 0"));
    }
    if simulations == 0 {
        return Err(SearchError::InvalidConfig("simulations must be >= 1"));
    }
    if root.is_terminal() {
        return Err(SearchError::TerminalRoot);
    }

    let mut nodes = vec![Node::new(root.clone())];
    expand(&mut nodes[0], evaluator)?;

    for _ in 0..simulations {
        // Descend until an unexpanded or terminal node, tracking (node, edge).
        let mut path: Vec<(usize, usize)> = Vec::new();
        let mut current = 0;
        let leaf_value = loop {
            if let Some(v) = nodes[current].terminal {
                break v;
            }
            if nodes[current].edges.is_none() {
                break expand(&mut nodes[current], evaluator)?;
            }
            let edge_idx = select_edge(nodes[current].edges.as_ref().unwrap(), cpuct);
            path.push((current, edge_idx));
            let edge = &nodes[current].edges.as_ref().unwrap()[edge_idx];
            current = match edge.child {
                Some(idx) => idx,
                None => {
                    let mv = edge.mv;
                    let child_state = nodes[current]
                        .state
                        .apply_move(mv)
                        .expect("edges hold legal moves");
                    nodes.push(Node::new(child_state));
                    let idx = nodes.len() - 1;
                    nodes[current].edges.as_mut().unwrap()[edge_idx].child = Some(idx);
                    idx
                }
            };
        };

        // Back the leaf value up with sign alternation per ply.
        let mut value = leaf_value;
        for (node_idx, edge_idx) in path.iter().rev() {
            value = -value;
            let edge = &mut nodes[*node_idx].edges.as_mut().unwrap()[*edge_idx];
            edge.visits += 1;
            edge.total_value += value;
        }
    }

    let root_edges = nodes[0].edges.as_ref().unwrap();
    let visit_sum: u32 = root_edges.iter().map(|e| e.visits).sum();
    debug_assert_eq!(visit_sum, simulations);

    let mut probabilities = vec![0.0; root.action_count()];
    for edge in root_edges {
        probabilities[edge.mv.index()] = edge.visits as f64 / visit_sum as f64;
    }
    let stats = RootStats {
        simulations: visit_sum,
        edges: root_edges
            .iter()
            .map(|e| EdgeStats {
                mv: e.mv,
                visits: e.visits,
                q: e.q(),
                prior: e.prior,
            })
            .collect(),
    };
    Ok((SearchPolicy { probabilities }, stats))
}

/// Sets a node's edges from the evaluator's prior (masked to legal moves and
/// renormalized) and returns the value estimate for the node's mover.
fn expand(node: &mut Node, evaluator: &dyn Evaluator) -> Result<f64, SearchError> {
    let (priors, value) = evaluator.evaluate(&node.state)?;
    if !value.is_finite() {
        return Err(SearchError::NonFinite("value"));
    }
    if priors.len() != node.state.action_count() {
        return Err(SearchError::Evaluation(format!(
            "prior length {} does not match action count {}",
            priors.len(),
            node.state.action_count()
        )));
    }
    let legal = node.state.legal_moves().expect("expand on non-terminal");
    let mut masked: Vec<f64> = legal.iter().map(|mv| priors[mv.index()]).collect();
    if masked.iter().any(|p| !p.is_finite()) {
        return Err(SearchError::NonFinite("prior"));
    }
    let mass: f64 = masked.iter().sum();
    if mass > 0.0 {
        for p in masked.iter_mut() {
            *p /= mass;
        }
    } else {
        // Evaluator put no mass on any legal move; fall back to uniform.
        masked.fill(1.0 / legal.len() as f64);
    }
    node.edges = Some(
        legal
            .into_iter()
            .zip(masked)
            .map(|(mv, prior)| Edge {
                mv,
                prior,
                visits: 0,
                total_value: 0.0,
                child: None,
            })
            .collect(),
    );
    Ok(value)
}

fn select_edge(edges: &[Edge], cpuct: f64) -> usize {
    let total_visits: u32 = edges.iter().map(|e| e.visits).sum();
    let sqrt_total = (total_visits as f64).sqrt();
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, edge) in edges.iter().enumerate() {
        let score = edge.q() + cpuct * edge.prior * sqrt_total / (1.0 + edge.visits as f64);
        if score > best_score {
            best = i;
            best_score = score;
        }
    }
    best
}

/// Picks the move to play: below the temperature threshold the move is
/// sampled from the policy, from the threshold on it is the argmax (ties to
/// the lowest index).
pub fn select_action<R: Rng>(
    policy: &SearchPolicy,
    game_step: u32,
    temp_threshold: u32,
    rng: &mut R,
) -> MoveId {
    if game_step < temp_threshold {
        let target: f64 = rng.gen::<f64>();
        let mut cumulative = 0.0;
        let mut last_nonzero = 0;
        for (i, p) in policy.probabilities.iter().enumerate() {
            if *p > 0.0 {
                last_nonzero = i;
                cumulative += *p;
                if target < cumulative {
                    return MoveId::from_index(i);
                }
            }
        }
        // Rounding pushed the cumulative sum just below 1; take the last
        // move carrying mass.
        MoveId::from_index(last_nonzero)
    } else {
        policy.argmax()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::othello::Player;
    use crate::solver::{Solver, SolverEvaluator};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct NanEvaluator;

    impl Evaluator for NanEvaluator {
        fn evaluate(&self, state: &GameState) -> Result<(Vec<f64>, f64), SearchError> {
            Ok((vec![1.0; state.action_count()], f64::NAN))
        }
    }

    fn forced_pass_state() -> GameState {
        let mut cells = vec![None; 16];
        cells[0] = Some(Player::Black);
        cells[15] = Some(Player::White);
        GameState::from_parts(4, cells, Player::Black, 0).unwrap()
    }

    /// Positions on the 4×4 board at most `max_depth` plies from the end,
    /// with at least two legal moves, gathered from random playouts.
    fn near_terminal_positions(count: usize, max_depth: u32) -> Vec<GameState> {
        let solver = Solver::new();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut out: Vec<GameState> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        'outer: for _ in 0..10_000 {
            let mut state = GameState::initial(4).unwrap();
            while !state.is_terminal() {
                let moves = state.legal_moves().unwrap();
                if moves.len() >= 2
                    && solver.depth_to_end(&state, max_depth).is_some()
                    && seen.insert(state.to_text())
                {
                    out.push(state.clone());
                    if out.len() == count {
                        break 'outer;
                    }
                }
                let mv = moves[rng.gen_range(0..moves.len())];
                state = state.apply_move(mv).unwrap();
            }
        }
        assert!(out.len() >= count, "could not gather enough positions");
        out
    }

    #[test]
    fn single_legal_move_gets_full_mass() {
        let state = forced_pass_state();
        let policy = search(&state, &UniformEvaluator, 1.0, 16).unwrap();
        assert_eq!(policy.prob(state.pass_move()), 1.0);
        let sum: f64 = policy.probabilities().iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_simulation_is_one_hot_on_first_expanded_child() {
        let state = GameState::initial(6).unwrap();
        let policy = search(&state, &UniformEvaluator, 1.0, 1).unwrap();
        let first = state.legal_moves().unwrap()[0];
        assert_eq!(policy.prob(first), 1.0);
    }

    #[test]
    fn root_visits_equal_simulations() {
        let state = GameState::initial(6).unwrap();
        for sims in [1, 7, 50, 200] {
            let (_, stats) = search_with_stats(&state, &UniformEvaluator, 1.5, sims).unwrap();
            let total: u32 = stats.edges.iter().map(|e| e.visits).sum();
            assert_eq!(total, sims);
        }
    }

    #[test]
    fn search_is_deterministic() {
        let state = GameState::initial(6).unwrap();
        let a = search(&state, &UniformEvaluator, 1.0, 128).unwrap();
        let b = search(&state, &UniformEvaluator, 1.0, 128).unwrap();
        let bits = |p: &SearchPolicy| -> Vec<u64> {
            p.probabilities().iter().map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn terminal_root_rejected() {
        let state = forced_pass_state();
        let state = state.apply_move(state.pass_move()).unwrap();
        let state = state.apply_move(state.pass_move()).unwrap();
        assert!(matches!(
            search(&state, &UniformEvaluator, 1.0, 4),
            Err(SearchError::TerminalRoot)
        ));
    }

    #[test]
    fn invalid_config_rejected() {
        let state = GameState::initial(4).unwrap();
        assert!(search(&state, &UniformEvaluator, 0.0, 4).is_err());
        assert!(search(&state, &UniformEvaluator, 1.0, 0).is_err());
    }

    #[test]
    fn non_finite_evaluation_aborts() {
        let state = GameState::initial(4).unwrap();
        assert!(matches!(
            search(&state, &NanEvaluator, 1.0, 4),
            Err(SearchError::NonFinite(_))
        ));
    }

    #[test]
    fn backed_up_values_alternate_sign() {
        // With an evaluator returning a constant +1 for every leaf, a
        // depth-1 expansion feeds -1 to its root edge and a depth-2
        // expansion feeds +1: adjacent plies receive v and -v.
        struct PlusOne;
        impl Evaluator for PlusOne {
            fn evaluate(&self, state: &GameState) -> Result<(Vec<f64>, f64), SearchError> {
                Ok((vec![1.0; state.action_count()], 1.0))
            }
        }
        let state = GameState::initial(6).unwrap();
        // 4 simulations expand the 4 root children, one each: Q = -1.
        let (_, stats) = search_with_stats(&state, &PlusOne, 1.0, 4).unwrap();
        for e in &stats.edges {
            assert_eq!(e.visits, 1);
            assert!((e.q - (-1.0)).abs() < 1e-12, "expected -1, got {}", e.q);
        }
        // The 5th simulation descends two plies through the first child, so
        // that root edge receives +1 on top of its earlier -1.
        let (_, stats) = search_with_stats(&state, &PlusOne, 1.0, 5).unwrap();
        assert_eq!(stats.edges[0].visits, 2);
        assert!(stats.edges[0].q.abs() < 1e-12, "expected 0, got {}", stats.edges[0].q);
    }

    #[test]
    fn finds_minimax_move_near_terminal() {
        // Positions two plies from a decided finish: the searched argmax must
        // be minimax-optimal when an exact evaluator guides it.
        let solver = Solver::new();
        let eval = SolverEvaluator::new();
        for state in near_terminal_positions(10, 2) {
            let policy = search(&state, &eval, 1.0, 400).unwrap();
            let optimal = solver.optimal_moves(&state);
            assert!(
                optimal.contains(&policy.argmax()),
                "suboptimal argmax at\n{state}"
            );
        }
    }

    #[test]
    fn strength_is_monotone_in_simulations() {
        // Fraction of minimax-optimal argmax moves over a fixed suite must
        // not decrease as the simulation budget grows.
        let solver = Solver::new();
        let eval = SolverEvaluator::new();
        let suite = near_terminal_positions(50, 6);
        let mut fractions = Vec::new();
        for sims in [25, 100, 400] {
            let mut hits = 0;
            for state in &suite {
                let policy = search(state, &eval, 1.0, sims).unwrap();
                if solver.optimal_moves(state).contains(&policy.argmax()) {
                    hits += 1;
                }
            }
            fractions.push(hits as f64 / suite.len() as f64);
        }
        assert!(
            fractions[0] <= fractions[1] + 1e-9 && fractions[1] <= fractions[2] + 1e-9,
            "fractions not monotone: {fractions:?}"
        );
    }

    #[test]
    fn select_action_argmax_with_tie_break() {
        let policy = SearchPolicy {
            probabilities: vec![0.3, 0.3, 0.4],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_action(&policy, 5, 5, &mut rng).index(), 2);
        let tied = SearchPolicy {
            probabilities: vec![0.4, 0.4, 0.2],
        };
        assert_eq!(select_action(&tied, 9, 3, &mut rng).index(), 0);
    }

    #[test]
    fn select_action_one_hot_any_step() {
        let policy = SearchPolicy {
            probabilities: vec![0.0, 1.0, 0.0],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(select_action(&policy, 0, 10, &mut rng).index(), 1);
        assert_eq!(select_action(&policy, 10, 10, &mut rng).index(), 1);
    }

    #[test]
    fn select_action_samples_proportionally() {
        // Binomial 99% interval for p=0.5, n=10_000 is within ±0.013; the
        // asserted band [0.47, 0.53] is wider still.
        let policy = SearchPolicy {
            probabilities: vec![0.5, 0.5],
        };
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut first = 0u32;
        let n = 10_000;
        for _ in 0..n {
            if select_action(&policy, 0, 1, &mut rng).index() == 0 {
                first += 1;
            }
        }
        let freq = f64::from(first) / f64::from(n);
        assert!((0.47..=0.53).contains(&freq), "frequency {freq}");
    }

    #[test]
    fn root_stats_render_as_table() {
        let state = GameState::initial(6).unwrap();
        let (_, stats) = search_with_stats(&state, &UniformEvaluator, 1.0, 32).unwrap();
        let table = stats.to_string();
        assert!(table.contains('N') && table.contains('Q') && table.contains('P'));
        assert_eq!(table.lines().count(), 1 + stats.edges.len());
    }
}
