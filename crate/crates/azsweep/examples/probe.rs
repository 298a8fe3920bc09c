use azsweep::pipeline::{play_series, MctsAgent, RandomAgent, derive_seed};
use azsweep::solver::{Solver, SolverEvaluator};
use azsweep::othello::GameState;

fn main() {
    let solver = Solver::new();
    let init = GameState::initial(4).unwrap();
    println!("4x4 initial minimax value (for black): {}", solver.solve(&init));
    for sims in [50u32, 100, 200, 400] {
        for seed in [42u64, 7, 99] {
            let eval = SolverEvaluator::new();
            let out = play_series(
                |_| Box::new(MctsAgent::new(&eval, 1.0, sims)),
                |g| Box::new(RandomAgent::new(derive_seed(seed, &[u64::from(g)]))),
                20, 4, true,
            ).unwrap();
            println!("sims={sims} seed={seed}: w={} l={} d={}", out.wins, out.losses, out.draws);
        }
    }
}
