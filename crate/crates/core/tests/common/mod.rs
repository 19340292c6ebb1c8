//! Random instances shared by the integration tests.
#![allow(dead_code)]

use adc_core::game::{generate_random_game, GameClass, GameSpec, StochasticGame};
use adc_core::mdp::StrategyProfile;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random game with 2 or 3 agents, sizes bounded by `max_states` and
/// `max_actions`, and a random class.
pub fn random_game(rng: &mut ChaCha8Rng, max_states: usize, max_actions: usize) -> StochasticGame<f64> {
    let class = match rng.gen_range(0..3) {
        0 => GameClass::ZeroSum,
        1 => GameClass::IdenticalInterest,
        _ => GameClass::General,
    };
    let n_agents = if class == GameClass::ZeroSum {
        2
    } else {
        rng.gen_range(2..=3)
    };
    let counts = (0..n_agents).map(|_| rng.gen_range(1..=max_actions)).collect();
    let n_states = rng.gen_range(1..=max_states);
    let gamma = rng.gen_range(0.3..0.95);
    let spec = GameSpec::new(counts, n_states, gamma, class);
    generate_random_game(&spec, rng.gen()).expect("valid random spec")
}

pub fn random_simplex(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0) + 1e-3).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

pub fn random_profile(rng: &mut ChaCha8Rng, game: &StochasticGame<f64>) -> StrategyProfile<f64> {
    StrategyProfile::new(
        (0..game.n_agents())
            .map(|i| {
                (0..game.n_states())
                    .map(|_| random_simplex(rng, game.n_actions(i)))
                    .collect()
            })
            .collect(),
    )
}
