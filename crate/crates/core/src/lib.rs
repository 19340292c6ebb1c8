//! Independent actor-dual-critic learning in finite stochastic games, with
//! exact Nash-gap evaluation.
//!
//! The math core ([`game`], [`mdp`], [`equilibrium`], [`dynamics`],
//! [`diagnostics`]) is generic over the scalar type. Exact routines accept any
//! [`Scalar`], including [`Rational`]; value iteration and the stochastic
//! dynamics need a floating-point [`Real`]. The [`harness`] works in `f64`.
//!
//! ```
//! use adc_core::{generate_random_game, Game, GameClass, GameSpec, Simulation, StepSchedule};
//! use adc_core::equilibrium::{nash_gap, Aggregation};
//!
//! let spec = GameSpec::new(vec![3, 3], 3, 0.8, GameClass::ZeroSum);
//! let game: Game = generate_random_game(&spec, 1).unwrap();
//! let mut sim = Simulation::new(&game, 0.002, StepSchedule::standard(), 7).unwrap();
//! sim.run_until(1_000).unwrap();
//! let report = nash_gap(&game, &sim.pi_profile(), 1e-10, Aggregation::MaxOverStates).unwrap();
//! assert!(report.nash_gap >= 0.0);
//! ```

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod harness;
pub mod mdp;
pub mod scalar;

pub use dynamics::{init_learners, step_sizes, LearnerState, Simulation, StageRecord, StepSchedule};
pub use equilibrium::{Aggregation, NashGapReport};
pub use error::{Error, Result};
pub use game::{
    build_effective_game, exploration_kernel, generate_random_game, validate_game, GameClass, GameSpec, StochasticGame,
};
pub use harness::{run_experiment, run_trial, ExperimentConfig, TrialLog};
pub use mdp::{StrategyProfile, ValueVector};
pub use scalar::{Real, Scalar};

/// Exact rational scalar.
pub type Rational = num_rational::BigRational;

pub type Game = StochasticGame<f64>;
pub type Game32 = StochasticGame<f32>;
pub type ExactGame = StochasticGame<Rational>;

pub type Profile = StrategyProfile<f64>;
pub type ExactProfile = StrategyProfile<Rational>;

pub type Learner = LearnerState<f64>;
