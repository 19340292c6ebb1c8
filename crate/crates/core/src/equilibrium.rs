//! Exact equilibrium metrics: Nash gap, effective Nash gap and the
//! exploration threshold that bounds the gap of perturbed equilibria.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{build_effective_game, StochasticGame};
use crate::mdp::{best_response_value, policy_evaluation, StrategyProfile};
use crate::scalar::{from_usize, lit, Real, Scalar};

/// How per-state gaps are collapsed into one number per agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Aggregation {
    /// Worst initial state; bounds the gap under every initial distribution.
    #[default]
    MaxOverStates,
    /// Uniform initial-state distribution.
    UniformInitial,
}

/// Floating-point noise allowance when clamping theoretically nonnegative gaps.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashGapReport<T> {
    /// `U^i(π)` per agent and initial state.
    pub utilities: Vec<Vec<T>>,
    /// `max_π̂ U^i(π̂, π^{-i})` per agent and initial state.
    pub best_response_values: Vec<Vec<T>>,
    pub per_agent_gaps: Vec<T>,
    pub nash_gap: T,
    pub effective_nash_gap: Option<T>,
    pub epsilon_threshold: T,
    pub aggregation: Aggregation,
}

fn aggregate<T: Real>(diffs: impl Iterator<Item = T>, aggregation: Aggregation, n: usize) -> T {
    match aggregation {
        Aggregation::MaxOverStates => diffs.fold(T::neg_infinity(), T::max),
        Aggregation::UniformInitial => diffs.fold(T::zero(), |a, b| a + b) / from_usize(n),
    }
}

fn clamp<T: Real>(gap: T, tol: T) -> T {
    let allowance = tol.max(lit(CLAMP_TOLERANCE));
    if gap < T::zero() && gap >= -allowance {
        T::zero()
    } else {
        gap
    }
}

/// `NG(π) = max_i (max_π̂ U^i(π̂^i, π^{-i}) - U^i(π))`, computed with exact
/// policy evaluation and value-iteration best responses to `tol`.
///
/// `epsilon_threshold` is left at zero; [`nash_gap_report`] fills it in.
pub fn nash_gap<T: Real>(
    game: &StochasticGame<T>,
    profile: &StrategyProfile<T>,
    tol: T,
    aggregation: Aggregation,
) -> Result<NashGapReport<T>> {
    if !(tol > T::zero()) {
        return Err(Error::Parameter(format!("tolerance {tol:?} must be positive")));
    }
    profile.validate_for(game)?;
    let ns = game.n_states();
    let mut utilities = Vec::with_capacity(game.n_agents());
    let mut best_response_values = Vec::with_capacity(game.n_agents());
    let mut per_agent_gaps = Vec::with_capacity(game.n_agents());
    for agent in 0..game.n_agents() {
        let own = policy_evaluation(game, agent, profile)?.values;
        let (best, _) = best_response_value(game, agent, profile, tol)?;
        let gap = aggregate(best.values.iter().zip(&own).map(|(b, u)| *b - *u), aggregation, ns);
        per_agent_gaps.push(clamp(gap, tol));
        utilities.push(own);
        best_response_values.push(best.values);
    }
    let nash_gap = per_agent_gaps.iter().copied().fold(T::neg_infinity(), T::max);
    Ok(NashGapReport {
        utilities,
        best_response_values,
        per_agent_gaps,
        nash_gap,
        effective_nash_gap: None,
        epsilon_threshold: T::zero(),
        aggregation,
    })
}

/// `NG_ε(μ)`: the Nash gap of `μ` in the effective game.
pub fn effective_nash_gap<T: Real>(
    game: &StochasticGame<T>,
    mu: &StrategyProfile<T>,
    epsilon: T,
    tol: T,
    aggregation: Aggregation,
) -> Result<T> {
    let effective = build_effective_game(game, &epsilon)?;
    Ok(nash_gap(&effective, mu, tol, aggregation)?.nash_gap)
}

/// Full report for an exploration-free profile `μ`: the raw gap of
/// `π = (1-ε)μ + ε·uniform`, the effective gap of `μ`, and the threshold.
pub fn nash_gap_report<T: Real>(
    game: &StochasticGame<T>,
    mu: &StrategyProfile<T>,
    epsilon: T,
    tol: T,
    aggregation: Aggregation,
) -> Result<NashGapReport<T>> {
    let pi = mu.perturbed(&epsilon);
    let mut report = nash_gap(game, &pi, tol, aggregation)?;
    report.effective_nash_gap = Some(effective_nash_gap(game, mu, epsilon, tol, aggregation)?);
    report.epsilon_threshold = epsilon_threshold(game, &epsilon)?;
    Ok(report)
}

/// `2ε / (1-γ)^2 · max_{i,s,a} |r̄^i(s,a)|`.
pub fn epsilon_threshold<T: Scalar>(game: &StochasticGame<T>, epsilon: &T) -> Result<T> {
    if !(*epsilon > T::zero() && *epsilon < T::one()) {
        return Err(Error::Parameter(format!("exploration rate {epsilon:?} outside (0, 1)")));
    }
    let slack = T::one() - game.gamma().clone();
    Ok(lit::<T>(2.0) * epsilon.clone() / (slack.clone() * slack) * game.max_abs_reward())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropositionCheck<T> {
    pub effective_gap: T,
    pub raw_gap: T,
    pub threshold: T,
    /// `effective_gap > tol` or `raw_gap <= threshold + tol`.
    pub consistent: bool,
}

/// Checks that an exact equilibrium of the effective game perturbs into an
/// approximate equilibrium of the original game within the threshold.
pub fn check_proposition<T: Real>(
    game: &StochasticGame<T>,
    mu: &StrategyProfile<T>,
    epsilon: T,
    tol: T,
) -> Result<PropositionCheck<T>> {
    let report = nash_gap_report(game, mu, epsilon, tol, Aggregation::MaxOverStates)?;
    let effective_gap = report.effective_nash_gap.expect("report includes effective gap");
    let raw_gap = report.nash_gap;
    let threshold = report.epsilon_threshold;
    Ok(PropositionCheck {
        consistent: effective_gap > tol || raw_gap <= threshold + tol,
        effective_gap,
        raw_gap,
        threshold,
    })
}
