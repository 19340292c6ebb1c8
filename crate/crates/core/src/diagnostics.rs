//! Analysis quantities computed from learner snapshots.
//!
//! These read every learner's state at once, which the learners themselves
//! never do. Nothing here feeds back into the dynamics.

use serde::{Deserialize, Serialize};

use crate::dynamics::LearnerState;
use crate::error::{Error, Result};
use crate::game::StochasticGame;
use crate::scalar::{dot, from_usize, Real};

/// `Q^i(s,a) = r̄^i(s,a) + γ Σ_{s'} p(s'|s,a) v(s')`, laid out `[s * n_joint + a]`.
pub fn global_q<T: Real>(game: &StochasticGame<T>, agent: usize, v: &[T]) -> Result<Vec<T>> {
    if v.len() != game.n_states() {
        return Err(Error::Dimension {
            what: "value vector".into(),
            expected: game.n_states(),
            found: v.len(),
        });
    }
    if agent >= game.n_agents() {
        return Err(Error::Index {
            what: "agent",
            index: agent,
            bound: game.n_agents(),
        });
    }
    let gamma = *game.gamma();
    let nj = game.n_joint();
    let mut out = Vec::with_capacity(game.n_states() * nj);
    for s in 0..game.n_states() {
        for a in 0..nj {
            out.push(*game.reward(agent, s, a) + gamma * dot(game.transition_row(s, a), v));
        }
    }
    Ok(out)
}

/// `Q(s,·) π^{-i}(s)`: contraction of a global table with the other learners'
/// actors, one entry per own action.
fn contract_with_opponents<T: Real>(
    game: &StochasticGame<T>,
    learners: &[LearnerState<T>],
    agent: usize,
    table: &[T],
    s: usize,
) -> Vec<T> {
    let joint = game.joint();
    let nj = game.n_joint();
    let mut out = vec![T::zero(); game.n_actions(agent)];
    for a in 0..nj {
        let w = learners
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != agent)
            .fold(T::one(), |acc, (j, l)| acc * l.pi_row(s)[joint.action_of(a, j)]);
        out[joint.action_of(a, agent)] = out[joint.action_of(a, agent)] + w * table[s * nj + a];
    }
    out
}

fn l2<T: Real>(x: impl Iterator<Item = T>) -> T {
    x.fold(T::zero(), |acc, v| acc + v * v).sqrt()
}

/// Tracking error `δ^i(s) = Q^i(s,·)π^{-i}(s) - q^i(s,·)` for every state.
pub fn tracking_error<T: Real>(
    game: &StochasticGame<T>,
    learners: &[LearnerState<T>],
    agent: usize,
    q_global: &[T],
) -> Vec<Vec<T>> {
    (0..game.n_states())
        .map(|s| {
            contract_with_opponents(game, learners, agent, q_global, s)
                .into_iter()
                .zip(learners[agent].q_row(s))
                .map(|(c, q)| c - *q)
                .collect()
        })
        .collect()
}

/// Frobenius norm of `Δ(s) = Q^1(s,·)ᵀ - Q^2(s,·)` per state. Both tables
/// are indexed by flat joint action, so the transpose is implicit.
pub fn mismatch_norms<T: Real>(game: &StochasticGame<T>, q_global: &[Vec<T>]) -> Result<Vec<T>> {
    if game.n_agents() != 2 || q_global.len() != 2 {
        return Err(Error::Parameter(format!(
            "mismatch error needs two agents, game has {}",
            game.n_agents()
        )));
    }
    let nj = game.n_joint();
    Ok((0..game.n_states())
        .map(|s| {
            let range = s * nj..(s + 1) * nj;
            l2(q_global[0][range.clone()]
                .iter()
                .zip(&q_global[1][range])
                .map(|(a, b)| *a - *b))
        })
        .collect())
}

/// Innovation `Y^i = Q̂^i - Q^i`, where `Q̂` uses `v̂(s') = π(s')ᵀ q(s',·)`.
pub fn innovation<T: Real>(game: &StochasticGame<T>, learner: &LearnerState<T>) -> Vec<T> {
    let gamma = *game.gamma();
    let diff: Vec<T> = (0..game.n_states())
        .map(|s| learner.greedy_value(s) - learner.v()[s])
        .collect();
    let nj = game.n_joint();
    let mut out = Vec::with_capacity(game.n_states() * nj);
    for s in 0..game.n_states() {
        for a in 0..nj {
            out.push(gamma * dot(game.transition_row(s, a), &diff));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticSnapshot<T> {
    pub k: u64,
    /// `[agent][s * n_joint + a]`
    pub global_q: Vec<Vec<T>>,
    /// `‖δ^i(s)‖₂`, `[agent][state]`.
    pub tracking_norms: Vec<Vec<T>>,
    /// `‖Δ(s)‖_F` per state; two-agent games only.
    pub mismatch_norms: Option<Vec<T>>,
    /// `[agent][s * n_joint + a]`
    pub innovation: Vec<Vec<T>>,
}

impl<T: Real> DiagnosticSnapshot<T> {
    /// Mean tracking-error norm over agents and states.
    pub fn mean_tracking(&self) -> T {
        let all: Vec<T> = self.tracking_norms.iter().flatten().copied().collect();
        all.iter().fold(T::zero(), |a, b| a + *b) / from_usize(all.len())
    }

    pub fn mean_mismatch(&self) -> Option<T> {
        self.mismatch_norms
            .as_ref()
            .map(|m| m.iter().fold(T::zero(), |a, b| a + *b) / from_usize(m.len()))
    }
}

pub fn diagnostic_snapshot<T: Real>(
    game: &StochasticGame<T>,
    learners: &[LearnerState<T>],
    k: u64,
) -> Result<DiagnosticSnapshot<T>> {
    if learners.len() != game.n_agents() {
        return Err(Error::Dimension {
            what: "learners".into(),
            expected: game.n_agents(),
            found: learners.len(),
        });
    }
    let global_q = learners
        .iter()
        .enumerate()
        .map(|(i, l)| global_q(game, i, l.v()))
        .collect::<Result<Vec<_>>>()?;
    let tracking_norms = (0..game.n_agents())
        .map(|i| {
            tracking_error(game, learners, i, &global_q[i])
                .into_iter()
                .map(|d| l2(d.into_iter()))
                .collect()
        })
        .collect();
    let mismatch_norms = if game.n_agents() == 2 {
        Some(mismatch_norms(game, &global_q)?)
    } else {
        None
    };
    let innovation = learners.iter().map(|l| innovation(game, l)).collect();
    Ok(DiagnosticSnapshot {
        k,
        global_q,
        tracking_norms,
        mismatch_norms,
        innovation,
    })
}

/// Backslide of a checkpoint history of flattened tables:
/// `B_K[e] = max_{K <= k1 <= k2} (x_{k1}[e] - x_{k2}[e])`, which is zero
/// when entry `e` never decreases after checkpoint `K`.
pub fn quasi_mono_monitor<T: Real>(history: &[Vec<T>]) -> Result<Vec<Vec<T>>> {
    if history.len() < 2 {
        return Err(Error::Parameter(format!(
            "quasi-monotonicity needs at least 2 checkpoints, got {}",
            history.len()
        )));
    }
    let width = history[0].len();
    if let Some(bad) = history.iter().find(|h| h.len() != width) {
        return Err(Error::Dimension {
            what: "checkpoint table".into(),
            expected: width,
            found: bad.len(),
        });
    }
    let m = history.len();
    let mut out = vec![vec![T::zero(); width]; m];
    let mut suffix_min = history[m - 1].clone();
    for k in (0..m - 1).rev() {
        for e in 0..width {
            suffix_min[e] = suffix_min[e].min(history[k][e]);
            out[k][e] = out[k + 1][e].max(history[k][e] - suffix_min[e]);
        }
    }
    Ok(out)
}

/// Largest backslide over all entries, per checkpoint index.
pub fn max_backslide<T: Real>(backslides: &[Vec<T>]) -> Vec<T> {
    backslides
        .iter()
        .map(|row| row.iter().copied().fold(T::zero(), T::max))
        .collect()
}
