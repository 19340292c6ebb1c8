//! Exact single-agent machinery: evaluation of a fixed strategy profile and
//! best responses against frozen opponents.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::StochasticGame;
use crate::scalar::{abs, argmax, default_tol, from_usize, lit, max, max_of, sum, Real, Scalar};

/// Markov stationary strategies, `strategies[agent][state][action]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProfile<T> {
    pub strategies: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> StrategyProfile<T> {
    pub fn new(strategies: Vec<Vec<Vec<T>>>) -> Self {
        Self { strategies }
    }

    pub fn uniform(game: &StochasticGame<T>) -> Self {
        let strategies = game
            .action_counts()
            .iter()
            .map(|&m| {
                let p = T::one() / from_usize(m);
                vec![vec![p; m]; game.n_states()]
            })
            .collect();
        Self { strategies }
    }

    /// Deterministic profile from `actions[agent][state]`.
    pub fn pure(game: &StochasticGame<T>, actions: &[Vec<usize>]) -> Result<Self> {
        if actions.len() != game.n_agents() {
            return Err(Error::Dimension {
                what: "pure profile agents".into(),
                expected: game.n_agents(),
                found: actions.len(),
            });
        }
        let strategies = actions
            .iter()
            .enumerate()
            .map(|(i, per_state)| {
                if per_state.len() != game.n_states() {
                    return Err(Error::Dimension {
                        what: format!("pure profile states of agent {i}"),
                        expected: game.n_states(),
                        found: per_state.len(),
                    });
                }
                let m = game.n_actions(i);
                per_state
                    .iter()
                    .map(|&a| {
                        if a >= m {
                            return Err(Error::Index {
                                what: "action",
                                index: a,
                                bound: m,
                            });
                        }
                        Ok(indicator(m, a))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self { strategies })
    }

    pub fn n_agents(&self) -> usize {
        self.strategies.len()
    }

    pub fn row(&self, agent: usize, s: usize) -> &[T] {
        &self.strategies[agent][s]
    }

    /// Replaces one agent's strategy.
    pub fn with_agent(&self, agent: usize, rows: Vec<Vec<T>>) -> Self {
        let mut next = self.clone();
        next.strategies[agent] = rows;
        next
    }

    /// `(1 - ε) μ + ε · uniform` for every agent and state.
    pub fn perturbed(&self, epsilon: &T) -> Self {
        let keep = T::one() - epsilon.clone();
        let strategies = self
            .strategies
            .iter()
            .map(|rows| {
                rows.iter()
                    .map(|row| {
                        let floor = epsilon.clone() / from_usize(row.len());
                        row.iter().map(|p| keep.clone() * p.clone() + floor.clone()).collect()
                    })
                    .collect()
            })
            .collect();
        Self { strategies }
    }

    /// Probability of flat joint action `a` at `s` under every agent except
    /// `skip` (pass `None` for the full joint probability).
    pub fn joint_prob(&self, game: &StochasticGame<T>, s: usize, a: usize, skip: Option<usize>) -> T {
        let joint = game.joint();
        (0..self.n_agents())
            .filter(|&j| Some(j) != skip)
            .fold(T::one(), |acc, j| {
                acc * self.strategies[j][s][joint.action_of(a, j)].clone()
            })
    }

    /// Checks dimensions and that every row is a simplex.
    pub fn validate_for(&self, game: &StochasticGame<T>) -> Result<()> {
        self.validate_agents(game, (0..game.n_agents()).collect())
    }

    fn validate_agents(&self, game: &StochasticGame<T>, agents: Vec<usize>) -> Result<()> {
        if self.n_agents() != game.n_agents() {
            return Err(Error::Dimension {
                what: "profile agents".into(),
                expected: game.n_agents(),
                found: self.n_agents(),
            });
        }
        let tol: T = default_tol();
        for i in agents {
            let rows = &self.strategies[i];
            if rows.len() != game.n_states() {
                return Err(Error::Dimension {
                    what: format!("profile states of agent {i}"),
                    expected: game.n_states(),
                    found: rows.len(),
                });
            }
            for (s, row) in rows.iter().enumerate() {
                if row.len() != game.n_actions(i) {
                    return Err(Error::Dimension {
                        what: format!("profile row ({i}, {s})"),
                        expected: game.n_actions(i),
                        found: row.len(),
                    });
                }
                let dev = sum(row) - T::one();
                if abs(&dev) > tol || row.iter().any(|p| *p < T::zero()) {
                    return Err(Error::Parameter(format!(
                        "strategy of agent {i} at state {s} is not a probability vector"
                    )));
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn indicator<T: Scalar>(n: usize, a: usize) -> Vec<T> {
    (0..n).map(|b| if b == a { T::one() } else { T::zero() }).collect()
}

/// Per-state values of one agent together with solver metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector<T> {
    pub agent: usize,
    pub values: Vec<T>,
    /// Residual (direct solves) or guaranteed error bound (value iteration).
    pub tolerance: T,
    /// Sweeps used; zero for direct solves.
    pub iterations: usize,
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Result<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .reduce(|best, r| if abs(&a[r][col]) > abs(&a[best][col]) { r } else { best })
            .expect("non-empty pivot range");
        if a[pivot][col] == T::zero() {
            return Err(Error::Parameter("singular linear system".into()));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            if a[r][col] == T::zero() {
                continue;
            }
            let factor = a[r][col].clone() / a[col][col].clone();
            let (upper, lower) = a.split_at_mut(r);
            for (x, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *x = x.clone() - factor.clone() * p.clone();
            }
            let delta = factor * b[col].clone();
            b[r] = b[r].clone() - delta;
        }
    }
    let mut x = vec![T::zero(); n];
    for r in (0..n).rev() {
        let tail = (r + 1..n).fold(T::zero(), |acc, c| acc + a[r][c].clone() * x[c].clone());
        x[r] = (b[r].clone() - tail) / a[r][r].clone();
    }
    Ok(x)
}

/// State-to-state kernel `P_π` and reward vector `r_π^agent` of a profile.
pub fn profile_matrices<T: Scalar>(
    game: &StochasticGame<T>,
    agent: usize,
    profile: &StrategyProfile<T>,
) -> (Vec<Vec<T>>, Vec<T>) {
    let ns = game.n_states();
    let mut kernel = vec![vec![T::zero(); ns]; ns];
    let mut reward = vec![T::zero(); ns];
    for s in 0..ns {
        for a in 0..game.n_joint() {
            let w = profile.joint_prob(game, s, a, None);
            if w == T::zero() {
                continue;
            }
            reward[s] = reward[s].clone() + w.clone() * game.reward(agent, s, a).clone();
            for (next, p) in game.transition_row(s, a).iter().enumerate() {
                kernel[s][next] = kernel[s][next].clone() + w.clone() * p.clone();
            }
        }
    }
    (kernel, reward)
}

/// `‖(I - γP_π)v - r_π‖_∞` for a candidate value vector.
pub fn evaluation_residual<T: Scalar>(
    game: &StochasticGame<T>,
    agent: usize,
    profile: &StrategyProfile<T>,
    values: &[T],
) -> T {
    let (kernel, reward) = profile_matrices(game, agent, profile);
    let gamma = game.gamma();
    (0..game.n_states())
        .map(|s| {
            let lhs = values[s].clone()
                - gamma.clone()
                    * kernel[s]
                        .iter()
                        .zip(values)
                        .fold(T::zero(), |acc, (p, v)| acc + p.clone() * v.clone());
            abs(&(lhs - reward[s].clone()))
        })
        .fold(T::zero(), max)
}

fn check_agent<T: Scalar>(game: &StochasticGame<T>, agent: usize) -> Result<()> {
    if agent >= game.n_agents() {
        return Err(Error::Index {
            what: "agent",
            index: agent,
            bound: game.n_agents(),
        });
    }
    Ok(())
}

/// Exact utility `v = (I - γP_π)^{-1} r_π` of `agent` under `profile`.
pub fn policy_evaluation<T: Scalar>(
    game: &StochasticGame<T>,
    agent: usize,
    profile: &StrategyProfile<T>,
) -> Result<ValueVector<T>> {
    check_agent(game, agent)?;
    profile.validate_for(game)?;
    let (kernel, reward) = profile_matrices(game, agent, profile);
    let ns = game.n_states();
    let gamma = game.gamma();
    let system = (0..ns)
        .map(|s| {
            (0..ns)
                .map(|c| {
                    let diag = if s == c { T::one() } else { T::zero() };
                    diag - gamma.clone() * kernel[s][c].clone()
                })
                .collect()
        })
        .collect();
    let values = solve_linear(system, reward)?;
    let residual = evaluation_residual(game, agent, profile, &values);
    Ok(ValueVector {
        agent,
        values,
        tolerance: residual,
        iterations: 0,
    })
}

/// The single-agent MDP one agent faces when the others are frozen.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp<T> {
    pub n_states: usize,
    pub n_actions: usize,
    pub gamma: T,
    /// `[s * n_actions + a]`
    pub rewards: Vec<T>,
    /// `[(s * n_actions + a) * n_states + s']`
    pub transitions: Vec<T>,
}

impl<T: Scalar> InducedMdp<T> {
    /// Marginalises rewards and transitions over the opponents' strategies.
    /// Agent `agent`'s own rows in `profile` are ignored.
    pub fn new(game: &StochasticGame<T>, agent: usize, profile: &StrategyProfile<T>) -> Self {
        let (ns, m) = (game.n_states(), game.n_actions(agent));
        let joint = game.joint();
        let mut rewards = vec![T::zero(); ns * m];
        let mut transitions = vec![T::zero(); ns * m * ns];
        for s in 0..ns {
            for a in 0..game.n_joint() {
                let w = profile.joint_prob(game, s, a, Some(agent));
                if w == T::zero() {
                    continue;
                }
                let own = joint.action_of(a, agent);
                let idx = s * m + own;
                rewards[idx] = rewards[idx].clone() + w.clone() * game.reward(agent, s, a).clone();
                for (next, p) in game.transition_row(s, a).iter().enumerate() {
                    let t = idx * ns + next;
                    transitions[t] = transitions[t].clone() + w.clone() * p.clone();
                }
            }
        }
        Self {
            n_states: ns,
            n_actions: m,
            gamma: game.gamma().clone(),
            rewards,
            transitions,
        }
    }

    /// `r(s,a) + γ Σ_{s'} p(s'|s,a) v(s')` for every action at `s`.
    pub fn action_values(&self, s: usize, values: &[T]) -> Vec<T> {
        (0..self.n_actions)
            .map(|a| {
                let idx = s * self.n_actions + a;
                let row = &self.transitions[idx * self.n_states..(idx + 1) * self.n_states];
                let cont = row
                    .iter()
                    .zip(values)
                    .fold(T::zero(), |acc, (p, v)| acc + p.clone() * v.clone());
                self.rewards[idx].clone() + self.gamma.clone() * cont
            })
            .collect()
    }
}

const MAX_SWEEPS: usize = 10_000_000;

/// Optimal value of `agent` against the other agents' strategies in
/// `profile`, by value iteration stopped once successive iterates differ by at
/// most `tol (1-γ) / (2γ)`, so the returned values are within `tol` of the
/// optimum. The greedy policy breaks ties toward the lowest action index.
pub fn best_response_value<T: Real>(
    game: &StochasticGame<T>,
    agent: usize,
    profile: &StrategyProfile<T>,
    tol: T,
) -> Result<(ValueVector<T>, Vec<usize>)> {
    check_agent(game, agent)?;
    if !(tol > T::zero()) {
        return Err(Error::Parameter(format!("tolerance {tol:?} must be positive")));
    }
    let others = (0..game.n_agents()).filter(|&j| j != agent).collect();
    profile.validate_agents(game, others)?;
    let mdp = InducedMdp::new(game, agent, profile);
    value_iteration(&mdp, agent, tol)
}

/// Value iteration on an already materialised induced MDP.
pub fn value_iteration<T: Real>(mdp: &InducedMdp<T>, agent: usize, tol: T) -> Result<(ValueVector<T>, Vec<usize>)> {
    let gamma = mdp.gamma;
    let threshold = if gamma > T::zero() {
        tol * (T::one() - gamma) / (lit::<T>(2.0) * gamma)
    } else {
        tol
    };
    let mut values = vec![T::zero(); mdp.n_states];
    let mut next = values.clone();
    for sweep in 1..=MAX_SWEEPS {
        let mut diff = T::zero();
        for (s, slot) in next.iter_mut().enumerate() {
            let best = max_of(mdp.action_values(s, &values)).expect("at least one action");
            diff = diff.max((best - values[s]).abs());
            *slot = best;
        }
        std::mem::swap(&mut values, &mut next);
        if diff <= threshold {
            let policy = (0..mdp.n_states)
                .map(|s| argmax(&mdp.action_values(s, &values)).expect("at least one action"))
                .collect();
            return Ok((
                ValueVector {
                    agent,
                    values,
                    tolerance: tol,
                    iterations: sweep,
                },
                policy,
            ));
        }
    }
    Err(Error::NotConverged(MAX_SWEEPS))
}

pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Statewise maximum of the exact values of every deterministic stationary
/// policy of `agent`. Testing oracle for [`best_response_value`].
pub fn brute_force_best_response<T: Scalar>(
    game: &StochasticGame<T>,
    agent: usize,
    profile: &StrategyProfile<T>,
) -> Result<ValueVector<T>> {
    check_agent(game, agent)?;
    let (ns, m) = (game.n_states(), game.n_actions(agent));
    let count = (m as u128)
        .checked_pow(ns as u32)
        .filter(|&c| c <= ENUMERATION_LIMIT)
        .ok_or(Error::EnumerationLimit {
            count: (m as f64).powi(ns as i32) as u128,
            limit: ENUMERATION_LIMIT,
        })?;
    let mut best: Option<Vec<T>> = None;
    let mut choice = vec![0usize; ns];
    for _ in 0..count {
        let rows = choice.iter().map(|&a| indicator(m, a)).collect();
        let candidate = profile.with_agent(agent, rows);
        let v = policy_evaluation(game, agent, &candidate)?.values;
        best = Some(match best {
            None => v,
            Some(b) => b.into_iter().zip(v).map(|(x, y)| max(x, y)).collect(),
        });
        for digit in choice.iter_mut() {
            *digit += 1;
            if *digit < m {
                break;
            }
            *digit = 0;
        }
    }
    Ok(ValueVector {
        agent,
        values: best.expect("at least one policy"),
        tolerance: T::zero(),
        iterations: count as usize,
    })
}
