//! Finite tabular stochastic games.
//!
//! Joint actions are stored flat. The flat index of a joint action
//! `(a^0, ..., a^{n-1})` is `sum_i a^i * prod_{j<i} |A^j|`, so agent 0 varies
//! fastest. [`JointActions`] owns that bijection.

use std::fmt;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{abs, default_tol, from_usize, lit, max, sum, Scalar};

/// Structural class of a game, checked by [`validate_game`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GameClass {
    ZeroSum,
    IdenticalInterest,
    General,
}

/// Mixed-radix codec between per-agent actions and flat joint-action indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointActions {
    counts: Vec<usize>,
    strides: Vec<usize>,
    size: usize,
}

impl JointActions {
    pub fn new(counts: &[usize]) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::Parameter("at least one agent required".into()));
        }
        let mut strides = Vec::with_capacity(counts.len());
        let mut size = 1usize;
        for (i, &c) in counts.iter().enumerate() {
            if c == 0 {
                return Err(Error::Parameter(format!("agent {i} has no actions")));
            }
            strides.push(size);
            size = size
                .checked_mul(c)
                .ok_or_else(|| Error::Parameter("joint action space too large".into()))?;
        }
        Ok(Self {
            counts: counts.to_vec(),
            strides,
            size,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    /// Number of joint actions.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn stride(&self, agent: usize) -> usize {
        self.strides[agent]
    }

    pub fn encode(&self, actions: &[usize]) -> Result<usize> {
        if actions.len() != self.counts.len() {
            return Err(Error::Dimension {
                what: "joint action".into(),
                expected: self.counts.len(),
                found: actions.len(),
            });
        }
        let mut flat = 0;
        for (i, (&a, &c)) in actions.iter().zip(&self.counts).enumerate() {
            if a >= c {
                return Err(Error::Index {
                    what: "action",
                    index: a,
                    bound: c,
                });
            }
            flat += a * self.strides[i];
        }
        Ok(flat)
    }

    pub fn decode(&self, flat: usize) -> Result<Vec<usize>> {
        if flat >= self.size {
            return Err(Error::Index {
                what: "joint action",
                index: flat,
                bound: self.size,
            });
        }
        Ok((0..self.counts.len()).map(|i| self.action_of(flat, i)).collect())
    }

    /// Agent `agent`'s component of a flat joint action.
    #[inline]
    pub fn action_of(&self, flat: usize, agent: usize) -> usize {
        (flat / self.strides[agent]) % self.counts[agent]
    }

    /// Flat index obtained by replacing agent `agent`'s action with `action`.
    #[inline]
    pub fn with_action(&self, flat: usize, agent: usize, action: usize) -> usize {
        let current = self.action_of(flat, agent);
        flat - current * self.strides[agent] + action * self.strides[agent]
    }
}

/// Finite-support additive reward noise for one agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardNoise<T> {
    pub support: Vec<T>,
    pub probs: Vec<T>,
}

impl<T: Scalar> RewardNoise<T> {
    pub fn new(support: Vec<T>, probs: Vec<T>) -> Result<Self> {
        if support.len() != probs.len() || support.is_empty() {
            return Err(Error::Dimension {
                what: "noise support/probabilities".into(),
                expected: support.len(),
                found: probs.len(),
            });
        }
        Ok(Self { support, probs })
    }

    pub fn mean(&self) -> T {
        self.support
            .iter()
            .zip(&self.probs)
            .fold(T::zero(), |acc, (z, p)| acc + z.clone() * p.clone())
    }
}

/// A finite discounted stochastic game with expected-reward tables.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticGame<T> {
    n_states: usize,
    joint: JointActions,
    /// `[(agent * n_states + s) * n_joint + a]`
    rewards: Vec<T>,
    /// `[(s * n_joint + a) * n_states + s']`
    transitions: Vec<T>,
    gamma: T,
    class: GameClass,
    noise: Option<Vec<RewardNoise<T>>>,
}

fn check_len(what: impl Into<String>, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension {
            what: what.into(),
            expected,
            found,
        });
    }
    Ok(())
}

impl<T: Scalar> StochasticGame<T> {
    /// Builds a game from flat tables laid out as documented on the fields.
    /// Only shapes are checked here; use [`validate_game`] for the rest.
    pub fn from_flat(
        action_counts: &[usize],
        n_states: usize,
        rewards: Vec<T>,
        transitions: Vec<T>,
        gamma: T,
        class: GameClass,
    ) -> Result<Self> {
        if n_states == 0 {
            return Err(Error::Parameter("game needs at least one state".into()));
        }
        let joint = JointActions::new(action_counts)?;
        let n_joint = joint.size();
        check_len("reward table", joint.n_agents() * n_states * n_joint, rewards.len())?;
        check_len("transition table", n_states * n_joint * n_states, transitions.len())?;
        Ok(Self {
            n_states,
            joint,
            rewards,
            transitions,
            gamma,
            class,
            noise: None,
        })
    }

    /// Builds a game from nested tables `rewards[agent][state][joint]` and
    /// `transitions[state][joint][next]`.
    pub fn from_nested(
        action_counts: &[usize],
        n_states: usize,
        rewards: Vec<Vec<Vec<T>>>,
        transitions: Vec<Vec<Vec<T>>>,
        gamma: T,
        class: GameClass,
    ) -> Result<Self> {
        let joint = JointActions::new(action_counts)?;
        let n_joint = joint.size();
        check_len("reward agents", action_counts.len(), rewards.len())?;
        for (i, per_agent) in rewards.iter().enumerate() {
            check_len(format!("reward states of agent {i}"), n_states, per_agent.len())?;
            for (s, row) in per_agent.iter().enumerate() {
                check_len(format!("reward row ({i}, {s})"), n_joint, row.len())?;
            }
        }
        check_len("transition states", n_states, transitions.len())?;
        for (s, per_state) in transitions.iter().enumerate() {
            check_len(
                format!("transition joint actions of state {s}"),
                n_joint,
                per_state.len(),
            )?;
            for (a, row) in per_state.iter().enumerate() {
                check_len(format!("transition row ({s}, {a})"), n_states, row.len())?;
            }
        }
        let rewards = rewards.into_iter().flatten().flatten().collect();
        let transitions = transitions.into_iter().flatten().flatten().collect();
        Self::from_flat(action_counts, n_states, rewards, transitions, gamma, class)
    }

    /// Attaches per-agent additive reward noise.
    pub fn with_noise(mut self, noise: Vec<RewardNoise<T>>) -> Result<Self> {
        check_len("noise agents", self.n_agents(), noise.len())?;
        self.noise = Some(noise);
        Ok(self)
    }

    pub fn n_agents(&self) -> usize {
        self.joint.n_agents()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn action_counts(&self) -> &[usize] {
        self.joint.counts()
    }

    pub fn n_actions(&self, agent: usize) -> usize {
        self.joint.counts()[agent]
    }

    pub fn n_joint(&self) -> usize {
        self.joint.size()
    }

    pub fn joint(&self) -> &JointActions {
        &self.joint
    }

    pub fn gamma(&self) -> &T {
        &self.gamma
    }

    pub fn game_class(&self) -> GameClass {
        self.class
    }

    pub fn noise(&self) -> Option<&[RewardNoise<T>]> {
        self.noise.as_deref()
    }

    /// Expected rewards `r̄^agent(s, ·)` over flat joint actions.
    #[inline]
    pub fn reward_row(&self, agent: usize, s: usize) -> &[T] {
        let n = self.n_joint();
        let start = (agent * self.n_states + s) * n;
        &self.rewards[start..start + n]
    }

    #[inline]
    pub fn reward(&self, agent: usize, s: usize, a: usize) -> &T {
        &self.rewards[(agent * self.n_states + s) * self.n_joint() + a]
    }

    /// `p(· | s, a)`.
    #[inline]
    pub fn transition_row(&self, s: usize, a: usize) -> &[T] {
        let start = (s * self.n_joint() + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn rewards_flat(&self) -> &[T] {
        &self.rewards
    }

    pub fn transitions_flat(&self) -> &[T] {
        &self.transitions
    }

    /// `max_{i,s,a} |r̄^i(s,a)|`.
    pub fn max_abs_reward(&self) -> T {
        self.rewards.iter().fold(T::zero(), |acc, r| max(acc, abs(r)))
    }

    /// `r̄^i(s,a) = E_ζ[r^i(s,a,ζ)]`. Noise is zero-mean, so this is the
    /// stored table entry.
    pub fn expected_reward(&self, agent: usize, s: usize, a: usize) -> Result<T> {
        self.check_indices(agent, s, a)?;
        Ok(self.reward(agent, s, a).clone())
    }

    fn check_indices(&self, agent: usize, s: usize, a: usize) -> Result<()> {
        let checks = [
            ("agent", agent, self.n_agents()),
            ("state", s, self.n_states),
            ("joint action", a, self.n_joint()),
        ];
        for (what, index, bound) in checks {
            if index >= bound {
                return Err(Error::Index { what, index, bound });
            }
        }
        Ok(())
    }

    /// Same game with reward tables replaced; used to probe linearity.
    pub fn with_rewards(&self, rewards: Vec<T>, class: GameClass) -> Result<Self> {
        check_len("reward table", self.rewards.len(), rewards.len())?;
        Ok(Self {
            rewards,
            class,
            ..self.clone()
        })
    }

    /// Converts every entry to another scalar type.
    pub fn map_scalar<U: Scalar>(&self, f: impl Fn(&T) -> U) -> StochasticGame<U> {
        StochasticGame {
            n_states: self.n_states,
            joint: self.joint.clone(),
            rewards: self.rewards.iter().map(&f).collect(),
            transitions: self.transitions.iter().map(&f).collect(),
            gamma: f(&self.gamma),
            class: self.class,
            noise: self.noise.as_ref().map(|ns| {
                ns.iter()
                    .map(|n| RewardNoise {
                        support: n.support.iter().map(&f).collect(),
                        probs: n.probs.iter().map(&f).collect(),
                    })
                    .collect()
            }),
        }
    }
}

/// Which structural rule a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    Discount,
    Negative,
    Simplex,
    Reachability,
    ZeroSum,
    IdenticalInterest,
    NoiseSimplex,
    NoiseMean,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Rule::Discount => "discount",
            Rule::Negative => "negative",
            Rule::Simplex => "simplex",
            Rule::Reachability => "reachability",
            Rule::ZeroSum => "zero-sum",
            Rule::IdenticalInterest => "identical-interest",
            Rule::NoiseSimplex => "noise-simplex",
            Rule::NoiseMean => "noise-mean",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation<T> {
    pub rule: Rule,
    /// Table coordinates, e.g. `[s, a, s']` for a transition entry.
    pub location: Vec<usize>,
    pub magnitude: T,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport<T> {
    pub passed: bool,
    pub violations: Vec<Violation<T>>,
}

impl<T> ValidationReport<T> {
    pub fn of(&self, rule: Rule) -> impl Iterator<Item = &Violation<T>> {
        self.violations.iter().filter(move |v| v.rule == rule)
    }
}

impl<T: fmt::Debug> ValidationReport<T> {
    /// `Ok(())` when passed, otherwise an [`Error::InvalidGame`] summarising
    /// the first few violations.
    pub fn into_result(self) -> Result<()> {
        if self.passed {
            return Ok(());
        }
        let summary = self
            .violations
            .iter()
            .take(5)
            .map(|v| format!("{} at {:?} ({:?})", v.rule, v.location, v.magnitude))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::InvalidGame(format!(
            "{} violation(s): {summary}",
            self.violations.len()
        )))
    }
}

/// Checks simplex rows, strict positivity of the kernel and consistency with
/// the declared game class.
pub fn validate_game<T: Scalar>(game: &StochasticGame<T>) -> Result<ValidationReport<T>> {
    validate_game_with_tol(game, &default_tol())
}

pub fn validate_game_with_tol<T: Scalar>(game: &StochasticGame<T>, tol: &T) -> Result<ValidationReport<T>> {
    let n = game.n_agents();
    let ns = game.n_states();
    let nj = game.n_joint();
    check_len("reward table", n * ns * nj, game.rewards.len())?;
    check_len("transition table", ns * nj * ns, game.transitions.len())?;

    let mut violations = Vec::new();
    let mut push = |rule, location: Vec<usize>, magnitude: T| {
        violations.push(Violation {
            rule,
            location,
            magnitude,
        })
    };

    if game.gamma < T::zero() || game.gamma >= T::one() {
        push(Rule::Discount, vec![], game.gamma.clone());
    }

    for s in 0..ns {
        for a in 0..nj {
            let row = game.transition_row(s, a);
            for (next, p) in row.iter().enumerate() {
                if *p < T::zero() {
                    push(Rule::Negative, vec![s, a, next], p.clone());
                }
                if *p <= T::zero() {
                    push(Rule::Reachability, vec![s, a, next], p.clone());
                }
            }
            let dev = sum(row) - T::one();
            if abs(&dev) > *tol {
                push(Rule::Simplex, vec![s, a], dev);
            }
        }
    }

    match game.class {
        GameClass::ZeroSum if n != 2 => push(Rule::ZeroSum, vec![], from_usize(n)),
        GameClass::ZeroSum => {
            for s in 0..ns {
                for a in 0..nj {
                    let total = game.reward(0, s, a).clone() + game.reward(1, s, a).clone();
                    if abs(&total) > *tol {
                        push(Rule::ZeroSum, vec![s, a], total);
                    }
                }
            }
        }
        GameClass::IdenticalInterest => {
            for i in 1..n {
                for s in 0..ns {
                    for a in 0..nj {
                        let diff = game.reward(i, s, a).clone() - game.reward(0, s, a).clone();
                        if abs(&diff) > *tol {
                            push(Rule::IdenticalInterest, vec![i, s, a], diff);
                        }
                    }
                }
            }
        }
        GameClass::General => {}
    }

    if let Some(noise) = &game.noise {
        for (i, nz) in noise.iter().enumerate() {
            if nz.support.len() != nz.probs.len() {
                return Err(Error::Dimension {
                    what: format!("noise of agent {i}"),
                    expected: nz.support.len(),
                    found: nz.probs.len(),
                });
            }
            let dev = sum(&nz.probs) - T::one();
            if abs(&dev) > *tol || nz.probs.iter().any(|p| *p < T::zero()) {
                push(Rule::NoiseSimplex, vec![i], dev);
            }
            let mean = nz.mean();
            if abs(&mean) > *tol {
                push(Rule::NoiseMean, vec![i], mean);
            }
        }
    }

    Ok(ValidationReport {
        passed: violations.is_empty(),
        violations,
    })
}

/// Parameters of a random game ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpec {
    pub n_agents: usize,
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub gamma: f64,
    pub game_class: GameClass,
    pub reward_range: [f64; 2],
    /// Guaranteed lower bound on every generated transition probability.
    pub transition_floor: f64,
}

impl GameSpec {
    /// Rewards in `[0, 1]`; raw transition entries drawn from `[0.1, 1]`
    /// before normalisation.
    pub fn new(action_counts: Vec<usize>, n_states: usize, gamma: f64, game_class: GameClass) -> Self {
        Self {
            n_agents: action_counts.len(),
            n_states,
            action_counts,
            gamma,
            game_class,
            reward_range: [0.0, 1.0],
            transition_floor: Self::floor_for_raw_minimum(0.1, n_states),
        }
    }

    /// Floor implied by drawing raw entries from `[raw_min, 1]` and normalising
    /// a row of `n_states` entries: `raw_min / (raw_min + n_states - 1)`.
    pub fn floor_for_raw_minimum(raw_min: f64, n_states: usize) -> f64 {
        raw_min / (raw_min + (n_states as f64 - 1.0))
    }

    /// Raw lower bound that yields `transition_floor` after normalisation.
    pub fn raw_minimum(&self) -> f64 {
        let f = self.transition_floor;
        if self.n_states == 1 {
            return 1.0;
        }
        (f * (self.n_states as f64 - 1.0) / (1.0 - f)).min(1.0)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n_agents == 0 || self.n_states == 0 {
            return bad("n_agents and n_states must be positive".into());
        }
        if self.action_counts.len() != self.n_agents {
            return Err(Error::Dimension {
                what: "action_counts".into(),
                expected: self.n_agents,
                found: self.action_counts.len(),
            });
        }
        if self.action_counts.contains(&0) {
            return bad("every agent needs at least one action".into());
        }
        if !(0.0..1.0).contains(&self.gamma) {
            return bad(format!("gamma {} outside [0, 1)", self.gamma));
        }
        let [lo, hi] = self.reward_range;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return bad(format!("reward range [{lo}, {hi}] invalid"));
        }
        let f = self.transition_floor;
        if !(f > 0.0 && f * self.n_states as f64 <= 1.0) {
            return bad(format!(
                "transition floor {f} must be positive with floor * n_states <= 1"
            ));
        }
        if self.game_class == GameClass::ZeroSum && self.n_agents != 2 {
            return bad("zero-sum games have exactly two agents".into());
        }
        Ok(())
    }
}

/// Draws a game from `spec`; a deterministic function of `(spec, seed)`.
///
/// Zero-sum: agent 0 draws from the reward range, agent 1 gets the negation.
/// Identical interest: one draw shared by all agents. Transition rows are drawn
/// entrywise from `[raw_min, 1]` and normalised, with the last entry taken as
/// the residual so rows sum to one.
pub fn generate_random_game<T: Scalar>(spec: &GameSpec, seed: u64) -> Result<StochasticGame<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let joint = JointActions::new(&spec.action_counts)?;
    let (n, ns, nj) = (spec.n_agents, spec.n_states, joint.size());
    let [lo, hi] = spec.reward_range;

    let mut rewards = vec![T::zero(); n * ns * nj];
    let idx = |i: usize, s: usize, a: usize| (i * ns + s) * nj + a;
    match spec.game_class {
        GameClass::ZeroSum => {
            for s in 0..ns {
                for a in 0..nj {
                    let r: f64 = rng.gen_range(lo..=hi);
                    rewards[idx(0, s, a)] = lit(r);
                    rewards[idx(1, s, a)] = lit(-r);
                }
            }
        }
        GameClass::IdenticalInterest => {
            for s in 0..ns {
                for a in 0..nj {
                    let r: f64 = rng.gen_range(lo..=hi);
                    for i in 0..n {
                        rewards[idx(i, s, a)] = lit(r);
                    }
                }
            }
        }
        GameClass::General => {
            for r in rewards.iter_mut() {
                *r = lit(rng.gen_range(lo..=hi));
            }
        }
    }

    let raw_min = spec.raw_minimum();
    let mut transitions = Vec::with_capacity(ns * nj * ns);
    let mut raw = vec![0.0f64; ns];
    for _ in 0..ns * nj {
        for x in raw.iter_mut() {
            *x = rng.gen_range(raw_min..=1.0);
        }
        let total: f64 = raw.iter().sum();
        let mut acc = T::zero();
        for &x in &raw[..ns - 1] {
            let p: T = lit(x / total);
            acc = acc + p.clone();
            transitions.push(p);
        }
        transitions.push(T::one() - acc);
    }

    StochasticGame::from_flat(
        &spec.action_counts,
        ns,
        rewards,
        transitions,
        lit(spec.gamma),
        spec.game_class,
    )
}

/// `E(· | a)`: probability `1 - ε + ε/|A|` on `a`, `ε/|A|` elsewhere. The
/// last entry is the residual so the distribution sums to one exactly.
pub fn exploration_kernel<T: Scalar>(epsilon: &T, n_actions: usize, a: usize) -> Result<Vec<T>> {
    if !(*epsilon > T::zero() && *epsilon < T::one()) {
        return Err(Error::Parameter(format!("exploration rate {epsilon:?} outside (0, 1)")));
    }
    if a >= n_actions {
        return Err(Error::Index {
            what: "action",
            index: a,
            bound: n_actions,
        });
    }
    let off = epsilon.clone() / from_usize(n_actions);
    let on = T::one() - epsilon.clone() + off.clone();
    let mut dist: Vec<T> = (0..n_actions)
        .map(|b| if b == a { on.clone() } else { off.clone() })
        .collect();
    let head = sum(&dist[..n_actions - 1]);
    dist[n_actions - 1] = T::one() - head;
    Ok(dist)
}

/// Applies the joint exploration kernel `E(ã|a) = prod_j E^j(ã^j|a^j)` to a
/// block laid out `[joint][width]`, one agent axis at a time.
fn mix_joint<T: Scalar>(block: &[T], width: usize, joint: &JointActions, kernels: &[Vec<Vec<T>>]) -> Vec<T> {
    let mut current = block.to_vec();
    let mut next = vec![T::zero(); block.len()];
    for (agent, kernel) in kernels.iter().enumerate() {
        for a in 0..joint.size() {
            let own = joint.action_of(a, agent);
            for w in 0..width {
                let mut acc = T::zero();
                for (b, weight) in kernel[own].iter().enumerate() {
                    let src = joint.with_action(a, agent, b);
                    acc = acc + weight.clone() * current[src * width + w].clone();
                }
                next[a * width + w] = acc;
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    current
}

/// The effective game `M_ε`: rewards and transitions averaged over the joint
/// exploration kernel. Discount, states, action sets and class are unchanged.
pub fn build_effective_game<T: Scalar>(game: &StochasticGame<T>, epsilon: &T) -> Result<StochasticGame<T>> {
    let kernels = game
        .action_counts()
        .iter()
        .map(|&m| {
            (0..m)
                .map(|a| exploration_kernel(epsilon, m, a))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let (ns, nj) = (game.n_states(), game.n_joint());

    let mut rewards = Vec::with_capacity(game.rewards.len());
    for row in game.rewards.chunks(nj) {
        rewards.extend(mix_joint(row, 1, &game.joint, &kernels));
    }
    let mut transitions = Vec::with_capacity(game.transitions.len());
    for block in game.transitions.chunks(nj * ns) {
        transitions.extend(mix_joint(block, ns, &game.joint, &kernels));
    }
    Ok(StochasticGame {
        rewards,
        transitions,
        ..game.clone()
    })
}

pub const JOINT_INDEX_CONVENTION: &str = "agent0_fastest";

/// On-disk JSON layout of a game.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameFile {
    pub n_agents: usize,
    pub n_states: usize,
    pub action_counts: Vec<usize>,
    pub gamma: f64,
    pub game_class: GameClass,
    pub joint_index: String,
    /// `[agent][state][flat_joint_action]`
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// `[state][flat_joint_action][next_state]`
    pub transitions: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<RewardNoise<f64>>>,
}

impl From<&StochasticGame<f64>> for GameFile {
    fn from(game: &StochasticGame<f64>) -> Self {
        let (n, ns, nj) = (game.n_agents(), game.n_states(), game.n_joint());
        GameFile {
            n_agents: n,
            n_states: ns,
            action_counts: game.action_counts().to_vec(),
            gamma: game.gamma,
            game_class: game.class,
            joint_index: JOINT_INDEX_CONVENTION.to_string(),
            rewards: (0..n)
                .map(|i| (0..ns).map(|s| game.reward_row(i, s).to_vec()).collect())
                .collect(),
            transitions: (0..ns)
                .map(|s| (0..nj).map(|a| game.transition_row(s, a).to_vec()).collect())
                .collect(),
            noise: game.noise.clone(),
        }
    }
}

impl TryFrom<GameFile> for StochasticGame<f64> {
    type Error = Error;

    fn try_from(file: GameFile) -> Result<Self> {
        if file.joint_index != JOINT_INDEX_CONVENTION {
            return Err(Error::Parameter(format!(
                "unsupported joint_index convention {:?}",
                file.joint_index
            )));
        }
        check_len("action_counts", file.n_agents, file.action_counts.len())?;
        let game = StochasticGame::from_nested(
            &file.action_counts,
            file.n_states,
            file.rewards,
            file.transitions,
            file.gamma,
            file.game_class,
        )?;
        match file.noise {
            Some(noise) => game.with_noise(noise),
            None => Ok(game),
        }
    }
}

pub fn load_game(path: &Path) -> Result<StochasticGame<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: GameFile = serde_json::from_str(&text)?;
    file.try_into()
}

pub fn save_game(game: &StochasticGame<f64>, path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(&GameFile::from(game))?;
    crate::harness::write_atomic(path, json.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn uniform_game(action_counts: &[usize], n_states: usize, class: GameClass) -> StochasticGame<f64> {
        let joint = JointActions::new(action_counts).unwrap();
        let nj = joint.size();
        let n = action_counts.len();
        let mut rewards = vec![0.0; n * n_states * nj];
        for (k, r) in rewards.iter_mut().enumerate() {
            *r = (k % 7) as f64 / 7.0;
        }
        if class == GameClass::ZeroSum {
            for k in 0..n_states * nj {
                rewards[n_states * nj + k] = -rewards[k];
            }
        }
        let transitions = vec![1.0 / n_states as f64; n_states * nj * n_states];
        StochasticGame::from_flat(action_counts, n_states, rewards, transitions, 0.8, class).unwrap()
    }

    #[test]
    fn flat_index_is_agent0_fastest() {
        let j = JointActions::new(&[3, 2, 4]).unwrap();
        assert_eq!(j.size(), 24);
        assert_eq!(j.encode(&[1, 0, 0]).unwrap(), 1);
        assert_eq!(j.encode(&[0, 1, 0]).unwrap(), 3);
        assert_eq!(j.encode(&[2, 1, 3]).unwrap(), 2 + 3 + 18);
        for flat in 0..j.size() {
            assert_eq!(j.encode(&j.decode(flat).unwrap()).unwrap(), flat);
        }
        assert!(j.encode(&[3, 0, 0]).is_err());
        assert!(j.decode(24).is_err());
        assert_eq!(
            j.with_action(j.encode(&[2, 1, 3]).unwrap(), 1, 0),
            j.encode(&[2, 0, 3]).unwrap()
        );
    }

    #[test]
    fn uniform_kernel_passes() {
        let g = uniform_game(&[2, 2], 3, GameClass::ZeroSum);
        let report = validate_game(&g).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn zero_entry_breaks_reachability() {
        let g = uniform_game(&[2, 2], 2, GameClass::General);
        let mut t = g.transitions_flat().to_vec();
        // state 1, joint action 2: [0.5, 0.5] -> [1.0, 0.0]
        let base = (4 + 2) * 2;
        t[base] = 1.0;
        t[base + 1] = 0.0;
        let g = StochasticGame::from_flat(&[2, 2], 2, g.rewards_flat().to_vec(), t, 0.8, GameClass::General).unwrap();
        let report = validate_game(&g).unwrap();
        assert!(!report.passed);
        let v: Vec<_> = report.of(Rule::Reachability).collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].location, vec![1, 2, 1]);
        assert_eq!(v[0].magnitude, 0.0);
        assert_eq!(report.of(Rule::Simplex).count(), 0);
    }

    #[test]
    fn zero_sum_cell_violation_reports_magnitude() {
        let g = uniform_game(&[2, 2], 1, GameClass::ZeroSum);
        let mut r = g.rewards_flat().to_vec();
        r[4 + 3] += 0.5;
        let g = g.with_rewards(r, GameClass::ZeroSum).unwrap();
        let report = validate_game(&g).unwrap();
        let v: Vec<_> = report.violations.iter().collect();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::ZeroSum);
        assert_eq!(v[0].rule.to_string(), "zero-sum");
        assert_eq!(v[0].location, vec![0, 3]);
        assert!((v[0].magnitude - 0.5).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_structural_error() {
        let err = StochasticGame::from_flat(&[2, 2], 2, vec![0.0; 3], vec![0.5; 16], 0.8, GameClass::General);
        assert!(matches!(err, Err(Error::Dimension { .. })));
        let err = StochasticGame::<f64>::from_nested(
            &[2],
            1,
            vec![vec![vec![0.0, 1.0]]],
            vec![vec![vec![1.0]]],
            0.8,
            GameClass::General,
        );
        assert!(matches!(err, Err(Error::Dimension { .. })));
    }

    #[test]
    fn identical_interest_and_discount_checks() {
        let mut g = uniform_game(&[2, 2], 1, GameClass::General);
        g.class = GameClass::IdenticalInterest;
        g.gamma = 1.0;
        let report = validate_game(&g).unwrap();
        assert_eq!(report.of(Rule::Discount).count(), 1);
        assert!(report.of(Rule::IdenticalInterest).count() > 0);
    }

    #[test]
    fn expected_reward_ignores_zero_mean_noise() {
        let g = uniform_game(&[2, 2], 1, GameClass::ZeroSum);
        let stored = *g.reward(0, 0, 1);
        let noise = RewardNoise::new(vec![-0.1, 0.1], vec![0.5, 0.5]).unwrap();
        let g = g.with_noise(vec![noise.clone(), noise]).unwrap();
        assert!(validate_game(&g).unwrap().passed);
        assert_eq!(g.expected_reward(0, 0, 1).unwrap(), stored);
        for a in 0..4 {
            assert_eq!(
                g.expected_reward(1, 0, a).unwrap(),
                -g.expected_reward(0, 0, a).unwrap()
            );
        }
        assert!(matches!(g.expected_reward(2, 0, 0), Err(Error::Index { .. })));
        assert!(matches!(g.expected_reward(0, 0, 4), Err(Error::Index { .. })));
    }

    #[test]
    fn expected_reward_of_noisy_entry() {
        let g = StochasticGame::from_flat(&[1], 1, vec![0.4], vec![1.0], 0.5, GameClass::General)
            .unwrap()
            .with_noise(vec![RewardNoise::new(vec![-0.1, 0.1], vec![0.5, 0.5]).unwrap()])
            .unwrap();
        assert_eq!(g.expected_reward(0, 0, 0).unwrap(), 0.4);
    }

    #[test]
    fn biased_noise_is_flagged() {
        let g = uniform_game(&[1], 1, GameClass::General)
            .with_noise(vec![RewardNoise::new(vec![0.0, 0.2], vec![0.5, 0.5]).unwrap()])
            .unwrap();
        let report = validate_game(&g).unwrap();
        assert_eq!(report.of(Rule::NoiseMean).count(), 1);
    }

    #[test]
    fn kernel_examples() {
        let k = exploration_kernel::<f64>(&0.002, 3, 1).unwrap();
        assert!((k[0] - 0.002 / 3.0).abs() < 1e-15);
        assert!((k[1] - (0.998 + 0.002 / 3.0)).abs() < 1e-15);
        assert!((k[2] - 0.002 / 3.0).abs() < 1e-15);
        assert_eq!(k.iter().sum::<f64>(), 1.0);
        assert_eq!(exploration_kernel(&0.3, 1, 0).unwrap(), vec![1.0]);
        assert_eq!(exploration_kernel(&0.5, 2, 0).unwrap(), vec![0.75, 0.25]);
        assert!(matches!(exploration_kernel(&0.0, 2, 0), Err(Error::Parameter(_))));
        assert!(matches!(exploration_kernel(&1.0, 2, 0), Err(Error::Parameter(_))));
        assert!(exploration_kernel(&0.5, 2, 2).is_err());
    }

    #[test]
    fn kernel_is_exact_in_rationals() {
        let eps: BigRational = lit(0.25);
        let k = exploration_kernel(&eps, 4, 2).unwrap();
        assert_eq!(k[2], lit(0.8125));
        assert_eq!(sum(&k), BigRational::from_integer(1.into()));
    }

    #[test]
    fn effective_game_keeps_shape() {
        let g = uniform_game(&[3, 2], 2, GameClass::ZeroSum);
        let e = build_effective_game(&g, &0.1).unwrap();
        assert_eq!(e.gamma(), g.gamma());
        assert_eq!(e.n_states(), g.n_states());
        assert_eq!(e.action_counts(), g.action_counts());
        assert_eq!(e.game_class(), GameClass::ZeroSum);
        assert!(validate_game(&e).unwrap().passed);
        assert!(build_effective_game(&g, &1.0).is_err());
    }

    #[test]
    fn effective_reward_matches_hand_enumeration() {
        // 1 state, 2 agents with 2 actions, ε = 0.5: E^j(a|a) = 0.75, E^j(b|a) = 0.25.
        let r0: Vec<f64> = vec![1.0, 2.0, 3.0, 5.0];
        let rewards = [r0.clone(), r0.iter().map(|x| -x).collect()].concat();
        let g = StochasticGame::from_flat(&[2, 2], 1, rewards, vec![1.0; 4], 0.8, GameClass::ZeroSum).unwrap();
        let e = build_effective_game(&g, &0.5).unwrap();
        let kernel = |x: usize, y: usize| if x == y { 0.75 } else { 0.25 };
        for a in 0..4 {
            let (a0, a1) = (a % 2, a / 2);
            let mut oracle = 0.0;
            for b0 in 0..2 {
                for b1 in 0..2 {
                    oracle += kernel(a0, b0) * kernel(a1, b1) * r0[b0 + 2 * b1];
                }
            }
            assert!((*e.reward(0, 0, a) - oracle).abs() < 1e-14);
            assert!((*e.reward(1, 0, a) + oracle).abs() < 1e-14);
        }
        // (0,0): 0.5625*1 + 0.1875*2 + 0.1875*3 + 0.0625*5
        assert!((*e.reward(0, 0, 0) - 1.8125).abs() < 1e-15);
    }

    #[test]
    fn random_games_respect_spec() {
        let spec = GameSpec::new(vec![3, 3], 3, 0.8, GameClass::ZeroSum);
        let a: StochasticGame<f64> = generate_random_game(&spec, 7).unwrap();
        let b: StochasticGame<f64> = generate_random_game(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert!(validate_game(&a).unwrap().passed);
        for s in 0..3 {
            for j in 0..9 {
                assert_eq!(*a.reward(1, s, j), -*a.reward(0, s, j));
                assert!((0.0..=1.0).contains(a.reward(0, s, j)));
            }
        }
        let c: StochasticGame<f64> = generate_random_game(&spec, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn spec_rejects_bad_parameters() {
        let mut spec = GameSpec::new(vec![2, 2, 2], 3, 0.8, GameClass::ZeroSum);
        assert!(spec.validate().is_err());
        spec.game_class = GameClass::General;
        assert!(spec.validate().is_ok());
        spec.transition_floor = 0.5;
        assert!(spec.validate().is_err());
        spec.transition_floor = 0.01;
        spec.reward_range = [1.0, 0.0];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn game_file_round_trip() {
        let spec = GameSpec::new(vec![2, 3], 2, 0.8, GameClass::General);
        let g: StochasticGame<f64> = generate_random_game(&spec, 1).unwrap();
        let json = serde_json::to_string(&GameFile::from(&g)).unwrap();
        assert!(json.contains("\"joint_index\":\"agent0_fastest\""));
        let back: StochasticGame<f64> = serde_json::from_str::<GameFile>(&json).unwrap().try_into().unwrap();
        assert_eq!(back, g);
        let mut file = GameFile::from(&g);
        file.joint_index = "agent0_slowest".into();
        assert!(StochasticGame::try_from(file).is_err());
    }
}
