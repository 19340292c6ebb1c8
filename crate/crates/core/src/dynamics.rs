//! Actor-dual-critic learning dynamics.
//!
//! Every agent keeps a fast critic `q` over its own actions, an actor `π`
//! with exploration-free companion `μ` (`π = (1-ε)μ + ε·uniform`), and a slow
//! critic `v`. At stage `k > 0` all three are moved from their stage-`(k-1)`
//! values, after which each agent samples its action from `π_k(s_k)`. Agents
//! only ever see their own action, reward and the observed states.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{exploration_kernel, GameClass, StochasticGame};
use crate::mdp::StrategyProfile;
use crate::scalar::{argmax, dot, from_usize, lit, Real};

/// Power-law step sizes `λ_k = (k+1)^{-ρλ}`, `α_k = (k+1)^{-ρα}` and
/// `β_k = min(1, c/(k+1))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule<T> {
    pub rho_lambda: T,
    pub rho_alpha: T,
    pub beta_scale: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes<T> {
    pub lambda: T,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> StepSchedule<T> {
    pub fn new(rho_lambda: T, rho_alpha: T, beta_scale: T) -> Result<Self> {
        let s = Self {
            rho_lambda,
            rho_alpha,
            beta_scale,
        };
        s.validate()?;
        Ok(s)
    }

    /// `ρλ = 0.6`, `ρα = 0.95`, `c = 10`.
    pub fn standard() -> Self {
        Self {
            rho_lambda: lit(0.60),
            rho_alpha: lit(0.95),
            beta_scale: lit(10.0),
        }
    }

    /// Requires `1/2 < ρλ < ρα < 1` and `c >= 1`.
    pub fn validate(&self) -> Result<()> {
        let half: T = lit(0.5);
        if !(half < self.rho_lambda && self.rho_lambda < self.rho_alpha && self.rho_alpha < T::one()) {
            return Err(Error::Parameter(format!(
                "step exponents need 1/2 < rho_lambda ({:?}) < rho_alpha ({:?}) < 1",
                self.rho_lambda, self.rho_alpha
            )));
        }
        if !(self.beta_scale >= T::one()) {
            return Err(Error::Parameter(format!(
                "beta scale {:?} must be at least 1",
                self.beta_scale
            )));
        }
        Ok(())
    }

    /// The stricter exponent condition used for identical-interest games:
    /// `ρα >= 1.5 ρλ` and `ρα + ρλ > 1.5`.
    pub fn meets_identical_interest_condition(&self) -> bool {
        let three_halves: T = lit(1.5);
        self.rho_alpha >= three_halves * self.rho_lambda && self.rho_alpha + self.rho_lambda > three_halves
    }

    /// [`validate`](Self::validate), plus the identical-interest condition
    /// when `strict` is set and the game is identical-interest.
    pub fn validate_for(&self, class: GameClass, strict: bool) -> Result<()> {
        self.validate()?;
        if strict && class == GameClass::IdenticalInterest && !self.meets_identical_interest_condition() {
            return Err(Error::Parameter(
                "identical-interest games need rho_alpha >= 1.5 rho_lambda and rho_alpha + rho_lambda > 1.5".into(),
            ));
        }
        Ok(())
    }
}

pub fn step_sizes<T: Real>(k: u64, schedule: &StepSchedule<T>) -> StepSizes<T> {
    let n = T::from_u64(k + 1).expect("stage index representable");
    StepSizes {
        lambda: n.powf(-schedule.rho_lambda),
        alpha: n.powf(-schedule.rho_alpha),
        beta: (schedule.beta_scale / n).min(T::one()),
    }
}

/// What happened at one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord<T> {
    pub k: u64,
    pub state: usize,
    pub joint_action: Vec<usize>,
    pub rewards: Vec<T>,
    pub next_state: usize,
}

/// One agent's fast critic, actor pair and slow critic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerState<T> {
    agent: usize,
    n_states: usize,
    n_actions: usize,
    epsilon: T,
    gamma: T,
    /// `[s * n_actions + a]`
    q: Vec<T>,
    mu: Vec<T>,
    pi: Vec<T>,
    v: Vec<T>,
}

/// ε-best response to a q row: argmax (lowest index on ties) and the
/// exploration kernel centred on it.
pub fn epsilon_best_response<T: Real>(q_row: &[T], epsilon: T) -> Result<(Vec<T>, usize)> {
    if q_row.iter().any(|x| !x.is_finite()) {
        return Err(Error::Parameter("q row has non-finite entries".into()));
    }
    let best = argmax(q_row).ok_or_else(|| Error::Parameter("empty q row".into()))?;
    Ok((exploration_kernel(&epsilon, q_row.len(), best)?, best))
}

/// Fresh learners: `q ≡ 0`, `v ≡ 0`, `π_0 = μ_0 = uniform`.
pub fn init_learners<T: Real>(game: &StochasticGame<T>, epsilon: T) -> Result<Vec<LearnerState<T>>> {
    if !(epsilon > T::zero() && epsilon < T::one()) {
        return Err(Error::Parameter(format!("exploration rate {epsilon:?} outside (0, 1)")));
    }
    let ns = game.n_states();
    Ok((0..game.n_agents())
        .map(|agent| {
            let m = game.n_actions(agent);
            let u = T::one() / from_usize(m);
            LearnerState {
                agent,
                n_states: ns,
                n_actions: m,
                epsilon,
                gamma: *game.gamma(),
                q: vec![T::zero(); ns * m],
                mu: vec![u; ns * m],
                pi: vec![u; ns * m],
                v: vec![T::zero(); ns],
            }
        })
        .collect())
}

impl<T: Real> LearnerState<T> {
    pub fn agent(&self) -> usize {
        self.agent
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn q(&self) -> &[T] {
        &self.q
    }

    pub fn q_row(&self, s: usize) -> &[T] {
        &self.q[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn pi_row(&self, s: usize) -> &[T] {
        &self.pi[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn mu_row(&self, s: usize) -> &[T] {
        &self.mu[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// `π(s)` for every state, as profile rows.
    pub fn pi_rows(&self) -> Vec<Vec<T>> {
        (0..self.n_states).map(|s| self.pi_row(s).to_vec()).collect()
    }

    pub fn mu_rows(&self) -> Vec<Vec<T>> {
        (0..self.n_states).map(|s| self.mu_row(s).to_vec()).collect()
    }

    /// `π(s)ᵀ q(s, ·)`, the slow critic's target.
    pub fn greedy_value(&self, s: usize) -> T {
        dot(self.pi_row(s), self.q_row(s))
    }

    /// `(BR(q(s,·)) - π(s))ᵀ q(s,·)`, nonnegative up to rounding.
    pub fn actor_improvement(&self, s: usize) -> T {
        let q = self.q_row(s);
        let best = argmax(q).expect("non-empty row");
        let target = exploration_kernel(&self.epsilon, self.n_actions, best).expect("valid epsilon");
        target
            .iter()
            .zip(self.pi_row(s))
            .zip(q)
            .fold(T::zero(), |acc, ((b, p), x)| acc + (*b - *p) * *x)
    }

    pub fn is_finite(&self) -> bool {
        self.q
            .iter()
            .chain(&self.mu)
            .chain(&self.pi)
            .chain(&self.v)
            .all(|x| x.is_finite())
    }

    /// Index and new value of the single q entry moved by the stage-`(k-1)`
    /// observation, computed from the current (stage-`(k-1)`) values.
    fn q_increment(&self, prev: &StageRecord<T>, lambda: T) -> (usize, T) {
        let own = prev.joint_action[self.agent];
        let idx = prev.state * self.n_actions + own;
        let target = prev.rewards[self.agent] + self.gamma * self.v[prev.next_state];
        let step = lambda / self.pi[idx];
        (idx, self.q[idx] + step * (target - self.q[idx]))
    }

    fn v_step(&mut self, beta: T) {
        for s in 0..self.n_states {
            let target = self.greedy_value(s);
            self.v[s] = self.v[s] + beta * (target - self.v[s]);
        }
    }

    fn actor_step(&mut self, alpha: T) {
        let m = self.n_actions;
        let floor = self.epsilon / from_usize(m);
        let keep = T::one() - self.epsilon;
        for s in 0..self.n_states {
            let best = argmax(self.q_row(s)).expect("non-empty row");
            for a in 0..m {
                let idx = s * m + a;
                let indicator = if a == best { T::one() } else { T::zero() };
                self.mu[idx] = (T::one() - alpha) * self.mu[idx] + alpha * indicator;
                self.pi[idx] = keep * self.mu[idx] + floor;
            }
        }
    }

    fn check_prev(&self, k: u64, prev: &StageRecord<T>) -> Result<()> {
        if k == 0 || prev.k + 1 != k {
            return Err(Error::Parameter(format!(
                "stage {k} update needs the record of stage {}, got stage {}",
                k.saturating_sub(1),
                prev.k
            )));
        }
        let bound = |what, index, bound| {
            if index >= bound {
                Err(Error::Index { what, index, bound })
            } else {
                Ok(())
            }
        };
        bound("state", prev.state, self.n_states)?;
        bound("state", prev.next_state, self.n_states)?;
        let own = *prev.joint_action.get(self.agent).ok_or(Error::Index {
            what: "agent",
            index: self.agent,
            bound: prev.joint_action.len(),
        })?;
        bound("action", own, self.n_actions)
    }

    /// Fast-critic update for stage `k`; only `(s_{k-1}, a_{k-1})` moves.
    pub fn q_update(&self, k: u64, prev: &StageRecord<T>, schedule: &StepSchedule<T>) -> Result<Self> {
        self.check_prev(k, prev)?;
        let (idx, value) = self.q_increment(prev, step_sizes(k - 1, schedule).lambda);
        let mut next = self.clone();
        next.q[idx] = value;
        Ok(next)
    }

    /// Actor update for stage `k`, synchronous over states.
    pub fn actor_update(&self, k: u64, schedule: &StepSchedule<T>) -> Self {
        let mut next = self.clone();
        next.actor_step(step_sizes(k.saturating_sub(1), schedule).alpha);
        next
    }

    /// Slow-critic update for stage `k`, synchronous over states.
    pub fn v_update(&self, k: u64, schedule: &StepSchedule<T>) -> Self {
        let mut next = self.clone();
        next.v_step(step_sizes(k.saturating_sub(1), schedule).beta);
        next
    }

    /// All three updates of stage `k` in place. Every right-hand side reads
    /// stage-`(k-1)` values.
    pub fn advance(&mut self, k: u64, prev: &StageRecord<T>, schedule: &StepSchedule<T>) -> Result<()> {
        self.check_prev(k, prev)?;
        let steps = step_sizes(k - 1, schedule);
        // q_increment reads v_{k-1} and π_{k-1}; the v and actor steps read
        // q_{k-1}, so the q entry is committed last.
        let (idx, value) = self.q_increment(prev, steps.lambda);
        self.v_step(steps.beta);
        self.actor_step(steps.alpha);
        self.q[idx] = value;
        let s = prev.state;
        let finite =
            value.is_finite() && self.v.iter().all(|x| x.is_finite()) && self.mu_row(s).iter().all(|x| x.is_finite());
        if !finite {
            return Err(Error::NonFinite {
                stage: k,
                agent: self.agent,
            });
        }
        Ok(())
    }

    pub fn sample_action<R: Rng>(&self, s: usize, rng: &mut R) -> usize {
        sample_index(self.pi_row(s), rng)
    }
}

pub(crate) fn sample_index<T: Real, R: Rng>(probs: &[T], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p.to_f64().unwrap_or(0.0);
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Per-trial random streams: one ChaCha stream per agent and one for the
/// environment, all keyed by the trial seed.
#[derive(Debug, Clone)]
pub struct TrialRngs {
    pub agents: Vec<ChaCha8Rng>,
    pub env: ChaCha8Rng,
}

impl TrialRngs {
    pub fn new(seed: u64, n_agents: usize) -> Self {
        let stream = |id: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self {
            agents: (0..n_agents as u64).map(stream).collect(),
            env: stream(n_agents as u64),
        }
    }
}

/// Moves every learner from stage `k-1` to stage `k`.
pub fn update_learners<T: Real>(
    learners: &mut [LearnerState<T>],
    k: u64,
    prev: &StageRecord<T>,
    schedule: &StepSchedule<T>,
) -> Result<()> {
    learners.iter_mut().try_for_each(|l| l.advance(k, prev, schedule))
}

/// Samples `a_k ~ π_k(s_k)` independently per agent, then rewards and
/// `s_{k+1}` from the environment.
pub fn play_stage<T: Real>(
    game: &StochasticGame<T>,
    learners: &[LearnerState<T>],
    k: u64,
    state: usize,
    rngs: &mut TrialRngs,
) -> Result<StageRecord<T>> {
    if state >= game.n_states() {
        return Err(Error::Index {
            what: "state",
            index: state,
            bound: game.n_states(),
        });
    }
    let joint_action: Vec<usize> = learners
        .iter()
        .zip(rngs.agents.iter_mut())
        .map(|(l, rng)| l.sample_action(state, rng))
        .collect();
    let a = game.joint().encode(&joint_action)?;
    let rewards = (0..game.n_agents())
        .map(|i| {
            let mean = *game.reward(i, state, a);
            match game.noise() {
                Some(noise) => {
                    let nz = &noise[i];
                    mean + nz.support[sample_index(&nz.probs, &mut rngs.env)]
                }
                None => mean,
            }
        })
        .collect();
    let next_state = sample_index(game.transition_row(state, a), &mut rngs.env);
    Ok(StageRecord {
        k,
        state,
        joint_action,
        rewards,
        next_state,
    })
}

/// One full stage: learner updates when `k > 0`, then play.
#[allow(clippy::too_many_arguments)]
pub fn adc_stage<T: Real>(
    game: &StochasticGame<T>,
    learners: &mut [LearnerState<T>],
    k: u64,
    prev: Option<&StageRecord<T>>,
    current_state: usize,
    schedule: &StepSchedule<T>,
    rngs: &mut TrialRngs,
) -> Result<StageRecord<T>> {
    match (k, prev) {
        (0, None) => {}
        (0, Some(_)) => return Err(Error::Parameter("stage 0 takes no previous record".into())),
        (_, Some(prev)) => {
            if prev.next_state != current_state {
                return Err(Error::Parameter(format!(
                    "previous record ends in state {}, current state is {current_state}",
                    prev.next_state
                )));
            }
            update_learners(learners, k, prev, schedule)?
        }
        (_, None) => return Err(Error::Parameter(format!("stage {k} needs a previous record"))),
    }
    play_stage(game, learners, k, current_state, rngs)
}

/// A running trial: game, learners, random streams and the current stage.
#[derive(Debug, Clone)]
pub struct Simulation<'g, T> {
    game: &'g StochasticGame<T>,
    schedule: StepSchedule<T>,
    learners: Vec<LearnerState<T>>,
    rngs: TrialRngs,
    stage: u64,
    synced: bool,
    state: usize,
    prev: Option<StageRecord<T>>,
}

impl<'g, T: Real> Simulation<'g, T> {
    /// Initial state is drawn uniformly from the environment stream.
    pub fn new(game: &'g StochasticGame<T>, epsilon: T, schedule: StepSchedule<T>, seed: u64) -> Result<Self> {
        schedule.validate()?;
        let learners = init_learners(game, epsilon)?;
        let mut rngs = TrialRngs::new(seed, game.n_agents());
        let state = rngs.env.gen_range(0..game.n_states());
        Ok(Self {
            game,
            schedule,
            learners,
            rngs,
            stage: 0,
            synced: true,
            state,
            prev: None,
        })
    }

    /// Current stage index `k`.
    pub fn stage(&self) -> u64 {
        self.stage
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn learners(&self) -> &[LearnerState<T>] {
        &self.learners
    }

    pub fn last_record(&self) -> Option<&StageRecord<T>> {
        self.prev.as_ref()
    }

    /// Brings the learners to stage-`k` values without playing stage `k`.
    pub fn sync(&mut self) -> Result<()> {
        if !self.synced {
            let prev = self.prev.as_ref().expect("unsynced stage has a record");
            update_learners(&mut self.learners, self.stage, prev, &self.schedule)?;
            self.synced = true;
        }
        Ok(())
    }

    /// Runs stage `k` and advances to `k + 1`.
    pub fn step(&mut self) -> Result<&StageRecord<T>> {
        self.sync()?;
        let record = play_stage(self.game, &self.learners, self.stage, self.state, &mut self.rngs)?;
        self.state = record.next_state;
        self.stage += 1;
        self.synced = false;
        Ok(self.prev.insert(record))
    }

    /// Plays until the current stage is `k`, then syncs the learners.
    pub fn run_until(&mut self, k: u64) -> Result<()> {
        while self.stage < k {
            self.step()?;
        }
        self.sync()
    }

    /// `π_k` of every learner.
    pub fn pi_profile(&self) -> StrategyProfile<T> {
        StrategyProfile::new(self.learners.iter().map(|l| l.pi_rows()).collect())
    }

    /// `μ_k` of every learner.
    pub fn mu_profile(&self) -> StrategyProfile<T> {
        StrategyProfile::new(self.learners.iter().map(|l| l.mu_rows()).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{generate_random_game, GameSpec};

    fn zero_sum_game() -> StochasticGame<f64> {
        generate_random_game(&GameSpec::new(vec![3, 3], 3, 0.8, GameClass::ZeroSum), 5).unwrap()
    }

    fn learner(n_actions: usize, eps: f64) -> LearnerState<f64> {
        let u = 1.0 / n_actions as f64;
        LearnerState {
            agent: 0,
            n_states: 2,
            n_actions,
            epsilon: eps,
            gamma: 0.8,
            q: vec![0.0; 2 * n_actions],
            mu: vec![u; 2 * n_actions],
            pi: vec![u; 2 * n_actions],
            v: vec![0.0; 2],
        }
    }

    fn record(k: u64, state: usize, action: usize, reward: f64, next_state: usize) -> StageRecord<f64> {
        StageRecord {
            k,
            state,
            joint_action: vec![action],
            rewards: vec![reward],
            next_state,
        }
    }

    #[test]
    fn init_is_zero_and_uniform() {
        let g = zero_sum_game();
        let ls = init_learners(&g, 0.002).unwrap();
        assert_eq!(ls.len(), 2);
        for l in &ls {
            assert!(l.q().iter().all(|&x| x == 0.0));
            assert!(l.v().iter().all(|&x| x == 0.0));
            for s in 0..3 {
                assert_eq!(l.pi_row(s), &[1.0 / 3.0; 3]);
                for a in 0..3 {
                    let d = 0.998 * l.mu_row(s)[a] + 0.002 / 3.0;
                    assert!((l.pi_row(s)[a] - d).abs() < 1e-12);
                }
            }
        }
        assert!(init_learners(&g, 1.0).is_err());
    }

    #[test]
    fn standard_schedule_values() {
        let sch = StepSchedule::<f64>::standard();
        let s0 = step_sizes(0, &sch);
        assert_eq!((s0.lambda, s0.alpha, s0.beta), (1.0, 1.0, 1.0));
        let s = step_sizes(99, &sch);
        assert!((s.lambda - 0.063_095_734_448_019_3).abs() < 1e-12);
        assert!((s.alpha - 0.012_589_254_117_941_67).abs() < 1e-12);
        assert!((s.beta - 0.1).abs() < 1e-15);
        let mut last = s0;
        for k in 1..2000 {
            let s = step_sizes(k, &sch);
            assert!(s.lambda <= last.lambda && s.alpha <= last.alpha && s.beta <= last.beta);
            assert!(s.lambda > 0.0 && s.alpha > 0.0 && s.beta > 0.0);
            last = s;
        }
    }

    #[test]
    fn schedule_conditions() {
        assert!(StepSchedule::new(0.6, 0.95, 10.0).is_ok());
        assert!(StepSchedule::new(0.5, 0.95, 10.0).is_err());
        assert!(StepSchedule::new(0.7, 0.65, 10.0).is_err());
        assert!(StepSchedule::new(0.6, 0.95, 0.5).is_err());
        let sch = StepSchedule::<f64>::standard();
        assert!(sch.meets_identical_interest_condition());
        let loose = StepSchedule::new(0.7, 0.8, 1.0).unwrap();
        assert!(!loose.meets_identical_interest_condition());
        assert!(loose.validate_for(GameClass::IdenticalInterest, true).is_err());
        assert!(loose.validate_for(GameClass::IdenticalInterest, false).is_ok());
        assert!(loose.validate_for(GameClass::ZeroSum, true).is_ok());
    }

    #[test]
    fn q_update_normalised_step() {
        let sch = StepSchedule::standard();
        let l = learner(3, 0.002);
        // k = 1 uses λ_0 = 1, π = 1/3
        let next = l.q_update(1, &record(0, 1, 2, 0.5, 0), &sch).unwrap();
        assert!((next.q_row(1)[2] - 1.5).abs() < 1e-12);
        for (i, (a, b)) in next.q().iter().zip(l.q()).enumerate() {
            if i != 3 + 2 {
                assert_eq!(a, b);
            }
        }
        assert!(l.q_update(2, &record(0, 1, 2, 0.5, 0), &sch).is_err());
        assert!(l.q_update(1, &record(0, 1, 3, 0.5, 0), &sch).is_err());
    }

    #[test]
    fn q_update_substitution() {
        // λ = 0.1, π = 0.5, q = 1, r = 1, γ = 0.8, v(s_k) = 0.5 -> 1.08
        let mut l = learner(2, 0.002);
        l.q[0] = 1.0;
        l.v[1] = 0.5;
        let sch = StepSchedule::new(0.6, 0.95, 10.0).unwrap();
        // find a stage whose λ is 0.1: (k)^{-0.6} = 0.1 -> k = 10^{1/0.6}
        let lambda = step_sizes(46, &sch).lambda;
        let next = l.q_update(47, &record(46, 0, 0, 1.0, 1), &sch).unwrap();
        let expected = 1.0 + lambda * (1.4 - 1.0) / 0.5;
        assert!((next.q_row(0)[0] - expected).abs() < 1e-14);
        let direct: f64 = 1.0 + 0.1 * (1.0 + 0.8 * 0.5 - 1.0) / 0.5;
        assert!((direct - 1.08).abs() < 1e-14);
        let (idx, val) = l.q_increment(&record(0, 0, 0, 1.0, 1), 0.1);
        assert_eq!(idx, 0);
        assert!((val - 1.08).abs() < 1e-14);
    }

    #[test]
    fn epsilon_best_response_examples() {
        let (d, a) = epsilon_best_response::<f64>(&[0.2, 0.7, 0.7], 0.002).unwrap();
        assert_eq!(a, 1);
        assert!((d[0] - 0.002 / 3.0).abs() < 1e-15);
        assert!((d[1] - (0.998 + 0.002 / 3.0)).abs() < 1e-15);
        assert_eq!(epsilon_best_response(&[0.4, 0.4, 0.4], 0.1).unwrap().1, 0);
        let shifted = epsilon_best_response(&[10.2, 10.7, 10.7], 0.002).unwrap();
        assert_eq!(shifted, epsilon_best_response(&[0.2, 0.7, 0.7], 0.002).unwrap());
        assert!(epsilon_best_response(&[f64::NAN, 0.0], 0.1).is_err());
        assert!(epsilon_best_response::<f64>(&[], 0.1).is_err());
    }

    #[test]
    fn actor_update_first_stage_collapses() {
        let sch = StepSchedule::standard();
        let l = learner(3, 0.002);
        let next = l.actor_update(1, &sch);
        for s in 0..2 {
            assert_eq!(next.mu_row(s), &[1.0, 0.0, 0.0]);
            let pi = next.pi_row(s);
            assert!((pi[0] - (0.998 + 0.002 / 3.0)).abs() < 1e-15);
            assert!((pi[1] - 0.002 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn actor_step_half() {
        let mut l = learner(2, 0.1);
        l.q[0] = 1.0;
        l.actor_step(0.5);
        assert_eq!(l.mu_row(0), &[0.75, 0.25]);
        assert!(l.pi_row(0).iter().all(|&p| p >= 0.1 / 2.0));
        assert!((l.pi_row(0)[0] - (0.9 * 0.75 + 0.05)).abs() < 1e-15);
    }

    #[test]
    fn v_update_examples() {
        let sch = StepSchedule::standard();
        let l = learner(3, 0.002);
        assert_eq!(l.v_update(5, &sch).v(), &[0.0, 0.0]);
        let mut l = learner(3, 0.002);
        l.q[0] = 1.5;
        // β_0 = 1: v = π·q exactly
        let full = l.v_update(1, &sch);
        assert!((full.v()[0] - 0.5).abs() < 1e-15);
        l.v_step(0.1);
        assert!((l.v()[0] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn stage_zero_only_samples() {
        let g = zero_sum_game();
        let sch = StepSchedule::standard();
        let mut ls = init_learners(&g, 0.002).unwrap();
        let before = ls.clone();
        let mut rngs = TrialRngs::new(1, 2);
        let rec = adc_stage(&g, &mut ls, 0, None, 0, &sch, &mut rngs).unwrap();
        assert_eq!(ls, before);
        assert_eq!(rec.k, 0);
        assert_eq!(rec.joint_action.len(), 2);
        let a = g.joint().encode(&rec.joint_action).unwrap();
        assert_eq!(rec.rewards, vec![*g.reward(0, 0, a), *g.reward(1, 0, a)]);
        assert!(adc_stage(&g, &mut ls, 1, None, 0, &sch, &mut rngs).is_err());
        assert!(adc_stage(&g, &mut ls, 0, Some(&rec), 0, &sch, &mut rngs).is_err());
    }

    #[test]
    fn stage_one_keeps_v_zero() {
        let g = zero_sum_game();
        let sch = StepSchedule::standard();
        let mut ls = init_learners(&g, 0.002).unwrap();
        let mut rngs = TrialRngs::new(9, 2);
        let rec = adc_stage(&g, &mut ls, 0, None, 1, &sch, &mut rngs).unwrap();
        adc_stage(&g, &mut ls, 1, Some(&rec), rec.next_state, &sch, &mut rngs).unwrap();
        for l in &ls {
            assert!(l.v().iter().all(|&x| x == 0.0));
            let changed = l.q().iter().filter(|&&x| x != 0.0).count();
            assert!(changed <= 1);
        }
    }

    #[test]
    fn simulation_is_deterministic() {
        let g = zero_sum_game();
        let run = |seed| {
            let mut sim = Simulation::new(&g, 0.002, StepSchedule::standard(), seed).unwrap();
            sim.run_until(500).unwrap();
            (sim.learners().to_vec(), sim.last_record().cloned())
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3).0, run(4).0);
    }

    #[test]
    fn agent_streams_are_independent_of_agent_count() {
        let a = TrialRngs::new(42, 2);
        let b = TrialRngs::new(42, 3);
        let mut a0 = a.agents[0].clone();
        let mut b0 = b.agents[0].clone();
        assert_eq!(a0.gen::<u64>(), b0.gen::<u64>());
        let mut a1 = a.agents[1].clone();
        let mut a0 = a.agents[0].clone();
        assert_ne!(a0.gen::<u64>(), a1.gen::<u64>());
    }

    #[test]
    fn noisy_rewards_come_from_support() {
        use crate::game::RewardNoise;
        let g = zero_sum_game();
        let nz = RewardNoise::new(vec![-0.1, 0.1], vec![0.5, 0.5]).unwrap();
        let g = g.with_noise(vec![nz.clone(), nz]).unwrap();
        let ls = init_learners(&g, 0.1).unwrap();
        let mut rngs = TrialRngs::new(0, 2);
        for k in 0..50 {
            let rec = play_stage(&g, &ls, k, 0, &mut rngs).unwrap();
            let a = g.joint().encode(&rec.joint_action).unwrap();
            for i in 0..2 {
                let dev = rec.rewards[i] - g.reward(i, 0, a);
                assert!((dev.abs() - 0.1).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn actor_improvement_nonnegative() {
        let mut l = learner(3, 0.01);
        l.q = vec![0.3, -0.2, 0.9, 0.0, 0.0, 0.1];
        l.mu = vec![0.2, 0.5, 0.3, 0.6, 0.4, 0.0];
        for i in 0..6 {
            l.pi[i] = 0.99 * l.mu[i] + 0.01 / 3.0;
        }
        for s in 0..2 {
            assert!(l.actor_improvement(s) >= -1e-12);
        }
    }
}
