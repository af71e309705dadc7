//! Decentralized two-timescale actor-critic with bandit feedback.
//!
//! Every agent keeps a local Q estimate, a policy and visit counters, and
//! sees only the state sequence, its own action and its own reward. Each
//! iterate runs, in order: counters, critic (fast stepsize `alpha`), actor
//! (slow stepsize `beta`, moving toward the one-stage best response of the
//! *previous* critic), then exploratory action sampling. Only the entries of
//! the most recently visited state (and own action) change.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_simplex, uniform_policy, MarkovGame, Policy, PolicyProfile};
use crate::potential::Potential;
use crate::sampling::{sample_index, stream_rng, SimRng};
use crate::solver::{nash_gap, player_value_and_q, one_stage_br, OpponentMixing, TieRule};

/// `alpha(n) = n^-fast`, `beta(n) = n^-slow` for `n >= 1`.
///
/// With `1/2 < fast < slow <= 1` both sequences are non-increasing, have
/// divergent sums, are square-summable, `beta / alpha = n^-(slow - fast) -> 0`
/// and `alpha(floor(x n)) / alpha(n) <= x^-fast` stays bounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepSizes {
    fast: f64,
    slow: f64,
}

impl StepSizes {
    pub fn fast_exponent(&self) -> f64 {
        self.fast
    }

    pub fn slow_exponent(&self) -> f64 {
        self.slow
    }

    pub fn alpha(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        (n as f64).powf(-self.fast)
    }

    pub fn beta(&self, n: u64) -> f64 {
        debug_assert!(n >= 1);
        (n as f64).powf(-self.slow)
    }
}

pub fn make_stepsizes(fast: f64, slow: f64) -> Result<StepSizes> {
    if !(fast > 0.5 && fast < slow && slow <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "stepsize exponents",
            value: fast,
            reason: "need 1/2 < fast < slow <= 1",
        });
    }
    Ok(StepSizes { fast, slow })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Exploration probability of uniform action sampling.
    pub theta: f64,
    pub fast_exponent: f64,
    pub slow_exponent: f64,
    /// Number of iterates after stage 0.
    pub horizon: u64,
    pub seed: u64,
    pub tie_rule: TieRule,
    /// Nash gap (and potential) computed every this many iterates.
    pub metric_period: u64,
    /// Keep one plain record every this many iterates.
    pub record_every: u64,
    /// Holds policies fixed (`beta = 0`) so only the critic learns.
    pub freeze_policy: bool,
    pub check_invariants: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            theta: 0.05,
            fast_exponent: 0.6,
            slow_exponent: 0.9,
            horizon: 100_000,
            seed: 0,
            tie_rule: TieRule::LowestIndex,
            metric_period: 10_000,
            record_every: 1_000,
            freeze_policy: false,
            check_invariants: true,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<StepSizes> {
        if !(0.0..=1.0).contains(&self.theta) {
            return Err(Error::InvalidParameter {
                name: "theta",
                value: self.theta,
                reason: "must lie in [0, 1]",
            });
        }
        if self.metric_period == 0 {
            return Err(Error::InvalidParameter {
                name: "metric_period",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter {
                name: "record_every",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        make_stepsizes(self.fast_exponent, self.slow_exponent)
    }
}

/// One learner's private state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub player: usize,
    num_actions: usize,
    /// `q[s * A + a]`.
    q: Vec<f64>,
    pi: Policy,
    /// `n_sa[s * A + a]`.
    n_sa: Vec<u64>,
}

/// What one agent observes at the start of iterate `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalObservation {
    pub prev_state: usize,
    pub prev_action: usize,
    pub prev_reward: f64,
    pub state: usize,
    /// `n^t(s^{t-1})` after this iterate's increment.
    pub state_visits: u64,
}

impl AgentState {
    pub fn new(player: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            player,
            num_actions,
            q: vec![0.0; num_states * num_actions],
            pi: Policy::uniform(num_states, num_actions),
            n_sa: vec![0; num_states * num_actions],
        }
    }

    pub fn with_policy(mut self, pi: Policy) -> Self {
        self.pi = pi;
        self
    }

    pub fn q_row(&self, s: usize) -> &[f64] {
        &self.q[s * self.num_actions..][..self.num_actions]
    }

    pub fn q_table(&self) -> Vec<Vec<f64>> {
        self.q.chunks(self.num_actions).map(<[f64]>::to_vec).collect()
    }

    pub fn policy(&self) -> &Policy {
        &self.pi
    }

    pub fn visits(&self, s: usize, a: usize) -> u64 {
        self.n_sa[s * self.num_actions + a]
    }

    pub fn state_visits(&self, s: usize) -> u64 {
        self.n_sa[s * self.num_actions..][..self.num_actions].iter().sum()
    }

    /// Counter, critic and actor updates for one iterate.
    pub fn observe(
        &mut self,
        obs: &LocalObservation,
        steps: &StepSizes,
        discount: f64,
        tie: TieRule,
        freeze_policy: bool,
    ) {
        let k = self.num_actions;
        let idx = obs.prev_state * k + obs.prev_action;
        self.n_sa[idx] += 1;

        // both the bootstrap and the best response read the previous critic
        let prev_row_br = one_stage_br(self.q_row(obs.prev_state), tie);
        let bootstrap: f64 = self
            .pi
            .state(obs.state)
            .iter()
            .zip(self.q_row(obs.state))
            .map(|(p, q)| p * q)
            .sum();
        let target = obs.prev_reward + discount * bootstrap;
        let alpha = steps.alpha(self.n_sa[idx]);
        self.q[idx] += alpha * (target - self.q[idx]);

        if !freeze_policy {
            let beta = steps.beta(obs.state_visits);
            let row = self.pi.state_mut(obs.prev_state);
            for (p, b) in row.iter_mut().zip(&prev_row_br) {
                *p += beta * (b - *p);
            }
        }
    }

    /// Draws from `(1 - theta) pi(s) + theta * uniform`.
    pub fn sample_action(&self, s: usize, theta: f64, rng: &mut SimRng) -> usize {
        use rand::Rng;
        if theta > 0.0 && rng.random::<f64>() < theta {
            rng.random_range(0..self.num_actions)
        } else {
            sample_index(rng, self.pi.state(s))
        }
    }
}

/// State visit counts `n[s]`; every agent computes the same values from the
/// shared state sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedCounters {
    pub n: Vec<u64>,
}

impl SharedCounters {
    pub fn new(num_states: usize) -> Self {
        Self {
            n: vec![0; num_states],
        }
    }
}

/// Realized state, joint action and per-player rewards of one stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

fn realize(game: &MarkovGame, state: usize, actions: Vec<usize>) -> Transition {
    let joint = game.encode(&actions);
    let rewards = (0..game.num_players())
        .map(|i| game.reward(i, state, joint))
        .collect();
    Transition {
        state,
        actions,
        rewards,
    }
}

/// One iterate `t >= 1`: updates on `prev -> state`, then samples `a^t`.
#[allow(clippy::too_many_arguments)]
pub fn learner_step(
    game: &MarkovGame,
    agents: &mut [AgentState],
    counters: &mut SharedCounters,
    prev: &Transition,
    state: usize,
    steps: &StepSizes,
    config: &LearnerConfig,
    agent_rngs: &mut [SimRng],
) -> Transition {
    counters.n[prev.state] += 1;
    let state_visits = counters.n[prev.state];
    for agent in agents.iter_mut() {
        let i = agent.player;
        let obs = LocalObservation {
            prev_state: prev.state,
            prev_action: prev.actions[i],
            prev_reward: prev.rewards[i],
            state,
            state_visits,
        };
        agent.observe(&obs, steps, game.discount(), config.tie_rule, config.freeze_policy);
    }
    let actions = agents
        .iter()
        .zip(agent_rngs.iter_mut())
        .map(|(a, rng)| a.sample_action(state, config.theta, rng))
        .collect();
    realize(game, state, actions)
}

/// A structural invariant that failed at some iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantViolation {
    pub t: u64,
    pub player: Option<usize>,
    pub what: String,
}

/// Step-by-step driver of one learning run.
pub struct LearningRun<'g> {
    game: &'g MarkovGame,
    config: LearnerConfig,
    steps: StepSizes,
    agents: Vec<AgentState>,
    counters: SharedCounters,
    env_rng: SimRng,
    agent_rngs: Vec<SimRng>,
    last: Transition,
    t: u64,
    cumulative_beta: f64,
}

impl<'g> LearningRun<'g> {
    /// Initializes all agents and plays stage 0.
    pub fn new(game: &'g MarkovGame, config: LearnerConfig) -> Result<Self> {
        let initial = uniform_policy(game);
        Self::from_profile(game, config, &initial)
    }

    /// As [`LearningRun::new`] but starting from `initial` policies.
    pub fn from_profile(
        game: &'g MarkovGame,
        config: LearnerConfig,
        initial: &PolicyProfile,
    ) -> Result<Self> {
        let steps = config.validate()?;
        initial.validate(game)?;
        let agents: Vec<AgentState> = (0..game.num_players())
            .map(|i| {
                AgentState::new(i, game.num_states(), game.num_actions(i))
                    .with_policy(initial.player(i).clone())
            })
            .collect();
        let mut env_rng = stream_rng(config.seed, 0);
        let mut agent_rngs: Vec<SimRng> = (0..game.num_players())
            .map(|i| stream_rng(config.seed, i as u64 + 1))
            .collect();
        let s0 = sample_index(&mut env_rng, game.initial());
        // stage 0 samples from the initial policy
        let actions = agents
            .iter()
            .zip(agent_rngs.iter_mut())
            .map(|(a, rng)| sample_index(rng, a.policy().state(s0)))
            .collect();
        let last = realize(game, s0, actions);
        Ok(Self {
            game,
            config,
            steps,
            agents,
            counters: SharedCounters::new(game.num_states()),
            env_rng,
            agent_rngs,
            last,
            t: 0,
            cumulative_beta: 0.0,
        })
    }

    pub fn t(&self) -> u64 {
        self.t
    }

    pub fn last(&self) -> &Transition {
        &self.last
    }

    pub fn agents(&self) -> &[AgentState] {
        &self.agents
    }

    pub fn counters(&self) -> &SharedCounters {
        &self.counters
    }

    /// Sum of the actor stepsizes used so far, averaged over states.
    pub fn policy_clock(&self) -> f64 {
        self.cumulative_beta / self.game.num_states() as f64
    }

    /// Current joint policy (analysis side; agents never see it).
    pub fn profile(&self) -> PolicyProfile {
        PolicyProfile::new(self.agents.iter().map(|a| a.policy().clone()).collect())
    }

    /// Advances one iterate and returns the new stage.
    pub fn step(&mut self) -> &Transition {
        let joint = self.game.encode(&self.last.actions);
        let next = sample_index(
            &mut self.env_rng,
            self.game.transition_row(self.last.state, joint),
        );
        let prev = std::mem::replace(
            &mut self.last,
            Transition {
                state: 0,
                actions: Vec::new(),
                rewards: Vec::new(),
            },
        );
        self.last = learner_step(
            self.game,
            &mut self.agents,
            &mut self.counters,
            &prev,
            next,
            &self.steps,
            &self.config,
            &mut self.agent_rngs,
        );
        if !self.config.freeze_policy {
            self.cumulative_beta += self.steps.beta(self.counters.n[prev.state]);
        }
        self.t += 1;
        &self.last
    }

    /// Steps once and checks the structural invariants against the
    /// pre-step state.
    pub fn step_checked(&mut self, violations: &mut Vec<InvariantViolation>) {
        let before = self.agents.clone();
        let prev = self.last.clone();
        self.step();
        check_step(self.game, &before, &self.agents, &self.counters, &prev, self.t, violations);
    }
}

fn check_step(
    game: &MarkovGame,
    before: &[AgentState],
    after: &[AgentState],
    counters: &SharedCounters,
    prev: &Transition,
    t: u64,
    out: &mut Vec<InvariantViolation>,
) {
    let bound = game.r_max() / (1.0 - game.discount()) + 1e-9;
    let mut push = |player: Option<usize>, what: String| out.push(InvariantViolation { t, player, what });
    for (i, (b, a)) in before.iter().zip(after).enumerate() {
        let k = a.num_actions;
        for s in 0..game.num_states() {
            if let Err(e) = check_simplex(a.pi.state(s), k, crate::game::SIMPLEX_TOL) {
                push(Some(i), format!("policy off simplex at state {s}: {e}"));
            }
            if a.state_visits(s) != counters.n[s] {
                push(
                    Some(i),
                    format!(
                        "counter mismatch at state {s}: {} != {}",
                        a.state_visits(s),
                        counters.n[s]
                    ),
                );
            }
            if s != prev.state && a.pi.state(s) != b.pi.state(s) {
                push(Some(i), format!("policy changed at unvisited state {s}"));
            }
        }
        for (idx, (&qa, &qb)) in a.q.iter().zip(&b.q).enumerate() {
            if qa.abs() > bound {
                push(Some(i), format!("q[{idx}] = {qa} exceeds {bound}"));
            }
            if qa != qb && idx != prev.state * k + prev.actions[i] {
                push(Some(i), format!("q changed at unvisited entry {idx}"));
            }
            if a.n_sa[idx] < b.n_sa[idx] {
                push(Some(i), format!("counter {idx} decreased"));
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSnapshot {
    pub nash_gap: f64,
    pub per_player_gaps: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_mu: Option<f64>,
    pub policy: PolicyProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: u64,
    pub s: usize,
    pub joint_action: Vec<usize>,
    pub rewards: Vec<f64>,
    /// Cumulative actor stepsize per state up to `t`.
    pub clock: f64,
    #[serde(flatten, default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub seed: u64,
    pub records: Vec<TrajectoryRecord>,
    pub violations: Vec<InvariantViolation>,
    pub iterates_checked: u64,
    pub final_policy: PolicyProfile,
    pub final_q: Vec<Vec<Vec<f64>>>,
    pub state_visits: Vec<u64>,
}

impl TrajectoryLog {
    pub fn metric_records(&self) -> impl Iterator<Item = (&TrajectoryRecord, &MetricSnapshot)> {
        self.records
            .iter()
            .filter_map(|r| r.metrics.as_ref().map(|m| (r, m)))
    }

    pub fn initial_gap(&self) -> Option<f64> {
        self.metric_records().next().map(|(_, m)| m.nash_gap)
    }

    pub fn final_gap(&self) -> Option<f64> {
        self.metric_records().last().map(|(_, m)| m.nash_gap)
    }

    /// Writes one JSON object per record, tagged `"kind": "learn"`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            let mut v = serde_json::to_value(r)?;
            v.as_object_mut()
                .expect("record is an object")
                .insert("kind".into(), "learn".into());
            serde_json::to_writer(&mut out, &v)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn snapshot(
    game: &MarkovGame,
    run: &LearningRun<'_>,
    potential: Option<&Potential>,
) -> Result<MetricSnapshot> {
    let policy = run.profile();
    let gap = nash_gap(game, &policy)?;
    let phi_mu = potential.map(|p| p.aggregate(game, &policy)).transpose()?;
    Ok(MetricSnapshot {
        nash_gap: gap.epsilon,
        per_player_gaps: gap.per_player,
        phi_mu,
        policy,
    })
}

fn record(run: &LearningRun<'_>, metrics: Option<MetricSnapshot>) -> TrajectoryRecord {
    TrajectoryRecord {
        t: run.t(),
        s: run.last().state,
        joint_action: run.last().actions.clone(),
        rewards: run.last().rewards.clone(),
        clock: run.policy_clock(),
        metrics,
    }
}

/// Runs the learner for `config.horizon` iterates after stage 0.
pub fn run_learning(
    game: &MarkovGame,
    config: &LearnerConfig,
    potential: Option<&Potential>,
) -> Result<TrajectoryLog> {
    run_learning_from(game, config, &uniform_policy(game), potential)
}

pub fn run_learning_from(
    game: &MarkovGame,
    config: &LearnerConfig,
    initial: &PolicyProfile,
    potential: Option<&Potential>,
) -> Result<TrajectoryLog> {
    let mut run = LearningRun::from_profile(game, config.clone(), initial)?;
    let mut records = vec![record(&run, Some(snapshot(game, &run, potential)?))];
    let mut violations = Vec::new();
    for _ in 0..config.horizon {
        if config.check_invariants {
            run.step_checked(&mut violations);
        } else {
            run.step();
        }
        let t = run.t();
        let metric = t % config.metric_period == 0 || t == config.horizon;
        if metric {
            let m = snapshot(game, &run, potential)?;
            records.push(record(&run, Some(m)));
        } else if t % config.record_every == 0 {
            records.push(record(&run, None));
        }
    }
    Ok(TrajectoryLog {
        seed: config.seed,
        records,
        violations,
        iterates_checked: if config.check_invariants { config.horizon } else { 0 },
        final_policy: run.profile(),
        final_q: run.agents().iter().map(AgentState::q_table).collect(),
        state_visits: run.counters().n.clone(),
    })
}

/// Sup-norm distance between the agents' critics and
/// `Q_i(.; pi_i, pi_{-i}^theta)` with per-player exploration of the opponents.
pub fn critic_tracking_error(
    game: &MarkovGame,
    policy: &PolicyProfile,
    critics: &[Vec<Vec<f64>>],
    theta: f64,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for (i, qi) in critics.iter().enumerate() {
        let (_, exact) = player_value_and_q(game, i, policy, OpponentMixing::PerPlayer(theta))?;
        for (a, b) in qi.iter().flatten().zip(exact.iter().flatten()) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaBound {
    pub value: f64,
    /// Formula value before clipping.
    pub raw: f64,
    pub clipped: bool,
}

/// Largest exploration rate allowed by the convergence theorem:
/// `lambda sqrt(2|S|) / (r_max (2 / (1 - gamma)^3 + 4 / (D (1 - gamma)^2)))`,
/// clipped to `(0, 1]`.
pub fn theta_bound(game: &MarkovGame, lambda: f64, d: f64) -> Result<ThetaBound> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be positive",
        });
    }
    if !(d > 0.0) {
        return Err(Error::InvalidParameter {
            name: "D",
            value: d,
            reason: "must be positive",
        });
    }
    let g = game.discount();
    let denom = game.r_max() * (2.0 / (1.0 - g).powi(3) + 4.0 / (d * (1.0 - g).powi(2)));
    if denom == 0.0 {
        return Ok(ThetaBound {
            value: 1.0,
            raw: f64::INFINITY,
            clipped: true,
        });
    }
    let raw = lambda * (2.0 * game.num_states() as f64).sqrt() / denom;
    Ok(ThetaBound {
        value: raw.min(1.0),
        raw,
        clipped: raw > 1.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{make_team_game, GameShape};
    use crate::sampling::seeded_rng;

    #[test]
    fn stepsize_values_and_ordering() {
        let s = make_stepsizes(0.6, 0.9).unwrap();
        assert_eq!(s.alpha(1), 1.0);
        assert_eq!(s.beta(1), 1.0);
        let ratio = s.alpha(1024) / s.alpha(2048);
        assert!((ratio - 2f64.powf(0.6)).abs() < 1e-12);
        assert!((ratio - 1.5157).abs() < 1e-4);
        assert!(make_stepsizes(0.9, 0.6).is_err());
        assert!(make_stepsizes(0.5, 0.9).is_err());
        assert!(make_stepsizes(0.6, 1.1).is_err());
    }

    #[test]
    fn first_visit_overwrites_and_jumps() {
        let steps = make_stepsizes(0.6, 0.9).unwrap();
        let mut agent = AgentState::new(0, 2, 2);
        agent.q = vec![0.0, 0.0, 0.3, -0.1];
        let obs = LocalObservation {
            prev_state: 1,
            prev_action: 1,
            prev_reward: 0.7,
            state: 0,
            state_visits: 1,
        };
        agent.observe(&obs, &steps, 0.5, TieRule::LowestIndex, false);
        // bootstrap from state 0 is zero, alpha(1) = 1
        assert_eq!(agent.q_row(1), &[0.3, 0.7]);
        // br from previous critic at state 1 is action 0, beta(1) = 1
        assert_eq!(agent.policy().state(1), &[1.0, 0.0]);
        assert_eq!(agent.policy().state(0), &[0.5, 0.5]);
        assert_eq!(agent.visits(1, 1), 1);
    }

    #[test]
    fn frozen_policy_does_not_move() {
        let steps = make_stepsizes(0.6, 0.9).unwrap();
        let mut agent = AgentState::new(0, 1, 2);
        agent.q = vec![1.0, 0.0];
        let obs = LocalObservation {
            prev_state: 0,
            prev_action: 0,
            prev_reward: 1.0,
            state: 0,
            state_visits: 1,
        };
        agent.observe(&obs, &steps, 0.5, TieRule::LowestIndex, true);
        assert_eq!(agent.policy().state(0), &[0.5, 0.5]);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let agent = AgentState::new(0, 1, 4).with_policy(Policy::deterministic(&[2], 4));
        let mut rng = seeded_rng(17);
        let n = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..n {
            counts[agent.sample_action(0, 1.0, &mut rng)] += 1;
        }
        let expected = n as f64 / 4.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 3 degrees of freedom, 0.999 quantile
        assert!(chi2 < 16.27, "chi2 = {chi2}, counts {counts:?}");
        let sd = (n as f64 * 0.25 * 0.75).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 3.0 * sd);
        }
    }

    #[test]
    fn zero_horizon_keeps_stage_zero_only() {
        let g = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
        let cfg = LearnerConfig {
            horizon: 0,
            ..LearnerConfig::default()
        };
        let log = run_learning(&g, &cfg, None).unwrap();
        assert_eq!(log.records.len(), 1);
        assert_eq!(log.records[0].t, 0);
        assert!(log.records[0].metrics.is_some());
    }

    #[test]
    fn runs_are_reproducible() {
        let g = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
        let cfg = LearnerConfig {
            horizon: 3_000,
            metric_period: 1_000,
            record_every: 10,
            seed: 5,
            ..LearnerConfig::default()
        };
        let a = run_learning(&g, &cfg, None).unwrap();
        let b = run_learning(&g, &cfg, None).unwrap();
        let (mut x, mut y) = (Vec::new(), Vec::new());
        a.write_jsonl(&mut x).unwrap();
        b.write_jsonl(&mut y).unwrap();
        assert_eq!(x, y);
        assert!(a.violations.is_empty());
        assert!(a.records.windows(2).all(|w| w[0].t < w[1].t));
    }

    #[test]
    fn theta_bound_examples() {
        let g = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
        // scale rewards so r_max = 1 exactly
        let scale = 1.0 / g.r_max();
        let r: Vec<f64> = g.rewards_flat().iter().map(|x| x * scale).collect();
        let g = MarkovGame::new(2, vec![2, 2], r, g.transitions_flat().to_vec(), 0.5, vec![0.5, 0.5])
            .unwrap();
        assert!((g.r_max() - 1.0).abs() < 1e-15);
        let b = theta_bound(&g, 0.01, 4.0).unwrap();
        assert!((b.value - 0.001).abs() < 1e-15);
        assert!(!b.clipped);
        let small = theta_bound(&g, 1e-9, 4.0).unwrap();
        assert!(small.value < 1e-9);
        assert!(theta_bound(&g, 0.0, 4.0).is_err());
        assert!(theta_bound(&g, 0.1, -1.0).is_err());
        let zero = MarkovGame::new(2, vec![2, 2], vec![0.0; 16], g.transitions_flat().to_vec(), 0.5, vec![0.5, 0.5])
            .unwrap();
        assert_eq!(theta_bound(&zero, 0.1, 4.0).unwrap().value, 1.0);
    }

    #[test]
    fn invalid_config_rejected() {
        let g = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
        let cfg = LearnerConfig {
            theta: 1.5,
            ..LearnerConfig::default()
        };
        assert!(run_learning(&g, &cfg, None).is_err());
        let cfg = LearnerConfig {
            fast_exponent: 0.95,
            ..LearnerConfig::default()
        };
        assert!(run_learning(&g, &cfg, None).is_err());
    }
}
