//! Exact policy evaluation, occupancy measures, best responses and Nash gaps.
//!
//! Everything here works on dense tables. Policy evaluation solves
//! `(I - gamma P_pi) V = r_pi` with an LU factorization; best responses run
//! value iteration on the single-agent MDP a player faces when the others
//! are held fixed.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MarkovGame, Policy, PolicyProfile};

/// Tolerances used across the solver. All are overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target optimality error of value iteration in sup norm.
    pub vi_tol: f64,
    /// Slack when deciding membership in an epsilon-equilibrium set.
    pub nash_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            vi_tol: 1e-10,
            nash_tol: 1e-8,
            max_iterations: 10_000_000,
        }
    }
}

/// Selection rule inside `argmax_p p^T q` over the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Vertex at the lowest-index maximizer.
    #[default]
    LowestIndex,
    /// Uniform over all exact maximizers.
    SpreadOverTies,
}

/// How the opponents of a player are perturbed toward uniform play.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "theta")]
pub enum OpponentMixing {
    None,
    /// Every opponent independently plays `(1 - theta) pi_j + theta * uniform`,
    /// which is what exploration in the learner produces.
    PerPlayer(f64),
    /// The joint opponent distribution is `(1 - theta) pi_{-i} + theta * uniform(A_{-i})`.
    Joint(f64),
}

/// Weights `w[s * J + j]` of the opponents' part of joint action `j` at state `s`.
/// The component of player `i` in `j` is ignored.
pub fn opponent_weights(
    game: &MarkovGame,
    profile: &PolicyProfile,
    i: usize,
    mixing: OpponentMixing,
) -> Vec<f64> {
    let (ns, nj) = (game.num_states(), game.num_joint_actions());
    let mut w = vec![0.0; ns * nj];
    let per_player_theta = match mixing {
        OpponentMixing::PerPlayer(t) => t,
        _ => 0.0,
    };
    for s in 0..ns {
        for j in 0..nj {
            let mut p = 1.0;
            for k in 0..game.num_players() {
                if k == i {
                    continue;
                }
                let pk = profile.player(k).state(s)[game.action_of(j, k)];
                p *= if per_player_theta > 0.0 {
                    (1.0 - per_player_theta) * pk + per_player_theta / game.num_actions(k) as f64
                } else {
                    pk
                };
            }
            w[s * nj + j] = p;
        }
    }
    if let OpponentMixing::Joint(theta) = mixing {
        if theta > 0.0 {
            let others = (nj / game.num_actions(i)) as f64;
            for x in w.iter_mut() {
                *x = (1.0 - theta) * *x + theta / others;
            }
        }
    }
    w
}

/// Single-agent MDP with dense `reward[s][a]` and `transition[s][a][s']`.
#[derive(Debug, Clone, PartialEq)]
pub struct InducedMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    pub reward: Vec<f64>,
    pub transition: Vec<f64>,
}

impl InducedMdp {
    /// The MDP player `i` faces when opponents play according to `weights`
    /// (see [`opponent_weights`]).
    pub fn for_player(game: &MarkovGame, i: usize, weights: &[f64]) -> Self {
        let (ns, nj, na) = (game.num_states(), game.num_joint_actions(), game.num_actions(i));
        let mut reward = vec![0.0; ns * na];
        let mut transition = vec![0.0; ns * na * ns];
        for s in 0..ns {
            let rrow = game.reward_row(i, s);
            for j in 0..nj {
                let w = weights[s * nj + j];
                if w == 0.0 {
                    continue;
                }
                let a = game.action_of(j, i);
                reward[s * na + a] += w * rrow[j];
                let dst = &mut transition[(s * na + a) * ns..][..ns];
                for (d, p) in dst.iter_mut().zip(game.transition_row(s, j)) {
                    *d += w * p;
                }
            }
        }
        Self {
            num_states: ns,
            num_actions: na,
            discount: game.discount(),
            reward,
            transition,
        }
    }

    /// MDP over joint actions with player `i`'s reward (used for team games).
    pub fn joint(game: &MarkovGame, i: usize) -> Self {
        let (ns, nj) = (game.num_states(), game.num_joint_actions());
        let mut reward = Vec::with_capacity(ns * nj);
        for s in 0..ns {
            reward.extend_from_slice(game.reward_row(i, s));
        }
        Self {
            num_states: ns,
            num_actions: nj,
            discount: game.discount(),
            reward,
            transition: game.transitions_flat().to_vec(),
        }
    }

    fn q_entry(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        let row = &self.transition[(s * self.num_actions + a) * self.num_states..][..self.num_states];
        self.reward[s * self.num_actions + a]
            + self.discount * row.iter().zip(v).map(|(p, x)| p * x).sum::<f64>()
    }

    /// `Q[s * A + a] = r(s, a) + gamma * sum_s' P(s'|s, a) v(s')`.
    pub fn q_values(&self, v: &[f64]) -> Vec<f64> {
        let mut q = Vec::with_capacity(self.num_states * self.num_actions);
        for s in 0..self.num_states {
            for a in 0..self.num_actions {
                q.push(self.q_entry(s, a, v));
            }
        }
        q
    }

    /// Exact value of a stationary policy.
    pub fn evaluate(&self, policy: &Policy) -> Result<Vec<f64>> {
        let ns = self.num_states;
        let mut p = vec![0.0; ns * ns];
        let mut r = vec![0.0; ns];
        for s in 0..ns {
            for (a, &pa) in policy.state(s).iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                r[s] += pa * self.reward[s * self.num_actions + a];
                let row = &self.transition[(s * self.num_actions + a) * ns..][..ns];
                for (x, q) in p[s * ns..][..ns].iter_mut().zip(row) {
                    *x += pa * q;
                }
            }
        }
        let mut sol = solve_discounted(ns, &p, self.discount, &[r], false)?;
        Ok(sol.pop().expect("one right-hand side"))
    }

    /// Value iteration from zero until the sup-norm change is at most
    /// `tol (1 - gamma) / (2 gamma)`, which bounds the optimality error by `tol`.
    /// Returns the value estimate, the greedy deterministic policy and the
    /// number of sweeps.
    pub fn value_iteration(&self, tol: f64, max_iterations: usize) -> (Vec<f64>, Vec<usize>, usize) {
        let ns = self.num_states;
        let g = self.discount;
        let threshold = if g == 0.0 {
            f64::INFINITY
        } else {
            tol * (1.0 - g) / (2.0 * g)
        };
        let mut v = vec![0.0; ns];
        let mut next = vec![0.0; ns];
        let mut sweeps = 0;
        loop {
            let mut change = 0.0f64;
            for s in 0..ns {
                let best = (0..self.num_actions)
                    .map(|a| self.q_entry(s, a, &v))
                    .fold(f64::NEG_INFINITY, f64::max);
                change = change.max((best - v[s]).abs());
                next[s] = best;
            }
            std::mem::swap(&mut v, &mut next);
            sweeps += 1;
            if change <= threshold || sweeps >= max_iterations {
                break;
            }
        }
        let greedy = (0..ns)
            .map(|s| {
                let q: Vec<f64> = (0..self.num_actions).map(|a| self.q_entry(s, a, &v)).collect();
                let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // values within the value-iteration error of the max count as ties
                let slack = tol.max(f64::EPSILON * max.abs());
                q.iter().position(|&x| x >= max - slack).unwrap_or(0)
            })
            .collect();
        (v, greedy, sweeps)
    }
}

/// Solves `(I - gamma M) x = b` (or `(I - gamma M^T) x = b` when `transpose`)
/// for each right-hand side. `m` is row-major `n x n`.
pub(crate) fn solve_discounted(
    n: usize,
    m: &[f64],
    gamma: f64,
    rhs: &[Vec<f64>],
    transpose: bool,
) -> Result<Vec<Vec<f64>>> {
    let mut a = DMatrix::<f64>::identity(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = if transpose { m[c * n + r] } else { m[r * n + c] };
            a[(r, c)] -= gamma * v;
        }
    }
    let lu = a.lu();
    rhs.iter()
        .map(|b| {
            lu.solve(&DVector::from_column_slice(b))
                .map(|x| x.iter().copied().collect())
                .ok_or_else(|| Error::LinearSolve("singular (I - gamma P) system".into()))
        })
        .collect()
}

/// State-to-state transition matrix and per-player expected rewards under `profile`.
fn induced_chain(game: &MarkovGame, profile: &PolicyProfile) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (ns, nj, n) = (game.num_states(), game.num_joint_actions(), game.num_players());
    let mut p = vec![0.0; ns * ns];
    let mut r = vec![vec![0.0; ns]; n];
    for s in 0..ns {
        for j in 0..nj {
            let w = profile.joint_prob(game, s, j);
            if w == 0.0 {
                continue;
            }
            for (x, q) in p[s * ns..][..ns].iter_mut().zip(game.transition_row(s, j)) {
                *x += w * q;
            }
            for (i, ri) in r.iter_mut().enumerate() {
                ri[s] += w * game.reward(i, s, j);
            }
        }
    }
    (p, r)
}

/// `V[i][s]` and the initial-distribution aggregates `V_i(mu, pi)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
    pub values_mu: Vec<f64>,
}

impl ValueTable {
    /// Sup-norm residual of the Bellman evaluation identity.
    pub fn bellman_residual(&self, game: &MarkovGame, profile: &PolicyProfile) -> f64 {
        let (p, r) = induced_chain(game, profile);
        let ns = game.num_states();
        let mut worst = 0.0f64;
        for (i, vi) in self.values.iter().enumerate() {
            for s in 0..ns {
                let ev: f64 = (0..ns).map(|t| p[s * ns + t] * vi[t]).sum();
                worst = worst.max((vi[s] - r[i][s] - game.discount() * ev).abs());
            }
        }
        worst
    }
}

fn mu_dot(game: &MarkovGame, v: &[f64]) -> f64 {
    game.initial().iter().zip(v).map(|(m, x)| m * x).sum()
}

/// Exact discounted values of every player under `profile`.
pub fn policy_value(game: &MarkovGame, profile: &PolicyProfile) -> Result<ValueTable> {
    profile.validate(game)?;
    let (p, r) = induced_chain(game, profile);
    let values = solve_discounted(game.num_states(), &p, game.discount(), &r, false)?;
    let values_mu = values.iter().map(|v| mu_dot(game, v)).collect();
    Ok(ValueTable { values, values_mu })
}

/// `Q[i][s][a_i]`: value of playing `a_i` once at `s` and following `pi` afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    pub q: Vec<Vec<Vec<f64>>>,
}

impl QTable {
    pub fn slice(&self, i: usize, s: usize) -> &[f64] {
        &self.q[i][s]
    }
}

fn reshape(flat: Vec<f64>, na: usize) -> Vec<Vec<f64>> {
    flat.chunks(na).map(<[f64]>::to_vec).collect()
}

/// Q-functions of every player under `profile`.
pub fn q_function(game: &MarkovGame, profile: &PolicyProfile) -> Result<QTable> {
    let values = policy_value(game, profile)?;
    let q = (0..game.num_players())
        .map(|i| {
            let w = opponent_weights(game, profile, i, OpponentMixing::None);
            let mdp = InducedMdp::for_player(game, i, &w);
            reshape(mdp.q_values(&values.values[i]), game.num_actions(i))
        })
        .collect();
    Ok(QTable { q })
}

/// `V_i(., pi_i, rho_{-i})` and `Q_i(., .; pi_i, rho_{-i})` for one player, where the
/// opponents' play is `profile` perturbed by `mixing`.
pub fn player_value_and_q(
    game: &MarkovGame,
    i: usize,
    profile: &PolicyProfile,
    mixing: OpponentMixing,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    game.check_player(i)?;
    let w = opponent_weights(game, profile, i, mixing);
    let mdp = InducedMdp::for_player(game, i, &w);
    let v = mdp.evaluate(profile.player(i))?;
    let q = reshape(mdp.q_values(&v), game.num_actions(i));
    Ok((v, q))
}

/// Discounted state occupancy `d[s]` from the initial distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyVector {
    pub d: Vec<f64>,
}

/// `d = (1 - gamma) mu^T (I - gamma P_pi)^{-1}`.
pub fn occupancy(game: &MarkovGame, profile: &PolicyProfile) -> Result<OccupancyVector> {
    occupancy_from(game, profile, game.initial())
}

/// Occupancy from an arbitrary start distribution.
pub fn occupancy_from(
    game: &MarkovGame,
    profile: &PolicyProfile,
    start: &[f64],
) -> Result<OccupancyVector> {
    profile.validate(game)?;
    let (p, _) = induced_chain(game, profile);
    let g = game.discount();
    let b: Vec<f64> = start.iter().map(|m| (1.0 - g) * m).collect();
    let mut d = solve_discounted(game.num_states(), &p, g, &[b], true)?;
    Ok(OccupancyVector {
        d: d.pop().expect("one right-hand side"),
    })
}

/// A point in `argmax_{p in simplex} p^T q`.
pub fn one_stage_br(q: &[f64], tie: TieRule) -> Vec<f64> {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out = vec![0.0; q.len()];
    match tie {
        TieRule::LowestIndex => {
            let a = q.iter().position(|&x| x == max).unwrap_or(0);
            out[a] = 1.0;
        }
        TieRule::SpreadOverTies => {
            let count = q.iter().filter(|&&x| x == max).count().max(1);
            for (o, &x) in out.iter_mut().zip(q) {
                if x == max {
                    *o = 1.0 / count as f64;
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestResponse {
    pub player: usize,
    /// Deterministic optimal policy.
    pub policy: Policy,
    /// `V_i(s, BR_i, pi_{-i})` per state.
    pub values: Vec<f64>,
    /// `V_i(mu, BR_i, pi_{-i})`.
    pub value_mu: f64,
    pub sweeps: usize,
}

/// Best response of player `i` to the other players in `profile`.
pub fn best_response(game: &MarkovGame, i: usize, profile: &PolicyProfile) -> Result<BestResponse> {
    best_response_with(game, i, profile, OpponentMixing::None, &SolverOptions::default())
}

pub fn best_response_with(
    game: &MarkovGame,
    i: usize,
    profile: &PolicyProfile,
    mixing: OpponentMixing,
    opts: &SolverOptions,
) -> Result<BestResponse> {
    game.check_player(i)?;
    profile.validate(game)?;
    let w = opponent_weights(game, profile, i, mixing);
    let mdp = InducedMdp::for_player(game, i, &w);
    let (_, greedy, sweeps) = mdp.value_iteration(opts.vi_tol, opts.max_iterations);
    let policy = Policy::deterministic(&greedy, game.num_actions(i));
    let values = mdp.evaluate(&policy)?;
    let value_mu = mu_dot(game, &values);
    Ok(BestResponse {
        player: i,
        policy,
        values,
        value_mu,
        sweeps,
    })
}

/// Per-player unilateral improvement and the resulting epsilon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NashGapReport {
    pub per_player: Vec<f64>,
    pub epsilon: f64,
    pub values_mu: Vec<f64>,
    pub best_response_values_mu: Vec<f64>,
    pub best_responses: Vec<Policy>,
}

impl NashGapReport {
    /// Whether the profile lies in `NE(eps)` up to `tol`.
    pub fn is_equilibrium(&self, eps: f64, tol: f64) -> bool {
        self.epsilon <= eps + tol
    }
}

pub fn nash_gap(game: &MarkovGame, profile: &PolicyProfile) -> Result<NashGapReport> {
    nash_gap_with(game, profile, &SolverOptions::default())
}

pub fn nash_gap_with(
    game: &MarkovGame,
    profile: &PolicyProfile,
    opts: &SolverOptions,
) -> Result<NashGapReport> {
    let values = policy_value(game, profile)?;
    let mut per_player = Vec::with_capacity(game.num_players());
    let mut br_values = Vec::with_capacity(game.num_players());
    let mut best_responses = Vec::with_capacity(game.num_players());
    for i in 0..game.num_players() {
        let br = best_response_with(game, i, profile, OpponentMixing::None, opts)?;
        per_player.push(br.value_mu - values.values_mu[i]);
        br_values.push(br.value_mu);
        best_responses.push(br.policy);
    }
    let epsilon = per_player.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(NashGapReport {
        per_player,
        epsilon,
        values_mu: values.values_mu,
        best_response_values_mu: br_values,
        best_responses,
    })
}

/// Deterministic policies of one player, in lexicographic order of the
/// per-state choices (state 0 fastest).
pub fn deterministic_policies(num_states: usize, num_actions: usize) -> impl Iterator<Item = Policy> {
    let total = (num_actions as u128).pow(num_states as u32);
    (0..total).map(move |mut k| {
        let choice: Vec<usize> = (0..num_states)
            .map(|_| {
                let a = (k % num_actions as u128) as usize;
                k /= num_actions as u128;
                a
            })
            .collect();
        Policy::deterministic(&choice, num_actions)
    })
}

/// Number of deterministic joint profiles.
pub fn deterministic_profile_count(game: &MarkovGame) -> u128 {
    game.actions()
        .iter()
        .map(|&a| (a as u128).pow(game.num_states() as u32))
        .product()
}

/// All deterministic joint profiles, refusing when there are more than `limit`.
pub fn deterministic_profiles(game: &MarkovGame, limit: u128) -> Result<Vec<PolicyProfile>> {
    let count = deterministic_profile_count(game);
    if count > limit {
        return Err(Error::TooLarge { count, limit });
    }
    let per_player: Vec<Vec<Policy>> = game
        .actions()
        .iter()
        .map(|&a| deterministic_policies(game.num_states(), a).collect())
        .collect();
    let mut out = Vec::with_capacity(count as usize);
    let mut idx = vec![0usize; per_player.len()];
    loop {
        out.push(PolicyProfile::new(
            idx.iter()
                .zip(&per_player)
                .map(|(&k, ps)| ps[k].clone())
                .collect(),
        ));
        let mut p = 0;
        loop {
            if p == idx.len() {
                return Ok(out);
            }
            idx[p] += 1;
            if idx[p] < per_player[p].len() {
                break;
            }
            idx[p] = 0;
            p += 1;
        }
    }
}

/// Deterministic profiles whose Nash gap is at most `tol`.
pub fn pure_equilibria(game: &MarkovGame, tol: f64, limit: u128) -> Result<Vec<PolicyProfile>> {
    let mut out = Vec::new();
    for p in deterministic_profiles(game, limit)? {
        if nash_gap(game, &p)?.epsilon <= tol {
            out.push(p);
        }
    }
    Ok(out)
}

/// Measured sides of the value and Q perturbation lemmas.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub player: usize,
    pub theta: f64,
    /// `max_s |V_i(s, pi_i, pi_{-i}) - V_i(s, pi_i, pi_{-i}^theta)|`.
    pub value_deviation: f64,
    /// `max_{s, a_i} |Q_i(s, a_i; pi_i, pi_{-i}) - Q_i(s, a_i; pi_i, pi_{-i}^theta)|`.
    pub q_deviation: f64,
    /// `2 theta r_max / (1 - gamma)^2`.
    pub bound: f64,
    pub holds: bool,
}

/// Compares values and Q-functions of player `i` when the opponents'
/// joint play is mixed with the uniform joint distribution by `theta`.
pub fn perturbation_bounds_check(
    game: &MarkovGame,
    i: usize,
    profile: &PolicyProfile,
    theta: f64,
) -> Result<PerturbationReport> {
    perturbation_bounds_check_with(game, i, profile, OpponentMixing::Joint(theta))
}

/// As [`perturbation_bounds_check`] with an explicit mixing model.
pub fn perturbation_bounds_check_with(
    game: &MarkovGame,
    i: usize,
    profile: &PolicyProfile,
    mixing: OpponentMixing,
) -> Result<PerturbationReport> {
    if game.num_players() < 2 {
        return Err(Error::NotApplicable);
    }
    let theta = match mixing {
        OpponentMixing::None => 0.0,
        OpponentMixing::PerPlayer(t) | OpponentMixing::Joint(t) => t,
    };
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie in [0, 1]",
        });
    }
    profile.validate(game)?;
    let (v0, q0) = player_value_and_q(game, i, profile, OpponentMixing::None)?;
    let (v1, q1) = player_value_and_q(game, i, profile, mixing)?;
    let value_deviation = v0
        .iter()
        .zip(&v1)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let q_deviation = q0
        .iter()
        .flatten()
        .zip(q1.iter().flatten())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let g = game.discount();
    let bound = 2.0 * theta * game.r_max() / (1.0 - g).powi(2);
    // tiny absolute slack for rounding in the two linear solves
    let slack = 1e-12 * (1.0 + game.r_max() / (1.0 - g));
    Ok(PerturbationReport {
        player: i,
        theta,
        value_deviation,
        q_deviation,
        bound,
        holds: value_deviation <= bound + slack && q_deviation <= bound + slack,
    })
}
