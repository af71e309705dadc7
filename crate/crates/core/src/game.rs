//! Tabular Markov games and stationary policy profiles.
//!
//! Joint actions use a mixed-radix index with player 0 varying fastest, so the
//! joint action `(a_0, a_1, ..., a_{N-1})` has index
//! `a_0 + A_0 * (a_1 + A_1 * (a_2 + ...))`. All tables are dense.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance for probability vectors summing to one.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A validated general-sum Markov game with an initial state distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovGame {
    name: Option<String>,
    num_states: usize,
    actions: Vec<usize>,
    strides: Vec<usize>,
    num_joint: usize,
    // [player][state][joint]
    rewards: Vec<f64>,
    // [state][joint][next]
    transitions: Vec<f64>,
    discount: f64,
    initial: Vec<f64>,
    r_max: f64,
    warnings: Vec<String>,
}

impl MarkovGame {
    /// Builds and validates a game from flat tables.
    ///
    /// `rewards` is laid out `[player][state][joint_action]` and `transitions`
    /// `[state][joint_action][next_state]`.
    pub fn new(
        num_states: usize,
        actions: Vec<usize>,
        rewards: Vec<f64>,
        transitions: Vec<f64>,
        discount: f64,
        initial: Vec<f64>,
    ) -> Result<Self> {
        if num_states == 0 {
            return Err(Error::EmptyCount { what: "states" });
        }
        if actions.is_empty() {
            return Err(Error::EmptyCount { what: "players" });
        }
        if actions.contains(&0) {
            return Err(Error::EmptyCount { what: "actions" });
        }
        if !(0.0..1.0).contains(&discount) || discount.is_nan() {
            return Err(Error::DiscountOutOfRange(discount));
        }
        let mut strides = Vec::with_capacity(actions.len());
        let mut num_joint = 1usize;
        for &a in &actions {
            strides.push(num_joint);
            num_joint *= a;
        }
        let n = actions.len();
        let expected = n * num_states * num_joint;
        if rewards.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "rewards".into(),
                expected,
                found: rewards.len(),
            });
        }
        let expected = num_states * num_joint * num_states;
        if transitions.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "transitions".into(),
                expected,
                found: transitions.len(),
            });
        }
        if initial.len() != num_states {
            return Err(Error::ShapeMismatch {
                what: "mu".into(),
                expected: num_states,
                found: initial.len(),
            });
        }
        for (idx, r) in rewards.iter().enumerate() {
            if !r.is_finite() {
                let joint_action = idx % num_joint;
                let state = (idx / num_joint) % num_states;
                let player = idx / (num_joint * num_states);
                return Err(Error::NonFiniteReward {
                    player,
                    state,
                    joint_action,
                });
            }
        }
        for s in 0..num_states {
            for a in 0..num_joint {
                let row = &transitions[(s * num_joint + a) * num_states..][..num_states];
                for (next, &p) in row.iter().enumerate() {
                    if p < 0.0 || !p.is_finite() {
                        return Err(Error::NegativeProbability {
                            state: s,
                            joint_action: a,
                            next_state: next,
                            value: p,
                        });
                    }
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > SIMPLEX_TOL {
                    return Err(Error::NonStochasticRow {
                        state: s,
                        joint_action: a,
                        sum,
                    });
                }
            }
        }
        let mut warnings = Vec::new();
        if initial.iter().any(|p| *p < 0.0 || !p.is_finite()) {
            return Err(Error::InitialDistribution {
                reason: "entries must be finite and nonnegative".into(),
            });
        }
        let mu_sum: f64 = initial.iter().sum();
        if (mu_sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InitialDistribution {
                reason: format!("entries sum to {mu_sum}"),
            });
        }
        for (s, &p) in initial.iter().enumerate() {
            if p == 0.0 {
                warnings.push(format!(
                    "mu({s}) = 0: full-support initial distribution is violated"
                ));
            }
        }
        let r_max = rewards.iter().fold(0.0f64, |m, r| m.max(r.abs()));
        Ok(Self {
            name: None,
            num_states,
            actions,
            strides,
            num_joint,
            rewards,
            transitions,
            discount,
            initial,
            r_max,
            warnings,
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Same game with a different discount factor.
    pub fn with_discount(&self, discount: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&discount) || discount.is_nan() {
            return Err(Error::DiscountOutOfRange(discount));
        }
        let mut g = self.clone();
        g.discount = discount;
        Ok(g)
    }

    /// Same game with a different initial distribution.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self> {
        let mut g = Self::new(
            self.num_states,
            self.actions.clone(),
            self.rewards.clone(),
            self.transitions.clone(),
            self.discount,
            initial,
        )?;
        g.name = self.name.clone();
        Ok(g)
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn num_players(&self) -> usize {
        self.actions.len()
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self, player: usize) -> usize {
        self.actions[player]
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn num_joint_actions(&self) -> usize {
        self.num_joint
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Largest absolute one-stage reward over all players, states and joint actions.
    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    /// Diagnostics that do not invalidate the game (e.g. `mu(s) = 0`).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn has_full_support(&self) -> bool {
        self.initial.iter().all(|&p| p > 0.0)
    }

    pub fn reward(&self, player: usize, state: usize, joint: usize) -> f64 {
        self.rewards[(player * self.num_states + state) * self.num_joint + joint]
    }

    /// Rewards of one player at one state, indexed by joint action.
    pub fn reward_row(&self, player: usize, state: usize) -> &[f64] {
        &self.rewards[(player * self.num_states + state) * self.num_joint..][..self.num_joint]
    }

    /// Next-state distribution `P(. | state, joint)`.
    pub fn transition_row(&self, state: usize, joint: usize) -> &[f64] {
        &self.transitions[(state * self.num_joint + joint) * self.num_states..][..self.num_states]
    }

    pub fn rewards_flat(&self) -> &[f64] {
        &self.rewards
    }

    pub fn transitions_flat(&self) -> &[f64] {
        &self.transitions
    }

    /// Action of `player` inside joint action `joint`.
    #[inline]
    pub fn action_of(&self, joint: usize, player: usize) -> usize {
        (joint / self.strides[player]) % self.actions[player]
    }

    pub fn encode(&self, actions: &[usize]) -> usize {
        actions
            .iter()
            .zip(&self.strides)
            .map(|(a, s)| a * s)
            .sum()
    }

    pub fn decode(&self, joint: usize) -> Vec<usize> {
        (0..self.num_players())
            .map(|i| self.action_of(joint, i))
            .collect()
    }

    /// First entry where some player's reward differs from player 0's, if any.
    pub fn first_reward_mismatch(&self) -> Option<(usize, usize, usize)> {
        let block = self.num_states * self.num_joint;
        for i in 1..self.num_players() {
            for k in 0..block {
                if self.rewards[i * block + k] != self.rewards[k] {
                    return Some((i, k / self.num_joint, k % self.num_joint));
                }
            }
        }
        None
    }

    pub fn is_identical_interest(&self) -> bool {
        self.first_reward_mismatch().is_none()
    }

    pub(crate) fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.num_players() {
            return Err(Error::PlayerOutOfRange {
                player,
                num_players: self.num_players(),
            });
        }
        Ok(())
    }
}

/// One player's stationary Markov policy, `probs[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Policy {
    probs: Vec<Vec<f64>>,
}

impl Policy {
    pub fn from_rows(probs: Vec<Vec<f64>>) -> Self {
        Self { probs }
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        let p = 1.0 / num_actions as f64;
        Self {
            probs: vec![vec![p; num_actions]; num_states],
        }
    }

    /// Deterministic policy playing `choice[s]` at state `s`.
    pub fn deterministic(choice: &[usize], num_actions: usize) -> Self {
        Self {
            probs: choice
                .iter()
                .map(|&a| {
                    let mut row = vec![0.0; num_actions];
                    row[a] = 1.0;
                    row
                })
                .collect(),
        }
    }

    pub fn num_states(&self) -> usize {
        self.probs.len()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.first().map_or(0, Vec::len)
    }

    pub fn state(&self, s: usize) -> &[f64] {
        &self.probs[s]
    }

    pub fn state_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.probs[s]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Entries flattened state-major.
    pub fn flatten(&self) -> Vec<f64> {
        self.probs.iter().flatten().copied().collect()
    }

    /// Euclidean distance over all `(s, a)` entries.
    pub fn distance(&self, other: &Policy) -> f64 {
        self.probs
            .iter()
            .flatten()
            .zip(other.probs.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Joint policy profile `pi = (pi_0, ..., pi_{N-1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicyProfile {
    players: Vec<Policy>,
}

impl PolicyProfile {
    pub fn new(players: Vec<Policy>) -> Self {
        Self { players }
    }

    /// Builds a profile and checks it against `game`.
    pub fn checked(game: &MarkovGame, players: Vec<Policy>) -> Result<Self> {
        let p = Self { players };
        p.validate(game)?;
        Ok(p)
    }

    pub fn num_players(&self) -> usize {
        self.players.len()
    }

    pub fn player(&self, i: usize) -> &Policy {
        &self.players[i]
    }

    pub fn player_mut(&mut self, i: usize) -> &mut Policy {
        &mut self.players[i]
    }

    pub fn players(&self) -> &[Policy] {
        &self.players
    }

    /// Replaces player `i`'s policy, returning the new profile.
    pub fn with_player(&self, i: usize, policy: Policy) -> Self {
        let mut p = self.clone();
        p.players[i] = policy;
        p
    }

    /// Probability of joint action `joint` at state `s`.
    pub fn joint_prob(&self, game: &MarkovGame, s: usize, joint: usize) -> f64 {
        self.players
            .iter()
            .enumerate()
            .map(|(i, p)| p.state(s)[game.action_of(joint, i)])
            .product()
    }

    /// Euclidean distance over all entries of all players.
    pub fn distance(&self, other: &PolicyProfile) -> f64 {
        self.players
            .iter()
            .zip(&other.players)
            .map(|(a, b)| a.distance(b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Largest absolute entrywise difference.
    pub fn sup_distance(&self, other: &PolicyProfile) -> f64 {
        self.players
            .iter()
            .zip(&other.players)
            .flat_map(|(a, b)| {
                a.rows()
                    .iter()
                    .flatten()
                    .zip(b.rows().iter().flatten())
                    .map(|(x, y)| (x - y).abs())
            })
            .fold(0.0, f64::max)
    }

    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        if self.players.len() != game.num_players() {
            return Err(Error::ShapeMismatch {
                what: "profile players".into(),
                expected: game.num_players(),
                found: self.players.len(),
            });
        }
        for (i, policy) in self.players.iter().enumerate() {
            if policy.num_states() != game.num_states() {
                return Err(Error::ShapeMismatch {
                    what: format!("policy states of player {i}"),
                    expected: game.num_states(),
                    found: policy.num_states(),
                });
            }
            for s in 0..game.num_states() {
                check_simplex(policy.state(s), game.num_actions(i), SIMPLEX_TOL).map_err(
                    |reason| Error::InvalidPolicy {
                        player: i,
                        state: s,
                        reason,
                    },
                )?;
            }
        }
        Ok(())
    }
}

pub(crate) fn check_simplex(
    row: &[f64],
    len: usize,
    tol: f64,
) -> std::result::Result<(), String> {
    if row.len() != len {
        return Err(format!("length {} != {len}", row.len()));
    }
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(format!("entry {p} is negative or non-finite"));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > tol {
        return Err(format!("entries sum to {sum}"));
    }
    Ok(())
}

/// Every player plays uniformly at every state.
pub fn uniform_policy(game: &MarkovGame) -> PolicyProfile {
    PolicyProfile::new(
        game.actions()
            .iter()
            .map(|&a| Policy::uniform(game.num_states(), a))
            .collect(),
    )
}

/// Mixes the selected players' policies with the uniform distribution:
/// `(1 - theta) * pi_i(s) + theta / |A_i|`. Other players are unchanged.
pub fn mix_with_uniform(
    profile: &PolicyProfile,
    theta: f64,
    players: &[usize],
) -> Result<PolicyProfile> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie in [0, 1]",
        });
    }
    let mut out = profile.clone();
    for &i in players {
        if i >= out.num_players() {
            return Err(Error::PlayerOutOfRange {
                player: i,
                num_players: out.num_players(),
            });
        }
        mix_policy_in_place(out.player_mut(i), theta);
    }
    Ok(out)
}

pub(crate) fn mix_policy_in_place(policy: &mut Policy, theta: f64) {
    if theta == 0.0 {
        return;
    }
    let u = theta / policy.num_actions() as f64;
    for row in policy.probs.iter_mut() {
        for p in row.iter_mut() {
            *p = (1.0 - theta) * *p + u;
        }
    }
}

/// Serialized form of a game. Field names are part of the file format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSpecDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    /// Number of players.
    #[serde(rename = "N")]
    pub num_players: usize,
    /// Number of states.
    #[serde(rename = "S")]
    pub num_states: usize,
    /// Action count per player.
    #[serde(rename = "A")]
    pub actions: Vec<usize>,
    pub gamma: f64,
    pub mu: Vec<f64>,
    /// `rewards[player][state][joint_action]`.
    pub rewards: Vec<Vec<Vec<f64>>>,
    /// `transitions[state][joint_action][next_state]`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub known_equilibria: Vec<PolicyProfile>,
}

impl GameSpecDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("document serialization is infallible")
    }
}

fn flatten_checked(
    what: &str,
    table: &[Vec<Vec<f64>>],
    dims: [usize; 3],
) -> Result<Vec<f64>> {
    if table.len() != dims[0] {
        return Err(Error::ShapeMismatch {
            what: what.to_string(),
            expected: dims[0],
            found: table.len(),
        });
    }
    let mut out = Vec::with_capacity(dims.iter().product());
    for (x, mid) in table.iter().enumerate() {
        if mid.len() != dims[1] {
            return Err(Error::ShapeMismatch {
                what: format!("{what}[{x}]"),
                expected: dims[1],
                found: mid.len(),
            });
        }
        for (y, inner) in mid.iter().enumerate() {
            if inner.len() != dims[2] {
                return Err(Error::ShapeMismatch {
                    what: format!("{what}[{x}][{y}]"),
                    expected: dims[2],
                    found: inner.len(),
                });
            }
            out.extend_from_slice(inner);
        }
    }
    Ok(out)
}

/// Parses and validates a game document.
pub fn load_game(doc: &GameSpecDocument) -> Result<MarkovGame> {
    if doc.actions.len() != doc.num_players {
        return Err(Error::ShapeMismatch {
            what: "A".into(),
            expected: doc.num_players,
            found: doc.actions.len(),
        });
    }
    if doc.num_players == 0 {
        return Err(Error::EmptyCount { what: "players" });
    }
    if doc.num_states == 0 {
        return Err(Error::EmptyCount { what: "states" });
    }
    if doc.actions.contains(&0) {
        return Err(Error::EmptyCount { what: "actions" });
    }
    let joint: usize = doc.actions.iter().product();
    let rewards = flatten_checked(
        "rewards",
        &doc.rewards,
        [doc.num_players, doc.num_states, joint],
    )?;
    let transitions = flatten_checked(
        "transitions",
        &doc.transitions,
        [doc.num_states, joint, doc.num_states],
    )?;
    let game = MarkovGame::new(
        doc.num_states,
        doc.actions.clone(),
        rewards,
        transitions,
        doc.gamma,
        doc.mu.clone(),
    )?;
    for eq in &doc.known_equilibria {
        eq.validate(&game)?;
    }
    Ok(match &doc.name {
        Some(n) => game.with_name(n.clone()),
        None => game,
    })
}

/// Inverse of [`load_game`].
pub fn save_game(game: &MarkovGame) -> GameSpecDocument {
    let (n, s, j) = (game.num_players(), game.num_states(), game.num_joint_actions());
    let rewards = (0..n)
        .map(|i| (0..s).map(|x| game.reward_row(i, x).to_vec()).collect())
        .collect();
    let transitions = (0..s)
        .map(|x| (0..j).map(|a| game.transition_row(x, a).to_vec()).collect())
        .collect();
    GameSpecDocument {
        name: game.name().map(str::to_string),
        num_players: n,
        num_states: s,
        actions: game.actions().to_vec(),
        gamma: game.discount(),
        mu: game.initial().to_vec(),
        rewards,
        transitions,
        known_equilibria: Vec::new(),
    }
}
