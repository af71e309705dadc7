//! Euler integration of the best-response differential inclusion, the
//! potential decay check along it, the convergence-theorem constants and the
//! `Gamma(delta)` / `d*` geometry of approximate equilibria.

use std::io::{self, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{check_simplex, MarkovGame, Policy, PolicyProfile, SIMPLEX_TOL};
use crate::learner::theta_bound;
use crate::potential::Potential;
use crate::sampling::{random_profile, seeded_rng};
use crate::solver::{
    deterministic_profiles, nash_gap, occupancy, one_stage_br, player_value_and_q, OpponentMixing,
    TieRule,
};

/// Most deterministic profiles scanned when bounding `D` from below.
pub const ENUMERATION_LIMIT: u128 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowConfig {
    /// Euler step `h` in flow time.
    pub step: f64,
    /// Opponent exploration inside the inclusion.
    pub theta: f64,
    /// Per-state rates `gamma(s)`; `None` means all ones.
    pub rate_weights: Option<Vec<f64>>,
    pub eta: f64,
    /// Final flow time.
    pub horizon: f64,
    pub tie_rule: TieRule,
    /// Stop once the Nash gap is at or below this.
    pub stop_gap: Option<f64>,
    /// `delta` levels whose `NE(delta)` entry and exit are logged.
    pub ne_thresholds: Vec<f64>,
    /// Keep a policy snapshot every this many steps.
    pub snapshot_every: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step: 0.01,
            theta: 0.0,
            rate_weights: None,
            eta: 1.0,
            horizon: 50.0,
            tie_rule: TieRule::LowestIndex,
            stop_gap: None,
            ne_thresholds: vec![1e-4],
            snapshot_every: 100,
        }
    }
}

impl FlowConfig {
    pub fn weights(&self, num_states: usize) -> Vec<f64> {
        self.rate_weights
            .clone()
            .unwrap_or_else(|| vec![1.0; num_states])
    }

    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "step",
                value: self.step,
                reason: "must be positive",
            });
        }
        if !(self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "horizon",
                value: self.horizon,
                reason: "must be finite and non-negative",
            });
        }
        if self.snapshot_every == 0 {
            return Err(Error::InvalidParameter {
                name: "snapshot_every",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        check_rates(game, self.step, &self.weights(game.num_states()), self.eta, self.theta)
    }
}

fn check_rates(game: &MarkovGame, step: f64, weights: &[f64], eta: f64, theta: f64) -> Result<()> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "must lie in (0, 1]",
        });
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::InvalidParameter {
            name: "theta",
            value: theta,
            reason: "must lie in [0, 1]",
        });
    }
    if !(step >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "step",
            value: step,
            reason: "must be non-negative",
        });
    }
    if weights.len() != game.num_states() {
        return Err(Error::ShapeMismatch {
            what: "rate weights".into(),
            expected: game.num_states(),
            found: weights.len(),
        });
    }
    for &w in weights {
        if !(w >= eta - 1e-15 && w <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "rate weight",
                value: w,
                reason: "must lie in [eta, 1]",
            });
        }
        if step * w > 1.0 {
            return Err(Error::InvalidParameter {
                name: "step * rate weight",
                value: step * w,
                reason: "must not exceed 1",
            });
        }
    }
    Ok(())
}

/// Per-state rates drawn uniformly from `[eta, 1]`.
pub fn randomized_weights(num_states: usize, eta: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeded_rng(seed);
    (0..num_states)
        .map(|_| if eta < 1.0 { rng.random_range(eta..=1.0) } else { 1.0 })
        .collect()
}

/// The one-stage best responses selected at `profile`, one policy per player.
pub fn flow_direction(
    game: &MarkovGame,
    profile: &PolicyProfile,
    theta: f64,
    tie: TieRule,
) -> Result<Vec<Policy>> {
    let mixing = if theta > 0.0 {
        OpponentMixing::PerPlayer(theta)
    } else {
        OpponentMixing::None
    };
    (0..game.num_players())
        .map(|i| {
            let (_, q) = player_value_and_q(game, i, profile, mixing)?;
            Ok(Policy::from_rows(q.iter().map(|row| one_stage_br(row, tie)).collect()))
        })
        .collect()
}

/// One explicit Euler step `w' = w + h gamma(s) (br - w)`.
pub fn flow_step(game: &MarkovGame, profile: &PolicyProfile, config: &FlowConfig) -> Result<PolicyProfile> {
    let weights = config.weights(game.num_states());
    check_rates(game, config.step, &weights, config.eta, config.theta)?;
    profile.validate(game)?;
    let br = flow_direction(game, profile, config.theta, config.tie_rule)?;
    let mut next = profile.clone();
    for (i, bi) in br.iter().enumerate() {
        let pi = next.player_mut(i);
        for (s, &w) in weights.iter().enumerate() {
            let rate = config.step * w;
            for (p, b) in pi.state_mut(s).iter_mut().zip(bi.state(s)) {
                *p = (1.0 - rate) * *p + rate * b;
            }
        }
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeEventKind {
    Enter,
    Exit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeEvent {
    pub tau: f64,
    pub delta: f64,
    pub kind: NeEventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowRecord {
    pub tau: f64,
    pub nash_gap: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi_mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<PolicyProfile>,
}

/// A step that broke simplex preservation or the speed bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowViolation {
    pub tau: f64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowLog {
    pub step: f64,
    pub records: Vec<FlowRecord>,
    pub events: Vec<NeEvent>,
    pub violations: Vec<FlowViolation>,
    pub final_policy: PolicyProfile,
    /// Largest `||w' - w||_2 / h` seen.
    pub max_speed: f64,
}

impl FlowLog {
    pub fn taus(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.tau).collect()
    }

    pub fn gaps(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.nash_gap).collect()
    }

    pub fn phis(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.phi_mu).collect()
    }

    pub fn final_gap(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.nash_gap)
    }

    /// First flow time at which the gap is at most `delta`.
    pub fn first_time_within(&self, delta: f64) -> Option<f64> {
        self.records.iter().find(|r| r.nash_gap <= delta).map(|r| r.tau)
    }

    /// Writes one JSON object per record, tagged `"kind": "flow"`.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for r in &self.records {
            let mut v = serde_json::to_value(r)?;
            v.as_object_mut()
                .expect("record is an object")
                .insert("kind".into(), "flow".into());
            serde_json::to_writer(&mut out, &v)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Integrates the flow from `start` up to `config.horizon`.
pub fn run_flow(
    game: &MarkovGame,
    start: &PolicyProfile,
    config: &FlowConfig,
    potential: Option<&Potential>,
) -> Result<FlowLog> {
    config.validate(game)?;
    start.validate(game)?;
    let h = config.step;
    let steps = (config.horizon / h - 1e-9).ceil().max(0.0) as usize;
    let speed_bound = 2.0 * game.num_players() as f64 * (game.num_states() as f64).sqrt();

    let mut current = start.clone();
    let mut records = Vec::with_capacity(steps + 1);
    let mut events = Vec::new();
    let mut violations = Vec::new();
    let mut inside = vec![false; config.ne_thresholds.len()];
    let mut max_speed = 0.0f64;

    let mut observe = |tau: f64, profile: &PolicyProfile, k: usize, records: &mut Vec<FlowRecord>| -> Result<f64> {
        let gap = nash_gap(game, profile)?.epsilon;
        let phi_mu = potential.map(|p| p.aggregate(game, profile)).transpose()?;
        for (slot, &delta) in inside.iter_mut().zip(&config.ne_thresholds) {
            let now = gap <= delta;
            if now != *slot {
                events.push(NeEvent {
                    tau,
                    delta,
                    kind: if now { NeEventKind::Enter } else { NeEventKind::Exit },
                });
                *slot = now;
            }
        }
        let policy = (k.is_multiple_of(config.snapshot_every) || k == steps).then(|| profile.clone());
        records.push(FlowRecord {
            tau,
            nash_gap: gap,
            phi_mu,
            policy,
        });
        Ok(gap)
    };

    let mut gap = observe(0.0, &current, 0, &mut records)?;
    for k in 1..=steps {
        if config.stop_gap.is_some_and(|g| gap <= g) {
            break;
        }
        let next = flow_step(game, &current, config)?;
        let tau = k as f64 * h;
        let moved = next.distance(&current);
        max_speed = max_speed.max(moved / h);
        if moved > h * speed_bound + 1e-12 {
            violations.push(FlowViolation {
                tau,
                what: format!("step length {moved} exceeds {}", h * speed_bound),
            });
        }
        for (i, p) in next.players().iter().enumerate() {
            for (s, row) in p.rows().iter().enumerate() {
                if let Err(e) = check_simplex(row, game.num_actions(i), SIMPLEX_TOL) {
                    violations.push(FlowViolation {
                        tau,
                        what: format!("player {i} state {s}: {e}"),
                    });
                }
            }
        }
        current = next;
        gap = observe(tau, &current, k, &mut records)?;
    }
    if let Some(last) = records.last_mut() {
        last.policy.get_or_insert_with(|| current.clone());
    }
    Ok(FlowLog {
        step: h,
        records,
        events,
        violations,
        final_policy: current,
        max_speed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayViolation {
    pub tau_start: f64,
    pub tau_end: f64,
    pub nash_gap: f64,
    pub increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayReport {
    pub gap_threshold: f64,
    pub slack: f64,
    pub intervals_checked: usize,
    pub violations: Vec<DecayViolation>,
    /// Most negative potential increment over checked intervals.
    pub worst_increment: f64,
}

impl DecayReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the potential does not drop by more than `slack` per step
/// while the Nash gap exceeds `gap_threshold`.
pub fn check_phi_decay_above(log: &FlowLog, gap_threshold: f64, slack: f64) -> Result<DecayReport> {
    let phis = log
        .phis()
        .ok_or_else(|| Error::GridMismatch("log carries no potential series".into()))?;
    let taus = log.taus();
    let gaps = log.gaps();
    if phis.len() != taus.len() || gaps.len() != taus.len() {
        return Err(Error::GridMismatch(format!(
            "series lengths {} / {} / {}",
            taus.len(),
            phis.len(),
            gaps.len()
        )));
    }
    if let Some(w) = taus.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::GridMismatch(format!(
            "tau not increasing: {} then {}",
            w[0], w[1]
        )));
    }
    let mut violations = Vec::new();
    let mut checked = 0;
    let mut worst = f64::INFINITY;
    for k in 0..taus.len().saturating_sub(1) {
        if gaps[k] <= gap_threshold {
            continue;
        }
        checked += 1;
        let inc = phis[k + 1] - phis[k];
        worst = worst.min(inc);
        if inc < -slack {
            violations.push(DecayViolation {
                tau_start: taus[k],
                tau_end: taus[k + 1],
                nash_gap: gaps[k],
                increment: inc,
            });
        }
    }
    Ok(DecayReport {
        gap_threshold,
        slack,
        intervals_checked: checked,
        violations,
        worst_increment: if checked == 0 { 0.0 } else { worst },
    })
}

/// Decay check with the threshold `Theta (kappa + lambda)`.
pub fn check_phi_decay(
    log: &FlowLog,
    kappa: f64,
    lambda: f64,
    constants: &TheoremConstants,
    slack: f64,
) -> Result<DecayReport> {
    check_phi_decay_above(log, constants.theta_cap * (kappa + lambda), slack)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// Largest sampled or enumerated `(1/(1-gamma)) ||d/mu||_inf`.
    pub d_lower: f64,
    /// Same statistic over the random samples only.
    pub d_lower_sampled: f64,
    /// `1/((1-gamma) min mu)`, absent when `mu` has a zero entry.
    pub d_upper: Option<f64>,
    /// Whether every deterministic profile was included in `d_lower`.
    pub enumerated: bool,
    /// The `D` used for `theta_cap` and `theta_max`.
    pub d: f64,
    pub eta: f64,
    pub lambda: f64,
    /// `D N sqrt(2|S|) / eta`.
    pub theta_cap: f64,
    pub theta_max: f64,
    pub theta_max_clipped: bool,
    pub full_support: bool,
}

fn ratio_statistic(game: &MarkovGame, profile: &PolicyProfile) -> Result<f64> {
    let d = occupancy(game, profile)?;
    let worst = d
        .d
        .iter()
        .zip(game.initial())
        .map(|(&x, &m)| {
            if m > 0.0 {
                x / m
            } else if x > 1e-15 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0f64, f64::max);
    Ok(worst / (1.0 - game.discount()))
}

/// Estimates `D` and derives `Theta` and the exploration cap.
pub fn theorem_constants(
    game: &MarkovGame,
    eta: f64,
    lambda: f64,
    policy_samples: usize,
    seed: u64,
) -> Result<TheoremConstants> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "must lie in (0, 1]",
        });
    }
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
            reason: "must be positive",
        });
    }
    let mut rng = seeded_rng(seed);
    let mut sampled = 0.0f64;
    for _ in 0..policy_samples {
        sampled = sampled.max(ratio_statistic(game, &random_profile(&mut rng, game))?);
    }
    let mut lower = sampled;
    let enumerated = match deterministic_profiles(game, ENUMERATION_LIMIT) {
        Ok(all) => {
            for p in &all {
                lower = lower.max(ratio_statistic(game, p)?);
            }
            true
        }
        Err(Error::TooLarge { .. }) => false,
        Err(e) => return Err(e),
    };
    let g = game.discount();
    let full_support = game.has_full_support();
    let d_upper = full_support.then(|| {
        let min_mu = game.initial().iter().copied().fold(f64::INFINITY, f64::min);
        1.0 / ((1.0 - g) * min_mu)
    });
    let d = d_upper.unwrap_or(lower);
    let n = game.num_players() as f64;
    let theta_cap = d * n * (2.0 * game.num_states() as f64).sqrt() / eta;
    let tb = theta_bound(game, lambda, d)?;
    Ok(TheoremConstants {
        d_lower: lower,
        d_lower_sampled: sampled,
        d_upper,
        enumerated,
        d,
        eta,
        lambda,
        theta_cap,
        theta_max: tb.value,
        theta_max_clipped: tb.clipped,
        full_support,
    })
}

/// Finite set of joint profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyGrid {
    /// Mesh spacing, when built as a simplex mesh.
    pub spacing: Option<f64>,
    pub profiles: Vec<PolicyProfile>,
}

/// Points of the `k`-simplex with coordinates in multiples of `1/m`.
fn simplex_points(k: usize, m: usize) -> Vec<Vec<f64>> {
    fn rec(k: usize, left: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == k {
            cur.push(left);
            out.push(cur.iter().map(|&c| c as f64 / m as f64).collect());
            cur.pop();
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(k, left - c, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k, m, m, &mut Vec::with_capacity(k), &mut out);
    out
}

fn binomial(n: u128, k: u128) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) / (i + 1))
}

impl PolicyGrid {
    pub const DEFAULT_LIMIT: u128 = 1 << 20;

    pub fn from_profiles(profiles: Vec<PolicyProfile>) -> Self {
        Self {
            spacing: None,
            profiles,
        }
    }

    /// Product over players and states of the simplex mesh with the given
    /// spacing (which must divide 1).
    pub fn simplex_mesh(game: &MarkovGame, spacing: f64) -> Result<Self> {
        Self::simplex_mesh_limited(game, spacing, Self::DEFAULT_LIMIT)
    }

    pub fn simplex_mesh_limited(game: &MarkovGame, spacing: f64, limit: u128) -> Result<Self> {
        let m = (1.0 / spacing).round();
        if !(spacing > 0.0 && spacing <= 1.0) || (m * spacing - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter {
                name: "spacing",
                value: spacing,
                reason: "must be 1/m for a positive integer m",
            });
        }
        let m = m as usize;
        let ns = game.num_states();
        let mut count: u128 = 1;
        for &k in game.actions() {
            let per = binomial((m + k - 1) as u128, (k - 1) as u128);
            for _ in 0..ns {
                count = count.saturating_mul(per);
            }
        }
        if count > limit {
            return Err(Error::TooLarge { count, limit });
        }
        // slot list: (player, state); each slot chooses one simplex point
        let points: Vec<Vec<Vec<f64>>> = game.actions().iter().map(|&k| simplex_points(k, m)).collect();
        let slots: Vec<usize> = (0..game.num_players())
            .flat_map(|i| std::iter::repeat_n(i, ns))
            .collect();
        let mut idx = vec![0usize; slots.len()];
        let mut profiles = Vec::with_capacity(count as usize);
        loop {
            let players = (0..game.num_players())
                .map(|i| {
                    Policy::from_rows(
                        (0..ns)
                            .map(|s| points[i][idx[i * ns + s]].clone())
                            .collect(),
                    )
                })
                .collect();
            profiles.push(PolicyProfile::new(players));
            let mut p = 0;
            loop {
                if p == idx.len() {
                    return Ok(Self {
                        spacing: Some(spacing),
                        profiles,
                    });
                }
                idx[p] += 1;
                if idx[p] < points[slots[p]].len() {
                    break;
                }
                idx[p] = 0;
                p += 1;
            }
        }
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub delta: f64,
    /// Max over grid points in `NE(delta)` of the distance to the nearest
    /// listed equilibrium; zero when no grid point qualifies.
    pub gamma_hat: f64,
    pub members: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaReport {
    pub entries: Vec<GammaEntry>,
    /// Smallest pairwise distance between listed equilibria; infinite for a
    /// single equilibrium (serialized as `null`).
    pub d_star: f64,
    pub grid_size: usize,
    pub spacing: Option<f64>,
    /// Gap tolerance added to each `delta` when testing membership.
    pub membership_tol: f64,
}

/// Gap tolerance used for `NE(delta)` membership on the grid.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Grid estimate of `Gamma(delta)` for each `delta`, and `d*`.
pub fn gamma_of_delta(
    game: &MarkovGame,
    deltas: &[f64],
    ne_zero: &[PolicyProfile],
    grid: &PolicyGrid,
) -> Result<GammaReport> {
    if grid.is_empty() {
        return Err(Error::Empty("grid"));
    }
    if ne_zero.is_empty() {
        return Err(Error::Empty("equilibrium list"));
    }
    for p in ne_zero {
        p.validate(game)?;
    }
    let mut scored = Vec::with_capacity(grid.len());
    for p in &grid.profiles {
        let gap = nash_gap(game, p)?.epsilon;
        let dist = ne_zero
            .iter()
            .map(|e| p.distance(e))
            .fold(f64::INFINITY, f64::min);
        scored.push((gap, dist));
    }
    let entries = deltas
        .iter()
        .map(|&delta| {
            let members: Vec<f64> = scored
                .iter()
                .filter(|(g, _)| *g <= delta + MEMBERSHIP_TOL)
                .map(|&(_, d)| d)
                .collect();
            GammaEntry {
                delta,
                gamma_hat: members.iter().copied().fold(0.0, f64::max),
                members: members.len(),
            }
        })
        .collect();
    let mut d_star = f64::INFINITY;
    for (k, a) in ne_zero.iter().enumerate() {
        for b in &ne_zero[k + 1..] {
            d_star = d_star.min(a.distance(b));
        }
    }
    Ok(GammaReport {
        entries,
        d_star,
        grid_size: grid.len(),
        spacing: grid.spacing,
        membership_tol: MEMBERSHIP_TOL,
    })
}
