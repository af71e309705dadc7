//! Markov near-potential functions and their closeness certificates.
//!
//! A near-potential `Phi(s, pi)` tracks every player's unilateral value change
//! up to `kappa * ||pi_i' - pi_i||_2`. The zero function always works with
//! `kappa = r_max / (1 - gamma)^2`; in identical-interest games the common
//! value function is an exact potential (`kappa = 0`).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{MarkovGame, Policy, PolicyProfile};
use crate::sampling::{random_feasible_direction, random_policy, random_profile, seeded_rng};
use crate::solver::{
    deterministic_profiles, nash_gap, opponent_weights, policy_value, InducedMdp,
    OpponentMixing, SolverOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Zero,
    IdenticalInterest,
    Custom,
}

impl fmt::Display for PotentialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            PotentialKind::Zero => "zero",
            PotentialKind::IdenticalInterest => "identical_interest",
            PotentialKind::Custom => "custom",
        };
        f.write_str(s)
    }
}

pub type PotentialFn = dyn Fn(&MarkovGame, &PolicyProfile) -> Result<Vec<f64>> + Send + Sync;

#[derive(Clone)]
enum Evaluator {
    Zero,
    CommonValue,
    Custom(Arc<PotentialFn>),
    Scaled(f64, Box<Potential>),
}

/// Evaluator for `Phi(s, pi)` with a declared bound on `|Phi|`.
#[derive(Clone)]
pub struct Potential {
    kind: PotentialKind,
    evaluator: Evaluator,
    bound: f64,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("kind", &self.kind)
            .field("bound", &self.bound)
            .finish()
    }
}

impl Potential {
    pub fn zero() -> Self {
        Self {
            kind: PotentialKind::Zero,
            evaluator: Evaluator::Zero,
            bound: 0.0,
        }
    }

    /// `Phi(s, pi) = V_0(s, pi)`; only meaningful for identical-interest games.
    pub fn common_value(game: &MarkovGame) -> Self {
        Self {
            kind: PotentialKind::IdenticalInterest,
            evaluator: Evaluator::CommonValue,
            bound: game.r_max() / (1.0 - game.discount()),
        }
    }

    /// A user-supplied rule returning `Phi(s, pi)` for every state.
    pub fn custom<F>(bound: f64, f: F) -> Self
    where
        F: Fn(&MarkovGame, &PolicyProfile) -> Result<Vec<f64>> + Send + Sync + 'static,
    {
        Self {
            kind: PotentialKind::Custom,
            evaluator: Evaluator::Custom(Arc::new(f)),
            bound,
        }
    }

    /// `c * Phi`. Reported as a custom potential.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            kind: PotentialKind::Custom,
            evaluator: Evaluator::Scaled(c, Box::new(self.clone())),
            bound: c.abs() * self.bound,
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    pub fn kind(&self) -> PotentialKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    /// `Phi(s, pi)` for every state.
    pub fn per_state(&self, game: &MarkovGame, profile: &PolicyProfile) -> Result<Vec<f64>> {
        match &self.evaluator {
            Evaluator::Zero => Ok(vec![0.0; game.num_states()]),
            Evaluator::CommonValue => Ok(policy_value(game, profile)?.values.swap_remove(0)),
            Evaluator::Custom(f) => f(game, profile),
            Evaluator::Scaled(c, inner) => Ok(inner
                .per_state(game, profile)?
                .into_iter()
                .map(|x| c * x)
                .collect()),
        }
    }

    /// `Phi(mu, pi) = sum_s mu(s) Phi(s, pi)`.
    pub fn aggregate(&self, game: &MarkovGame, profile: &PolicyProfile) -> Result<f64> {
        Ok(game
            .initial()
            .iter()
            .zip(self.per_state(game, profile)?)
            .map(|(m, x)| m * x)
            .sum())
    }
}

/// A sampled deviation that attains the largest ratio seen so far.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaWitness {
    pub player: usize,
    pub state: usize,
    pub profile: PolicyProfile,
    pub deviation: Policy,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaEstimate {
    /// Largest observed `|dPhi(s) - dV_i(s)| / ||pi_i' - pi_i||_2`.
    pub kappa_lower: f64,
    /// Analytic certificate, when the potential kind has one.
    pub certified_upper: Option<f64>,
    pub num_samples: usize,
    /// Largest observed `|dPhi(s) - dV_i(s)|` (no normalization).
    pub max_abs_difference: f64,
    pub witness: Option<KappaWitness>,
}

impl KappaEstimate {
    fn certificate(upper: f64) -> Self {
        Self {
            kappa_lower: 0.0,
            certified_upper: Some(upper),
            num_samples: 0,
            max_abs_difference: 0.0,
            witness: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CertifiedPotential {
    pub potential: Potential,
    pub kappa: KappaEstimate,
}

/// `Phi = 0` with certificate `r_max / (1 - gamma)^2`.
///
/// Against the 2-norm of the deviation this constant holds only up to a
/// factor `sqrt(|A_i|)`; two-action games can reach `sqrt(2)` times it.
pub fn zero_mnpf(game: &MarkovGame) -> CertifiedPotential {
    let g = game.discount();
    CertifiedPotential {
        potential: Potential::zero(),
        kappa: KappaEstimate::certificate(game.r_max() / (1.0 - g).powi(2)),
    }
}

/// Common value function of an identical-interest game, certified `kappa = 0`.
pub fn identical_interest_potential(game: &MarkovGame) -> Result<CertifiedPotential> {
    if let Some((player, state, joint_action)) = game.first_reward_mismatch() {
        return Err(Error::RewardsNotIdentical {
            player,
            state,
            joint_action,
        });
    }
    Ok(CertifiedPotential {
        potential: Potential::common_value(game),
        kappa: KappaEstimate::certificate(0.0),
    })
}

/// One unilateral deviation `pi_i -> pi_i'` evaluated at every state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationSample {
    pub player: usize,
    /// `(Phi(s, pi') - Phi(s, pi)) - (V_i(s, pi') - V_i(s, pi))` per state.
    pub differences: Vec<f64>,
    pub norm: f64,
    /// State with the largest `|difference|`.
    pub worst_state: usize,
    pub ratio: f64,
}

/// Deviation difference of player `i` switching to `alt` in `profile`.
pub fn deviation_ratio(
    game: &MarkovGame,
    potential: &Potential,
    i: usize,
    profile: &PolicyProfile,
    alt: &Policy,
) -> Result<DeviationSample> {
    game.check_player(i)?;
    let deviated = profile.with_player(i, alt.clone());
    deviated.validate(game)?;
    let w = opponent_weights(game, profile, i, OpponentMixing::None);
    let mdp = InducedMdp::for_player(game, i, &w);
    let v0 = mdp.evaluate(profile.player(i))?;
    let v1 = mdp.evaluate(alt)?;
    let p0 = potential.per_state(game, profile)?;
    let p1 = potential.per_state(game, &deviated)?;
    let differences: Vec<f64> = (0..game.num_states())
        .map(|s| (p1[s] - p0[s]) - (v1[s] - v0[s]))
        .collect();
    let norm = profile.player(i).distance(alt);
    let (worst_state, worst) = differences
        .iter()
        .enumerate()
        .map(|(s, d)| (s, d.abs()))
        .fold((0, f64::NEG_INFINITY), |acc, x| if x.1 > acc.1 { x } else { acc });
    let ratio = if norm > 0.0 { worst / norm } else { 0.0 };
    Ok(DeviationSample {
        player: i,
        differences,
        norm,
        worst_state,
        ratio,
    })
}

/// Sampled lower bound on the smallest valid closeness parameter of `potential`.
///
/// Each sample draws a player, a profile and a deviation with Dirichlet(1)
/// rows, and scores the worst state. Samples come from one seeded stream,
/// so a run with more samples extends a run with fewer.
pub fn estimate_kappa(
    game: &MarkovGame,
    potential: &Potential,
    num_samples: usize,
    seed: u64,
) -> Result<KappaEstimate> {
    use rand::Rng;
    if num_samples == 0 {
        return Err(Error::Empty("num_samples"));
    }
    let mut rng = seeded_rng(seed);
    let mut est = KappaEstimate {
        kappa_lower: 0.0,
        certified_upper: None,
        num_samples,
        max_abs_difference: 0.0,
        witness: None,
    };
    for _ in 0..num_samples {
        let i = rng.random_range(0..game.num_players());
        let profile = random_profile(&mut rng, game);
        if game.num_actions(i) == 1 {
            // no unilateral deviation exists
            continue;
        }
        let alt = loop {
            let alt = random_policy(&mut rng, game.num_states(), game.num_actions(i));
            if profile.player(i).distance(&alt) > 1e-8 {
                break alt;
            }
        };
        let sample = deviation_ratio(game, potential, i, &profile, &alt)?;
        let abs = sample.differences[sample.worst_state].abs();
        est.max_abs_difference = est.max_abs_difference.max(abs);
        if est.witness.is_none() || sample.ratio > est.kappa_lower {
            est.kappa_lower = sample.ratio;
            est.witness = Some(KappaWitness {
                player: i,
                state: sample.worst_state,
                profile,
                deviation: alt,
                ratio: sample.ratio,
            });
        }
    }
    est.certified_upper = match potential.kind() {
        PotentialKind::Zero => Some(zero_mnpf(game).kappa.certified_upper.unwrap_or(0.0)),
        PotentialKind::IdenticalInterest if game.is_identical_interest() => Some(0.0),
        _ => None,
    };
    Ok(est)
}

/// Upper bound on the alpha of the associated Markov alpha-potential game.
pub fn alpha_from_kappa(kappa: f64, num_states: usize) -> Result<f64> {
    if !(kappa >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "kappa",
            value: kappa,
            reason: "must be nonnegative",
        });
    }
    if num_states == 0 {
        return Err(Error::EmptyCount { what: "states" });
    }
    Ok(kappa * (2.0 * num_states as f64).sqrt())
}

/// Joint-action optimum of player `i`'s reward: a deterministic profile and
/// its per-state value. In identical-interest games this maximizes the
/// common value at every state simultaneously.
pub fn joint_optimum(game: &MarkovGame, i: usize, opts: &SolverOptions) -> Result<(PolicyProfile, Vec<f64>)> {
    game.check_player(i)?;
    let mdp = InducedMdp::joint(game, i);
    let (_, greedy, _) = mdp.value_iteration(opts.vi_tol, opts.max_iterations);
    let players = (0..game.num_players())
        .map(|k| {
            let choice: Vec<usize> = greedy.iter().map(|&j| game.action_of(j, k)).collect();
            Policy::deterministic(&choice, game.num_actions(k))
        })
        .collect();
    let profile = PolicyProfile::new(players);
    let values = policy_value(game, &profile)?.values.swap_remove(i);
    Ok((profile, values))
}

/// Source of `sup_pi Phi(s, pi)` for the approximate-maximizer check.
#[derive(Debug, Clone, PartialEq)]
pub enum MaximizerOracle {
    /// Exact closed form for zero and identical-interest potentials.
    Auto,
    /// Maximum over all deterministic profiles: a lower bound on the sup.
    Enumeration { limit: u128 },
    Given { sup: Vec<f64>, exact: bool },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxMaximizerReport {
    pub sup: Vec<f64>,
    pub phi: Vec<f64>,
    /// `sup_s - Phi(s, pi*)` per state.
    pub shortfall: Vec<f64>,
    pub violating_states: Vec<usize>,
    pub hypothesis_holds: bool,
    pub oracle_exact: bool,
    /// `kappa sqrt(2|S|) + eps`.
    pub implied_bound: f64,
    pub measured_gap: f64,
    /// Present when the hypothesis holds and the oracle is exact.
    pub bound_respected: Option<bool>,
}

/// Checks whether `pi*` is an `eps`-maximizer of `Phi` at every state and, if
/// so, compares its Nash gap with `kappa sqrt(2|S|) + eps`.
pub fn check_approx_maximizer(
    game: &MarkovGame,
    potential: &Potential,
    kappa: f64,
    candidate: &PolicyProfile,
    eps: f64,
    oracle: &MaximizerOracle,
) -> Result<ApproxMaximizerReport> {
    let opts = SolverOptions::default();
    let (sup, oracle_exact) = match oracle {
        MaximizerOracle::Auto => match potential.kind() {
            PotentialKind::Zero => (vec![0.0; game.num_states()], true),
            PotentialKind::IdenticalInterest if game.is_identical_interest() => {
                (joint_optimum(game, 0, &opts)?.1, true)
            }
            kind => return Err(Error::OracleUnavailable(kind.to_string())),
        },
        MaximizerOracle::Enumeration { limit } => {
            let mut sup = vec![f64::NEG_INFINITY; game.num_states()];
            for p in deterministic_profiles(game, *limit)? {
                for (m, x) in sup.iter_mut().zip(potential.per_state(game, &p)?) {
                    *m = m.max(x);
                }
            }
            (sup, false)
        }
        MaximizerOracle::Given { sup, exact } => {
            if sup.len() != game.num_states() {
                return Err(Error::ShapeMismatch {
                    what: "oracle sup".into(),
                    expected: game.num_states(),
                    found: sup.len(),
                });
            }
            (sup.clone(), *exact)
        }
    };
    let phi = potential.per_state(game, candidate)?;
    let shortfall: Vec<f64> = sup.iter().zip(&phi).map(|(m, p)| m - p).collect();
    let tol = opts.vi_tol * 10.0;
    let violating_states: Vec<usize> = shortfall
        .iter()
        .enumerate()
        .filter(|(_, d)| **d > eps + tol)
        .map(|(s, _)| s)
        .collect();
    let hypothesis_holds = violating_states.is_empty();
    let implied_bound = alpha_from_kappa(kappa, game.num_states())? + eps;
    let measured_gap = nash_gap(game, candidate)?.epsilon;
    let bound_respected = (hypothesis_holds && oracle_exact)
        .then_some(measured_gap <= implied_bound + opts.nash_tol);
    Ok(ApproxMaximizerReport {
        sup,
        phi,
        shortfall,
        violating_states,
        hypothesis_holds,
        oracle_exact,
        implied_bound,
        measured_gap,
        bound_respected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalStep {
    pub h: f64,
    pub phi_derivative: f64,
    pub value_derivative: f64,
    pub gap: f64,
    /// `10 h ||v|| r_max / (1 - gamma)^3`.
    pub slack: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalReport {
    pub player: usize,
    pub direction_norm: f64,
    pub kappa: f64,
    pub steps: Vec<DirectionalStep>,
    /// Richardson extrapolation of the signed derivative gap to `h -> 0`.
    pub extrapolated_gap: f64,
    pub holds: bool,
}

pub const DEFAULT_FD_STEPS: [f64; 3] = [1e-2, 1e-3, 1e-4];

fn shifted(policy: &Policy, v: &[f64], h: f64) -> Policy {
    let k = policy.num_actions();
    Policy::from_rows(
        policy
            .rows()
            .iter()
            .enumerate()
            .map(|(s, row)| row.iter().enumerate().map(|(a, p)| p + h * v[s * k + a]).collect())
            .collect(),
    )
}

/// Central finite differences of `Phi(mu, .)` and `V_i(mu, .)` along `v` in
/// player `i`'s policy, compared with `kappa ||v||_2`.
pub fn directional_derivative_check(
    game: &MarkovGame,
    potential: &Potential,
    kappa: f64,
    i: usize,
    profile: &PolicyProfile,
    direction: &[f64],
    steps: &[f64],
) -> Result<DirectionalReport> {
    game.check_player(i)?;
    profile.validate(game)?;
    if steps.is_empty() {
        return Err(Error::Empty("h_list"));
    }
    let k = game.num_actions(i);
    let expected = game.num_states() * k;
    if direction.len() != expected {
        return Err(Error::ShapeMismatch {
            what: "direction".into(),
            expected,
            found: direction.len(),
        });
    }
    for s in 0..game.num_states() {
        let sum: f64 = direction[s * k..][..k].iter().sum();
        if sum.abs() > 1e-12 {
            return Err(Error::InvalidParameter {
                name: "direction",
                value: sum,
                reason: "must sum to zero at every state",
            });
        }
    }
    let base = profile.player(i);
    for &h in steps {
        for sign in [1.0, -1.0] {
            for s in 0..game.num_states() {
                for a in 0..k {
                    let x = base.state(s)[a] + sign * h * direction[s * k + a];
                    if !(-1e-15..=1.0 + 1e-15).contains(&x) {
                        return Err(Error::InfeasibleDirection {
                            state: s,
                            action: a,
                            step: sign * h,
                        });
                    }
                }
            }
        }
    }
    let w = opponent_weights(game, profile, i, OpponentMixing::None);
    let mdp = InducedMdp::for_player(game, i, &w);
    let mu = game.initial();
    let value_mu = |p: &Policy| -> Result<f64> {
        Ok(mdp.evaluate(p)?.iter().zip(mu).map(|(v, m)| v * m).sum())
    };
    let norm = direction.iter().map(|x| x * x).sum::<f64>().sqrt();
    let g = game.discount();
    let mut out = Vec::with_capacity(steps.len());
    for &h in steps {
        let plus = shifted(base, direction, h);
        let minus = shifted(base, direction, -h);
        let phi_derivative = (potential.aggregate(game, &profile.with_player(i, plus.clone()))?
            - potential.aggregate(game, &profile.with_player(i, minus.clone()))?)
            / (2.0 * h);
        let value_derivative = (value_mu(&plus)? - value_mu(&minus)?) / (2.0 * h);
        let gap = (phi_derivative - value_derivative).abs();
        let slack = 10.0 * h * norm * game.r_max() / (1.0 - g).powi(3);
        out.push(DirectionalStep {
            h,
            phi_derivative,
            value_derivative,
            gap,
            slack,
            holds: gap <= kappa * norm + slack + 1e-12,
        });
    }
    let mut by_h: Vec<&DirectionalStep> = out.iter().collect();
    by_h.sort_by(|a, b| a.h.total_cmp(&b.h));
    let signed = |s: &DirectionalStep| s.phi_derivative - s.value_derivative;
    let extrapolated_gap = match by_h.as_slice() {
        [fine, coarse, ..] if coarse.h > fine.h => {
            let r2 = (coarse.h / fine.h).powi(2);
            ((r2 * signed(fine) - signed(coarse)) / (r2 - 1.0)).abs()
        }
        [only, ..] => signed(only).abs(),
        [] => 0.0,
    };
    let holds = out.iter().all(|s| s.holds);
    Ok(DirectionalReport {
        player: i,
        direction_norm: norm,
        kappa,
        steps: out,
        extrapolated_gap,
        holds,
    })
}

/// Sampled estimate of the Lipschitz constant of `Phi(mu, .)` over nearby
/// profile pairs. This is an estimate, not a bound.
pub fn estimate_lipschitz(
    game: &MarkovGame,
    potential: &Potential,
    num_samples: usize,
    step: f64,
    seed: u64,
) -> Result<f64> {
    if num_samples == 0 {
        return Err(Error::Empty("num_samples"));
    }
    let mut rng = seeded_rng(seed);
    let mut best = 0.0f64;
    for _ in 0..num_samples {
        let p = random_profile(&mut rng, game);
        let moved = PolicyProfile::new(
            p.players()
                .iter()
                .map(|pol| {
                    let v = random_feasible_direction(&mut rng, pol, step);
                    shifted(pol, &v, step)
                })
                .collect(),
        );
        let dist = p.distance(&moved);
        if dist <= 1e-12 {
            continue;
        }
        let diff = (potential.aggregate(game, &moved)? - potential.aggregate(game, &p)?).abs();
        best = best.max(diff / dist);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{load_game, uniform_policy, GameSpecDocument};
    use crate::generators::{make_random_game, make_team_game, GameShape};

    fn single_state(r: [f64; 2], gamma: f64) -> MarkovGame {
        load_game(&GameSpecDocument {
            name: None,
            num_players: 1,
            num_states: 1,
            actions: vec![2],
            gamma,
            mu: vec![1.0],
            rewards: vec![vec![r.to_vec()]],
            transitions: vec![vec![vec![1.0], vec![1.0]]],
            known_equilibria: vec![],
        })
        .unwrap()
    }

    #[test]
    fn zero_certificates() {
        let c = zero_mnpf(&single_state([1.0, 0.0], 0.5));
        assert_eq!(c.kappa.certified_upper, Some(4.0));
        let c = zero_mnpf(&single_state([0.0, 0.0], 0.5));
        assert_eq!(c.kappa.certified_upper, Some(0.0));
        let c = zero_mnpf(&single_state([2.0, -1.0], 0.9));
        assert!((c.kappa.certified_upper.unwrap() - 200.0).abs() < 1e-9);
    }

    #[test]
    fn identical_interest_preconditions() {
        let team = make_team_game(3, GameShape::new(2, 2, 2)).unwrap();
        assert_eq!(
            identical_interest_potential(&team).unwrap().kappa.certified_upper,
            Some(0.0)
        );
        let other = make_random_game(3, GameShape::new(2, 2, 2)).unwrap();
        assert!(matches!(
            identical_interest_potential(&other),
            Err(Error::RewardsNotIdentical { player: 1, .. })
        ));
        let solo = single_state([1.0, 0.0], 0.5);
        let c = identical_interest_potential(&solo).unwrap();
        let p = uniform_policy(&solo);
        let v = policy_value(&solo, &p).unwrap().values[0].clone();
        assert_eq!(c.potential.per_state(&solo, &p).unwrap(), v);
    }

    #[test]
    fn vertex_deviation_ratio_is_sqrt_two() {
        // V(a) = 2, V(b) = 0 with Phi = 0
        let g = single_state([1.0, 0.0], 0.5);
        let from = PolicyProfile::new(vec![Policy::deterministic(&[0], 2)]);
        let to = Policy::deterministic(&[1], 2);
        let d = deviation_ratio(&g, &Potential::zero(), 0, &from, &to).unwrap();
        assert!((d.ratio - 2f64.sqrt()).abs() < 1e-12);
        assert!(d.ratio <= 4.0);
    }

    #[test]
    fn kappa_requires_samples() {
        let g = single_state([1.0, 0.0], 0.5);
        assert_eq!(
            estimate_kappa(&g, &Potential::zero(), 0, 1),
            Err(Error::Empty("num_samples"))
        );
    }

    #[test]
    fn alpha_values() {
        assert_eq!(alpha_from_kappa(0.0, 3).unwrap(), 0.0);
        assert!((alpha_from_kappa(1.0, 2).unwrap() - 2.0).abs() < 1e-15);
        assert!((alpha_from_kappa(4.0, 8).unwrap() - 16.0).abs() < 1e-12);
        assert!(alpha_from_kappa(-1.0, 2).is_err());
    }

    #[test]
    fn custom_potential_has_no_auto_oracle() {
        let g = single_state([1.0, 0.0], 0.5);
        let phi = Potential::custom(1.0, |g, _| Ok(vec![0.5; g.num_states()]));
        let r = check_approx_maximizer(&g, &phi, 0.0, &uniform_policy(&g), 0.0, &MaximizerOracle::Auto);
        assert!(matches!(r, Err(Error::OracleUnavailable(_))));
        let r = check_approx_maximizer(
            &g,
            &phi,
            0.0,
            &uniform_policy(&g),
            0.0,
            &MaximizerOracle::Enumeration { limit: 16 },
        )
        .unwrap();
        assert!(!r.oracle_exact);
        assert_eq!(r.bound_respected, None);
    }

    #[test]
    fn approx_maximizer_failure_lists_states() {
        let g = make_team_game(2, GameShape::new(3, 2, 2)).unwrap();
        let c = identical_interest_potential(&g).unwrap();
        let r = check_approx_maximizer(&g, &c.potential, 0.0, &uniform_policy(&g), 0.0, &MaximizerOracle::Auto)
            .unwrap();
        assert!(!r.hypothesis_holds);
        assert!(!r.violating_states.is_empty());
        assert_eq!(r.bound_respected, None);
    }

    #[test]
    fn zero_direction_has_zero_gap() {
        let g = make_team_game(2, GameShape::new(2, 2, 2)).unwrap();
        let c = identical_interest_potential(&g).unwrap();
        let r = directional_derivative_check(
            &g,
            &c.potential,
            0.0,
            0,
            &uniform_policy(&g),
            &[0.0; 4],
            &DEFAULT_FD_STEPS,
        )
        .unwrap();
        assert_eq!(r.extrapolated_gap, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn infeasible_direction_detected() {
        let g = make_team_game(2, GameShape::new(1, 2, 2)).unwrap();
        let p = PolicyProfile::new(vec![
            Policy::deterministic(&[0], 2),
            Policy::uniform(1, 2),
        ]);
        let r = directional_derivative_check(
            &g,
            &Potential::zero(),
            1.0,
            0,
            &p,
            &[1.0, -1.0],
            &[1e-3],
        );
        assert!(matches!(r, Err(Error::InfeasibleDirection { .. })));
    }

    #[test]
    fn negated_potential_flips_sign() {
        let g = make_team_game(5, GameShape::new(2, 2, 2)).unwrap();
        let phi = Potential::common_value(&g);
        let p = uniform_policy(&g);
        let a = phi.aggregate(&g, &p).unwrap();
        let b = phi.negated().aggregate(&g, &p).unwrap();
        assert_eq!(a, -b);
        assert_eq!(phi.negated().kind(), PotentialKind::Custom);
    }
}
