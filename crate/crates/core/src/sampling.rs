//! Seeded randomness shared by generators, samplers and the learner.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use crate::game::{MarkovGame, Policy, PolicyProfile};

pub type SimRng = ChaCha8Rng;

pub fn seeded_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream derived from `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Symmetric Dirichlet(1) sample (uniform on the simplex).
pub fn dirichlet_ones<R: Rng + ?Sized>(rng: &mut R, k: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = v.iter().sum();
    if total > 0.0 {
        v.iter_mut().for_each(|x| *x /= total);
    } else {
        v.iter_mut().for_each(|x| *x = 1.0 / k as f64);
    }
    v
}

/// Draws an index from a probability vector by inversion.
pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding: fall back to the last index with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_actions: usize) -> Policy {
    Policy::from_rows(
        (0..num_states)
            .map(|_| dirichlet_ones(rng, num_actions))
            .collect(),
    )
}

/// Draws every player's policy independently with Dirichlet(1) rows.
pub fn random_profile<R: Rng + ?Sized>(rng: &mut R, game: &MarkovGame) -> PolicyProfile {
    PolicyProfile::new(
        game.actions()
            .iter()
            .map(|&a| random_policy(rng, game.num_states(), a))
            .collect(),
    )
}

/// Uniformly random deterministic policy.
pub fn random_deterministic_policy<R: Rng + ?Sized>(
    rng: &mut R,
    num_states: usize,
    num_actions: usize,
) -> Policy {
    let choice: Vec<usize> = (0..num_states)
        .map(|_| rng.random_range(0..num_actions))
        .collect();
    Policy::deterministic(&choice, num_actions)
}

/// Random direction `v` with zero sum per state such that `policy +/- h * v`
/// stays on the simplex for every `|h| <= h_max`.
pub fn random_feasible_direction<R: Rng + ?Sized>(
    rng: &mut R,
    policy: &Policy,
    h_max: f64,
) -> Vec<f64> {
    let k = policy.num_actions();
    let mut out = Vec::with_capacity(policy.num_states() * k);
    for row in policy.rows() {
        let mut v: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mean = v.iter().sum::<f64>() / k as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        // room left on each coordinate, in either direction
        let room = row.iter().fold(f64::INFINITY, |m, &p| m.min(p.min(1.0 - p)));
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vmax > 0.0 && room.is_finite() {
            let scale = (0.5 * room / (h_max * vmax)).min(1.0);
            v.iter_mut().for_each(|x| *x *= scale);
        }
        out.extend(v);
    }
    out
}
