//! Independent oracles shared by the integration tests. None of these call
//! into the solver module.

#![allow(dead_code)]

use nearpot_core::game::{MarkovGame, Policy, PolicyProfile};
use nearpot_core::generators::{make_random_game, GameShape};
use nearpot_core::sampling::{sample_index, seeded_rng, SimRng};

/// Per-state joint-action distribution of a product profile.
pub fn joint_probs(game: &MarkovGame, profile: &PolicyProfile, s: usize) -> Vec<f64> {
    (0..game.num_joint_actions())
        .map(|j| {
            (0..game.num_players())
                .map(|i| profile.player(i).state(s)[game.action_of(j, i)])
                .product()
        })
        .collect()
}

/// Induced state chain `P[s][t]` and rewards `r[i][s]`.
pub fn chain(game: &MarkovGame, profile: &PolicyProfile) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let ns = game.num_states();
    let mut p = vec![vec![0.0; ns]; ns];
    let mut r = vec![vec![0.0; ns]; game.num_players()];
    for s in 0..ns {
        for (j, w) in joint_probs(game, profile, s).into_iter().enumerate() {
            for (t, x) in game.transition_row(s, j).iter().enumerate() {
                p[s][t] += w * x;
            }
            for (i, ri) in r.iter_mut().enumerate() {
                ri[s] += w * game.reward(i, s, j);
            }
        }
    }
    (p, r)
}

/// `V_i(mu)` by iterating the Bellman evaluation map to a fixed point.
pub fn value_by_iteration(game: &MarkovGame, profile: &PolicyProfile) -> Vec<f64> {
    let (p, r) = chain(game, profile);
    let ns = game.num_states();
    let g = game.discount();
    r.iter()
        .map(|ri| {
            let mut v = vec![0.0; ns];
            loop {
                let next: Vec<f64> = (0..ns)
                    .map(|s| ri[s] + g * (0..ns).map(|t| p[s][t] * v[t]).sum::<f64>())
                    .collect();
                let diff = next
                    .iter()
                    .zip(&v)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                v = next;
                if diff < 1e-15 {
                    break;
                }
            }
            v.iter().zip(game.initial()).map(|(a, m)| a * m).sum()
        })
        .collect()
}

/// Monte-Carlo estimate of `V_i(mu)` with its standard error, from `n`
/// truncated rollouts.
pub fn mc_value(game: &MarkovGame, profile: &PolicyProfile, n: usize, seed: u64) -> Vec<(f64, f64)> {
    let g = game.discount();
    let r_max = game.r_max().max(1e-300);
    let horizon = if g == 0.0 {
        1
    } else {
        ((1e-12 * (1.0 - g) / r_max).ln() / g.ln()).ceil() as usize + 1
    };
    let mut rng: SimRng = seeded_rng(seed);
    let np = game.num_players();
    let mut sum = vec![0.0; np];
    let mut sum2 = vec![0.0; np];
    let mut actions = vec![0usize; np];
    for _ in 0..n {
        let mut s = sample_index(&mut rng, game.initial());
        let mut ret = vec![0.0; np];
        let mut disc = 1.0;
        for _ in 0..horizon {
            for (i, a) in actions.iter_mut().enumerate() {
                *a = sample_index(&mut rng, profile.player(i).state(s));
            }
            let j = game.encode(&actions);
            for (i, x) in ret.iter_mut().enumerate() {
                *x += disc * game.reward(i, s, j);
            }
            disc *= g;
            s = sample_index(&mut rng, game.transition_row(s, j));
        }
        for i in 0..np {
            sum[i] += ret[i];
            sum2[i] += ret[i] * ret[i];
        }
    }
    let nf = n as f64;
    (0..np)
        .map(|i| {
            let mean = sum[i] / nf;
            let var = (sum2[i] / nf - mean * mean).max(0.0) * nf / (nf - 1.0);
            (mean, (var / nf).sqrt())
        })
        .collect()
}

/// `(1 - gamma) sum_t gamma^t mu^T P^t`, truncated once `gamma^t < 1e-17`.
pub fn series_occupancy(game: &MarkovGame, profile: &PolicyProfile) -> Vec<f64> {
    let (p, _) = chain(game, profile);
    let ns = game.num_states();
    let g = game.discount();
    let mut row = game.initial().to_vec();
    let mut d = vec![0.0; ns];
    let mut w = 1.0 - g;
    loop {
        for s in 0..ns {
            d[s] += w * row[s];
        }
        w *= g;
        if w < 1e-17 {
            break;
        }
        row = (0..ns).map(|t| (0..ns).map(|s| row[s] * p[s][t]).sum()).collect();
    }
    d
}

/// All deterministic policies for one player.
pub fn all_deterministic(num_states: usize, num_actions: usize) -> Vec<Policy> {
    let total = num_actions.pow(num_states as u32);
    (0..total)
        .map(|mut k| {
            let choice: Vec<usize> = (0..num_states)
                .map(|_| {
                    let a = k % num_actions;
                    k /= num_actions;
                    a
                })
                .collect();
            Policy::deterministic(&choice, num_actions)
        })
        .collect()
}

/// `max` over deterministic deviations of `V_i(mu, pi_i', pi_{-i})`.
pub fn enumerated_best_value(game: &MarkovGame, i: usize, profile: &PolicyProfile) -> f64 {
    all_deterministic(game.num_states(), game.num_actions(i))
        .into_iter()
        .map(|p| value_by_iteration(game, &profile.with_player(i, p))[i])
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Shapes and discounts covering `|S| <= 4`, `N <= 3`, `|A_i| <= 3`.
pub fn oracle_game(k: u64) -> MarkovGame {
    let states = 1 + (k % 4) as usize;
    let players = 1 + ((k / 4) % 3) as usize;
    let actions = 1 + ((k / 2) % 3) as usize;
    let actions = if players == 3 && states >= 3 { actions.min(2) } else { actions };
    let gamma = [0.3, 0.7, 0.9][(k % 3) as usize];
    make_random_game(1000 + k, GameShape::new(states, players, actions))
        .unwrap()
        .with_discount(gamma)
        .unwrap()
}
