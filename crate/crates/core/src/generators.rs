//! Seeded generators for standard game families.
//!
//! Rewards are i.i.d. uniform on `[-1, 1]`, transition rows are Dirichlet(1)
//! and the initial distribution is uniform. Draw order is fixed (rewards
//! player-major, then transitions state-major) so a seed pins the game.

use rand::Rng;

use crate::error::{Error, Result};
use crate::game::MarkovGame;
use crate::sampling::{dirichlet_ones, seeded_rng, SimRng};

/// Discount used by the generators unless overridden with
/// [`MarkovGame::with_discount`].
pub const DEFAULT_DISCOUNT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GameShape {
    pub states: usize,
    pub players: usize,
    /// Actions per player (all players share the count).
    pub actions: usize,
}

impl GameShape {
    pub fn new(states: usize, players: usize, actions: usize) -> Self {
        Self {
            states,
            players,
            actions,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.states == 0 {
            return Err(Error::EmptyCount { what: "states" });
        }
        if self.players == 0 {
            return Err(Error::EmptyCount { what: "players" });
        }
        if self.actions == 0 {
            return Err(Error::EmptyCount { what: "actions" });
        }
        Ok(())
    }

    fn joint(&self) -> usize {
        self.actions.pow(self.players as u32)
    }
}

fn uniform_reward(rng: &mut SimRng) -> f64 {
    rng.random_range(-1.0..=1.0)
}

fn dirichlet_transitions(rng: &mut SimRng, shape: &GameShape) -> Vec<f64> {
    let mut t = Vec::with_capacity(shape.states * shape.joint() * shape.states);
    for _ in 0..shape.states * shape.joint() {
        t.extend(dirichlet_ones(rng, shape.states));
    }
    t
}

fn assemble(shape: &GameShape, rewards: Vec<f64>, transitions: Vec<f64>) -> Result<MarkovGame> {
    MarkovGame::new(
        shape.states,
        vec![shape.actions; shape.players],
        rewards,
        transitions,
        DEFAULT_DISCOUNT,
        vec![1.0 / shape.states as f64; shape.states],
    )
}

/// Identical-interest game: one reward table shared by every player.
pub fn make_team_game(seed: u64, shape: GameShape) -> Result<MarkovGame> {
    shape.validate()?;
    let mut rng = seeded_rng(seed);
    let block = shape.states * shape.joint();
    let common: Vec<f64> = (0..block).map(|_| uniform_reward(&mut rng)).collect();
    let rewards = common.repeat(shape.players);
    let transitions = dirichlet_transitions(&mut rng, &shape);
    Ok(assemble(&shape, rewards, transitions)?.with_name(format!("team-{seed}")))
}

/// General-sum game with independent reward tables per player.
pub fn make_random_game(seed: u64, shape: GameShape) -> Result<MarkovGame> {
    shape.validate()?;
    let mut rng = seeded_rng(seed);
    let total = shape.players * shape.states * shape.joint();
    let rewards: Vec<f64> = (0..total).map(|_| uniform_reward(&mut rng)).collect();
    let transitions = dirichlet_transitions(&mut rng, &shape);
    Ok(assemble(&shape, rewards, transitions)?.with_name(format!("random-{seed}")))
}

/// Game with a strictly dominant action per player and state.
///
/// Transitions ignore actions (one Dirichlet row per state) and
/// `r_i(s, a) = c_i(s, a_i) + g_i(s, a_{-i})`, with `c_i(s, .)` having a unique
/// maximizer separated by at least `0.25`. The unique Nash equilibrium plays
/// `argmax c_i(s, .)` everywhere.
pub fn make_dominant_game(seed: u64, shape: GameShape) -> Result<MarkovGame> {
    shape.validate()?;
    let mut rng = seeded_rng(seed);
    let (n, s_count, k) = (shape.players, shape.states, shape.actions);
    let joint = shape.joint();
    // own-action bonus: dominant action gets 0.5, others in [-0.5, 0.25]
    let mut own = vec![0.0; n * s_count * k];
    for i in 0..n {
        for s in 0..s_count {
            let best = rng.random_range(0..k);
            for a in 0..k {
                own[(i * s_count + s) * k + a] = if a == best {
                    0.5
                } else {
                    rng.random_range(-0.5..=0.25)
                };
            }
        }
    }
    let mut rewards = vec![0.0; n * s_count * joint];
    let mut strides = vec![1usize; n];
    for i in 1..n {
        strides[i] = strides[i - 1] * k;
    }
    for i in 0..n {
        for s in 0..s_count {
            // g_i depends on the others' actions only; draw per joint index of others
            let others = joint / k;
            let g: Vec<f64> = (0..others).map(|_| rng.random_range(-0.5..=0.5)).collect();
            for j in 0..joint {
                let ai = (j / strides[i]) % k;
                let rest = (j % strides[i]) + (j / (strides[i] * k)) * strides[i];
                rewards[(i * s_count + s) * joint + j] = own[(i * s_count + s) * k + ai] + g[rest];
            }
        }
    }
    let mut transitions = Vec::with_capacity(s_count * joint * s_count);
    for _ in 0..s_count {
        let row = dirichlet_ones(&mut rng, s_count);
        for _ in 0..joint {
            transitions.extend_from_slice(&row);
        }
    }
    Ok(assemble(&shape, rewards, transitions)?.with_name(format!("dominant-{seed}")))
}

/// The dominant action of `player` at `state` in a [`make_dominant_game`] game:
/// the own action with the highest reward against any fixed opponent profile.
pub fn dominant_actions(game: &MarkovGame) -> Vec<Vec<usize>> {
    (0..game.num_players())
        .map(|i| {
            (0..game.num_states())
                .map(|s| {
                    let mut best = 0;
                    let mut best_r = f64::NEG_INFINITY;
                    for a in 0..game.num_actions(i) {
                        // opponents all play action 0
                        let mut acts = vec![0; game.num_players()];
                        acts[i] = a;
                        let r = game.reward(i, s, game.encode(&acts));
                        if r > best_r {
                            best_r = r;
                            best = a;
                        }
                    }
                    best
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn team_game_is_identical_interest() {
        let g = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
        assert!(g.is_identical_interest());
        assert_eq!(g.discount(), DEFAULT_DISCOUNT);
    }

    #[test]
    fn generators_are_deterministic() {
        let shape = GameShape::new(3, 2, 3);
        assert_eq!(make_team_game(9, shape).unwrap(), make_team_game(9, shape).unwrap());
        assert_eq!(
            make_random_game(9, shape).unwrap(),
            make_random_game(9, shape).unwrap()
        );
    }

    #[test]
    fn different_seeds_give_different_rewards() {
        let shape = GameShape::new(2, 2, 2);
        let a = make_team_game(1, shape).unwrap();
        let b = make_team_game(2, shape).unwrap();
        assert_ne!(a.rewards_flat(), b.rewards_flat());
    }

    #[test]
    fn zero_counts_rejected() {
        assert!(make_team_game(1, GameShape::new(0, 2, 2)).is_err());
        assert!(make_random_game(1, GameShape::new(2, 0, 2)).is_err());
        assert!(make_dominant_game(1, GameShape::new(2, 2, 0)).is_err());
    }

    #[test]
    fn dominant_game_has_dominant_actions() {
        let g = make_dominant_game(4, GameShape::new(2, 3, 3)).unwrap();
        let dom = dominant_actions(&g);
        for i in 0..3 {
            for s in 0..2 {
                for j in 0..g.num_joint_actions() {
                    let ai = g.action_of(j, i);
                    let mut acts = g.decode(j);
                    acts[i] = dom[i][s];
                    let jd = g.encode(&acts);
                    if ai != dom[i][s] {
                        assert!(g.reward(i, s, jd) >= g.reward(i, s, j) + 0.25 - 1e-12);
                    }
                }
            }
        }
        // transitions ignore actions
        for s in 0..2 {
            for j in 1..g.num_joint_actions() {
                assert_eq!(g.transition_row(s, j), g.transition_row(s, 0));
            }
        }
    }
}
