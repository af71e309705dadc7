mod common;

use approx::assert_abs_diff_eq;

use nearpot_core::flow::{run_flow, theorem_constants, FlowConfig};
use nearpot_core::game::{uniform_policy, MarkovGame, Policy, PolicyProfile};
use nearpot_core::generators::{dominant_actions, make_dominant_game, make_random_game, make_team_game, GameShape};
use nearpot_core::learner::{run_learning, LearnerConfig};
use nearpot_core::potential::{
    check_approx_maximizer, deviation_ratio, directional_derivative_check, joint_optimum, MaximizerOracle,
    Potential,
};
use nearpot_core::sampling::{random_feasible_direction, random_profile, seeded_rng};
use nearpot_core::solver::{
    nash_gap, perturbation_bounds_check, policy_value, q_function, SolverOptions,
};

use common::{enumerated_best_value, mc_value, series_occupancy, value_by_iteration};

#[test]
fn value_matches_long_monte_carlo() {
    let game = make_random_game(31, GameShape::new(3, 2, 2)).unwrap();
    let profile = random_profile(&mut seeded_rng(1), &game);
    let exact = policy_value(&game, &profile).unwrap();
    for (v, (m, se)) in exact.values_mu.iter().zip(mc_value(&game, &profile, 100_000, 2)) {
        assert!((v - m).abs() <= 3.0 * se, "{v} vs {m} +- {se}");
    }
}

#[test]
fn q_expectation_identity() {
    for k in 0..10 {
        let game = common::oracle_game(k);
        let profile = random_profile(&mut seeded_rng(k), &game);
        let v = policy_value(&game, &profile).unwrap();
        let q = q_function(&game, &profile).unwrap();
        for i in 0..game.num_players() {
            for s in 0..game.num_states() {
                let e: f64 = profile
                    .player(i)
                    .state(s)
                    .iter()
                    .zip(q.slice(i, s))
                    .map(|(p, x)| p * x)
                    .sum();
                assert_abs_diff_eq!(e, v.values[i][s], epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn occupancy_matches_series_and_sums_to_one() {
    for k in 0..20 {
        let game = common::oracle_game(k);
        let profile = random_profile(&mut seeded_rng(k + 100), &game);
        let d = nearpot_core::solver::occupancy(&game, &profile).unwrap().d;
        for (a, b) in d.iter().zip(series_occupancy(&game, &profile)) {
            assert!((a - b).abs() < 1e-10);
        }
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }
}

#[test]
fn nash_gap_matches_enumeration() {
    for k in 0..15 {
        let game = common::oracle_game(k);
        let profile = random_profile(&mut seeded_rng(k + 200), &game);
        let rep = nash_gap(&game, &profile).unwrap();
        let base = value_by_iteration(&game, &profile);
        let oracle = (0..game.num_players())
            .map(|i| enumerated_best_value(&game, i, &profile) - base[i])
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((rep.epsilon - oracle).abs() < 1e-8);
    }
}

#[test]
fn dominant_equilibrium_has_zero_gap() {
    let game = make_dominant_game(8, GameShape::new(3, 3, 2)).unwrap();
    let ne = PolicyProfile::new(
        dominant_actions(&game)
            .iter()
            .map(|c| Policy::deterministic(c, 2))
            .collect(),
    );
    assert!(nash_gap(&game, &ne).unwrap().epsilon <= 1e-8);
}

#[test]
fn perturbation_example_bound() {
    let game = make_random_game(12, GameShape::new(2, 2, 2)).unwrap();
    let scale = 1.0 / game.r_max();
    let rewards: Vec<f64> = game.rewards_flat().iter().map(|r| r * scale).collect();
    let game = MarkovGame::new(
        2,
        vec![2, 2],
        rewards,
        game.transitions_flat().to_vec(),
        0.5,
        vec![0.5, 0.5],
    )
    .unwrap();
    let profile = random_profile(&mut seeded_rng(4), &game);
    let rep = perturbation_bounds_check(&game, 0, &profile, 0.1).unwrap();
    assert_abs_diff_eq!(rep.bound, 0.8, epsilon = 1e-12);
    assert!(rep.value_deviation <= 0.8 && rep.q_deviation <= 0.8);
    // uniform opponents are a fixed point of the mixing
    let uni = profile.with_player(1, Policy::uniform(2, 2));
    let rep = perturbation_bounds_check(&game, 0, &uni, 0.3).unwrap();
    assert!(rep.value_deviation < 1e-14 && rep.q_deviation < 1e-14);
}

#[test]
fn zero_potential_gradient_gap_is_value_derivative() {
    let game = make_random_game(3, GameShape::new(2, 2, 3)).unwrap();
    let mut rng = seeded_rng(9);
    let profile = random_profile(&mut rng, &game);
    let v = random_feasible_direction(&mut rng, profile.player(1), 1e-3);
    let rep = directional_derivative_check(&game, &Potential::zero(), 0.0, 1, &profile, &v, &[1e-3]).unwrap();
    let step = &rep.steps[0];
    assert_eq!(step.phi_derivative, 0.0);
    assert_abs_diff_eq!(step.gap, step.value_derivative.abs(), epsilon = 1e-15);
    let kappa = game.r_max() / (1.0 - game.discount()).powi(2);
    assert!(step.gap <= kappa * rep.direction_norm);
    let zero = vec![0.0; v.len()];
    let rep = directional_derivative_check(&game, &Potential::zero(), 0.0, 1, &profile, &zero, &[1e-3]).unwrap();
    assert_eq!(rep.steps[0].gap, 0.0);
}

#[test]
fn single_state_zero_potential_ratio() {
    let game = MarkovGame::new(1, vec![2], vec![1.0, 0.0], vec![1.0, 1.0], 0.5, vec![1.0]).unwrap();
    let a = PolicyProfile::new(vec![Policy::deterministic(&[0], 2)]);
    let s = deviation_ratio(&game, &Potential::zero(), 0, &a, &Policy::deterministic(&[1], 2)).unwrap();
    assert_abs_diff_eq!(s.ratio, 2f64.sqrt(), epsilon = 1e-12);
    assert!(s.ratio <= 4.0);
}

#[test]
fn zero_potential_certificate_can_be_exceeded_in_two_norm() {
    // r = (1, -1), gamma = 0: |dV| = 2 and ||d pi||_2 = sqrt(2), published constant is 1
    let game = MarkovGame::new(1, vec![2], vec![1.0, -1.0], vec![1.0, 1.0], 0.0, vec![1.0]).unwrap();
    let a = PolicyProfile::new(vec![Policy::deterministic(&[0], 2)]);
    let s = deviation_ratio(&game, &Potential::zero(), 0, &a, &Policy::deterministic(&[1], 2)).unwrap();
    let published = game.r_max() / (1.0 - game.discount()).powi(2);
    assert_abs_diff_eq!(s.ratio, 2f64.sqrt(), epsilon = 1e-12);
    assert!(s.ratio > published);
    assert!(s.ratio <= 2f64.sqrt() * published + 1e-12);
}

#[test]
fn team_optimum_and_near_optimum_are_equilibria() {
    let game = make_team_game(5, GameShape::new(3, 2, 2)).unwrap();
    let phi = Potential::common_value(&game);
    let (opt, _) = joint_optimum(&game, 0, &SolverOptions::default()).unwrap();
    let rep = check_approx_maximizer(&game, &phi, 0.0, &opt, 0.0, &MaximizerOracle::Auto).unwrap();
    assert!(rep.measured_gap <= 1e-6);
    // one Euler iterate away from the optimum toward uniform
    let near = PolicyProfile::new(
        opt.players()
            .iter()
            .map(|p| {
                Policy::from_rows(
                    p.rows()
                        .iter()
                        .map(|r| r.iter().map(|x| 0.99 * x + 0.005).collect())
                        .collect(),
                )
            })
            .collect(),
    );
    let phi_opt = phi.aggregate(&game, &opt).unwrap();
    let shortfall = (0..game.num_states())
        .map(|s| phi.per_state(&game, &opt).unwrap()[s] - phi.per_state(&game, &near).unwrap()[s])
        .fold(0.0, f64::max);
    assert!(phi_opt >= phi.aggregate(&game, &near).unwrap());
    let rep = check_approx_maximizer(&game, &phi, 0.0, &near, shortfall, &MaximizerOracle::Auto).unwrap();
    assert!(rep.measured_gap <= shortfall + 1e-9, "{} > {shortfall}", rep.measured_gap);
}

#[test]
fn every_pair_is_visited_with_exploration() {
    let game = make_random_game(2, GameShape::new(3, 2, 2)).unwrap();
    let cfg = LearnerConfig {
        theta: 0.05,
        horizon: 100_000,
        metric_period: 100_000,
        record_every: 100_000,
        check_invariants: false,
        seed: 3,
        ..LearnerConfig::default()
    };
    let log = run_learning(&game, &cfg, None).unwrap();
    assert!(log.state_visits.iter().all(|&n| n > 0));
    let mut run = nearpot_core::learner::LearningRun::new(&game, cfg).unwrap();
    for _ in 0..100_000 {
        run.step();
    }
    for agent in run.agents() {
        for s in 0..3 {
            for a in 0..2 {
                assert!(agent.visits(s, a) > 0);
            }
        }
    }
}

#[test]
fn flow_theta_comparison_completes() {
    let game = make_team_game(7, GameShape::new(2, 2, 2)).unwrap();
    let phi = Potential::common_value(&game);
    let consts = theorem_constants(&game, 1.0, 0.05, 10, 0).unwrap();
    let mut finals = Vec::new();
    for theta in [0.0, consts.theta_max] {
        let cfg = FlowConfig {
            theta,
            horizon: 50.0,
            ..FlowConfig::default()
        };
        let log = run_flow(&game, &uniform_policy(&game), &cfg, Some(&phi)).unwrap();
        assert_eq!(log.records.len(), 5001);
        finals.push(log.records.last().unwrap().phi_mu.unwrap());
    }
    assert!((finals[0] - finals[1]).abs() < 0.1);
}

#[test]
fn constants_enumeration_dominates_sampling() {
    let game = make_random_game(14, GameShape::new(3, 2, 2)).unwrap().with_discount(0.8).unwrap();
    let c = theorem_constants(&game, 1.0, 0.05, 30, 2).unwrap();
    assert!(c.d_lower >= c.d_lower_sampled);
    // independent oracle for one deterministic profile
    let p = PolicyProfile::new(vec![Policy::deterministic(&[0, 1, 0], 2), Policy::deterministic(&[1, 1, 0], 2)]);
    let d = series_occupancy(&game, &p);
    let stat = d
        .iter()
        .zip(game.initial())
        .map(|(x, m)| x / m)
        .fold(0.0, f64::max)
        / (1.0 - 0.8);
    assert!(c.d_lower >= stat - 1e-9);
    assert!(c.d_lower <= c.d_upper.unwrap());
}
