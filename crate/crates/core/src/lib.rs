//! Tabular Markov games: exact solvers, near-potential functions, a
//! decentralized two-timescale actor-critic learner and the best-response
//! flow it tracks.

pub mod error;
pub mod flow;
pub mod game;
pub mod generators;
pub mod learner;
pub mod potential;
pub mod sampling;
pub mod solver;

pub use error::{Error, Result};
pub use flow::{
    check_phi_decay, check_phi_decay_above, flow_step, gamma_of_delta, run_flow, theorem_constants,
    FlowConfig, FlowLog, GammaReport, PolicyGrid, TheoremConstants,
};
pub use game::{
    load_game, mix_with_uniform, save_game, uniform_policy, GameSpecDocument, MarkovGame, Policy,
    PolicyProfile,
};
pub use generators::{make_dominant_game, make_random_game, make_team_game, GameShape};
pub use learner::{
    make_stepsizes, run_learning, theta_bound, LearnerConfig, StepSizes, TrajectoryLog,
};
pub use potential::{
    check_approx_maximizer, directional_derivative_check, estimate_kappa, zero_mnpf,
    identical_interest_potential, KappaEstimate, Potential,
};
pub use solver::{
    best_response, nash_gap, occupancy, perturbation_bounds_check, policy_value, q_function,
    NashGapReport, OpponentMixing, SolverOptions, TieRule,
};
