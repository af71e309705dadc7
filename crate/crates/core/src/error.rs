use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("count `{what}` must be at least 1")]
    EmptyCount { what: &'static str },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("transition row (state {state}, joint action {joint_action}) sums to {sum}")]
    NonStochasticRow {
        state: usize,
        joint_action: usize,
        sum: f64,
    },

    #[error("negative transition probability {value} at (state {state}, joint action {joint_action}, next {next_state})")]
    NegativeProbability {
        state: usize,
        joint_action: usize,
        next_state: usize,
        value: f64,
    },

    #[error("non-finite reward at (player {player}, state {state}, joint action {joint_action})")]
    NonFiniteReward {
        player: usize,
        state: usize,
        joint_action: usize,
    },

    #[error("discount factor {0} outside [0, 1)")]
    DiscountOutOfRange(f64),

    #[error("initial distribution is not a probability vector: {reason}")]
    InitialDistribution { reason: String },

    #[error("policy of player {player} at state {state} is not on the simplex: {reason}")]
    InvalidPolicy {
        player: usize,
        state: usize,
        reason: String,
    },

    #[error("player index {player} out of range for {num_players} players")]
    PlayerOutOfRange { player: usize, num_players: usize },

    #[error("parameter `{name}` = {value} is invalid: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("rewards are not identical: player {player} differs from player 0 at (state {state}, joint action {joint_action})")]
    RewardsNotIdentical {
        player: usize,
        state: usize,
        joint_action: usize,
    },

    #[error("operation needs at least two players")]
    NotApplicable,

    #[error("no maximizer oracle is available for potential kind {0}")]
    OracleUnavailable(String),

    #[error("direction leaves the simplex at (state {state}, action {action}) for step {step}")]
    InfeasibleDirection {
        state: usize,
        action: usize,
        step: f64,
    },

    #[error("series length mismatch: {0}")]
    GridMismatch(String),

    #[error("{0} must not be empty")]
    Empty(&'static str),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("enumeration of {count} profiles exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    #[error("document could not be parsed: {0}")]
    Parse(String),
}
