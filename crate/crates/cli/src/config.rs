//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nearpot_core::flow::FlowConfig;
use nearpot_core::game::{load_game, uniform_policy, GameSpecDocument, MarkovGame, PolicyProfile};
use nearpot_core::generators::{make_dominant_game, make_random_game, make_team_game, GameShape};
use nearpot_core::learner::LearnerConfig;
use nearpot_core::potential::Potential;
use nearpot_core::sampling::{random_profile, seeded_rng};

use crate::error::{CliError, Result};

/// Environment variable holding the default output directory.
pub const OUTPUT_DIR_ENV: &str = "NEARPOT_OUTPUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Learn,
    Flow,
    Analyze,
    Kappa,
    Constants,
}

impl Mode {
    pub fn is_stochastic(self) -> bool {
        !matches!(self, Mode::Flow)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Team,
    Random,
    Dominant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSource {
    Generator {
        family: Family,
        seed: u64,
        states: usize,
        players: usize,
        actions: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    File {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
    },
    Inline {
        spec: GameSpecDocument,
    },
}

impl GameSource {
    /// Builds the game; relative file paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<MarkovGame> {
        let game = match self {
            GameSource::Generator {
                family,
                seed,
                states,
                players,
                actions,
                gamma,
            } => {
                let shape = GameShape::new(*states, *players, *actions);
                let g = match family {
                    Family::Team => make_team_game(*seed, shape)?,
                    Family::Random => make_random_game(*seed, shape)?,
                    Family::Dominant => make_dominant_game(*seed, shape)?,
                };
                match gamma {
                    Some(x) => g.with_discount(*x)?,
                    None => g,
                }
            }
            GameSource::File { path, gamma } => {
                let full = if path.is_absolute() { path.clone() } else { base.join(path) };
                let text = std::fs::read_to_string(&full).map_err(|e| CliError::io(&full, e))?;
                let doc = GameSpecDocument::from_json(&text)?;
                let g = load_game(&doc)?;
                match gamma {
                    Some(x) => g.with_discount(*x)?,
                    None => g,
                }
            }
            GameSource::Inline { spec } => load_game(spec)?,
        };
        Ok(game)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialChoice {
    /// Common value on identical-interest games, none otherwise.
    #[default]
    Auto,
    None,
    Zero,
    Common,
}

impl PotentialChoice {
    pub fn resolve(self, game: &MarkovGame) -> Result<Option<Potential>> {
        match self {
            PotentialChoice::Auto => Ok(game
                .is_identical_interest()
                .then(|| Potential::common_value(game))),
            PotentialChoice::None => Ok(None),
            PotentialChoice::Zero => Ok(Some(Potential::zero())),
            PotentialChoice::Common => {
                if !game.is_identical_interest() {
                    return Err(CliError::Config(
                        "potential = \"common\" needs an identical-interest game".into(),
                    ));
                }
                Ok(Some(Potential::common_value(game)))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStart {
    #[default]
    Uniform,
    /// Dirichlet profile drawn from the run seed.
    Random,
}

impl FlowStart {
    pub fn profile(self, game: &MarkovGame, seed: u64) -> PolicyProfile {
        match self {
            FlowStart::Uniform => uniform_policy(game),
            FlowStart::Random => random_profile(&mut seeded_rng(seed), game),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisParams {
    pub samples: usize,
    pub lambda: f64,
    pub eta: f64,
    pub potential: PotentialChoice,
    pub flow_start: FlowStart,
    /// `delta` levels for the Gamma estimate (analyze mode).
    pub deltas: Vec<f64>,
    pub mesh_spacing: f64,
    /// Largest number of deterministic profiles to enumerate.
    pub enumeration_limit: u64,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            samples: 200,
            lambda: 0.05,
            eta: 1.0,
            potential: PotentialChoice::Auto,
            flow_start: FlowStart::Uniform,
            deltas: vec![0.0, 0.1, 0.2, 0.5],
            mesh_spacing: 0.25,
            enumeration_limit: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub game: GameSource,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric_period: Option<u64>,
    #[serde(default)]
    pub learner: LearnerConfig,
    #[serde(default)]
    pub flow: FlowConfig,
    #[serde(default)]
    pub analysis: AnalysisParams,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Seeds to run: the configured list, or `[0]` for deterministic modes.
    pub fn effective_seeds(&self) -> Vec<u64> {
        if self.seeds.is_empty() {
            vec![0]
        } else {
            self.seeds.clone()
        }
    }

    pub fn learner_for(&self, seed: u64) -> LearnerConfig {
        let mut cfg = self.learner.clone();
        cfg.seed = seed;
        if let Some(p) = self.metric_period {
            cfg.metric_period = p;
        }
        cfg
    }

    /// Checks the mode parameters against the game before anything runs.
    pub fn validate(&self, game: &MarkovGame) -> Result<()> {
        if self.mode.is_stochastic() && self.seeds.is_empty() {
            return Err(CliError::Config(format!(
                "mode {:?} needs a nonempty seeds list",
                self.mode
            )));
        }
        if self.metric_period == Some(0) {
            return Err(CliError::Config("metric_period must be at least 1".into()));
        }
        let a = &self.analysis;
        match self.mode {
            Mode::Learn => {
                self.learner_for(0)
                    .validate()
                    .map_err(|e| CliError::Config(format!("learner: {e}")))?;
                a.potential.resolve(game)?;
            }
            Mode::Flow => {
                self.flow
                    .validate(game)
                    .map_err(|e| CliError::Config(format!("flow: {e}")))?;
                a.potential.resolve(game)?;
            }
            Mode::Kappa => {
                if a.samples == 0 {
                    return Err(CliError::Config("analysis.samples must be at least 1".into()));
                }
                a.potential.resolve(game)?;
            }
            Mode::Constants => {
                if !(a.eta > 0.0 && a.eta <= 1.0) {
                    return Err(CliError::Config(format!("analysis.eta = {} outside (0, 1]", a.eta)));
                }
                if !(a.lambda > 0.0) {
                    return Err(CliError::Config(format!("analysis.lambda = {} must be positive", a.lambda)));
                }
            }
            Mode::Analyze => {
                let m = (1.0 / a.mesh_spacing).round();
                if !(a.mesh_spacing > 0.0) || (m * a.mesh_spacing - 1.0).abs() > 1e-9 {
                    return Err(CliError::Config(format!(
                        "analysis.mesh_spacing = {} is not 1/m",
                        a.mesh_spacing
                    )));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 over the canonical JSON form, ignoring the output directory.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_dir = None;
        let json = serde_json::to_vec(&canon).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}
