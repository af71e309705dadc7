//! Side-by-side run of the learner and the Euler flow from one start.

use serde::{Deserialize, Serialize};

use nearpot_core::flow::{run_flow, FlowConfig};
use nearpot_core::game::{MarkovGame, PolicyProfile};
use nearpot_core::learner::{run_learning_from, LearnerConfig};
use nearpot_core::potential::Potential;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Both final gaps are within `delta`.
    Consistent,
    Divergent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub theta: f64,
    pub delta: f64,
    pub learn_final_gap: f64,
    pub flow_final_gap: f64,
    pub learn_max_gap: f64,
    pub flow_max_gap: f64,
    pub verdict: Verdict,
    /// Sup-norm distance between learner snapshots and the flow profile at the
    /// closest flow time to the learner's cumulative actor stepsize.
    pub max_distance_matched_time: f64,
    /// Same, matching on the closest potential level instead of time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_distance_matched_phi: Option<f64>,
    pub snapshots: usize,
}

/// Descriptive comparison; nothing is asserted.
pub fn compare_learn_vs_flow(
    game: &MarkovGame,
    learner: &LearnerConfig,
    flow: &FlowConfig,
    start: &PolicyProfile,
    potential: Option<&Potential>,
    delta: f64,
) -> Result<CompareReport> {
    if learner.theta != flow.theta {
        return Err(CliError::ThetaMismatch {
            learner: learner.theta,
            flow: flow.theta,
        });
    }
    let learn = run_learning_from(game, learner, start, potential)?;
    let flow_cfg = FlowConfig {
        snapshot_every: 1,
        ..flow.clone()
    };
    let fl = run_flow(game, start, &flow_cfg, potential)?;

    let mut by_time = 0.0f64;
    let mut by_phi: Option<f64> = None;
    let mut snapshots = 0;
    for (rec, m) in learn.metric_records() {
        snapshots += 1;
        let nearest_t = fl
            .records
            .iter()
            .min_by(|a, b| (a.tau - rec.clock).abs().total_cmp(&(b.tau - rec.clock).abs()))
            .expect("flow log has the start record");
        if let Some(p) = &nearest_t.policy {
            by_time = by_time.max(m.policy.sup_distance(p));
        }
        if let Some(level) = m.phi_mu {
            let nearest_phi = fl
                .records
                .iter()
                .filter_map(|r| r.phi_mu.map(|x| (r, (x - level).abs())))
                .min_by(|a, b| a.1.total_cmp(&b.1));
            if let Some((r, _)) = nearest_phi {
                if let Some(p) = &r.policy {
                    let d = m.policy.sup_distance(p);
                    by_phi = Some(by_phi.map_or(d, |x| x.max(d)));
                }
            }
        }
    }
    let learn_final_gap = learn.final_gap().unwrap_or(f64::NAN);
    let flow_final_gap = fl.final_gap();
    let learn_max_gap = learn
        .metric_records()
        .map(|(_, m)| m.nash_gap)
        .fold(f64::NEG_INFINITY, f64::max);
    let flow_max_gap = fl.gaps().into_iter().fold(f64::NEG_INFINITY, f64::max);
    let verdict = if learn_final_gap <= delta && flow_final_gap <= delta {
        Verdict::Consistent
    } else {
        Verdict::Divergent
    };
    Ok(CompareReport {
        theta: learner.theta,
        delta,
        learn_final_gap,
        flow_final_gap,
        learn_max_gap,
        flow_max_gap,
        verdict,
        max_distance_matched_time: by_time,
        max_distance_matched_phi: by_phi,
        snapshots,
    })
}
