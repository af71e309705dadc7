use std::path::Path;
use std::process::Command;

use nearpot_cli::config::FlowStart;
use nearpot_cli::{
    compare_learn_vs_flow, emit_plot_data, run_experiment, CliError, ExperimentConfig, RunRecord,
    SeriesSelection, Verdict,
};
use nearpot_core::flow::FlowConfig;
use nearpot_core::generators::{make_team_game, GameShape};
use nearpot_core::learner::LearnerConfig;
use nearpot_core::potential::{joint_optimum, Potential};
use nearpot_core::solver::SolverOptions;

const SINGLE_STATE: &str = r#"
mode = "constants"
seeds = [0]

[game]
source = "inline"

[game.spec]
N = 1
S = 1
A = [2]
gamma = 0.5
mu = [1.0]
rewards = [[[1.0, 0.0]]]
transitions = [[[1.0], [1.0]]]
"#;

fn learn_config(family: &str) -> String {
    format!(
        r#"
mode = "learn"
seeds = [3, 4]
metric_period = 500

[game]
source = "generator"
family = "{family}"
seed = 1
states = 2
players = 2
actions = 2

[learner]
theta = 0.05
horizon = 2000
record_every = 100
"#
    )
}

fn run(text: &str, out: &Path) -> RunRecord {
    let cfg = ExperimentConfig::from_toml(text).unwrap();
    run_experiment(&cfg, Path::new("."), out).unwrap()
}

#[test]
fn constants_on_single_state_game() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(SINGLE_STATE, dir.path());
    let m = &rec.seeds[0].metrics;
    assert!((m["d_upper"] - 2.0).abs() < 1e-12);
    assert!((m["d_lower"] - 2.0).abs() < 1e-12);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn learn_fans_out_over_seeds_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let text = learn_config("team");
    let a = run(&text, &dir.path().join("a"));
    assert_eq!(a.seeds.len(), 2);
    for s in &a.seeds {
        assert!(dir.path().join("a").join(&s.log).exists());
        assert!(s.phi_digest.is_some());
    }
    let b = run(&text, &dir.path().join("b"));
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.seeds, b.seeds);
    let loaded = RunRecord::load(&dir.path().join("a").join("summary.json")).unwrap();
    assert_eq!(loaded, a);
}

#[test]
fn emit_projects_logs() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(&learn_config("team"), dir.path());
    let out = dir.path().join("csv");
    let files = emit_plot_data(&rec, &SeriesSelection::Named(vec!["nash_gap".into()]), &out).unwrap();
    assert_eq!(files.len(), 1);
    let mut reader = csv::Reader::from_path(&files[0]).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "seed", "nash_gap"]);
    // stage 0 plus every 500 iterates up to 2000, per seed
    assert_eq!(reader.records().count(), 2 * 5);

    let all = emit_plot_data(&rec, &SeriesSelection::All, &out).unwrap();
    let names: Vec<String> = all
        .iter()
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    assert_eq!(names, vec!["nash_gap", "phi_mu", "clock"]);
    let clock_rows = csv::Reader::from_path(out.join("clock.csv")).unwrap().records().count();
    let log_rows: usize = rec
        .seeds
        .iter()
        .map(|s| std::fs::read_to_string(dir.path().join(&s.log)).unwrap().lines().count())
        .sum();
    assert_eq!(clock_rows, log_rows);

    assert!(matches!(
        emit_plot_data(&rec, &SeriesSelection::Named(vec!["loss".into()]), &out),
        Err(CliError::UnknownSeries(_))
    ));
}

#[test]
fn absent_potential_series_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let rec = run(&learn_config("random"), dir.path());
    let err = emit_plot_data(&rec, &SeriesSelection::Named(vec!["phi_mu".into()]), dir.path()).unwrap_err();
    assert!(matches!(err, CliError::AbsentSeries(ref s) if s == "phi_mu"));
}

#[test]
fn flow_mode_writes_tagged_records() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
mode = "flow"

[game]
source = "generator"
family = "team"
seed = 2
states = 2
players = 2
actions = 2

[flow]
horizon = 5.0
step = 0.05
"#;
    let rec = run(text, dir.path());
    let log = std::fs::read_to_string(dir.path().join(&rec.seeds[0].log)).unwrap();
    assert_eq!(log.lines().count(), 101);
    assert!(log.lines().all(|l| l.contains("\"kind\":\"flow\"")));
    let files = emit_plot_data(&rec, &SeriesSelection::Named(vec!["phi_mu".into()]), dir.path()).unwrap();
    let mut reader = csv::Reader::from_path(&files[0]).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["tau", "seed", "phi_mu"]);
}

#[test]
fn kappa_and_analyze_modes() {
    let dir = tempfile::tempdir().unwrap();
    let text = r#"
mode = "kappa"
seeds = [1]

[game]
source = "generator"
family = "team"
seed = 5
states = 2
players = 2
actions = 2

[analysis]
samples = 100
"#;
    let rec = run(text, &dir.path().join("k"));
    assert!(rec.seeds[0].metrics["kappa_lower"] <= 1e-8);
    assert_eq!(rec.seeds[0].metrics["certified_upper"], 0.0);

    let text = text.replace("mode = \"kappa\"", "mode = \"analyze\"").replace("family = \"team\"", "family = \"dominant\"");
    let rec = run(&text, &dir.path().join("a"));
    let m = &rec.seeds[0].metrics;
    assert_eq!(m["pure_equilibria"], 1.0);
    assert_eq!(m["gamma_hat_0"], 0.0);
    assert!(!m.contains_key("d_star"));
}

#[test]
fn compare_team_game_is_consistent() {
    let game = make_team_game(1, GameShape::new(2, 2, 2)).unwrap();
    let phi = Potential::common_value(&game);
    let learner = LearnerConfig {
        theta: 0.01,
        horizon: 50_000,
        metric_period: 5_000,
        ..LearnerConfig::default()
    };
    let flow = FlowConfig {
        theta: 0.01,
        horizon: 30.0,
        ..FlowConfig::default()
    };
    let start = FlowStart::Uniform.profile(&game, 0);
    let rep = compare_learn_vs_flow(&game, &learner, &flow, &start, Some(&phi), 0.05).unwrap();
    assert_eq!(rep.verdict, Verdict::Consistent, "{rep:?}");
    assert!(rep.max_distance_matched_phi.is_some());

    // both stay near an equilibrium when started there
    let (opt, _) = joint_optimum(&game, 0, &SolverOptions::default()).unwrap();
    let rep = compare_learn_vs_flow(&game, &learner, &flow, &opt, Some(&phi), 0.05).unwrap();
    assert!(rep.learn_max_gap <= 0.05 && rep.flow_max_gap <= 0.05, "{rep:?}");

    let bad = FlowConfig { theta: 0.0, ..flow };
    assert!(matches!(
        compare_learn_vs_flow(&game, &learner, &bad, &start, None, 0.05),
        Err(CliError::ThetaMismatch { .. })
    ));
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, SINGLE_STATE).unwrap();
    let bin = env!("CARGO_BIN_EXE_nearpot");
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(&good)
        .arg("--out")
        .arg(dir.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, SINGLE_STATE.replace("gamma = 0.5", "gamma = 1.0")).unwrap();
    let status = Command::new(bin)
        .args(["run", "--config"])
        .arg(&bad)
        .env("NEARPOT_OUTPUT_DIR", dir.path().join("env-out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let out = Command::new(bin)
        .args(["emit", "--record"])
        .arg(dir.path().join("out").join("summary.json"))
        .args(["--series", "nash_gap"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no trajectory logs"));
}

#[test]
fn shipped_configs_validate() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["team_learn.toml", "team_flow.toml"] {
        let cfg = ExperimentConfig::load(&root.join(name)).unwrap();
        let game = cfg.game.build(&root).unwrap();
        cfg.validate(&game).unwrap();
    }
}
