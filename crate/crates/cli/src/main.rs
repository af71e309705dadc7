use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use nearpot_cli::config::OUTPUT_DIR_ENV;
use nearpot_cli::{
    compare_learn_vs_flow, emit_plot_data, resolve_output_dir, run_experiment, CliError,
    ExperimentConfig, RunRecord, SeriesSelection,
};

/// Markov-game learning and analysis experiments.
#[derive(Debug, Parser)]
#[command(name = "nearpot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run an experiment config and write logs plus summary.json.
    Run(RunArgs),
    /// Write CSV tables from the logs of a finished run.
    Emit(EmitArgs),
    /// Run the learner and the flow from the same start and compare them.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct Overrides {
    /// Experiment config (TOML).
    #[arg(short, long)]
    config: PathBuf,
    /// Replace the seed list (repeatable).
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Iterates between metric snapshots.
    #[arg(long)]
    metric_period: Option<u64>,
    /// Flow stops once the Nash gap is at or below this.
    #[arg(long)]
    stop_gap: Option<f64>,
    /// NE(delta) levels tracked by the flow (repeatable).
    #[arg(long = "ne-threshold")]
    ne_thresholds: Vec<f64>,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory (default: config, then $NEARPOT_OUTPUT_DIR, then ./runs).
    #[arg(short, long, env = OUTPUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EmitArgs {
    /// summary.json of a finished run.
    #[arg(short, long)]
    record: PathBuf,
    /// Series to emit (repeatable); omit with --all.
    #[arg(short, long = "series", required_unless_present = "all")]
    series: Vec<String>,
    #[arg(long, conflicts_with = "series")]
    all: bool,
    /// Directory for the CSV files (default: next to the record).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    overrides: Overrides,
    /// Nash-gap level for the consistency verdict.
    #[arg(long, default_value_t = 1e-2)]
    delta: f64,
    /// Write the report here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn load(o: &Overrides) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&o.config)?;
    if !o.seeds.is_empty() {
        cfg.seeds = o.seeds.clone();
    }
    if let Some(p) = o.metric_period {
        cfg.metric_period = Some(p);
    }
    if let Some(g) = o.stop_gap {
        cfg.flow.stop_gap = Some(g);
    }
    if !o.ne_thresholds.is_empty() {
        cfg.flow.ne_thresholds = o.ne_thresholds.clone();
    }
    Ok(cfg)
}

fn base_dir(config: &Path) -> PathBuf {
    config.parent().map(Path::to_path_buf).unwrap_or_default()
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args.overrides)?;
            let out = resolve_output_dir(&cfg, args.out.as_deref());
            let record = run_experiment(&cfg, &base_dir(&args.overrides.config), &out)?;
            for s in &record.seeds {
                let metrics: Vec<String> = s.metrics.iter().map(|(k, v)| format!("{k}={v:.6e}")).collect();
                println!("seed {}: {}", s.seed, metrics.join(" "));
            }
            println!("summary: {}", out.join(nearpot_cli::SUMMARY_FILE).display());
            if record.total_violations > 0 {
                eprintln!("{} invariant violations recorded", record.total_violations);
                return Ok(ExitCode::from(3));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Emit(args) => {
            let record = RunRecord::load(&args.record)?;
            let selection = if args.all {
                SeriesSelection::All
            } else {
                SeriesSelection::Named(args.series)
            };
            let out = args.out.unwrap_or_else(|| base_dir(&args.record));
            for path in emit_plot_data(&record, &selection, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare(args) => {
            let cfg = load(&args.overrides)?;
            let game = cfg.game.build(&base_dir(&args.overrides.config))?;
            let potential = cfg.analysis.potential.resolve(&game)?;
            let learner = cfg.learner_for(cfg.effective_seeds()[0]);
            learner.validate().map_err(|e| CliError::Config(format!("learner: {e}")))?;
            cfg.flow.validate(&game).map_err(|e| CliError::Config(format!("flow: {e}")))?;
            let start = cfg.analysis.flow_start.profile(&game, learner.seed);
            let report = compare_learn_vs_flow(&game, &learner, &cfg.flow, &start, potential.as_ref(), args.delta)?;
            let text = serde_json::to_string_pretty(&report).expect("report serializes");
            match args.out {
                Some(p) => std::fs::write(&p, text + "\n").map_err(|e| CliError::io(&p, e))?,
                None => println!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
