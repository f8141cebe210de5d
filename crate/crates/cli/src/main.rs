//! `airsim` command-line runner.
//!
//! Every failure is reported as a single line `error: <kind>: <message>` on
//! stderr with a nonzero exit code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airsim::engine::{self, BURN_IN_STEPS};
use airsim::predictor;
use airsim::report::{self, Arm};
use airsim::{ScenarioConfig, Species};
use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Parser, Debug)]
#[command(name = "airsim", version, about = "Multi-agent air-pollution crisis simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its per-step CSV.
    Run(RunArgs),
    /// Run the four cooperation × leak arms with a shared seed.
    Matrix(MatrixArgs),
    /// Generate open-loop data and fit the per-species forecasters.
    TrainPredictor(CommonArgs),
    /// Parse and check a scenario file.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// Scenario file; built-in defaults when omitted.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output directory (overrides `output_dir`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, value_name = "on|off")]
    coop: Option<Switch>,
    #[arg(long, value_name = "on|off")]
    leaks: Option<Switch>,
    /// Also write per-agent decisions, probabilities and rewards.
    #[arg(long)]
    trace_agents: bool,
}

#[derive(Args, Debug)]
struct MatrixArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    trace_agents: bool,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    #[arg(long, value_name = "PATH")]
    scenario: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Switch {
    On,
    Off,
}

impl Switch {
    fn is_on(self) -> bool {
        matches!(self, Switch::On)
    }
}

#[derive(Debug, Error)]
enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] airsim::ConfigError),
    #[error("engine: {0}")]
    Engine(#[from] airsim::EngineError),
    #[error("predictor: {0}")]
    Predictor(#[from] airsim::PredictorError),
    #[error("io: {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.to_path_buf(), source }
}

fn load_config(common: &CommonArgs) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &common.scenario {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: RunArgs) -> Result<(), CliError> {
    let mut cfg = load_config(&args.common)?;
    if let Some(c) = args.coop {
        cfg.cooperation = c.is_on();
    }
    if let Some(l) = args.leaks {
        cfg.leaks = l.is_on();
    }
    let arm = Arm { cooperation: cfg.cooperation, leaks: cfg.leaks };
    let matrix = report::run_matrix(&cfg, &[arm], args.trace_agents)?;
    let rows = report::write_matrix(&matrix, &cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    print!("{}", report::format_comparison(&rows));
    println!("wrote {}", cfg.output_dir.join(format!("{arm}.csv")).display());
    Ok(())
}

fn matrix(args: MatrixArgs) -> Result<(), CliError> {
    let cfg = load_config(&args.common)?;
    let matrix = report::run_matrix(&cfg, &Arm::ALL, args.trace_agents)?;
    let rows = report::write_matrix(&matrix, &cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    print!("{}", report::format_comparison(&rows));
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn train_predictor(args: CommonArgs) -> Result<(), CliError> {
    let cfg = load_config(&args)?;
    let records = engine::open_loop_records(&cfg)?;
    let pairs = engine::training_pairs(&records[BURN_IN_STEPS.min(records.len())..]);
    let nets = engine::train_on_records(&cfg, &records)?;
    std::fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    println!("{:<8} {:>8} {:>14} {:>16}", "species", "samples", "rmse ug/m3", "persistence");
    for s in Species::ALL {
        let path = cfg.output_dir.join(format!("{}.net", s.tag()));
        nets[s].save(&path)?;
        let n = pairs[s].len() as f64;
        let mut model = 0.0;
        let mut persistence = 0.0;
        for (x, y) in &pairs[s] {
            model += (predictor::forecast(&nets[s], x)? - y).powi(2);
            persistence += (x.aggregated_concentration - y).powi(2);
        }
        println!("{:<8} {:>8} {:>14.3} {:>16.3}", s.to_string(), pairs[s].len(), (model / n).sqrt(), (persistence / n).sqrt());
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn validate(args: ValidateArgs) -> Result<(), CliError> {
    let cfg = ScenarioConfig::load(&args.scenario)?;
    cfg.validate()?;
    println!(
        "ok: {} controlled + {} uncontrolled sources, {} boxes, {} steps, seed {}",
        3 * cfg.controlled_per_species,
        if cfg.leaks { 3 * cfg.uncontrolled_per_species } else { 0 },
        cfg.boxes,
        cfg.total_steps(),
        cfg.seed
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            report_error(&CliError::Usage(first.trim_start_matches("error: ").to_string()));
            return ExitCode::from(2);
        }
    };
    let outcome = match cli.command {
        Command::Run(a) => run(a),
        Command::Matrix(a) => matrix(a),
        Command::TrainPredictor(a) => train_predictor(a),
        Command::Validate(a) => validate(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report_error(&e);
            ExitCode::FAILURE
        }
    }
}

fn report_error(e: &CliError) {
    let line = e.to_string().replace(['\n', '\r'], " ");
    eprintln!("error: {line}");
}
