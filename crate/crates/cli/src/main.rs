//! `ffrsim`: run scenarios, check the optimality oracles, trace one drop or
//! compare two summaries.
//!
//! Exit status is 0 on success, 1 when a scenario or check fails and 2 on
//! bad arguments or configuration.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use femto_ffr::femto_control::{verify_suite, write_trace_csv};
use femto_ffr::harness::{compare_reports, emit_reports, run_scenario, simulate_drop, AggregateReport, Formats, ScenarioConfig};
use femto_ffr::radio::Direction;
use femto_ffr::rate_model::Mode;
use femto_ffr::Error;

#[derive(Parser)]
#[command(name = "ffrsim", version, about = "Macro/femto FFR simulator with load-spillage power control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a multi-drop scenario and write reports.
    Run(Common),
    /// Check waterfilled allocations on random small instances.
    Verify {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
    /// Write the load-factor trace of a single drop.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long = "drop", default_value_t = 0)]
        drop_index: usize,
    },
    /// Percentile deltas between two summary.json files (b minus a).
    Compare { a: PathBuf, b: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum DirArg {
    Dl,
    Ul,
    Both,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    drops: Option<usize>,
    /// Comma-separated: subband, subband_jd, orthog, no_subband.
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<String>>,
    #[arg(long, value_enum)]
    direction: Option<DirArg>,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Format { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Run(e.to_string()),
        }
    }
}

impl Common {
    fn config(&self) -> Result<ScenarioConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => ScenarioConfig::load(p)?,
            None => ScenarioConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = self.drops {
            cfg.num_drops = d;
        }
        if let Some(ms) = &self.modes {
            cfg.modes = ms
                .iter()
                .map(|m| Mode::parse(m.trim()).ok_or_else(|| Failure::Usage(format!("unknown mode '{m}'"))))
                .collect::<Result<_, _>>()?;
        }
        match self.direction {
            Some(DirArg::Dl) => cfg.directions = vec![Direction::Downlink],
            Some(DirArg::Ul) => cfg.directions = vec![Direction::Uplink],
            Some(DirArg::Both) | None => {}
        }
        if let Some(o) = &self.out {
            cfg.output_dir = o.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(common) => {
            let cfg = common.config()?;
            let out = run_scenario(&cfg)?;
            emit_reports(&out, &cfg.output_dir, Formats::default())?;
            print!("{}", out.report.to_text());
            println!("\nreports written to {}", cfg.output_dir.display());
        }
        Command::Verify { instances, seed } => {
            let counts = verify_suite(instances, seed);
            println!("{counts}");
            if counts.pareto_pass != instances || counts.kkt_pass != instances {
                return Err(Failure::Run("oracle suite reported failures".into()));
            }
        }
        Command::Trace { common, drop_index } => {
            let cfg = common.config()?;
            let d = simulate_drop(&cfg, drop_index, true)?;
            std::fs::create_dir_all(&cfg.output_dir).map_err(|e| Failure::Run(format!("{}: {e}", cfg.output_dir.display())))?;
            for o in &d.directions {
                let path = cfg.output_dir.join(format!("trace_{}_{}.csv", drop_index, o.direction));
                write_trace_csv(&path, &o.trace)?;
                let (ok, total) = o.within_target;
                println!("{}: {ok}/{total} receivers within target, trace in {}", o.direction, path.display());
            }
        }
        Command::Compare { a, b } => {
            let (ra, rb) = (AggregateReport::load(&a)?, AggregateReport::load(&b)?);
            let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("{:<11} {:<3} {:<10} {:>9} {:>9} {:>9}", "mode", "dir", "stat", "a", "b", "delta");
            for d in compare_reports(&ra, &rb) {
                println!(
                    "{:<11} {:<3} {:<10} {:>9} {:>9} {:>9}",
                    d.mode.label(),
                    d.direction.label(),
                    d.stat,
                    f(d.a),
                    f(d.b),
                    f(d.delta)
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Run(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
