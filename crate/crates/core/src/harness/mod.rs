//! Multi-drop Monte-Carlo runner and report writer.

pub mod config;
pub mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{associate_strongest, compute_gains, sample_shadowing};
use crate::error::{Error, Result};
use crate::femto_control::TraceRow;
use crate::macro_layer::{build_schedule, SubbandPlan};
use crate::pipeline::run_direction;
use crate::radio::Direction;
use crate::rate_model::{Mode, ModeEvaluator, RateReport};
use crate::topology::{build_grid, drop_users};

pub use config::ScenarioConfig;
pub use report::{compare_reports, emit_reports, AggregateReport, Formats};

/// Overrides the worker pool size when the config leaves it at 0.
pub const WORKERS_ENV: &str = "FFR_WORKERS";

#[derive(Debug, Clone)]
pub struct DirectionOutcome {
    pub direction: Direction,
    /// In the order of the configured modes.
    pub reports: Vec<RateReport>,
    /// Orthog bandwidth fraction (the subband mode's macro loss).
    pub eta: f64,
    /// `(receivers within target + 0.1 dB, receivers)` under the subband plan.
    pub within_target: (usize, usize),
    /// Per (macro receiver, subband) under the subband plan.
    pub noise_rise_db: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

#[derive(Debug, Clone)]
pub struct DropResult {
    pub index: usize,
    pub femto_links: usize,
    pub directions: Vec<DirectionOutcome>,
}

impl DropResult {
    pub fn report(&self, mode: Mode, direction: Direction) -> Option<&RateReport> {
        self.directions
            .iter()
            .filter(|d| d.direction == direction)
            .flat_map(|d| &d.reports)
            .find(|r| r.mode == mode)
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioOutput {
    pub report: AggregateReport,
    /// Completed drops in index order.
    pub drops: Vec<DropResult>,
}

impl ScenarioOutput {
    /// Per-link spectral efficiencies pooled over drops in index order.
    pub fn samples(&self, mode: Mode, direction: Direction) -> Vec<f64> {
        self.drops
            .iter()
            .filter_map(|d| d.report(mode, direction))
            .flat_map(|r| r.se.iter().copied())
            .collect()
    }
}

fn drop_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Simulates drop `index`: topology, channel, macro layer, then the
/// load-spillage loop and every configured mode in each direction.
pub fn simulate_drop(cfg: &ScenarioConfig, index: usize, record_trace: bool) -> Result<DropResult> {
    let topo = cfg.topology();
    let radio = cfg.radio();
    let mut control = cfg.control();
    control.record_trace = record_trace;
    let mut rng = drop_rng(cfg.seed, index);

    let grid = build_grid(&topo);
    let mut drop = drop_users(&grid, &topo, &mut rng);
    let sh = sample_shadowing(&drop, &cfg.shadowing(), &mut rng);
    let gains = compute_gains(&drop, &sh, &cfg.antenna());
    associate_strongest(&mut drop, &gains);

    let plan = SubbandPlan::ffr4(&drop, cfg.reuse1_fraction, radio.bandwidth_hz)?;
    let schedule = build_schedule(&drop, &gains, &plan, &radio, cfg.iot_target_db)?;
    let flat = if cfg.modes.contains(&Mode::NoSubband) {
        let p = SubbandPlan::reuse1(&drop, radio.bandwidth_hz);
        let s = build_schedule(&drop, &gains, &p, &radio, cfg.iot_target_db)?;
        Some((p, s))
    } else {
        None
    };

    let mut directions = Vec::with_capacity(cfg.directions.len());
    for &dir in &cfg.directions {
        let run = run_direction(&gains, &plan, &schedule, &radio, &control, dir)?;
        let flat_run = match &flat {
            Some((p, s)) => {
                let c = crate::femto_control::ControlConfig {
                    record_trace: false,
                    ..control.clone()
                };
                Some(run_direction(&gains, p, s, &radio, &c, dir)?)
            }
            None => None,
        };
        let mut eval = ModeEvaluator::new(&run, flat_run.as_ref(), &radio);
        // Always evaluated so orthog has its bandwidth fraction.
        let subband = eval.evaluate(Mode::Subband)?;
        let reports = cfg
            .modes
            .iter()
            .map(|&m| if m == Mode::Subband { Ok(subband.clone()) } else { eval.evaluate(m) })
            .collect::<Result<Vec<_>>>()?;
        directions.push(DirectionOutcome {
            direction: dir,
            reports,
            eta: eval.eta().unwrap_or(0.0),
            within_target: run.within_target(),
            noise_rise_db: run.noise_rise_db(),
            trace: run.control.trace,
        });
    }
    Ok(DropResult {
        index,
        femto_links: drop.num_femtos(),
        directions,
    })
}

fn worker_count(cfg: &ScenarioConfig) -> usize {
    if cfg.workers > 0 {
        return cfg.workers;
    }
    std::env::var(WORKERS_ENV).ok().and_then(|v| v.parse().ok()).unwrap_or(0)
}

/// Runs every drop on a worker pool and aggregates in drop order. A failed
/// drop is logged and skipped; more than 10% failures fail the scenario.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    log::info!("running {} drops on {} workers", cfg.num_drops, pool.current_num_threads());
    let results: Vec<Result<DropResult>> = pool.install(|| {
        (0..cfg.num_drops)
            .into_par_iter()
            .map(|d| simulate_drop(cfg, d, cfg.trace_drops.contains(&d)))
            .collect()
    });

    let mut drops = Vec::with_capacity(results.len());
    let mut failed = Vec::new();
    for (d, r) in results.into_iter().enumerate() {
        match r {
            Ok(x) => drops.push(x),
            Err(e) => {
                log::warn!("drop {d} aborted: {e}");
                failed.push(d);
            }
        }
    }
    if failed.len() * 10 > cfg.num_drops {
        return Err(Error::TooManyFailures {
            failed: failed.len(),
            total: cfg.num_drops,
        });
    }
    let report = AggregateReport::build(cfg, &drops, failed);
    Ok(ScenarioOutput { report, drops })
}
