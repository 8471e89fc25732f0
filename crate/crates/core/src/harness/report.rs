//! Aggregation over drops and the files written for a scenario.
//!
//! | file | columns |
//! |---|---|
//! | `cdf_<mode>_<dir>.csv` | `mode,direction,x_bps_hz,F`, ascending in x |
//! | `raw_links.csv.gz` | `drop,link_id,mode,direction,se_bps_hz` |
//! | `trace_<drop>_<dir>.csv` | `iter,receiver,subband,q_db,target_db,s` |
//! | `summary.json` | see `schema/summary.schema.json` |
//! | `summary.txt` | the same numbers as a table |

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::{DropResult, ScenarioConfig, ScenarioOutput};
use crate::error::{Error, Result};
use crate::femto_control::write_trace_csv;
use crate::radio::Direction;
use crate::rate_model::Mode;
use crate::stats::{cdf_points, sorted, Summary};

pub const SCHEMA_VERSION: u32 = 1;

/// JSON schema of `summary.json`.
pub const SUMMARY_SCHEMA: &str = include_str!("../../schema/summary.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeStats {
    pub mode: Mode,
    pub direction: Direction,
    /// Femto spectral efficiency over all links of all drops, bps/Hz.
    pub se: Summary,
    pub macro_with_bps: f64,
    pub macro_without_bps: f64,
    /// `1 - Σ with / Σ without` over drops.
    pub macro_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectionStats {
    pub direction: Direction,
    /// Mean over drops of the orthog bandwidth fraction.
    pub eta_mean: f64,
    pub receivers: usize,
    pub receivers_within_target: usize,
    pub within_target_fraction: Option<f64>,
    /// Femto-caused rise per (macro receiver, subband), dB.
    pub noise_rise_db: Summary,
    pub noise_rise_within_0_6_db: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateReport {
    pub schema_version: u32,
    pub config: ScenarioConfig,
    pub drops_requested: usize,
    pub drops_completed: usize,
    pub failed_drops: Vec<usize>,
    pub rates: Vec<ModeStats>,
    pub directions: Vec<DirectionStats>,
}

fn fraction(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

impl AggregateReport {
    pub fn build(cfg: &ScenarioConfig, drops: &[DropResult], failed_drops: Vec<usize>) -> Self {
        let mut rates = Vec::new();
        let mut directions = Vec::new();
        for &dir in &cfg.directions {
            for &mode in &cfg.modes {
                let reports: Vec<_> = drops.iter().filter_map(|d| d.report(mode, dir)).collect();
                let se: Vec<f64> = reports.iter().flat_map(|r| r.se.iter().copied()).collect();
                let with: f64 = reports.iter().map(|r| r.macro_with_bps).sum();
                let without: f64 = reports.iter().map(|r| r.macro_without_bps).sum();
                rates.push(ModeStats {
                    mode,
                    direction: dir,
                    se: Summary::of(&se),
                    macro_with_bps: with,
                    macro_without_bps: without,
                    macro_loss: if without > 0.0 { (1.0 - with / without).clamp(0.0, 1.0) } else { 0.0 },
                });
            }
            let outs: Vec<_> = drops.iter().flat_map(|d| &d.directions).filter(|o| o.direction == dir).collect();
            let (ok, total) = outs
                .iter()
                .fold((0, 0), |(a, b), o| (a + o.within_target.0, b + o.within_target.1));
            let rise: Vec<f64> = outs.iter().flat_map(|o| o.noise_rise_db.iter().copied()).collect();
            let rise_ok = rise.iter().filter(|&&r| r <= 0.6).count();
            directions.push(DirectionStats {
                direction: dir,
                eta_mean: if outs.is_empty() { 0.0 } else { outs.iter().map(|o| o.eta).sum::<f64>() / outs.len() as f64 },
                receivers: total,
                receivers_within_target: ok,
                within_target_fraction: fraction(ok, total),
                noise_rise_db: Summary::of(&rise),
                noise_rise_within_0_6_db: fraction(rise_ok, rise.len()),
            });
        }
        Self {
            schema_version: SCHEMA_VERSION,
            config: cfg.clone(),
            drops_requested: cfg.num_drops,
            drops_completed: drops.len(),
            failed_drops,
            rates,
            directions,
        }
    }

    pub fn rate(&self, mode: Mode, direction: Direction) -> Option<&ModeStats> {
        self.rates.iter().find(|r| r.mode == mode && r.direction == direction)
    }

    pub fn direction(&self, direction: Direction) -> Option<&DirectionStats> {
        self.directions.iter().find(|d| d.direction == direction)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is serializable");
        s.push('\n');
        s
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn to_text(&self) -> String {
        let f = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.3}"));
        let mut s = String::new();
        let _ = writeln!(
            s,
            "drops: {}/{} completed, seed {}\n",
            self.drops_completed, self.drops_requested, self.config.seed
        );
        let _ = writeln!(s, "femto spectral efficiency (bps/Hz)");
        let _ = writeln!(
            s,
            "{:<11} {:<3} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>10}",
            "mode", "dir", "links", "mean", "p10", "p25", "p50", "p75", "p95", "macro loss"
        );
        for r in &self.rates {
            let _ = writeln!(
                s,
                "{:<11} {:<3} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9.2}%",
                r.mode.label(),
                r.direction.label(),
                r.se.count,
                f(r.se.mean),
                f(r.se.p10),
                f(r.se.p25),
                f(r.se.median),
                f(r.se.p75),
                f(r.se.p95),
                100.0 * r.macro_loss
            );
        }
        let _ = writeln!(s, "\nmacro receivers");
        let _ = writeln!(s, "{:<3} {:>7} {:>14} {:>15} {:>15}", "dir", "eta", "within target", "rise p95 (dB)", "rise <= 0.6 dB");
        for d in &self.directions {
            let _ = writeln!(
                s,
                "{:<3} {:>7.4} {:>14} {:>15} {:>15}",
                d.direction.label(),
                d.eta_mean,
                f(d.within_target_fraction),
                f(d.noise_rise_db.p95),
                f(d.noise_rise_within_0_6_db)
            );
        }
        s
    }
}

/// Which files [`emit_reports`] writes. Traces follow `trace_drops` in the
/// config and are written whenever present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Formats {
    pub cdf: bool,
    pub json: bool,
    pub text: bool,
    pub raw: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            cdf: true,
            json: true,
            text: true,
            raw: true,
        }
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::format(path, e)
}

fn write_cdf(path: &Path, mode: Mode, dir: Direction, samples: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    w.write_record(["mode", "direction", "x_bps_hz", "F"]).map_err(csv_err(path))?;
    for (x, f) in cdf_points(&sorted(samples)) {
        w.serialize((mode.label(), dir.label(), x, f)).map_err(csv_err(path))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_raw(path: &Path, out: &ScenarioOutput) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let gz = GzEncoder::new(BufWriter::new(file), Compression::default());
    let mut w = csv::Writer::from_writer(gz);
    w.write_record(["drop", "link_id", "mode", "direction", "se_bps_hz"]).map_err(csv_err(path))?;
    for d in &out.drops {
        for o in &d.directions {
            for r in &o.reports {
                for (j, se) in r.se.iter().enumerate() {
                    w.serialize((d.index, j, r.mode.label(), r.direction.label(), se))
                        .map_err(csv_err(path))?;
                }
            }
        }
    }
    let gz = w.into_inner().map_err(|e| Error::format(path, e))?;
    gz.finish().and_then(|mut b| b.flush()).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes the report files into `dir` (created if missing) and returns
/// their paths.
pub fn emit_reports(out: &ScenarioOutput, dir: &Path, formats: Formats) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let cfg = &out.report.config;
    if formats.cdf {
        for &d in &cfg.directions {
            for &m in &cfg.modes {
                let path = dir.join(format!("cdf_{}_{}.csv", m.label(), d.label()));
                write_cdf(&path, m, d, &out.samples(m, d))?;
                written.push(path);
            }
        }
    }
    if formats.json {
        let path = dir.join("summary.json");
        write_text(&path, &out.report.to_json())?;
        written.push(path);
    }
    if formats.text {
        let path = dir.join("summary.txt");
        write_text(&path, &out.report.to_text())?;
        written.push(path);
    }
    if formats.raw {
        let path = dir.join("raw_links.csv.gz");
        write_raw(&path, out)?;
        written.push(path);
    }
    for d in &out.drops {
        for o in d.directions.iter().filter(|o| !o.trace.is_empty()) {
            let path = dir.join(format!("trace_{}_{}.csv", d.index, o.direction.label()));
            write_trace_csv(&path, &o.trace)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// One percentile difference between two reports, `b - a`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub mode: Mode,
    pub direction: Direction,
    pub stat: &'static str,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub delta: Option<f64>,
}

/// Percentile deltas for every (mode, direction) present in both reports,
/// plus the macro loss.
pub fn compare_reports(a: &AggregateReport, b: &AggregateReport) -> Vec<Delta> {
    let mut out = Vec::new();
    for ra in &a.rates {
        let Some(rb) = b.rate(ra.mode, ra.direction) else { continue };
        let rows: [(&'static str, Option<f64>, Option<f64>); 8] = [
            ("mean", ra.se.mean, rb.se.mean),
            ("p5", ra.se.p5, rb.se.p5),
            ("p10", ra.se.p10, rb.se.p10),
            ("p25", ra.se.p25, rb.se.p25),
            ("p50", ra.se.median, rb.se.median),
            ("p75", ra.se.p75, rb.se.p75),
            ("p95", ra.se.p95, rb.se.p95),
            ("macro_loss", Some(ra.macro_loss), Some(rb.macro_loss)),
        ];
        for (stat, x, y) in rows {
            out.push(Delta {
                mode: ra.mode,
                direction: ra.direction,
                stat,
                a: x,
                b: y,
                delta: x.zip(y).map(|(x, y)| y - x),
            });
        }
    }
    out
}
