//! Femto link rates: treat-interference-as-noise, joint detection of the
//! strongest macro interferer, and the four comparison modes.
//!
//! All powers here are PSDs in units of the femto receiver's thermal noise.

use serde::{Deserialize, Serialize};

use crate::channel::GainTables;
use crate::error::{Error, Result};
use crate::femto_control::FemtoReceivers;
use crate::macro_layer::{MacroLinks, MacroSchedule};
use crate::pipeline::DirectionRun;
use crate::radio::{Direction, RadioConfig};

/// Part of the dominant macro interferer's signal that overlaps one slice
/// of the femto's subband.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    /// Fraction of the subband.
    pub share: f64,
    /// Received interference PSD within the slice.
    pub power: f64,
    /// Spectral efficiency the macro link in this slice is scheduled at.
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandBudget {
    /// Serving gain times own PSD.
    pub signal: f64,
    /// Subband-averaged macro interference, dominant interferer included.
    pub macro_interference: f64,
    pub femto_interference: f64,
    /// Strongest macro interferer: in the DL a cell, sliced by the UEs it
    /// serves; in the UL a single UE, present only in its own slice. Empty
    /// when no macro signal is present.
    pub dominant: Vec<Slice>,
}

impl SubbandBudget {
    pub fn dominant_average(&self) -> f64 {
        self.dominant.iter().map(|s| s.share * s.power).sum()
    }

    /// Everything but own signal and the dominant interferer, noise included.
    pub fn residual(&self) -> f64 {
        (1.0 + self.macro_interference - self.dominant_average()).max(1.0) + self.femto_interference
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    /// Subband bandwidth fractions.
    pub weights: Vec<f64>,
    pub subbands: Vec<SubbandBudget>,
}

/// IAN spectral efficiency of one subband.
pub fn subband_se_ian(b: &SubbandBudget, radio: &RadioConfig) -> f64 {
    radio.spectral_efficiency(b.signal / (1.0 + b.macro_interference + b.femto_interference))
}

/// `Σ_k w_k min(5, log2(1 + SINR_k / Γ))` with all interference as noise.
pub fn femto_rate_ian(budget: &LinkBudget, radio: &RadioConfig) -> f64 {
    budget
        .weights
        .iter()
        .zip(&budget.subbands)
        .map(|(w, b)| w * subband_se_ian(b, radio))
        .sum()
}

/// Best own rate inside the two-user MAC region when the interferer (power
/// `i1`) is decoded at its scheduled rate `r_i`; residual noise `z`. `None`
/// when `r_i` is not decodable even interference-free.
pub fn jd_rate(s: f64, i1: f64, z: f64, r_i: f64, gap: f64) -> Option<f64> {
    let c = |x: f64| (1.0 + x / (gap * z)).log2();
    if r_i > c(i1) {
        return None;
    }
    Some(c(s).min(c(s + i1) - r_i).max(0.0))
}

/// JD spectral efficiency of one subband: per slice the better of JD and
/// IAN, and never below whole-subband IAN. Capped.
pub fn subband_se_jd(b: &SubbandBudget, radio: &RadioConfig) -> f64 {
    let ian = subband_se_ian(b, radio);
    if b.dominant.is_empty() || b.signal <= 0.0 {
        return ian;
    }
    let gap = radio.gap();
    let z = b.residual();
    let sliced: f64 = b
        .dominant
        .iter()
        .map(|sl| {
            let slice_ian = (1.0 + b.signal / (gap * (z + sl.power))).log2();
            let jd = jd_rate(b.signal, sl.power, z, sl.rate, gap).unwrap_or(0.0);
            sl.share * jd.max(slice_ian).min(radio.max_se)
        })
        .sum();
    ian.max(sliced).min(radio.max_se)
}

pub fn femto_rate_jd(budget: &LinkBudget, radio: &RadioConfig) -> f64 {
    budget
        .weights
        .iter()
        .zip(&budget.subbands)
        .map(|(w, b)| w * subband_se_jd(b, radio))
        .sum()
}

/// Per-femto budgets for final powers `p[j][k]` and final femto
/// interference `q[k][i]` at the macro receivers (which sets the rates the
/// macro links are scheduled at).
#[allow(clippy::too_many_arguments)]
pub fn link_budgets(
    direction: Direction,
    schedule: &MacroSchedule,
    gains: &GainTables,
    links: &MacroLinks,
    radio: &RadioConfig,
    femtos: &FemtoReceivers,
    p: &[Vec<f64>],
    q: &[Vec<f64>],
) -> Vec<LinkBudget> {
    let n = femtos.num_femtos();
    let nk = femtos.weights.len();
    let ff = femtos.femto_interference(p);
    let n0 = radio.femto_rx_noise_psd(direction);
    let ue_se = |u: usize| {
        let (k, i) = links.ue_slot[u];
        links.se(radio, k, i, q[k][i])
    };
    let mut ues = vec![Vec::new(); nk];
    for (u, &k) in schedule.subband.iter().enumerate() {
        ues[k].push(u);
    }
    (0..n)
        .map(|j| {
            let subbands = (0..nk)
                .map(|k| {
                    let (total, dominant) = match direction {
                        Direction::Downlink => {
                            // Each cell radiates one PSD across the subband,
                            // split among the UEs it serves.
                            let power = |c: usize| schedule.dl_psd[schedule.idx(c, k)] * gains.cell_fue(c, j) / n0;
                            let total: f64 = (0..schedule.num_cells).map(power).sum();
                            let best = (0..schedule.num_cells)
                                .filter(|&c| power(c) > 0.0)
                                .max_by(|&a, &b| power(a).total_cmp(&power(b)));
                            let dominant = best
                                .map(|c| {
                                    schedule
                                        .members(c, k)
                                        .iter()
                                        .map(|&u| Slice {
                                            share: schedule.share[u],
                                            power: power(c),
                                            rate: ue_se(u),
                                        })
                                        .collect()
                                })
                                .unwrap_or_default();
                            (total, dominant)
                        }
                        Direction::Uplink => {
                            // Each macro UE occupies only its own slice.
                            let mut total = 0.0;
                            let mut best: Option<(usize, f64)> = None;
                            for &u in &ues[k] {
                                let power = schedule.ul_tx_psd(gains, u) * gains.fbs_mue[j * gains.ues + u] / n0;
                                total += schedule.share[u] * power;
                                if power > 0.0 && best.map_or(true, |(_, b)| power > b) {
                                    best = Some((u, power));
                                }
                            }
                            let dominant = best
                                .map(|(u, power)| {
                                    vec![Slice {
                                        share: schedule.share[u],
                                        power,
                                        rate: ue_se(u),
                                    }]
                                })
                                .unwrap_or_default();
                            (total, dominant)
                        }
                    };
                    SubbandBudget {
                        signal: femtos.serving[j] * p[j][k],
                        macro_interference: total,
                        femto_interference: ff[j][k],
                        dominant,
                    }
                })
                .collect();
            LinkBudget {
                weights: femtos.weights.clone(),
                subbands,
            }
        })
        .collect()
}

/// Femtos alone on a fraction `eta` of the band at full power, macro-free.
/// Spectral efficiency is normalized to the whole band.
pub fn orthog_rates(femtos: &FemtoReceivers, eta: f64, radio: &RadioConfig) -> Vec<f64> {
    let n = femtos.num_femtos();
    if !(eta > 0.0) {
        return vec![0.0; n];
    }
    let psd = 1.0 / eta;
    let mut interf = vec![0.0; n];
    for l in 0..n {
        for (j, g) in femtos.cross[l * n..(l + 1) * n].iter().enumerate() {
            interf[j] += g * psd;
        }
    }
    (0..n)
        .map(|j| eta * radio.spectral_efficiency(femtos.serving[j] * psd / (1.0 + interf[j])))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Subband,
    SubbandJd,
    Orthog,
    NoSubband,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Subband, Mode::SubbandJd, Mode::Orthog, Mode::NoSubband];

    pub fn label(self) -> &'static str {
        match self {
            Mode::Subband => "subband",
            Mode::SubbandJd => "subband_jd",
            Mode::Orthog => "orthog",
            Mode::NoSubband => "no_subband",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Mode::ALL.into_iter().find(|m| m.label() == s || m.label().replace('_', "-") == s)
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Rates of one mode and direction in one drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub mode: Mode,
    pub direction: Direction,
    /// Per femto link, bps/Hz over the whole band.
    pub se: Vec<f64>,
    /// Sum of macro UE rates with femtos active, bps.
    pub macro_with_bps: f64,
    /// Same without femtos.
    pub macro_without_bps: f64,
}

impl RateReport {
    pub fn macro_loss(&self) -> f64 {
        if self.macro_without_bps > 0.0 {
            (1.0 - self.macro_with_bps / self.macro_without_bps).clamp(0.0, 1.0)
        } else {
            0.0
        }
    }
}

/// Evaluates modes for one drop and direction. Orthog borrows its
/// bandwidth fraction from the subband mode's macro loss, so the subband
/// mode has to be evaluated first.
pub struct ModeEvaluator<'a> {
    subband: &'a DirectionRun,
    no_subband: Option<&'a DirectionRun>,
    radio: &'a RadioConfig,
    eta: Option<f64>,
}

impl<'a> ModeEvaluator<'a> {
    pub fn new(subband: &'a DirectionRun, no_subband: Option<&'a DirectionRun>, radio: &'a RadioConfig) -> Self {
        Self {
            subband,
            no_subband,
            radio,
            eta: None,
        }
    }

    /// Orthog bandwidth fraction, once the subband mode has run.
    pub fn eta(&self) -> Option<f64> {
        self.eta
    }

    pub fn evaluate(&mut self, mode: Mode) -> Result<RateReport> {
        let run = self.subband;
        let (with, without) = (run.macro_with_bps(), run.macro_without_bps());
        let report = |se, with| RateReport {
            mode,
            direction: run.direction,
            se,
            macro_with_bps: with,
            macro_without_bps: without,
        };
        match mode {
            Mode::Subband => {
                let se = run.budgets.iter().map(|b| femto_rate_ian(b, self.radio)).collect();
                let r = report(se, with);
                self.eta = Some(r.macro_loss());
                Ok(r)
            }
            Mode::SubbandJd => Ok(report(
                run.budgets.iter().map(|b| femto_rate_jd(b, self.radio)).collect(),
                with,
            )),
            Mode::Orthog => {
                let eta = self.eta.ok_or_else(|| Error::Ordering { mode: mode.to_string() })?;
                Ok(report(orthog_rates(&run.femtos, eta, self.radio), (1.0 - eta) * without))
            }
            Mode::NoSubband => {
                let ns = self
                    .no_subband
                    .ok_or_else(|| Error::Config("no_subband mode needs a reuse-1 run".into()))?;
                Ok(RateReport {
                    mode,
                    direction: ns.direction,
                    se: ns.budgets.iter().map(|b| femto_rate_ian(b, self.radio)).collect(),
                    macro_with_bps: ns.macro_with_bps(),
                    macro_without_bps: ns.macro_without_bps(),
                })
            }
        }
    }
}
