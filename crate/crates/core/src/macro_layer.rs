//! Macro layer: FFR subband plan, per-cell UE-to-subband assignment, DL
//! equal-PSD power, UL equal-receive-PSD power control at a fixed IoT, and
//! macro link rates with and without femto interference.
//!
//! Interference and signal levels returned by [`MacroLinks`] are power
//! spectral densities expressed in units of the victim's thermal noise PSD.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::channel::GainTables;
use crate::error::{Error, Result};
use crate::radio::{db_to_lin, lin_to_db, Direction, RadioConfig};
use crate::topology::NetworkDrop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlanMode {
    /// f0 reused everywhere plus three reuse-3 subbands.
    Ffr4,
    /// One subband over the whole band.
    Reuse1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandPlan {
    pub mode: PlanMode,
    pub reuse1_fraction: f64,
    /// Bandwidth fraction of each subband; sums to 1.
    pub fractions: Vec<f64>,
    /// Cell index to its reuse-3 subband (1..=3). Zero in reuse-1 mode.
    pub reuse3_assignment: Vec<usize>,
    pub bandwidth_hz: f64,
}

impl SubbandPlan {
    pub fn ffr4(drop: &NetworkDrop, p1: f64, bandwidth_hz: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 <= 1.0) {
            return Err(Error::Config(format!("reuse1_fraction {p1} must lie in (0, 1]")));
        }
        let r3 = (1.0 - p1) / 3.0;
        Ok(Self {
            mode: PlanMode::Ffr4,
            reuse1_fraction: p1,
            fractions: vec![p1, r3, r3, r3],
            reuse3_assignment: color_reuse3(drop),
            bandwidth_hz,
        })
    }

    pub fn reuse1(drop: &NetworkDrop, bandwidth_hz: f64) -> Self {
        Self {
            mode: PlanMode::Reuse1,
            reuse1_fraction: 1.0,
            fractions: vec![1.0],
            reuse3_assignment: vec![0; drop.num_cells()],
            bandwidth_hz,
        }
    }

    pub fn num_subbands(&self) -> usize {
        self.fractions.len()
    }

    pub fn subband_hz(&self, k: usize) -> f64 {
        self.fractions[k] * self.bandwidth_hz
    }

    /// Whether `cell` is allowed to schedule in subband `k`.
    pub fn cell_uses(&self, cell: usize, k: usize) -> bool {
        k == 0 || self.reuse3_assignment[cell] == k
    }
}

/// Fixed azimuth map: the cell with boresight index `s` uses `f_{s+1}`.
/// Facing sectors of neighboring sites have boresights 120° apart, so they
/// never collide.
pub fn color_reuse3(drop: &NetworkDrop) -> Vec<usize> {
    drop.cells.iter().map(|c| 1 + c.sector % 3).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroSchedule {
    pub num_cells: usize,
    pub num_subbands: usize,
    /// Per UE.
    pub serving_cell: Vec<usize>,
    pub subband: Vec<usize>,
    /// Fraction of the subband given to the UE.
    pub share: Vec<f64>,
    /// Linear DL pilot SINR under full reuse-1 load.
    pub pilot_sinr: Vec<f64>,
    /// `[cell * K + k]`: UE ids served by the cell in subband `k`, ascending.
    pub members: Vec<Vec<usize>>,
    /// `[cell * K + k]`: DL transmit PSD, mW/Hz.
    pub dl_psd: Vec<f64>,
    /// `[cell * K + k]`: UL receive PSD per UE, mW/Hz.
    pub ul_rx_psd: Vec<f64>,
    /// `[cell * K + k]`: set when the cell could not be placed at the IoT target.
    pub ul_flagged: Vec<bool>,
    pub iot_target_db: f64,
}

impl MacroSchedule {
    #[inline]
    pub fn idx(&self, cell: usize, k: usize) -> usize {
        cell * self.num_subbands + k
    }

    pub fn members(&self, cell: usize, k: usize) -> &[usize] {
        &self.members[self.idx(cell, k)]
    }

    /// UL transmit PSD of UE `u`, mW/Hz.
    pub fn ul_tx_psd(&self, gains: &GainTables, u: usize) -> f64 {
        let c = self.serving_cell[u];
        self.ul_rx_psd[self.idx(c, self.subband[u])] / gains.cell_mue(c, u)
    }

    /// Macro receivers of each subband: UE ids (DL) or cell ids with at
    /// least one scheduled UE (UL).
    pub fn victims(&self, direction: Direction) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_subbands];
        match direction {
            Direction::Downlink => {
                for (u, &k) in self.subband.iter().enumerate() {
                    out[k].push(u);
                }
            }
            Direction::Uplink => {
                for c in 0..self.num_cells {
                    for (k, v) in out.iter_mut().enumerate() {
                        if !self.members(c, k).is_empty() {
                            v.push(c);
                        }
                    }
                }
            }
        }
        out
    }
}

/// DL pilot SINR of every UE toward its serving cell with all cells
/// radiating `P/W` over the whole band.
pub fn pilot_sinr(drop: &NetworkDrop, gains: &GainTables, radio: &RadioConfig) -> Vec<f64> {
    let psd = db_to_lin(radio.macro_bs_power_dbm) / radio.bandwidth_hz;
    let noise = radio.ue_noise_psd() / psd;
    (0..gains.ues)
        .map(|u| {
            let s = drop.serving_cell[u];
            let total: f64 = (0..gains.cells).map(|c| gains.cell_mue(c, u)).sum();
            let sig = gains.cell_mue(s, u);
            sig / (total - sig + noise)
        })
        .collect()
}

/// Per cell, the top `ceil(p1·n)` UEs by pilot SINR go to f0 and the rest to
/// the cell's reuse-3 subband. Shares are equal within each (cell, subband).
/// Powers are left at zero; see [`set_dl_powers`] and [`set_ul_powers`].
pub fn assign_macro_ues(
    drop: &NetworkDrop,
    gains: &GainTables,
    plan: &SubbandPlan,
    radio: &RadioConfig,
) -> Result<MacroSchedule> {
    if drop.serving_cell.len() != drop.macro_ues.len() {
        return Err(Error::Dimension("macro UEs are not associated yet".into()));
    }
    Ok(assign_with_sinr(drop, plan, pilot_sinr(drop, gains, radio)))
}

/// Assignment step of [`assign_macro_ues`] for given pilot SINRs.
pub fn assign_with_sinr(drop: &NetworkDrop, plan: &SubbandPlan, sinr: Vec<f64>) -> MacroSchedule {
    let (nc, nk) = (drop.num_cells(), plan.num_subbands());
    let mut per_cell: Vec<Vec<usize>> = vec![Vec::new(); nc];
    for (u, &c) in drop.serving_cell.iter().enumerate() {
        per_cell[c].push(u);
    }
    let mut subband = vec![0; drop.macro_ues.len()];
    let mut members = vec![Vec::new(); nc * nk];
    for (c, ues) in per_cell.iter_mut().enumerate() {
        ues.sort_by(|&a, &b| sinr[b].total_cmp(&sinr[a]).then(a.cmp(&b)));
        let n_f0 = match plan.mode {
            PlanMode::Reuse1 => ues.len(),
            // The small offset keeps products like 0.5·10 from rounding up.
            PlanMode::Ffr4 => ((plan.reuse1_fraction * ues.len() as f64) - 1e-9).ceil() as usize,
        };
        for (rank, &u) in ues.iter().enumerate() {
            let k = if rank < n_f0 { 0 } else { plan.reuse3_assignment[c] };
            subband[u] = k;
            members[c * nk + k].push(u);
        }
    }
    let mut share = vec![0.0; subband.len()];
    for m in members.iter_mut() {
        m.sort_unstable();
        for &u in m.iter() {
            share[u] = 1.0 / m.len() as f64;
        }
    }
    MacroSchedule {
        num_cells: nc,
        num_subbands: nk,
        serving_cell: drop.serving_cell.clone(),
        subband,
        share,
        pilot_sinr: sinr,
        members,
        dl_psd: vec![0.0; nc * nk],
        ul_rx_psd: vec![0.0; nc * nk],
        ul_flagged: vec![false; nc * nk],
        iot_target_db: 10.0,
    }
}

/// Spreads each cell's total power uniformly over its occupied bandwidth.
pub fn set_dl_powers(schedule: &mut MacroSchedule, plan: &SubbandPlan, radio: &RadioConfig) {
    let total = db_to_lin(radio.macro_bs_power_dbm);
    let nk = schedule.num_subbands;
    for c in 0..schedule.num_cells {
        let occupied: f64 = (0..nk)
            .filter(|&k| !schedule.members(c, k).is_empty())
            .map(|k| plan.subband_hz(k))
            .sum();
        for k in 0..nk {
            let i = schedule.idx(c, k);
            schedule.dl_psd[i] = if occupied > 0.0 && !schedule.members[i].is_empty() {
                total / occupied
            } else {
                0.0
            };
        }
    }
}

/// Outcome of the UL power-control solve for one subband.
#[derive(Debug, Clone, PartialEq)]
pub struct UlSolve {
    pub cells: Vec<usize>,
    /// Receive PSD in BS noise units.
    pub rho: Vec<f64>,
    pub flagged: Vec<bool>,
}

/// Interference-coupling matrix of one subband in noise units:
/// `a[r][t]` is the interference at cell `cells[r]` per unit receive PSD at
/// cell `cells[t]`.
fn ul_coupling(schedule: &MacroSchedule, gains: &GainTables, k: usize, cells: &[usize]) -> DMatrix<f64> {
    let n = cells.len();
    DMatrix::from_fn(n, n, |r, t| {
        if r == t {
            return 0.0;
        }
        let (rx, tx) = (cells[r], cells[t]);
        schedule
            .members(tx, k)
            .iter()
            .map(|&u| schedule.share[u] * gains.cell_mue(rx, u) / gains.cell_mue(tx, u))
            .sum()
    })
}

/// Common receive PSD for subband `k`: every cell gets `min(α, ρmax_c)`,
/// with `α` set so the mean macro IoT over the subband's cells equals the
/// target. Cells held at their UE power limit are flagged. A per-cell exact
/// IoT is not used because `A ρ = const` generally has negative solutions
/// on irregular drops.
fn solve_ul_subband(
    schedule: &MacroSchedule,
    gains: &GainTables,
    plan: &SubbandPlan,
    radio: &RadioConfig,
    k: usize,
) -> UlSolve {
    let cells: Vec<usize> = (0..schedule.num_cells)
        .filter(|&c| !schedule.members(c, k).is_empty())
        .collect();
    let n = cells.len();
    if n == 0 {
        return UlSolve { cells, rho: vec![], flagged: vec![] };
    }
    let a = ul_coupling(schedule, gains, k, &cells);
    let colsum: Vec<f64> = (0..n).map(|t| a.column(t).sum() / n as f64).collect();
    let target = db_to_lin(schedule.iot_target_db) - 1.0;
    let pmax = db_to_lin(radio.macro_ue_max_dbm);
    let n0 = radio.bs_noise_psd();
    let rho_max: Vec<f64> = cells
        .iter()
        .map(|&c| {
            schedule
                .members(c, k)
                .iter()
                .map(|&u| pmax * gains.cell_mue(c, u) / (schedule.share[u] * plan.subband_hz(k) * n0))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean_iot = |alpha: f64| -> f64 {
        (0..n).map(|t| colsum[t] * alpha.min(rho_max[t])).sum()
    };
    let hi = rho_max.iter().cloned().fold(0.0, f64::max);
    let alpha = if mean_iot(hi) <= target {
        hi
    } else {
        let (mut lo, mut hi) = (0.0, hi);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if mean_iot(mid) < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let rho: Vec<f64> = rho_max.iter().map(|&m| alpha.min(m)).collect();
    let flagged = rho_max.iter().map(|&m| m <= alpha).collect();
    UlSolve { cells, rho, flagged }
}

/// UL power control: in every occupied (cell, subband) the served UEs share
/// one receive PSD, scaled so the subband's mean macro IoT hits the target.
pub fn set_ul_powers(
    schedule: &mut MacroSchedule,
    gains: &GainTables,
    plan: &SubbandPlan,
    radio: &RadioConfig,
) {
    let n0 = radio.bs_noise_psd();
    for k in 0..schedule.num_subbands {
        let sol = solve_ul_subband(schedule, gains, plan, radio, k);
        for (x, &c) in sol.cells.iter().enumerate() {
            let i = schedule.idx(c, k);
            schedule.ul_rx_psd[i] = sol.rho[x] * n0;
            schedule.ul_flagged[i] = sol.flagged[x];
        }
    }
}

/// Builds the schedule for `plan`: assignment, DL and UL powers.
pub fn build_schedule(
    drop: &NetworkDrop,
    gains: &GainTables,
    plan: &SubbandPlan,
    radio: &RadioConfig,
    iot_target_db: f64,
) -> Result<MacroSchedule> {
    let mut s = assign_macro_ues(drop, gains, plan, radio)?;
    s.iot_target_db = iot_target_db;
    set_dl_powers(&mut s, plan, radio);
    set_ul_powers(&mut s, gains, plan, radio);
    Ok(s)
}

/// Macro-only UL interference PSD at `cell` in subband `k`, mW/Hz.
pub fn ul_interference(schedule: &MacroSchedule, gains: &GainTables, cell: usize, k: usize) -> f64 {
    let mut i = 0.0;
    for c in 0..schedule.num_cells {
        if c == cell {
            continue;
        }
        for &u in schedule.members(c, k) {
            i += schedule.share[u] * schedule.ul_tx_psd(gains, u) * gains.cell_mue(cell, u);
        }
    }
    i
}

/// Femto-free victim links of one direction, in victim noise units.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroLinks {
    pub direction: Direction,
    /// `receivers[k]`: UE ids (DL) or cell ids (UL).
    pub receivers: Vec<Vec<usize>>,
    pub signal: Vec<Vec<f64>>,
    pub interference: Vec<Vec<f64>>,
    /// Per UE: `(k, i)` position of the receiver that carries its link.
    pub ue_slot: Vec<(usize, usize)>,
}

impl MacroLinks {
    pub fn num_subbands(&self) -> usize {
        self.receivers.len()
    }

    /// Spectral efficiency of receiver `(k, i)` given femto interference `q`.
    pub fn se(&self, radio: &RadioConfig, k: usize, i: usize, q: f64) -> f64 {
        radio.spectral_efficiency(self.signal[k][i] / (1.0 + self.interference[k][i] + q))
    }

    pub fn zeros_like(&self) -> Vec<Vec<f64>> {
        self.receivers.iter().map(|r| vec![0.0; r.len()]).collect()
    }
}

pub fn macro_links(schedule: &MacroSchedule, gains: &GainTables, radio: &RadioConfig, direction: Direction) -> MacroLinks {
    let receivers = schedule.victims(direction);
    let nk = schedule.num_subbands;
    let mut signal = Vec::with_capacity(nk);
    let mut interference = Vec::with_capacity(nk);
    let mut ue_slot = vec![(0, 0); schedule.subband.len()];
    match direction {
        Direction::Downlink => {
            let n0 = radio.ue_noise_psd();
            for (k, rxs) in receivers.iter().enumerate() {
                let mut s = Vec::with_capacity(rxs.len());
                let mut i = Vec::with_capacity(rxs.len());
                for (x, &u) in rxs.iter().enumerate() {
                    let serv = schedule.serving_cell[u];
                    let mut tot = 0.0;
                    let mut own = 0.0;
                    for c in 0..schedule.num_cells {
                        let p = schedule.dl_psd[schedule.idx(c, k)] * gains.cell_mue(c, u);
                        if c == serv {
                            own = p;
                        } else {
                            tot += p;
                        }
                    }
                    s.push(own / n0);
                    i.push(tot / n0);
                    ue_slot[u] = (k, x);
                }
                signal.push(s);
                interference.push(i);
            }
        }
        Direction::Uplink => {
            let n0 = radio.bs_noise_psd();
            for (k, rxs) in receivers.iter().enumerate() {
                let mut s = Vec::with_capacity(rxs.len());
                let mut i = Vec::with_capacity(rxs.len());
                for (x, &c) in rxs.iter().enumerate() {
                    s.push(schedule.ul_rx_psd[schedule.idx(c, k)] / n0);
                    i.push(ul_interference(schedule, gains, c, k) / n0);
                    for &u in schedule.members(c, k) {
                        ue_slot[u] = (k, x);
                    }
                }
                signal.push(s);
                interference.push(i);
            }
        }
    }
    MacroLinks {
        direction,
        receivers,
        signal,
        interference,
        ue_slot,
    }
}

/// Per-UE macro rate in bps given femto interference `q[k][i]` in victim
/// noise units (zeros for the femto-free reference).
pub fn macro_rates(
    schedule: &MacroSchedule,
    plan: &SubbandPlan,
    links: &MacroLinks,
    radio: &RadioConfig,
    q: &[Vec<f64>],
) -> Vec<f64> {
    (0..schedule.subband.len())
        .map(|u| {
            let (k, i) = links.ue_slot[u];
            schedule.share[u] * plan.subband_hz(k) * links.se(radio, k, i, q[k][i])
        })
        .collect()
}

/// Writes `ue_id,cell,subband,share,psd,sinr_db,rate` for one direction.
/// `psd` is the DL transmit PSD toward the UE or the UE's UL transmit PSD.
#[allow(clippy::too_many_arguments)]
pub fn write_schedule_csv(
    path: &Path,
    schedule: &MacroSchedule,
    gains: &GainTables,
    plan: &SubbandPlan,
    links: &MacroLinks,
    radio: &RadioConfig,
    q: &[Vec<f64>],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::format(path, e))?;
    w.write_record(["ue_id", "cell", "subband", "share", "psd", "sinr_db", "rate"])
        .map_err(|e| Error::format(path, e))?;
    let rates = macro_rates(schedule, plan, links, radio, q);
    for u in 0..schedule.subband.len() {
        let (k, i) = links.ue_slot[u];
        let c = schedule.serving_cell[u];
        let psd = match links.direction {
            Direction::Downlink => schedule.dl_psd[schedule.idx(c, k)],
            Direction::Uplink => schedule.ul_tx_psd(gains, u),
        };
        let sinr = links.signal[k][i] / (1.0 + links.interference[k][i] + q[k][i]);
        w.write_record([
            u.to_string(),
            c.to_string(),
            k.to_string(),
            format!("{:.6}", schedule.share[u]),
            format!("{psd:e}"),
            format!("{:.4}", lin_to_db(sinr)),
            format!("{:.1}", rates[u]),
        ])
        .map_err(|e| Error::format(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
