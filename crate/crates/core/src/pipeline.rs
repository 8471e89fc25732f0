//! One drop, one direction: macro links, femto receivers, the load-spillage
//! loop and the resulting link budgets.

use crate::channel::{build_gain_matrix, GainMatrix, GainTables};
use crate::error::Result;
use crate::femto_control::{
    run_load_spillage, set_targets, within_tenth_db, ControlConfig, FemtoReceivers, LoadSpillageOutcome,
};
use crate::macro_layer::{macro_links, macro_rates, MacroLinks, MacroSchedule, SubbandPlan};
use crate::radio::{lin_to_db, Direction, RadioConfig};
use crate::rate_model::{link_budgets, LinkBudget};

/// What femto receivers see in `direction`, normalized to their noise and
/// to the femto's full-band maximum PSD.
pub fn femto_receivers(
    schedule: &MacroSchedule,
    gains: &GainTables,
    plan: &SubbandPlan,
    radio: &RadioConfig,
    direction: Direction,
) -> FemtoReceivers {
    let n = gains.femtos;
    let nk = plan.num_subbands();
    let n0 = radio.femto_rx_noise_psd(direction);
    let tx = radio.femto_tx_max_psd(direction) / n0;
    let mut macro_interference = vec![vec![0.0; nk]; n];
    match direction {
        Direction::Downlink => {
            for (j, mi) in macro_interference.iter_mut().enumerate() {
                for c in 0..schedule.num_cells {
                    for (k, v) in mi.iter_mut().enumerate() {
                        *v += schedule.dl_psd[schedule.idx(c, k)] * gains.cell_fue(c, j) / n0;
                    }
                }
            }
        }
        Direction::Uplink => {
            for u in 0..schedule.subband.len() {
                let k = schedule.subband[u];
                let psd = schedule.share[u] * schedule.ul_tx_psd(gains, u) / n0;
                for (j, mi) in macro_interference.iter_mut().enumerate() {
                    mi[k] += psd * gains.fbs_mue[j * gains.ues + u];
                }
            }
        }
    }
    let cross = match direction {
        Direction::Downlink => &gains.fbs_fue,
        Direction::Uplink => &gains.fue_fbs,
    };
    FemtoReceivers {
        weights: plan.fractions.clone(),
        serving: gains.serving.iter().map(|g| g * tx).collect(),
        macro_interference,
        cross: cross.iter().map(|g| g * tx).collect(),
        gap: radio.gap(),
    }
}

/// Femto-to-macro gains normalized so interference is in victim noise units.
pub fn victim_gains(
    gains: &GainTables,
    links: &MacroLinks,
    radio: &RadioConfig,
    direction: Direction,
) -> Result<GainMatrix> {
    let g = build_gain_matrix(gains, &links.receivers, links.num_subbands(), direction)?;
    Ok(g.scaled(radio.femto_tx_max_psd(direction) / radio.victim_noise_psd(direction)))
}

#[derive(Debug, Clone)]
pub struct DirectionRun {
    pub direction: Direction,
    pub plan: SubbandPlan,
    pub schedule: MacroSchedule,
    pub links: MacroLinks,
    pub femtos: FemtoReceivers,
    pub control: LoadSpillageOutcome,
    pub budgets: Vec<LinkBudget>,
    /// Per macro UE, bps.
    pub macro_with: Vec<f64>,
    pub macro_without: Vec<f64>,
}

impl DirectionRun {
    pub fn macro_with_bps(&self) -> f64 {
        self.macro_with.iter().sum()
    }

    pub fn macro_without_bps(&self) -> f64 {
        self.macro_without.iter().sum()
    }

    /// `(receivers at or below target + 0.1 dB, receivers)` after the last
    /// iteration.
    pub fn within_target(&self) -> (usize, usize) {
        let loads = &self.control.loads;
        let mut ok = 0;
        let mut total = 0;
        for (qk, tk) in loads.q.iter().zip(&loads.target) {
            for (&q, &t) in qk.iter().zip(tk) {
                total += 1;
                ok += within_tenth_db(q, t) as usize;
            }
        }
        (ok, total)
    }

    /// Rise of each macro receiver's interference-plus-noise floor caused by
    /// the femtos, dB, flattened over subbands.
    pub fn noise_rise_db(&self) -> Vec<f64> {
        let q = &self.control.loads.q;
        self.links
            .interference
            .iter()
            .zip(q)
            .flat_map(|(ik, qk)| ik.iter().zip(qk).map(|(i, q)| lin_to_db((1.0 + i + q) / (1.0 + i))))
            .collect()
    }
}

/// Runs the load-spillage loop for `schedule` in `direction` and collects
/// everything the rate modes need.
pub fn run_direction(
    gains: &GainTables,
    plan: &SubbandPlan,
    schedule: &MacroSchedule,
    radio: &RadioConfig,
    control: &ControlConfig,
    direction: Direction,
) -> Result<DirectionRun> {
    let links = macro_links(schedule, gains, radio, direction);
    let targets = set_targets(&links, radio, control);
    let g = victim_gains(gains, &links, radio, direction)?;
    let femtos = femto_receivers(schedule, gains, plan, radio, direction);
    let outcome = run_load_spillage(&g, &femtos, targets, control)?;
    let q = &outcome.loads.q;
    let budgets = link_budgets(direction, schedule, gains, &links, radio, &femtos, &outcome.alloc.p, q);
    let macro_with = macro_rates(schedule, plan, &links, radio, q);
    let macro_without = macro_rates(schedule, plan, &links, radio, &links.zeros_like());
    Ok(DirectionRun {
        direction,
        plan: plan.clone(),
        schedule: schedule.clone(),
        links,
        femtos,
        control: outcome,
        budgets,
        macro_with,
        macro_without,
    })
}
