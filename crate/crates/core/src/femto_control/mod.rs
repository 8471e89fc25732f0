//! Load-spillage power control for the femto underlay.
//!
//! Every macro receiver `i` broadcasts a load factor `s_ik` per subband. A
//! femto transmitter `j` prices subband `k` by its spillage
//! `r_jk = Σ_i G_ijk s_ik` and waterfills its own sum rate under
//! `Σ_k r_jk p_jk ≤ λ_j`. The receivers then compare the resulting
//! interference `q_ik = Σ_j G_ijk p_jk` with a target and move `s_ik`
//! multiplicatively.
//!
//! Units: `p_jk = 1` is the femto's maximum power spread flat over the whole
//! band, so the device cap reads `Σ_k w_k p_jk ≤ 1`. Gains handed to this
//! module are already normalized so `q` is in units of the victim's thermal
//! noise and femto SINRs are in units of the femto receiver's noise.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::GainMatrix;
use crate::error::{Error, Result};
use crate::macro_layer::MacroLinks;
use crate::radio::{lin_to_db, Direction, RadioConfig};

pub mod nnls;
pub mod oracle;
pub mod waterfill;

pub use oracle::{kkt_recover, pareto_oracle, verify_suite, KktRecovery, OracleInstance, ParetoVerdict, VerifyCounts};
pub use waterfill::{waterfill, WaterfillSolution};

/// `U_j(p) = Σ_k w_k log2(1 + g_jk p_k / (Γ n_jk))`, uncapped so it stays
/// strictly increasing and concave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtilityModel {
    pub weights: Vec<f64>,
    /// `[j][k]` effective serving gain.
    pub gain: Vec<Vec<f64>>,
    /// `[j][k]` interference plus noise.
    pub noise: Vec<Vec<f64>>,
    pub gap: f64,
}

impl UtilityModel {
    pub fn num_femtos(&self) -> usize {
        self.gain.len()
    }

    pub fn num_subbands(&self) -> usize {
        self.weights.len()
    }

    /// `Γ n_jk / g_jk`: the power at which subband `k` reaches unit SNR/Γ.
    pub fn floor(&self, j: usize, k: usize) -> f64 {
        self.gap * self.noise[j][k] / self.gain[j][k]
    }

    pub fn utility(&self, j: usize, p: &[f64]) -> f64 {
        (0..self.num_subbands())
            .map(|k| self.weights[k] * (1.0 + self.gain[j][k] * p[k] / (self.gap * self.noise[j][k])).log2())
            .sum()
    }

    pub fn gradient(&self, j: usize, p: &[f64]) -> Vec<f64> {
        (0..self.num_subbands())
            .map(|k| self.weights[k] / (std::f64::consts::LN_2 * (p[k] + self.floor(j, k))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// `[j][k]`
    pub p: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
}

impl PowerAllocation {
    pub fn zeros(n: usize, k: usize, lambda: f64) -> Self {
        Self {
            p: vec![vec![0.0; k]; n],
            lambda: vec![lambda; n],
        }
    }
}

/// `[j][k]` spillage.
#[derive(Debug, Clone, PartialEq)]
pub struct SpillageVector {
    pub r: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadUpdate {
    pub beta: f64,
    pub s_min: f64,
    pub s_max: f64,
    /// Per-step bound on the measured/target ratio fed to the update.
    pub max_ratio: f64,
}

impl Default for LoadUpdate {
    fn default() -> Self {
        Self {
            beta: 0.25,
            s_min: 1e-6,
            s_max: 1e6,
            max_ratio: 1e4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    /// `[k][i]`
    pub s: Vec<Vec<f64>>,
    pub target: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub update: LoadUpdate,
}

impl LoadState {
    pub fn new(target: Vec<Vec<f64>>, initial: f64, update: LoadUpdate) -> Self {
        let s = target.iter().map(|t| vec![initial; t.len()]).collect();
        let q = target.iter().map(|t| vec![0.0; t.len()]).collect();
        Self { s, target, q, update }
    }
}

/// `q_ik = Σ_j G_ijk p_jk`.
pub fn compute_interference(g: &GainMatrix, alloc: &PowerAllocation) -> Vec<Vec<f64>> {
    (0..g.num_subbands())
        .map(|k| {
            (0..g.num_receivers(k))
                .map(|i| g.row(k, i).iter().zip(&alloc.p).map(|(gij, pj)| gij * pj[k]).sum())
                .collect()
        })
        .collect()
}

/// `r_jk = Σ_i G_ijk s_ik`.
pub fn compute_spillage(g: &GainMatrix, s: &[Vec<f64>]) -> SpillageVector {
    let (n, nk) = (g.num_femtos, g.num_subbands());
    let mut r = vec![vec![0.0; nk]; n];
    for k in 0..nk {
        for i in 0..g.num_receivers(k) {
            let sik = s[k][i];
            for (j, gij) in g.row(k, i).iter().enumerate() {
                r[j][k] += gij * sik;
            }
        }
    }
    SpillageVector { r }
}

/// `s ← clip(s·(q/target)^β)`; a zero target pins `s` at `s_max`.
pub fn update_loads(state: &mut LoadState, q: Vec<Vec<f64>>) {
    let u = state.update;
    for k in 0..state.s.len() {
        for i in 0..state.s[k].len() {
            let t = state.target[k][i];
            let s = &mut state.s[k][i];
            if t <= 0.0 {
                *s = u.s_max;
                continue;
            }
            let ratio = (q[k][i] / t).clamp(1.0 / u.max_ratio, u.max_ratio);
            *s = (*s * ratio.powf(u.beta)).clamp(u.s_min, u.s_max);
        }
    }
    state.q = q;
}

/// DL target: the femto interference that lowers the UE's spectral
/// efficiency to `(1 - loss)` of its femto-free value. UEs at the cap get
/// the interference that keeps them exactly at the cap.
pub fn dl_target(signal: f64, interference: f64, radio: &RadioConfig, loss: f64) -> f64 {
    let se0 = radio.spectral_efficiency(signal / (1.0 + interference));
    if se0 <= 0.0 {
        return 0.0;
    }
    let se = if se0 >= radio.max_se { radio.max_se } else { (1.0 - loss) * se0 };
    let sinr = radio.gap() * (se.exp2() - 1.0);
    (signal / sinr - 1.0 - interference).max(0.0)
}

/// UL target: a rise of `rise_db` over the femto-free interference-plus-noise.
pub fn ul_target(interference: f64, rise_db: f64) -> f64 {
    (10f64.powf(rise_db / 10.0) - 1.0) * (1.0 + interference)
}

pub fn set_targets(links: &MacroLinks, radio: &RadioConfig, cfg: &ControlConfig) -> Vec<Vec<f64>> {
    (0..links.num_subbands())
        .map(|k| {
            (0..links.receivers[k].len())
                .map(|i| match links.direction {
                    Direction::Downlink => {
                        dl_target(links.signal[k][i], links.interference[k][i], radio, cfg.dl_rate_loss)
                    }
                    Direction::Uplink => ul_target(links.interference[k][i], cfg.ul_rise_db),
                })
                .collect()
        })
        .collect()
}

/// What each femto receiver sees apart from its own signal, in units of the
/// femto receiver's thermal noise.
#[derive(Debug, Clone, PartialEq)]
pub struct FemtoReceivers {
    pub weights: Vec<f64>,
    /// `[j]` serving gain times the femto's full-band max PSD.
    pub serving: Vec<f64>,
    /// `[j][k]` macro interference.
    pub macro_interference: Vec<Vec<f64>>,
    /// `[l * N + j]` gain from femto transmitter `l` into femto receiver `j`.
    pub cross: Vec<f64>,
    pub gap: f64,
}

impl FemtoReceivers {
    pub fn num_femtos(&self) -> usize {
        self.serving.len()
    }

    /// `[j][k]` femto-femto interference for allocation `p`.
    pub fn femto_interference(&self, p: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.num_femtos();
        let nk = self.weights.len();
        let mut out = vec![vec![0.0; nk]; n];
        for (l, pl) in p.iter().enumerate() {
            if pl.iter().all(|&x| x == 0.0) {
                continue;
            }
            let row = &self.cross[l * n..(l + 1) * n];
            for (j, &g) in row.iter().enumerate() {
                if g > 0.0 {
                    for k in 0..nk {
                        out[j][k] += g * pl[k];
                    }
                }
            }
        }
        out
    }

    /// Utility with femto-femto interference from `p_prev` frozen into the noise.
    pub fn utility(&self, p_prev: &[Vec<f64>]) -> UtilityModel {
        let ff = self.femto_interference(p_prev);
        let noise = self
            .macro_interference
            .iter()
            .zip(ff)
            .map(|(m, f)| m.iter().zip(f).map(|(a, b)| 1.0 + a + b).collect())
            .collect();
        UtilityModel {
            weights: self.weights.clone(),
            gain: self.serving.iter().map(|&g| vec![g; self.weights.len()]).collect(),
            noise,
            gap: self.gap,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    pub iterations: usize,
    pub lambda: f64,
    /// Cap on `Σ_k w_k p_jk`; `None` disables it.
    pub device_cap: Option<f64>,
    pub initial_load: f64,
    pub update: LoadUpdate,
    pub dl_rate_loss: f64,
    pub ul_rise_db: f64,
    pub record_trace: bool,
}

impl Default for ControlConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            lambda: 1.0,
            device_cap: Some(1.0),
            initial_load: 1.0,
            update: LoadUpdate::default(),
            dl_rate_loss: 0.1,
            ul_rise_db: 0.5,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub receiver: usize,
    pub subband: usize,
    pub q: f64,
    pub target: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadSpillageOutcome {
    pub alloc: PowerAllocation,
    pub loads: LoadState,
    /// Fraction of receivers at or below target + 0.1 dB after each iteration.
    pub within_target: Vec<f64>,
    pub trace: Vec<TraceRow>,
}

/// Whether `q` is at most 0.1 dB above `target`.
pub fn within_tenth_db(q: f64, target: f64) -> bool {
    q <= target * 10f64.powf(0.01)
}

fn fraction_within(loads: &LoadState) -> f64 {
    let (mut ok, mut n) = (0usize, 0usize);
    for (qk, tk) in loads.q.iter().zip(&loads.target) {
        for (&q, &t) in qk.iter().zip(tk) {
            n += 1;
            ok += within_tenth_db(q, t) as usize;
        }
    }
    if n == 0 {
        1.0
    } else {
        ok as f64 / n as f64
    }
}

/// One round of waterfilling for every femto against spillage `r`.
pub fn waterfill_all(
    utility: &UtilityModel,
    spill: &SpillageVector,
    lambda: &[f64],
    cap: Option<f64>,
) -> Result<Vec<Vec<f64>>> {
    (0..utility.num_femtos())
        .map(|j| waterfill(utility, j, &spill.r[j], lambda[j], cap).map(|s| s.p))
        .collect()
}

/// Runs the spillage → waterfill → interference → load-update loop.
pub fn run_load_spillage(
    g: &GainMatrix,
    femtos: &FemtoReceivers,
    targets: Vec<Vec<f64>>,
    cfg: &ControlConfig,
) -> Result<LoadSpillageOutcome> {
    let n = femtos.num_femtos();
    let nk = femtos.weights.len();
    if g.num_femtos != n || g.num_subbands() != nk || targets.len() != nk {
        return Err(Error::Dimension(format!(
            "gain matrix {}x{} vs {n} femtos, {nk} subbands",
            g.num_femtos,
            g.num_subbands()
        )));
    }
    let mut loads = LoadState::new(targets, cfg.initial_load, cfg.update);
    let mut alloc = PowerAllocation::zeros(n, nk, cfg.lambda);
    let mut within = Vec::with_capacity(cfg.iterations);
    let mut trace = Vec::new();
    for iter in 0..cfg.iterations {
        let utility = femtos.utility(&alloc.p);
        let spill = compute_spillage(g, &loads.s);
        alloc.p = waterfill_all(&utility, &spill, &alloc.lambda, cfg.device_cap)?;
        let q = compute_interference(g, &alloc);
        update_loads(&mut loads, q);
        within.push(fraction_within(&loads));
        if cfg.record_trace {
            for k in 0..nk {
                for i in 0..loads.s[k].len() {
                    trace.push(TraceRow {
                        iter,
                        receiver: g.subbands[k].receivers[i],
                        subband: k,
                        q: loads.q[k][i],
                        target: loads.target[k][i],
                        s: loads.s[k][i],
                    });
                }
            }
        }
    }
    Ok(LoadSpillageOutcome {
        alloc,
        loads,
        within_target: within,
        trace,
    })
}

/// Writes `iter,receiver,subband,q_db,target_db,s` (dB relative to the
/// victim's thermal noise).
pub fn write_trace_csv(path: &Path, trace: &[TraceRow]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "iter,receiver,subband,q_db,target_db,s").map_err(io)?;
    for t in trace {
        writeln!(
            w,
            "{},{},{},{:.4},{:.4},{:e}",
            t.iter,
            t.receiver,
            t.subband,
            lin_to_db(t.q),
            lin_to_db(t.target),
            t.s
        )
        .map_err(io)?;
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gm(dense: Vec<Vec<Vec<f64>>>, n: usize) -> GainMatrix {
        GainMatrix::from_dense(&dense, n).unwrap()
    }

    #[test]
    fn interference_basics() {
        let g = gm(vec![vec![vec![1.0]]], 1);
        let mut a = PowerAllocation::zeros(1, 1, 1.0);
        assert_eq!(compute_interference(&g, &a), vec![vec![0.0]]);
        a.p[0][0] = 2.0;
        assert_eq!(compute_interference(&g, &a), vec![vec![2.0]]);
    }

    #[test]
    fn spillage_basics() {
        let g = gm(vec![vec![vec![1.0]]], 1);
        assert_eq!(compute_spillage(&g, &[vec![2.0]]).r, vec![vec![2.0]]);
        let g = gm(vec![vec![vec![0.3, 0.7], vec![1.1, 0.2]]], 2);
        let r1 = compute_spillage(&g, &[vec![1.0, 3.0]]).r;
        let r2 = compute_spillage(&g, &[vec![2.0, 6.0]]).r;
        for j in 0..2 {
            assert!((r2[j][0] - 2.0 * r1[j][0]).abs() < 1e-15);
        }
    }

    #[test]
    fn load_update_rules() {
        let mut st = LoadState::new(vec![vec![1.0, 1.0, 0.0]], 1.0, LoadUpdate::default());
        update_loads(&mut st, vec![vec![1.0, 16.0, 1.0]]);
        assert_eq!(st.s[0][0], 1.0);
        assert!((st.s[0][1] - 2.0).abs() < 1e-12);
        assert_eq!(st.s[0][2], 1e6);
        let mut prev = 1.0;
        for _ in 0..40 {
            update_loads(&mut st, vec![vec![0.0, 1.0, 1.0]]);
            assert!(st.s[0][0] <= prev);
            prev = st.s[0][0];
        }
        assert_eq!(st.s[0][0], 1e-6);
    }

    #[test]
    fn ul_target_constant() {
        assert!((ul_target(0.0, 0.5) - 0.1220).abs() < 1e-4);
        assert!((ul_target(9.0, 0.5) - 1.2202).abs() < 1e-4);
    }

    #[test]
    fn dl_target_inverts_rate_loss() {
        let radio = RadioConfig::default();
        let (s, i) = (40.0, 2.0);
        let q = dl_target(s, i, &radio, 0.1);
        let se0 = radio.spectral_efficiency(s / (1.0 + i));
        let se1 = radio.spectral_efficiency(s / (1.0 + i + q));
        assert!((se1 / se0 - 0.9).abs() < 1e-12);
        // Three dB of margin above the cap threshold: the target eats it exactly.
        let cap_sinr = 2.0 * 31.0;
        let q = dl_target(2.0 * cap_sinr * (1.0 + i), i, &radio, 0.1);
        assert!((q - (1.0 + i)).abs() < 1e-9);
        assert_eq!(dl_target(0.0, 1.0, &radio, 0.1), 0.0);
    }

    #[test]
    fn no_femtos_loads_decay() {
        let g = GainMatrix {
            num_femtos: 0,
            subbands: vec![crate::channel::SubbandGains {
                receivers: vec![0, 1],
                gains: vec![],
            }],
        };
        let f = FemtoReceivers {
            weights: vec![1.0],
            serving: vec![],
            macro_interference: vec![],
            cross: vec![],
            gap: 2.0,
        };
        let out = run_load_spillage(&g, &f, vec![vec![1.0, 1.0]], &ControlConfig::default()).unwrap();
        assert!(out.alloc.p.is_empty());
        assert!(out.loads.s[0].iter().all(|&s| s < 1e-5));
        assert_eq!(out.loads.q, vec![vec![0.0, 0.0]]);
    }

    #[test]
    fn scalar_loop_reaches_target() {
        // One femto, one receiver: q must settle within 0.1 dB of target.
        let g = gm(vec![vec![vec![0.2]]], 1);
        let f = FemtoReceivers {
            weights: vec![1.0],
            serving: vec![1e3],
            macro_interference: vec![vec![3.0]],
            cross: vec![0.0],
            gap: 2.0,
        };
        let target = 0.05;
        let cfg = ControlConfig {
            record_trace: true,
            ..Default::default()
        };
        let out = run_load_spillage(&g, &f, vec![vec![target]], &cfg).unwrap();
        let q = out.loads.q[0][0];
        assert!((lin_to_db(q) - lin_to_db(target)).abs() < 0.1, "q = {q}");
        let qs: Vec<f64> = out.trace.iter().map(|t| t.q).collect();
        for w in qs.windows(2) {
            if w[0] > target {
                assert!(w[1] <= w[0] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn frozen_state_is_idempotent() {
        let g = gm(vec![vec![vec![0.2, 0.05]], vec![vec![0.1, 0.3]]], 2);
        let f = FemtoReceivers {
            weights: vec![0.5, 0.5],
            serving: vec![1e3, 3e2],
            macro_interference: vec![vec![3.0, 1.0], vec![0.5, 8.0]],
            cross: vec![0.0, 0.01, 0.02, 0.0],
            gap: 2.0,
        };
        let cfg = ControlConfig {
            iterations: 7,
            ..Default::default()
        };
        let out = run_load_spillage(&g, &f, vec![vec![0.05], vec![0.1]], &cfg).unwrap();
        let u = f.utility(&out.alloc.p);
        let spill = compute_spillage(&g, &out.loads.s);
        let a = waterfill_all(&u, &spill, &out.alloc.lambda, cfg.device_cap).unwrap();
        let b = waterfill_all(&u, &spill, &out.alloc.lambda, cfg.device_cap).unwrap();
        assert_eq!(a, b);
    }
}
