//! Brute-force checks of the load-spillage optimality conditions on small
//! instances: a perturbation search for Pareto improvements, and recovery of
//! the multipliers `t_j`, `s_ik` from a given allocation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::channel::GainMatrix;
use crate::error::{Error, Result};

use super::nnls::nnls;
use super::{compute_interference, compute_spillage, waterfill, PowerAllocation, UtilityModel};

/// A self-contained load-spillage problem with no device cap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleInstance {
    pub weights: Vec<f64>,
    /// `[k][i][j]` femto-to-receiver gains.
    pub gains: Vec<Vec<Vec<f64>>>,
    /// `[j][k]`
    pub utility_gain: Vec<Vec<f64>>,
    /// `[j][k]`
    pub noise: Vec<Vec<f64>>,
    /// `[k][i]`
    pub loads: Vec<Vec<f64>>,
    pub lambda: Vec<f64>,
    pub gap: f64,
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, span_db: f64) -> f64 {
    10f64.powf(rng.gen_range(-span_db / 2.0..=span_db / 2.0) / 10.0)
}

impl OracleInstance {
    /// Random instance with `n` femtos and `m[k]` receivers on subband `k`;
    /// cross gains are log-uniform over 40 dB.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, m: &[usize]) -> Self {
        let k = m.len();
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.2..1.0)).collect();
        let tot: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / tot).collect();
        let gains = m
            .iter()
            .map(|&mk| (0..mk).map(|_| (0..n).map(|_| log_uniform(rng, 40.0)).collect()).collect())
            .collect();
        let utility_gain = (0..n)
            .map(|_| (0..k).map(|_| 10.0 * log_uniform(rng, 40.0)).collect())
            .collect();
        let noise = (0..n)
            .map(|_| (0..k).map(|_| 1.0 + log_uniform(rng, 20.0)).collect())
            .collect();
        let loads = m
            .iter()
            .map(|&mk| (0..mk).map(|_| log_uniform(rng, 20.0)).collect())
            .collect();
        let lambda = (0..n).map(|_| log_uniform(rng, 20.0)).collect();
        Self {
            weights,
            gains,
            utility_gain,
            noise,
            loads,
            lambda,
            gap: 2.0,
        }
    }

    /// Desk-scale shape: `N ≤ 3`, `K ≤ 2`, `M(k) ≤ 2`.
    pub fn random_small<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=2);
        let m: Vec<usize> = (0..k).map(|_| rng.gen_range(1..=2)).collect();
        Self::random(rng, n, &m)
    }

    pub fn num_femtos(&self) -> usize {
        self.lambda.len()
    }

    pub fn num_subbands(&self) -> usize {
        self.weights.len()
    }

    pub fn gain_matrix(&self) -> GainMatrix {
        GainMatrix::from_dense(&self.gains, self.num_femtos()).expect("instance is rectangular")
    }

    pub fn utility(&self) -> UtilityModel {
        UtilityModel {
            weights: self.weights.clone(),
            gain: self.utility_gain.clone(),
            noise: self.noise.clone(),
            gap: self.gap,
        }
    }

    pub fn waterfilled(&self) -> Result<PowerAllocation> {
        let g = self.gain_matrix();
        let u = self.utility();
        let r = compute_spillage(&g, &self.loads);
        let p = (0..self.num_femtos())
            .map(|j| waterfill(&u, j, &r.r[j], self.lambda[j], None).map(|s| s.p))
            .collect::<Result<_>>()?;
        Ok(PowerAllocation {
            p,
            lambda: self.lambda.clone(),
        })
    }

    /// Interference per receiver and utility per femto.
    pub fn objectives(&self, g: &GainMatrix, u: &UtilityModel, p: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let alloc = PowerAllocation {
            p: p.to_vec(),
            lambda: self.lambda.clone(),
        };
        let q = compute_interference(g, &alloc);
        let util = (0..self.num_femtos()).map(|j| u.utility(j, &p[j])).collect();
        (q, util)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParetoVerdict {
    pub pass: bool,
    /// An allocation that weakly improves every objective and strictly one.
    pub witness: Option<Vec<Vec<f64>>>,
    pub candidates: usize,
}

const WEAK_TOL: f64 = 1e-13;
const STRICT_TOL: f64 = 1e-8;

fn dominates(q0: &[Vec<f64>], u0: &[f64], q1: &[Vec<f64>], u1: &[f64]) -> bool {
    let mut strict = false;
    for (a, b) in q0.iter().flatten().zip(q1.iter().flatten()) {
        let scale = a.abs().max(f64::MIN_POSITIVE);
        if *b > a + WEAK_TOL * scale {
            return false;
        }
        strict |= *b < a - STRICT_TOL * scale;
    }
    for (a, b) in u0.iter().zip(u1) {
        let scale = a.abs().max(f64::MIN_POSITIVE);
        if *b < a - WEAK_TOL * scale {
            return false;
        }
        strict |= *b > a + STRICT_TOL * scale;
    }
    strict
}

/// Orthonormal basis of the null space of `G_k D` (receivers × femtos) for
/// the column scaling `D = diag(col)`.
fn null_basis(g: &GainMatrix, k: usize, col: &[f64]) -> Vec<DVector<f64>> {
    let n = g.num_femtos;
    let m = g.num_receivers(k);
    let a = DMatrix::from_fn(m.max(1), n, |i, j| if i < m { g.get(k, i, j) * col[j] } else { 0.0 });
    let at = a.transpose() * &a;
    let eig = at.symmetric_eigen();
    let top = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    (0..n)
        .filter(|&c| eig.eigenvalues[c].abs() <= 1e-12 * top.max(1e-300))
        .map(|c| eig.eigenvectors.column(c).into_owned())
        .collect()
}

/// Searches perturbations of `alloc` for a Pareto improvement in
/// (every `q_ik` down, every `U_j` up). Candidates are a `{-1,-½,0,½,1}`
/// grid over all coordinates and random directions, at step sizes of 1e-1,
/// 1e-2 and 1e-3 of the `λ_j/r_jk` scale, plus random directions that leave
/// every `q_ik` unchanged, at the same fractions of the current powers.
/// Negative coordinates are clipped to zero.
pub fn pareto_oracle(inst: &OracleInstance, alloc: &PowerAllocation, seed: u64) -> ParetoVerdict {
    let g = inst.gain_matrix();
    let u = inst.utility();
    let (n, nk) = (inst.num_femtos(), inst.num_subbands());
    let dim = n * nk;
    let (q0, u0) = inst.objectives(&g, &u, &alloc.p);
    let r = compute_spillage(&g, &inst.loads).r;
    let scale: Vec<f64> = (0..dim).map(|x| inst.lambda[x / nk] / r[x / nk][x % nk]).collect();
    let steps = [1e-1, 1e-2, 1e-3];

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    if dim <= 6 {
        let levels = [-1.0, -0.5, 0.0, 0.5, 1.0];
        let total = 5usize.pow(dim as u32);
        for code in 1..total {
            let mut c = code;
            let d: Vec<f64> = (0..dim)
                .map(|x| {
                    let v = levels[c % 5];
                    c /= 5;
                    v * scale[x]
                })
                .collect();
            dirs.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..2000 {
        dirs.push((0..dim).map(|x| rng.sample::<f64, _>(StandardNormal) * scale[x]).collect());
    }
    // Exchanges that leave q unchanged, measured relative to each current
    // power so small and large transmitters move by comparable fractions.
    let col: Vec<Vec<f64>> = (0..nk)
        .map(|k| {
            (0..n)
                .map(|j| if alloc.p[j][k] > 0.0 { alloc.p[j][k] } else { scale[j * nk + k] })
                .collect()
        })
        .collect();
    let bases: Vec<Vec<DVector<f64>>> = (0..nk).map(|k| null_basis(&g, k, &col[k])).collect();
    if bases.iter().any(|b| !b.is_empty()) {
        for _ in 0..4000 {
            let mut d = vec![0.0; dim];
            for (k, basis) in bases.iter().enumerate() {
                for v in basis {
                    let c: f64 = rng.sample(StandardNormal);
                    for j in 0..n {
                        d[j * nk + k] += c * v[j] * col[k][j];
                    }
                }
            }
            dirs.push(d);
        }
        dirs.extend(improving_exchanges(&u, alloc, &bases, &col));
    }

    let mut p1 = alloc.p.clone();
    let mut checked = 0;
    for d in &dirs {
        for &h in &steps {
            for j in 0..n {
                for k in 0..nk {
                    p1[j][k] = (alloc.p[j][k] + h * d[j * nk + k]).max(0.0);
                }
            }
            checked += 1;
            let (q1, u1) = inst.objectives(&g, &u, &p1);
            if dominates(&q0, &u0, &q1, &u1) {
                return ParetoVerdict {
                    pass: false,
                    witness: Some(p1),
                    candidates: checked,
                };
            }
        }
    }
    ParetoVerdict {
        pass: true,
        witness: None,
        candidates: checked,
    }
}

/// Exchanges that keep every `q_ik` fixed and raise every utility to first
/// order: all femtos equally, then each femto in turn with the rest nudged.
/// Empty when the gradients admit no such direction, as at an optimum.
fn improving_exchanges(
    u: &UtilityModel,
    alloc: &PowerAllocation,
    bases: &[Vec<DVector<f64>>],
    col: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let (n, nk) = (u.num_femtos(), u.num_subbands());
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for (k, bk) in bases.iter().enumerate() {
        for v in bk {
            let mut d = vec![0.0; n * nk];
            for j in 0..n {
                d[j * nk + k] = v[j] * col[k][j];
            }
            basis.push(d);
        }
    }
    let grads: Vec<Vec<f64>> = (0..n).map(|j| u.gradient(j, &alloc.p[j])).collect();
    let c = DMatrix::from_fn(n, basis.len(), |j, b| (0..nk).map(|k| grads[j][k] * basis[b][j * nk + k]).sum());
    let svd = c.clone().svd(true, true);
    let mut targets = vec![DVector::from_element(n, 1.0)];
    for j0 in 0..n {
        let mut t = DVector::from_element(n, 0.01);
        t[j0] = 1.0;
        targets.push(t);
    }
    let mut out = Vec::new();
    for t in targets {
        let Ok(coef) = svd.solve(&t, 1e-12) else { continue };
        if (&c * &coef - &t).norm() > 1e-9 * t.norm() {
            continue;
        }
        let mut d = vec![0.0; n * nk];
        for (b, v) in basis.iter().enumerate() {
            for (x, dv) in d.iter_mut().enumerate() {
                *dv += coef[b] * v[x];
            }
        }
        let big = (0..n * nk).map(|x| (d[x] / col[x % nk][x / nk]).abs()).fold(0.0, f64::max);
        if big > 0.0 {
            out.push(d.iter().map(|v| v / big).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct KktRecovery {
    pub t: Vec<f64>,
    /// `[k][i]`
    pub s: Vec<Vec<f64>>,
    /// `λ_j = Σ_k r_jk p_jk` under the recovered loads.
    pub lambda: Vec<f64>,
    /// Stationarity residual of the equilibrated system at unit total mass.
    pub residual: f64,
}

/// Finds `t ≥ 0`, `s ≥ 0` (not all zero) with
/// `t_j ∂U_j/∂p_jk = Σ_i s_ik G_ijk` on every coordinate with `p_jk > 0` and
/// `≤` where `p_jk = 0`, by nonnegative least squares on the row- and
/// column-equilibrated system with the total mass pinned to one.
pub fn kkt_recover(inst: &OracleInstance, alloc: &PowerAllocation) -> Result<KktRecovery> {
    let g = inst.gain_matrix();
    let u = inst.utility();
    let (n, nk) = (inst.num_femtos(), inst.num_subbands());
    let grads: Vec<Vec<f64>> = (0..n).map(|j| u.gradient(j, &alloc.p[j])).collect();
    if grads.iter().flatten().all(|&v| v == 0.0) {
        return Err(Error::Degenerate("utility gradient is zero everywhere".into()));
    }
    let s_offset: Vec<usize> = (0..nk)
        .scan(n, |acc, k| {
            let o = *acc;
            *acc += g.num_receivers(k);
            Some(o)
        })
        .collect();
    let n_s: usize = (0..nk).map(|k| g.num_receivers(k)).sum();
    let slack: Vec<(usize, usize)> = (0..n)
        .flat_map(|j| (0..nk).map(move |k| (j, k)))
        .filter(|&(j, k)| alloc.p[j][k] <= 0.0)
        .collect();
    let cols = n + n_s + slack.len();
    let rows = n * nk;

    let mut a = DMatrix::<f64>::zeros(rows, cols);
    for j in 0..n {
        for k in 0..nk {
            let row = j * nk + k;
            a[(row, j)] = grads[j][k];
            for i in 0..g.num_receivers(k) {
                a[(row, s_offset[k] + i)] = -g.get(k, i, j);
            }
        }
    }
    for (x, &(j, k)) in slack.iter().enumerate() {
        a[(j * nk + k, n + n_s + x)] = 1.0;
    }
    for r in 0..rows {
        let m = a.row(r).iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        if m > 0.0 {
            a.row_mut(r).scale_mut(1.0 / m);
        }
    }
    let col_scale: Vec<f64> = (0..cols)
        .map(|c| {
            let nrm = a.column(c).norm();
            if nrm > 0.0 {
                1.0 / nrm
            } else {
                1.0
            }
        })
        .collect();
    for (c, &sc) in col_scale.iter().enumerate() {
        a.column_mut(c).scale_mut(sc);
    }

    const MASS_WEIGHT: f64 = 1e4;
    let mut aug = a.clone().insert_row(rows, MASS_WEIGHT);
    for c in n + n_s..cols {
        // Slack does not count toward the mass, only multipliers do.
        aug[(rows, c)] = 0.0;
    }
    let mut b = DVector::zeros(rows + 1);
    b[rows] = MASS_WEIGHT;
    let (y, _) = nnls(&aug, &b);
    let residual = (&a * &y).norm();

    let x: Vec<f64> = y.iter().zip(&col_scale).map(|(v, s)| v * s).collect();
    let t = x[..n].to_vec();
    let s: Vec<Vec<f64>> = (0..nk)
        .map(|k| x[s_offset[k]..s_offset[k] + g.num_receivers(k)].to_vec())
        .collect();
    let r = compute_spillage(&g, &s).r;
    let lambda = (0..n)
        .map(|j| (0..nk).map(|k| r[j][k] * alloc.p[j][k]).sum())
        .collect();
    Ok(KktRecovery {
        t,
        s,
        lambda,
        residual,
    })
}

/// Outcome of [`verify_suite`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyCounts {
    pub total: usize,
    pub pareto_pass: usize,
    pub kkt_pass: usize,
}

impl std::fmt::Display for VerifyCounts {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{}/{} pareto pass, {}/{} kkt pass",
            self.pareto_pass, self.total, self.kkt_pass, self.total
        )
    }
}

/// Waterfills `instances` random small problems drawn from `seed` and checks
/// each against [`pareto_oracle`] and [`kkt_recover`] (residual below 1e-6).
pub fn verify_suite(instances: usize, seed: u64) -> VerifyCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = VerifyCounts {
        total: instances,
        pareto_pass: 0,
        kkt_pass: 0,
    };
    for n in 0..instances {
        let inst = OracleInstance::random_small(&mut rng);
        let Ok(alloc) = inst.waterfilled() else { continue };
        out.pareto_pass += pareto_oracle(&inst, &alloc, n as u64).pass as usize;
        out.kkt_pass += kkt_recover(&inst, &alloc).is_ok_and(|r| r.residual < 1e-6) as usize;
    }
    out
}
