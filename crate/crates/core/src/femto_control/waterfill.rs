//! Per-femto waterfilling: maximize `Σ_k w_k log2(1 + g_k p_k / (Γ n_k))`
//! subject to `Σ_k r_k p_k ≤ λ`, an optional device cap `Σ_k w_k p_k ≤ cap`
//! and `p ≥ 0`.

use crate::error::{Error, Result};

use super::UtilityModel;

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillSolution {
    pub p: Vec<f64>,
    /// Multiplier of the spillage constraint.
    pub nu: f64,
    /// Multiplier of the device cap (zero when slack or absent).
    pub mu: f64,
    /// Largest relative violation of the KKT stationarity conditions.
    pub kkt_residual: f64,
}

/// Maximizes `Σ a_k ln(p_k + e_k)` over `Σ π_k p_k ≤ B`, `p ≥ 0`. Returns the
/// powers and the multiplier `κ`, or `None` when some useful coordinate is
/// free (zero price), i.e. the problem is unbounded.
fn solve_single(a: &[f64], e: &[f64], price: &[f64], budget: f64) -> Option<(Vec<f64>, f64)> {
    let k = a.len();
    let mut order: Vec<usize> = (0..k).filter(|&x| a[x] > 0.0 && e[x].is_finite()).collect();
    if order.iter().any(|&x| price[x] <= 0.0) {
        return None;
    }
    // Cheapest first: coordinate x turns on once the level exceeds π e / a.
    let thresh: Vec<f64> = (0..k)
        .map(|x| if a[x] > 0.0 { price[x] * e[x] / a[x] } else { f64::INFINITY })
        .collect();
    order.sort_by(|&x, &y| thresh[x].total_cmp(&thresh[y]).then(x.cmp(&y)));
    let mut p = vec![0.0; k];
    if order.is_empty() {
        return Some((p, 0.0));
    }
    let (mut sum_a, mut sum_pe) = (0.0, 0.0);
    let mut level = 0.0;
    let mut active = 0;
    for (n, &x) in order.iter().enumerate() {
        let sa = sum_a + a[x];
        let spe = sum_pe + price[x] * e[x];
        let l = (budget + spe) / sa;
        if n > 0 && l <= thresh[x] {
            break;
        }
        sum_a = sa;
        sum_pe = spe;
        level = l;
        active = n + 1;
    }
    if level <= thresh[order[0]] {
        // Budget too small to lift even the best coordinate off zero.
        return Some((p, a[order[0]] / (price[order[0]] * e[order[0]])));
    }
    for &x in &order[..active] {
        p[x] = (a[x] * level / price[x] - e[x]).max(0.0);
    }
    Some((p, 1.0 / level))
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Waterfills femto `j` of `utility` against spillage row `r` and bound
/// `lambda`, optionally under the device cap `Σ w p ≤ cap`.
pub fn waterfill(
    utility: &UtilityModel,
    j: usize,
    r: &[f64],
    lambda: f64,
    cap: Option<f64>,
) -> Result<WaterfillSolution> {
    if !(lambda > 0.0) {
        return Err(Error::InfeasibleBound { bound: lambda });
    }
    if let Some(c) = cap {
        if !(c > 0.0) {
            return Err(Error::InfeasibleBound { bound: c });
        }
    }
    let w = &utility.weights;
    let a: Vec<f64> = w.iter().map(|x| x / std::f64::consts::LN_2).collect();
    let e: Vec<f64> = (0..w.len()).map(|k| utility.floor(j, k)).collect();

    let spill_only = solve_single(&a, &e, r, lambda);
    let (p, nu, mu) = match cap {
        None => match spill_only {
            Some((p, kappa)) => (p, kappa, 0.0),
            None => {
                return Err(Error::Degenerate(format!(
                    "femto {j}: zero spillage on a usable subband with no device cap"
                )))
            }
        },
        Some(cap) => match spill_only {
            Some((p, kappa)) if dot(w, &p) <= cap * (1.0 + 1e-12) => (p, kappa, 0.0),
            _ => {
                let (pc, kc) = solve_single(&a, &e, w, cap).expect("subband weights are positive");
                if dot(r, &pc) <= lambda * (1.0 + 1e-12) {
                    (pc, 0.0, kc)
                } else {
                    both_binding(&a, &e, r, w, lambda, cap)
                }
            }
        },
    };
    let kkt_residual = stationarity_residual(&a, &e, r, w, &p, nu, mu);
    Ok(WaterfillSolution {
        p,
        nu,
        mu,
        kkt_residual,
    })
}

/// Both constraints tight: bisect the mixing weight `θ` of the combined
/// price `θ r/λ + (1-θ) w/cap` until both normalized loads equal one.
fn both_binding(a: &[f64], e: &[f64], r: &[f64], w: &[f64], lambda: f64, cap: f64) -> (Vec<f64>, f64, f64) {
    let solve = |theta: f64| {
        let price: Vec<f64> = r
            .iter()
            .zip(w)
            .map(|(ri, wi)| theta * ri / lambda + (1.0 - theta) * wi / cap)
            .collect();
        solve_single(a, e, &price, 1.0).expect("combined price is positive")
    };
    let gap = |p: &[f64]| dot(r, p) / lambda - dot(w, p) / cap;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > f64::EPSILON * 4.0 {
        let theta = 0.5 * (lo + hi);
        if gap(&solve(theta).0) > 0.0 {
            lo = theta;
        } else {
            hi = theta;
        }
    }
    // f jumps across the last ulp of θ when a floor is large against p, so
    // blend the two bracketing solutions, then shave any leftover overshoot.
    let (p_lo, k_lo) = solve(lo);
    let (p_hi, _) = solve(hi);
    let (f_lo, f_hi) = (gap(&p_lo), gap(&p_hi));
    let alpha = if f_lo > f_hi { f_lo / (f_lo - f_hi) } else { 0.0 };
    let mut p: Vec<f64> = p_lo.iter().zip(&p_hi).map(|(a, b)| a + alpha * (b - a)).collect();
    let over = (dot(r, &p) / lambda).max(dot(w, &p) / cap);
    if over > 1.0 {
        p.iter_mut().for_each(|x| *x /= over);
    }
    (p, lo * k_lo / lambda, (1.0 - lo) * k_lo / cap)
}

fn stationarity_residual(a: &[f64], e: &[f64], r: &[f64], w: &[f64], p: &[f64], nu: f64, mu: f64) -> f64 {
    let mut worst: f64 = 0.0;
    for k in 0..a.len() {
        if a[k] == 0.0 || !e[k].is_finite() {
            continue;
        }
        let grad = a[k] / (p[k] + e[k]);
        let price = nu * r[k] + mu * w[k];
        let v = if p[k] > 0.0 {
            (grad - price).abs() / grad
        } else {
            ((grad - price) / grad).max(0.0)
        };
        worst = worst.max(v);
    }
    worst
}
