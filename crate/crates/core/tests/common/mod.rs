//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use femto_ffr::femto_control::{OracleInstance, PowerAllocation, UtilityModel};
use nalgebra::DMatrix;

/// Best utility over `Σ r p ≤ λ`, `Σ w p ≤ cap`, `p ≥ 0` for one femto with
/// `K ≤ 3`, by nested ternary search over the first `K - 1` coordinates with
/// the last one pushed to the binding constraint. Each level is seeded by a
/// coarse grid so the bracket always holds the maximizer.
pub fn brute_force_utility(u: &UtilityModel, r: &[f64], lambda: f64, cap: Option<f64>) -> f64 {
    let k = r.len();
    let w = &u.weights;
    let cap = cap.unwrap_or(f64::INFINITY);
    let last_max = |p: &[f64]| -> f64 {
        let used_r: f64 = (0..k - 1).map(|x| r[x] * p[x]).sum();
        let used_w: f64 = (0..k - 1).map(|x| w[x] * p[x]).sum();
        ((lambda - used_r) / r[k - 1]).min((cap - used_w) / w[k - 1])
    };
    fn search(depth: usize, p: &mut Vec<f64>, u: &UtilityModel, r: &[f64], w: &[f64], lambda: f64, cap: f64, last: &dyn Fn(&[f64]) -> f64) -> f64 {
        let k = r.len();
        if depth == k - 1 {
            let v = last(p);
            if v < 0.0 {
                return f64::NEG_INFINITY;
            }
            p[k - 1] = v;
            return u.utility(0, p);
        }
        let used_r: f64 = (0..depth).map(|x| r[x] * p[x]).sum();
        let used_w: f64 = (0..depth).map(|x| w[x] * p[x]).sum();
        let hi = ((lambda - used_r) / r[depth]).min((cap - used_w) / w[depth]).max(0.0);
        let eval = |x: f64, p: &mut Vec<f64>| {
            p[depth] = x;
            for q in p.iter_mut().skip(depth + 1) {
                *q = 0.0;
            }
            search(depth + 1, p, u, r, w, lambda, cap, last)
        };
        let grid = 64;
        let mut best = (f64::NEG_INFINITY, 0usize);
        for g in 0..=grid {
            let v = eval(hi * g as f64 / grid as f64, p);
            if v > best.0 {
                best = (v, g);
            }
        }
        let mut lo = hi * best.1.saturating_sub(1) as f64 / grid as f64;
        let mut up = hi * (best.1 + 1).min(grid) as f64 / grid as f64;
        for _ in 0..100 {
            let m1 = lo + (up - lo) / 3.0;
            let m2 = up - (up - lo) / 3.0;
            if eval(m1, p) < eval(m2, p) {
                lo = m1;
            } else {
                up = m2;
            }
        }
        eval(0.5 * (lo + up), p).max(best.0)
    }
    let mut p = vec![0.0; k];
    search(0, &mut p, u, r, w, lambda, cap, &last_max)
}

/// Direction `z` that leaves every `q_ik` unchanged and is first-order
/// neutral for every femto's utility. Needs `N·K > Σ M(k) + N`.
pub fn neutral_exchange(inst: &OracleInstance, alloc: &PowerAllocation) -> Option<Vec<Vec<f64>>> {
    let (n, nk) = (inst.num_femtos(), inst.num_subbands());
    let u = inst.utility();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for k in 0..nk {
        for gi in &inst.gains[k] {
            let mut row = vec![0.0; n * nk];
            for j in 0..n {
                row[j * nk + k] = gi[j];
            }
            rows.push(row);
        }
    }
    for j in 0..n {
        let grad = u.gradient(j, &alloc.p[j]);
        let mut row = vec![0.0; n * nk];
        for k in 0..nk {
            row[j * nk + k] = grad[k];
        }
        rows.push(row);
    }
    let dim = n * nk;
    if rows.len() >= dim {
        return None;
    }
    // Square up with zero rows so the SVD returns a full right basis.
    let a = DMatrix::from_fn(dim, dim, |r, c| {
        if r < rows.len() {
            let m = rows[r].iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            rows[r][c] / m
        } else {
            0.0
        }
    });
    let svd = a.svd(false, true);
    let v_t = svd.v_t?;
    let top = svd.singular_values.max();
    let c = (0..dim).min_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]))?;
    if svd.singular_values[c] > 1e-12 * top {
        return None;
    }
    let v = v_t.row(c).transpose();
    Some((0..n).map(|j| (0..nk).map(|k| v[j * nk + k]).collect()).collect())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
