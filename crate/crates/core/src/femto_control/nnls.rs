//! Lawson–Hanson active-set solver for `min ‖A x − b‖₂` subject to `x ≥ 0`.

use nalgebra::{DMatrix, DVector};

/// Returns the minimizer and the residual norm `‖A x − b‖`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, f64) {
    let n = a.ncols();
    let tol = 10.0 * f64::EPSILON * a.norm() * (a.nrows().max(n) as f64);
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let max_outer = 3 * n + 10;

    for _ in 0..max_outer {
        let w = a.transpose() * (b - a * &x);
        let pick = (0..n)
            .filter(|&j| !passive[j] && w[j] > tol)
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = pick else { break };
        passive[t] = true;

        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z_p = solve_ls(a, b, &idx);
            if idx.iter().zip(z_p.iter()).all(|(_, &v)| v > 0.0) {
                for (&j, &v) in idx.iter().zip(z_p.iter()) {
                    x[j] = v;
                }
                break;
            }
            // Step toward z until the first passive variable hits zero.
            let mut alpha = f64::INFINITY;
            for (&j, &v) in idx.iter().zip(z_p.iter()) {
                if v <= 0.0 {
                    let step = x[j] / (x[j] - v);
                    alpha = alpha.min(step);
                }
            }
            for (&j, &v) in idx.iter().zip(z_p.iter()) {
                x[j] += alpha * (v - x[j]);
            }
            for &j in &idx {
                if x[j] <= tol {
                    x[j] = 0.0;
                    passive[j] = false;
                }
            }
        }
    }
    let res = (a * &x - b).norm();
    (x, res)
}

/// Unconstrained least squares on the columns `idx` of `a`.
fn solve_ls(a: &DMatrix<f64>, b: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
    if sub.nrows() >= sub.ncols() {
        let qr = sub.clone().qr();
        let r = qr.r();
        let top = r.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if r.diagonal().iter().all(|v| v.abs() > 1e-13 * top) {
            let qtb = qr.q().transpose() * b;
            if let Some(x) = r.solve_upper_triangular(&qtb) {
                return x;
            }
        }
    }
    // Rank deficient: minimum-norm solution.
    sub.svd(true, true)
        .solve(b, 1e-14)
        .unwrap_or_else(|_| DVector::zeros(idx.len()))
}
