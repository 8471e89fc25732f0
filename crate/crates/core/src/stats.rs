//! Order statistics over pooled link samples.

use serde::{Deserialize, Serialize};

/// Sorts a copy of `x` ascending. NaNs go last.
pub fn sorted(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// Linear-interpolated percentile of ascending `sorted`, `p` in [0, 1]
/// (the usual "type 7" definition). `None` when empty.
pub fn percentile(sorted: &[f64], p: f64) -> Option<f64> {
    let n = sorted.len();
    if n == 0 {
        return None;
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn median(sorted: &[f64]) -> Option<f64> {
    percentile(sorted, 0.5)
}

pub fn mean(x: &[f64]) -> Option<f64> {
    if x.is_empty() {
        None
    } else {
        Some(x.iter().sum::<f64>() / x.len() as f64)
    }
}

/// Fraction of ascending `sorted` at or below `x`.
pub fn ecdf(sorted: &[f64], x: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    sorted.partition_point(|v| *v <= x) as f64 / sorted.len() as f64
}

/// Empirical CDF as `(x, F(x))` steps, one per distinct value, ascending.
pub fn cdf_points(sorted: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in sorted.iter().enumerate() {
        let f = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = f,
            _ => out.push((x, f)),
        }
    }
    out
}

/// Largest `F_a(x) - F_b(x)` over the pooled support, and the `x` where it
/// occurs. Positive means `a` has more mass below `x` than `b`.
pub fn max_cdf_excess(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut best = (f64::NEG_INFINITY, f64::NAN);
    for &x in a.iter().chain(b) {
        let d = ecdf(a, x) - ecdf(b, x);
        if d > best.0 || (d == best.0 && x < best.1) {
            best = (d, x);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    /// Rejection threshold at the requested level.
    pub critical: f64,
}

impl KsResult {
    pub fn rejects(&self) -> bool {
        self.statistic > self.critical
    }
}

/// Two-sample Kolmogorov–Smirnov test with the asymptotic critical value
/// `c(α) sqrt((n+m)/(n m))`, `c(α) = sqrt(-ln(α/2) / 2)`.
pub fn ks_two_sample(a: &[f64], b: &[f64], alpha: f64) -> KsResult {
    let (sa, sb) = (sorted(a), sorted(b));
    let mut d = 0.0f64;
    for &x in sa.iter().chain(&sb) {
        d = d.max((ecdf(&sa, x) - ecdf(&sb, x)).abs());
    }
    let (n, m) = (a.len() as f64, b.len() as f64);
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    KsResult {
        statistic: d,
        critical: c * ((n + m) / (n * m)).sqrt(),
    }
}

/// Summary of one pooled sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: Option<f64>,
    pub p5: Option<f64>,
    pub p10: Option<f64>,
    pub p25: Option<f64>,
    pub median: Option<f64>,
    pub p75: Option<f64>,
    pub p95: Option<f64>,
}

impl Summary {
    pub fn of(x: &[f64]) -> Self {
        let s = sorted(x);
        let p = |q| percentile(&s, q);
        Self {
            count: s.len(),
            mean: mean(&s),
            p5: p(0.05),
            p10: p(0.10),
            p25: p(0.25),
            median: p(0.5),
            p75: p(0.75),
            p95: p(0.95),
        }
    }

    pub fn iqr(&self) -> Option<f64> {
        Some(self.p75? - self.p25?)
    }
}
