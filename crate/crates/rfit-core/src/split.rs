//! Interaction splitting: the difference-in-differences statistic Q, greedy
//! search with incremental updating, and the smooth sigmoid surrogate (SSS)
//! maximized by Brent's method.
//!
//! Exactness convention: every 2x2 table over a candidate threshold is
//! accumulated with left cells in ascending-x row order and right cells in
//! descending-x row order (stable sort, original row order breaking ties).
//! Both the updating sweep and the naive per-cut recomputation follow the
//! same convention, so they agree bit for bit.

use serde::{Deserialize, Serialize};

/// Split-finding strategy for continuous covariates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    Gs,
    #[default]
    Sss,
}

impl std::str::FromStr for SplitMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gs" => Ok(SplitMethod::Gs),
            "sss" => Ok(SplitMethod::Sss),
            other => Err(format!("unknown split method `{other}` (expected `gs` or `sss`)")),
        }
    }
}

/// Shape parameter and optimizer settings for SSS splitting. The shape `a`
/// applies to covariates standardized within the node; values in [10, 50]
/// work well and estimating `a` is deliberately unsupported.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SssConfig {
    pub a: f64,
    pub brent_tol: f64,
    pub brent_max_iter: usize,
}

impl Default for SssConfig {
    fn default() -> Self {
        SssConfig {
            a: 10.0,
            brent_tol: 1e-4,
            brent_max_iter: 100,
        }
    }
}

/// The 2x2 treatment-by-side table of a candidate split, with weighted
/// counts, response sums per cell, and the node's weighted sum of squares.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NodeTable {
    pub n0l: f64,
    pub n0r: f64,
    pub n1l: f64,
    pub n1r: f64,
    pub s0l: f64,
    pub s0r: f64,
    pub s1l: f64,
    pub s1r: f64,
    pub sum_ysq: f64,
}

impl NodeTable {
    /// Tallies the table for an explicit left/right assignment, rows in
    /// given order, unit weights.
    pub fn tally(y: &[f64], t: &[u8], in_left: &[bool]) -> NodeTable {
        let mut table = NodeTable::default();
        for i in 0..y.len() {
            match (t[i], in_left[i]) {
                (0, true) => {
                    table.n0l += 1.0;
                    table.s0l += y[i];
                }
                (0, false) => {
                    table.n0r += 1.0;
                    table.s0r += y[i];
                }
                (_, true) => {
                    table.n1l += 1.0;
                    table.s1l += y[i];
                }
                (_, false) => {
                    table.n1r += 1.0;
                    table.s1r += y[i];
                }
            }
            table.sum_ysq += y[i] * y[i];
        }
        table
    }

    pub fn node_n(&self) -> f64 {
        self.n0l + self.n0r + self.n1l + self.n1r
    }

    pub fn min_cell(&self) -> f64 {
        self.n0l.min(self.n0r).min(self.n1l).min(self.n1r)
    }

    pub fn cells_nonempty(&self) -> bool {
        self.min_cell() > 0.0
    }

    /// Difference in differences (y1L - y0L) - (y1R - y0R); `None` when a
    /// cell is empty.
    pub fn did(&self) -> Option<f64> {
        if !self.cells_nonempty() {
            return None;
        }
        Some((self.s1l / self.n1l - self.s0l / self.n0l) - (self.s1r / self.n1r - self.s0r / self.n0r))
    }
}

/// Pooled variance estimate over the four cells; `None` signals an invalid
/// split (node of 4 or fewer, or an empty cell).
pub fn pooled_sigma2(table: &NodeTable, node_n: f64) -> Option<f64> {
    if node_n <= 4.0 || !table.cells_nonempty() {
        return None;
    }
    let m0l = table.s0l / table.n0l;
    let m0r = table.s0r / table.n0r;
    let m1l = table.s1l / table.n1l;
    let m1r = table.s1r / table.n1r;
    let fitted = table.n0l * m0l * m0l
        + table.n0r * m0r * m0r
        + table.n1l * m1l * m1l
        + table.n1r * m1r * m1r;
    Some((table.sum_ysq - fitted) / (node_n - 4.0))
}

/// Wald statistic for the treatment-by-split interaction. `None` when a cell
/// is empty or the pooled variance is not strictly positive (a pure node has
/// no usable split).
pub fn q_statistic(table: &NodeTable, sigma2: f64) -> Option<f64> {
    if !table.cells_nonempty() || !(sigma2 > 0.0) {
        return None;
    }
    let did = table.did()?;
    let inv = 1.0 / table.n1l + 1.0 / table.n0l + 1.0 / table.n1r + 1.0 / table.n0r;
    Some(did * did / (sigma2 * inv))
}

/// Best cut found for one covariate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SplitCandidate {
    pub covariate: usize,
    /// Threshold on the original scale; rows with value <= cutpoint go left.
    pub cutpoint: f64,
    pub q: f64,
    /// Difference-in-differences estimate at the cut.
    pub did: f64,
    pub method: SplitMethod,
    pub valid: bool,
}

impl SplitCandidate {
    pub fn invalid(covariate: usize, method: SplitMethod) -> SplitCandidate {
        SplitCandidate {
            covariate,
            cutpoint: f64::NAN,
            q: 0.0,
            did: 0.0,
            method,
            valid: false,
        }
    }
}

/// Stable ascending argsort by value.
fn argsort(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].partial_cmp(&x[b]).unwrap());
    order
}

/// Midpoint between consecutive distinct values, nudged down to `a` if
/// rounding lands on `b` so that `x <= cut` always separates the pair.
fn midpoint(a: f64, b: f64) -> f64 {
    let mid = (a + b) * 0.5;
    if mid >= b {
        a
    } else {
        mid
    }
}

/// Boundary positions in sorted order: `k` is a boundary when sorted rows
/// `0..=k` take a strictly smaller value than row `k+1`.
fn boundaries(x: &[f64], order: &[usize]) -> Vec<usize> {
    (0..order.len().saturating_sub(1))
        .filter(|&k| x[order[k]] < x[order[k + 1]])
        .collect()
}

struct Cells {
    count: [f64; 2],
    sum: [f64; 2],
}

impl Cells {
    fn new() -> Cells {
        Cells {
            count: [0.0; 2],
            sum: [0.0; 2],
        }
    }

    fn add(&mut self, arm: usize, w: f64, y: f64) {
        self.count[arm] += w;
        self.sum[arm] += w * y;
    }
}

fn evaluate_boundary(
    left: &Cells,
    right: &Cells,
    sum_ysq: f64,
    node_n: f64,
    min_arm: f64,
) -> Option<(f64, f64)> {
    let table = NodeTable {
        n0l: left.count[0],
        n0r: right.count[0],
        n1l: left.count[1],
        n1r: right.count[1],
        s0l: left.sum[0],
        s0r: right.sum[0],
        s1l: left.sum[1],
        s1r: right.sum[1],
        sum_ysq,
    };
    if table.min_cell() < min_arm {
        return None;
    }
    let sigma2 = pooled_sigma2(&table, node_n)?;
    let q = q_statistic(&table, sigma2)?;
    Some((q, table.did()?))
}

/// Greedy search with the incremental updating scheme: one stable sort, then
/// a linear ascending sweep for left cells and a linear descending sweep for
/// right cells. Candidate cutpoints are midpoints between consecutive
/// distinct values; Q ties break toward the smallest cutpoint.
pub fn greedy_best_cut(
    x: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
    min_arm: f64,
    covariate: usize,
) -> SplitCandidate {
    let n = x.len();
    if n < 2 {
        return SplitCandidate::invalid(covariate, SplitMethod::Gs);
    }
    let order = argsort(x);
    let bounds = boundaries(x, &order);
    if bounds.is_empty() {
        return SplitCandidate::invalid(covariate, SplitMethod::Gs);
    }

    // Descending sweep: right-cell state at each boundary.
    let mut right_at: Vec<Cells> = Vec::with_capacity(bounds.len());
    {
        let mut right = Cells::new();
        let mut b_iter = bounds.iter().rev().peekable();
        for k in (0..n - 1).rev() {
            let i = order[k + 1];
            right.add(t[i] as usize, w[i] as f64, y[i]);
            if b_iter.peek() == Some(&&k) {
                b_iter.next();
                right_at.push(Cells {
                    count: right.count,
                    sum: right.sum,
                });
            }
        }
        right_at.reverse();
    }

    // Node totals, accumulated ascending.
    let mut sum_ysq = 0.0;
    let mut node_n = 0.0;
    for &i in &order {
        let wi = w[i] as f64;
        sum_ysq += wi * y[i] * y[i];
        node_n += wi;
    }

    // Ascending sweep: left cells grow; evaluate at each boundary.
    let mut best: Option<(f64, f64, f64)> = None; // (q, cutpoint, did)
    let mut left = Cells::new();
    let mut next_bound = 0;
    for k in 0..n - 1 {
        let i = order[k];
        left.add(t[i] as usize, w[i] as f64, y[i]);
        if next_bound < bounds.len() && bounds[next_bound] == k {
            let right = &right_at[next_bound];
            next_bound += 1;
            if let Some((q, did)) = evaluate_boundary(&left, right, sum_ysq, node_n, min_arm) {
                let cut = midpoint(x[order[k]], x[order[k + 1]]);
                if best.map_or(true, |(bq, _, _)| q > bq) {
                    best = Some((q, cut, did));
                }
            }
        }
    }

    match best {
        Some((q, cutpoint, did)) => SplitCandidate {
            covariate,
            cutpoint,
            q,
            did,
            method: SplitMethod::Gs,
            valid: true,
        },
        None => SplitCandidate::invalid(covariate, SplitMethod::Gs),
    }
}

/// Greedy search without the updating scheme: the full table is re-tallied
/// from scratch at every candidate cut. Kept for the timing comparison.
pub fn naive_best_cut(
    x: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
    min_arm: f64,
    covariate: usize,
) -> SplitCandidate {
    let n = x.len();
    if n < 2 {
        return SplitCandidate::invalid(covariate, SplitMethod::Gs);
    }
    let order = argsort(x);
    let bounds = boundaries(x, &order);
    if bounds.is_empty() {
        return SplitCandidate::invalid(covariate, SplitMethod::Gs);
    }

    let mut best: Option<(f64, f64, f64)> = None;
    for &k in &bounds {
        let mut left = Cells::new();
        for &i in &order[..=k] {
            left.add(t[i] as usize, w[i] as f64, y[i]);
        }
        let mut right = Cells::new();
        for &i in order[k + 1..].iter().rev() {
            right.add(t[i] as usize, w[i] as f64, y[i]);
        }
        let mut sum_ysq = 0.0;
        let mut node_n = 0.0;
        for &i in &order {
            let wi = w[i] as f64;
            sum_ysq += wi * y[i] * y[i];
            node_n += wi;
        }
        if let Some((q, did)) = evaluate_boundary(&left, &right, sum_ysq, node_n, min_arm) {
            let cut = midpoint(x[order[k]], x[order[k + 1]]);
            if best.map_or(true, |(bq, _, _)| q > bq) {
                best = Some((q, cut, did));
            }
        }
    }

    match best {
        Some((q, cutpoint, did)) => SplitCandidate {
            covariate,
            cutpoint,
            q,
            did,
            method: SplitMethod::Gs,
            valid: true,
        },
        None => SplitCandidate::invalid(covariate, SplitMethod::Gs),
    }
}

/// Exact table for the hard threshold `x <= cut`, accumulated under the
/// shared ordering convention.
pub fn table_at_cut(x: &[f64], y: &[f64], t: &[u8], w: &[u16], cut: f64) -> NodeTable {
    let order = argsort(x);
    let mut left = Cells::new();
    let mut split_at = 0;
    for (k, &i) in order.iter().enumerate() {
        if x[i] <= cut {
            left.add(t[i] as usize, w[i] as f64, y[i]);
            split_at = k + 1;
        } else {
            break;
        }
    }
    let mut right = Cells::new();
    for &i in order[split_at..].iter().rev() {
        right.add(t[i] as usize, w[i] as f64, y[i]);
    }
    let mut sum_ysq = 0.0;
    for &i in &order {
        sum_ysq += w[i] as f64 * y[i] * y[i];
    }
    NodeTable {
        n0l: left.count[0],
        n0r: right.count[0],
        n1l: left.count[1],
        n1r: right.count[1],
        s0l: left.sum[0],
        s0r: right.sum[0],
        s1l: left.sum[1],
        s1r: right.sum[1],
        sum_ysq,
    }
}

/// Logistic threshold surrogate `[1 + exp{-a(x-c)}]^-1`, saturating to 0/1
/// for |a(x-c)| >= 40 so the exponential cannot overflow.
pub fn expit(x: f64, a: f64, c: f64) -> f64 {
    let z = a * (x - c);
    if z >= 40.0 {
        1.0
    } else if z <= -40.0 {
        0.0
    } else {
        1.0 / (1.0 + (-z).exp())
    }
}

/// Node quantities that do not depend on the candidate cut.
#[derive(Clone, Copy, Debug)]
pub struct SssPrecomp {
    pub n0: f64,
    pub n1: f64,
    pub s0: f64,
    pub s1: f64,
    pub sum_ysq: f64,
    pub node_n: f64,
}

impl SssPrecomp {
    pub fn compute(y: &[f64], t: &[u8], w: &[u16]) -> SssPrecomp {
        let mut pre = SssPrecomp {
            n0: 0.0,
            n1: 0.0,
            s0: 0.0,
            s1: 0.0,
            sum_ysq: 0.0,
            node_n: 0.0,
        };
        for i in 0..y.len() {
            let wi = w[i] as f64;
            if t[i] == 1 {
                pre.n1 += wi;
                pre.s1 += wi * y[i];
            } else {
                pre.n0 += wi;
                pre.s0 += wi * y[i];
            }
            pre.sum_ysq += wi * y[i] * y[i];
        }
        pre.node_n = pre.n0 + pre.n1;
        pre
    }
}

/// Smooth surrogate objective: soft cell counts and sums replace the hard
/// threshold tallies, then the Q statistic is evaluated on the soft table.
/// Any soft cell below 1 returns 0, the worst objective value.
pub fn sss_objective(
    c: f64,
    x_std: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
    a: f64,
    pre: &SssPrecomp,
) -> f64 {
    let mut n1l = 0.0;
    let mut n0l = 0.0;
    let mut s1l = 0.0;
    let mut s0l = 0.0;
    for i in 0..x_std.len() {
        let s = expit(x_std[i], a, c);
        if s == 0.0 {
            continue;
        }
        let ws = w[i] as f64 * s;
        if t[i] == 1 {
            n1l += ws;
            s1l += ws * y[i];
        } else {
            n0l += ws;
            s0l += ws * y[i];
        }
    }
    let n1r = pre.n1 - n1l;
    let n0r = pre.n0 - n0l;
    let s1r = pre.s1 - s1l;
    let s0r = pre.s0 - s0l;
    if n1l < 1.0 || n0l < 1.0 || n1r < 1.0 || n0r < 1.0 {
        return 0.0;
    }
    let m1l = s1l / n1l;
    let m0l = s0l / n0l;
    let m1r = s1r / n1r;
    let m0r = s0r / n0r;
    let fitted = n0l * m0l * m0l + n0r * m0r * m0r + n1l * m1l * m1l + n1r * m1r * m1r;
    let sigma2 = (pre.sum_ysq - fitted) / (pre.node_n - 4.0);
    if !(sigma2 > 0.0) {
        return 0.0;
    }
    let did = (m1l - m0l) - (m1r - m0r);
    let inv = 1.0 / n1l + 1.0 / n0l + 1.0 / n1r + 1.0 / n0r;
    did * did / (sigma2 * inv)
}

/// Outcome of a scalar maximization.
#[derive(Clone, Copy, Debug)]
pub struct BrentResult {
    pub xmax: f64,
    pub fmax: f64,
    pub iterations: usize,
    /// False when the iteration budget ran out before the interval shrank
    /// below tolerance; the best point seen is still returned.
    pub converged: bool,
}

/// Brent's derivative-free scalar maximization (golden section with
/// successive parabolic interpolation), single start.
pub fn brent_maximize<F>(mut f: F, lo: f64, hi: f64, tol: f64, max_iter: usize) -> BrentResult
where
    F: FnMut(f64) -> f64,
{
    const GOLDEN: f64 = 0.381_966_011_250_105_2; // (3 - sqrt(5)) / 2
    let mut a = lo.min(hi);
    let mut b = lo.max(hi);
    let eps = f64::EPSILON.sqrt();
    let tol = tol.abs().max(1e-12);

    let mut x = a + GOLDEN * (b - a);
    let mut w = x;
    let mut v = x;
    let mut fx = -f(x);
    let mut fw = fx;
    let mut fv = fx;

    let mut d = 0.0_f64;
    let mut e = 0.0_f64;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < max_iter {
        iterations += 1;
        let m = 0.5 * (a + b);
        let tol1 = tol * x.abs() + eps;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            converged = true;
            break;
        }

        let mut use_golden = true;
        if e.abs() > tol1 {
            // Parabola through (v, fv), (w, fw), (x, fx).
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            let e_prev = e;
            e = d;
            if p.abs() < (0.5 * q * e_prev).abs() && p > q * (a - x) && p < q * (b - x) {
                d = p / q;
                let u = x + d;
                if (u - a) < tol2 || (b - u) < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                use_golden = false;
            }
        }
        if use_golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = -f(u);

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }

    BrentResult {
        xmax: x,
        fmax: -fx,
        iterations,
        converged,
    }
}

/// SSS split for one covariate: standardize within the node, maximize the
/// smooth objective over the standardized data range, transform the argmax
/// back to the original scale, and score the hard threshold there exactly so
/// SSS and GS candidates compare on the same scale.
pub fn sss_best_cut(
    x: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
    min_arm: f64,
    config: &SssConfig,
    covariate: usize,
) -> SplitCandidate {
    sss_best_cut_detailed(x, y, t, w, min_arm, config, covariate).0
}

/// As [`sss_best_cut`], also returning the optimizer trace.
pub fn sss_best_cut_detailed(
    x: &[f64],
    y: &[f64],
    t: &[u8],
    w: &[u16],
    min_arm: f64,
    config: &SssConfig,
    covariate: usize,
) -> (SplitCandidate, BrentResult) {
    let no_trace = BrentResult {
        xmax: f64::NAN,
        fmax: 0.0,
        iterations: 0,
        converged: false,
    };
    let pre = SssPrecomp::compute(y, t, w);
    if pre.node_n <= 4.0 || pre.n0 == 0.0 || pre.n1 == 0.0 {
        return (SplitCandidate::invalid(covariate, SplitMethod::Sss), no_trace);
    }
    let Some((mean, sd)) = weighted_mean_sd(x, w) else {
        return (SplitCandidate::invalid(covariate, SplitMethod::Sss), no_trace);
    };
    let x_std: Vec<f64> = x.iter().map(|v| (v - mean) / sd).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (i, &v) in x_std.iter().enumerate() {
        if w[i] > 0 {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !(lo < hi) {
        return (SplitCandidate::invalid(covariate, SplitMethod::Sss), no_trace);
    }

    let result = brent_maximize(
        |c| sss_objective(c, &x_std, y, t, w, config.a, &pre),
        lo,
        hi,
        config.brent_tol,
        config.brent_max_iter,
    );
    let cut = result.xmax * sd + mean;

    let table = table_at_cut(x, y, t, w, cut);
    let scored = pooled_sigma2(&table, table.node_n()).and_then(|s2| q_statistic(&table, s2));
    let candidate = match scored {
        Some(q) if table.min_cell() >= min_arm => SplitCandidate {
            covariate,
            cutpoint: cut,
            q,
            did: table.did().unwrap(),
            method: SplitMethod::Sss,
            valid: true,
        },
        _ => SplitCandidate::invalid(covariate, SplitMethod::Sss),
    };
    (candidate, result)
}

/// Weighted sample mean and standard deviation (denominator total weight
/// minus one); `None` when degenerate.
pub fn weighted_mean_sd(x: &[f64], w: &[u16]) -> Option<(f64, f64)> {
    let mut wsum = 0.0;
    let mut sum = 0.0;
    for i in 0..x.len() {
        let wi = w[i] as f64;
        wsum += wi;
        sum += wi * x[i];
    }
    if wsum < 2.0 {
        return None;
    }
    let mean = sum / wsum;
    let mut ss = 0.0;
    for i in 0..x.len() {
        let d = x[i] - mean;
        ss += w[i] as f64 * d * d;
    }
    let sd = (ss / (wsum - 1.0)).sqrt();
    if sd > 0.0 && sd.is_finite() {
        Some((mean, sd))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn ones(n: usize) -> Vec<u16> {
        vec![1; n]
    }

    #[test]
    fn node_table_direct_count() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let t = [0, 0, 1, 1];
        let in_left = [true, false, true, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        assert_eq!(table.n0l, 1.0);
        assert_eq!(table.s0l, 1.0);
        assert_eq!(table.n0r, 1.0);
        assert_eq!(table.s0r, 2.0);
        assert_eq!(table.n1l, 1.0);
        assert_eq!(table.s1l, 3.0);
        assert_eq!(table.n1r, 1.0);
        assert_eq!(table.s1r, 4.0);
        assert_eq!(table.sum_ysq, 1.0 + 4.0 + 9.0 + 16.0);
    }

    #[test]
    fn node_table_all_left() {
        let y = [1.0, 2.0];
        let t = [0, 1];
        let table = NodeTable::tally(&y, &t, &[true, true]);
        assert_eq!(table.n0r, 0.0);
        assert_eq!(table.n1r, 0.0);
    }

    #[test]
    fn node_table_matches_per_cell_loop() {
        let mut rng = crate::rng::stream_rng(11, 0);
        let n = 12;
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let in_left: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        let table = NodeTable::tally(&y, &t, &in_left);

        // Brute-force per-cell tally.
        let mut expect = [[0.0f64; 2]; 4];
        for i in 0..n {
            let cell = (t[i] as usize) * 2 + usize::from(!in_left[i]);
            expect[cell][0] += 1.0;
            expect[cell][1] += y[i];
        }
        assert_eq!(table.n0l, expect[0][0]);
        assert_abs_diff_eq!(table.s0l, expect[0][1], epsilon = 1e-12);
        assert_eq!(table.n0r, expect[1][0]);
        assert_abs_diff_eq!(table.s0r, expect[1][1], epsilon = 1e-12);
        assert_eq!(table.n1l, expect[2][0]);
        assert_abs_diff_eq!(table.s1l, expect[2][1], epsilon = 1e-12);
        assert_eq!(table.n1r, expect[3][0]);
        assert_abs_diff_eq!(table.s1r, expect[3][1], epsilon = 1e-12);
    }

    #[test]
    fn pooled_sigma2_hand_case() {
        // Cells of size 2 with means 1, 1, 2, 2: sigma2 = (28 - 20) / 4 = 2.
        let y = [0.0, 2.0, 0.0, 2.0, 1.0, 3.0, 1.0, 3.0];
        let t = [0, 0, 0, 0, 1, 1, 1, 1];
        let in_left = [true, true, false, false, true, true, false, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        assert_abs_diff_eq!(pooled_sigma2(&table, 8.0).unwrap(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn pooled_sigma2_degenerate_denominator() {
        let y = [1.0, 2.0, 3.0, 4.0];
        let t = [0, 0, 1, 1];
        let in_left = [true, false, true, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        assert!(pooled_sigma2(&table, 4.0).is_none());
    }

    #[test]
    fn pooled_sigma2_constant_response_is_zero() {
        let y = [2.0; 8];
        let t = [0, 0, 0, 0, 1, 1, 1, 1];
        let in_left = [true, true, false, false, true, true, false, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        assert_abs_diff_eq!(pooled_sigma2(&table, 8.0).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn q_statistic_hand_case() {
        // Cell means 0L=1, 0R=1, 1L=4, 1R=2: DID = 2, sigma2 = 2, Q = 1.
        let y = [0.0, 2.0, 0.0, 2.0, 3.0, 5.0, 1.0, 3.0];
        let t = [0, 0, 0, 0, 1, 1, 1, 1];
        let in_left = [true, true, false, false, true, true, false, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        let sigma2 = pooled_sigma2(&table, 8.0).unwrap();
        assert_abs_diff_eq!(sigma2, 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(table.did().unwrap(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q_statistic(&table, sigma2).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn q_zero_when_dids_equal() {
        let y = [0.0, 1.0, 0.0, 1.0, 2.0, 3.0, 2.0, 3.0];
        let t = [0, 0, 0, 0, 1, 1, 1, 1];
        let in_left = [true, false, true, false, true, false, true, false];
        let table = NodeTable::tally(&y, &t, &in_left);
        let sigma2 = pooled_sigma2(&table, 8.0).unwrap();
        assert_abs_diff_eq!(q_statistic(&table, sigma2).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn q_doubles_when_cell_counts_double() {
        // Algebraic oracle: at fixed cell means and sigma2, doubling every
        // cell count halves the reciprocal-count sum, doubling Q.
        let table = NodeTable {
            n0l: 3.0,
            n0r: 4.0,
            n1l: 5.0,
            n1r: 6.0,
            s0l: 3.0 * 1.5,
            s0r: 4.0 * -0.5,
            s1l: 5.0 * 2.5,
            s1r: 6.0 * 0.25,
            sum_ysq: 0.0, // unused; sigma2 passed directly
        };
        let doubled = NodeTable {
            n0l: 6.0,
            n0r: 8.0,
            n1l: 10.0,
            n1r: 12.0,
            s0l: 6.0 * 1.5,
            s0r: 8.0 * -0.5,
            s1l: 10.0 * 2.5,
            s1r: 12.0 * 0.25,
            sum_ysq: 0.0,
        };
        let q1 = q_statistic(&table, 1.7).unwrap();
        let q2 = q_statistic(&doubled, 1.7).unwrap();
        assert_abs_diff_eq!(q2, 2.0 * q1, epsilon = 1e-12 * q1.abs());
    }

    #[test]
    fn greedy_two_distinct_values_single_candidate() {
        let x = [0.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, 1.0];
        let y = [0.0, 1.0, 4.0, 5.0, 0.0, 1.0, 0.5, 1.5];
        let t = [0, 1, 0, 1, 0, 1, 0, 1];
        let cand = greedy_best_cut(&x, &y, &t, &ones(8), 1.0, 0);
        assert!(cand.valid);
        assert_eq!(cand.cutpoint, 0.5);
    }

    #[test]
    fn greedy_matches_naive_on_random_instance() {
        let mut rng = crate::rng::stream_rng(5, 0);
        for _ in 0..25 {
            let n = 40;
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..12) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
            let fast = greedy_best_cut(&x, &y, &t, &ones(n), 1.0, 0);
            let slow = naive_best_cut(&x, &y, &t, &ones(n), 1.0, 0);
            assert_eq!(fast.valid, slow.valid);
            if fast.valid {
                assert_eq!(fast.cutpoint, slow.cutpoint);
                assert_eq!(fast.q, slow.q);
                assert_eq!(fast.did, slow.did);
            }
        }
    }

    #[test]
    fn greedy_single_distinct_value_invalid() {
        let x = [2.0; 10];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0];
        let t = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        assert!(!greedy_best_cut(&x, &y, &t, &ones(10), 1.0, 0).valid);
    }

    #[test]
    fn q_invariant_to_response_shift() {
        let mut rng = crate::rng::stream_rng(6, 0);
        let n = 30;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let shifted: Vec<f64> = y.iter().map(|v| v + 37.5).collect();
        let a = greedy_best_cut(&x, &y, &t, &ones(n), 1.0, 0);
        let b = greedy_best_cut(&x, &shifted, &t, &ones(n), 1.0, 0);
        assert_eq!(a.cutpoint, b.cutpoint);
        assert_abs_diff_eq!(a.q, b.q, epsilon = 1e-8 * a.q.max(1.0));
    }

    #[test]
    fn cut_selection_invariant_to_response_scale() {
        let mut rng = crate::rng::stream_rng(7, 0);
        let n = 30;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let scaled: Vec<f64> = y.iter().map(|v| v * 4.0).collect();
        let a = greedy_best_cut(&x, &y, &t, &ones(n), 1.0, 0);
        let b = greedy_best_cut(&x, &scaled, &t, &ones(n), 1.0, 0);
        assert_eq!(a.cutpoint, b.cutpoint);
        assert_abs_diff_eq!(a.q, b.q, epsilon = 1e-8 * a.q.max(1.0));
    }

    #[test]
    fn expit_at_cut_is_half() {
        assert_eq!(expit(0.3, 10.0, 0.3), 0.5);
    }

    #[test]
    fn expit_high_precision_value() {
        // 1 / (1 + e^-1)
        assert_abs_diff_eq!(expit(0.1, 10.0, 0.0), 0.731_058_578_630_004_9, epsilon = 1e-15);
    }

    #[test]
    fn expit_saturates_without_overflow() {
        assert_eq!(expit(1e12, 10.0, 0.0), 1.0);
        assert_eq!(expit(-1e12, 10.0, 0.0), 0.0);
    }

    #[test]
    fn expit_monotone() {
        let mut prev = expit(-3.0, 10.0, 0.0);
        let mut x = -3.0 + 0.05;
        while x <= 3.0 {
            let cur = expit(x, 10.0, 0.0);
            assert!(cur >= prev);
            prev = cur;
            x += 0.05;
        }
    }

    #[test]
    fn sss_objective_zero_far_from_data() {
        let mut rng = crate::rng::stream_rng(8, 0);
        let n = 40;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.5..1.5)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let w = ones(n);
        let pre = SssPrecomp::compute(&y, &t, &w);
        assert_eq!(sss_objective(-50.0, &x, &y, &t, &w, 10.0, &pre), 0.0);
    }

    #[test]
    fn sss_objective_is_continuous_in_c() {
        let mut rng = crate::rng::stream_rng(9, 0);
        let n = 60;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.7..1.7)).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let w = ones(n);
        let pre = SssPrecomp::compute(&y, &t, &w);
        for &c in &[-0.8, -0.2, 0.1, 0.6] {
            let base = sss_objective(c, &x, &y, &t, &w, 10.0, &pre);
            let first_gap = (sss_objective(c + 1e-2, &x, &y, &t, &w, 10.0, &pre) - base).abs();
            let mut h = 1e-2;
            let mut gap = first_gap;
            for _ in 0..8 {
                h *= 0.5;
                gap = (sss_objective(c + h, &x, &y, &t, &w, 10.0, &pre) - base).abs();
            }
            // 256-fold smaller step must shrink the increment far below the
            // initial one and below a small fraction of the objective scale.
            assert!(gap <= 0.05 * first_gap.max(1e-9), "gap {gap} vs first {first_gap} at c={c}");
            assert!(gap <= 0.01 * base.max(1.0), "gap {gap} vs base {base} at c={c}");
        }
    }

    #[test]
    fn sss_large_a_matches_exact_q_at_midpoints() {
        // With a=1000 on well-separated standardized values the soft table
        // collapses onto the hard table.
        let mut rng = crate::rng::stream_rng(10, 0);
        let n = 120;
        let k = 8;
        let x: Vec<f64> = (0..n).map(|_| (rng.random_range(1..=k) as f64) / k as f64).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| rng.random_range(-1.0..1.0) + if x[i] > 0.5 { 1.0 } else { 0.0 })
            .collect();
        let t: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let w = ones(n);
        let (x_std, mean, sd) = crate::data::standardize_column(&x).unwrap();
        let pre = SssPrecomp::compute(&y, &t, &w);

        let mut distinct: Vec<f64> = x.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        for pair in distinct.windows(2) {
            let cut = (pair[0] + pair[1]) * 0.5;
            let table = table_at_cut(&x, &y, &t, &w, cut);
            if table.min_cell() < 5.0 {
                continue;
            }
            let sigma2 = pooled_sigma2(&table, table.node_n()).unwrap();
            let q = q_statistic(&table, sigma2).unwrap();
            let q_soft = sss_objective((cut - mean) / sd, &x_std, &y, &t, &w, 1000.0, &pre);
            assert!(
                (q_soft - q).abs() <= 1e-6 * q.max(1.0),
                "q={q}, q_soft={q_soft} at cut={cut}"
            );
        }
    }

    #[test]
    fn brent_finds_quadratic_maximum() {
        let result = brent_maximize(|c| -(c - 0.3) * (c - 0.3), 0.0, 1.0, 1e-6, 100);
        assert!(result.converged);
        assert_abs_diff_eq!(result.xmax, 0.3, epsilon = 1e-4);
    }

    #[test]
    fn brent_constant_function() {
        let result = brent_maximize(|_| 7.25, 0.0, 1.0, 1e-6, 100);
        assert!(result.converged);
        assert_eq!(result.fmax, 7.25);
        assert!((0.0..=1.0).contains(&result.xmax));
    }

    #[test]
    fn brent_monotone_reaches_endpoint() {
        let result = brent_maximize(|c| 2.0 * c, -1.0, 3.0, 1e-6, 200);
        assert!(result.converged);
        assert_abs_diff_eq!(result.xmax, 3.0, epsilon = 1e-3);
    }

    #[test]
    fn brent_iteration_budget_flag() {
        let result = brent_maximize(|c| -(c - 0.3) * (c - 0.3), 0.0, 1.0, 1e-12, 3);
        assert!(!result.converged);
        assert_eq!(result.iterations, 3);
    }

    #[test]
    fn sss_single_distinct_value_invalid() {
        let x = [1.0; 12];
        let y = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let t = [0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1];
        let cand = sss_best_cut(&x, &y, &t, &ones(12), 1.0, &SssConfig::default(), 0);
        assert!(!cand.valid);
    }

    #[test]
    fn sss_cut_rescales_affinely() {
        let mut rng = crate::rng::stream_rng(12, 0);
        let n = 200;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let delta = if x[i] >= 0.5 { 1.5 } else { 0.0 };
                t[i] as f64 * delta + rng.random_range(-0.5..0.5)
            })
            .collect();
        let w = ones(n);
        let cfg = SssConfig::default();
        let base = sss_best_cut(&x, &y, &t, &w, 5.0, &cfg, 0);
        assert!(base.valid);

        let x2: Vec<f64> = x.iter().map(|v| 10.0 * v + 3.0).collect();
        let scaled = sss_best_cut(&x2, &y, &t, &w, 5.0, &cfg, 0);
        assert!(scaled.valid);
        // The optimizer tolerance (1e-4 on the standardized scale) bounds how
        // far the two argmaxes can drift apart.
        assert_abs_diff_eq!(scaled.cutpoint, 10.0 * base.cutpoint + 3.0, epsilon = 5e-3);
        assert_abs_diff_eq!(scaled.q, base.q, epsilon = 1e-9 * base.q.max(1.0));
    }

    #[test]
    fn sss_brent_iterations_stay_small_on_sharp_signal() {
        let mut rng = crate::rng::stream_rng(13, 0);
        let n = 500;
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let t: Vec<u8> = (0..n).map(|_| rng.random_range(0..2u8)).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let delta = if x[i] >= 0.5 { 2.0 } else { 0.0 };
                t[i] as f64 * delta + rng.random_range(-0.2..0.2)
            })
            .collect();
        let (cand, trace) =
            sss_best_cut_detailed(&x, &y, &t, &ones(n), 5.0, &SssConfig::default(), 0);
        assert!(cand.valid);
        assert!(trace.converged);
        assert!(trace.iterations <= 25, "iterations = {}", trace.iterations);
    }
}
