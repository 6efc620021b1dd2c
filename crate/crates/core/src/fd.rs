//! Finite differences on nonuniform one-dimensional grids and a
//! tridiagonal solver.

use crate::error::{Error, Result};

/// Slope of the piecewise-linear interpolant on each cell, `len = nodes - 1`.
pub fn cell_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| (ys[1] - ys[0]) / (xs[1] - xs[0]))
        .collect()
}

/// Second-order nodal first derivative: weighted central differences in the
/// interior and three-point one-sided formulas at both ends. Exact for
/// quadratics on any grid.
pub fn nodal_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    assert!(n >= 3, "nodal_slopes needs at least three nodes");
    let mut g = vec![0.0; n];
    for i in 1..n - 1 {
        let hl = x[i] - x[i - 1];
        let hr = x[i + 1] - x[i];
        let dl = (y[i] - y[i - 1]) / hl;
        let dr = (y[i + 1] - y[i]) / hr;
        g[i] = (hr * dl + hl * dr) / (hl + hr);
    }
    let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
    let (d0, d1) = ((y[1] - y[0]) / h0, (y[2] - y[1]) / h1);
    g[0] = d0 - h0 * (d1 - d0) / (h0 + h1);
    let (ha, hb) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
    let (da, db) = ((y[n - 2] - y[n - 3]) / ha, (y[n - 1] - y[n - 2]) / hb);
    g[n - 1] = db + hb * (db - da) / (ha + hb);
    g
}

/// Three-point second difference at interior node `i`.
#[inline]
pub fn second_difference_at(x: &[f64], y: &[f64], i: usize) -> f64 {
    let hl = x[i] - x[i - 1];
    let hr = x[i + 1] - x[i];
    2.0 * ((y[i + 1] - y[i]) / hr - (y[i] - y[i - 1]) / hl) / (hl + hr)
}

/// Second differences at all interior nodes, `len = nodes - 2`.
pub fn second_differences(x: &[f64], y: &[f64]) -> Vec<f64> {
    (1..x.len().saturating_sub(1))
        .map(|i| second_difference_at(x, y, i))
        .collect()
}

/// One-sided second difference at the right end, from the last three nodes.
pub fn right_end_second_difference(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    second_difference_at(&x[n - 3..], &y[n - 3..], 1)
}

/// Thomas algorithm for `lower[i] x[i-1] + diag[i] x[i] + upper[i] x[i+1] = rhs[i]`.
/// `lower[0]` and `upper[n-1]` are ignored.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = diag.len();
    debug_assert!(lower.len() == n && upper.len() == n && rhs.len() == n);
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = diag[0];
    if pivot == 0.0 || !pivot.is_finite() {
        return Err(Error::SingularSystem { row: 0 });
    }
    c[0] = upper[0] / pivot;
    d[0] = rhs[0] / pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::SingularSystem { row: i });
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Piecewise-linear interpolation on a sorted grid; `None` outside `[x0, xN]`.
pub fn interpolate(x: &[f64], y: &[f64], at: f64) -> Option<f64> {
    let last = *x.last()?;
    if at < x[0] || at > last {
        return None;
    }
    let j = match x.partition_point(|&xi| xi <= at) {
        0 => 0,
        k if k >= x.len() => return Some(y[x.len() - 1]),
        k => k - 1,
    };
    let t = (at - x[j]) / (x[j + 1] - x[j]);
    Some(y[j] + t * (y[j + 1] - y[j]))
}
