//! Small quadrature and root-finding helpers shared across the library.

use crate::error::{Error, Result};

/// Composite Simpson quadrature of `f` over `[a, b]` with `n` panels
/// (`n` is rounded up to the next even number).
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let n = if n.is_multiple_of(2) { n.max(2) } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// Adaptive Simpson quadrature with a forced minimum bisection depth.
///
/// `min_depth` levels of uniform bisection are always performed (so at least
/// `2^min_depth` panels are used); afterwards an interval is accepted once the
/// two-half refinement agrees with the whole-interval estimate to `tol`.
/// Handles integrands with step discontinuities by recursing into the jump.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    tol: f64,
    min_depth: u32,
    max_depth: u32,
) -> f64 {
    fn simpson_est(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn rec<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
        min_depth: u32,
        max_depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson_est(fa, flm, fm, m - a);
        let right = simpson_est(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth >= max_depth || (depth >= min_depth && delta.abs() <= 15.0 * tol) {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, min_depth, max_depth)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, min_depth, max_depth)
    }

    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let fb = f(b);
    let whole = simpson_est(fa, fm, fb, b - a);
    rec(f, a, b, fa, fm, fb, whole, tol, 0, min_depth, max_depth)
}

/// Trapezoid rule over tabulated points `(xs, ys)`.
pub fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    debug_assert_eq!(xs.len(), ys.len());
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// Finds the infimum of `{x in [lo, hi] : pred(x)}` for a predicate that is
/// false below some threshold and true at and above it. `pred(hi)` must hold.
pub fn bisect_infimum<F: Fn(f64) -> bool>(
    pred: F,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> Result<f64> {
    if !pred(hi) {
        return Err(Error::numerical(
            "bisect_infimum",
            format!("predicate does not hold at upper bracket {hi}"),
        ));
    }
    if pred(lo) {
        return Ok(lo);
    }
    let mut iter = 0;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
        if iter > 200 {
            return Err(Error::numerical("bisect_infimum", "no convergence in 200 iterations"));
        }
    }
    Ok(hi)
}

/// Bisection root of a continuous monotone `f` on `[lo, hi]` with a sign
/// change across the bracket.
pub fn bisect_root<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::numerical(
            "bisect_root",
            format!("no sign change on [{lo}, {hi}]"),
        ));
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Uniform grid of `n` points spanning `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2, "linspace needs at least two points");
    let h = (b - a) / (n - 1) as f64;
    (0..n)
        .map(|i| if i == n - 1 { b } else { a + i as f64 * h })
        .collect()
}
