//! Extended Black-Scholes solver for the repo embedded derivative.
//!
//! Solves, backward from `v(S, T) = 0`,
//!
//! ```text
//! v_t + rbar_s S v_S + 1/2 sigma^2 S^2 v_SS - r_e v + src(S, t) = 0
//! ```
//!
//! where `src` bundles the spread income less the expected-loss decay and the
//! capital charge, both of which may depend on time (and, for fixed-shares
//! trades, on the collateral price). Discretization: log-price coordinates on
//! a uniform grid, central differences, Crank-Nicolson with two implicit
//! startup steps, zero-curvature (linearity in `S`) boundaries. A mesh Peclet
//! guard drops to the fully implicit scheme when central convection would
//! oscillate. A Feynman-Kac Monte Carlo estimator of the same expectation
//! provides an independent cross-check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collateral::KouParams;
use crate::error::{Error, Result};

/// Time-stepping scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    CrankNicolson,
    Implicit,
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Scheme::CrankNicolson => write!(f, "crank-nicolson"),
            Scheme::Implicit => write!(f, "implicit"),
        }
    }
}

/// Price/time mesh. Nodes must be strictly increasing and uniform in `ln S`.
#[derive(Debug, Clone)]
pub struct Grid {
    s_nodes: Vec<f64>,
    t_steps: usize,
    scheme: Scheme,
}

impl Grid {
    pub fn new(s_nodes: Vec<f64>, t_steps: usize, scheme: Scheme) -> Result<Self> {
        if s_nodes.len() < 5 {
            return Err(Error::invalid("grid", "need at least 3 interior price nodes"));
        }
        if t_steps == 0 {
            return Err(Error::invalid("grid", "need at least one time step"));
        }
        if s_nodes.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::invalid("grid", "price nodes must be finite and > 0"));
        }
        if s_nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("grid", "price nodes must be strictly increasing"));
        }
        let dx0 = (s_nodes[1] / s_nodes[0]).ln();
        for w in s_nodes.windows(2) {
            let dx = (w[1] / w[0]).ln();
            if (dx - dx0).abs() > 1e-9 * dx0 {
                return Err(Error::invalid("grid", "price nodes must be uniform in log-space"));
            }
        }
        Ok(Grid {
            s_nodes,
            t_steps,
            scheme,
        })
    }

    /// Log-spaced nodes covering `[s_min, s_max]`.
    pub fn log_spaced(
        s_min: f64,
        s_max: f64,
        n_nodes: usize,
        t_steps: usize,
        scheme: Scheme,
    ) -> Result<Self> {
        if s_min.is_nan() || s_min <= 0.0 || s_max.is_nan() || s_max <= s_min {
            return Err(Error::invalid("grid", "need 0 < s_min < s_max"));
        }
        let lo = s_min.ln();
        let hi = s_max.ln();
        let h = (hi - lo) / (n_nodes - 1) as f64;
        let nodes = (0..n_nodes).map(|i| (lo + i as f64 * h).exp()).collect();
        Grid::new(nodes, t_steps, scheme)
    }

    pub fn s_nodes(&self) -> &[f64] {
        &self.s_nodes
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }
}

/// Coefficients of the pricing equation. The source term is the net income
/// flow `s_p N_p - lambda El(t) - s_k N_c(S, t)` as a function of `(S, t)`.
pub struct PdeCoefficients {
    /// Effective stock financing rate `rbar_s = r_s (1 + h_s) - r_N h_s`.
    pub financing_rate: f64,
    /// Diffusion volatility.
    pub sigma: f64,
    /// Discount rate `r_e` (the counterparty rate for a lending repo).
    pub discount_rate: f64,
    /// Maturity in years.
    pub maturity: f64,
    source: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
}

impl PdeCoefficients {
    pub fn new(
        financing_rate: f64,
        sigma: f64,
        discount_rate: f64,
        maturity: f64,
        source: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if sigma.is_nan() || sigma < 0.0 {
            return Err(Error::invalid("pde.sigma", "must be >= 0"));
        }
        if maturity.is_nan() || maturity <= 0.0 {
            return Err(Error::invalid("pde.maturity", "must be > 0"));
        }
        Ok(PdeCoefficients {
            financing_rate,
            sigma,
            discount_rate,
            maturity,
            source: Box::new(source),
        })
    }

    /// Effective stock financing rate from its components: sec-lending rebate
    /// `r_s`, stock financing haircut `h_s`, unsecured note rate `r_n`.
    pub fn effective_financing_rate(r_s: f64, h_s: f64, r_n: f64) -> f64 {
        r_s * (1.0 + h_s) - r_n * h_s
    }

    pub fn source(&self, s: f64, t: f64) -> f64 {
        (self.source)(s, t)
    }
}

/// Solution surface on the mesh, time-major (`values[i][j]` at `times[i]`,
/// `s_nodes[j]`).
#[derive(Debug, Clone)]
pub struct PdeSurface {
    pub s_nodes: Vec<f64>,
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    /// Scheme actually used after the oscillation guard.
    pub scheme_used: Scheme,
}

impl PdeSurface {
    /// Solution at `t = 0`, linearly interpolated in `ln S`.
    pub fn value_at_origin(&self, s: f64) -> Result<f64> {
        let row = &self.values[0];
        let nodes = &self.s_nodes;
        if s < nodes[0] || s > *nodes.last().unwrap() {
            return Err(Error::invalid("s", "price outside the grid"));
        }
        let x = s.ln();
        let j = nodes.partition_point(|n| n.ln() <= x).clamp(1, nodes.len() - 1);
        let (x0, x1) = (nodes[j - 1].ln(), nodes[j].ln());
        let w = (x - x0) / (x1 - x0);
        Ok(row[j - 1] * (1.0 - w) + row[j] * w)
    }

    /// Spread of the `t = 0` slice, for flatness checks.
    pub fn origin_range(&self) -> (f64, f64) {
        let row = &self.values[0];
        let lo = row.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

/// Thomas algorithm for a tridiagonal system; `sub` and `sup` have length
/// `n - 1`. Overwrites `rhs` with the solution.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    let mut c_star = vec![0.0; n - 1];
    let mut denom = diag[0];
    if denom.abs() < 1e-300 {
        return Err(Error::numerical("tridiagonal", "zero pivot"));
    }
    c_star[0] = sup[0] / denom;
    rhs[0] /= denom;
    for i in 1..n {
        denom = diag[i] - sub[i - 1] * c_star[i - 1];
        if denom.abs() < 1e-300 {
            return Err(Error::numerical("tridiagonal", "zero pivot"));
        }
        if i < n - 1 {
            c_star[i] = sup[i] / denom;
        }
        rhs[i] = (rhs[i] - sub[i - 1] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c_star[i] * rhs[i + 1];
    }
    Ok(())
}

/// Backward solve of the pricing equation on the grid.
pub fn solve_pde(coeffs: &PdeCoefficients, grid: &Grid) -> Result<PdeSurface> {
    let n = grid.s_nodes.len();
    let dx = (grid.s_nodes[1] / grid.s_nodes[0]).ln();
    let a_conv = coeffs.financing_rate - 0.5 * coeffs.sigma * coeffs.sigma;
    let b_diff = 0.5 * coeffs.sigma * coeffs.sigma;
    let r_e = coeffs.discount_rate;

    // mesh Peclet guard: central convection oscillates when |a| dx > 2 b
    let mut scheme = grid.scheme;
    if scheme == Scheme::CrankNicolson {
        let convection_dominated = if b_diff > 0.0 {
            a_conv.abs() * dx > 2.0 * b_diff
        } else {
            a_conv.abs() > 0.0
        };
        if convection_dominated {
            scheme = Scheme::Implicit;
        }
    }

    // spatial operator M: v_t = M v - src
    let mut sub = vec![0.0; n - 1];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n - 1];
    for j in 1..n - 1 {
        sub[j - 1] = a_conv / (2.0 * dx) - b_diff / (dx * dx);
        diag[j] = 2.0 * b_diff / (dx * dx) + r_e;
        sup[j] = -a_conv / (2.0 * dx) - b_diff / (dx * dx);
    }
    // zero S-curvature boundaries: v_xx = v_x, so the row carries the full
    // financing convection with a one-sided first derivative
    diag[0] = coeffs.financing_rate / dx + r_e;
    sup[0] = -coeffs.financing_rate / dx;
    sub[n - 2] = coeffs.financing_rate / dx;
    diag[n - 1] = -coeffs.financing_rate / dx + r_e;

    let t_steps = grid.t_steps;
    let dt = coeffs.maturity / t_steps as f64;
    let times: Vec<f64> = (0..=t_steps).map(|i| i as f64 * dt).collect();

    let apply_m = |v: &[f64], out: &mut [f64]| {
        out[0] = diag[0] * v[0] + sup[0] * v[1];
        for j in 1..n - 1 {
            out[j] = sub[j - 1] * v[j - 1] + diag[j] * v[j] + sup[j] * v[j + 1];
        }
        out[n - 1] = sub[n - 2] * v[n - 2] + diag[n - 1] * v[n - 1];
    };

    let mut values = vec![vec![0.0; n]; t_steps + 1];
    let mut mv = vec![0.0; n];
    let mut src_lo = vec![0.0; n];
    let mut src_hi = vec![0.0; n];

    for step in 0..t_steps {
        let i_hi = t_steps - step; // known slice
        let i_lo = i_hi - 1; // slice being solved
        // two implicit startup steps damp the terminal-data interaction
        let theta = match scheme {
            Scheme::Implicit => 1.0,
            Scheme::CrankNicolson if step < 2 => 1.0,
            Scheme::CrankNicolson => 0.5,
        };
        for j in 0..n {
            src_lo[j] = coeffs.source(grid.s_nodes[j], times[i_lo]);
            src_hi[j] = coeffs.source(grid.s_nodes[j], times[i_hi]);
        }
        let (prev, rest) = values.split_at_mut(i_hi);
        let v_hi = &rest[0];
        let v_lo = &mut prev[i_lo];
        apply_m(v_hi, &mut mv);
        for j in 0..n {
            v_lo[j] = v_hi[j] - (1.0 - theta) * dt * mv[j]
                + dt * (theta * src_lo[j] + (1.0 - theta) * src_hi[j]);
        }
        // (I + theta dt M) v_lo = rhs
        let lhs_sub: Vec<f64> = sub.iter().map(|x| theta * dt * x).collect();
        let lhs_diag: Vec<f64> = diag.iter().map(|x| 1.0 + theta * dt * x).collect();
        let lhs_sup: Vec<f64> = sup.iter().map(|x| theta * dt * x).collect();
        solve_tridiagonal(&lhs_sub, &lhs_diag, &lhs_sup, v_lo)?;
    }

    Ok(PdeSurface {
        s_nodes: grid.s_nodes.clone(),
        times,
        values,
        scheme_used: scheme,
    })
}

/// Feynman-Kac Monte Carlo estimate of `v(s0, 0)`: simulates the collateral
/// price under the financing-rate drift and accumulates the discounted source
/// along each path, with the per-step discount integral taken exactly.
/// Returns `(estimate, standard error)`; deterministic per seed.
pub fn feynman_kac_mc(
    coeffs: &PdeCoefficients,
    s0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    feynman_kac_impl(coeffs, None, s0, n_paths, seed)
}

/// Feynman-Kac estimate with double-exponential jumps layered on the
/// diffusion (the jump model supplies sigma and jump parameters; the drift is
/// compensated so that `E[S_t] = s0 e^{rbar_s t}`).
pub fn feynman_kac_mc_jumps(
    coeffs: &PdeCoefficients,
    jumps: &KouParams,
    s0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    feynman_kac_impl(coeffs, Some(jumps), s0, n_paths, seed)
}

fn feynman_kac_impl(
    coeffs: &PdeCoefficients,
    jumps: Option<&KouParams>,
    s0: f64,
    n_paths: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_paths < 100 {
        return Err(Error::invalid("mc.n_paths", "need at least 100 paths"));
    }
    if s0.is_nan() || s0 <= 0.0 {
        return Err(Error::invalid("s0", "must be > 0"));
    }
    let t_end = coeffs.maturity;
    let n_steps = ((t_end * 252.0).ceil() as usize).max(1);
    let dt = t_end / n_steps as f64;
    let r_e = coeffs.discount_rate;
    // exact per-step discount integral: w_i = (e^{-r t_i} - e^{-r t_{i+1}}) / r
    let step_weight: Vec<f64> = (0..n_steps)
        .map(|i| {
            let t0 = i as f64 * dt;
            let t1 = t0 + dt;
            if r_e.abs() < 1e-14 {
                dt
            } else {
                ((-r_e * t0).exp() - (-r_e * t1).exp()) / r_e
            }
        })
        .collect();

    let (sigma, base_drift) = match jumps {
        None => (coeffs.sigma, coeffs.financing_rate - 0.5 * coeffs.sigma * coeffs.sigma),
        Some(k) => {
            // martingale compensation of the jump part
            let e_jump = k.p_up / (1.0 - k.mean_up) + (1.0 - k.p_up) / (1.0 + k.mean_down);
            (
                k.sigma,
                coeffs.financing_rate - 0.5 * k.sigma * k.sigma
                    - k.jump_intensity * (e_jump - 1.0),
            )
        }
    };
    let sqrt_dt = dt.sqrt();

    const CHUNK: usize = 1 << 13;
    let n_chunks = n_paths.div_ceil(CHUNK);
    let per_path: Vec<f64> = (0..n_chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0x464b_4d43 ^ c as u64);
            let count = CHUNK.min(n_paths - c * CHUNK);
            let poisson = jumps.and_then(|k| {
                if k.jump_intensity > 0.0 {
                    Some(Poisson::new(k.jump_intensity * dt).expect("positive rate"))
                } else {
                    None
                }
            });
            let exp_up = jumps.map(|k| Exp::new(1.0 / k.mean_up).expect("positive mean"));
            let exp_dn = jumps.map(|k| Exp::new(1.0 / k.mean_down).expect("positive mean"));
            let mut out = Vec::with_capacity(count);
            for _ in 0..count {
                let mut s = s0;
                let mut src_here = coeffs.source(s, 0.0);
                let mut acc = 0.0;
                for (i, w) in step_weight.iter().enumerate() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    let mut z = base_drift * dt + sigma * sqrt_dt * g;
                    if let (Some(p), Some(k)) = (&poisson, jumps) {
                        let n_jumps = p.sample(&mut rng) as u64;
                        for _ in 0..n_jumps {
                            if rng.gen_bool(k.p_up) {
                                z += exp_up.as_ref().unwrap().sample(&mut rng);
                            } else {
                                z -= exp_dn.as_ref().unwrap().sample(&mut rng);
                            }
                        }
                    }
                    s *= z.exp();
                    // pathwise trapezoid in the source, exact in the discount
                    let src_next = coeffs.source(s, (i + 1) as f64 * dt);
                    acc += 0.5 * (src_here + src_next) * w;
                    src_here = src_next;
                }
                out.push(acc);
            }
            out
        })
        .collect();

    let n = per_path.len() as f64;
    let mean = per_path.iter().sum::<f64>() / n;
    let var = per_path.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Richardson-style observed order of accuracy from a family of nested grids.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    /// `v(s_eval, 0)` per grid.
    pub values: Vec<f64>,
    /// Pairwise observed orders `log2(|d_i| / |d_{i+1}|)`.
    pub orders: Vec<f64>,
    /// All successive differences below round-off; orders are not meaningful.
    pub exact: bool,
}

impl ConvergenceReport {
    /// Asymptotic (last) observed order, when the errors are above round-off.
    pub fn observed_order(&self) -> Option<f64> {
        self.orders.last().copied()
    }
}

/// Solves the same problem on each grid and reports the observed order of
/// accuracy at the geometric mid-price of the first grid.
pub fn convergence_report(coeffs: &PdeCoefficients, grids: &[Grid]) -> Result<ConvergenceReport> {
    if grids.len() < 3 {
        return Err(Error::invalid("grids", "need at least 3 nested grids"));
    }
    let s_eval = (grids[0].s_nodes[0] * grids[0].s_nodes.last().unwrap()).sqrt();
    let mut values = Vec::with_capacity(grids.len());
    for grid in grids {
        let surface = solve_pde(coeffs, grid)?;
        values.push(surface.value_at_origin(s_eval)?);
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if diffs.iter().all(|d| *d < 1e-13 * scale) {
        return Ok(ConvergenceReport {
            values,
            orders: vec![],
            exact: true,
        });
    }
    let orders = diffs
        .windows(2)
        .map(|d| (d[0] / d[1].max(1e-300)).log2())
        .collect();
    Ok(ConvergenceReport {
        values,
        orders,
        exact: false,
    })
}
