//! Economic capital from the hedging-error distribution.
//!
//! On a default path the economy books the settlement loss `l(tau)`; on every
//! path it accrues the compensator `El * lambda` per unit time, so the net
//! hedging loss accumulation
//!
//! ```text
//! A_s = Gamma_s l(tau) - int_0^s (1 - Gamma_t) El lambda dt
//! ```
//!
//! is a zero-mean martingale. Capital is sized as a q-tile of either the
//! terminal loss `A_T` or, for the reserve profile entering the pricing PDE,
//! the discounted remaining-duration loss
//!
//! ```text
//! pi_hat_t = e^{-r (tau - t)} l(tau) - int_t^tau e^{-r (s-t)} El lambda ds
//! ```
//!
//! whose tail only requires the loss tail of the margin-period return
//! distribution and the forward default curve. Because both variables have
//! zero mean, economic capital equals the value-at-risk (or the expected
//! shortfall in the ES variant) without a further expected-loss deduction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collateral::ReturnDistribution;
use crate::curves::HazardCurve;
use crate::error::{Error, Result};
use crate::gap_loss::{expected_loss, loss_excess_expectation, loss_tail, RepoTerms};
use crate::numerics::{adaptive_simpson, bisect_infimum, trapezoid};

/// Tail quadrature controls: forced minimum of 2^8 = 256 Simpson panels,
/// refinement down to the stated tolerance near discontinuities.
const QUAD_TOL: f64 = 1e-12;
const QUAD_MIN_DEPTH: u32 = 8;
const QUAD_MAX_DEPTH: u32 = 46;

/// Capital measure applied to the hedging-error distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapitalMeasure {
    ValueAtRisk,
    ExpectedShortfall,
}

impl std::fmt::Display for CapitalMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CapitalMeasure::ValueAtRisk => write!(f, "var"),
            CapitalMeasure::ExpectedShortfall => write!(f, "es"),
        }
    }
}

/// Inputs to the hedging-error loss distributions: trade terms, default
/// intensity, the margin-period return distribution and the risk-free rate
/// used for discounting forward losses. The expected loss is recomputed from
/// the distribution on construction rather than taken on trust.
#[derive(Debug, Clone)]
pub struct HedgingErrorModel {
    terms: RepoTerms,
    hazard: HazardCurve,
    rate: f64,
    dist: ReturnDistribution,
    el: f64,
}

impl HedgingErrorModel {
    pub fn new(
        terms: RepoTerms,
        hazard: HazardCurve,
        rate: f64,
        dist: ReturnDistribution,
    ) -> Result<Self> {
        if !rate.is_finite() {
            return Err(Error::invalid("rates.r", "must be finite"));
        }
        let el = expected_loss(&terms, &dist);
        Ok(HedgingErrorModel {
            terms,
            hazard,
            rate,
            dist,
            el,
        })
    }

    pub fn terms(&self) -> &RepoTerms {
        &self.terms
    }

    pub fn hazard(&self) -> &HazardCurve {
        &self.hazard
    }

    pub fn distribution(&self) -> &ReturnDistribution {
        &self.dist
    }

    /// Expected settlement loss, recomputed from the distribution.
    pub fn el(&self) -> f64 {
        self.el
    }

    /// Compensator accrued between `t` and `tau`, grown to `tau`:
    /// `El lambda (e^{r (tau-t)} - 1) / r`, with the `r -> 0` limit.
    fn compensator_at(&self, dt: f64) -> f64 {
        let lam = self.hazard.lambda;
        if self.rate.abs() < 1e-14 {
            self.el * lam * dt
        } else {
            self.el * lam * ((self.rate * dt).exp() - 1.0) / self.rate
        }
    }

    /// Tail distribution of the terminal hedging loss:
    /// `Pr(A_T > x) = int_0^T Pr(l > x + El lambda tau) lambda e^{-lambda tau} dtau`.
    pub fn terminal_tail(&self, x: f64) -> f64 {
        let lam = self.hazard.lambda;
        if lam == 0.0 {
            return 0.0;
        }
        let el = self.el;
        let f = |tau: f64| {
            loss_tail(&self.terms, &self.dist, x + lam * el * tau) * lam * (-lam * tau).exp()
        };
        adaptive_simpson(&f, 0.0, self.terms.maturity, QUAD_TOL, QUAD_MIN_DEPTH, QUAD_MAX_DEPTH)
    }

    /// Value-at-risk of `A_T`: `inf { x >= 0 : Pr(A_T > x) <= 1 - q }`,
    /// bisection to `1e-6 * N_p`. Since `E[A_T] = 0` this is the terminal
    /// economic capital.
    pub fn var_terminal(&self, q: f64) -> Result<f64> {
        check_confidence(q)?;
        let tol = 1e-6 * self.terms.principal;
        let cap = self.terms.severity();
        bisect_infimum(|x| self.terminal_tail(x) <= 1.0 - q, 0.0, cap, tol)
    }

    /// Terminal capital discounted back to `t`: `VaR_A * beta(T) / beta(t)`.
    pub fn terminal_capital_discounted(&self, t: f64, q: f64) -> Result<f64> {
        let var = self.var_terminal(q)?;
        Ok(var * (-self.rate * (self.terms.maturity - t)).exp())
    }

    /// Tail of the forward remaining-duration loss `pi_hat_t`.
    pub fn forward_tail(&self, t: f64, x: f64) -> f64 {
        let lam = self.hazard.lambda;
        if lam == 0.0 {
            return 0.0;
        }
        let f = |tau: f64| {
            let dt = tau - t;
            let b = x * (self.rate * dt).exp() + self.compensator_at(dt);
            loss_tail(&self.terms, &self.dist, b) * lam * (-lam * dt).exp()
        };
        adaptive_simpson(&f, t, self.terms.maturity, QUAD_TOL, QUAD_MIN_DEPTH, QUAD_MAX_DEPTH)
    }

    /// Expected excess of `pi_hat_t` beyond `x`: `E[(pi_hat_t - x)^+]`.
    /// On a default path `(pi_hat_t - x)^+ = e^{-r(tau-t)} (l - b_tau(x))^+`.
    fn forward_excess(&self, t: f64, x: f64) -> f64 {
        let lam = self.hazard.lambda;
        if lam == 0.0 {
            return 0.0;
        }
        let f = |tau: f64| {
            let dt = tau - t;
            let b = x * (self.rate * dt).exp() + self.compensator_at(dt);
            loss_excess_expectation(&self.terms, &self.dist, b)
                * lam
                * (-(lam + self.rate) * dt).exp()
        };
        adaptive_simpson(&f, t, self.terms.maturity, QUAD_TOL, QUAD_MIN_DEPTH, QUAD_MAX_DEPTH)
    }

    /// Forward economic capital `N_c(t)` at confidence `q` under the given
    /// measure. The expected-shortfall variant is the coherent tail mean
    /// `ES_q = VaR_q + E[(pi_hat_t - VaR_q)^+] / (1 - q)`.
    pub fn forward_ec(&self, t: f64, q: f64, measure: CapitalMeasure) -> Result<f64> {
        check_confidence(q)?;
        if t < 0.0 || t >= self.terms.maturity {
            return Err(Error::invalid("t", "forward time must satisfy 0 <= t < maturity"));
        }
        let tol = 1e-6 * self.terms.principal;
        let var = bisect_infimum(
            |x| self.forward_tail(t, x) <= 1.0 - q,
            0.0,
            self.terms.severity(),
            tol,
        )?;
        match measure {
            CapitalMeasure::ValueAtRisk => Ok(var),
            CapitalMeasure::ExpectedShortfall => {
                Ok(var + self.forward_excess(t, var) / (1.0 - q))
            }
        }
    }

    /// Economic capital term profile on a time grid within `[0, T]`. Profile
    /// points are independent and computed in parallel; the grid point at
    /// maturity is pinned to zero (no remaining exposure window).
    pub fn ec_profile(&self, grid: &[f64], q: f64, measure: CapitalMeasure) -> Result<EcProfile> {
        check_confidence(q)?;
        if grid.len() < 2 {
            return Err(Error::invalid("ec.grid", "need at least two grid points"));
        }
        let t_max = self.terms.maturity;
        if grid.windows(2).any(|w| w[1] <= w[0]) || grid[0] < 0.0 || *grid.last().unwrap() > t_max {
            return Err(Error::invalid("ec.grid", "grid must be increasing within [0, T]"));
        }
        let nc: Result<Vec<f64>> = grid
            .par_iter()
            .map(|&t| {
                if t >= t_max {
                    Ok(0.0)
                } else {
                    self.forward_ec(t, q, measure)
                }
            })
            .collect();
        Ok(EcProfile {
            times: grid.to_vec(),
            nc: nc?,
            measure,
            q,
        })
    }

    /// Simulates the hedging-error accumulation `A_s` per path: a default
    /// time drawn from the flat intensity, a margin-period return resampled
    /// from the stored distribution on default, and the compensator accrued
    /// up to `min(tau, s)`. Deterministic per seed under chunked parallelism.
    pub fn simulate_hedging_error_paths(&self, n_paths: usize, seed: u64, s: f64) -> Result<Vec<f64>> {
        if n_paths == 0 {
            return Err(Error::invalid("mc.n_paths", "must be >= 1"));
        }
        if s.is_nan() || s <= 0.0 || s > self.terms.maturity {
            return Err(Error::invalid("s", "horizon must satisfy 0 < s <= maturity"));
        }
        let lam = self.hazard.lambda;
        let el = self.el;
        let n_samples = self.dist.len();
        const CHUNK: usize = 1 << 16;
        let n_chunks = n_paths.div_ceil(CHUNK);
        let paths: Vec<f64> = (0..n_chunks)
            .into_par_iter()
            .flat_map_iter(|c| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(0x4844_5045 ^ c as u64);
                let count = CHUNK.min(n_paths - c * CHUNK);
                let mut out = Vec::with_capacity(count);
                for _ in 0..count {
                    if lam == 0.0 {
                        out.push(0.0);
                        continue;
                    }
                    let u: f64 = rng.gen();
                    let tau = -u.ln() / lam;
                    if tau <= s {
                        let x = self.dist.samples()[rng.gen_range(0..n_samples)];
                        let loss = self.terms.severity()
                            * (1.0 - self.terms.gap_factor() * x).max(0.0);
                        out.push(loss - el * lam * tau);
                    } else {
                        out.push(-el * lam * s);
                    }
                }
                out
            })
            .collect();
        Ok(paths)
    }
}

fn check_confidence(q: f64) -> Result<()> {
    if q.is_nan() || q <= 0.5 || q >= 1.0 {
        return Err(Error::invalid("ec.q", "confidence must lie in (0.5, 1)"));
    }
    Ok(())
}

/// Term profile of economic capital on a time grid.
#[derive(Debug, Clone, Serialize)]
pub struct EcProfile {
    times: Vec<f64>,
    nc: Vec<f64>,
    measure: CapitalMeasure,
    q: f64,
}

impl EcProfile {
    /// Wraps an exogenously supplied capital schedule (e.g. a standardized
    /// reserve table) so it can drive the same pricing formulas.
    pub fn from_points(
        times: Vec<f64>,
        nc: Vec<f64>,
        measure: CapitalMeasure,
        q: f64,
    ) -> Result<Self> {
        if times.len() < 2 || times.len() != nc.len() {
            return Err(Error::invalid("ec.grid", "need matching times/values, at least two points"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("ec.grid", "times must be strictly increasing"));
        }
        if nc.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("ec.grid", "capital values must be finite and >= 0"));
        }
        check_confidence(q)?;
        Ok(EcProfile { times, nc, measure, q })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.nc
    }

    pub fn measure(&self) -> CapitalMeasure {
        self.measure
    }

    pub fn confidence(&self) -> f64 {
        self.q
    }

    /// Time-average capital over the profile span (trapezoid rule), the
    /// constant `N_c` entering the closed-form fair value.
    pub fn average(&self) -> f64 {
        let span = self.times.last().unwrap() - self.times[0];
        if span <= 0.0 {
            return self.nc[0];
        }
        trapezoid(&self.times, &self.nc) / span
    }

    /// Trapezoid integral of `nc(t) * w(t)` over the profile grid.
    pub fn weighted_integral<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        let weighted: Vec<f64> = self
            .times
            .iter()
            .zip(&self.nc)
            .map(|(&t, &n)| n * w(t))
            .collect();
        trapezoid(&self.times, &weighted)
    }
}
