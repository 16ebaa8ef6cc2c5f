//! Repo fair value, break-even rate, the adjustment decomposition and the
//! regulatory-capital comparison.
//!
//! The embedded derivative value solves the ordinary equation
//! `dv/dt - r_e v + s_p N_p - s_k N_c(t) - lambda El(t) = 0`, `v(T) = 0`,
//! with `r_e = r_c` for a lending repo, giving the closed form
//! `v = (s_p N_p - s_k N_c - lambda El) * (1 - e^{-r_c T}) / r_c` for constant
//! coefficients. The decomposition re-expresses `v` against the riskless
//! spread value `npv*`:
//!
//! * `CRA`     - liability-rate discounting drag on the remaining riskless
//!   value, `(r_c - r) int v*(s) e^{-r_c s} ds`
//! * `GAP-EVA` - expected-loss decay `lambda El`, survival-weighted
//! * `KVA`     - capital dividend `s_k N_c(s)`, survival-weighted
//!
//! with `npv = npv* - CRA - GAP-EVA - KVA` holding by construction.

use serde::{Deserialize, Serialize};

use crate::capital::EcProfile;
use crate::curves::{annuity, risky_annuity, HazardCurve, RatesEnv};
use crate::error::{Error, Result};
use crate::gap_loss::RepoTerms;
use crate::numerics::{bisect_root, simpson};

const BP: f64 = 1e4;

/// Valuation decomposition in running-spread basis points of principal.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValuationBreakdown {
    pub npv_star: f64,
    pub cra: f64,
    pub gap_eva: f64,
    pub kva: f64,
    pub npv: f64,
    /// Break-even running spread: `CRA + GAP-EVA + KVA`.
    pub breakeven_spread: f64,
}

/// Riskless value of the remaining spread income at time `s`, per unit
/// principal: `v*(s) = s_p (1 - e^{-r (T-s)}) / r`.
fn riskless_remaining_value(env: &RatesEnv, maturity: f64, s: f64) -> f64 {
    env.s_p * annuity(env.r, maturity - s)
}

/// Assembles the CRA / GAP-EVA / KVA decomposition from an exogenous expected
/// loss and economic capital profile. All outputs in bp of principal.
pub fn valuation_adjustments(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    el: f64,
    profile: &EcProfile,
) -> Result<ValuationBreakdown> {
    let t_end = terms.maturity;
    if profile.times()[0] > 0.0 || *profile.times().last().unwrap() < t_end {
        return Err(Error::invalid("ec.grid", "capital profile must cover [0, T]"));
    }
    let np = terms.principal;
    let lam = hazard.lambda;

    let npv_star = env.s_p * np * annuity(env.r, t_end);

    // CRA: quadrature of the stated integrand; equals
    // s_p N_p (A_r - A_rc) in closed form for flat rates.
    let cra = (env.r_c - env.r)
        * np
        * simpson(
            |s| riskless_remaining_value(env, t_end, s) * (-env.r_c * s).exp(),
            0.0,
            t_end,
            2048,
        );

    let survival_annuity = risky_annuity(env.r_c, hazard, t_end)?;
    let gap_eva = lam * el * survival_annuity;

    let kva = env.s_k * profile.weighted_integral(|t| (-(env.r_c + lam) * t).exp());

    let npv_star_bp = npv_star / np * BP;
    let cra_bp = cra / np * BP;
    let gap_eva_bp = gap_eva / np * BP;
    let kva_bp = kva / np * BP;
    Ok(ValuationBreakdown {
        npv_star: npv_star_bp,
        cra: cra_bp,
        gap_eva: gap_eva_bp,
        kva: kva_bp,
        npv: npv_star_bp - cra_bp - gap_eva_bp - kva_bp,
        breakeven_spread: cra_bp + gap_eva_bp + kva_bp,
    })
}

/// Closed-form fair value of the embedded derivative for constant
/// coefficients: `v = (s_p N_p - s_k N_c - lambda El) (1 - e^{-r_c T}) / r_c`.
pub fn fair_value_ode(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    el: f64,
    nc_avg: f64,
) -> f64 {
    let coupon = env.s_p * terms.principal - env.s_k * nc_avg - hazard.lambda * el;
    coupon * annuity(env.r_c, terms.maturity)
}

/// General backward integration of the pricing ODE for time-varying expected
/// loss and capital, fourth-order Runge-Kutta from `v(T) = 0` with step at
/// most one trading day.
pub fn fair_value_ode_numeric<E, N>(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    el_fn: E,
    nc_fn: N,
) -> f64
where
    E: Fn(f64) -> f64,
    N: Fn(f64) -> f64,
{
    let t_end = terms.maturity;
    let n_steps = (t_end * 252.0).ceil() as usize;
    let h = t_end / n_steps as f64;
    // dv/dt = r_c v - c(t), integrated backward in time
    let deriv = |t: f64, v: f64| {
        let coupon = env.s_p * terms.principal - env.s_k * nc_fn(t) - hazard.lambda * el_fn(t);
        env.r_c * v - coupon
    };
    let mut v = 0.0;
    let mut t = t_end;
    for _ in 0..n_steps {
        let k1 = deriv(t, v);
        let k2 = deriv(t - 0.5 * h, v - 0.5 * h * k1);
        let k3 = deriv(t - 0.5 * h, v - 0.5 * h * k2);
        let k4 = deriv(t - h, v - h * k3);
        v -= h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t -= h;
    }
    v
}

/// Break-even repo rate, both conventions.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct BreakevenRate {
    /// Flow-rate closed form `r_p = r_f + s_k N_c/N_p + lambda El/N_p`.
    pub closed_form_rate: f64,
    /// Repo rate from the exact root of `npv(s_p) = 0`; differs from the
    /// closed form by the discounting of the adjustment integrals.
    pub exact_root_rate: f64,
    /// Residual `npv` at the solved spread, for verification.
    pub npv_at_root: f64,
}

/// Solves for the break-even repo rate at an exogenous constant capital level.
pub fn breakeven_rate(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    el: f64,
    nc_avg: f64,
) -> Result<BreakevenRate> {
    let np = terms.principal;
    let closed_form_rate = env.r_f + env.s_k * nc_avg / np + hazard.lambda * el / np;

    // npv as a function of the traded spread; CRA scales with s_p so the
    // root is found on the full decomposition.
    let npv_of = |s_p: f64| -> f64 {
        let env_s = RatesEnv { s_p, ..*env };
        let npv_star = s_p * np * annuity(env_s.r, terms.maturity);
        let cra = s_p * np * (annuity(env_s.r, terms.maturity) - annuity(env_s.r_c, terms.maturity));
        let aq = annuity(env_s.r_c + hazard.lambda, terms.maturity);
        let gap_eva = hazard.lambda * el * aq;
        let kva = env_s.s_k * nc_avg * aq;
        npv_star - cra - gap_eva - kva
    };
    let hi = (env.s_k * nc_avg / np + hazard.lambda * el / np + env.s_p).max(1e-4) * 4.0 + 0.01;
    let spread_root = bisect_root(npv_of, 0.0, hi, 1e-14)?;
    Ok(BreakevenRate {
        closed_form_rate,
        exact_root_rate: env.r_f + spread_root,
        npv_at_root: npv_of(spread_root),
    })
}

/// Credit-derivative view of the repo: default present value and risky
/// annuity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct CreditView {
    /// Present value of expected settlement losses.
    pub dpv: f64,
    /// Present value of a unit running spread, `int e^{-rt} Q(t) dt` (years).
    pub apv: f64,
    /// `s_p N_p apv - dpv`: spread value net of default losses on the
    /// par-reconstructing floater.
    pub npv_credit: f64,
}

/// Prices the repo as a funded credit derivative. The cumulative expected
/// settlement loss is `E[l(t)] = El (1 - Q(t))`, so
/// `dpv = beta(T) E[l(T)] - int_0^T E[l(t)] d beta(t)`.
pub fn dpv_apv(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    el: f64,
) -> Result<CreditView> {
    let t_end = terms.maturity;
    let lam = hazard.lambda;
    let cum_loss = |t: f64| el * (1.0 - (-lam * t).exp());
    // -int E[l(t)] d beta = r int e^{-rt} E[l(t)] dt
    let dpv = (-env.r * t_end).exp() * cum_loss(t_end)
        + env.r * simpson(|t| (-env.r * t).exp() * cum_loss(t), 0.0, t_end, 2048);
    let apv = risky_annuity(env.r, hazard, t_end)?;
    Ok(CreditView {
        dpv,
        apv,
        npv_credit: env.s_p * terms.principal * apv - dpv,
    })
}

/// Regulatory-capital comparison schedule. Exposure accrues only to the
/// extent the trade haircut falls short of the supervisory haircut; the
/// product `risk_weight * capital_ratio` is a one-point calibration input.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RegCapSchedule {
    pub reg_haircut: f64,
    pub risk_weight: f64,
    pub capital_ratio: f64,
    pub roe: f64,
}

impl RegCapSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.reg_haircut) {
            return Err(Error::invalid("rc.reg_haircut", "must lie in [0, 1)"));
        }
        for (field, v) in [
            ("rc.risk_weight", self.risk_weight),
            ("rc.capital_ratio", self.capital_ratio),
            ("rc.roe", self.roe),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::invalid(field, "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// Regulatory capital amount for a trade at haircut `h`.
    pub fn capital(&self, principal: f64, h: f64) -> f64 {
        self.risk_weight * self.capital_ratio * principal * (self.reg_haircut - h).max(0.0)
            / (1.0 - h)
    }
}

/// Present value (bp of principal) under a regulatory-capital charge instead
/// of economic capital: `pv = npv* - CRA - roe * RC * apv`.
pub fn regulatory_capital_value(
    terms: &RepoTerms,
    env: &RatesEnv,
    hazard: &HazardCurve,
    sched: &RegCapSchedule,
) -> Result<f64> {
    sched.validate()?;
    let np = terms.principal;
    let t_end = terms.maturity;
    let npv_star = env.s_p * np * annuity(env.r, t_end);
    let cra = env.s_p * np * (annuity(env.r, t_end) - annuity(env.r_c, t_end));
    let rc = sched.capital(np, terms.haircut);
    let charge = sched.roe * rc * risky_annuity(env.r_c, hazard, t_end)?;
    Ok((npv_star - cra - charge) / np * BP)
}
