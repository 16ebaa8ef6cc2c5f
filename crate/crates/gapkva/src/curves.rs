//! Deterministic discounting, survival and annuity mathematics.
//!
//! Flat curves only: all rates are constant short rates with continuous
//! compounding, default arrival is a constant-intensity Poisson time, and
//! times are in year fractions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scalar short rates and spreads shared by every pricing formula.
///
/// * `r` - risk-free short rate
/// * `r_f` - liquidity provider's cost of fund, `r_f >= r`
/// * `r_c` - counterparty senior unsecured rate, used as the earned rate on
///   the uncollateralized derivative value while it is an asset
/// * `s_k` - capital charge spread `r_k - r`
/// * `s_p` - repo spread `r_p - r_f`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatesEnv {
    pub r: f64,
    pub r_f: f64,
    pub r_c: f64,
    pub s_k: f64,
    pub s_p: f64,
}

impl RatesEnv {
    pub fn new(r: f64, r_f: f64, r_c: f64, s_k: f64, s_p: f64) -> Result<Self> {
        for (field, v) in [
            ("rates.r", r),
            ("rates.r_f", r_f),
            ("rates.r_c", r_c),
            ("rates.s_k", s_k),
            ("rates.s_p", s_p),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(field, "must be finite"));
            }
        }
        if r_f < r {
            return Err(Error::invalid("rates.r_f", "cost of fund must be >= risk-free rate"));
        }
        if r_c < r {
            return Err(Error::invalid("rates.r_c", "counterparty rate must be >= risk-free rate"));
        }
        if s_k < 0.0 {
            return Err(Error::invalid("rates.s_k", "capital spread must be >= 0"));
        }
        if s_p < 0.0 {
            return Err(Error::invalid("rates.s_p", "repo spread must be >= 0"));
        }
        Ok(RatesEnv { r, r_f, r_c, s_k, s_p })
    }

    /// Funding basis `r_f - r`.
    pub fn funding_basis(&self) -> f64 {
        self.r_f - self.r
    }

    /// Borrower's all-in repo rate `r_p = r_f + s_p`.
    pub fn repo_rate(&self) -> f64 {
        self.r_f + self.s_p
    }
}

/// Flat default intensity plus the recovery convention shared between the
/// CDS-implied hazard and the settlement-loss severity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HazardCurve {
    pub lambda: f64,
    pub recovery: f64,
}

impl HazardCurve {
    pub fn new(lambda: f64, recovery: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::invalid("credit.lambda", "intensity must be finite and >= 0"));
        }
        if !recovery.is_finite() || !(0.0..1.0).contains(&recovery) {
            return Err(Error::invalid("credit.recovery", "recovery must lie in [0, 1)"));
        }
        Ok(HazardCurve { lambda, recovery })
    }

    /// Credit-triangle calibration from a flat CDS spread: `lambda = s / (1 - R)`.
    pub fn from_cds(spread: f64, recovery: f64) -> Result<Self> {
        if !spread.is_finite() || spread < 0.0 {
            return Err(Error::invalid("credit.cds_spread", "spread must be finite and >= 0"));
        }
        if !recovery.is_finite() || !(0.0..1.0).contains(&recovery) {
            return Err(Error::invalid("credit.recovery", "recovery must lie in [0, 1)"));
        }
        Ok(HazardCurve {
            lambda: spread / (1.0 - recovery),
            recovery,
        })
    }

    /// Survival probability `Q(t) = exp(-lambda t)`.
    pub fn survival(&self, t: f64) -> Result<f64> {
        if t.is_nan() || t < 0.0 {
            return Err(Error::invalid("t", "time must be >= 0"));
        }
        Ok((-self.lambda * t).exp())
    }
}

/// Year fraction for calendar days, ACT/365-fixed.
pub fn years_from_calendar_days(days: f64) -> f64 {
    days / 365.0
}

/// Year fraction for trading days at 252 per year.
pub fn years_from_trading_days(days: f64) -> f64 {
    days / 252.0
}

/// Discount factor `exp(-rate * t)` for a flat continuously compounded rate.
pub fn discount_factor(rate: f64, t: f64) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::invalid("t", "time must be >= 0"));
    }
    Ok((-rate * t).exp())
}

/// Riskless unit annuity `int_0^T exp(-rate t) dt = (1 - e^{-rate T}) / rate`.
pub fn annuity(rate: f64, maturity: f64) -> f64 {
    if rate.abs() < 1e-14 {
        maturity
    } else {
        (1.0 - (-rate * maturity).exp()) / rate
    }
}

/// Survival-weighted unit annuity `int_0^T exp(-rate t) Q(t) dt`, in closed
/// form for flat rate and intensity.
pub fn risky_annuity(rate: f64, curve: &HazardCurve, maturity: f64) -> Result<f64> {
    if maturity.is_nan() || maturity < 0.0 {
        return Err(Error::invalid("maturity", "must be >= 0"));
    }
    Ok(annuity(rate + curve.lambda, maturity))
}
