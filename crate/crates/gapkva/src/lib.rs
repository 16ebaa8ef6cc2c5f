//! Pricing library for term repurchase agreements with margin-period-of-risk
//! gap risk.
//!
//! The pipeline: simulate the collateral gross return over one margin period
//! of risk ([`collateral`]), map returns to default-settlement losses
//! ([`gap_loss`]), size economic capital off the hedging-error distribution
//! ([`capital`]), and assemble fair values, break-even spreads and the
//! CRA / GAP-EVA / KVA adjustment decomposition ([`valuation`]). An extended
//! Black-Scholes finite-difference solver ([`pde`]) cross-validates the
//! closed-form prices together with a Feynman-Kac Monte Carlo estimate.

pub mod capital;
pub mod collateral;
pub mod curves;
mod error;
pub mod gap_loss;
pub mod numerics;
pub mod pde;
pub mod valuation;

pub use capital::{CapitalMeasure, EcProfile, HedgingErrorModel};
pub use collateral::{analytic_log_moments, sample_mpr_returns, KouParams, ReturnDistribution};
pub use curves::{
    annuity, discount_factor, risky_annuity, years_from_calendar_days, years_from_trading_days,
    HazardCurve, RatesEnv,
};
pub use error::{Error, Result};
pub use gap_loss::{expected_loss, loss_tail, settlement_loss, RepoTerms};
pub use pde::{
    convergence_report, feynman_kac_mc, feynman_kac_mc_jumps, solve_pde, ConvergenceReport, Grid,
    PdeCoefficients, PdeSurface, Scheme,
};
pub use valuation::{
    breakeven_rate, dpv_apv, fair_value_ode, regulatory_capital_value, valuation_adjustments,
    BreakevenRate, CreditView, RegCapSchedule, ValuationBreakdown,
};
