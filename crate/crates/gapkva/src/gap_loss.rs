//! Default-settlement losses and loss-tail queries.
//!
//! When the borrower defaults, the collateral block is liquidated at the end
//! of the margin period of risk at a discount `g`. The lender's loss on a
//! principal `N_p` lent against collateral haircut `h` is
//!
//! ```text
//! l = (1 - R) N_p max(0, 1 - (1-g)/(1-h) X),    X = S_{tau+u} / S_tau
//! ```
//!
//! so losses are capped at `(1-R) N_p` and vanish once the gross return
//! clears `(1-h)/(1-g)`.

use serde::{Deserialize, Serialize};

use crate::collateral::ReturnDistribution;
use crate::error::{Error, Result};

/// Trade economics of a term repo.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepoTerms {
    /// Principal lent, `N_p`.
    pub principal: f64,
    /// Collateral haircut `h` in `[0, 1)`.
    pub haircut: f64,
    /// Liquidation discount `g` in `[0, 1)`.
    pub liq_discount: f64,
    /// Settlement recovery `R` in `[0, 1)`.
    pub recovery: f64,
    /// Term of the repo in years.
    pub maturity: f64,
    /// Margin period of risk in years.
    pub mpr: f64,
    /// Confidence level for economic capital, in `(0.5, 1)`.
    pub confidence: f64,
}

impl RepoTerms {
    pub fn new(
        principal: f64,
        haircut: f64,
        liq_discount: f64,
        recovery: f64,
        maturity: f64,
        mpr: f64,
        confidence: f64,
    ) -> Result<Self> {
        if !principal.is_finite() || principal <= 0.0 {
            return Err(Error::invalid("trade.principal", "must be finite and > 0"));
        }
        if !(0.0..1.0).contains(&haircut) {
            return Err(Error::invalid("trade.haircut", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&liq_discount) {
            return Err(Error::invalid("trade.liq_discount", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&recovery) {
            return Err(Error::invalid("credit.recovery", "must lie in [0, 1)"));
        }
        if maturity.is_nan() || maturity <= 0.0 {
            return Err(Error::invalid("trade.maturity", "must be > 0"));
        }
        if mpr.is_nan() || mpr <= 0.0 || mpr >= maturity {
            return Err(Error::invalid("trade.mpr", "must satisfy 0 < mpr < maturity"));
        }
        if confidence.is_nan() || confidence <= 0.5 || confidence >= 1.0 {
            return Err(Error::invalid("ec.q", "confidence must lie in (0.5, 1)"));
        }
        Ok(RepoTerms {
            principal,
            haircut,
            liq_discount,
            recovery,
            maturity,
            mpr,
            confidence,
        })
    }

    /// Liquidation-to-collateralization ratio `(1-g)/(1-h)` applied to the
    /// gross return inside the loss formula.
    pub fn gap_factor(&self) -> f64 {
        (1.0 - self.liq_discount) / (1.0 - self.haircut)
    }

    /// Loss cap `(1 - R) N_p`.
    pub fn severity(&self) -> f64 {
        (1.0 - self.recovery) * self.principal
    }

    /// Copy of the terms at a different haircut (used by haircut sweeps).
    pub fn with_haircut(&self, haircut: f64) -> Result<Self> {
        RepoTerms::new(
            self.principal,
            haircut,
            self.liq_discount,
            self.recovery,
            self.maturity,
            self.mpr,
            self.confidence,
        )
    }
}

/// Lender's loss at default settlement for a realized gross return `x`.
pub fn settlement_loss(terms: &RepoTerms, x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(Error::invalid("x", "gross return must be > 0"));
    }
    Ok(terms.severity() * (1.0 - terms.gap_factor() * x).max(0.0))
}

/// Expected settlement loss `El = E[l]`: sample average of the loss over the
/// return distribution. Computed via the sorted-sample partial expectation,
/// which is exact for the empirical measure.
pub fn expected_loss(terms: &RepoTerms, dist: &ReturnDistribution) -> f64 {
    let kappa = terms.gap_factor();
    // E[(1 - kappa X)^+] = kappa E[(1/kappa - X)^+]
    terms.severity() * kappa * dist.partial_expectation_below(1.0 / kappa)
}

/// Tail probability `Pr(l > y)` (strict), i.e. the fraction of returns
/// strictly below the break-even return `x* = (1-h)/(1-g) (1 - y / (1-R)N_p)`.
/// Returns 0 for `y` at or above the loss cap.
pub fn loss_tail(terms: &RepoTerms, dist: &ReturnDistribution, y: f64) -> f64 {
    let sev = terms.severity();
    if y >= sev {
        return 0.0;
    }
    let x_star = (1.0 - y / sev) / terms.gap_factor();
    dist.frac_below(x_star)
}

/// Partial expectation `E[(l - b)^+]` of the loss beyond a threshold `b`,
/// used by the expected-shortfall capital measure.
pub fn loss_excess_expectation(terms: &RepoTerms, dist: &ReturnDistribution, b: f64) -> f64 {
    let sev = terms.severity();
    if b >= sev {
        return 0.0;
    }
    let kappa = terms.gap_factor();
    let x_b = (1.0 - b / sev) / kappa;
    sev * kappa * dist.partial_expectation_below(x_b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collateral::{sample_calibration, sample_mpr_returns, ReturnDistribution};
    use crate::numerics::{linspace, trapezoid};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn terms(haircut: f64, liq: f64, recovery: f64) -> RepoTerms {
        RepoTerms::new(1.0, haircut, liq, recovery, 1.0, 10.0 / 252.0, 0.999).unwrap()
    }

    fn two_point() -> ReturnDistribution {
        ReturnDistribution::from_samples(vec![0.8, 1.2], 10.0 / 252.0).unwrap()
    }

    #[test]
    fn no_gap_no_loss() {
        let t = terms(0.0, 0.0, 0.4);
        assert_eq!(settlement_loss(&t, 1.0).unwrap(), 0.0);
        assert_eq!(settlement_loss(&t, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn full_severity_simple_gap() {
        let t = terms(0.0, 0.0, 0.0);
        assert_relative_eq!(settlement_loss(&t, 0.9).unwrap(), 0.10, epsilon = 1e-14);
    }

    #[test]
    fn haircut_and_recovery_scale_the_loss() {
        let t = terms(0.10, 0.0, 0.4);
        let expected = 0.6 * (1.0 - 0.85 / 0.9);
        assert_relative_eq!(settlement_loss(&t, 0.85).unwrap(), expected, epsilon = 1e-12);
        assert_relative_eq!(settlement_loss(&t, 0.85).unwrap(), 0.033333, epsilon = 5e-7);
    }

    #[test]
    fn settlement_loss_rejects_nonpositive_return() {
        let t = terms(0.0, 0.0, 0.4);
        assert!(settlement_loss(&t, 0.0).is_err());
        assert!(settlement_loss(&t, -1.0).is_err());
    }

    #[test]
    fn expected_loss_degenerate_and_two_point() {
        let t = terms(0.0, 0.0, 0.0);
        let degenerate = ReturnDistribution::from_samples(vec![1.0; 10], 0.04).unwrap();
        assert_eq!(expected_loss(&t, &degenerate), 0.0);
        assert_relative_eq!(expected_loss(&t, &two_point()), 0.10, epsilon = 1e-14);
    }

    #[test]
    fn expected_loss_matches_direct_average() {
        let t = terms(0.05, 0.01, 0.4);
        let dist = sample_mpr_returns(&sample_calibration(), 10.0 / 252.0, 50_000, 3).unwrap();
        let direct: f64 = dist
            .samples()
            .iter()
            .map(|&x| settlement_loss(&t, x).unwrap())
            .sum::<f64>()
            / dist.len() as f64;
        assert_relative_eq!(expected_loss(&t, &dist), direct, epsilon = 1e-12);
    }

    #[test]
    fn loss_tail_cap_and_definition() {
        let t = terms(0.0, 0.0, 0.4);
        let dist = two_point();
        assert_eq!(loss_tail(&t, &dist, t.severity()), 0.0);
        assert_eq!(loss_tail(&t, &dist, 2.0), 0.0);
        // Pr(l > 0) = fraction with x < 1
        assert_eq!(loss_tail(&t, &dist, 0.0), 0.5);
    }

    #[test]
    fn loss_tail_two_point_enumeration() {
        // R=0: losses are 0.2 (x=0.8) and 0 (x=1.2)
        let t = terms(0.0, 0.0, 0.0);
        let dist = two_point();
        assert_eq!(loss_tail(&t, &dist, 0.1), 0.5);
        assert_eq!(loss_tail(&t, &dist, 0.19), 0.5);
        // at y = 0.2 the tie breaks toward non-exceedance
        assert_eq!(loss_tail(&t, &dist, 0.2), 0.0);
    }

    #[test]
    fn expected_loss_equals_tail_integral() {
        // layer-cake: E[l] = int_0^cap Pr(l > y) dy, trapezoid on a fine grid
        let t = terms(0.0, 0.0, 0.4);
        let dist = sample_mpr_returns(&sample_calibration(), 10.0 / 252.0, 200_000, 11).unwrap();
        let ys = linspace(0.0, t.severity(), 20_001);
        let tails: Vec<f64> = ys.iter().map(|&y| loss_tail(&t, &dist, y)).collect();
        let integral = trapezoid(&ys, &tails);
        let el = expected_loss(&t, &dist);
        assert!(
            (integral - el).abs() / el < 1e-3,
            "integral {integral} vs el {el}"
        );
    }

    #[test]
    fn expected_loss_monotone_in_haircut_on_common_samples() {
        let dist = sample_mpr_returns(&sample_calibration(), 10.0 / 252.0, 100_000, 17).unwrap();
        let els: Vec<f64> = [0.0, 0.05, 0.10, 0.15, 0.20]
            .iter()
            .map(|&h| expected_loss(&terms(h, 0.0, 0.4), &dist))
            .collect();
        for w in els.windows(2) {
            assert!(w[1] <= w[0], "El must be non-increasing in haircut: {els:?}");
        }
    }

    proptest! {
        #[test]
        fn loss_monotonicity_and_cap(
            x in 0.5f64..1.5,
            h in 0.0f64..0.3,
            g in 0.0f64..0.1,
            r in 0.0f64..0.9,
        ) {
            let t = terms(h, g, r);
            let l = settlement_loss(&t, x).unwrap();
            prop_assert!(l >= 0.0 && l <= t.severity());
            // non-increasing in x
            prop_assert!(settlement_loss(&t, x + 0.01).unwrap() <= l);
            // non-increasing in haircut
            let t_hi = terms(h + 0.05, g, r);
            prop_assert!(settlement_loss(&t_hi, x).unwrap() <= l + 1e-15);
            // non-decreasing in liquidation discount
            let t_g = terms(h, g + 0.05, r);
            prop_assert!(settlement_loss(&t_g, x).unwrap() >= l - 1e-15);
        }
    }
}
