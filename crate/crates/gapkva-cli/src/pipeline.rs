//! Command implementations: each returns plain rows for the writers.

use gapkva::numerics::linspace;
use gapkva::{
    convergence_report, fair_value_ode, feynman_kac_mc, sample_mpr_returns, solve_pde,
    valuation_adjustments, Grid, HedgingErrorModel, PdeCoefficients, ReturnDistribution, Scheme,
};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::output::{EcRow, PdeCheckReport, PriceRow, SweepRow};

fn sample_returns(cfg: &RunConfig) -> CliResult<ReturnDistribution> {
    Ok(sample_mpr_returns(&cfg.model, cfg.mpr, cfg.n_paths, cfg.seed)?)
}

fn price_row(cfg: &RunConfig, dist: &ReturnDistribution, haircut: f64) -> CliResult<PriceRow> {
    let terms = cfg.terms_at(haircut)?;
    let model = HedgingErrorModel::new(terms, cfg.hazard, cfg.env.r, dist.clone())?;
    let grid = linspace(0.0, cfg.maturity, cfg.grid_points);
    let profile = model.ec_profile(&grid, cfg.q, cfg.measure)?;
    let b = valuation_adjustments(&terms, &cfg.env, &cfg.hazard, model.el(), &profile)?;
    Ok(PriceRow {
        hc: haircut,
        npv_star: b.npv_star,
        cra: b.cra,
        gap_eva: b.gap_eva,
        kva: b.kva,
        npv: b.npv,
        breakeven: b.breakeven_spread,
    })
}

/// One pricing row per configured haircut; the return distribution is drawn
/// once and shared so haircut comparisons use common random numbers.
pub fn run_price(cfg: &RunConfig) -> CliResult<Vec<PriceRow>> {
    let dist = sample_returns(cfg)?;
    cfg.haircuts
        .iter()
        .map(|&h| price_row(cfg, &dist, h))
        .collect()
}

/// Economic-capital term profile for the first configured haircut, capital
/// as a fraction of principal.
pub fn run_ec_profile(cfg: &RunConfig) -> CliResult<Vec<EcRow>> {
    let dist = sample_returns(cfg)?;
    let terms = cfg.terms_at(cfg.haircuts[0])?;
    let model = HedgingErrorModel::new(terms, cfg.hazard, cfg.env.r, dist)?;
    let grid = linspace(0.0, cfg.maturity, cfg.grid_points);
    let profile = model.ec_profile(&grid, cfg.q, cfg.measure)?;
    Ok(profile
        .times()
        .iter()
        .zip(profile.values())
        .map(|(&t, &nc)| EcRow {
            t,
            nc: nc / cfg.principal,
        })
        .collect())
}

/// Haircut sweep comparing the economic-capital value against the
/// regulatory-capital schedule value.
pub fn run_haircut_sweep(cfg: &RunConfig) -> CliResult<Vec<SweepRow>> {
    let dist = sample_returns(cfg)?;
    let hs = linspace(0.0, cfg.sweep_h_max, cfg.sweep_points);
    hs.iter()
        .map(|&h| {
            let row = price_row(cfg, &dist, h)?;
            let terms = cfg.terms_at(h)?;
            let pv_rc =
                gapkva::regulatory_capital_value(&terms, &cfg.env, &cfg.hazard, &cfg.rc)?;
            Ok(SweepRow {
                hc: h,
                pv_ec: row.npv,
                pv_rc,
            })
        })
        .collect()
}

/// PDE / closed-form / Monte Carlo triangle on the configured trade
/// (constant coefficients, first haircut). Numerical-failure exit when the
/// routes disagree beyond their stated tolerances.
pub fn run_pde_check(cfg: &RunConfig) -> CliResult<PdeCheckReport> {
    let dist = sample_returns(cfg)?;
    let terms = cfg.terms_at(cfg.haircuts[0])?;
    let model = HedgingErrorModel::new(terms, cfg.hazard, cfg.env.r, dist)?;
    let grid_t = linspace(0.0, cfg.maturity, cfg.grid_points);
    let profile = model.ec_profile(&grid_t, cfg.q, cfg.measure)?;
    let el = model.el();
    let nc_avg = profile.average();

    let np = cfg.principal;
    let bp = 1e4 / np;
    let ode_value = fair_value_ode(&terms, &cfg.env, &cfg.hazard, el, nc_avg);

    let coupon = cfg.env.s_p * np - cfg.env.s_k * nc_avg - cfg.hazard.lambda * el;
    let sigma = cfg.model.sigma;
    let financing = cfg.env.r;
    let coeffs = PdeCoefficients::new(financing, sigma, cfg.env.r_c, cfg.maturity, move |_s, _t| {
        coupon
    })?;
    let pde_grid = Grid::log_spaced(25.0, 400.0, 400, 400, Scheme::CrankNicolson)?;
    let surface = solve_pde(&coeffs, &pde_grid)?;
    let pde_value = surface.value_at_origin(100.0)?;

    let mc_paths = cfg.n_paths.clamp(100, 10_000);
    let (mc_value, mc_se) = feynman_kac_mc(&coeffs, 100.0, mc_paths, cfg.seed)?;

    let refinements: Vec<Grid> = [100usize, 200, 400]
        .iter()
        .map(|&m| Grid::log_spaced(25.0, 400.0, 101, m, Scheme::CrankNicolson))
        .collect::<Result<_, _>>()?;
    let conv = convergence_report(&coeffs, &refinements)?;

    let report = PdeCheckReport {
        ode_value_bp: ode_value * bp,
        pde_value_bp: pde_value * bp,
        mc_value_bp: mc_value * bp,
        mc_se_bp: mc_se * bp,
        pde_vs_ode_bp: (pde_value - ode_value).abs() * bp,
        mc_vs_ode_bp: (mc_value - ode_value).abs() * bp,
        cn_observed_order: conv.observed_order().unwrap_or(f64::NAN),
        scheme_used: surface.scheme_used.to_string(),
    };

    if (pde_value - ode_value).abs() > 1e-6 * np {
        return Err(CliError::Numerical(format!(
            "PDE vs closed form differ by {} bp (> 1e-6 of principal)",
            report.pde_vs_ode_bp
        )));
    }
    if (mc_value - ode_value).abs() > 3.0 * mc_se + 1e-9 * np {
        return Err(CliError::Numerical(format!(
            "Monte Carlo vs closed form differ by {} bp (beyond 3 standard errors)",
            report.mc_vs_ode_bp
        )));
    }
    if !conv.exact {
        let order = conv.observed_order().unwrap_or(f64::NAN);
        if !(1.8..=2.2).contains(&order) {
            return Err(CliError::Numerical(format!(
                "Crank-Nicolson observed order {order} outside [1.8, 2.2]"
            )));
        }
    }
    Ok(report)
}
