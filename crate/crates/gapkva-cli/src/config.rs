//! Flat key-value run configuration with dotted section names.
//!
//! The format is one `key = value` assignment per line, `#` starts a comment
//! line, keys are dotted paths like `trade.haircut` or `model.sigma`.
//! Parsing is strict: unknown keys, duplicate keys and missing required keys
//! are errors, so a typo cannot silently fall back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use gapkva::{CapitalMeasure, HazardCurve, KouParams, RatesEnv, RegCapSchedule, RepoTerms};

use crate::error::{CliError, CliResult};

/// Output serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unsupported format `{other}` (expected csv or json)")),
        }
    }
}

/// Fully validated run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub principal: f64,
    pub haircuts: Vec<f64>,
    pub liq_discount: f64,
    pub maturity: f64,
    pub mpr: f64,
    pub env: RatesEnv,
    pub hazard: HazardCurve,
    pub model: KouParams,
    pub n_paths: usize,
    pub seed: u64,
    pub q: f64,
    pub measure: CapitalMeasure,
    pub grid_points: usize,
    pub rc: RegCapSchedule,
    pub sweep_h_max: f64,
    pub sweep_points: usize,
    pub out_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl RunConfig {
    /// Repo terms at a given haircut.
    pub fn terms_at(&self, haircut: f64) -> CliResult<RepoTerms> {
        Ok(RepoTerms::new(
            self.principal,
            haircut,
            self.liq_discount,
            self.hazard.recovery,
            self.maturity,
            self.mpr,
            self.q,
        )?)
    }
}

#[derive(Default)]
struct Reader {
    entries: BTreeMap<String, String>,
    missing: Vec<&'static str>,
    errors: Vec<String>,
}

impl Reader {
    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn parse_value<T: std::str::FromStr>(&mut self, key: &str, v: &str) -> Option<T> {
        match v.parse() {
            Ok(x) => Some(x),
            Err(_) => {
                self.errors.push(format!("{key}: not a valid value: `{v}`"));
                None
            }
        }
    }

    fn f64_taken(&mut self, key: &str) -> Option<f64> {
        self.take(key).and_then(|v| self.parse_value(key, &v))
    }

    fn f64_req(&mut self, key: &'static str) -> Option<f64> {
        match self.take(key) {
            Some(v) => self.parse_value(key, &v),
            None => {
                self.missing.push(key);
                None
            }
        }
    }

    fn f64_opt(&mut self, key: &'static str, default: f64) -> f64 {
        match self.take(key) {
            Some(v) => self.parse_value(key, &v).unwrap_or(default),
            None => default,
        }
    }

    fn usize_opt(&mut self, key: &'static str, default: usize) -> usize {
        match self.take(key) {
            Some(v) => self.parse_value(key, &v).unwrap_or(default),
            None => default,
        }
    }

    fn u64_opt(&mut self, key: &'static str, default: u64) -> u64 {
        match self.take(key) {
            Some(v) => self.parse_value(key, &v).unwrap_or(default),
            None => default,
        }
    }
}

/// Parses and validates a configuration from text.
pub fn parse_config(text: &str) -> CliResult<RunConfig> {
    let mut entries = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if entries.insert(key.clone(), value).is_some() {
            return Err(CliError::Config(format!("duplicate key `{key}`")));
        }
    }

    let mut r = Reader {
        entries,
        ..Default::default()
    };

    // trade
    let principal = r.f64_req("trade.principal");
    let haircuts_raw = r.take("trade.haircut");
    if haircuts_raw.is_none() {
        r.missing.push("trade.haircut");
    }
    let liq_discount = r.f64_opt("trade.liq_discount", 0.0);
    let maturity = r.f64_req("trade.maturity");
    let mpr = r.f64_req("trade.mpr");

    // rates: exactly one of r_f / funding_basis
    let rate_r = r.f64_req("rates.r");
    let r_f_direct = r.f64_taken("rates.r_f");
    let basis = r.f64_taken("rates.funding_basis");
    let s_k = r.f64_req("rates.s_k");
    let s_p = r.f64_req("rates.s_p");
    let r_c = r.f64_req("rates.r_c");

    // credit: exactly one of cds_spread / lambda
    let cds = r.f64_taken("credit.cds_spread");
    let lambda = r.f64_taken("credit.lambda");
    let recovery = r.f64_opt("credit.recovery", 0.4);

    // model
    let sigma = r.f64_req("model.sigma");
    let jump_intensity = r.f64_opt("model.jump_intensity", 0.0);
    let p_up = r.f64_taken("model.p_up");
    let mean_up = r.f64_taken("model.mean_up");
    let mean_down = r.f64_taken("model.mean_down");
    let drift = r.f64_opt("model.drift", 0.0);

    // mc / ec
    let n_paths = r.usize_opt("mc.n_paths", 1_000_000);
    let seed = r.u64_opt("mc.seed", 42);
    let q = r.f64_opt("ec.q", 0.999);
    let measure = match r.take("ec.measure").as_deref() {
        None | Some("es") => CapitalMeasure::ExpectedShortfall,
        Some("var") => CapitalMeasure::ValueAtRisk,
        Some(other) => {
            return Err(CliError::Config(format!(
                "ec.measure: expected `var` or `es`, got `{other}`"
            )))
        }
    };
    let grid_points = r.usize_opt("ec.grid_points", 51);

    // rc schedule (capital_ratio default carries the bundled one-point
    // calibration of the sample schedule)
    let rc = RegCapSchedule {
        reg_haircut: r.f64_opt("rc.reg_haircut", 0.15),
        risk_weight: r.f64_opt("rc.risk_weight", 1.0),
        capital_ratio: r.f64_opt("rc.capital_ratio", 0.155821),
        roe: r.f64_opt("rc.roe", 0.10),
    };

    // haircut sweep
    let sweep_h_max = r.f64_opt("sweep.h_max", 0.20);
    let sweep_points = r.usize_opt("sweep.points", 21);

    // output
    let out_path = r.take("output.path").map(PathBuf::from);
    let format: OutputFormat = match r.take("output.format") {
        None => OutputFormat::Csv,
        Some(v) => v.parse().map_err(CliError::Config)?,
    };

    if !r.missing.is_empty() {
        return Err(CliError::Config(format!(
            "missing required fields: {}",
            r.missing.join(", ")
        )));
    }
    if !r.errors.is_empty() {
        return Err(CliError::Config(r.errors.join("; ")));
    }
    if !r.entries.is_empty() {
        let unknown: Vec<String> = r.entries.keys().cloned().collect();
        return Err(CliError::Config(format!(
            "unknown keys: {}",
            unknown.join(", ")
        )));
    }

    // cross-field constraints
    let r_f = match (r_f_direct, basis) {
        (Some(rf), None) => rf,
        (None, Some(b)) => rate_r.unwrap() + b,
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "set exactly one of rates.r_f and rates.funding_basis".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "missing required fields: one of rates.r_f / rates.funding_basis".into(),
            ))
        }
    };
    let hazard = match (cds, lambda) {
        (Some(s), None) => HazardCurve::from_cds(s, recovery)?,
        (None, Some(l)) => HazardCurve::new(l, recovery)?,
        (Some(_), Some(_)) => {
            return Err(CliError::Config(
                "set exactly one of credit.cds_spread and credit.lambda".into(),
            ))
        }
        (None, None) => {
            return Err(CliError::Config(
                "missing required fields: one of credit.cds_spread / credit.lambda".into(),
            ))
        }
    };
    if jump_intensity > 0.0 && (p_up.is_none() || mean_up.is_none() || mean_down.is_none()) {
        return Err(CliError::Config(
            "model.jump_intensity > 0 requires model.p_up, model.mean_up, model.mean_down".into(),
        ));
    }
    let model = KouParams::new(
        sigma.unwrap(),
        jump_intensity,
        p_up.unwrap_or(0.5),
        mean_up.unwrap_or(1.0),
        mean_down.unwrap_or(1.0),
        drift,
    )?;

    let mut haircuts = Vec::new();
    for tok in haircuts_raw.unwrap().split(',') {
        match tok.trim().parse::<f64>() {
            Ok(h) => haircuts.push(h),
            Err(_) => {
                return Err(CliError::Config(format!(
                    "trade.haircut: not a valid number: `{}`",
                    tok.trim()
                )))
            }
        }
    }
    if haircuts.is_empty() {
        return Err(CliError::Config("trade.haircut: empty list".into()));
    }

    let env = RatesEnv::new(rate_r.unwrap(), r_f, r_c.unwrap(), s_k.unwrap(), s_p.unwrap())?;
    rc.validate()?;

    if grid_points < 50 {
        return Err(CliError::Config(
            "ec.grid_points: capital profile needs at least 50 points".into(),
        ));
    }
    if n_paths == 0 {
        return Err(CliError::Config("mc.n_paths: must be >= 1".into()));
    }
    if !(0.0..=0.20).contains(&sweep_h_max) || sweep_points < 2 {
        return Err(CliError::Config(
            "sweep: haircut range must lie within [0, 0.20] with at least 2 points".into(),
        ));
    }

    let cfg = RunConfig {
        principal: principal.unwrap(),
        haircuts,
        liq_discount,
        maturity: maturity.unwrap(),
        mpr: mpr.unwrap(),
        env,
        hazard,
        model,
        n_paths,
        seed,
        q,
        measure,
        grid_points,
        rc,
        sweep_h_max,
        sweep_points,
        out_path,
        format,
    };
    // validate each configured haircut through the domain constructor
    for &h in &cfg.haircuts {
        cfg.terms_at(h)?;
    }
    Ok(cfg)
}

/// Loads a configuration file.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
