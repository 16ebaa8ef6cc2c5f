//! Deterministic output rendering: 6-significant-digit numbers with a `.`
//! decimal separator, CSV and JSON writers, and a fixed-width table for the
//! terminal.

use serde::Serialize;

/// Formats with exactly 6 significant digits, trailing zeros trimmed,
/// plain decimal notation for exponents in `[-4, 6)` and scientific
/// otherwise (printf `%.6g` semantics). Output re-parses to the same value.
pub fn fmt_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.5e}", x); // mantissa with 5 decimals + exponent
    let (mantissa, exp) = sci.split_once('e').expect("exponential format");
    let exp: i32 = exp.parse().expect("numeric exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 6);

    let body = if (-4..6).contains(&exp) {
        if exp >= 0 {
            let split = (exp + 1) as usize;
            let int_part = &digits[..split];
            let frac = digits[split..].trim_end_matches('0');
            if frac.is_empty() {
                int_part.to_string()
            } else {
                format!("{int_part}.{frac}")
            }
        } else {
            let zeros = "0".repeat((-exp - 1) as usize);
            let frac = format!("{zeros}{digits}");
            let frac = frac.trim_end_matches('0');
            format!("0.{frac}")
        }
    } else {
        let frac = digits[1..].trim_end_matches('0');
        if frac.is_empty() {
            format!("{}e{exp}", &digits[..1])
        } else {
            format!("{}.{frac}e{exp}", &digits[..1])
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// One row of the pricing table, all monetary columns in bp of principal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PriceRow {
    pub hc: f64,
    pub npv_star: f64,
    pub cra: f64,
    pub gap_eva: f64,
    pub kva: f64,
    pub npv: f64,
    pub breakeven: f64,
}

/// One capital-profile point, capital as a fraction of principal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EcRow {
    pub t: f64,
    pub nc: f64,
}

/// One haircut-sweep point: value with economic vs regulatory capital charge.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepRow {
    pub hc: f64,
    pub pv_ec: f64,
    pub pv_rc: f64,
}

/// Named diagnostics from the PDE / ODE / Monte Carlo cross-check.
#[derive(Debug, Clone, Serialize)]
pub struct PdeCheckReport {
    pub ode_value_bp: f64,
    pub pde_value_bp: f64,
    pub mc_value_bp: f64,
    pub mc_se_bp: f64,
    pub pde_vs_ode_bp: f64,
    pub mc_vs_ode_bp: f64,
    pub cn_observed_order: f64,
    pub scheme_used: String,
}

pub trait CsvRecord {
    fn header() -> &'static str;
    fn record(&self) -> String;
}

impl CsvRecord for PriceRow {
    fn header() -> &'static str {
        "hc,npv_star,cra,gap_eva,kva,npv,breakeven"
    }
    fn record(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            fmt_g6(self.hc),
            fmt_g6(self.npv_star),
            fmt_g6(self.cra),
            fmt_g6(self.gap_eva),
            fmt_g6(self.kva),
            fmt_g6(self.npv),
            fmt_g6(self.breakeven),
        )
    }
}

impl CsvRecord for EcRow {
    fn header() -> &'static str {
        "t,nc"
    }
    fn record(&self) -> String {
        format!("{},{}", fmt_g6(self.t), fmt_g6(self.nc))
    }
}

impl CsvRecord for SweepRow {
    fn header() -> &'static str {
        "hc,pv_ec,pv_rc"
    }
    fn record(&self) -> String {
        format!("{},{},{}", fmt_g6(self.hc), fmt_g6(self.pv_ec), fmt_g6(self.pv_rc))
    }
}

pub fn to_csv<R: CsvRecord>(rows: &[R]) -> String {
    let mut out = String::from(R::header());
    out.push('\n');
    for row in rows {
        out.push_str(&row.record());
        out.push('\n');
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable rows");
    s.push('\n');
    s
}

/// Key-value CSV for the PDE check diagnostics.
pub fn pde_report_csv(report: &PdeCheckReport) -> String {
    let mut out = String::from("metric,value\n");
    out.push_str(&format!("ode_value_bp,{}\n", fmt_g6(report.ode_value_bp)));
    out.push_str(&format!("pde_value_bp,{}\n", fmt_g6(report.pde_value_bp)));
    out.push_str(&format!("mc_value_bp,{}\n", fmt_g6(report.mc_value_bp)));
    out.push_str(&format!("mc_se_bp,{}\n", fmt_g6(report.mc_se_bp)));
    out.push_str(&format!("pde_vs_ode_bp,{}\n", fmt_g6(report.pde_vs_ode_bp)));
    out.push_str(&format!("mc_vs_ode_bp,{}\n", fmt_g6(report.mc_vs_ode_bp)));
    out.push_str(&format!("cn_observed_order,{}\n", fmt_g6(report.cn_observed_order)));
    out.push_str(&format!("scheme_used,{}\n", report.scheme_used));
    out
}

/// Fixed-width terminal table for the pricing rows.
pub fn price_table(rows: &[PriceRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>6}  {:>9}  {:>8}  {:>8}  {:>8}  {:>8}  {:>9}\n",
        "HC", "npv*", "CRA", "GAP-EVA", "KVA", "npv", "breakeven"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:>5.1}%  {:>9.2}  {:>8.2}  {:>8.2}  {:>8.2}  {:>8.2}  {:>9.2}\n",
            r.hc * 100.0,
            r.npv_star,
            r.cra,
            r.gap_eva,
            r.kva,
            r.npv,
            r.breakeven
        ));
    }
    out
}
