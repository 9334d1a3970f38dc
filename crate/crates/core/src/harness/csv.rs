use std::io::Write;

use crate::error::{Error, Result};

use super::experiment::SeriesPoint;

pub const HEADER: &str = "engine,topology,p,q,m,n,d_star,sweep_param,sweep_value,mean_rate,stderr,trials";

/// Formats like C's `%.6g`: six significant digits, trailing zeros dropped,
/// scientific notation outside `[1e-4, 1e6)`.
pub fn format_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // Exponent after rounding to 6 significant digits.
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes the series as CSV, rows ordered by sweep value (stable, so ties
/// keep run order).
pub fn emit_csv<W: Write>(series: &[SeriesPoint], mut out: W) -> Result<()> {
    if series.is_empty() {
        return Err(Error::invalid("refusing to write an empty series"));
    }
    let mut rows: Vec<&SeriesPoint> = series.iter().collect();
    rows.sort_by(|a, b| a.sweep_value.total_cmp(&b.sweep_value));
    writeln!(out, "{HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.engine,
            quote(&r.topology),
            format_g6(r.p),
            format_g6(r.q),
            r.m,
            r.n,
            format_g6(r.d_star),
            r.sweep_param,
            format_g6(r.sweep_value),
            format_g6(r.mean_rate),
            format_g6(r.stderr),
            r.trials
        )?;
    }
    out.flush()?;
    Ok(())
}

fn quote(field: &str) -> String {
    if field.contains([',', '"']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}
