//! Plain-text number formatting and CSV parsing for emitted artifacts.

use crate::error::{Error, Result};
use crate::marl::{EpisodeMetrics, METRICS_HEADER};

/// Seventeen significant digits, enough to round-trip any `f64`; `NaN`
/// for missing values.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

pub fn parse_real(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Log(format!("not a number: `{s}`")))
}

/// Splits a CSV document with a known header into rows of fields.
pub fn csv_rows<'a>(text: &'a str, header: &str) -> Result<Vec<Vec<&'a str>>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == header => {}
        Some(h) => return Err(Error::Log(format!("unexpected CSV header `{h}`"))),
        None => return Err(Error::Log("empty CSV document".into())),
    }
    let width = header.split(',').count();
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.trim_end().split(',').collect();
            if f.len() == width {
                Ok(f)
            } else {
                Err(Error::Log(format!("expected {width} fields, got {}: `{l}`", f.len())))
            }
        })
        .collect()
}

pub fn parse_metrics_csv(text: &str) -> Result<Vec<EpisodeMetrics>> {
    csv_rows(text, METRICS_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(EpisodeMetrics {
                episode: f[0]
                    .parse()
                    .map_err(|_| Error::Log(format!("bad episode `{}`", f[0])))?,
                scenario: f[1].parse()?,
                crt: parse_real(f[2])?,
                avg_residual_threat: parse_real(f[3])?,
                actor_loss_mean: parse_real(f[4])?,
                critic_loss_mean: parse_real(f[5])?,
                noise_sigma: parse_real(f[6])?,
                wall_ms: parse_real(f[7])?,
            })
        })
        .collect()
}
