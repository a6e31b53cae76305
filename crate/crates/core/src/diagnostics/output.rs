use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DiagnosticsRecord;
use crate::error::Result;

pub const CSV_HEADER: &str = "t,kappa_min,kappa_max,pinch,q,F_min,F_max,dev,osc,convexity_margin";
pub const SUMMARY_FORMAT_VERSION: u32 = 1;

/// One CSV row per record; `dev` is empty outside hyperbolic space.
pub fn write_records_csv<W: Write>(records: &[DiagnosticsRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        let dev = r.dev.map(|d| format!("{d:.17e}")).unwrap_or_default();
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{dev},{:.17e},{:.17e}",
            r.t, r.kappa_min, r.kappa_max, r.pinch, r.q, r.f_min, r.f_max, r.osc, r.convexity_margin
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub monotone_q: bool,
    pub pinch_bound: bool,
    /// Whether the verdicts are binding for this run (Euclidean, alpha in range).
    pub asserted: bool,
}

/// JSON summary of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub format_version: u32,
    pub termination: String,
    pub t_final: f64,
    pub steps: usize,
    #[serde(rename = "T_star_estimate", skip_serializing_if = "Option::is_none", default)]
    pub t_star_estimate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub decay_rate: Option<f64>,
    pub pinch_initial: f64,
    pub pinch_max: f64,
    pub q_initial: f64,
    pub q_final: f64,
    pub verdicts: Verdicts,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub failure: Option<String>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_rows_follow_the_header() {
        let r = DiagnosticsRecord {
            t: 0.5,
            kappa_min: 1.0,
            kappa_max: 1.5,
            pinch: 1.5,
            q: 0.4,
            f_min: 2.0,
            f_max: 3.0,
            dev: None,
            osc: 0.01,
            convexity_margin: 0.6,
        };
        let mut hyp = r.clone();
        hyp.dev = Some(0.25);
        let mut buf = Vec::new();
        write_records_csv(&[r, hyp], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        for l in &lines[1..] {
            assert_eq!(l.split(',').count(), 10);
        }
        assert_eq!(lines[1].split(',').nth(7), Some(""));
        assert_eq!(lines[2].split(',').nth(7).unwrap().parse::<f64>().unwrap(), 0.25);
    }

    #[test]
    fn summary_json_shape() {
        let s = RunSummary {
            format_version: SUMMARY_FORMAT_VERSION,
            termination: "spherical_equator".into(),
            t_final: 1.38,
            steps: 10,
            t_star_estimate: Some(1.386),
            decay_rate: None,
            pinch_initial: 1.0,
            pinch_max: 1.0,
            q_initial: 0.5,
            q_final: 0.5,
            verdicts: Verdicts {
                monotone_q: true,
                pinch_bound: true,
                asserted: false,
            },
            failure: None,
        };
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["T_star_estimate"], 1.386);
        assert!(v.get("decay_rate").is_none());
        assert_eq!(v["verdicts"]["monotone_q"], true);
        let back: RunSummary = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }
}
