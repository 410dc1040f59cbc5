//! CSV and summary writers.
//!
//! All numbers are formatted with Rust's shortest round-trip `Display`, so
//! files are byte-stable across runs and across thread counts; writers never
//! reformat values that studies computed.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::studies::{ContractionRow, CoverageRow, RowStatus};

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)
}

impl RowStatus {
    pub fn label(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::Cap => "cap",
            RowStatus::Diverged => "diverged",
        }
    }
}

pub fn contraction_csv(rows: &[ContractionRow]) -> String {
    let mut out = String::from("n,D,replicate,k_dp,tau_dp,err_v,err_f,trunc_err,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.n,
            r.dim,
            r.replicate,
            r.k_dp,
            r.tau_dp,
            r.err_v,
            r.err_f,
            r.trunc_err,
            r.status.label()
        );
    }
    out
}

pub fn coverage_csv(rows: &[CoverageRow]) -> String {
    let mut out = String::from("n,replicate,covered_v,covered_f,band_width,ball_radius,k_dp,status\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.n,
            r.replicate,
            r.covered_v,
            r.covered_f,
            r.band_width,
            r.ball_radius,
            r.k_dp,
            r.status.label()
        );
    }
    out
}

/// First coefficients with band and truth: `i,mean,lo,hi,truth`.
pub fn coefficient_csv(mean: &[f64], lo: &[f64], hi: &[f64], truth: &[f64]) -> String {
    let mut out = String::from("i,mean,lo,hi,truth\n");
    for i in 0..mean.len() {
        let _ = writeln!(out, "{},{},{},{},{}", i + 1, mean[i], lo[i], hi[i], truth[i]);
    }
    out
}

/// Grid function with band and truth: `x,mean,lo,hi,truth`.
pub fn function_csv(x: &[f64], mean: &[f64], lo: &[f64], hi: &[f64], truth: &[f64]) -> String {
    let mut out = String::from("x,mean,lo,hi,truth\n");
    for i in 0..x.len() {
        let _ = writeln!(out, "{},{},{},{},{}", x[i], mean[i], lo[i], hi[i], truth[i]);
    }
    out
}

pub fn roundtrip_csv(rows: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("m,D,err\n");
    for (m, d, err) in rows {
        let _ = writeln!(out, "{m},{d},{err}");
    }
    out
}

pub fn oracle_csv(
    posterior_mean: &[f64],
    ensemble_mean: &[f64],
    posterior_var: &[f64],
    ensemble_var: &[f64],
) -> String {
    let mut out = String::from("i,posterior_mean,ensemble_mean,posterior_var,ensemble_var\n");
    for i in 0..posterior_mean.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            posterior_mean[i],
            ensemble_mean[i],
            posterior_var[i],
            ensemble_var[i]
        );
    }
    out
}

/// Flat `key: value` report.
pub fn summary_text(pairs: &[(String, String)]) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        let _ = writeln!(out, "{k}: {v}");
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> io::Result<()> {
    write_atomic(path, contents)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contraction_csv_layout() {
        let rows = vec![ContractionRow {
            n: 1000,
            dim: 6,
            replicate: 0,
            k_dp: 12,
            tau_dp: 0.12,
            err_v: 0.05,
            err_f: 0.25,
            trunc_err: 0.001,
            status: RowStatus::Ok,
        }];
        let text = contraction_csv(&rows);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "n,D,replicate,k_dp,tau_dp,err_v,err_f,trunc_err,status"
        );
        assert_eq!(lines.next().unwrap(), "1000,6,0,12,0.12,0.05,0.25,0.001,ok");
        assert!(lines.next().is_none());
    }

    #[test]
    fn coverage_csv_layout() {
        let rows = vec![CoverageRow {
            n: 10_000,
            replicate: 3,
            covered_v: true,
            covered_f: false,
            band_width: 0.2,
            ball_radius: 0.35,
            k_dp: 9,
            status: RowStatus::Cap,
        }];
        let text = coverage_csv(&rows);
        assert!(text.starts_with(
            "n,replicate,covered_v,covered_f,band_width,ball_radius,k_dp,status\n"
        ));
        assert!(text.contains("10000,3,true,false,0.2,0.35,9,cap\n"));
    }

    #[test]
    fn summary_is_key_value_lines() {
        let pairs = vec![
            ("slope".to_string(), "-0.21".to_string()),
            ("replicates".to_string(), "20".to_string()),
        ];
        assert_eq!(summary_text(&pairs), "slope: -0.21\nreplicates: 20\n");
    }
}
