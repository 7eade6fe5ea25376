//! CSV reports.

use std::path::Path;

use qamcs::metrics::format_float;

use crate::error::CliError;

pub const REPORT_HEADER: &str = "method,sampling,ratio,psnr_db,rmse,ssim,seconds";
pub const PER_PHANTOM_HEADER: &str = "method,sampling,ratio,phantom,psnr_db,rmse,ssim";

/// One summary row per method. Failed methods carry `NaN` metrics and the
/// error message (written separately to `errors.csv`).
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub method: String,
    pub sampling: String,
    pub ratio: f64,
    pub psnr_db: f64,
    pub rmse: f64,
    pub ssim: f64,
    pub seconds: f64,
    pub error: Option<String>,
}

impl ReportRow {
    pub fn failed(method: &str, sampling: &str, ratio: f64, error: String) -> Self {
        Self {
            method: method.into(),
            sampling: sampling.into(),
            ratio,
            psnr_db: f64::NAN,
            rmse: f64::NAN,
            ssim: f64::NAN,
            seconds: 0.0,
            error: Some(error),
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            self.sampling,
            format_float(self.ratio),
            format_float(self.psnr_db),
            format_float(self.rmse),
            format_float(self.ssim),
            format_float(self.seconds)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomRow {
    pub method: String,
    pub sampling: String,
    pub ratio: f64,
    pub phantom: usize,
    pub psnr_db: f64,
    pub rmse: f64,
    pub ssim: f64,
}

impl PhantomRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            self.sampling,
            format_float(self.ratio),
            self.phantom,
            format_float(self.psnr_db),
            format_float(self.rmse),
            format_float(self.ssim)
        )
    }
}

pub fn report_text(rows: &[ReportRow]) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Report("no rows to export".into()));
    }
    let mut out = String::from(REPORT_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    Ok(out)
}

/// Writes the summary CSV. Infinite PSNR is written as `inf`.
pub fn export_report(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<(), CliError> {
    let text = report_text(rows)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn per_phantom_text(rows: &[PhantomRow]) -> String {
    let mut out = String::from(PER_PHANTOM_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

fn parse_f64(field: &str, line: usize) -> Result<f64, CliError> {
    field
        .parse()
        .map_err(|_| CliError::Report(format!("line {line}: bad number {field:?}")))
}

/// Parses text written by [`export_report`]. Error messages are not part of
/// the CSV, so `error` is `None` for every parsed row.
pub fn parse_report(text: &str) -> Result<Vec<ReportRow>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(REPORT_HEADER) {
        return Err(CliError::Report("missing or unexpected header".into()));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 7 {
                return Err(CliError::Report(format!("line {}: expected 7 fields", i + 2)));
            }
            Ok(ReportRow {
                method: f[0].into(),
                sampling: f[1].into(),
                ratio: parse_f64(f[2], i + 2)?,
                psnr_db: parse_f64(f[3], i + 2)?,
                rmse: parse_f64(f[4], i + 2)?,
                ssim: parse_f64(f[5], i + 2)?,
                seconds: parse_f64(f[6], i + 2)?,
                error: None,
            })
        })
        .collect()
}
