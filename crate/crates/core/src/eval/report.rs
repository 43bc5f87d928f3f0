use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{DatasetRole, EvalReport, EvalRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    Json,
}

impl ReportFormat {
    /// Guesses the format from a file extension; markdown otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => ReportFormat::Csv,
            Some("json") => ReportFormat::Json,
            _ => ReportFormat::Markdown,
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format {other:?}"))),
        }
    }
}

/// One line of the flat CSV report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub monitor: String,
    pub dataset: String,
    pub role: DatasetRole,
    pub n: usize,
    pub rejected: usize,
    pub rejection_rate: f64,
}

/// Columns shared by all reports, ordered ID, near OoD, far OoD and by
/// first appearance within a group.
fn columns(reports: &[EvalReport]) -> Result<Vec<(String, DatasetRole)>> {
    let first = reports.first().ok_or(Error::EmptyReport)?;
    if first.rows.is_empty() {
        return Err(Error::EmptyReport);
    }
    let mut cols: Vec<(String, DatasetRole)> = first
        .rows
        .iter()
        .map(|r| (r.dataset_name.clone(), r.role))
        .collect();
    cols.sort_by_key(|(_, role)| *role);
    for r in &reports[1..] {
        let mut names: Vec<(String, DatasetRole)> = r
            .rows
            .iter()
            .map(|r| (r.dataset_name.clone(), r.role))
            .collect();
        names.sort_by_key(|(_, role)| *role);
        if names != cols {
            return Err(Error::invalid(format!(
                "report {:?} covers different datasets than {:?}",
                r.label, first.label
            )));
        }
    }
    Ok(cols)
}

fn row_for<'a>(report: &'a EvalReport, name: &str) -> &'a EvalRow {
    report
        .rows
        .iter()
        .find(|r| r.dataset_name == name)
        .expect("columns() checked dataset coverage")
}

pub fn render_report(reports: &[EvalReport], format: ReportFormat) -> Result<String> {
    let cols = columns(reports)?;
    match format {
        ReportFormat::Markdown => Ok(render_markdown(reports, &cols)),
        ReportFormat::Csv => render_csv(reports, &cols),
        ReportFormat::Json => {
            let mut s =
                serde_json::to_string_pretty(reports).map_err(|e| Error::invalid(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

fn render_markdown(reports: &[EvalReport], cols: &[(String, DatasetRole)]) -> String {
    let mut out = String::from("| Method |");
    for (name, role) in cols {
        let _ = write!(out, " {}: {} |", role.heading(), name);
    }
    out.push_str("\n|---|");
    for _ in cols {
        out.push_str("---:|");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "| {} |", r.label);
        for (name, _) in cols {
            let row = row_for(r, name);
            let _ = write!(
                out,
                " {:.1}% ({}/{}) |",
                row.rejection_rate * 100.0,
                row.rejected,
                row.n
            );
        }
        out.push('\n');
    }
    out
}

fn render_csv(reports: &[EvalReport], cols: &[(String, DatasetRole)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in reports {
        for (name, _) in cols {
            let row = row_for(r, name);
            w.serialize(CsvRow {
                monitor: r.label.clone(),
                dataset: row.dataset_name.clone(),
                role: row.role,
                n: row.n,
                rejected: row.rejected,
                rejection_rate: row.rejection_rate,
            })
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
    }
    finish_csv(w)
}

/// Plot data: one line per (dataset, monitor), with the 1-based dataset
/// index used as the x coordinate.
pub fn render_plot_csv(reports: &[EvalReport]) -> Result<String> {
    let cols = columns(reports)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "dataset_index",
        "dataset",
        "role",
        "rejection_rate",
        "monitor",
    ])
    .map_err(|e| Error::invalid(e.to_string()))?;
    for r in reports {
        for (i, (name, role)) in cols.iter().enumerate() {
            let row = row_for(r, name);
            w.write_record([
                (i + 1).to_string(),
                name.clone(),
                role.to_string(),
                row.rejection_rate.to_string(),
                r.label.clone(),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
        }
    }
    finish_csv(w)
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

pub fn parse_report_csv(text: &str) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, r)| {
            r.map_err(|e| Error::MalformedLine {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Renders `reports` and writes them to `path`.
pub fn emit_report(
    reports: &[EvalReport],
    format: ReportFormat,
    path: impl AsRef<Path>,
) -> Result<()> {
    let text = render_report(reports, format)?;
    let path = path.as_ref();
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
