use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricsTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl ReportFormat {
    pub fn extension(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
            ReportFormat::Markdown => "md",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format '{other}'")),
        }
    }
}

/// Columns of the long-format CSV report.
pub const REPORT_CSV_COLUMNS: [&str; 5] = ["method", "measure", "group", "value", "sd"];

struct Row {
    measure: &'static str,
    group: String,
    value: f64,
    sd: Option<f64>,
}

fn rows(t: &MetricsTable) -> Vec<Row> {
    let mut out = Vec::new();
    for (name, g) in [("signal", t.signal), ("noise", t.noise)] {
        if let Some(g) = g {
            out.push(Row {
                measure: "coverage",
                group: name.into(),
                value: g.coverage,
                sd: Some(g.coverage_sd),
            });
        }
    }
    for (name, g) in [("signal", t.signal), ("noise", t.noise)] {
        if let Some(g) = g {
            out.push(Row {
                measure: "width",
                group: name.into(),
                value: g.width,
                sd: Some(g.width_sd),
            });
        }
    }
    if let (Some(fsr), Some(nsr)) = (t.fsr, t.nsr) {
        out.push(Row {
            measure: "fsr",
            group: String::new(),
            value: fsr,
            sd: None,
        });
        out.push(Row {
            measure: "nsr",
            group: String::new(),
            value: nsr,
            sd: None,
        });
    }
    for j in &t.joint {
        if let Some(c) = j.coverage {
            out.push(Row {
                measure: "joint_coverage",
                group: joint_label(&j.features),
                value: c,
                sd: None,
            });
        }
    }
    for c in &t.coefficients {
        out.push(Row {
            measure: "mean_estimate",
            group: format!("beta{}", c.feature + 1),
            value: c.mean,
            sd: Some(c.sd),
        });
    }
    out
}

fn joint_label(features: &[usize]) -> String {
    let inner: Vec<String> = features.iter().map(|j| format!("beta{}", j + 1)).collect();
    format!("({})", inner.join(" "))
}

fn csv(tables: &[&MetricsTable]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(REPORT_CSV_COLUMNS).expect("in-memory write");
    for t in tables {
        for r in rows(t) {
            w.write_record([
                t.method.clone(),
                r.measure.to_string(),
                r.group,
                r.value.to_string(),
                r.sd.map_or(String::new(), |s| s.to_string()),
            ])
            .expect("in-memory write");
        }
    }
    w.into_inner().expect("flush")
}

fn measure_title(m: &str) -> &'static str {
    match m {
        "coverage" => "Coverage",
        "width" => "Width",
        "fsr" => "FSR",
        "nsr" => "NSR",
        "joint_coverage" => "Joint coverage",
        _ => "Mean estimate",
    }
}

fn markdown(tables: &[&MetricsTable]) -> Vec<u8> {
    let mut s = String::new();
    if let Some(first) = tables.first() {
        let _ = writeln!(s, "## {}\n", first.name);
        let _ = writeln!(
            s,
            "n = {}, p = {}, level = {}.{}\n",
            first.n,
            first.p,
            first.level,
            if first.scale_note.is_empty() {
                String::new()
            } else {
                format!(" {}", first.scale_note)
            }
        );
    }
    // union of (measure, group) keys in first-seen order
    let mut keys: Vec<(&'static str, String)> = Vec::new();
    let per: Vec<Vec<Row>> = tables.iter().map(|t| rows(t)).collect();
    for rs in &per {
        for r in rs {
            if !keys.iter().any(|k| k.0 == r.measure && k.1 == r.group) {
                keys.push((r.measure, r.group.clone()));
            }
        }
    }
    let _ = write!(s, "| Measure | Group |");
    for t in tables {
        let _ = write!(s, " {} |", t.method);
    }
    let _ = write!(s, "\n|---|---|");
    for _ in tables {
        let _ = write!(s, "---|");
    }
    s.push('\n');
    for (measure, group) in &keys {
        let _ = write!(s, "| {} | {} |", measure_title(measure), group);
        for rs in &per {
            match rs
                .iter()
                .find(|r| r.measure == *measure && r.group == *group)
            {
                Some(r) => match r.sd {
                    Some(sd) => {
                        let _ = write!(s, " {:.4} ({:.4}) |", r.value, sd);
                    }
                    None => {
                        let _ = write!(s, " {:.4} |", r.value);
                    }
                },
                None => s.push_str(" - |"),
            }
        }
        s.push('\n');
    }
    s.push('\n');
    for t in tables {
        let _ = writeln!(
            s,
            "{}: {} replicates, {} completed, {} failed, {} feature-level failures.",
            t.method,
            t.replicates,
            t.completed,
            t.failed.len(),
            t.feature_failures
        );
    }
    s.into_bytes()
}

/// Serializes one table. Field and row order are fixed, so equal tables give
/// equal bytes.
pub fn emit_report(table: &MetricsTable, format: ReportFormat) -> Vec<u8> {
    emit_comparison(&[table], format)
}

/// Several methods side by side. JSON output is an array of tables.
pub fn emit_comparison(tables: &[&MetricsTable], format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Csv => csv(tables),
        ReportFormat::Markdown => markdown(tables),
        ReportFormat::Json => {
            let s = if let [one] = tables {
                one.to_json()
            } else {
                serde_json::to_string_pretty(tables).expect("tables serialize")
            };
            s.into_bytes()
        }
    }
}
