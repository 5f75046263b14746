use std::io::Write;

use anyhow::Result;
use clap::ValueEnum;
use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plotdata,
}

/// Result of one subcommand, ready for rendering.
#[derive(Debug, Default)]
pub struct Report {
    pub command: String,
    /// Effective values of every knob used.
    pub config: Map<String, Value>,
    pub records: Vec<Value>,
    /// Whole-run results that do not fit the record table.
    pub summary: Map<String, Value>,
    /// Two-column blocks for `plotdata`.
    pub plot: Vec<Vec<(f64, f64)>>,
    /// `Some(false)` when the computation succeeded but the checked property
    /// failed.
    pub verdict: Option<bool>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report {
            command: command.to_string(),
            ..Default::default()
        }
    }

    pub fn knob(&mut self, key: &str, value: impl Into<Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) {
        self.summary.insert(key.to_string(), value.into());
    }
}

pub fn render(report: &Report, format: Format, out: &mut dyn Write) -> Result<()> {
    match format {
        Format::Json => {
            let mut top = Map::new();
            top.insert("command".into(), report.command.clone().into());
            top.insert("config".into(), Value::Object(report.config.clone()));
            top.insert("records".into(), Value::Array(report.records.clone()));
            top.insert("summary".into(), Value::Object(report.summary.clone()));
            top.insert("verdict".into(), report.verdict.map(Value::Bool).unwrap_or(Value::Null));
            serde_json::to_writer_pretty(&mut *out, &Value::Object(top))?;
            writeln!(out)?;
        }
        Format::Csv => write_csv(report, out)?,
        Format::Plotdata => {
            let blocks: Vec<_> = report.plot.iter().filter(|b| !b.is_empty()).collect();
            for (i, block) in blocks.iter().enumerate() {
                if i > 0 {
                    writeln!(out)?;
                }
                for (x, y) in block.iter() {
                    writeln!(out, "{x:e} {y:e}")?;
                }
            }
        }
    }
    Ok(())
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn write_csv(report: &Report, out: &mut dyn Write) -> Result<()> {
    for (k, v) in report.config.iter().chain(&report.summary) {
        writeln!(out, "# {k}={}", cell(v))?;
    }
    let Some(first) = report.records.first().and_then(|r| r.as_object()) else {
        return Ok(());
    };
    let header: Vec<&String> = first.keys().collect();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for rec in &report.records {
        let row: Vec<String> = header
            .iter()
            .map(|k| rec.get(k.as_str()).map(cell).unwrap_or_default())
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_plotdata_is_empty() {
        let r = Report::new("scan");
        let mut buf = Vec::new();
        render(&r, Format::Plotdata, &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn csv_has_config_and_header() {
        let mut r = Report::new("knead");
        r.knob("steps", 40);
        r.records.push(json!({"param": -1.0, "word": "-0"}));
        let mut buf = Vec::new();
        render(&r, Format::Csv, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "# steps=40\nparam,word\n-1.0,-0\n");
    }

    #[test]
    fn plot_blocks_are_separated() {
        let mut r = Report::new("lift");
        r.plot = vec![vec![(0.0, 1.0)], vec![(1.0, 2.0), (2.0, 3.0)]];
        let mut buf = Vec::new();
        render(&r, Format::Plotdata, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "0e0 1e0\n\n1e0 2e0\n2e0 3e0\n");
    }
}
