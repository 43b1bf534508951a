//! Config echo and report writers shared by the subcommands.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Ordered record of every parameter that determines a run.
pub struct Config {
    command: &'static str,
    entries: Vec<(String, String)>,
}

impl Config {
    pub fn new(command: &'static str) -> Self {
        Config {
            command,
            entries: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.entries.push((key.to_string(), value.to_string()));
        self
    }

    pub fn lines(&self) -> Vec<String> {
        let mut out = vec![format!("# kelly-lab {}", self.command)];
        out.extend(self.entries.iter().map(|(k, v)| format!("# {k} = {v}")));
        out
    }

    pub fn echo(&self) {
        for line in self.lines() {
            println!("{line}");
        }
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("command".into(), Value::String(self.command.into()));
        for (k, v) in &self.entries {
            m.insert(k.clone(), Value::String(v.clone()));
        }
        Value::Object(m)
    }
}

/// CSV with the config echoed as leading `#` comment lines.
pub fn write_csv(path: &Path, config: &Config, header: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(path)?);
    for line in config.lines() {
        writeln!(w, "{line}")?;
    }
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.flush()?;
    Ok(())
}

/// `{"config": ..., "result": ...}` pretty-printed.
pub fn write_json<T: Serialize>(path: &Path, config: &Config, result: &T) -> Result<(), Failure> {
    let doc = json!({ "config": config.to_json(), "result": result });
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Rows as objects keyed by header, for JSON output of tabular reports.
pub fn rows_to_json(header: &[String], rows: &[Vec<String>]) -> Value {
    Value::Array(
        rows.iter()
            .map(|r| {
                let m: Map<String, Value> = header
                    .iter()
                    .zip(r)
                    .map(|(h, v)| {
                        let val = v
                            .parse::<f64>()
                            .ok()
                            .filter(|f| f.is_finite())
                            .and_then(|f| serde_json::Number::from_f64(f).map(Value::Number))
                            .unwrap_or_else(|| Value::String(v.clone()));
                        (h.clone(), val)
                    })
                    .collect();
                Value::Object(m)
            })
            .collect(),
    )
}

pub fn write_table(path: &Path, format: Format, config: &Config, header: &[String], rows: &[Vec<String>]) -> Result<(), Failure> {
    match format {
        Format::Csv => write_csv(path, config, header, rows),
        Format::Json => write_json(path, config, &rows_to_json(header, rows)),
    }
}

/// Fixed-width text table on standard output.
pub fn print_table(header: &[String], rows: &[Vec<String>]) {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let fmt = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    println!("{}", fmt(header));
    for r in rows {
        println!("{}", fmt(r));
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

pub fn vector(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ")
}
