use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::config::{Format, Settings};
use crate::CliError;

pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

pub enum Cell {
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            // 17 significant digits round-trip every f64.
            Cell::Num(x) if *x == 0.0 => "0".to_string(),
            Cell::Num(x) if x.is_finite() => format!("{x:.16e}"),
            Cell::Num(x) => format!("{x}"),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Text(String::new()), Cell::Num)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub struct Report {
    pub result: Value,
    pub table: Option<Table>,
}

pub fn metadata(command: &str, settings: &Settings, extra: Value) -> Value {
    json!({
        "tool": "canard",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config": settings,
        "numerics": extra,
    })
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, x, out);
            }
        }
        Value::Array(a) => {
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}.{i}"), x, out);
            }
        }
        Value::Number(n) => out.push((prefix.to_string(), n.as_f64().map_or(n.to_string(), |x| Cell::Num(x).render()))),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn render(meta: &Value, report: &Report, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let doc = json!({ "metadata": meta, "result": report.result });
            serde_json::to_string_pretty(&doc).map(|s| s + "\n").map_err(|e| CliError::Validation(e.to_string()))
        }
        Format::Csv => {
            let mut s = String::new();
            let mut pairs = Vec::new();
            flatten("", meta, &mut pairs);
            for (k, v) in pairs {
                s.push_str(&format!("# {k}: {v}\n"));
            }
            match &report.table {
                Some(t) => {
                    s.push_str(&t.header.join(","));
                    s.push('\n');
                    for row in &t.rows {
                        let cells: Vec<String> = row.iter().map(|c| csv_escape(&c.render())).collect();
                        s.push_str(&cells.join(","));
                        s.push('\n');
                    }
                }
                None => {
                    let mut pairs = Vec::new();
                    flatten("", &report.result, &mut pairs);
                    s.push_str("name,value\n");
                    for (k, v) in pairs {
                        s.push_str(&format!("{},{}\n", csv_escape(&k), csv_escape(&v)));
                    }
                }
            }
            Ok(s)
        }
    }
}

pub fn write(text: &str, out: Option<&Path>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Validation(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut h = std::io::stdout().lock();
            h.write_all(text.as_bytes()).map_err(|e| CliError::Validation(e.to_string()))
        }
    }
}
