//! Rendering of tables and reports as CSV or JSON, each preceded by a
//! header block naming the library version and tolerances.

use std::collections::BTreeMap;
use std::io::Write;

use pfpp_core::tol;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Serialize)]
pub struct Tolerances {
    pub skew: f64,
    pub spectrum: f64,
    pub projection: f64,
    pub axiom: f64,
    pub singular_rcond: f64,
    pub negative_weight: f64,
    pub mass: f64,
    pub imaginary: f64,
    pub regularity: f64,
    pub car: f64,
    pub dpp: f64,
    pub purify_snap: f64,
    /// Pass threshold for the deviations reported by check commands.
    pub check: f64,
}

impl Tolerances {
    pub fn new(check: f64) -> Self {
        Self {
            skew: tol::SKEW,
            spectrum: tol::SPECTRUM,
            projection: tol::PROJECTION,
            axiom: tol::AXIOM,
            singular_rcond: tol::SINGULAR_RCOND,
            negative_weight: tol::NEGATIVE_WEIGHT,
            mass: tol::MASS,
            imaginary: tol::IMAGINARY,
            regularity: tol::REGULARITY,
            car: tol::CAR,
            dpp: tol::DPP,
            purify_snap: tol::PURIFY_SNAP,
            check,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub tolerances: Tolerances,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, Value>,
}

/// What a command produces.
pub enum Output {
    Table {
        columns: Vec<String>,
        rows: Vec<Vec<Value>>,
    },
    /// Flat key/value report.
    Report(Map<String, Value>),
    /// A JSON document (operator or kernel) that other commands can read back.
    Document(Value),
}

impl Output {
    pub fn table(columns: &[&str], rows: Vec<Vec<Value>>) -> Self {
        Output::Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    pub fn report(v: Value) -> Self {
        match v {
            Value::Object(m) => Output::Report(m),
            _ => unreachable!("reports are objects"),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn render(header: &Header, output: &Output, format: Format) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    match format {
        Format::Json => {
            let mut top = Map::new();
            top.insert(
                "header".into(),
                serde_json::to_value(header).expect("header serializes"),
            );
            match output {
                Output::Table { columns, rows } => {
                    top.insert("columns".into(), json!(columns));
                    top.insert("rows".into(), json!(rows));
                }
                Output::Report(m) => top.extend(m.clone()),
                Output::Document(Value::Object(m)) => top.extend(m.clone()),
                Output::Document(other) => {
                    top.insert("document".into(), other.clone());
                }
            }
            serde_json::to_writer_pretty(&mut buf, &Value::Object(top)).expect("in-memory write");
            buf.push(b'\n');
        }
        Format::Csv => {
            write_csv_header(&mut buf, header);
            let mut w = csv::Writer::from_writer(&mut buf);
            let csv_err = |e: csv::Error| CliError::Json(e.to_string());
            match output {
                Output::Table { columns, rows } => {
                    w.write_record(columns).map_err(csv_err)?;
                    for r in rows {
                        w.write_record(r.iter().map(cell)).map_err(csv_err)?;
                    }
                }
                Output::Report(m) => {
                    w.write_record(["key", "value"]).map_err(csv_err)?;
                    for (k, v) in m {
                        w.write_record([k.clone(), cell(v)]).map_err(csv_err)?;
                    }
                }
                Output::Document(_) => {
                    return Err(CliError::Usage(
                        "this output is only available with --format json".into(),
                    ))
                }
            }
            w.flush().map_err(|e| CliError::Json(e.to_string()))?;
        }
    }
    Ok(buf)
}

fn write_csv_header(buf: &mut Vec<u8>, h: &Header) {
    let _ = writeln!(buf, "# {} {}", h.tool, h.version);
    let _ = writeln!(buf, "# command: {}", h.command);
    if let Some(s) = h.seed {
        let _ = writeln!(buf, "# seed: {s}");
    }
    let tol = serde_json::to_string(&h.tolerances).expect("tolerances serialize");
    let _ = writeln!(buf, "# tolerances: {tol}");
    for (k, v) in &h.meta {
        let _ = writeln!(buf, "# {k}: {v}");
    }
}

/// Written next to `--out` as `<out>.manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub header: &'a Header,
    pub args: Vec<String>,
    pub format: &'static str,
    pub outputs: Vec<String>,
    pub status: u8,
}
