//! Result tables and their CSV/JSON emitters.
//!
//! Floating-point values are printed with 17 significant digits so that a
//! parsed value is bit-identical to the one written. Both formats carry the
//! same provenance block: CSV as leading `# key=value` lines, JSON as a
//! `meta` object.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::ser::{CompactFormatter, Formatter};

use crate::error::{BenchError, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Num(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Ordered key-value provenance written ahead of the data.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Provenance(pub Vec<(String, String)>);

impl Provenance {
    pub fn add(&mut self, key: &str, value: impl ToString) {
        self.0.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// 17 significant digits in scientific notation; non-finite values as `NaN`, `inf`, `-inf`.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NaN".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Num(x) => format_f64(*x),
        Value::Int(i) => i.to_string(),
        Value::Text(s) => s.clone(),
    }
}

pub fn write_csv<W: Write>(table: &Table, prov: &Provenance, out: &mut W) -> Result<()> {
    let mut buf = Vec::new();
    for (k, v) in &prov.0 {
        writeln!(buf, "# {k}={v}").expect("writing to memory");
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&table.columns).map_err(csv_err)?;
        for row in &table.rows {
            w.write_record(row.iter().map(cell_text)).map_err(csv_err)?;
        }
        w.flush().map_err(|e| BenchError::io("csv output", e))?;
    }
    out.write_all(&buf).map_err(|e| BenchError::io("output", e))
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Parse(format!("csv: {e}"))
}

/// JSON number formatter printing 17 significant digits.
struct SigFormatter(CompactFormatter);

impl Formatter for SigFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_f64(value).as_bytes())
    }
}

fn json_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Num(x) if x.is_finite() => serde_json::Value::from(*x),
        Value::Num(x) => serde_json::Value::String(format_f64(*x)),
        Value::Int(i) => serde_json::Value::from(*i),
        Value::Text(s) => serde_json::Value::String(s.clone()),
    }
}

pub fn write_json<W: Write>(table: &Table, prov: &Provenance, out: &mut W) -> Result<()> {
    let meta: serde_json::Map<String, serde_json::Value> =
        prov.0.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect();
    let rows: Vec<serde_json::Value> = table.rows.iter().map(|r| r.iter().map(json_value).collect()).collect();
    let doc = serde_json::json!({ "meta": meta, "columns": table.columns, "rows": rows });
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SigFormatter(CompactFormatter));
    doc.serialize(&mut ser).map_err(|e| BenchError::Parse(format!("json: {e}")))?;
    buf.push(b'\n');
    out.write_all(&buf).map_err(|e| BenchError::io("output", e))
}

pub fn write_table<W: Write>(table: &Table, prov: &Provenance, format: Format, out: &mut W) -> Result<()> {
    match format {
        Format::Csv => write_csv(table, prov, out),
        Format::Json => write_json(table, prov, out),
    }
}

/// Reads a table written by [`write_csv`]; all cells come back as text.
pub fn read_csv(text: &str) -> Result<(Provenance, Vec<String>, Vec<Vec<String>>)> {
    let mut prov = Provenance::default();
    let mut body = String::new();
    for line in text.lines() {
        if let Some(kv) = line.strip_prefix("# ") {
            let (k, v) = kv.split_once('=').ok_or_else(|| BenchError::Parse(format!("bad provenance line {line:?}")))?;
            prov.add(k, v);
        } else {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut r = csv::Reader::from_reader(body.as_bytes());
    let header = r.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err))
        .collect::<Result<_>>()?;
    Ok((prov, header, rows))
}
