//! CSV ingestion for regression datasets and contingency tables.

use std::io::{Read, Write};
use std::path::Path;

use jointprior_core::glm_laplace::ContingencyTable;
use jointprior_core::linear_exact::LinearDataset;
use jointprior_core::model_space::FactorSpec;
use nalgebra::{DMatrix, DVector};

use crate::error::{BenchError, Result};
use crate::output::format_f64;

/// Shape summary reported after loading a regression dataset.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetReport {
    pub n: usize,
    pub p: usize,
    /// Rank of the covariates together with an intercept column.
    pub rank: usize,
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(r)
}

fn open(path: &Path) -> Result<std::fs::File> {
    std::fs::File::open(path).map_err(|e| BenchError::io(path.display().to_string(), e))
}

pub fn load_linear_csv(path: &Path, response: &str) -> Result<(LinearDataset, DatasetReport)> {
    read_linear_csv(open(path)?, response)
}

/// Parses a header row and numeric columns; `response` names the response column.
pub fn read_linear_csv<R: Read>(input: R, response: &str) -> Result<(LinearDataset, DatasetReport)> {
    let mut rd = reader(input);
    let header: Vec<String> = rd.headers().map_err(|e| BenchError::Parse(format!("csv header: {e}")))?.iter().map(String::from).collect();
    for (i, h) in header.iter().enumerate() {
        if h.is_empty() {
            return Err(BenchError::Parse(format!("column {} has an empty header", i + 1)));
        }
        if header[..i].contains(h) {
            return Err(BenchError::Parse(format!("duplicate header {h:?}")));
        }
    }
    let resp = header
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| BenchError::Parse(format!("response column {response:?} not found in header {header:?}")))?;
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| BenchError::Parse(format!("csv: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != header.len() {
            return Err(BenchError::Parse(format!("row {line}: expected {} fields, found {}", header.len(), rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            if field.is_empty() {
                return Err(BenchError::Parse(format!("row {line}, column {:?}: missing value", header[j])));
            }
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| BenchError::Parse(format!("row {line}, column {:?}: non-numeric value {field:?}", header[j])))?;
            cols[j].push(v);
        }
    }
    let n = cols[resp].len();
    if n == 0 {
        return Err(BenchError::Parse("dataset has no rows".into()));
    }
    let labels: Vec<String> = header.iter().enumerate().filter(|(j, _)| *j != resp).map(|(_, h)| h.clone()).collect();
    let xcols: Vec<&Vec<f64>> = cols.iter().enumerate().filter(|(j, _)| *j != resp).map(|(_, c)| c).collect();
    let x = DMatrix::from_fn(n, xcols.len(), |i, j| xcols[j][i]);
    let y = DVector::from_vec(cols[resp].clone());
    let data = LinearDataset::new(x, y, labels).map_err(|e| BenchError::core("dataset", e))?;
    let report = DatasetReport { n, p: data.p(), rank: data.column_rank() };
    Ok((data, report))
}

/// Writes covariates then the response, with 17-significant-digit values.
pub fn write_linear_csv<W: Write>(data: &LinearDataset, response: &str, out: &mut W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = data.labels().iter().map(String::as_str).collect();
    header.push(response);
    w.write_record(&header).map_err(|e| BenchError::Parse(format!("csv: {e}")))?;
    for i in 0..data.n() {
        let mut row: Vec<String> = (0..data.p()).map(|j| format_f64(data.x()[(i, j)])).collect();
        row.push(format_f64(data.y()[i]));
        w.write_record(&row).map_err(|e| BenchError::Parse(format!("csv: {e}")))?;
    }
    w.flush().map_err(|e| BenchError::io("csv output", e))
}

pub fn load_contingency_csv(path: &Path, spec: &FactorSpec, level_labels: &[Vec<String>]) -> Result<ContingencyTable> {
    read_contingency_csv(open(path)?, spec, level_labels)
}

/// One column per factor holding level labels plus a `count` column. Every
/// cell must appear exactly once; counts are stored in row-major cell order
/// (last factor fastest).
pub fn read_contingency_csv<R: Read>(input: R, spec: &FactorSpec, level_labels: &[Vec<String>]) -> Result<ContingencyTable> {
    let factors = spec.factors();
    if level_labels.len() != factors.len() {
        return Err(BenchError::Parse("one label list per factor is required".into()));
    }
    for (f, labels) in factors.iter().zip(level_labels) {
        if labels.len() != f.levels {
            return Err(BenchError::Parse(format!("factor {} has {} levels but {} labels", f.name, f.levels, labels.len())));
        }
    }
    let mut rd = reader(input);
    let header: Vec<String> = rd.headers().map_err(|e| BenchError::Parse(format!("csv header: {e}")))?.iter().map(String::from).collect();
    let find = |name: &str| {
        header.iter().position(|h| h == name).ok_or_else(|| BenchError::Parse(format!("column {name:?} not found in header {header:?}")))
    };
    let fcols: Vec<usize> = factors.iter().map(|f| find(&f.name)).collect::<Result<_>>()?;
    let ccol = find("count")?;
    let mut counts: Vec<Option<u64>> = vec![None; spec.n_cells()];
    for rec in rd.records() {
        let rec = rec.map_err(|e| BenchError::Parse(format!("csv: {e}")))?;
        let line = rec.position().map_or(0, |p| p.line());
        let mut idx = 0;
        for ((f, &c), labels) in factors.iter().zip(&fcols).zip(level_labels) {
            let label = rec.get(c).unwrap_or("");
            let level = labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| BenchError::Parse(format!("row {line}, column {:?}: unknown level {label:?}", f.name)))?;
            idx = idx * f.levels + level;
        }
        let raw = rec.get(ccol).unwrap_or("");
        let count: u64 = match raw.parse::<i64>() {
            Ok(v) if v >= 0 => v as u64,
            Ok(v) => return Err(BenchError::Parse(format!("row {line}, column \"count\": negative count {v}"))),
            Err(_) => return Err(BenchError::Parse(format!("row {line}, column \"count\": invalid count {raw:?}"))),
        };
        if counts[idx].replace(count).is_some() {
            return Err(BenchError::Parse(format!("row {line}: duplicate cell")));
        }
    }
    if let Some(missing) = counts.iter().position(Option::is_none) {
        return Err(BenchError::Parse(format!("table is incomplete: cell {missing} (row-major order) has no row")));
    }
    ContingencyTable::new(spec.clone(), counts.into_iter().map(|c| c.expect("checked")).collect())
        .map_err(|e| BenchError::core("contingency table", e))
}
