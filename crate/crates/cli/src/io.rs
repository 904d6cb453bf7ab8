//! Panel CSV format: the first row holds the grid points (or the single word
//! `euclidean`), every following row is one observation in time order.

use std::fmt::Write as _;
use std::path::Path;

use hilbert_ts::{CurvePanel, Quadrature, QuadratureMode};
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};

const EUCLIDEAN_HEADER: &str = "euclidean";

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_cell(raw: &str, line: u64, col: usize) -> CliResult<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Validation(format!("line {line}, column {col}: cannot parse {raw:?} as a number")))?;
    if !v.is_finite() {
        return Err(CliError::Validation(format!("line {line}, column {col}: non-finite value {raw:?}")));
    }
    Ok(v)
}

pub fn parse_panel(text: &str) -> CliResult<CurvePanel> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut records = reader.records();
    let header = match records.next() {
        Some(r) => r.map_err(|e| CliError::Validation(format!("malformed CSV: {e}")))?,
        None => return Err(CliError::Validation("empty input: expected a grid header row".into())),
    };
    let euclidean = header.get(0).map(|s| s.trim().eq_ignore_ascii_case(EUCLIDEAN_HEADER)).unwrap_or(false);
    let grid = if euclidean {
        None
    } else {
        let points = header.iter().enumerate().map(|(c, s)| parse_cell(s, 1, c + 1)).collect::<CliResult<Vec<_>>>()?;
        if let Some(c) = points.windows(2).position(|w| w[1] <= w[0]) {
            return Err(CliError::Validation(format!(
                "line 1: grid must be strictly increasing, column {} is {} after {}",
                c + 2,
                points[c + 1],
                points[c]
            )));
        }
        Some(points)
    };
    let mut width = grid.as_ref().map(Vec::len).or((header.len() > 1).then(|| header.len()));

    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0;
    for record in records {
        let record = record.map_err(|e| CliError::Validation(format!("malformed CSV: {e}")))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        let m = *width.get_or_insert(record.len());
        if record.len() != m {
            return Err(CliError::Validation(format!("line {line}: expected {m} fields, found {}", record.len())));
        }
        for (c, s) in record.iter().enumerate() {
            rows.push(parse_cell(s, line, c + 1)?);
        }
        n += 1;
    }
    let m = width.unwrap_or(0);
    if n == 0 || m == 0 {
        return Err(CliError::Validation("no observations after the header row".into()));
    }
    let quadrature = match grid {
        Some(points) => Quadrature::trapezoid(points)?,
        None => Quadrature::euclidean(m)?,
    };
    Ok(CurvePanel::new(DMatrix::from_row_slice(n, m, &rows), quadrature.shared())?)
}

pub fn ingest_panel(path: &Path) -> CliResult<CurvePanel> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_panel(&text)
}

pub fn panel_to_csv(panel: &CurvePanel) -> String {
    let mut out = String::new();
    let q = panel.quadrature();
    match q.mode() {
        QuadratureMode::Euclidean => out.push_str(EUCLIDEAN_HEADER),
        QuadratureMode::TrapezoidOnGrid => {
            out.push_str(&q.points().iter().map(|&u| fmt_num(u)).collect::<Vec<_>>().join(","))
        }
    }
    out.push('\n');
    for row in panel.values().row_iter() {
        out.push_str(&row.iter().map(|&v| fmt_num(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    out
}

/// CSV with a header line and one row per entry of `rows`.
pub fn table_to_csv(header: &[String], rows: impl IntoIterator<Item = (String, Vec<f64>)>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for (key, values) in rows {
        out.push_str(&key);
        for v in values {
            let _ = write!(out, ",{}", fmt_num(v));
        }
        out.push('\n');
    }
    out
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

pub fn ensure_dir(path: &Path) -> CliResult<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}
