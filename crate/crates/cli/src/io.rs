//! Flat-file formats shared by the subcommands: a wide table keyed by an id
//! column, an id→value series, and an id→label list.

use std::fs;
use std::path::Path;

use firmprod::{Matrix, Scalar};

use crate::error::{CliError, CliResult};

/// Numeric table with one row per entity; empty cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub ids: Vec<String>,
    pub columns: Vec<String>,
    pub values: Matrix<f64>,
}

fn fmt_num(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

impl Table {
    pub fn to_csv(&self, id_header: &str) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![id_header.to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (id, row) in self.ids.iter().zip(self.values.rows_iter()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|&v| fmt_num(v)));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = rdr.headers().map_err(|e| e.to_string())?.iter().map(str::to_owned).collect();
        if header.len() < 2 {
            return Err("table needs an id column and at least one value column".into());
        }
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| e.to_string())?;
            ids.push(rec.get(0).unwrap_or("").to_string());
            for (j, cell) in rec.iter().enumerate().skip(1) {
                let cell = cell.trim();
                data.push(if cell.is_empty() {
                    f64::NAN
                } else {
                    cell.parse().map_err(|_| format!("column {}: `{cell}` is not a number", header[j]))?
                });
            }
        }
        let p = header.len() - 1;
        Ok(Self { values: Matrix::from_row_major(ids.len(), p, data), ids, columns: header[1..].to_vec() })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        Self::parse(&read_text(path)?).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Rows whose id appears in `keep`, in `keep` order.
    pub fn select_ids(&self, keep: &[String]) -> Option<Self> {
        let idx: Option<Vec<usize>> = keep.iter().map(|k| self.ids.iter().position(|i| i == k)).collect();
        let idx = idx?;
        Some(Self { ids: keep.to_vec(), columns: self.columns.clone(), values: self.values.select_rows(&idx) })
    }
}

pub fn read_text(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))
}

pub fn matrix_to_f64<T: Scalar>(m: &Matrix<T>) -> Matrix<f64> {
    Matrix::from_row_major(m.nrows(), m.ncols(), m.as_slice().iter().map(|v| v.as_f64()).collect())
}

/// `id,<header>` series.
pub fn series_csv(ids: &[String], header: &str, values: &[f64]) -> String {
    let mut out = format!("firm_id,{header}\n");
    for (id, v) in ids.iter().zip(values) {
        out.push_str(&format!("{id},{}\n", fmt_num(*v)));
    }
    out
}

/// Reads the first value column of a keyed CSV.
pub fn load_series(path: &Path) -> CliResult<(Vec<String>, Vec<f64>)> {
    let t = Table::load(path)?;
    Ok((t.ids, t.values.column(0)))
}

pub fn labels_csv(ids: &[String], labels: &[usize]) -> String {
    let mut out = String::from("firm_id,cluster\n");
    for (id, l) in ids.iter().zip(labels) {
        out.push_str(&format!("{id},{}\n", l + 1));
    }
    out
}

/// Labels written by [`labels_csv`] (1-based) back to 0-based.
pub fn load_labels(path: &Path) -> CliResult<Vec<(String, usize)>> {
    let (ids, vals) = load_series(path)?;
    ids.into_iter()
        .zip(vals)
        .map(|(id, v)| {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok((id, v as usize - 1))
            } else {
                Err(CliError::config(format!("{}: bad cluster label {v} for {id}", path.display())))
            }
        })
        .collect()
}

/// Reads `firm_id,<category...>` label columns.
pub fn load_categories(path: &Path) -> CliResult<(Vec<String>, Vec<(String, Vec<String>)>)> {
    let text = read_text(path)?;
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let bad = |e: csv::Error| CliError::config(format!("{}: {e}", path.display()));
    let header: Vec<String> = rdr.headers().map_err(bad)?.iter().map(str::to_owned).collect();
    let mut ids = Vec::new();
    let mut cols: Vec<(String, Vec<String>)> = header.iter().skip(1).map(|h| (h.clone(), Vec::new())).collect();
    for rec in rdr.records() {
        let rec = rec.map_err(bad)?;
        ids.push(rec.get(0).unwrap_or("").to_string());
        for (j, c) in cols.iter_mut().enumerate() {
            c.1.push(rec.get(j + 1).unwrap_or("").to_string());
        }
    }
    Ok((ids, cols))
}

pub fn categories_csv(ids: &[String], cols: &[(String, Vec<String>)]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["firm_id".to_string()];
    header.extend(cols.iter().map(|c| c.0.clone()));
    w.write_record(&header).expect("in-memory write");
    for (i, id) in ids.iter().enumerate() {
        let mut rec = vec![id.clone()];
        rec.extend(cols.iter().map(|c| c.1[i].clone()));
        w.write_record(&rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

/// Matrix with `name_prefix{1..}` columns and numbered rows.
pub fn matrix_csv(m: &Matrix<f64>, row_header: &str, columns: &[String]) -> String {
    let ids: Vec<String> = (1..=m.nrows()).map(|i| i.to_string()).collect();
    Table { ids, columns: columns.to_vec(), values: m.clone() }.to_csv(row_header)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_round_trip_keeps_missing_cells() {
        let t = Table {
            ids: vec!["a".into(), "b".into()],
            columns: vec!["x".into(), "y".into()],
            values: Matrix::from_rows(&[[1.5, f64::NAN], [-2.0, 3.25]]),
        };
        let text = t.to_csv("firm_id");
        assert_eq!(text, "firm_id,x,y\na,1.5,\nb,-2,3.25\n");
        let back = Table::parse(&text).unwrap();
        assert_eq!(back.ids, t.ids);
        assert!(back.values[(0, 1)].is_nan());
        assert_eq!(back.values[(1, 1)], 3.25);
    }

    #[test]
    fn bad_cells_are_reported() {
        assert!(Table::parse("id,x\na,foo\n").unwrap_err().contains("not a number"));
    }
}
