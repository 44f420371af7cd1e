//! CSV reading and writing for datasets and chain dumps.
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so dumps round-trip exactly.

use std::io::{Read, Write};

use crate::error::{ModeError, Result};
use crate::mcmc::Chain;
use crate::model::Dataset;
use crate::scalar::Scalar;

fn parse_cell<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| ModeError::Parse(format!("row {row}, column `{column}`: `{cell}` is not a number")))?;
    if !v.is_finite() {
        return Err(ModeError::NonFinite(format!("row {row}, column `{column}`")));
    }
    Ok(T::of(v))
}

/// Reads a dataset whose every column except `response` is a covariate.
pub fn read_dataset<T: Scalar, R: Read>(reader: R, response: &str, intercept: bool) -> Result<Dataset<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let resp_idx = headers
        .iter()
        .position(|h| h == response)
        .ok_or_else(|| ModeError::UnknownColumn(response.to_string()))?;
    let names: Vec<String> = headers.iter().enumerate().filter(|&(j, _)| j != resp_idx).map(|(_, h)| h.clone()).collect();
    let mut y = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = i + 2;
        if rec.len() != headers.len() {
            return Err(ModeError::Parse(format!("row {row_no} has {} fields, header has {}", rec.len(), headers.len())));
        }
        let mut cov = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate() {
            let v = parse_cell(cell, row_no, &headers[j])?;
            if j == resp_idx {
                y.push(v);
            } else {
                cov.push(v);
            }
        }
        rows.push(cov);
    }
    if y.is_empty() {
        return Err(ModeError::Empty("dataset"));
    }
    Dataset::from_covariates(y, &rows, &names, intercept)
}

pub fn read_dataset_path<T: Scalar>(path: &std::path::Path, response: &str, intercept: bool) -> Result<Dataset<T>> {
    read_dataset(std::fs::File::open(path)?, response, intercept)
}

/// Writes `y` followed by the covariates; an intercept column is omitted.
pub fn write_dataset<T: Scalar, W: Write>(writer: W, data: &Dataset<T>) -> Result<()> {
    let skip = usize::from(data.has_intercept());
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["y".to_string()];
    header.extend(data.column_names()[skip..].iter().cloned());
    wtr.write_record(&header)?;
    for i in 0..data.n() {
        let mut rec = vec![data.y()[i].as_f64().to_string()];
        rec.extend(data.x().row(i)[skip..].iter().map(|v| v.as_f64().to_string()));
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Header `iter,<names>,log_target`; `iter` counts kept draws from 1.
pub fn write_chain<T: Scalar, W: Write>(writer: W, chain: &Chain<T>) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["iter".to_string()];
    header.extend(chain.names.iter().cloned());
    header.push("log_target".into());
    wtr.write_record(&header)?;
    for (i, (d, lp)) in chain.draws.iter().zip(&chain.log_target).enumerate() {
        let mut rec = vec![(i + 1).to_string()];
        rec.extend(d.iter().map(|v| v.as_f64().to_string()));
        rec.push(lp.as_f64().to_string());
        wtr.write_record(&rec)?;
    }
    wtr.flush()?;
    Ok(())
}

fn parse_chain_value<T: Scalar>(cell: &str, row: usize, column: &str) -> Result<T> {
    // log targets may legitimately be -inf
    match cell.trim() {
        "-inf" => Ok(T::neg_infinity()),
        "inf" => Ok(T::infinity()),
        _ => parse_cell(cell, row, column),
    }
}

pub fn read_chain<T: Scalar, R: Read>(reader: R) -> Result<Chain<T>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.len() < 3 || headers[0] != "iter" || headers[headers.len() - 1] != "log_target" {
        return Err(ModeError::Parse(format!("chain header must be iter,<params>,log_target; got {}", headers.join(","))));
    }
    let names = headers[1..headers.len() - 1].to_vec();
    let mut draws = Vec::new();
    let mut lps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row_no = i + 2;
        if rec.len() != headers.len() {
            return Err(ModeError::Parse(format!("row {row_no} has {} fields, header has {}", rec.len(), headers.len())));
        }
        let mut d = Vec::with_capacity(names.len());
        for (j, cell) in rec.iter().enumerate().skip(1).take(names.len()) {
            d.push(parse_cell(cell, row_no, &headers[j])?);
        }
        draws.push(d);
        lps.push(parse_chain_value(&rec[headers.len() - 1], row_no, "log_target")?);
    }
    if draws.is_empty() {
        return Err(ModeError::Empty("chain file"));
    }
    Chain::from_draws(names, draws, lps)
}

pub fn read_chain_path<T: Scalar>(path: &std::path::Path) -> Result<Chain<T>> {
    read_chain(std::fs::File::open(path)?)
}
