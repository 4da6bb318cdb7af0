//! CSV ingestion and plot-ready exports.
//!
//! Input files hold one sample per row: the first column is `t` in `[0, 1]`
//! (strictly increasing), every further column is a function. A header row
//! is optional and detected by a non-numeric first field.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{AlignError, Result};
use crate::function::{grid, warp_function, SampledFunction, WarpingFunction};
use crate::pipeline::ResultBundle;

const GRID_TOL: f64 = 1e-9;

fn parse_err(line: usize, message: impl Into<String>) -> AlignError {
    AlignError::Parse {
        line,
        message: message.into(),
    }
}

/// Hex SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Parsed CSV columns before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub t: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
    pub header: Option<Vec<String>>,
}

/// Parses CSV text. Line numbers in errors are 1-based.
pub fn parse_table(text: &str) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut t = Vec::new();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut header = None;
    let mut width = None;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(row + 1, |p| p.line() as usize);
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(row + 1, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(parse_err(
                line,
                "expected a t column and at least one function column",
            ));
        }
        if let Some(w) = width {
            if record.len() != w {
                return Err(parse_err(
                    line,
                    format!("expected {w} fields, found {}", record.len()),
                ));
            }
        }
        width = Some(record.len());
        if t.is_empty() && header.is_none() && record[0].parse::<f64>().is_err() {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let mut values = Vec::with_capacity(record.len());
        for (k, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                parse_err(line, format!("column {}: '{field}' is not a number", k + 1))
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    line,
                    format!("column {}: non-finite value", k + 1),
                ));
            }
            values.push(v);
        }
        if columns.is_empty() {
            columns = vec![Vec::new(); values.len() - 1];
        }
        if let Some(&prev) = t.last() {
            if values[0] <= prev {
                return Err(parse_err(line, "t must be strictly increasing"));
            }
        }
        if values[0] < -GRID_TOL || values[0] > 1.0 + GRID_TOL {
            return Err(parse_err(line, format!("t = {} outside [0, 1]", values[0])));
        }
        t.push(values[0]);
        for (c, v) in columns.iter_mut().zip(&values[1..]) {
            c.push(*v);
        }
    }
    let rows = t.len();
    if rows < 3 {
        return Err(parse_err(
            rows + usize::from(header.is_some()),
            format!("need at least 3 samples, found {rows}"),
        ));
    }
    if t[0].abs() > GRID_TOL || (t[rows - 1] - 1.0).abs() > GRID_TOL {
        return Err(parse_err(1, "t must start at 0 and end at 1"));
    }
    Ok(RawTable { t, columns, header })
}

/// Piecewise-linear resampling of `(t, y)` onto the uniform `n`-point grid.
pub fn resample(t: &[f64], y: &[f64], n: usize) -> Vec<f64> {
    let h = (n - 1) as f64;
    let mut k = 0;
    (0..n)
        .map(|i| {
            let x = i as f64 / h;
            while k + 2 < t.len() && t[k + 1] <= x {
                k += 1;
            }
            let w = ((x - t[k]) / (t[k + 1] - t[k])).clamp(0.0, 1.0);
            y[k] + w * (y[k + 1] - y[k])
        })
        .collect()
}

fn is_uniform(t: &[f64]) -> bool {
    let h = (t.len() - 1) as f64;
    t.iter()
        .enumerate()
        .all(|(i, x)| (x - i as f64 / h).abs() < GRID_TOL)
}

/// Functions of a table on the uniform `n`-point grid. A uniform input of
/// exactly `n` rows is taken as is.
pub fn table_functions(table: &RawTable, n: usize) -> Result<Vec<SampledFunction>> {
    table
        .columns
        .iter()
        .map(|c| {
            if table.t.len() == n && is_uniform(&table.t) {
                SampledFunction::new(c.clone())
            } else {
                SampledFunction::new(resample(&table.t, c, n))
            }
        })
        .collect()
}

/// Loads every function column of a CSV file onto the `n`-point grid.
pub fn load_functions(path: &Path, n: usize) -> Result<Vec<SampledFunction>> {
    let text = fs::read_to_string(path)?;
    table_functions(&parse_table(&text)?, n)
}

/// Loads a warping function from the first function column of a CSV file.
pub fn load_warp(path: &Path, n: usize) -> Result<WarpingFunction> {
    let f = load_functions(path, n)?.into_iter().next();
    match f {
        Some(f) => WarpingFunction::new(f.into_values()),
        None => Err(parse_err(1, "no warp column")),
    }
}

/// CSV text with a header row; numbers use the shortest round-trip form.
pub fn csv_text(header: &[&str], columns: &[&[f64]]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| AlignError::Io(e.into()))?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| c[i].to_string()))
            .map_err(|e| AlignError::Io(e.into()))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| AlignError::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is ASCII"))
}

/// Writes functions on the uniform grid with a `t,f1,f2,...` header.
pub fn save_functions(path: &Path, functions: &[SampledFunction]) -> Result<()> {
    let n = functions.first().map_or(0, |f| f.len());
    let t = grid(n);
    let names: Vec<String> = (1..=functions.len()).map(|i| format!("f{i}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![&t];
    cols.extend(functions.iter().map(|f| f.values()));
    fs::write(path, csv_text(&header, &cols)?)?;
    Ok(())
}

/// Writes plot-ready CSVs for every cluster of a bundle and returns the
/// file names in write order.
///
/// Per cluster `c`: `cluster{c}_warps.csv` (mean, median, MAP),
/// `cluster{c}_band.csv` (`t, lower, median, upper, sd`) and
/// `cluster{c}_aligned.csv` (`f1`, `f2`, `f2` warped by each estimate, and
/// the pointwise average of `f1` and the MAP-aligned `f2`). Also
/// `dp_warp.csv` and `posterior_warps.csv`.
pub fn export_plot_data(bundle: &ResultBundle, out_dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(out_dir)?;
    let t = &bundle.grid;
    let f1 = &bundle.functions[0];
    let f2 = &bundle.functions[1];
    let mut written = Vec::new();
    let mut write = |name: String, text: String| -> Result<()> {
        fs::write(out_dir.join(&name), text)?;
        written.push(name);
        Ok(())
    };
    for (c, s) in bundle.summaries.iter().enumerate() {
        write(
            format!("cluster{c}_warps.csv"),
            csv_text(
                &["t", "mean", "median", "map"],
                &[
                    t,
                    s.mean_warp.values(),
                    s.median_warp.values(),
                    s.map_warp.values(),
                ],
            )?,
        )?;
        write(
            format!("cluster{c}_band.csv"),
            csv_text(
                &["t", "lower", "median", "upper", "sd"],
                &[
                    t,
                    &s.band_lower,
                    &s.pointwise_median,
                    &s.band_upper,
                    &s.pointwise_sd,
                ],
            )?,
        )?;
        let by_mean = warp_function(f2, &s.mean_warp)?;
        let by_median = warp_function(f2, &s.median_warp)?;
        let by_map = warp_function(f2, &s.map_warp)?;
        let average: Vec<f64> = f1
            .values()
            .iter()
            .zip(by_map.values())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        write(
            format!("cluster{c}_aligned.csv"),
            csv_text(
                &[
                    "t",
                    "f1",
                    "f2",
                    "f2_mean",
                    "f2_median",
                    "f2_map",
                    "average_map",
                ],
                &[
                    t,
                    f1.values(),
                    f2.values(),
                    by_mean.values(),
                    by_median.values(),
                    by_map.values(),
                    &average,
                ],
            )?,
        )?;
    }
    write(
        "dp_warp.csv".into(),
        csv_text(&["t", "gamma_dp"], &[t, bundle.dp_warp.values()])?,
    )?;
    let names: Vec<String> = (0..bundle.samples.len()).map(|i| format!("s{i}")).collect();
    let mut header = vec!["t"];
    header.extend(names.iter().map(String::as_str));
    let mut cols: Vec<&[f64]> = vec![t];
    cols.extend(bundle.samples.iter().map(|g| g.values()));
    write("posterior_warps.csv".into(), csv_text(&header, &cols)?)?;
    Ok(written)
}
