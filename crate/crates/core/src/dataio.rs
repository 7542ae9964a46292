//! Quarterly panel ingestion, stationarity transforms and standardization.
//!
//! CSV layout: a header row `date,name1,name2,...`, optionally followed by a
//! row of transform codes (first cell ignored), then one row per period.
//! Dates may be `YYYY:Qn`, ISO `YYYY-MM-DD` or `M/D/YYYY`.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "from", content = "path")]
pub enum TcodeSource {
    HeaderRow,
    /// Two-column CSV of `name,tcode`.
    Sidecar(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Panel {
    pub dates: Vec<String>,
    pub names: Vec<String>,
    /// T×m; missing cells are NaN until preparation.
    pub values: DMatrix<f64>,
    pub tcodes: Vec<u8>,
    /// Set by [`standardize`].
    pub scale_info: Option<Vec<Scale>>,
}

impl Panel {
    pub fn new(dates: Vec<String>, names: Vec<String>, values: DMatrix<f64>, tcodes: Vec<u8>) -> Result<Self> {
        if values.nrows() != dates.len() || values.ncols() != names.len() || tcodes.len() != names.len() {
            return Err(Error::Shape(format!(
                "{} dates, {} names and {} codes for a {:?} matrix",
                dates.len(),
                names.len(),
                tcodes.len(),
                values.shape()
            )));
        }
        if let Some(bad) = tcodes.iter().find(|c| !(1..=7).contains(*c)) {
            return Err(Error::Data(format!("transform code {bad} is outside 1..7")));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = names.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Data(format!("duplicate series name {dup:?}")));
        }
        Ok(Panel { dates, names, values, tcodes, scale_info: None })
    }

    pub fn t(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::Data(format!("no series named {name:?}")))
    }

    /// Columns in the given order, by name.
    pub fn select(&self, names: &[String]) -> Result<Panel> {
        let idx: Vec<usize> = names.iter().map(|n| self.column_index(n)).collect::<Result<_>>()?;
        Ok(Panel {
            dates: self.dates.clone(),
            names: names.to_vec(),
            values: self.values.select_columns(&idx),
            tcodes: idx.iter().map(|&j| self.tcodes[j]).collect(),
            scale_info: self.scale_info.as_ref().map(|s| idx.iter().map(|&j| s[j]).collect()),
        })
    }

    /// Write in the layout [`load_panel`] reads, with a code row. Values use
    /// the shortest representation that parses back to the same bits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(std::iter::once("date").chain(self.names.iter().map(String::as_str)))?;
        w.write_record(std::iter::once("tcode".to_string()).chain(self.tcodes.iter().map(u8::to_string)))?;
        for (t, d) in self.dates.iter().enumerate() {
            let row = self.values.row(t);
            w.write_record(std::iter::once(d.clone()).chain(row.iter().map(|v| {
                if v.is_nan() {
                    String::new()
                } else {
                    v.to_string()
                }
            })))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Sort key for the supported date formats.
pub fn date_key(s: &str) -> Result<(i32, u32, u32)> {
    let bad = || Error::Data(format!("unrecognised date {s:?}"));
    let num = |x: &str| x.trim().parse::<u32>().map_err(|_| bad());
    let s = s.trim();
    if let Some((y, q)) = s.split_once(':') {
        let q = num(q.trim_start_matches(['Q', 'q']))?;
        if !(1..=4).contains(&q) {
            return Err(bad());
        }
        return Ok((num(y)? as i32, 3 * q, 1));
    }
    let parts: Vec<&str> = s.split(['-', '/']).collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let (y, m, d) = if s.contains('-') {
        (num(parts[0])?, num(parts[1])?, num(parts[2])?)
    } else {
        (num(parts[2])?, num(parts[0])?, num(parts[1])?)
    };
    if !(1..=12).contains(&m) || !(1..=31).contains(&d) {
        return Err(bad());
    }
    Ok((y as i32, m, d))
}

fn parse_code(cell: &str, what: &str) -> Result<u8> {
    let v: f64 = cell
        .trim()
        .parse()
        .map_err(|_| Error::Data(format!("transform code {cell:?} for {what} is not a number")))?;
    if v.fract() != 0.0 || !(1.0..=7.0).contains(&v) {
        return Err(Error::Data(format!("transform code {cell:?} for {what} is outside 1..7")));
    }
    Ok(v as u8)
}

fn read_sidecar(path: &Path) -> Result<HashMap<String, u8>> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut out = HashMap::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Data(format!("sidecar line {} needs name,tcode", line + 1)));
        }
        // tolerate a header line
        if line == 0 && rec[1].trim().parse::<f64>().is_err() {
            continue;
        }
        out.insert(rec[0].trim().to_string(), parse_code(&rec[1], &rec[0])?);
    }
    Ok(out)
}

/// Parse a panel. Empty cells become NaN; anything else unparseable is an
/// error naming the row and column. Rows come back in date order.
pub fn load_panel(path: &Path, source: &TcodeSource) -> Result<Panel> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_path(path)?;
    let header = r.headers()?.clone();
    if header.len() < 2 {
        return Err(Error::Data("panel needs a date column and at least one series".into()));
    }
    let names: Vec<String> = header.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let mut records = r.records();
    let tcodes: Vec<u8> = match source {
        TcodeSource::HeaderRow => {
            let rec = records
                .next()
                .ok_or_else(|| Error::Data("missing transform-code row".into()))??;
            names
                .iter()
                .enumerate()
                .map(|(j, n)| {
                    let cell = rec.get(j + 1).unwrap_or("");
                    if cell.trim().is_empty() {
                        Err(Error::Data(format!("missing transform code for {n}")))
                    } else {
                        parse_code(cell, n)
                    }
                })
                .collect::<Result<_>>()?
        }
        TcodeSource::Sidecar(p) => {
            let map = read_sidecar(p)?;
            names
                .iter()
                .map(|n| map.get(n).copied().ok_or_else(|| Error::Data(format!("missing transform code for {n}"))))
                .collect::<Result<_>>()?
        }
    };
    let mut rows: Vec<((i32, u32, u32), String, Vec<f64>)> = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec?;
        // file line: header, optional code row, then data
        let file_row = line + if *source == TcodeSource::HeaderRow { 3 } else { 2 };
        let date = rec[0].trim().to_string();
        if date.is_empty() && rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let key = date_key(&date).map_err(|e| Error::Data(format!("row {file_row}: {e}")))?;
        let vals = names
            .iter()
            .enumerate()
            .map(|(j, n)| {
                let cell = rec.get(j + 1).unwrap_or("").trim();
                if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
                    Ok(f64::NAN)
                } else {
                    cell.parse::<f64>()
                        .map_err(|_| Error::Data(format!("row {file_row}, column {n}: cannot parse {cell:?}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push((key, date, vals));
    }
    rows.sort_by_key(|r| r.0);
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!("duplicate date {} / {}", w[0].1, w[1].1)));
    }
    let m = names.len();
    let values = DMatrix::from_fn(rows.len(), m, |t, j| rows[t].2[j]);
    let dates = rows.into_iter().map(|r| r.1).collect();
    Panel::new(dates, names, values, tcodes)
}

/// Leading entries left undefined by a transform code.
pub fn leading_undefined(tcode: u8) -> usize {
    match tcode {
        1 | 4 => 0,
        2 | 5 => 1,
        _ => 2,
    }
}

/// Apply one transform code; undefined leading entries are `None`.
/// `name` only labels errors.
pub fn apply_transform(series: &[f64], tcode: u8, name: &str) -> Result<Vec<Option<f64>>> {
    if !(1..=7).contains(&tcode) {
        return Err(Error::Data(format!("{name}: transform code {tcode} is outside 1..7")));
    }
    let x: Vec<f64> = if (4..=6).contains(&tcode) {
        if let Some((t, v)) = series.iter().enumerate().find(|(_, v)| !v.is_nan() && **v <= 0.0) {
            return Err(Error::Data(format!("{name}: log transform of nonpositive value {v} at row {t}")));
        }
        series.iter().map(|v| v.ln()).collect()
    } else {
        series.to_vec()
    };
    let diff = |v: &[Option<f64>]| -> Vec<Option<f64>> {
        std::iter::once(None)
            .chain(v.windows(2).map(|w| Some(w[1]? - w[0]?)))
            .collect()
    };
    let base: Vec<Option<f64>> = x.iter().map(|&v| Some(v)).collect();
    Ok(match tcode {
        1 | 4 => base,
        2 | 5 => diff(&base),
        3 | 6 => diff(&diff(&base)),
        _ => {
            let growth: Vec<Option<f64>> = std::iter::once(None)
                .chain(x.windows(2).map(|w| Some(w[1] / w[0] - 1.0)))
                .collect();
            diff(&growth)
        }
    })
}

/// Transform every column and drop the leading rows any code leaves
/// undefined. Missing values that survive trimming are an error.
pub fn transform_panel(raw: &Panel) -> Result<Panel> {
    let lead = raw.tcodes.iter().map(|&c| leading_undefined(c)).max().unwrap_or(0);
    if raw.t() <= lead {
        return Err(Error::Data(format!("{} rows cannot absorb {lead} transform-induced leading rows", raw.t())));
    }
    let n = raw.t() - lead;
    let mut values = DMatrix::zeros(n, raw.m());
    for j in 0..raw.m() {
        let col: Vec<f64> = raw.values.column(j).iter().copied().collect();
        let tr = apply_transform(&col, raw.tcodes[j], &raw.names[j])?;
        for t in 0..n {
            values[(t, j)] = match tr[t + lead] {
                Some(v) if v.is_finite() => v,
                _ => {
                    return Err(Error::Data(format!(
                        "{}: missing or undefined value at {} after transformation",
                        raw.names[j],
                        raw.dates[t + lead]
                    )))
                }
            };
        }
    }
    Panel::new(raw.dates[lead..].to_vec(), raw.names.clone(), values, raw.tcodes.clone())
}

/// Per-column z-scoring with population moments. Any existing scale is
/// composed so that [`back_transform`] always returns the pre-scaling data.
pub fn standardize(panel: &Panel) -> Result<Panel> {
    let n = panel.t();
    if n == 0 {
        return Err(Error::Data("cannot standardize an empty panel".into()));
    }
    let mut out = panel.clone();
    let mut scales = Vec::with_capacity(panel.m());
    for j in 0..panel.m() {
        let col = panel.values.column(j);
        let mean = col.sum() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        if !(sd > 0.0) || !sd.is_finite() {
            return Err(Error::Data(format!("series {} has zero or undefined variance", panel.names[j])));
        }
        out.values.column_mut(j).iter_mut().for_each(|v| *v = (*v - mean) / sd);
        let s = match &panel.scale_info {
            Some(prev) => Scale { mean: prev[j].mean + prev[j].sd * mean, sd: prev[j].sd * sd },
            None => Scale { mean, sd },
        };
        scales.push(s);
    }
    out.scale_info = Some(scales);
    Ok(out)
}

/// Undo standardization.
pub fn back_transform(panel: &Panel) -> DMatrix<f64> {
    match &panel.scale_info {
        None => panel.values.clone(),
        Some(s) => DMatrix::from_fn(panel.t(), panel.m(), |t, j| panel.values[(t, j)] * s[j].sd + s[j].mean),
    }
}

/// Transform, trim and standardize.
pub fn prepare(raw: &Panel) -> Result<Panel> {
    standardize(&transform_panel(raw)?)
}
