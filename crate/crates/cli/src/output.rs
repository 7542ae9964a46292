//! Output directory handling, the run manifest and the HTML pivot report.

use crate::error::{CliError, Result};
use hugevar::dgp::PivotCell;
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const BUILD: &str = env!("HUGEVAR_GIT_DESCRIBE");

/// An output directory that remembers which files were written.
#[derive(Debug)]
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(OutDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn files(&self) -> &[String] {
        &self.written
    }

    /// Write a CSV from a header and rows of already-formatted cells.
    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let path = self.path(name);
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        }
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for r in rows {
            w.write_record(r.into_iter().collect::<Vec<_>>())?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.path(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Write `manifest.json` listing every file written so far.
    pub fn manifest<C: Serialize>(&mut self, subcommand: &str, seed: u64, config: &C) -> Result<()> {
        let m = Manifest {
            tool: "hugevar",
            version: env!("CARGO_PKG_VERSION"),
            build: BUILD,
            subcommand,
            seed,
            config,
            outputs: &self.written,
        };
        let body = serde_json::to_string_pretty(&m)? + "\n";
        self.text("manifest.json", &body)
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    build: &'static str,
    subcommand: &'a str,
    seed: u64,
    config: &'a C,
    outputs: &'a [String],
}

/// Shortest representation that parses back to the same value, in
/// exponent form outside `[1e-4, 1e15)`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e15).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Background colour for a relative RMSE: white at 1, deepening red above
/// and green below, saturating at a factor of 4 either way.
fn shade(rel: f64) -> String {
    let s = (rel.ln() / 4f64.ln()).clamp(-1.0, 1.0);
    let fade = |v: f64| (255.0 - 150.0 * v.abs()).round() as u8;
    let (r, g, b) = if s >= 0.0 { (255, fade(s), fade(s)) } else { (fade(s), 255, fade(s)) };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Heat-shaded relative-RMSE table: one row per estimator, one column per
/// (scenario, T, m) cell.
pub fn pivot_html(cells: &[PivotCell]) -> String {
    let mut cols: Vec<(String, usize, usize)> = Vec::new();
    let mut rows: Vec<&'static str> = Vec::new();
    for c in cells {
        let key = (c.scenario.to_string(), c.t, c.m);
        if !cols.contains(&key) {
            cols.push(key);
        }
        if !rows.contains(&c.estimator.label()) {
            rows.push(c.estimator.label());
        }
    }
    let mut h = String::from(
        "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\"><title>Relative RMSE</title>\n<style>\
         table{border-collapse:collapse;font-family:sans-serif}td,th{border:1px solid #999;padding:4px 8px;text-align:right}\
         </style></head><body>\n<h1>Median RMSE relative to DL(1/K)</h1>\n<table>\n<tr><th>estimator</th>",
    );
    for (s, t, m) in &cols {
        let _ = write!(h, "<th>{s}<br>T={t}<br>m={m}</th>");
    }
    h.push_str("</tr>\n");
    for r in &rows {
        let _ = write!(h, "<tr><th>{r}</th>");
        for (s, t, m) in &cols {
            let cell = cells
                .iter()
                .find(|c| c.estimator.label() == *r && c.scenario.to_string() == *s && c.t == *t && c.m == *m);
            match cell {
                Some(c) if c.dne => h.push_str("<td>DNE</td>"),
                Some(PivotCell { relative: Some(v), .. }) => {
                    let _ = write!(h, "<td style=\"background:{}\">{v:.3}</td>", shade(*v));
                }
                _ => h.push_str("<td></td>"),
            }
        }
        h.push_str("</tr>\n");
    }
    h.push_str("</table>\n</body></html>\n");
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shading_is_symmetric_in_log_scale() {
        assert_eq!(shade(1.0), "#ffffff");
        assert_eq!(shade(4.0), "#ff6969");
        assert_eq!(shade(0.25), "#69ff69");
        assert_eq!(shade(100.0), shade(4.0));
    }

    #[test]
    fn numbers_round_trip() {
        for x in [0.1 + 0.2, 1e-300, -3.5, 1.0 / 3.0, 5.5e-26, -2e20, 0.0] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(5.5e-26), "5.5e-26");
        assert_eq!(num(0.25), "0.25");
    }
}
