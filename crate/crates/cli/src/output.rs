//! Table formatting and the run manifest header.

use std::fmt::Write as _;
use std::path::Path;

use opo_ng::config::RunConfig;
use opo_ng::Result;

pub enum Cell {
    Text(String),
    Num(f64),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    Cell::Text(s) => s.clone(),
                    Cell::Num(v) => format!("{v:.16e}"),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// Header recorded in front of every table.
pub struct RunManifest<'a> {
    pub subcommand: &'a str,
    pub config: &'a RunConfig,
    pub seed: Option<u64>,
    pub extra: Vec<(String, String)>,
}

impl RunManifest<'_> {
    fn header(&self) -> String {
        let mut h = String::new();
        let _ = writeln!(h, "# opo-ng {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(h, "# subcommand: {}", self.subcommand);
        let _ = writeln!(h, "# timestamp: {}", chrono::Utc::now().to_rfc3339());
        if let Some(s) = self.seed {
            let _ = writeln!(h, "# seed: {s}");
        }
        for (k, v) in &self.extra {
            let _ = writeln!(h, "# {k}: {v}");
        }
        for line in self.config.to_lines() {
            let _ = writeln!(h, "# config: {line}");
        }
        h
    }
}

pub fn emit(manifest: &RunManifest, table: &Table, out: Option<&Path>) -> Result<()> {
    let text = manifest.header() + &table.body();
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}
