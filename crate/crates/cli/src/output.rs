use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

/// A rectangular result with named columns and extra metadata.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub metadata: BTreeMap<String, Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table { columns: columns.iter().map(|c| c.to_string()).collect(), ..Default::default() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn json(&self, cfg: &RunConfig) -> Result<String, CliError> {
        let mut meta = serde_json::Map::new();
        meta.insert("seed".into(), json!(cfg.seed));
        meta.insert(
            "versions".into(),
            json!({ "biortho-cli": env!("CARGO_PKG_VERSION"), "biortho-core": biortho_core::VERSION }),
        );
        meta.insert("columns".into(), json!(self.columns));
        for (k, v) in &self.metadata {
            meta.insert(k.clone(), v.clone());
        }
        let doc = json!({
            "params": cfg,
            "grid": cfg.grid,
            "values": self.rows,
            "metadata": meta,
        });
        serde_json::to_string_pretty(&doc).map_err(|e| CliError::Numeric(format!("cannot encode JSON: {e}")))
    }
}

/// A table plus any checks that failed while producing it.
pub struct Outcome {
    pub table: Table,
    pub failures: Vec<String>,
}

pub fn emit(cfg: &RunConfig, table: &Table) -> Result<(), CliError> {
    let mut text = match cfg.format {
        Format::Csv => table.csv(),
        Format::Json => table.json(cfg)?,
    };
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match &cfg.out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).or_else(|e| {
                if e.kind() == std::io::ErrorKind::BrokenPipe {
                    Ok(())
                } else {
                    Err(CliError::Usage(format!("cannot write output: {e}")))
                }
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_header_and_seventeen_digits() {
        let mut t = Table::new(&["x", "value"]);
        t.push(vec![0.1.into(), (1.0 / 3.0).into()]);
        let s = t.csv();
        let mut lines = s.lines();
        assert_eq!(lines.next(), Some("x,value"));
        let row = lines.next().unwrap();
        let value = row.split(',').nth(1).unwrap();
        assert_eq!(value, "3.3333333333333331e-1");
        assert_eq!(value.parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
