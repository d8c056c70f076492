use std::io::Write;

use cds_core::SCHEMA_VERSION;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Fixed columns, string cells. Exact values are formatted by the caller.
#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub schema_version: u32,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table {
            schema_version: SCHEMA_VERSION,
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = Vec<String>>) {
        for r in rows {
            self.push(r);
        }
    }

    /// CSV carries the schema version as its first column.
    pub fn write(&self, format: Format, out: &mut dyn Write) -> std::io::Result<()> {
        match format {
            Format::Csv => {
                let mut w = csv::Writer::from_writer(out);
                let mut header = vec!["schema_version"];
                header.extend(&self.columns);
                w.write_record(&header)?;
                let version = self.schema_version.to_string();
                for r in &self.rows {
                    w.write_record(std::iter::once(&version).chain(r))?;
                }
                w.flush()
            }
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, self)?;
                writeln!(out)
            }
        }
    }
}
