//! CSV and JSON output. CSV numbers carry 17 significant digits, lines end
//! in LF, and the first line is a `#` comment with the config hash and version.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn csv_string(prov: &Provenance, header: &[&str], rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# config_hash={} version={}", prov.config_hash, prov.version);
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|&v| fmt_num(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, prov: &Provenance, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    std::fs::write(path, csv_string(prov, header, rows))?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}
