//! Trajectory and equilibrium-curve serialization.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::{Context, Result};
use serde_json::{json, Map, Value};

use toric_seaqt_core::measures::EquilibriumPoint;

use crate::config::OutputFormat;
use crate::runner::{Mode, Row};

pub const TRAJECTORY_COLUMNS: [&str; 18] = [
    "time",
    "energy",
    "entropy",
    "entropy_rate",
    "beta",
    "free_energy",
    "relative_entropy",
    "rel_entropy_term_rho",
    "rel_entropy_term_rho0",
    "log_negativity",
    "magnetization",
    "magnetization_rate",
    "coherent_information",
    "geom_entropy_A",
    "geom_entropy_B",
    "purity",
    "min_eigenvalue",
    "trace_error",
];

pub const GIBBS_COLUMNS: [&str; 3] = ["beta", "energy", "entropy"];

/// Twelve significant digits in scientific notation.
pub fn format_float(x: f64) -> String {
    format!("{x:.11e}")
}

fn cells(row: &Row) -> [Option<f64>; 18] {
    let r = &row.record;
    [
        Some(row.time),
        Some(r.energy),
        Some(r.entropy),
        Some(row.entropy_rate),
        r.beta,
        r.free_energy,
        Some(r.relative_entropy),
        Some(r.rel_entropy_term_rho),
        Some(r.rel_entropy_term_rho0),
        Some(r.log_negativity),
        Some(r.magnetization),
        Some(r.magnetization_rate),
        r.coherent_information,
        Some(r.geom_entropy_a),
        Some(r.geom_entropy_b),
        Some(r.purity),
        Some(r.min_eigenvalue),
        Some(r.trace_error),
    ]
}

fn csv_line(out: &mut String, values: impl IntoIterator<Item = Option<f64>>) {
    for (k, v) in values.into_iter().enumerate() {
        if k > 0 {
            out.push(',');
        }
        if let Some(v) = v {
            out.push_str(&format_float(v));
        }
    }
    out.push('\n');
}

/// Undefined quantities (β and F on an energy-degenerate state, the
/// coherent information of a reservoir run) are empty cells.
pub fn trajectory_csv(rows: &[Row]) -> String {
    let mut out = TRAJECTORY_COLUMNS.join(",");
    out.push('\n');
    for row in rows {
        csv_line(&mut out, cells(row));
    }
    out
}

/// One object per sample; undefined quantities are `null`.
pub fn trajectory_json(rows: &[Row]) -> String {
    let records: Vec<Value> = rows
        .iter()
        .map(|row| {
            let object: Map<String, Value> = TRAJECTORY_COLUMNS
                .iter()
                .zip(cells(row))
                .map(|(name, v)| (name.to_string(), v.map_or(Value::Null, |x| json!(x))))
                .collect();
            Value::Object(object)
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&records).expect("plain values serialize");
    text.push('\n');
    text
}

pub fn trajectory_document(rows: &[Row], format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => trajectory_csv(rows),
        OutputFormat::Json => trajectory_json(rows),
    }
}

pub fn gibbs_csv(points: &[EquilibriumPoint]) -> String {
    let mut out = GIBBS_COLUMNS.join(",");
    out.push('\n');
    for p in points {
        csv_line(&mut out, [Some(p.beta), Some(p.energy), Some(p.entropy)]);
    }
    out
}

pub fn trajectory_file_name(lattice_tag: &str, p_x: f64, mode: Mode, format: OutputFormat) -> String {
    let mut name = String::new();
    write!(name, "{lattice_tag}_px{p_x}_{}.{}", mode.name(), format.extension()).expect("writing to a String");
    name
}

pub fn gibbs_file_name(lattice_tag: &str) -> String {
    format!("{lattice_tag}_gibbs_curve.csv")
}

/// Writes through a sibling temporary file and renames it into place, so a
/// reader never observes a partially written file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let file_name = path.file_name().context("output path has no file name")?.to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let result = (|| -> Result<()> {
        let mut file = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        file.write_all(contents)?;
        file.sync_all()?;
        std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
        Ok(())
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}
