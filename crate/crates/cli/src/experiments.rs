//! Experiment tables: one tension column per cable followed by the measured tip.
//!
//! The tip columns are named `x_m, y_m, z_m` or `x_cm, y_cm, z_cm`; the suffix declares
//! the unit. Every other column is read as a tension in newtons, in file order.

use std::path::Path;

use nalgebra::Vector3;
use plsrod::identification::Experiment;

use crate::error::CliError;

pub fn read(path: &Path, cables: usize) -> Result<Vec<Experiment>, CliError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| CliError::io(path, e))?;
    let headers = reader.headers().map_err(|e| CliError::data(path, e.to_string()))?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (columns, scale) = match (find("x_m"), find("x_cm")) {
        (Some(_), None) => (["x_m", "y_m", "z_m"], 1.0),
        (None, Some(_)) => (["x_cm", "y_cm", "z_cm"], 0.01),
        _ => {
            return Err(CliError::data(path, "need exactly one of the tip column sets x_m/y_m/z_m and x_cm/y_cm/z_cm"))
        }
    };
    let tip_cols = columns
        .iter()
        .map(|c| find(c).ok_or_else(|| CliError::data(path, format!("missing column `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let tension_cols: Vec<usize> = (0..headers.len()).filter(|i| !tip_cols.contains(i)).collect();
    if tension_cols.len() != cables {
        return Err(CliError::data(path, format!("{} tension columns for {cables} cables", tension_cols.len())));
    }
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::data(path, e.to_string()))?;
        let value = |i: usize| -> Result<f64, CliError> {
            let field = record.get(i).unwrap_or("").trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| CliError::data(path, format!("row {}: `{field}` is not a finite number", line + 1)))
        };
        let tensions = tension_cols.iter().map(|&i| value(i)).collect::<Result<Vec<_>, _>>()?;
        let tip = Vector3::new(value(tip_cols[0])?, value(tip_cols[1])?, value(tip_cols[2])?) * scale;
        out.push(Experiment { tensions, tip });
    }
    if out.is_empty() {
        return Err(CliError::data(path, "no experiments"));
    }
    Ok(out)
}
