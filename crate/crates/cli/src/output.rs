//! Artifact writers. Every float goes through [`num`], so reruns are byte-identical.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use plsrod::kinematics::centerline;
use plsrod::rod::Rod;

use crate::error::CliError;

/// Nine significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

pub struct Artifacts {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let fail = |e: csv::Error| CliError::io(&path, e);
        let mut w = csv::Writer::from_path(&path).map_err(fail)?;
        w.write_record(header).map_err(fail)?;
        for row in rows {
            w.write_record(row).map_err(fail)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| CliError::io(&path, e))?;
        self.written.push(path);
        Ok(())
    }
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

/// Rows `(X, x, y, z, qw, qx, qy, qz)` at `samples` uniformly spaced stations.
pub fn centerline_rows(rod: &Rod, q: &DVector<f64>, samples: usize) -> Result<Vec<Vec<String>>, CliError> {
    Ok(centerline(rod, q, samples)?
        .into_iter()
        .map(|(x, pose)| {
            let p = pose.translation;
            let r = pose.quaternion();
            [x, p.x, p.y, p.z, r.w, r.i, r.j, r.k].iter().map(|v| num(*v)).collect()
        })
        .collect())
}

pub fn centerline_header() -> Vec<String> {
    header(&["X", "x", "y", "z", "qw", "qx", "qy", "qz"])
}
