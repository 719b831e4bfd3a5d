//! Report files, plot data and the run manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> io::Result<Self> {
        fs::create_dir_all(root)?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> io::Result<PathBuf> {
        let path = self.root.join(name);
        fs::write(&path, text)?;
        self.written.push(path.clone());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Whitespace separated two-column plot data.
    pub fn write_columns(&mut self, name: &str, header: &str, rows: &[(f64, f64)]) -> io::Result<PathBuf> {
        let mut text = format!("# {header}\n");
        for (a, b) in rows {
            let _ = writeln!(text, "{a} {b}");
        }
        self.write_text(name, &text)
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub artifact_version: String,
    /// Seconds since the Unix epoch; null under `--no-timestamp`.
    pub timestamp_unix: Option<u64>,
    pub config_path: String,
    pub config: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub seeds: Vec<u64>,
    pub durations_ms: BTreeMap<String, u64>,
    pub workers: usize,
    pub exit_code: i32,
}

/// Histogram of standardized values on `[−4, 4]` in `bins` bins, as
/// `(center, density)` rows.
pub fn standardized_histogram(values: &[f64], mean: f64, sd: f64, bins: usize) -> Vec<(f64, f64)> {
    let (lo, hi) = (-4.0, 4.0);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for v in values {
        let z = (v - mean) / sd;
        if z >= lo && z < hi {
            counts[((z - lo) / width) as usize] += 1;
        }
    }
    counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (lo + (i as f64 + 0.5) * width, c as f64 / (values.len() as f64 * width)))
        .collect()
}

pub fn normal_density_curve(points: usize) -> Vec<(f64, f64)> {
    (0..points)
        .map(|i| {
            let x = -4.0 + 8.0 * i as f64 / (points - 1) as f64;
            (x, (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt())
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_integrates_to_captured_mass() {
        let values: Vec<f64> = (0..1000).map(|i| (i as f64 / 999.0 - 0.5) * 3.0).collect();
        let h = standardized_histogram(&values, 0.0, 1.0, 40);
        assert_eq!(h.len(), 40);
        let mass: f64 = h.iter().map(|r| r.1 * 0.2).sum();
        assert!((mass - 1.0).abs() < 1e-12);
        assert!((h[0].0 + 3.9).abs() < 1e-12);
    }

    #[test]
    fn written_files_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(&dir.path().join("nested")).unwrap();
        out.write_columns("a.dat", "x y", &[(1.0, 2.5)]).unwrap();
        out.write_json("b.json", &vec![1, 2]).unwrap();
        assert_eq!(out.written().len(), 2);
        assert_eq!(fs::read_to_string(&out.written()[0]).unwrap(), "# x y\n1 2.5\n");
        assert!(out.written().iter().all(|p| p.exists()));
    }
}
