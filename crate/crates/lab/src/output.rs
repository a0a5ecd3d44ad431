//! CSV tables and the `KEY: value` summary.

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use precursor_core::analysis::SweepRecord;
use precursor_core::grid::SampledSignal;

use crate::error::LabError;

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Depth as it appears in file names: `signal_z100.csv`, `signal_z0.5.csv`.
pub fn z_tag(z: f64) -> String {
    format!("{z}")
}

pub fn write_table(path: &Path, header: &[&str], columns: &[&[f64]]) -> Result<(), LabError> {
    let wrap = |source| LabError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(header).map_err(wrap)?;
    let rows = columns.first().map_or(0, |c| c.len());
    for i in 0..rows {
        w.write_record(columns.iter().map(|c| fmt_f64(c[i]))).map_err(wrap)?;
    }
    w.flush().map_err(|source| LabError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_signal(path: &Path, signal: &SampledSignal) -> Result<(), LabError> {
    let t: Vec<f64> = signal.grid().times().collect();
    write_table(path, &["t", "f"], &[&t, signal.values()])
}

pub fn write_sweep(path: &Path, records: &[SweepRecord]) -> Result<(), LabError> {
    let col = |f: fn(&SweepRecord) -> f64| records.iter().map(f).collect::<Vec<_>>();
    write_table(
        path,
        &["z", "t_peak", "peak_amp", "rms_width", "energy_ratio"],
        &[
            &col(|r| r.z),
            &col(|r| r.t_peak),
            &col(|r| r.peak_amp),
            &col(|r| r.rms_width),
            &col(|r| r.energy),
        ],
    )
}

#[derive(Debug, Default, Clone)]
pub struct Summary {
    lines: Vec<(String, String)>,
}

impl Summary {
    pub fn put(&mut self, key: &str, value: impl Display) {
        self.lines.push((key.to_string(), value.to_string()));
    }

    /// Plain decimals for moderate magnitudes, exponent form otherwise.
    pub fn put_num(&mut self, key: &str, x: f64) {
        let a = x.abs();
        let text = if a == 0.0 || (1e-3..1e7).contains(&a) || !a.is_finite() {
            format!("{x}")
        } else {
            format!("{x:e}")
        };
        self.put(key, text);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.lines.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn lines(&self) -> &[(String, String)] {
        &self.lines
    }

    pub fn render(&self) -> String {
        self.lines.iter().map(|(k, v)| format!("{k}: {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<(), LabError> {
        fs::write(path, self.render()).map_err(|source| LabError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf, LabError> {
    fs::create_dir_all(dir).map_err(|source| LabError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(dir.to_path_buf())
}
