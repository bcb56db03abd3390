//! Artifact writers. Numbers are written as `{:.16e}` (17 significant digits)
//! with `\n` line endings so identical runs produce identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;

pub const OUT_ENV: &str = "GAUGEKIT_OUT";

/// `--out`, then `$GAUGEKIT_OUT`, then the config's `output`, then `./gaugekit_out`.
pub fn resolve_dir(flag: Option<&Path>, config: Option<&Path>) -> PathBuf {
    if let Some(dir) = flag {
        return dir.to_path_buf();
    }
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    config
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("gaugekit_out"))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

/// Gauge parameter as it appears in file names, e.g. `0.25`.
pub fn alpha_tag(alpha: f64) -> String {
    format!("{alpha}")
}

/// A numeric table with a header row.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let csv_err = |source| CliError::Csv {
            path: path.to_path_buf(),
            source,
        };
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(csv_err)?;
        writer.write_record(&self.header).map_err(csv_err)?;
        for row in &self.rows {
            writer
                .write_record(row.iter().map(|&x| number(x)))
                .map_err(csv_err)?;
        }
        writer.flush().map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_carry_seventeen_digits() {
        assert_eq!(number(0.1), "1.0000000000000001e-1");
        assert_eq!(number(-2.0), "-2.0000000000000000e0");
        assert_eq!(alpha_tag(0.25), "0.25");
        assert_eq!(alpha_tag(1.0), "1");
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec![1.0, 0.5]);
        t.write(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "a,b\n1.0000000000000000e0,5.0000000000000000e-1\n");
    }
}
