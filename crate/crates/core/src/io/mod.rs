//! Configuration parsing, CSV files and SVG figures for the command line.

pub mod config;
pub mod csv;
pub mod figure;
mod svg;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use self::config::{parse_config, ConfigFlags, RunConfig, Study, StudyGrid};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("config error at `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("replicate file is missing column `{0}`")]
    MissingColumn(String),

    #[error("line {line}: {reason}")]
    Parse { line: u64, reason: String },

    #[error("facet mismatch: {0}")]
    FacetMismatch(String),

    #[error("{}: {source}", path.display())]
    File { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Csv(#[from] ::csv::Error),

    #[error(transparent)]
    Model(#[from] crate::Error),
}

impl IoError {
    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        IoError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    /// 1 for bad input (configuration or malformed files), 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            IoError::Config { .. } | IoError::MissingColumn(_) | IoError::Parse { .. } => 1,
            _ => 2,
        }
    }
}

pub(crate) fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::File {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(file_err(dir))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(file_err(&tmp))?;
    std::fs::rename(&tmp, path).map_err(file_err(path))
}

/// Decimal text with at most `digits` significant digits, trailing zeros
/// removed.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{v:.decimals$}"))
    } else {
        let s = format!("{:.*e}", digits - 1, v);
        match s.split_once('e') {
            Some((mantissa, e)) => format!("{}e{e}", trim_zeros(mantissa.to_string())),
            None => s,
        }
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" {
            "0".to_string()
        } else {
            t.to_string()
        }
    } else {
        s
    }
}

/// Ten significant digits, the precision of every real in output CSVs.
pub fn format_real(v: f64) -> String {
    format_sig(v, 10)
}
