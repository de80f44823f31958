//! Command implementations behind the `geolex` binary.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 bad input or
//! arguments, 3 nothing left after filtering, 4 solver stopped before
//! converging (outputs are still written).

use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};

use geolex::corpus::{FilterSpec, RecordFormat, RegionMask};
use geolex::PcpConfig;
use serde::Deserialize;
use thiserror::Error;

pub mod commands;

pub const EXIT_IO: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_FILTER_EMPTY: u8 = 3;
pub const EXIT_NOT_CONVERGED: u8 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    FilterEmpty(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Io(_) => EXIT_IO,
            CliError::FilterEmpty(_) => EXIT_FILTER_EMPTY,
        }
    }
}

/// Wraps a failure to read or interpret something the user supplied.
pub fn input<E: Display>(e: E) -> CliError {
    CliError::Input(e.to_string())
}

/// Wraps a failure to write results.
pub fn output<E: Display>(e: E) -> CliError {
    CliError::Io(e.to_string())
}

/// How a successful command finished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Done,
    NotConverged,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Done => 0,
            Outcome::NotConverged => EXIT_NOT_CONVERGED,
        }
    }
}

/// Filter thresholds that may each be left unset.
#[derive(Debug, Clone, Copy, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterOverrides {
    pub cell_min_tokens: Option<u64>,
    pub cell_min_distinct: Option<usize>,
    pub word_min_total: Option<u64>,
    pub word_min_cells: Option<usize>,
}

impl FilterOverrides {
    pub fn apply(&self, mut f: FilterSpec) -> FilterSpec {
        if let Some(v) = self.cell_min_tokens {
            f.cell_min_tokens = v;
        }
        if let Some(v) = self.cell_min_distinct {
            f.cell_min_distinct = v;
        }
        if let Some(v) = self.word_min_total {
            f.word_min_total = v;
        }
        if let Some(v) = self.word_min_cells {
            f.word_min_cells = v;
        }
        f
    }
}

/// Contents of the optional `--config` TOML file. Command-line flags take
/// precedence over every field.
///
/// ```toml
/// data_dir = "/data/geo"
/// level = 6
/// format = "jsonl"
/// preset = "usa"
/// segments = 4
/// mask = { bounding_box = { min_lon = -125.0, min_lat = 24.0, max_lon = -66.0, max_lat = 50.0 } }
///
/// [filter]
/// word_min_cells = 100
///
/// [pcp]
/// tol_delta = 1e-7
/// max_iter = 500
/// ```
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub data_dir: Option<PathBuf>,
    pub level: Option<u32>,
    pub format: Option<RecordFormat>,
    pub preset: Option<String>,
    pub mask: Option<RegionMask>,
    pub segments: Option<u32>,
    #[serde(default)]
    pub filter: FilterOverrides,
    #[serde(default)]
    pub pcp: PcpConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| input(format!("{}: {e}", path.display())))
    }
}

/// Settings shared by every command.
#[derive(Debug, Clone, Default)]
pub struct Context {
    pub data_dir: Option<PathBuf>,
    pub config: FileConfig,
}

impl Context {
    /// `data_dir` comes from the flag or environment; the config file's
    /// value is the fallback.
    pub fn new(data_dir: Option<PathBuf>, config: FileConfig) -> Self {
        let data_dir = data_dir.or_else(|| config.data_dir.clone());
        Context { data_dir, config }
    }

    /// Relative paths are taken from the data directory when one is set.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(d) if p.is_relative() => d.join(p),
            _ => p.to_path_buf(),
        }
    }
}
