//! On-disk layouts. Each artifact is a directory of plain text files:
//!
//! - counts: `vocab.txt`, `cells.txt`, `counts.csv` (`row,col,count` triples
//!   with a header line);
//! - frequency matrix: `vocab.txt`, `cells.txt`, `matrix.csv` (dense, one
//!   word per line), `cell_tokens.txt` (token total per cell before
//!   normalization);
//! - component model: `vocab.txt`, `cells.txt`, `u.csv`, `sigma.csv`,
//!   `v.csv`, `model.json`.
//!
//! Word and cell files hold one entry per line, in row/column order.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisError, ComponentModel, SourceTag};
use crate::corpus::{CellList, CorpusError, CountMatrix, FrequencyMatrix, Vocabulary};
use crate::htm::TrixelId;
use crate::linalg::text::{format_g17, read_dense_csv, write_dense_csv, TextError};
use crate::linalg::DenseMatrix;

pub const VOCAB_FILE: &str = "vocab.txt";
pub const CELLS_FILE: &str = "cells.txt";
pub const COUNTS_FILE: &str = "counts.csv";
pub const MATRIX_FILE: &str = "matrix.csv";
pub const CELL_TOKENS_FILE: &str = "cell_tokens.txt";
pub const U_FILE: &str = "u.csv";
pub const SIGMA_FILE: &str = "sigma.csv";
pub const V_FILE: &str = "v.csv";
pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, StoreError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn open(path: &Path) -> Result<BufReader<File>, StoreError> {
    Ok(BufReader::new(File::open(path).map_err(io_err(path))?))
}

pub fn write_lines<I, S>(path: &Path, lines: I) -> Result<(), StoreError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut w = create(path)?;
    for l in lines {
        writeln!(w, "{}", l.as_ref()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_lines(path: &Path) -> Result<Vec<String>, StoreError> {
    open(path)?
        .lines()
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(path))
}

fn parse_lines<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, StoreError> {
    read_lines(path)?
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(k, l)| {
            parse(l.trim()).ok_or_else(|| StoreError::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                msg: format!("cannot parse {l:?}"),
            })
        })
        .collect()
}

pub fn write_vocabulary(path: &Path, v: &Vocabulary) -> Result<(), StoreError> {
    write_lines(path, v.words())
}

pub fn read_vocabulary(path: &Path) -> Result<Vocabulary, StoreError> {
    let words = read_lines(path)?;
    // an empty vocabulary is an empty file; a lone blank line is not a word
    let words = if words.len() == 1 && words[0].is_empty() { Vec::new() } else { words };
    Ok(Vocabulary::new(words)?)
}

pub fn write_cells(path: &Path, c: &CellList) -> Result<(), StoreError> {
    write_lines(path, c.ids().iter().map(|id| id.to_string()))
}

pub fn read_cells(path: &Path) -> Result<CellList, StoreError> {
    let ids = parse_lines(path, |s| s.parse::<TrixelId>().ok())?;
    Ok(CellList::new(ids)?)
}

pub fn write_dense(path: &Path, m: &DenseMatrix) -> Result<(), StoreError> {
    write_dense_csv(m, create(path)?).map_err(io_err(path))
}

pub fn read_dense(path: &Path) -> Result<DenseMatrix, StoreError> {
    read_dense_csv(open(path)?).map_err(|e| match e {
        TextError::Io(source) => StoreError::Io {
            path: path.to_path_buf(),
            source,
        },
        TextError::Parse { line, msg } => StoreError::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        },
    })
}

pub fn write_counts(dir: &Path, w: &CountMatrix) -> Result<(), StoreError> {
    write_vocabulary(&dir.join(VOCAB_FILE), w.vocabulary())?;
    write_cells(&dir.join(CELLS_FILE), w.cells())?;
    let path = dir.join(COUNTS_FILE);
    let mut out = create(&path)?;
    writeln!(out, "row,col,count").map_err(io_err(&path))?;
    for (i, j, c) in w.triples() {
        writeln!(out, "{i},{j},{c}").map_err(io_err(&path))?;
    }
    out.flush().map_err(io_err(&path))
}

pub fn read_counts(dir: &Path) -> Result<CountMatrix, StoreError> {
    let vocab = read_vocabulary(&dir.join(VOCAB_FILE))?;
    let cells = read_cells(&dir.join(CELLS_FILE))?;
    let path = dir.join(COUNTS_FILE);
    let mut triples = Vec::new();
    for (k, line) in read_lines(&path)?.iter().enumerate() {
        let line = line.trim();
        if line.is_empty() || (k == 0 && line.starts_with("row")) {
            continue;
        }
        let bad = || StoreError::Parse {
            path: path.clone(),
            line: k + 1,
            msg: format!("expected row,col,count: {line:?}"),
        };
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let row = f[0].trim().parse().map_err(|_| bad())?;
        let col = f[1].trim().parse().map_err(|_| bad())?;
        let count = f[2].trim().parse().map_err(|_| bad())?;
        triples.push((row, col, count));
    }
    Ok(CountMatrix::from_triples(vocab, cells, triples)?)
}

pub fn write_frequency(dir: &Path, x: &FrequencyMatrix, cell_tokens: Option<&[u64]>) -> Result<(), StoreError> {
    write_vocabulary(&dir.join(VOCAB_FILE), x.vocabulary())?;
    write_cells(&dir.join(CELLS_FILE), x.cells())?;
    write_dense(&dir.join(MATRIX_FILE), x.matrix())?;
    if let Some(t) = cell_tokens {
        write_lines(&dir.join(CELL_TOKENS_FILE), t.iter().map(|v| v.to_string()))?;
    }
    Ok(())
}

pub fn read_frequency(dir: &Path) -> Result<FrequencyMatrix, StoreError> {
    let vocab = read_vocabulary(&dir.join(VOCAB_FILE))?;
    let cells = read_cells(&dir.join(CELLS_FILE))?;
    let m = read_dense(&dir.join(MATRIX_FILE))?;
    Ok(FrequencyMatrix::new(vocab, cells, m)?)
}

/// Per-cell token totals stored next to a frequency matrix, if present.
pub fn read_cell_tokens(dir: &Path) -> Result<Option<Vec<u64>>, StoreError> {
    let path = dir.join(CELL_TOKENS_FILE);
    if !path.exists() {
        return Ok(None);
    }
    parse_lines(&path, |s| s.parse().ok()).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub source: SourceTag,
    pub components: usize,
    pub words: usize,
    pub cells: usize,
}

pub fn write_model(dir: &Path, m: &ComponentModel) -> Result<(), StoreError> {
    write_vocabulary(&dir.join(VOCAB_FILE), m.vocabulary())?;
    write_cells(&dir.join(CELLS_FILE), m.cells())?;
    write_dense(&dir.join(U_FILE), m.u())?;
    write_dense(&dir.join(V_FILE), m.v())?;
    write_lines(&dir.join(SIGMA_FILE), m.sigma().iter().map(|&s| format_g17(s)))?;
    let manifest = ModelManifest {
        source: m.source(),
        components: m.components(),
        words: m.vocabulary().len(),
        cells: m.cells().len(),
    };
    let path = dir.join(MODEL_FILE);
    let mut w = create(&path)?;
    serde_json::to_writer_pretty(&mut w, &manifest).map_err(|e| io_err(&path)(e.into()))?;
    writeln!(w).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))
}

pub fn read_model(dir: &Path) -> Result<ComponentModel, StoreError> {
    let path = dir.join(MODEL_FILE);
    let manifest: ModelManifest = serde_json::from_reader(open(&path)?).map_err(|e| StoreError::Parse {
        path: path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;
    let vocab = read_vocabulary(&dir.join(VOCAB_FILE))?;
    let cells = read_cells(&dir.join(CELLS_FILE))?;
    let sigma = parse_lines(&dir.join(SIGMA_FILE), |s| s.parse::<f64>().ok())?;
    let r = sigma.len();
    let read_factor = |name: &str, rows: usize| -> Result<DenseMatrix, StoreError> {
        let m = read_dense(&dir.join(name))?;
        // a factor with zero components is stored as an empty file
        if m.shape() == (0, 0) && r == 0 {
            return Ok(DenseMatrix::zeros(rows, 0));
        }
        Ok(m)
    };
    let u = read_factor(U_FILE, vocab.len())?;
    let v = read_factor(V_FILE, cells.len())?;
    Ok(ComponentModel::from_parts(vocab, cells, u, sigma, v, manifest.source)?)
}
