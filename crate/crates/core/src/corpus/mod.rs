//! Word-by-cell count matrices built from geotagged documents, their
//! filtering, and normalization to relative frequencies.

mod ingest;
mod tokenize;

pub use ingest::{ingest, read_records, CountAccumulator, IngestStats, RecordError, RecordFormat, RegionMask};
pub use tokenize::tokenize;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::htm::{GeoPoint, HtmError, TrixelId};
use crate::linalg::DenseMatrix;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("duplicate word {0:?} in vocabulary")]
    DuplicateWord(String),
    #[error("duplicate cell {0} in cell list")]
    DuplicateCell(TrixelId),
    #[error("entry ({row}, {col}) outside a {rows}x{cols} count matrix")]
    EntryOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },
    #[error("nothing survives filtering: {cells} cells, {words} words left")]
    EmptyAfterFilter { cells: usize, words: usize },
    #[error("cell {0} has no tokens and cannot be normalized")]
    ZeroColumn(TrixelId),
    #[error("frequency entry ({row}, {col}) = {value} outside [0, 1]")]
    BadFrequency { row: usize, col: usize, value: f64 },
    #[error("column {col} of a frequency matrix sums to {sum}")]
    NotStochastic { col: usize, sum: f64 },
    #[error("frequency matrix is {got:?} but sidecars describe {want:?}")]
    ShapeMismatch { got: (usize, usize), want: (usize, usize) },
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
    #[error(transparent)]
    Htm(#[from] HtmError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A geotagged text.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub text: String,
    pub point: GeoPoint,
    pub id: Option<String>,
}

impl Document {
    pub fn new(text: impl Into<String>, point: GeoPoint) -> Self {
        Document {
            text: text.into(),
            point,
            id: None,
        }
    }
}

/// Ordered distinct words with a reverse index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn new(words: Vec<String>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(words.len());
        for (i, w) in words.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(CorpusError::DuplicateWord(w.clone()));
            }
        }
        Ok(Vocabulary { words, index })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn get(&self, i: usize) -> &str {
        &self.words[i]
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn select(&self, keep: &[usize]) -> Vocabulary {
        Vocabulary::new(keep.iter().map(|&i| self.words[i].clone()).collect())
            .expect("subset of distinct words")
    }
}

/// Ordered distinct cells with a reverse index.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CellList {
    cells: Vec<TrixelId>,
    index: HashMap<TrixelId, usize>,
}

impl CellList {
    pub fn new(cells: Vec<TrixelId>) -> Result<Self, CorpusError> {
        let mut index = HashMap::with_capacity(cells.len());
        for (j, &c) in cells.iter().enumerate() {
            if index.insert(c, j).is_some() {
                return Err(CorpusError::DuplicateCell(c));
            }
        }
        Ok(CellList { cells, index })
    }

    pub fn ids(&self) -> &[TrixelId] {
        &self.cells
    }

    pub fn get(&self, j: usize) -> TrixelId {
        self.cells[j]
    }

    pub fn index_of(&self, id: TrixelId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    fn select(&self, keep: &[usize]) -> CellList {
        CellList::new(keep.iter().map(|&j| self.cells[j]).collect()).expect("subset of distinct cells")
    }
}

/// Sparse word×cell occurrence counts with cached marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct CountMatrix {
    vocab: Vocabulary,
    cells: CellList,
    /// Per cell, `(row, count)` pairs sorted by row; counts are positive.
    columns: Vec<Vec<(usize, u64)>>,
    cell_totals: Vec<u64>,
    cell_distinct: Vec<usize>,
    word_totals: Vec<u64>,
    word_cells: Vec<usize>,
}

impl CountMatrix {
    /// Builds a matrix from `(row, col, count)` triples. Repeated positions
    /// add up; zero counts are dropped.
    pub fn from_triples(
        vocab: Vocabulary,
        cells: CellList,
        triples: impl IntoIterator<Item = (usize, usize, u64)>,
    ) -> Result<Self, CorpusError> {
        let (rows, cols) = (vocab.len(), cells.len());
        let mut columns: Vec<Vec<(usize, u64)>> = vec![Vec::new(); cols];
        for (row, col, count) in triples {
            if row >= rows || col >= cols {
                return Err(CorpusError::EntryOutOfRange { row, col, rows, cols });
            }
            if count > 0 {
                columns[col].push((row, count));
            }
        }
        for c in &mut columns {
            c.sort_unstable_by_key(|&(r, _)| r);
            c.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Ok(Self::with_columns(vocab, cells, columns))
    }

    fn with_columns(vocab: Vocabulary, cells: CellList, columns: Vec<Vec<(usize, u64)>>) -> Self {
        let mut word_totals = vec![0u64; vocab.len()];
        let mut word_cells = vec![0usize; vocab.len()];
        let mut cell_totals = Vec::with_capacity(columns.len());
        let mut cell_distinct = Vec::with_capacity(columns.len());
        for col in &columns {
            cell_totals.push(col.iter().map(|&(_, c)| c).sum());
            cell_distinct.push(col.len());
            for &(r, c) in col {
                word_totals[r] += c;
                word_cells[r] += 1;
            }
        }
        CountMatrix {
            vocab,
            cells,
            columns,
            cell_totals,
            cell_distinct,
            word_totals,
            word_cells,
        }
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn cells(&self) -> &CellList {
        &self.cells
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.vocab.len(), self.cells.len())
    }

    pub fn get(&self, row: usize, col: usize) -> u64 {
        let c = &self.columns[col];
        c.binary_search_by_key(&row, |&(r, _)| r).map_or(0, |k| c[k].1)
    }

    pub fn column(&self, col: usize) -> &[(usize, u64)] {
        &self.columns[col]
    }

    /// All nonzero entries as `(row, col, count)`, column by column.
    pub fn triples(&self) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        self.columns
            .iter()
            .enumerate()
            .flat_map(|(j, col)| col.iter().map(move |&(i, c)| (i, j, c)))
    }

    pub fn nnz(&self) -> usize {
        self.columns.iter().map(Vec::len).sum()
    }

    pub fn total(&self) -> u64 {
        self.cell_totals.iter().sum()
    }

    pub fn cell_totals(&self) -> &[u64] {
        &self.cell_totals
    }

    pub fn cell_distinct(&self) -> &[usize] {
        &self.cell_distinct
    }

    pub fn word_totals(&self) -> &[u64] {
        &self.word_totals
    }

    pub fn word_cells(&self) -> &[usize] {
        &self.word_cells
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.vocab.len(), self.cells.len());
        for (i, j, c) in self.triples() {
            m[(i, j)] = c as f64;
        }
        m
    }

    /// Reorders to the canonical layout: words lexicographic, cells by id.
    pub fn canonical(&self) -> CountMatrix {
        let mut word_order: Vec<usize> = (0..self.vocab.len()).collect();
        word_order.sort_by(|&a, &b| self.vocab.words[a].cmp(&self.vocab.words[b]));
        let mut cell_order: Vec<usize> = (0..self.cells.len()).collect();
        cell_order.sort_by_key(|&j| self.cells.cells[j]);
        let mut new_row = vec![0; self.vocab.len()];
        for (new, &old) in word_order.iter().enumerate() {
            new_row[old] = new;
        }
        let columns = cell_order
            .iter()
            .map(|&j| {
                let mut col: Vec<(usize, u64)> =
                    self.columns[j].iter().map(|&(r, c)| (new_row[r], c)).collect();
                col.sort_unstable_by_key(|&(r, _)| r);
                col
            })
            .collect();
        Self::with_columns(self.vocab.select(&word_order), self.cells.select(&cell_order), columns)
    }

    /// Entrywise sum over the union of both vocabularies and cell lists, in
    /// canonical layout.
    pub fn merge(&self, other: &CountMatrix) -> CountMatrix {
        let mut acc = CountAccumulator::new(0);
        acc.add_counts(self);
        acc.add_counts(other);
        acc.finish()
    }

    /// Keeps the given rows and columns (each in the order given).
    fn restrict(&self, rows: &[usize], cols: &[usize]) -> CountMatrix {
        let mut new_row = vec![usize::MAX; self.vocab.len()];
        for (new, &old) in rows.iter().enumerate() {
            new_row[old] = new;
        }
        let columns = cols
            .iter()
            .map(|&j| {
                let mut col: Vec<(usize, u64)> = self.columns[j]
                    .iter()
                    .filter(|&&(r, _)| new_row[r] != usize::MAX)
                    .map(|&(r, c)| (new_row[r], c))
                    .collect();
                col.sort_unstable_by_key(|&(r, _)| r);
                col
            })
            .collect();
        Self::with_columns(self.vocab.select(rows), self.cells.select(cols), columns)
    }
}

/// Thresholds for keeping cells and words.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FilterSpec {
    pub cell_min_tokens: u64,
    pub cell_min_distinct: usize,
    pub word_min_total: u64,
    pub word_min_cells: usize,
}

/// Drops cells below the token or distinct-word thresholds, then, counting
/// only the surviving cells, drops words below the total or spread
/// thresholds.
///
/// This is a single pass. Removing words can push a surviving cell back
/// under its thresholds, so filtering again may remove more; the function is
/// not idempotent.
pub fn apply_filter(w: &CountMatrix, f: &FilterSpec) -> Result<CountMatrix, CorpusError> {
    let cols: Vec<usize> = (0..w.cells.len())
        .filter(|&j| w.cell_totals[j] >= f.cell_min_tokens && w.cell_distinct[j] >= f.cell_min_distinct)
        .collect();
    let all_rows: Vec<usize> = (0..w.vocab.len()).collect();
    let cells_only = w.restrict(&all_rows, &cols);
    let rows: Vec<usize> = (0..cells_only.vocab.len())
        .filter(|&i| cells_only.word_totals[i] >= f.word_min_total && cells_only.word_cells[i] >= f.word_min_cells)
        .collect();
    if cols.is_empty() || rows.is_empty() {
        return Err(CorpusError::EmptyAfterFilter {
            cells: cols.len(),
            words: rows.len(),
        });
    }
    let all_cols: Vec<usize> = (0..cells_only.cells.len()).collect();
    Ok(cells_only.restrict(&rows, &all_cols))
}

/// Dense column-stochastic word×cell matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyMatrix {
    vocab: Vocabulary,
    cells: CellList,
    matrix: DenseMatrix,
}

/// Column sums of a frequency matrix must be within this of one.
pub const COLUMN_SUM_TOLERANCE: f64 = 1e-9;

impl FrequencyMatrix {
    /// Wraps a loaded matrix, checking shapes, entry range and column sums.
    pub fn new(vocab: Vocabulary, cells: CellList, matrix: DenseMatrix) -> Result<Self, CorpusError> {
        let want = (vocab.len(), cells.len());
        if matrix.shape() != want {
            return Err(CorpusError::ShapeMismatch {
                got: matrix.shape(),
                want,
            });
        }
        let mut sums = vec![0.0; matrix.cols()];
        for i in 0..matrix.rows() {
            for (j, (s, &v)) in sums.iter_mut().zip(matrix.row(i)).enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(CorpusError::BadFrequency { row: i, col: j, value: v });
                }
                *s += v;
            }
        }
        if let Some((col, &sum)) = sums
            .iter()
            .enumerate()
            .find(|(_, s)| (**s - 1.0).abs() > COLUMN_SUM_TOLERANCE)
        {
            return Err(CorpusError::NotStochastic { col, sum });
        }
        Ok(FrequencyMatrix { vocab, cells, matrix })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn cells(&self) -> &CellList {
        &self.cells
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.matrix
    }

    pub fn shape(&self) -> (usize, usize) {
        self.matrix.shape()
    }

    /// Same data with cells reordered; `order[k]` is the old column placed at `k`.
    pub fn permute_cells(&self, order: &[usize]) -> FrequencyMatrix {
        FrequencyMatrix {
            vocab: self.vocab.clone(),
            cells: self.cells.select(order),
            matrix: self.matrix.select_cols(order),
        }
    }
}

/// `X[i, j] = W[i, j] / Σ_k W[k, j]`, without centering.
pub fn normalize(w: &CountMatrix) -> Result<FrequencyMatrix, CorpusError> {
    if let Some(j) = w.cell_totals.iter().position(|&t| t == 0) {
        return Err(CorpusError::ZeroColumn(w.cells.get(j)));
    }
    let mut m = DenseMatrix::zeros(w.vocab.len(), w.cells.len());
    for (j, col) in w.columns.iter().enumerate() {
        let total = w.cell_totals[j] as f64;
        for &(i, c) in col {
            m[(i, j)] = c as f64 / total;
        }
    }
    Ok(FrequencyMatrix {
        vocab: w.vocab.clone(),
        cells: w.cells.clone(),
        matrix: m,
    })
}

/// A named mesh level and filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preset {
    pub name: &'static str,
    pub level: u32,
    pub filter: FilterSpec,
}

/// Built-in settings: `usa` (country scale, level 6) and `nyc` (city scale,
/// level 13). The city word rule has no spread requirement, so its
/// `word_min_cells` is 1.
pub fn presets() -> [Preset; 2] {
    [
        Preset {
            name: "usa",
            level: 6,
            filter: FilterSpec {
                cell_min_tokens: 10_000,
                cell_min_distinct: 1_000,
                word_min_total: 10_000,
                word_min_cells: 300,
            },
        },
        Preset {
            name: "nyc",
            level: 13,
            filter: FilterSpec {
                cell_min_tokens: 6_500,
                cell_min_distinct: 1_000,
                word_min_total: 1_000,
                word_min_cells: 1,
            },
        },
    ]
}

pub fn preset(name: &str) -> Result<Preset, CorpusError> {
    presets()
        .into_iter()
        .find(|p| p.name == name)
        .ok_or_else(|| CorpusError::UnknownPreset(name.to_string()))
}
