//! Component models over word×cell matrices: ranked words, per-cell scores,
//! and projection of another corpus onto an existing basis.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CellList, FrequencyMatrix, Vocabulary};
use crate::htm::TrixelId;
use crate::linalg::{svd, DenseMatrix, LinalgError};
use crate::rpca::{pcp, PcpConfig, PcpResult, RpcaError};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("matrix has no {0}")]
    Degenerate(&'static str),
    #[error("component {component} out of range (model has {available})")]
    ComponentOutOfRange { component: usize, available: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("vocabularies share no words")]
    EmptyIntersection,
    #[error("model shapes disagree: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Rpca(#[from] RpcaError),
}

/// Which matrix a model decomposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceTag {
    Raw,
    LowRank,
    Sparse,
}

impl fmt::Display for SourceTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SourceTag::Raw => "raw",
            SourceTag::LowRank => "low_rank",
            SourceTag::Sparse => "sparse",
        })
    }
}

/// SVD factors of a words×cells matrix, bound to its row and column labels.
/// Columns of `u` score words; columns of `v` score cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentModel {
    vocab: Vocabulary,
    cells: CellList,
    u: DenseMatrix,
    sigma: Vec<f64>,
    v: DenseMatrix,
    source: SourceTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordScore {
    pub word: String,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellScore {
    pub trixel: TrixelId,
    pub score: f64,
}

/// Most positive and most negative words of one component.
#[derive(Debug, Clone, PartialEq)]
pub struct TopWords {
    pub positive: Vec<WordScore>,
    pub negative: Vec<WordScore>,
}

impl ComponentModel {
    /// Assembles a model from stored factors, checking that shapes agree.
    pub fn from_parts(
        vocab: Vocabulary,
        cells: CellList,
        u: DenseMatrix,
        sigma: Vec<f64>,
        v: DenseMatrix,
        source: SourceTag,
    ) -> Result<Self, AnalysisError> {
        let r = sigma.len();
        if u.shape() != (vocab.len(), r) || v.shape() != (cells.len(), r) {
            return Err(AnalysisError::Inconsistent(format!(
                "U {:?}, V {:?}, {} singular values for {} words x {} cells",
                u.shape(),
                v.shape(),
                r,
                vocab.len(),
                cells.len()
            )));
        }
        if sigma.windows(2).any(|w| w[0] < w[1]) {
            return Err(AnalysisError::Inconsistent("singular values not sorted".into()));
        }
        Ok(ComponentModel {
            vocab,
            cells,
            u,
            sigma,
            v,
            source,
        })
    }

    /// Thin SVD of `matrix`, labelled by `vocab` rows and `cells` columns.
    pub fn from_matrix(
        vocab: &Vocabulary,
        cells: &CellList,
        matrix: &DenseMatrix,
        source: SourceTag,
    ) -> Result<Self, AnalysisError> {
        if matrix.rows() == 0 {
            return Err(AnalysisError::Degenerate("rows"));
        }
        if matrix.cols() == 0 {
            return Err(AnalysisError::Degenerate("columns"));
        }
        let dec = svd(matrix)?;
        Self::from_parts(vocab.clone(), cells.clone(), dec.u, dec.sigma, dec.v, source)
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn cells(&self) -> &CellList {
        &self.cells
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn source(&self) -> SourceTag {
        self.source
    }

    pub fn components(&self) -> usize {
        self.sigma.len()
    }

    /// `diag(σ) · Vᵀ`, the r×cells score matrix of the modelled data.
    pub fn sigma_vt(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.sigma.len(), self.v.rows(), |c, j| self.sigma[c] * self.v[(j, c)])
    }

    fn check_component(&self, component: usize) -> Result<(), AnalysisError> {
        if component >= self.components() {
            return Err(AnalysisError::ComponentOutOfRange {
                component,
                available: self.components(),
            });
        }
        Ok(())
    }
}

/// SVD of the frequency matrix as-is (no centering).
pub fn classic_pca(x: &FrequencyMatrix) -> Result<ComponentModel, AnalysisError> {
    ComponentModel::from_matrix(x.vocabulary(), x.cells(), x.matrix(), SourceTag::Raw)
}

/// Both halves of a robust decomposition and the solver run behind them.
#[derive(Debug, Clone)]
pub struct RobustAnalysis {
    pub low_rank: ComponentModel,
    pub sparse: ComponentModel,
    pub pcp: PcpResult,
}

impl RobustAnalysis {
    /// Set when the solver stopped at its iteration cap.
    pub fn not_converged(&self) -> bool {
        !self.pcp.converged
    }
}

/// Runs PCP on `x` and takes the SVD of each part. A run that hits the
/// iteration cap still yields models; check [`RobustAnalysis::not_converged`].
pub fn decompose_and_analyze(x: &FrequencyMatrix, cfg: &PcpConfig) -> Result<RobustAnalysis, AnalysisError> {
    let run = pcp(x.matrix(), cfg)?;
    let low_rank = ComponentModel::from_matrix(x.vocabulary(), x.cells(), &run.low_rank, SourceTag::LowRank)?;
    let sparse = ComponentModel::from_matrix(x.vocabulary(), x.cells(), &run.sparse, SourceTag::Sparse)?;
    Ok(RobustAnalysis {
        low_rank,
        sparse,
        pcp: run,
    })
}

/// The `k` most positive and `k` most negative words of a component, each
/// list ordered by decreasing magnitude. Exact zeros belong to neither list.
pub fn top_words(m: &ComponentModel, component: usize, k: usize) -> Result<TopWords, AnalysisError> {
    m.check_component(component)?;
    if k == 0 {
        return Err(AnalysisError::ZeroK);
    }
    let scores: Vec<(usize, f64)> = (0..m.u.rows()).map(|i| (i, m.u[(i, component)])).collect();
    let pick = |positive: bool| -> Vec<WordScore> {
        let mut side: Vec<(usize, f64)> = scores
            .iter()
            .copied()
            .filter(|&(_, s)| if positive { s > 0.0 } else { s < 0.0 })
            .collect();
        side.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
        side.into_iter()
            .take(k)
            .map(|(i, score)| WordScore {
                word: m.vocab.get(i).to_string(),
                score,
            })
            .collect()
    };
    Ok(TopWords {
        positive: pick(true),
        negative: pick(false),
    })
}

/// One component's cell scores in cell-list order.
pub fn cell_scores(m: &ComponentModel, component: usize) -> Result<Vec<CellScore>, AnalysisError> {
    m.check_component(component)?;
    Ok((0..m.v.rows())
        .map(|j| CellScore {
            trixel: m.cells.get(j),
            score: m.v[(j, component)],
        })
        .collect())
}

/// Word-level bookkeeping of a projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub base_words: usize,
    pub new_words: usize,
    pub matched: usize,
    /// Base-model words absent from the new matrix; they contribute zero.
    pub missing_from_new: Vec<String>,
    /// New-matrix words the base model has no loading for.
    pub unmatched_new: Vec<String>,
}

/// Scores of new cells in a base model's word space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// components × new cells.
    pub scores: DenseMatrix,
    pub cells: CellList,
    pub alignment: AlignmentReport,
}

impl Projection {
    pub fn component(&self, c: usize) -> Result<Vec<CellScore>, AnalysisError> {
        if c >= self.scores.rows() {
            return Err(AnalysisError::ComponentOutOfRange {
                component: c,
                available: self.scores.rows(),
            });
        }
        Ok(self
            .cells
            .ids()
            .iter()
            .zip(self.scores.row(c))
            .map(|(&trixel, &score)| CellScore { trixel, score })
            .collect())
    }
}

/// `Uᵀ X` over the words shared by the model and `matrix`, rows aligned by
/// word. `matrix` is words×cells labelled by `vocab` and `cells`; it may hold
/// frequencies or raw counts.
pub fn project_matrix(
    base: &ComponentModel,
    vocab: &Vocabulary,
    cells: &CellList,
    matrix: &DenseMatrix,
) -> Result<Projection, AnalysisError> {
    if matrix.shape() != (vocab.len(), cells.len()) {
        return Err(AnalysisError::Inconsistent(format!(
            "matrix {:?} for {} words x {} cells",
            matrix.shape(),
            vocab.len(),
            cells.len()
        )));
    }
    let pairs: Vec<(usize, usize)> = vocab
        .words()
        .iter()
        .enumerate()
        .filter_map(|(i_new, w)| base.vocab.index_of(w).map(|i_base| (i_base, i_new)))
        .collect();
    if pairs.is_empty() {
        return Err(AnalysisError::EmptyIntersection);
    }
    let r = base.components();
    let mut scores = DenseMatrix::zeros(r, cells.len());
    for &(i_base, i_new) in &pairs {
        let x_row = matrix.row(i_new);
        for c in 0..r {
            let u = base.u[(i_base, c)];
            if u == 0.0 {
                continue;
            }
            for (s, &x) in scores.row_mut(c).iter_mut().zip(x_row) {
                *s += u * x;
            }
        }
    }
    let alignment = AlignmentReport {
        base_words: base.vocab.len(),
        new_words: vocab.len(),
        matched: pairs.len(),
        missing_from_new: base
            .vocab
            .words()
            .iter()
            .filter(|w| vocab.index_of(w).is_none())
            .cloned()
            .collect(),
        unmatched_new: vocab
            .words()
            .iter()
            .filter(|w| base.vocab.index_of(w).is_none())
            .cloned()
            .collect(),
    };
    Ok(Projection {
        scores,
        cells: cells.clone(),
        alignment,
    })
}

/// Projects a frequency matrix onto `base`.
pub fn project(base: &ComponentModel, x_new: &FrequencyMatrix) -> Result<Projection, AnalysisError> {
    project_matrix(base, x_new.vocabulary(), x_new.cells(), x_new.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(ws: &[&str]) -> Vocabulary {
        Vocabulary::new(ws.iter().map(|s| s.to_string()).collect()).unwrap()
    }

    fn cells(n: usize) -> CellList {
        CellList::new((0..n as u64).map(|k| TrixelId::new(32 + k).unwrap()).collect()).unwrap()
    }

    fn toy_model() -> ComponentModel {
        ComponentModel::from_parts(
            vocab(&["a", "b", "c"]),
            cells(1),
            DenseMatrix::from_rows(&[[0.9], [-0.5], [0.1]]).unwrap(),
            vec![1.0],
            DenseMatrix::from_rows(&[[1.0]]).unwrap(),
            SourceTag::Raw,
        )
        .unwrap()
    }

    #[test]
    fn top_words_split_by_sign() {
        let t = top_words(&toy_model(), 0, 1).unwrap();
        assert_eq!(t.positive, vec![WordScore { word: "a".into(), score: 0.9 }]);
        assert_eq!(t.negative, vec![WordScore { word: "b".into(), score: -0.5 }]);
        let all = top_words(&toy_model(), 0, 50).unwrap();
        assert_eq!(all.positive.iter().map(|w| w.word.as_str()).collect::<Vec<_>>(), ["a", "c"]);
        assert_eq!(all.negative.len(), 1);
    }

    #[test]
    fn component_and_k_errors() {
        let m = toy_model();
        assert!(matches!(top_words(&m, 1, 3), Err(AnalysisError::ComponentOutOfRange { .. })));
        assert!(matches!(top_words(&m, 0, 0), Err(AnalysisError::ZeroK)));
        assert!(matches!(cell_scores(&m, 2), Err(AnalysisError::ComponentOutOfRange { .. })));
    }

    #[test]
    fn inconsistent_parts_rejected() {
        let r = ComponentModel::from_parts(
            vocab(&["a"]),
            cells(1),
            DenseMatrix::zeros(2, 1),
            vec![1.0],
            DenseMatrix::zeros(1, 1),
            SourceTag::Raw,
        );
        assert!(matches!(r, Err(AnalysisError::Inconsistent(_))));
        let r = ComponentModel::from_parts(
            vocab(&["a", "b"]),
            cells(2),
            DenseMatrix::zeros(2, 2),
            vec![1.0, 2.0],
            DenseMatrix::zeros(2, 2),
            SourceTag::Raw,
        );
        assert!(r.is_err());
    }

    #[test]
    fn disjoint_vocabulary_projection_fails() {
        let x = DenseMatrix::from_rows(&[[1.0]]).unwrap();
        let r = project_matrix(&toy_model(), &vocab(&["zzz"]), &cells(1), &x);
        assert!(matches!(r, Err(AnalysisError::EmptyIntersection)));
    }

    #[test]
    fn projection_zero_fills_missing_words() {
        // only "a" and "c" present; "b" contributes nothing
        let x = DenseMatrix::from_rows(&[[0.25, 0.5], [0.75, 0.5], [0.0, 0.0]]).unwrap();
        let p = project_matrix(&toy_model(), &vocab(&["c", "a", "extra"]), &cells(2), &x).unwrap();
        assert!((p.scores[(0, 0)] - (0.1 * 0.25 + 0.9 * 0.75)).abs() < 1e-15);
        assert_eq!(p.alignment.matched, 2);
        assert_eq!(p.alignment.missing_from_new, vec!["b".to_string()]);
        assert_eq!(p.alignment.unmatched_new, vec!["extra".to_string()]);
        assert_eq!(p.component(0).unwrap().len(), 2);
    }

    #[test]
    fn source_tag_names() {
        assert_eq!(SourceTag::LowRank.to_string(), "low_rank");
        assert_eq!(serde_json::to_string(&SourceTag::Sparse).unwrap(), "\"sparse\"");
    }
}
