//! Principal Component Pursuit: split `X` into a low-rank `L` and a sparse `S`
//! by minimizing `λ‖S‖₁ + ‖L‖_*` subject to `X = L + S`.
//!
//! The solver is the inexact augmented Lagrangian iteration: singular value
//! thresholding for `L`, entrywise shrinkage for `S`, a dual ascent step on
//! the multiplier `Y`, and a geometrically growing penalty `μ`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{frobenius_norm, l1_norm, linf_norm, svd, DenseMatrix, LinalgError};

/// Singular values at or below this fraction of the largest are not counted
/// in [`PcpResult::rank_lr`].
pub const RANK_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RpcaError {
    #[error("threshold must be nonnegative, got {0}")]
    NegativeThreshold(f64),
    #[error("input matrix is zero")]
    ZeroInput,
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Solver settings. `None` fields are derived from the input matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PcpConfig {
    /// Weight of the l1 term; defaults to `1/√max(n₁, n₂)`.
    pub lambda: Option<f64>,
    /// Stop once `‖X − L − S‖_F / ‖X‖_F` falls to this value.
    pub tol_delta: f64,
    pub max_iter: usize,
    /// Initial penalty; defaults to `1.25 / ‖X‖₂`.
    pub mu0: Option<f64>,
    /// Penalty growth factor per iteration.
    pub rho: f64,
    /// Penalty cap; defaults to `1e7 · μ₀`.
    pub mu_max: Option<f64>,
}

impl Default for PcpConfig {
    fn default() -> Self {
        PcpConfig {
            lambda: None,
            tol_delta: 1e-7,
            max_iter: 1000,
            mu0: None,
            rho: 1.5,
            mu_max: None,
        }
    }
}

impl PcpConfig {
    pub fn validate(&self) -> Result<(), RpcaError> {
        let bad = |msg: String| Err(RpcaError::InvalidConfig(msg));
        if self.tol_delta.is_nan() || self.tol_delta <= 0.0 {
            return bad(format!("tol_delta must be positive, got {}", self.tol_delta));
        }
        if self.rho.is_nan() || self.rho <= 1.0 {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        for (name, v) in [("lambda", self.lambda), ("mu0", self.mu0), ("mu_max", self.mu_max)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive and finite, got {v}"));
                }
            }
        }
        Ok(())
    }
}

/// Output of [`pcp`].
#[derive(Debug, Clone, PartialEq)]
pub struct PcpResult {
    pub low_rank: DenseMatrix,
    pub sparse: DenseMatrix,
    pub iterations: usize,
    pub converged: bool,
    /// Relative feasibility residual after each iteration.
    pub residual_history: Vec<f64>,
    pub rank_lr: usize,
    pub nnz_sparse: usize,
    pub objective: f64,
    pub lambda: f64,
    pub mu0: f64,
}

/// The serialized summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcpDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub residual_history: Vec<f64>,
    pub rank_lr: usize,
    pub nnz_sparse: usize,
    pub lambda: f64,
    pub objective: f64,
}

impl PcpResult {
    pub fn diagnostics(&self) -> PcpDiagnostics {
        PcpDiagnostics {
            iterations: self.iterations,
            converged: self.converged,
            residual_history: self.residual_history.clone(),
            rank_lr: self.rank_lr,
            nnz_sparse: self.nnz_sparse,
            lambda: self.lambda,
            objective: self.objective,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

#[inline]
fn soft(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// Entrywise soft thresholding `sign(x) · max(|x| − τ, 0)`.
pub fn shrink(m: &DenseMatrix, tau: f64) -> Result<DenseMatrix, RpcaError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(RpcaError::NegativeThreshold(tau));
    }
    Ok(m.map(|x| soft(x, tau)))
}

/// Singular value thresholding: `U · diag(max(σ − τ, 0)) · Vᵀ`. Also returns
/// the thresholded singular values, nonincreasing.
pub fn svt_with_sigma(m: &DenseMatrix, tau: f64) -> Result<(DenseMatrix, Vec<f64>), RpcaError> {
    if tau.is_nan() || tau < 0.0 {
        return Err(RpcaError::NegativeThreshold(tau));
    }
    let dec = svd(m)?;
    let sigma: Vec<f64> = dec.sigma.iter().map(|&s| (s - tau).max(0.0)).collect();
    Ok((dec.reconstruct_with(&sigma), sigma))
}

/// Singular value thresholding and the number of surviving singular values.
pub fn svt(m: &DenseMatrix, tau: f64) -> Result<(DenseMatrix, usize), RpcaError> {
    let (out, sigma) = svt_with_sigma(m, tau)?;
    Ok((out, sigma.iter().filter(|&&s| s > 0.0).count()))
}

/// `1 / √max(n₁, n₂)`.
pub fn default_lambda(n1: usize, n2: usize) -> f64 {
    1.0 / (n1.max(n2).max(1) as f64).sqrt()
}

/// `1.25 / ‖X‖₂`.
pub fn mu0_auto(x: &DenseMatrix) -> Result<f64, RpcaError> {
    let s1 = svd(x)?.sigma.first().copied().unwrap_or(0.0);
    if s1 == 0.0 {
        return Err(RpcaError::ZeroInput);
    }
    Ok(1.25 / s1)
}

/// `λ‖S‖₁ + ‖L‖_*`.
pub fn objective(low_rank: &DenseMatrix, sparse: &DenseMatrix, lambda: f64) -> Result<f64, RpcaError> {
    Ok(lambda * l1_norm(sparse) + svd(low_rank)?.sigma.iter().sum::<f64>())
}

/// Runs Principal Component Pursuit on `x`.
///
/// Non-convergence is not an error: the result carries `converged = false`
/// together with the full residual history.
pub fn pcp(x: &DenseMatrix, cfg: &PcpConfig) -> Result<PcpResult, RpcaError> {
    cfg.validate()?;
    x.check_finite()?;
    let norm_x = frobenius_norm(x);
    if norm_x == 0.0 {
        return Err(RpcaError::ZeroInput);
    }
    let (n1, n2) = x.shape();
    let lambda = cfg.lambda.unwrap_or_else(|| default_lambda(n1, n2));
    let spectral = svd(x)?.sigma[0];
    let mu0 = cfg.mu0.unwrap_or(1.25 / spectral);
    let mu_max = cfg.mu_max.unwrap_or(1e7 * mu0);
    let mut mu = mu0;

    let mut y = x.scale(1.0 / spectral.max(linf_norm(x) / lambda));
    let mut low_rank = DenseMatrix::zeros(n1, n2);
    let mut sigma = Vec::new();
    let mut sparse = DenseMatrix::zeros(n1, n2);
    let mut residual_history = Vec::new();
    let mut converged = false;
    let mut work = DenseMatrix::zeros(n1, n2);

    for _ in 0..cfg.max_iter {
        let inv_mu = 1.0 / mu;
        for (((w, &xv), &sv), &yv) in work
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(sparse.as_slice())
            .zip(y.as_slice())
        {
            *w = xv - sv + yv * inv_mu;
        }
        (low_rank, sigma) = svt_with_sigma(&work, inv_mu)?;

        let tau = lambda * inv_mu;
        for (((s, &xv), &lv), &yv) in sparse
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(low_rank.as_slice())
            .zip(y.as_slice())
        {
            *s = soft(xv - lv + yv * inv_mu, tau);
        }

        let mut res2 = 0.0;
        for (((yv, &xv), &lv), &sv) in y
            .as_mut_slice()
            .iter_mut()
            .zip(x.as_slice())
            .zip(low_rank.as_slice())
            .zip(sparse.as_slice())
        {
            let z = xv - lv - sv;
            res2 += z * z;
            *yv += mu * z;
        }
        mu = (cfg.rho * mu).min(mu_max);

        let residual = res2.sqrt() / norm_x;
        residual_history.push(residual);
        if residual <= cfg.tol_delta {
            converged = true;
            break;
        }
    }

    let top = sigma.first().copied().unwrap_or(0.0);
    let rank_lr = sigma.iter().filter(|&&s| s > RANK_THRESHOLD * top).count();
    let nnz_sparse = sparse.as_slice().iter().filter(|&&v| v != 0.0).count();
    let objective = lambda * l1_norm(&sparse) + sigma.iter().sum::<f64>();
    Ok(PcpResult {
        low_rank,
        sparse,
        iterations: residual_history.len(),
        converged,
        residual_history,
        rank_lr,
        nnz_sparse,
        objective,
        lambda,
        mu0,
    })
}
