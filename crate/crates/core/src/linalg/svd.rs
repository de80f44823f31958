//! Thin SVD by one-sided (Hestenes) Jacobi rotations.
//!
//! Tall inputs are first reduced with a Householder QR so the rotations run on
//! the square triangular factor. Output is deterministic: singular values are
//! sorted nonincreasing (ties keep column order) and every left singular
//! vector has its largest-magnitude entry positive.

use super::{DenseMatrix, LinalgError};

const MAX_SWEEPS: usize = 80;

/// `X = U diag(sigma) Vᵀ` with `U` n₁×r, `V` n₂×r and r = min(n₁, n₂).
#[derive(Debug, Clone, PartialEq)]
pub struct Svd {
    pub u: DenseMatrix,
    pub sigma: Vec<f64>,
    pub v: DenseMatrix,
}

impl Svd {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// `U diag(sigma) Vᵀ` using the supplied singular values.
    pub fn reconstruct_with(&self, sigma: &[f64]) -> DenseMatrix {
        let (m, n) = (self.u.rows(), self.v.rows());
        let mut out = DenseMatrix::zeros(m, n);
        for (k, &s) in sigma.iter().enumerate() {
            if s == 0.0 {
                continue;
            }
            for i in 0..m {
                let us = self.u[(i, k)] * s;
                if us == 0.0 {
                    continue;
                }
                let row = out.row_mut(i);
                for (j, o) in row.iter_mut().enumerate() {
                    *o += us * self.v[(j, k)];
                }
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix {
        self.reconstruct_with(&self.sigma)
    }
}

/// Column-major scratch matrix.
struct Cols {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Cols {
    fn zeros(rows: usize, cols: usize) -> Self {
        Cols {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    fn identity(n: usize) -> Self {
        let mut c = Cols::zeros(n, n);
        for i in 0..n {
            c.data[i * n + i] = 1.0;
        }
        c
    }

    fn from_dense(x: &DenseMatrix) -> Self {
        let (rows, cols) = x.shape();
        let mut c = Cols::zeros(rows, cols);
        for i in 0..rows {
            for (j, &v) in x.row(i).iter().enumerate() {
                c.data[j * rows + i] = v;
            }
        }
        c
    }

    fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Mutable views of columns `i < j`.
    fn pair_mut(&mut self, i: usize, j: usize) -> (&mut [f64], &mut [f64]) {
        debug_assert!(i < j);
        let r = self.rows;
        let (head, tail) = self.data.split_at_mut(j * r);
        (&mut head[i * r..(i + 1) * r], &mut tail[..r])
    }

    fn to_dense(&self, order: &[usize], flip: &[bool]) -> DenseMatrix {
        DenseMatrix::from_fn(self.rows, order.len(), |i, k| {
            let v = self.data[order[k] * self.rows + i];
            if flip[k] {
                -v
            } else {
                v
            }
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 {
        return 0.0;
    }
    scale * a.iter().map(|v| (v / scale) * (v / scale)).sum::<f64>().sqrt()
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (p, q) = (*x, *y);
        *x = c * p - s * q;
        *y = s * p + c * q;
    }
}

/// Orthogonalizes the columns of `work` in place and returns the accumulated
/// right rotation.
fn jacobi(work: &mut Cols) -> Cols {
    let n = work.cols;
    let mut v = Cols::identity(n);
    let tol = f64::EPSILON * (work.rows.max(1) as f64);
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let (ci, cj) = work.pair_mut(i, j);
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for (&p, &q) in ci.iter().zip(cj.iter()) {
                    alpha += p * p;
                    beta += q * q;
                    gamma += p * q;
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                if gamma.abs() <= tol * alpha.sqrt() * beta.sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + 1f64.hypot(zeta));
                let c = 1.0 / 1f64.hypot(t);
                let s = c * t;
                rotate(ci, cj, c, s);
                let (vi, vj) = v.pair_mut(i, j);
                rotate(vi, vj, c, s);
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

/// Householder reflectors of a column-major tall matrix, overwritten with R
/// in its upper triangle.
struct Householder {
    vectors: Vec<Vec<f64>>,
    betas: Vec<f64>,
}

fn householder_qr(a: &mut Cols) -> Householder {
    let (m, n) = (a.rows, a.cols);
    let mut vectors = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    for k in 0..n {
        let x = &a.col(k)[k..];
        let nx = norm(x);
        if nx == 0.0 {
            vectors.push(vec![0.0; m - k]);
            betas.push(0.0);
            continue;
        }
        let alpha = if x[0] >= 0.0 { -nx } else { nx };
        let mut v = x.to_vec();
        v[0] -= alpha;
        let vv = dot(&v, &v);
        let beta = if vv == 0.0 { 0.0 } else { 2.0 / vv };
        for j in k + 1..n {
            let col = &mut a.col_mut(j)[k..];
            let f = beta * dot(&v, col);
            for (c, &vi) in col.iter_mut().zip(&v) {
                *c -= f * vi;
            }
        }
        let col = &mut a.col_mut(k)[k..];
        col[0] = alpha;
        col[1..].iter_mut().for_each(|c| *c = 0.0);
        vectors.push(v);
        betas.push(beta);
    }
    Householder { vectors, betas }
}

impl Householder {
    /// Computes `Q · [top; 0]` for an n×n `top`, yielding an m×n matrix.
    fn apply_q(&self, top: &Cols, m: usize) -> Cols {
        let n = top.cols;
        let mut out = Cols::zeros(m, n);
        for j in 0..n {
            out.col_mut(j)[..top.rows].copy_from_slice(top.col(j));
        }
        for k in (0..self.vectors.len()).rev() {
            let (v, beta) = (&self.vectors[k], self.betas[k]);
            if beta == 0.0 {
                continue;
            }
            for j in 0..n {
                let col = &mut out.col_mut(j)[k..];
                let f = beta * dot(v, col);
                if f != 0.0 {
                    for (c, &vi) in col.iter_mut().zip(v) {
                        *c -= f * vi;
                    }
                }
            }
        }
        out
    }
}

/// Normalizes the orthogonal columns of `work` into left singular vectors,
/// returning their norms. Numerically null columns are replaced by unit
/// vectors orthogonal to every other column.
fn normalize_columns(work: &mut Cols) -> Vec<f64> {
    let n = work.cols;
    let sigma: Vec<f64> = (0..n).map(|j| norm(work.col(j))).collect();
    let smax = sigma.iter().fold(0.0f64, |m, &s| m.max(s));
    let null = |s: f64| s == 0.0 || s <= smax * 1e-30 || s < 1e-290;
    for (j, &s) in sigma.iter().enumerate() {
        if !null(s) {
            work.col_mut(j).iter_mut().for_each(|x| *x /= s);
        }
    }
    let mut basis: Vec<usize> = (0..n).filter(|&j| !null(sigma[j])).collect();
    let mut candidate = 0;
    for j in (0..n).filter(|&j| null(sigma[j])) {
        loop {
            assert!(candidate < work.rows, "orthonormal completion ran out of candidates");
            let mut e = vec![0.0; work.rows];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &b in &basis {
                    let col = work.col(b);
                    let f = dot(col, &e);
                    for (x, &c) in e.iter_mut().zip(col) {
                        *x -= f * c;
                    }
                }
            }
            let ne = norm(&e);
            if ne > 0.5 {
                e.iter_mut().for_each(|x| *x /= ne);
                work.col_mut(j).copy_from_slice(&e);
                basis.push(j);
                break;
            }
        }
    }
    sigma
}

/// SVD of a matrix with at least as many rows as columns, unsorted.
fn svd_tall(x: &DenseMatrix) -> (Cols, Vec<f64>, Cols) {
    let (m, n) = x.shape();
    let mut a = Cols::from_dense(x);
    if m > n {
        let qr = householder_qr(&mut a);
        let mut r = Cols::zeros(n, n);
        for j in 0..n {
            r.col_mut(j)[..=j].copy_from_slice(&a.col(j)[..=j]);
        }
        let v = jacobi(&mut r);
        let sigma = normalize_columns(&mut r);
        (qr.apply_q(&r, m), sigma, v)
    } else {
        let v = jacobi(&mut a);
        let sigma = normalize_columns(&mut a);
        (a, sigma, v)
    }
}

/// Thin singular value decomposition.
pub fn svd(x: &DenseMatrix) -> Result<Svd, LinalgError> {
    x.check_finite()?;
    let wide = x.rows() < x.cols();
    let (u, sigma, v) = if wide {
        let (u, s, v) = svd_tall(&x.transpose());
        (v, s, u)
    } else {
        svd_tall(x)
    };
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]).then(a.cmp(&b)));
    let flip: Vec<bool> = order
        .iter()
        .map(|&k| {
            let col = u.col(k);
            let mut best = 0;
            for (i, c) in col.iter().enumerate() {
                if c.abs() > col[best].abs() {
                    best = i;
                }
            }
            col.get(best).is_some_and(|&c| c < 0.0)
        })
        .collect();
    Ok(Svd {
        u: u.to_dense(&order, &flip),
        sigma: order.iter().map(|&k| sigma[k]).collect(),
        v: v.to_dense(&order, &flip),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn orthogonality_error(q: &DenseMatrix) -> f64 {
        let g = q.transpose().matmul(q).unwrap();
        g.max_abs_diff(&DenseMatrix::identity(q.cols()))
    }

    fn check(x: &DenseMatrix) -> Svd {
        let s = svd(x).unwrap();
        let r = x.rows().min(x.cols());
        assert_eq!(s.u.shape(), (x.rows(), r));
        assert_eq!(s.v.shape(), (x.cols(), r));
        let rel = frobenius_norm(&s.reconstruct().sub(x).unwrap()) / frobenius_norm(x).max(1.0);
        assert!(rel <= 1e-9, "reconstruction {rel}");
        assert!(orthogonality_error(&s.u) <= 1e-9);
        assert!(orthogonality_error(&s.v) <= 1e-9);
        assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        assert!(s.sigma.iter().all(|&v| v >= 0.0));
        s
    }

    #[test]
    fn identity_and_diagonal() {
        let s = check(&DenseMatrix::identity(3));
        assert_eq!(s.sigma, vec![1.0, 1.0, 1.0]);
        let s = check(&DenseMatrix::from_diag(&[3.0, 1.0]));
        assert_eq!(s.sigma, vec![3.0, 1.0]);
        let s = check(&DenseMatrix::from_diag(&[1.0, 3.0]));
        assert_eq!(s.sigma, vec![3.0, 1.0]);
    }

    #[test]
    fn tall_wide_and_square() {
        check(&random(50, 20, 1));
        check(&random(20, 50, 2));
        check(&random(30, 30, 3));
        check(&random(1, 7, 4));
        check(&random(7, 1, 5));
    }

    #[test]
    fn rank_deficient_inputs_complete_the_basis() {
        let a = random(12, 3, 6);
        let b = random(3, 9, 7);
        let low = a.matmul(&b).unwrap();
        let s = check(&low);
        assert!(s.sigma[3] <= 1e-12 * s.sigma[0]);
        let s = check(&DenseMatrix::zeros(5, 4));
        assert!(s.sigma.iter().all(|&v| v == 0.0));
        let col = DenseMatrix::from_fn(6, 5, |i, _| i as f64 + 1.0);
        let s = check(&col);
        assert!(s.sigma[1] <= 1e-12 * s.sigma[0]);
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let s = svd(&random(15, 8, 8)).unwrap();
        for k in 0..s.rank() {
            let col = s.u.column(k);
            let big = col.iter().cloned().fold(0.0f64, |m, v| if v.abs() > m.abs() { v } else { m });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn deterministic_bits() {
        let x = random(40, 25, 9);
        assert_eq!(svd(&x).unwrap(), svd(&x).unwrap());
    }

    #[test]
    fn rejects_non_finite() {
        let mut x = DenseMatrix::identity(2);
        x[(0, 1)] = f64::INFINITY;
        assert!(svd(&x).is_err());
    }

    #[test]
    fn empty_matrix() {
        let s = svd(&DenseMatrix::zeros(3, 0)).unwrap();
        assert!(s.sigma.is_empty());
        assert_eq!(s.u.shape(), (3, 0));
    }
}
