//! Dense matrices and the three eigenvalue-flavoured factorizations the rest
//! of the pipeline is built on: symmetric eigendecomposition via cyclic Jacobi
//! rotations, singular value decomposition through the Gram matrix of the
//! smaller dimension, and the generalized symmetric problem `A w = lambda B w`
//! reduced over `B`'s eigenbasis.
//!
//! Everything here is deterministic: eigenvalues are ordered (descending for
//! [`sym_eigen`], ascending for [`gen_sym_eigen`]) and every eigenvector is
//! sign-fixed so that its largest-magnitude component is positive, with the
//! lowest index winning ties.

use std::ops::{Index, IndexMut};

use thiserror::Error;

/// Relative convergence tolerance for the Jacobi sweep: iteration stops when
/// the off-diagonal Frobenius norm drops below `tol * ||M||_F`.
pub const DEFAULT_EIG_TOL: f64 = 1e-10;

/// Inputs are accepted as symmetric when `|a_ij - a_ji|` never exceeds this
/// fraction of the Frobenius norm.
const SYMMETRY_REL_TOL: f64 = 1e-10;

/// Cyclic Jacobi converges quadratically; 100 sweeps is far beyond what any
/// finite matrix needs, so exhausting them signals a malformed input.
const MAX_JACOBI_SWEEPS: usize = 100;

/// Singular values below `sigma_max * SIGMA_RANK_REL_TOL` count as zero when
/// deciding which left/right singular vectors can be formed from the data.
const SIGMA_RANK_REL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum LinalgError {
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    DataLength {
        rows: usize,
        cols: usize,
        len: usize,
    },
    #[error("matrix must be non-empty, got {rows}x{cols}")]
    Empty { rows: usize, cols: usize },
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix contains a non-finite entry")]
    NonFinite,
    #[error("matrix is not symmetric: max |a_ij - a_ji| = {max_asym:e} exceeds {limit:e}")]
    NotSymmetric { max_asym: f64, limit: f64 },
    #[error("tolerance must be a positive finite number, got {tol}")]
    BadTolerance { tol: f64 },
    #[error(
        "Jacobi iteration did not converge in {sweeps} sweeps \
         (off-diagonal norm {off:e}, threshold {threshold:e})"
    )]
    NoConvergence {
        sweeps: usize,
        off: f64,
        threshold: f64,
    },
    #[error(
        "matrix B is not positive-definite within tolerance: \
         smallest eigenvalue {min_eigenvalue:e} <= {tol:e}"
    )]
    NotPositiveDefinite { min_eigenvalue: f64, tol: f64 },
}

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, LinalgError> {
        if data.len() != rows * cols {
            return Err(LinalgError::DataLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(LinalgError::DataLength {
                    rows: r,
                    cols: c,
                    len: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    /// `self * rhs`; panics on inner-dimension mismatch (a programming error,
    /// not a data error).
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul dimension mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self.data[i * self.cols + k];
                if aik == 0.0 {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, r) in out_row.iter_mut().zip(rhs_row) {
                    *o += aik * r;
                }
            }
        }
        out
    }

    /// `self^T * self`, accumulated symmetrically so the result is exactly
    /// symmetric regardless of rounding.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = 0.0;
                for k in 0..self.rows {
                    s += self.data[k * n + i] * self.data[k * n + j];
                }
                g[(i, j)] = s;
                g[(j, i)] = s;
            }
        }
        g
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

/// Eigenvalues paired with eigenvectors stored as matrix columns.
///
/// [`sym_eigen`] orders values descending; [`gen_sym_eigen`] ascending.
#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

/// Thin SVD `A = U diag(sigma) V^T` with `r = min(rows, cols)` columns.
#[derive(Debug, Clone)]
pub struct SvdResult {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

fn check_tolerance(tol: f64) -> Result<(), LinalgError> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(LinalgError::BadTolerance { tol });
    }
    Ok(())
}

fn check_symmetric(m: &Matrix) -> Result<(), LinalgError> {
    if m.rows() != m.cols() {
        return Err(LinalgError::NotSquare {
            rows: m.rows(),
            cols: m.cols(),
        });
    }
    if !m.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    let mut max_asym: f64 = 0.0;
    for i in 0..m.rows() {
        for j in (i + 1)..m.cols() {
            max_asym = max_asym.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    let limit = SYMMETRY_REL_TOL * m.frobenius_norm();
    if max_asym > limit {
        return Err(LinalgError::NotSymmetric { max_asym, limit });
    }
    Ok(())
}

/// Flips eigenvector columns so the largest-magnitude component is positive.
/// Ties on magnitude resolve to the lowest index (strict `>` keeps the first
/// maximum), making the convention deterministic.
fn fix_column_signs(m: &mut Matrix) {
    for j in 0..m.cols() {
        let mut anchor = 0;
        let mut best = -1.0;
        for i in 0..m.rows() {
            let a = m[(i, j)].abs();
            if a > best {
                best = a;
                anchor = i;
            }
        }
        if m[(anchor, j)] < 0.0 {
            for i in 0..m.rows() {
                m[(i, j)] = -m[(i, j)];
            }
        }
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += a[(i, j)] * a[(i, j)];
        }
    }
    (2.0 * s).sqrt()
}

/// One Jacobi rotation annihilating `a[(p, q)]`, accumulated into `v`.
/// Update formulas follow the numerically stable `tau` form.
fn jacobi_rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    // For very large |theta| the quadratic would overflow; the rotation there
    // is tiny and 1/(2 theta) is its exact limit.
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else if theta >= 0.0 {
        1.0 / (theta + (1.0 + theta * theta).sqrt())
    } else {
        1.0 / (theta - (1.0 + theta * theta).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let tau = s / (1.0 + c);

    let app = a[(p, p)];
    let aqq = a[(q, q)];
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;
    let n = a.rows();
    for k in 0..n {
        if k == p || k == q {
            continue;
        }
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        let new_kp = akp - s * (akq + tau * akp);
        let new_kq = akq + s * (akp - tau * akq);
        a[(k, p)] = new_kp;
        a[(p, k)] = new_kp;
        a[(k, q)] = new_kq;
        a[(q, k)] = new_kq;
    }
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp - s * (vkq + tau * vkp);
        v[(k, q)] = vkq + s * (vkp - tau * vkq);
    }
}

/// Unsorted Jacobi eigendecomposition; callers order and sign-fix the result.
fn jacobi_eigen(mut a: Matrix, tol: f64) -> Result<(Vec<f64>, Matrix), LinalgError> {
    let n = a.rows();
    let mut v = Matrix::identity(n);
    let norm = a.frobenius_norm();
    // The zero matrix is already diagonal; the relative threshold would
    // degenerate to 0 < 0 otherwise.
    if norm == 0.0 || n == 1 {
        let values = (0..n).map(|i| a[(i, i)]).collect();
        return Ok((values, v));
    }
    let threshold = tol * norm;
    for _ in 0..MAX_JACOBI_SWEEPS {
        if off_diagonal_norm(&a) < threshold {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            return Ok((values, v));
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                jacobi_rotate(&mut a, &mut v, p, q);
            }
        }
    }
    let off = off_diagonal_norm(&a);
    if off < threshold {
        let values = (0..n).map(|i| a[(i, i)]).collect();
        return Ok((values, v));
    }
    Err(LinalgError::NoConvergence {
        sweeps: MAX_JACOBI_SWEEPS,
        off,
        threshold,
    })
}

fn reorder_eigen(values: Vec<f64>, vectors: Matrix, order: &[usize]) -> EigenResult {
    let n = values.len();
    let mut sorted_values = Vec::with_capacity(n);
    let mut sorted_vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        sorted_values.push(values[src]);
        for i in 0..n {
            sorted_vectors[(i, dst)] = vectors[(i, src)];
        }
    }
    let mut result = EigenResult {
        values: sorted_values,
        vectors: sorted_vectors,
    };
    fix_column_signs(&mut result.vectors);
    result
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Eigenvalues come back in descending order with sign-fixed eigenvector
/// columns. The input must be symmetric within `1e-10` relative to its
/// Frobenius norm; `tol` controls the sweep convergence threshold
/// (`tol * ||M||_F` on the off-diagonal norm, [`DEFAULT_EIG_TOL`] by default).
pub fn sym_eigen(m: &Matrix, tol: f64) -> Result<EigenResult, LinalgError> {
    check_tolerance(tol)?;
    check_symmetric(m)?;
    let (values, vectors) = jacobi_eigen(m.clone(), tol)?;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));
    Ok(reorder_eigen(values, vectors, &order))
}

/// Fills `u`'s unfilled columns with an orthonormal completion drawn from the
/// standard basis: the first candidate whose residual after projecting out
/// every accepted column keeps norm > 0.5 is normalized and kept. Candidates
/// are scanned in index order, so the completion is deterministic.
fn complete_orthonormal(u: &mut Matrix, filled: &mut [bool]) {
    let m = u.rows();
    let r = u.cols();
    for j in 0..r {
        if filled[j] {
            continue;
        }
        let mut chosen: Option<Vec<f64>> = None;
        for cand in 0..m {
            let mut w = vec![0.0; m];
            w[cand] = 1.0;
            for k in 0..r {
                if !filled[k] {
                    continue;
                }
                let dot: f64 = (0..m).map(|i| u[(i, k)] * w[i]).sum();
                for i in 0..m {
                    w[i] -= dot * u[(i, k)];
                }
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.5 {
                for x in w.iter_mut() {
                    *x /= norm;
                }
                chosen = Some(w);
                break;
            }
        }
        let w = chosen.expect("fewer filled columns than rows, a basis vector must remain");
        for i in 0..m {
            u[(i, j)] = w[i];
        }
        filled[j] = true;
    }
}

/// Thin SVD for a matrix with `rows >= cols`, via the eigendecomposition of
/// `A^T A`.
fn svd_tall(a: &Matrix) -> Result<SvdResult, LinalgError> {
    let m = a.rows();
    let n = a.cols();
    let eig = sym_eigen(&a.gram(), DEFAULT_EIG_TOL)?;
    let sigma: Vec<f64> = eig.values.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let v = eig.vectors;
    let mut u = Matrix::zeros(m, n);
    let mut filled = vec![false; n];
    let rank_floor = sigma.first().copied().unwrap_or(0.0) * SIGMA_RANK_REL_TOL;
    for j in 0..n {
        if sigma[j] <= rank_floor || sigma[j] == 0.0 {
            continue;
        }
        // u_j = A v_j / sigma_j, renormalized to absorb rounding.
        let mut col = vec![0.0; m];
        for (i, slot) in col.iter_mut().enumerate() {
            let row = a.row(i);
            let mut s = 0.0;
            for k in 0..n {
                s += row[k] * v[(k, j)];
            }
            *slot = s / sigma[j];
        }
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        for i in 0..m {
            u[(i, j)] = col[i] / norm;
        }
        filled[j] = true;
    }
    complete_orthonormal(&mut u, &mut filled);
    Ok(SvdResult { u, sigma, v })
}

/// Thin singular value decomposition `A = U diag(sigma) V^T`.
///
/// The Gram matrix of the smaller dimension is eigendecomposed and the other
/// factor recovered by projection; rank-deficient inputs get their missing
/// singular vectors from a deterministic orthonormal completion. Singular
/// values are non-negative and descending; `V`'s columns follow the
/// largest-component-positive sign convention with `U` flipped to match.
pub fn svd(a: &Matrix) -> Result<SvdResult, LinalgError> {
    if a.rows() == 0 || a.cols() == 0 {
        return Err(LinalgError::Empty {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if !a.is_finite() {
        return Err(LinalgError::NonFinite);
    }
    if a.rows() >= a.cols() {
        let mut out = svd_tall(a)?;
        // sym_eigen already sign-fixed V; derived U columns inherit a
        // consistent orientation, completed ones are sign-free.
        fix_completed_signs(&mut out);
        return Ok(out);
    }
    let t = a.transpose();
    let flipped = svd_tall(&t)?;
    let mut out = SvdResult {
        u: flipped.v,
        sigma: flipped.sigma,
        v: flipped.u,
    };
    // The convention lives on V: flip each V column whose largest-magnitude
    // entry is negative, mirroring the flip into U to keep A = U S V^T.
    for j in 0..out.v.cols() {
        let mut anchor = 0;
        let mut best = -1.0;
        for i in 0..out.v.rows() {
            let a_ = out.v[(i, j)].abs();
            if a_ > best {
                best = a_;
                anchor = i;
            }
        }
        if out.v[(anchor, j)] < 0.0 {
            for i in 0..out.v.rows() {
                out.v[(i, j)] = -out.v[(i, j)];
            }
            for i in 0..out.u.rows() {
                out.u[(i, j)] = -out.u[(i, j)];
            }
        }
    }
    Ok(out)
}

/// Sign-fixes the columns of `U` that belong to zero singular values; the
/// data-derived columns are already oriented by `V`'s convention.
fn fix_completed_signs(out: &mut SvdResult) {
    let rank_floor = out.sigma.first().copied().unwrap_or(0.0) * SIGMA_RANK_REL_TOL;
    for j in 0..out.u.cols() {
        if out.sigma[j] > rank_floor && out.sigma[j] > 0.0 {
            continue;
        }
        let mut anchor = 0;
        let mut best = -1.0;
        for i in 0..out.u.rows() {
            let a = out.u[(i, j)].abs();
            if a > best {
                best = a;
                anchor = i;
            }
        }
        if out.u[(anchor, j)] < 0.0 {
            for i in 0..out.u.rows() {
                out.u[(i, j)] = -out.u[(i, j)];
            }
        }
    }
}

/// Generalized symmetric eigenproblem `A w = lambda B w` for symmetric `A`
/// and positive-definite `B`.
///
/// `B` is eigendecomposed, the problem is whitened to an ordinary symmetric
/// one, and eigenvectors are mapped back, giving `B`-orthonormal columns
/// (`w_i^T B w_j = delta_ij`). Eigenvalues come back ascending. `tol` is the
/// positive-definiteness floor: `B`'s smallest eigenvalue must exceed it.
pub fn gen_sym_eigen(a: &Matrix, b: &Matrix, tol: f64) -> Result<EigenResult, LinalgError> {
    check_tolerance(tol)?;
    check_symmetric(a)?;
    check_symmetric(b)?;
    if a.rows() != b.rows() {
        return Err(LinalgError::DataLength {
            rows: a.rows(),
            cols: b.rows(),
            len: a.rows(),
        });
    }
    let n = a.rows();
    let eig_b = sym_eigen(b, DEFAULT_EIG_TOL)?;
    let min_eigenvalue = eig_b.values.last().copied().unwrap_or(0.0);
    if min_eigenvalue <= tol {
        return Err(LinalgError::NotPositiveDefinite {
            min_eigenvalue,
            tol,
        });
    }
    // S = Q diag(lambda^-1/2): S^T B S = I, so A w = lambda B w becomes the
    // ordinary problem (S^T A S) y = lambda y with w = S y.
    let mut s = eig_b.vectors.clone();
    for j in 0..n {
        let inv_sqrt = 1.0 / eig_b.values[j].sqrt();
        for i in 0..n {
            s[(i, j)] *= inv_sqrt;
        }
    }
    let mut c = s.transpose().matmul(a).matmul(&s);
    // Symmetrize to absorb rounding from the two products.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (c[(i, j)] + c[(j, i)]);
            c[(i, j)] = avg;
            c[(j, i)] = avg;
        }
    }
    let inner = sym_eigen(&c, DEFAULT_EIG_TOL)?;
    let mut values: Vec<f64> = inner.values.clone();
    values.reverse();
    let mut vectors = Matrix::zeros(n, n);
    for dst in 0..n {
        let src = n - 1 - dst;
        for i in 0..n {
            let mut w = 0.0;
            for k in 0..n {
                w += s[(i, k)] * inner.vectors[(k, src)];
            }
            vectors[(i, dst)] = w;
        }
    }
    fix_column_signs(&mut vectors);
    Ok(EigenResult { values, vectors })
}
