//! Dense matrix/vector kernels and the closed-form weighted ridge
//! least-squares solver behind the local surrogate fit.
//!
//! Sizes here are small (design matrices of a few thousand rows and d ≲ 100
//! columns), so the solver goes through the normal equations and a plain
//! Cholesky factorization. Shape mismatches are programmer errors and panic;
//! rank deficiency is a data condition and is reported through [`Error`].

use crate::error::{Error, Result};

/// Any Cholesky pivot at or below this is treated as rank deficiency.
pub const MIN_PIVOT: f64 = 1e-12;

/// Ridge floor retried by [`solve_wls`] when the caller's lambda leaves the
/// normal equations singular.
pub const WLS_LAMBDA_FLOOR: f64 = 1e-6;

const SYMMETRY_TOL: f64 = 1e-9;

/// Row-major dense matrix of `f64`.
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

    /// Builds a matrix from row-major data. Panics if the length does not
    /// match `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(
            data.len(),
            rows * cols,
            "matrix data length {} does not match {}x{}",
            data.len(),
            rows,
            cols
        );
        Matrix { rows, cols, data }
    }

    /// Builds a matrix from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows in matrix construction");
            data.extend_from_slice(row);
        }
        Matrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = f(r, c);
            }
        }
        m
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

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * x` for a column vector `x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|r| dot(self.row(r), x)).collect()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if (self[(r, c)] - self[(c, r)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

impl std::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &self.data[r * self.cols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        debug_assert!(r < self.rows && c < self.cols);
        &mut self.data[r * self.cols + c]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solution of a weighted ridge least-squares problem.
#[derive(Debug, Clone)]
pub struct WlsSolution {
    /// Coefficient vector, intercept first.
    pub beta: Vec<f64>,
    /// Smallest diagonal entry of the Cholesky factor; a conditioning hint.
    pub condition_hint: f64,
    /// The ridge strength the solve actually used (the requested lambda, or
    /// the floor if a rank-deficiency retry kicked in).
    pub used_lambda: f64,
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Fails with [`Error::NotPositiveDefinite`] when any pivot is at or below
/// [`MIN_PIVOT`].
pub fn cholesky_factor(a: &Matrix) -> Result<Matrix> {
    assert_eq!(a.rows(), a.cols(), "cholesky requires a square matrix");
    assert!(
        a.is_symmetric(SYMMETRY_TOL),
        "cholesky requires a symmetric matrix"
    );
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut pivot = a[(j, j)];
        for k in 0..j {
            pivot -= l[(j, k)] * l[(j, k)];
        }
        if pivot <= MIN_PIVOT || pivot.is_nan() {
            return Err(Error::NotPositiveDefinite { index: j, pivot });
        }
        l[(j, j)] = pivot.sqrt();
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Ok(l)
}

/// Solves `A x = b` for symmetric positive-definite `A` via Cholesky.
pub fn cholesky_solve(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    assert_eq!(a.rows(), b.len(), "cholesky_solve dimension mismatch");
    let l = cholesky_factor(a)?;
    Ok(solve_with_factor(&l, b))
}

/// Forward/back substitution with a precomputed lower factor.
fn solve_with_factor(l: &Matrix, b: &[f64]) -> Vec<f64> {
    let n = l.rows();
    // L y = b
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[(i, k)] * y[k];
        }
        y[i] = s / l[(i, i)];
    }
    // L^T x = y
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Weighted ridge least squares on a design matrix whose first column is the
/// all-ones intercept column.
///
/// Minimizes `Σ_i w_i (y_i − X_i β)² + λ ‖β_1..d‖²` with the intercept left
/// unpenalized, assembled as normal equations `XᵀWX + λJ` and solved by
/// Cholesky. If the caller's lambda leaves the system singular the solve is
/// retried once at [`WLS_LAMBDA_FLOOR`]; failure after that is reported as
/// [`Error::DegenerateSystem`].
pub fn solve_wls(x: &Matrix, y: &[f64], w: &[f64], lambda: f64) -> Result<WlsSolution> {
    let n = x.rows();
    let p = x.cols();
    assert_eq!(y.len(), n, "solve_wls: y length mismatch");
    assert_eq!(w.len(), n, "solve_wls: weight length mismatch");
    assert!(n >= 2, "solve_wls requires at least two samples");
    assert!(
        lambda >= 0.0 && lambda.is_finite(),
        "ridge lambda must be finite and nonnegative"
    );
    assert!(
        w.iter().all(|&wi| wi >= 0.0 && wi.is_finite()),
        "weights must be finite and nonnegative"
    );

    // Gram matrix X^T W X and right-hand side X^T W y.
    let mut gram = Matrix::zeros(p, p);
    let mut rhs = vec![0.0; p];
    for i in 0..n {
        let row = x.row(i);
        let wi = w[i];
        if wi == 0.0 {
            continue;
        }
        for a in 0..p {
            let wa = wi * row[a];
            rhs[a] += wa * y[i];
            for b in a..p {
                gram[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            gram[(a, b)] = gram[(b, a)];
        }
    }

    let factor = |lam: f64| -> Result<Matrix> {
        let mut m = gram.clone();
        // J = identity with a zeroed intercept entry.
        for j in 1..p {
            m[(j, j)] += lam;
        }
        cholesky_factor(&m)
    };

    let (l, used_lambda) = match factor(lambda) {
        Ok(l) => (l, lambda),
        Err(first) if lambda < WLS_LAMBDA_FLOOR => match factor(WLS_LAMBDA_FLOOR) {
            Ok(l) => (l, WLS_LAMBDA_FLOOR),
            Err(_) => {
                return Err(Error::DegenerateSystem {
                    reason: format!(
                        "normal equations singular even at the lambda floor {WLS_LAMBDA_FLOOR:e} ({first})"
                    ),
                })
            }
        },
        Err(first) => {
            return Err(Error::DegenerateSystem {
                reason: format!("normal equations singular at lambda {lambda:e} ({first})"),
            })
        }
    };

    let beta = solve_with_factor(&l, &rhs);
    if !beta.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateSystem {
            reason: "solution contains non-finite entries".to_string(),
        });
    }
    let condition_hint = (0..p).map(|j| l[(j, j)]).fold(f64::INFINITY, f64::min);
    Ok(WlsSolution {
        beta,
        condition_hint,
        used_lambda,
    })
}
