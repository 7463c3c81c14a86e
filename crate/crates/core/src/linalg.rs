//! Dense Cholesky factorization for small symmetric matrices (row-major storage).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },
    #[error("matrix is not positive definite even with diagonal jitter {jitter:e}")]
    JitterExhausted { jitter: f64 },
    #[error("expected a {n}x{n} matrix, got {len} entries")]
    Shape { n: usize, len: usize },
}

/// How non-positive pivots are treated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pivots {
    /// Any pivot `<= 0` is an error.
    Strict,
    /// Pivots in `[-tol, tol]` become exact zeros (rank-deficient PSD input).
    SemiDefinite { tol: f64 },
}

/// Lower-triangular factor `L` with `L L^T = A + jitter I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    n: usize,
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    pub fn factor(a: &[f64], n: usize) -> Result<Self, LinalgError> {
        Self::factor_with(a, n, 0.0, Pivots::Strict)
    }

    pub fn factor_with(a: &[f64], n: usize, jitter: f64, pivots: Pivots) -> Result<Self, LinalgError> {
        if a.len() != n * n {
            return Err(LinalgError::Shape { n, len: a.len() });
        }
        let mut chol = Cholesky {
            n: 0,
            l: Vec::with_capacity(n * n),
            jitter,
        };
        for i in 0..n {
            let row = &a[i * n..i * n + i];
            chol.push_row(row, a[i * n + i] + jitter, pivots)?;
        }
        // Re-pack from the growing triangular layout into a square one.
        Ok(chol.into_square())
    }

    /// Try plain factorization first, then add `start`, `10*start`, ... up to `max`.
    pub fn factor_with_jitter(a: &[f64], n: usize, start: f64, max: f64) -> Result<Self, LinalgError> {
        match Self::factor(a, n) {
            Ok(c) => return Ok(c),
            Err(e @ LinalgError::Shape { .. }) => return Err(e),
            Err(_) => {}
        }
        let mut jitter = start;
        while jitter <= max * (1.0 + 1e-12) {
            if let Ok(c) = Self::factor_with(a, n, jitter, Pivots::Strict) {
                return Ok(c);
            }
            jitter *= 10.0;
        }
        Err(LinalgError::JitterExhausted { jitter: max })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Entry `L[i][j]` (zero above the diagonal).
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.l[i * self.n + j]
        }
    }

    pub fn lower(&self) -> &[f64] {
        &self.l
    }

    // While growing, rows are stored packed: row i occupies i+1 entries.
    fn push_row(&mut self, a_row: &[f64], a_diag: f64, pivots: Pivots) -> Result<(), LinalgError> {
        let i = self.n;
        let (row, diag) = next_row_packed(&self.l, i, a_row, a_diag, pivots)?;
        self.l.extend_from_slice(&row);
        self.l.push(diag);
        self.n += 1;
        Ok(())
    }

    fn into_square(self) -> Self {
        let n = self.n;
        let mut sq = vec![0.0; n * n];
        let mut off = 0;
        for i in 0..n {
            sq[i * n..i * n + i + 1].copy_from_slice(&self.l[off..off + i + 1]);
            off += i + 1;
        }
        Cholesky {
            n,
            l: sq,
            jitter: self.jitter,
        }
    }

    /// Compute the row that would be appended to `L` if the matrix were bordered by
    /// `a_row` (covariances with the existing rows) and `a_diag`.
    pub fn bordered_row(&self, a_row: &[f64], a_diag: f64, pivots: Pivots) -> Result<(Vec<f64>, f64), LinalgError> {
        let n = self.n;
        debug_assert_eq!(a_row.len(), n);
        let mut row = vec![0.0; n];
        for j in 0..n {
            let mut s = a_row[j];
            let lj = &self.l[j * n..j * n + j];
            for k in 0..j {
                s -= row[k] * lj[k];
            }
            let d = self.l[j * n + j];
            row[j] = if d == 0.0 { 0.0 } else { s / d };
        }
        let diag = finish_pivot(n, a_diag - row.iter().map(|v| v * v).sum::<f64>(), pivots)?;
        Ok((row, diag))
    }

    /// Solve `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[i];
            let li = &self.l[i * n..i * n + i];
            for (k, lik) in li.iter().enumerate() {
                s -= lik * b[k];
            }
            let d = self.l[i * n + i];
            b[i] = if d == 0.0 { 0.0 } else { s / d };
        }
    }

    /// Solve `L^T x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = b[i];
            for k in i + 1..n {
                s -= self.l[k * n + i] * b[k];
            }
            let d = self.l[i * n + i];
            b[i] = if d == 0.0 { 0.0 } else { s / d };
        }
    }

    /// Solve `(L L^T) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    pub fn log_det(&self) -> f64 {
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<f64>() * 2.0
    }

    /// Dense inverse of `L L^T` (row-major).
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        // inv(L) column by column, then inv(A) = inv(L)^T inv(L).
        let mut linv = vec![0.0; n * n];
        for c in 0..n {
            let mut e = vec![0.0; n];
            e[c] = 1.0;
            self.solve_lower_in_place(&mut e);
            for r in 0..n {
                linv[r * n + c] = e[r];
            }
        }
        let mut inv = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut s = 0.0;
                for k in i.max(j)..n {
                    s += linv[k * n + i] * linv[k * n + j];
                }
                inv[i * n + j] = s;
                inv[j * n + i] = s;
            }
        }
        inv
    }

    /// `L L^T` as a dense matrix.
    pub fn reconstruct(&self) -> Vec<f64> {
        let n = self.n;
        let mut a = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let m = i.min(j);
                a[i * n + j] = (0..=m).map(|k| self.l[i * n + k] * self.l[j * n + k]).sum();
            }
        }
        a
    }
}

fn next_row_packed(
    packed: &[f64],
    i: usize,
    a_row: &[f64],
    a_diag: f64,
    pivots: Pivots,
) -> Result<(Vec<f64>, f64), LinalgError> {
    let mut row = vec![0.0; i];
    for j in 0..i {
        let off = j * (j + 1) / 2;
        let lj = &packed[off..off + j];
        let mut s = a_row[j];
        for k in 0..j {
            s -= row[k] * lj[k];
        }
        let d = packed[off + j];
        row[j] = if d == 0.0 { 0.0 } else { s / d };
    }
    let diag = finish_pivot(i, a_diag - row.iter().map(|v| v * v).sum::<f64>(), pivots)?;
    Ok((row, diag))
}

fn finish_pivot(row: usize, pivot: f64, pivots: Pivots) -> Result<f64, LinalgError> {
    match pivots {
        Pivots::Strict if pivot > 0.0 && pivot.is_finite() => Ok(pivot.sqrt()),
        Pivots::SemiDefinite { tol } if pivot > tol && pivot.is_finite() => Ok(pivot.sqrt()),
        Pivots::SemiDefinite { tol } if pivot >= -tol => Ok(0.0),
        _ => Err(LinalgError::NotPositiveDefinite { row, pivot }),
    }
}
