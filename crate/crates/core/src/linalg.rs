//! Small dense LU factorization with partial pivoting.
//!
//! nalgebra's `LU` does not expose a transposed solve, and the choice
//! computations need both `(I - P) x = b` and `(I - P)^T y = w` from the
//! same factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const SINGULAR_PIVOT: f64 = 1e-300;

#[derive(Clone, Debug)]
pub struct DenseLu {
    /// L (unit lower, below the diagonal) and U (upper, including diagonal) packed.
    lu: DMatrix<f64>,
    /// Row `i` of the factored matrix is row `perm[i]` of the input.
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn new(mut a: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: a.ncols(),
            });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (mut piv, mut best) = (k, a[(k, k)].abs());
            for r in k + 1..n {
                let v = a[(r, k)].abs();
                if v > best {
                    piv = r;
                    best = v;
                }
            }
            if best < SINGULAR_PIVOT {
                return Err(Error::Domain(format!("singular matrix at column {k}")));
            }
            if piv != k {
                a.swap_rows(k, piv);
                perm.swap(k, piv);
            }
            let d = a[(k, k)];
            for r in k + 1..n {
                let f = a[(r, k)] / d;
                a[(r, k)] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        a[(r, c)] -= f * a[(k, c)];
                    }
                }
            }
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            let mut s = x[i];
            for k in 0..i {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.lu[(i, k)] * x[k];
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    /// Solves `A X = B` column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for c in 0..b.ncols() {
            let col = self.solve(&b.column(c).into_owned());
            out.set_column(c, &col);
        }
        out
    }

    /// Solves `A^T y = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        // A = P^T L U, so A^T = U^T L^T P.
        let n = self.dim();
        let mut z = b.clone();
        for i in 0..n {
            let mut s = z[i];
            for k in 0..i {
                s -= self.lu[(k, i)] * z[k];
            }
            z[i] = s / self.lu[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for k in i + 1..n {
                s -= self.lu[(k, i)] * z[k];
            }
            z[i] = s;
        }
        let mut y = DVector::zeros(n);
        for i in 0..n {
            y[self.perm[i]] = z[i];
        }
        y
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.solve_matrix(&DMatrix::identity(self.dim(), self.dim()))
    }
}
