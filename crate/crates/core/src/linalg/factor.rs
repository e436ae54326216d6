use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{MatMut, Side};

use super::CsrMatrix;
use crate::error::{Error, Result};

// Fixed count keeps repeated solves bitwise reproducible.
const REFINEMENT_STEPS: usize = 2;

// Ruiz sweeps; scales are rounded to powers of two so scaling is exact.
const EQUILIBRATION_SWEEPS: usize = 8;

/// Sparse LU with partial pivoting of the row/column equilibrated matrix
/// `D_r A D_c`; one factorization serves solves with both `A` and `A^T`.
pub struct SparseLu {
    matrix: CsrMatrix,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    lu: Option<Lu<usize, f64>>,
}

fn pow2_round(v: f64) -> f64 {
    if v > 0.0 && v.is_finite() {
        2f64.powi(v.log2().round() as i32)
    } else {
        1.0
    }
}

fn equilibrate(a: &CsrMatrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (a.nrows(), a.ncols());
    let mut r = vec![1.0; m];
    let mut c = vec![1.0; n];
    for _ in 0..EQUILIBRATION_SWEEPS {
        let mut rmax = vec![0.0f64; m];
        let mut cmax = vec![0.0f64; n];
        for (i, j, v) in a.iter() {
            let s = (r[i] * v * c[j]).abs();
            rmax[i] = rmax[i].max(s);
            cmax[j] = cmax[j].max(s);
        }
        for (ri, mx) in r.iter_mut().zip(&rmax) {
            *ri *= pow2_round(1.0 / mx.sqrt());
        }
        for (cj, mx) in c.iter_mut().zip(&cmax) {
            *cj *= pow2_round(1.0 / mx.sqrt());
        }
    }
    (r, c)
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu").field("dim", &self.dim()).finish_non_exhaustive()
    }
}

impl SparseLu {
    pub fn new(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::InvalidArgument(format!(
                "LU of a non-square {}x{} matrix",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        let n = matrix.nrows();
        let (row_scale, col_scale) = equilibrate(&matrix);
        let lu = if n == 0 {
            None
        } else {
            let mut t = super::TripletBuilder::with_capacity(n, n, matrix.nnz());
            for (i, j, v) in matrix.iter() {
                t.push(i, j, row_scale[i] * v * col_scale[j]);
            }
            Some(
                t.build()
                    .to_faer()
                    .sp_lu()
                    .map_err(|e| Error::Singular(format!("sparse LU failed: {e:?}")))?,
            )
        };
        let f = SparseLu {
            matrix,
            row_scale,
            col_scale,
            lu,
        };

        // A numerically zero pivot shows up as a non-finite or garbage solve.
        let ones = vec![1.0; n];
        let rhs = f.matrix.mul_vec(&ones);
        let x = f.solve(&rhs);
        let err = x
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0f64, |m, e| if e.is_nan() { f64::NAN } else { m.max(e) });
        if !(err <= 1e-3) {
            return Err(Error::Singular(format!(
                "factorization of {n}x{n} matrix is numerically singular (probe error {err:.3e})"
            )));
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, rhs: &[f64], transpose: bool) -> Vec<f64> {
        let (pre, post) = if transpose {
            (&self.col_scale, &self.row_scale)
        } else {
            (&self.row_scale, &self.col_scale)
        };
        let mut x: Vec<f64> = rhs.iter().zip(pre).map(|(b, s)| b * s).collect();
        if let Some(lu) = &self.lu {
            let n = x.len();
            let view = MatMut::from_column_major_slice_mut(&mut x, n, 1);
            if transpose {
                lu.solve_transpose_in_place(view);
            } else {
                lu.solve_in_place(view);
            }
        }
        x.iter_mut().zip(post).for_each(|(v, s)| *v *= s);
        x
    }

    fn refined(&self, rhs: &[f64], transpose: bool) -> Vec<f64> {
        assert_eq!(rhs.len(), self.dim(), "rhs length");
        let mut x = self.raw_solve(rhs, transpose);
        for _ in 0..REFINEMENT_STEPS {
            let mut r = rhs.to_vec();
            if transpose {
                self.matrix.tr_mul_vec_add(-1.0, &x, &mut r);
            } else {
                self.matrix.mul_vec_add(-1.0, &x, &mut r);
            }
            let dx = self.raw_solve(&r, transpose);
            super::axpy(1.0, &dx, &mut x);
        }
        x
    }

    /// Solves `A x = rhs`.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.refined(rhs, false)
    }

    /// Solves `A^T x = rhs`.
    pub fn solve_transpose(&self, rhs: &[f64]) -> Vec<f64> {
        self.refined(rhs, true)
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl std::fmt::Debug for SparseCholesky {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseCholesky").field("dim", &self.n).finish_non_exhaustive()
    }
}

impl SparseCholesky {
    pub fn new(matrix: &CsrMatrix) -> Result<Self> {
        let n = matrix.nrows();
        if n != matrix.ncols() {
            return Err(Error::InvalidArgument("Cholesky of a non-square matrix".into()));
        }
        let llt = if n == 0 {
            None
        } else {
            Some(
                matrix
                    .to_faer()
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Singular(format!("matrix is not positive definite: {e:?}")))?,
            )
        };
        Ok(SparseCholesky { n, llt })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "rhs length");
        let mut x = rhs.to_vec();
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(&mut x, self.n, 1));
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::TripletBuilder;

    #[test]
    fn lu_solves_and_transposes() {
        let mut t = TripletBuilder::new(3, 3);
        for (i, j, v) in [(0, 0, 4.0), (0, 1, 1.0), (1, 0, -2.0), (1, 1, 3.0), (2, 2, 0.5), (1, 2, 1.0)] {
            t.push(i, j, v);
        }
        let a = t.build();
        let lu = SparseLu::new(a.clone()).unwrap();
        let b = [1.0, 2.0, 3.0];
        let x = lu.solve(&b);
        let r = a.mul_vec(&x);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-14));
        let y = lu.solve_transpose(&b);
        let r = a.tr_mul_vec(&y);
        assert!(r.iter().zip(&b).all(|(u, v)| (u - v).abs() < 1e-14));
    }

    #[test]
    fn saddle_without_pivot_on_diagonal() {
        // [[1, 1], [1, 0]] needs row pivoting.
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        let lu = SparseLu::new(t.build()).unwrap();
        let x = lu.solve(&[3.0, 1.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(0, 1, 1.0);
        t.push(1, 0, 1.0);
        t.push(1, 1, 1.0);
        assert!(matches!(SparseLu::new(t.build()), Err(Error::Singular(_))));
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut t = TripletBuilder::new(2, 2);
        t.push(0, 0, 1.0);
        t.push(1, 1, -1.0);
        assert!(SparseCholesky::new(&t.build()).is_err());
        let c = SparseCholesky::new(&CsrMatrix::identity(2).scaled(2.0)).unwrap();
        let x = c.solve(&[2.0, 4.0]);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
    }
}
