//! Shared triangular-factorization kernel.
//!
//! Every determinant, inverse and quadratic form in the crate goes through
//! [`SpdFactor`]. Determinants are only ever produced in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Largest accepted condition-number estimate for a factorized matrix.
pub const MAX_CONDITION: f64 = 1e12;

/// Cholesky factorization of a symmetric positive-definite matrix.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    chol: Option<Cholesky<f64, Dyn>>,
    dim: usize,
    log_det: f64,
}

impl SpdFactor {
    /// Factorizes `m`, rejecting asymmetric, indefinite and near-singular input.
    ///
    /// The condition number is estimated from the spread of the Cholesky
    /// diagonal, which is a lower bound on the true 2-norm condition number.
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let dim = m.nrows();
        if m.ncols() != dim {
            return Err(Error::NumericalDomain(format!(
                "expected a square matrix, got {}x{}",
                dim,
                m.ncols()
            )));
        }
        if dim == 0 {
            return Ok(Self { chol: None, dim, log_det: 0.0 });
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalDomain("matrix has non-finite entries".into()));
        }
        let scale = m.amax().max(f64::MIN_POSITIVE);
        for i in 0..dim {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-10 * scale {
                    return Err(Error::NumericalDomain(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        let sym = (m + m.transpose()) * 0.5;
        let chol = Cholesky::new(sym)
            .ok_or_else(|| Error::NumericalDomain("matrix is not positive definite".into()))?;
        let l = chol.l_dirty();
        let mut log_det = 0.0;
        let mut dmin = f64::INFINITY;
        let mut dmax = 0.0_f64;
        for i in 0..dim {
            let d = l[(i, i)];
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NumericalDomain("matrix is not positive definite".into()));
            }
            dmin = dmin.min(d);
            dmax = dmax.max(d);
            log_det += 2.0 * d.ln();
        }
        let cond = (dmax / dmin).powi(2);
        if cond > MAX_CONDITION {
            return Err(Error::NumericalDomain(format!(
                "matrix is near-singular (condition estimate {cond:.3e})"
            )));
        }
        Ok(Self { chol: Some(chol), dim, log_det })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Natural log of the determinant.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match &self.chol {
            Some(c) => c.solve(b),
            None => DVector::zeros(0),
        }
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.solve(b),
            None => DMatrix::zeros(0, b.ncols()),
        }
    }

    /// Explicit inverse, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => {
                let inv = c.inverse();
                (&inv + inv.transpose()) * 0.5
            }
            None => DMatrix::zeros(0, 0),
        }
    }

    /// `xᵀ A⁻¹ x`, evaluated as the squared norm of `L⁻¹ x`.
    pub fn inv_quad_form(&self, x: &DVector<f64>) -> f64 {
        match &self.chol {
            Some(c) => {
                let z = c
                    .l_dirty()
                    .solve_lower_triangular(x)
                    .expect("cholesky factor has a positive diagonal");
                z.norm_squared()
            }
            None => 0.0,
        }
    }

    /// Lower-triangular factor `L` with `A = L Lᵀ`.
    pub fn lower(&self) -> DMatrix<f64> {
        match &self.chol {
            Some(c) => c.l(),
            None => DMatrix::zeros(0, 0),
        }
    }
}

/// Log-determinant of a symmetric positive-definite matrix.
pub fn spd_log_det(m: &DMatrix<f64>) -> Result<f64> {
    SpdFactor::new(m).map(|f| f.log_det())
}

/// `Xᵀ X` for a design matrix.
pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x)
}

/// Block-diagonal assembly.
pub fn block_diagonal(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let dim: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(dim, dim);
    let mut at = 0;
    for b in blocks {
        let k = b.nrows();
        out.view_mut((at, at), (k, k)).copy_from(b);
        at += k;
    }
    out
}

/// Indices of columns that are (numerically) linear combinations of the
/// preceding columns, found by modified Gram-Schmidt.
pub fn dependent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut offending = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm0 = col.norm();
        let mut r = col;
        for q in &basis {
            let proj = q.dot(&r);
            r -= q * proj;
        }
        let norm = r.norm();
        if norm0 == 0.0 || norm <= 1e-9 * norm0 {
            offending.push(j);
        } else {
            basis.push(r / norm);
        }
    }
    offending
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_det_of_diagonal() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0, 5.0]));
        let f = SpdFactor::new(&m).unwrap();
        assert!((f.log_det() - 30f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn rejects_indefinite_and_near_singular() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(SpdFactor::new(&m), Err(Error::NumericalDomain(_))));
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(matches!(SpdFactor::new(&m), Err(Error::NumericalDomain(_))));
    }

    #[test]
    fn large_scale_is_fine() {
        let m = DMatrix::from_row_slice(2, 2, &[2e28, 1e28, 1e28, 2e28]);
        let f = SpdFactor::new(&m).unwrap();
        assert!((f.log_det() - (3.0f64.ln() + 56.0 * 10f64.ln())).abs() < 1e-10);
    }

    #[test]
    fn quad_form_matches_solve() {
        let m = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let f = SpdFactor::new(&m).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let direct = x.dot(&f.solve(&x));
        assert!((f.inv_quad_form(&x) - direct).abs() < 1e-12);
    }

    #[test]
    fn finds_dependent_column() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 3.0, 1.0, 3.0, 4.0, 1.0, 4.0, 5.0]);
        assert_eq!(dependent_columns(&x), vec![2]);
    }

    #[test]
    fn empty_matrix_has_zero_log_det() {
        let f = SpdFactor::new(&DMatrix::zeros(0, 0)).unwrap();
        assert_eq!(f.log_det(), 0.0);
        assert_eq!(f.inv_quad_form(&DVector::zeros(0)), 0.0);
    }
}
