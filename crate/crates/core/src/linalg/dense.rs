use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Dense Cholesky factorization, erroring on non-positive-definite input.
pub fn cholesky(a: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(a.clone()).ok_or(Error::NotPositiveDefinite { block: 0 })
}

/// `log |A|` from a Cholesky factor.
pub fn cholesky_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * c.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `(log |A|, rᵀ A⁻¹ r)` for a symmetric positive definite `A`.
pub fn logdet_and_quadratic(a: &DMatrix<f64>, r: &[f64]) -> Result<(f64, f64)> {
    if a.nrows() != r.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: r.len(),
        });
    }
    let c = cholesky(a)?;
    let mut z = DVector::from_column_slice(r);
    c.l_dirty().solve_lower_triangular_mut(&mut z);
    // l_dirty has garbage above the diagonal; the triangular solve ignores it.
    Ok((cholesky_logdet(&c), z.norm_squared()))
}

/// Eigenvalues and eigenvectors of a symmetric matrix, eigenvalues clipped
/// at zero from below.
pub fn sym_eigen_clipped(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let e = SymmetricEigen::new(a.clone());
    let vals = e.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    (vals, e.eigenvectors)
}
