use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `log |A ⊗ B| = dim_B · log|A| + dim_A · log|B|`.
pub fn kron_logdet(logdet_a: f64, dim_a: usize, logdet_b: f64, dim_b: usize) -> f64 {
    dim_b as f64 * logdet_a + dim_a as f64 * logdet_b
}

/// `(A ⊗ B) v` for a time-major `v` of length `cols(A) · cols(B)`, without
/// forming the product.
///
/// Reading `v` row-major as an `cols(A) × cols(B)` matrix `X`, the result is
/// the row-major flattening of `A X Bᵀ`.
pub fn kron_matvec(a: &DMatrix<f64>, b: &DMatrix<f64>, v: &[f64]) -> Result<Vec<f64>> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    if v.len() != ac * bc {
        return Err(Error::DimensionMismatch {
            expected: ac * bc,
            got: v.len(),
        });
    }
    let x = DMatrix::from_row_slice(ac, bc, v);
    let y = a * x * b.transpose();
    let mut out = Vec::with_capacity(ar * br);
    for i in 0..ar {
        for j in 0..br {
            out.push(y[(i, j)]);
        }
    }
    Ok(out)
}

/// Dense Kronecker product. Intended for oracles and small problems.
pub fn kron_dense(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.kronecker(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn logdet_property() {
        let v = kron_logdet(2.0f64.ln(), 2, 3.0f64.ln(), 3);
        assert!((v - 72.0f64.ln()).abs() < 1e-14);
        assert_eq!(kron_logdet(0.0, 4, 0.0, 7), 0.0);
    }

    #[test]
    fn identity_factors() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let out = kron_matvec(&DMatrix::identity(2, 2), &DMatrix::identity(3, 3), &v).unwrap();
        assert_eq!(out, v.to_vec());
    }

    #[test]
    fn matches_dense_two_by_two() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, -0.5, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[0.3, -1.0, 4.0, 0.7]);
        let v = [0.1, -2.0, 1.5, 0.25];
        let dense = kron_dense(&a, &b) * nalgebra::DVector::from_column_slice(&v);
        let fast = kron_matvec(&a, &b, &v).unwrap();
        for i in 0..4 {
            assert!((dense[i] - fast[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn rank_one_identity() {
        // v[k*nb + j] = w[k] u[j]  =>  (A⊗B)v [i*nb' + l] = (A w)[i] (B u)[l]
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -1.0, 2.0, 0.0, 1.5]);
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, -1.0, 0.5]);
        let w = nalgebra::DVector::from_column_slice(&[1.0, -2.0, 0.5]);
        let u = nalgebra::DVector::from_column_slice(&[3.0, 0.25]);
        let mut v = Vec::new();
        for k in 0..3 {
            for j in 0..2 {
                v.push(w[k] * u[j]);
            }
        }
        let out = kron_matvec(&a, &b, &v).unwrap();
        let aw = &a * &w;
        let bu = &b * &u;
        for i in 0..2 {
            for l in 0..2 {
                assert!((out[i * 2 + l] - aw[i] * bu[l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dimension_mismatch() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(kron_matvec(&a, &a, &[1.0; 3]).is_err());
    }
}
