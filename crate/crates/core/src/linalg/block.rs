//! Symmetric block-tridiagonal matrices and their block Cholesky factor.
//!
//! Blocks are stored back to back in one buffer, column-major within each
//! block. The off-diagonal sequence holds the sub-diagonal blocks: `off(k)`
//! sits at block position `(k+1, k)` and its transpose at `(k, k+1)`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DMatrixView, DMatrixViewMut, DVector, DVectorView};
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use super::tridiag::SymTridiagonal;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BlockTridiagonal {
    n: usize,
    m: usize,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl BlockTridiagonal {
    /// `m` diagonal blocks of size `n × n`, all zero.
    pub fn zeros(m: usize, n: usize) -> Self {
        Self {
            n,
            m,
            diag: vec![0.0; m * n * n],
            off: vec![0.0; m.saturating_sub(1) * n * n],
        }
    }

    pub fn from_blocks(diag: &[DMatrix<f64>], off: &[DMatrix<f64>]) -> Result<Self> {
        let m = diag.len();
        if m == 0 || off.len() + 1 != m {
            return Err(Error::DimensionMismatch {
                expected: m.saturating_sub(1),
                got: off.len(),
            });
        }
        let n = diag[0].nrows();
        let mut out = Self::zeros(m, n);
        for (k, d) in diag.iter().enumerate() {
            if d.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: d.nrows(),
                });
            }
            out.diag_block_mut(k).copy_from(d);
        }
        for (k, c) in off.iter().enumerate() {
            if c.shape() != (n, n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: c.nrows(),
                });
            }
            out.off_block_mut(k).copy_from(c);
        }
        Ok(out)
    }

    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n * self.m
    }

    pub fn diag_block(&self, k: usize) -> DMatrixView<'_, f64> {
        let s = self.n * self.n;
        DMatrixView::from_slice(&self.diag[k * s..(k + 1) * s], self.n, self.n)
    }

    pub fn diag_block_mut(&mut self, k: usize) -> DMatrixViewMut<'_, f64> {
        let s = self.n * self.n;
        DMatrixViewMut::from_slice(&mut self.diag[k * s..(k + 1) * s], self.n, self.n)
    }

    pub fn off_block(&self, k: usize) -> DMatrixView<'_, f64> {
        let s = self.n * self.n;
        DMatrixView::from_slice(&self.off[k * s..(k + 1) * s], self.n, self.n)
    }

    pub fn off_block_mut(&mut self, k: usize) -> DMatrixViewMut<'_, f64> {
        let s = self.n * self.n;
        DMatrixViewMut::from_slice(&mut self.off[k * s..(k + 1) * s], self.n, self.n)
    }

    /// Adds `extra[i]` to global diagonal entry `i`.
    pub fn add_diagonal(&mut self, extra: &[f64]) -> Result<()> {
        if extra.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: extra.len(),
            });
        }
        let n = self.n;
        for k in 0..self.m {
            let mut d = self.diag_block_mut(k);
            for j in 0..n {
                d[(j, j)] += extra[k * n + j];
            }
        }
        Ok(())
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let mut a = DMatrix::zeros(n * m, n * m);
        for k in 0..m {
            a.view_mut((k * n, k * n), (n, n)).copy_from(&self.diag_block(k));
        }
        for k in 0..m.saturating_sub(1) {
            let c = self.off_block(k);
            a.view_mut(((k + 1) * n, k * n), (n, n)).copy_from(&c);
            a.view_mut((k * n, (k + 1) * n), (n, n)).copy_from(&c.transpose());
        }
        a
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let (n, m) = (self.n, self.m);
        if v.len() != n * m {
            return Err(Error::DimensionMismatch {
                expected: n * m,
                got: v.len(),
            });
        }
        let mut out = vec![0.0; n * m];
        for k in 0..m {
            let vk = DVectorView::from_slice(&v[k * n..(k + 1) * n], n);
            let mut acc = self.diag_block(k) * vk;
            if k > 0 {
                let prev = DVectorView::from_slice(&v[(k - 1) * n..k * n], n);
                acc += self.off_block(k - 1) * prev;
            }
            if k + 1 < m {
                let next = DVectorView::from_slice(&v[(k + 1) * n..(k + 2) * n], n);
                acc += self.off_block(k).tr_mul(&next);
            }
            out[k * n..(k + 1) * n].copy_from_slice(acc.as_slice());
        }
        Ok(out)
    }
}

/// Block-tridiagonal representation of `T ⊗ B`: `D_k = d_k B`,
/// `C_k = c_k B`.
pub fn scale_blocks(t: &SymTridiagonal, b: &DMatrix<f64>) -> Result<BlockTridiagonal> {
    let n = b.nrows();
    if b.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.ncols(),
        });
    }
    let m = t.dim();
    let mut out = BlockTridiagonal::zeros(m, n);
    let s = n * n;
    for (k, &d) in t.diag().iter().enumerate() {
        for (dst, src) in out.diag[k * s..(k + 1) * s].iter_mut().zip(b.as_slice()) {
            *dst = d * src;
        }
    }
    for (k, &c) in t.off().iter().enumerate() {
        for (dst, src) in out.off[k * s..(k + 1) * s].iter_mut().zip(b.as_slice()) {
            *dst = c * src;
        }
    }
    Ok(out)
}

/// Block Cholesky factor: lower-triangular diagonal blocks `L_k` and dense
/// sub-diagonal blocks `E_k`, with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct BlockCholeskyFactor {
    n: usize,
    m: usize,
    l: Vec<f64>,
    e: Vec<f64>,
}

impl BlockCholeskyFactor {
    pub fn block_size(&self) -> usize {
        self.n
    }

    pub fn n_blocks(&self) -> usize {
        self.m
    }

    pub fn l_block(&self, k: usize) -> DMatrixView<'_, f64> {
        let s = self.n * self.n;
        DMatrixView::from_slice(&self.l[k * s..(k + 1) * s], self.n, self.n)
    }

    fn l_slice(&self, k: usize) -> &[f64] {
        let s = self.n * self.n;
        &self.l[k * s..(k + 1) * s]
    }

    pub fn e_block(&self, k: usize) -> DMatrixView<'_, f64> {
        let s = self.n * self.n;
        DMatrixView::from_slice(&self.e[k * s..(k + 1) * s], self.n, self.n)
    }

    /// Dense lower-triangular factor `L`.
    pub fn to_dense_lower(&self) -> DMatrix<f64> {
        let (n, m) = (self.n, self.m);
        let mut l = DMatrix::zeros(n * m, n * m);
        for k in 0..m {
            l.view_mut((k * n, k * n), (n, n)).copy_from(&self.l_block(k));
        }
        for k in 0..m.saturating_sub(1) {
            l.view_mut(((k + 1) * n, k * n), (n, n)).copy_from(&self.e_block(k));
        }
        l
    }
}

/// Right-looking Cholesky of a column-major `n × n` block in place; the
/// strict upper triangle is zeroed.
fn cholesky_in_place(a: &mut [f64], n: usize, block: usize) -> Result<()> {
    for j in 0..n {
        let d = a[j * n + j];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { block });
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for v in &mut a[j * n + j + 1..(j + 1) * n] {
            *v /= d;
        }
        a[j * n..j * n + j].fill(0.0);
        let (head, tail) = a.split_at_mut((j + 1) * n);
        let col_j = &head[j * n..];
        for k in j + 1..n {
            let akj = col_j[k];
            let col_k = &mut tail[(k - j - 1) * n..(k - j) * n];
            for (t, s) in col_k[k..].iter_mut().zip(&col_j[k..]) {
                *t -= akj * s;
            }
        }
    }
    Ok(())
}

/// Solves `L x = b` in place for a lower-triangular column-major block.
fn forward_subst(l: &[f64], n: usize, b: &mut [f64]) {
    for j in 0..n {
        let x = b[j] / l[j * n + j];
        b[j] = x;
        for (bi, lij) in b[j + 1..n].iter_mut().zip(&l[j * n + j + 1..(j + 1) * n]) {
            *bi -= lij * x;
        }
    }
}

/// Solves `Lᵀ x = b` in place for a lower-triangular column-major block.
fn backward_subst_t(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        let dot: f64 = l[i * n + i + 1..(i + 1) * n].iter().zip(&b[i + 1..n]).map(|(a, c)| a * c).sum();
        b[i] = (b[i] - dot) / l[i * n + i];
    }
}

/// Block Cholesky without pivoting:
/// `L_0 L_0ᵀ = D_0`, `E_k = C_k L_k⁻ᵀ`, `L_{k+1} L_{k+1}ᵀ = D_{k+1} - E_k E_kᵀ`.
pub fn block_tridiag_cholesky(mat: &BlockTridiagonal) -> Result<BlockCholeskyFactor> {
    let (n, m) = (mat.n, mat.m);
    let s = n * n;
    let mut l = mat.diag.clone();
    let mut e = mat.off.clone();
    let mut t = vec![0.0; s];
    for k in 0..m {
        if k > 0 {
            // L_k block currently holds D_k; subtract E_{k-1} E_{k-1}ᵀ.
            // Only the lower triangle is read by the factorization.
            let ep = &e[(k - 1) * s..k * s];
            let lk = &mut l[k * s..(k + 1) * s];
            for p in 0..n {
                let col_p = &ep[p * n..(p + 1) * n];
                for j in 0..n {
                    let a = col_p[j];
                    if a != 0.0 {
                        for (t, v) in lk[j * n + j..(j + 1) * n].iter_mut().zip(&col_p[j..]) {
                            *t -= a * v;
                        }
                    }
                }
            }
        }
        cholesky_in_place(&mut l[k * s..(k + 1) * s], n, k)?;
        if k + 1 < m {
            // Eₖᵀ = Lₖ⁻¹ Cₖᵀ, one contiguous column at a time.
            let lk = &l[k * s..(k + 1) * s];
            let ek = &mut e[k * s..(k + 1) * s];
            for r in 0..n {
                for c in 0..n {
                    t[r * n + c] = ek[c * n + r];
                }
                forward_subst(lk, n, &mut t[r * n..(r + 1) * n]);
            }
            for r in 0..n {
                for c in 0..n {
                    ek[c * n + r] = t[r * n + c];
                }
            }
        }
    }
    Ok(BlockCholeskyFactor { n, m, l, e })
}

/// Solves `M x = rhs` using the block factor: forward substitution with
/// `L`, then backward with `Lᵀ`.
pub fn block_tridiag_solve(f: &BlockCholeskyFactor, rhs: &[f64]) -> Result<Vec<f64>> {
    let (n, m) = (f.n, f.m);
    if rhs.len() != n * m {
        return Err(Error::DimensionMismatch {
            expected: n * m,
            got: rhs.len(),
        });
    }
    let mut x = rhs.to_vec();
    for k in 0..m {
        if k > 0 {
            let (done, rest) = x.split_at_mut(k * n);
            let prev = DVector::from_column_slice(&done[(k - 1) * n..]);
            let upd = f.e_block(k - 1) * prev;
            for j in 0..n {
                rest[j] -= upd[j];
            }
        }
        forward_subst(f.l_slice(k), n, &mut x[k * n..(k + 1) * n]);
    }
    for k in (0..m).rev() {
        if k + 1 < m {
            let (head, tail) = x.split_at_mut((k + 1) * n);
            let next = DVector::from_column_slice(&tail[..n]);
            let upd = f.e_block(k).tr_mul(&next);
            for j in 0..n {
                head[k * n + j] -= upd[j];
            }
        }
        backward_subst_t(f.l_slice(k), n, &mut x[k * n..(k + 1) * n]);
    }
    Ok(x)
}

/// `log |L Lᵀ| = 2 Σ_k Σ_j ln (L_k)_jj`.
pub fn logdet_from_block_cholesky(f: &BlockCholeskyFactor) -> f64 {
    let mut acc = 0.0;
    for k in 0..f.m {
        let lk = f.l_block(k);
        for j in 0..f.n {
            acc += lk[(j, j)].ln();
        }
    }
    2.0 * acc
}
