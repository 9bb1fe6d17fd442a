use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::kernels::{check_strictly_increasing, L_MIN};

/// Symmetric tridiagonal matrix stored as its main diagonal and first
/// off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(Error::DimensionMismatch {
                expected: diag.len().saturating_sub(1),
                got: off.len(),
            });
        }
        Ok(Self { diag, off })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            diag: vec![1.0; m],
            off: vec![0.0; m.saturating_sub(1)],
        }
    }

    pub fn diagonal(diag: Vec<f64>) -> Self {
        let off = vec![0.0; diag.len().saturating_sub(1)];
        Self { diag, off }
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let m = self.dim();
        let mut a = DMatrix::zeros(m, m);
        for i in 0..m {
            a[(i, i)] = self.diag[i];
        }
        for (i, &c) in self.off.iter().enumerate() {
            a[(i + 1, i)] = c;
            a[(i, i + 1)] = c;
        }
        a
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        let m = self.dim();
        if v.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: v.len(),
            });
        }
        let mut out: Vec<f64> = self.diag.iter().zip(v).map(|(d, x)| d * x).collect();
        for (i, &c) in self.off.iter().enumerate() {
            out[i] += c * v[i + 1];
            out[i + 1] += c * v[i];
        }
        Ok(out)
    }

    /// Adds `extra[i]` to the `i`-th diagonal entry.
    pub fn add_diagonal(&mut self, extra: &[f64]) -> Result<()> {
        if extra.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: extra.len(),
            });
        }
        for (d, e) in self.diag.iter_mut().zip(extra) {
            *d += e;
        }
        Ok(())
    }

    /// `LDLᵀ` elimination without pivoting. Fails on the first
    /// non-positive pivot.
    pub fn factor(&self) -> Result<TridiagonalLdl> {
        let m = self.dim();
        let mut pivots = Vec::with_capacity(m);
        let mut mult = Vec::with_capacity(m.saturating_sub(1));
        let mut p = self.diag[0];
        if !(p > 0.0) {
            return Err(Error::NotPositiveDefinite { block: 0 });
        }
        pivots.push(p);
        for i in 1..m {
            let l = self.off[i - 1] / p;
            p = self.diag[i] - l * self.off[i - 1];
            if !(p > 0.0) {
                return Err(Error::NotPositiveDefinite { block: i });
            }
            mult.push(l);
            pivots.push(p);
        }
        Ok(TridiagonalLdl { pivots, mult })
    }

    pub fn logdet(&self) -> Result<f64> {
        Ok(self.factor()?.logdet())
    }
}

/// `LDLᵀ` factor of a positive definite [`SymTridiagonal`].
#[derive(Debug, Clone)]
pub struct TridiagonalLdl {
    pivots: Vec<f64>,
    mult: Vec<f64>,
}

impl TridiagonalLdl {
    pub fn logdet(&self) -> f64 {
        self.pivots.iter().map(|p| p.ln()).sum()
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.pivots.len();
        if rhs.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: rhs.len(),
            });
        }
        let mut x = rhs.to_vec();
        for i in 1..m {
            x[i] -= self.mult[i - 1] * x[i - 1];
        }
        for i in 0..m {
            x[i] /= self.pivots[i];
        }
        for i in (0..m.saturating_sub(1)).rev() {
            x[i] -= self.mult[i] * x[i + 1];
        }
        Ok(x)
    }
}

/// Thomas algorithm for a symmetric positive definite tridiagonal system.
pub fn thomas_solve(t: &SymTridiagonal, rhs: &[f64]) -> Result<Vec<f64>> {
    if rhs.len() != t.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.dim(),
            got: rhs.len(),
        });
    }
    t.factor()?.solve(rhs)
}

/// `1 - exp(-2 dt / l)` without cancellation for small `dt / l`.
#[inline]
fn one_minus_a_sq(dt: f64, l_corr: f64) -> f64 {
    -(-2.0 * dt / l_corr).exp_m1()
}

fn check_scale(scale: &[f64]) -> Result<()> {
    match scale.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
        Some(&s) => Err(Error::ParameterDomain {
            name: "scale",
            value: s,
        }),
        None => Ok(()),
    }
}

/// Closed-form inverse of the covariance
/// `Σ_ij = s_i s_j exp(-|t_i - t_j| / l)`.
///
/// With `a_k = exp(-(t_k - t_{k-1}) / l)` for `k ≥ 1` (0-based):
/// `d_0 = 1/(s_0² (1-a_1²))`, `d_{m-1} = 1/(s_{m-1}² (1-a_{m-1}²))`,
/// `d_i = (1/(1-a_i²) + 1/(1-a_{i+1}²) - 1) / s_i²` in between, and the
/// coupling of rows `i, i+1` is `-a_{i+1} / ((1-a_{i+1}²) s_i s_{i+1})`.
pub fn exp_kernel_precision(t: &[f64], scale: &[f64], l_corr: f64) -> Result<SymTridiagonal> {
    let m = t.len();
    if scale.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: scale.len(),
        });
    }
    if m == 0 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            got: 0,
        });
    }
    if !(l_corr > L_MIN) || !l_corr.is_finite() {
        return Err(Error::ParameterDomain {
            name: "l_corr",
            value: l_corr,
        });
    }
    check_strictly_increasing(t)?;
    check_scale(scale)?;

    if m == 1 {
        return Ok(SymTridiagonal::diagonal(vec![1.0 / (scale[0] * scale[0])]));
    }

    // q[k] = 1/(1 - a_k²) and a[k] for k = 1..m-1; index 0 unused.
    let mut a = vec![0.0; m];
    let mut q = vec![0.0; m];
    for k in 1..m {
        let dt = t[k] - t[k - 1];
        let oma = one_minus_a_sq(dt, l_corr);
        if !(oma > 0.0) {
            return Err(Error::NonIncreasingCoords { index: k });
        }
        a[k] = (-dt / l_corr).exp();
        q[k] = 1.0 / oma;
    }

    let mut diag = vec![0.0; m];
    diag[0] = q[1] / (scale[0] * scale[0]);
    diag[m - 1] = q[m - 1] / (scale[m - 1] * scale[m - 1]);
    for i in 1..m - 1 {
        diag[i] = (q[i] + q[i + 1] - 1.0) / (scale[i] * scale[i]);
    }
    let off = (0..m - 1)
        .map(|i| -a[i + 1] * q[i + 1] / (scale[i] * scale[i + 1]))
        .collect();
    Ok(SymTridiagonal { diag, off })
}

/// `log |Σ|` of the exponential covariance used by [`exp_kernel_precision`]:
/// `Σ_i 2 ln s_i + Σ_k ln(1 - a_k²)`.
pub fn exp_kernel_logdet(t: &[f64], scale: &[f64], l_corr: f64) -> Result<f64> {
    if scale.len() != t.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            got: scale.len(),
        });
    }
    check_strictly_increasing(t)?;
    check_scale(scale)?;
    let mut ld: f64 = scale.iter().map(|s| 2.0 * s.ln()).sum();
    for k in 1..t.len() {
        ld += one_minus_a_sq(t[k] - t[k - 1], l_corr).ln();
    }
    Ok(ld)
}
