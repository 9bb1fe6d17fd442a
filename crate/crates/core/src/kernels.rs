//! Stationary correlation functions in one coordinate and the separable
//! space-time correlation built from them.
//!
//! Observations live on a rectilinear lattice of sensor positions `x` and
//! load positions `t`. Vectors over the lattice are time-major: the block
//! for time index `k` holds every sensor, so entry `k * n_x + j` pairs
//! `t[k]` with `x[j]`. With this order the full correlation is
//! `C_t ⊗ C_x`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lengthscales at or below this value collapse to the independent kernel.
pub const L_MIN: f64 = 1e-9;

/// Correlation function family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum KernelKind {
    #[serde(rename = "IID")]
    Iid,
    #[serde(rename = "RBF")]
    Rbf,
    #[serde(rename = "EXP")]
    Exp,
}

impl KernelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            KernelKind::Iid => "IID",
            KernelKind::Rbf => "RBF",
            KernelKind::Exp => "EXP",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "IID" => Some(KernelKind::Iid),
            "RBF" => Some(KernelKind::Rbf),
            "EXP" => Some(KernelKind::Exp),
            _ => None,
        }
    }

    pub fn has_lengthscale(self) -> bool {
        !matches!(self, KernelKind::Iid)
    }

    /// The kind that actually applies for lengthscale `l`: tiny lengthscales
    /// are the independent limit.
    pub fn effective(self, l_corr: f64) -> Self {
        if self.has_lengthscale() && l_corr <= L_MIN {
            KernelKind::Iid
        } else {
            self
        }
    }
}

impl core::fmt::Display for KernelKind {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.as_str())
    }
}

fn check_lengthscale(kind: KernelKind, l_corr: f64) -> Result<()> {
    if kind.has_lengthscale() && !(l_corr > 0.0 && l_corr.is_finite()) {
        return Err(Error::ParameterDomain {
            name: "l_corr",
            value: l_corr,
        });
    }
    Ok(())
}

/// Correlation between coordinates `a` and `b`.
pub fn eval_kernel(kind: KernelKind, a: f64, b: f64, l_corr: f64) -> Result<f64> {
    check_lengthscale(kind, l_corr)?;
    Ok(eval_unchecked(kind.effective(l_corr), a, b, l_corr))
}

#[inline]
fn eval_unchecked(kind: KernelKind, a: f64, b: f64, l_corr: f64) -> f64 {
    let d = (a - b).abs();
    match kind {
        KernelKind::Iid => {
            if d == 0.0 {
                1.0
            } else {
                0.0
            }
        }
        KernelKind::Rbf => (-(d * d) / (2.0 * l_corr * l_corr)).exp(),
        KernelKind::Exp => (-d / l_corr).exp(),
    }
}

pub(crate) fn check_strictly_increasing(coords: &[f64]) -> Result<()> {
    for (i, w) in coords.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonIncreasingCoords { index: i + 1 });
        }
    }
    if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
        return Err(Error::NonIncreasingCoords { index: i });
    }
    Ok(())
}

/// Dense correlation matrix over strictly increasing `coords`.
pub fn correlation_matrix(kind: KernelKind, coords: &[f64], l_corr: f64) -> Result<DMatrix<f64>> {
    check_lengthscale(kind, l_corr)?;
    check_strictly_increasing(coords)?;
    let kind = kind.effective(l_corr);
    let n = coords.len();
    let mut c = DMatrix::<f64>::identity(n, n);
    if kind == KernelKind::Iid {
        return Ok(c);
    }
    for i in 0..n {
        for j in 0..i {
            let v = eval_unchecked(kind, coords[i], coords[j], l_corr);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Observation lattice: sensor positions × load positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeGrid {
    x: Vec<f64>,
    t: Vec<f64>,
}

impl SpaceTimeGrid {
    pub fn new(x: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        if x.is_empty() || t.is_empty() {
            return Err(Error::DimensionMismatch {
                expected: 1,
                got: 0,
            });
        }
        check_strictly_increasing(&x)?;
        check_strictly_increasing(&t)?;
        Ok(Self { x, t })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn n_x(&self) -> usize {
        self.x.len()
    }

    pub fn n_t(&self) -> usize {
        self.t.len()
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.x.len() * self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of (time `k`, sensor `j`).
    #[inline]
    pub fn index(&self, k: usize, j: usize) -> usize {
        k * self.x.len() + j
    }
}

/// Kronecker factors `(C_t, C_x)` of the separable correlation.
pub fn separable_correlation(
    kt: KernelKind,
    kx: KernelKind,
    grid: &SpaceTimeGrid,
    l_t: f64,
    l_x: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ct = correlation_matrix(kt, grid.t(), l_t)?;
    let cx = correlation_matrix(kx, grid.x(), l_x)?;
    Ok((ct, cx))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn exp_zero_distance_is_one() {
        assert_eq!(eval_kernel(KernelKind::Exp, 3.0, 3.0, 0.7).unwrap(), 1.0);
    }

    #[test]
    fn iid_values() {
        assert_eq!(eval_kernel(KernelKind::Iid, 1.0, 2.0, 0.0).unwrap(), 0.0);
        assert_eq!(eval_kernel(KernelKind::Iid, 1.0, 1.0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn exp_at_one_lengthscale() {
        let v = eval_kernel(KernelKind::Exp, 0.0, 2.5, 2.5).unwrap();
        assert!(close(v, 0.367_879_441_171_442_3, 1e-15));
    }

    #[test]
    fn non_positive_lengthscale_rejected() {
        for kind in [KernelKind::Exp, KernelKind::Rbf] {
            assert!(matches!(
                eval_kernel(kind, 0.0, 1.0, 0.0),
                Err(Error::ParameterDomain { .. })
            ));
            assert!(eval_kernel(kind, 0.0, 1.0, -2.0).is_err());
        }
    }

    #[test]
    fn tiny_lengthscale_is_independent() {
        let v = eval_kernel(KernelKind::Exp, 0.0, 1e-12, 1e-10).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn exp_matrix_three_points() {
        let c = correlation_matrix(KernelKind::Exp, &[0.0, 1.0, 2.0], 1.0).unwrap();
        let a = (-1.0f64).exp();
        let want = [[1.0, a, a * a], [a, 1.0, a], [a * a, a, 1.0]];
        for i in 0..3 {
            for j in 0..3 {
                assert!(close(c[(i, j)], want[i][j], 1e-15));
            }
        }
    }

    #[test]
    fn rbf_matrix_two_points() {
        let c = correlation_matrix(KernelKind::Rbf, &[0.0, 1.0], 1.0).unwrap();
        assert!(close(c[(0, 1)], (-0.5f64).exp(), 1e-15));
    }

    #[test]
    fn iid_matrix_is_identity() {
        let c = correlation_matrix(KernelKind::Iid, &[0.0, 0.5, 4.0], 0.0).unwrap();
        assert_eq!(c, DMatrix::identity(3, 3));
    }

    #[test]
    fn duplicate_coords_rejected() {
        assert!(matches!(
            correlation_matrix(KernelKind::Exp, &[0.0, 1.0, 1.0], 1.0),
            Err(Error::NonIncreasingCoords { index: 2 })
        ));
        assert!(SpaceTimeGrid::new(alloc::vec![1.0, 0.0], alloc::vec![0.0]).is_err());
    }

    #[test]
    fn single_sensor_factor() {
        let grid = SpaceTimeGrid::new(alloc::vec![3.0], alloc::vec![0.0, 1.0, 3.0]).unwrap();
        let (ct, cx) = separable_correlation(KernelKind::Exp, KernelKind::Exp, &grid, 2.0, 5.0).unwrap();
        assert_eq!(cx, DMatrix::identity(1, 1));
        assert_eq!(ct, correlation_matrix(KernelKind::Exp, grid.t(), 2.0).unwrap());
    }

    #[test]
    fn serde_shorthand() {
        // KernelKind serializes as its shorthand in configs.
        assert_eq!(KernelKind::parse("EXP"), Some(KernelKind::Exp));
        assert_eq!(KernelKind::Rbf.as_str(), "RBF");
        assert_eq!(KernelKind::parse("exp"), None);
    }
}
