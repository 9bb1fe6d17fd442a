use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::CorrParam;

/// Uniform bounds of one parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorBound {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
}

impl PriorBound {
    pub fn new(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            lower,
            upper,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Product of independent uniform priors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<PriorBound>", into = "Vec<PriorBound>")]
pub struct PriorBox {
    bounds: Vec<PriorBound>,
}

impl PriorBox {
    pub fn new(bounds: Vec<PriorBound>) -> Result<Self> {
        for b in &bounds {
            if !(b.lower.is_finite() && b.upper.is_finite() && b.lower < b.upper) {
                return Err(Error::Prior(format!(
                    "{}: need finite lower < upper, got [{}, {}]",
                    b.name, b.lower, b.upper
                )));
            }
        }
        for (i, b) in bounds.iter().enumerate() {
            if bounds[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::Prior(format!("duplicate parameter {}", b.name)));
            }
        }
        Ok(Self { bounds })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[PriorBound] {
        &self.bounds
    }

    pub fn names(&self) -> Vec<String> {
        self.bounds.iter().map(|b| b.name.clone()).collect()
    }

    pub fn transform(&self, u: &[f64]) -> Vec<f64> {
        prior_transform(u, self)
    }

    /// Constant log density inside the box.
    pub fn log_density(&self) -> f64 {
        -self.bounds.iter().map(|b| b.width().ln()).sum::<f64>()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(&self.bounds)
                .all(|(v, b)| *v >= b.lower && *v <= b.upper)
    }
}

impl TryFrom<Vec<PriorBound>> for PriorBox {
    type Error = Error;

    fn try_from(v: Vec<PriorBound>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<PriorBox> for Vec<PriorBound> {
    fn from(p: PriorBox) -> Self {
        p.bounds
    }
}

/// Affine map from the unit hypercube: `lower + u·(upper − lower)`.
pub fn prior_transform(u: &[f64], prior: &PriorBox) -> Vec<f64> {
    u.iter()
        .zip(&prior.bounds)
        .map(|(u, b)| b.lower + u * (b.upper - b.lower))
        .collect()
}

/// Default bounds of a correlation parameter. `sigma_meas` starts at 1e-6
/// so multiplicative models keep a positive noise floor.
pub fn default_corr_bounds(p: CorrParam) -> (f64, f64) {
    match p {
        CorrParam::Cv => (0.0, 1.0),
        CorrParam::SigmaModel => (0.0, 5.0),
        CorrParam::SigmaMeas => (1e-6, 1.0),
        CorrParam::LCorrT | CorrParam::LCorrX => (0.0, 300.0),
    }
}

/// Default bounds of `log10 Kr` (kNm/rad).
pub const LOG10_KR_BOUNDS: (f64, f64) = (4.0, 10.0);
/// Default bounds of `log10 Kv` (kN/m).
pub const LOG10_KV_BOUNDS: (f64, f64) = (0.0, 8.0);

/// Parameter inferred by a [`BayesProblem`](super::BayesProblem).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Param {
    Corr(CorrParam),
    /// Rotational spring of the `i`-th sprung support (0-based).
    Kr(usize),
    Kv,
}

impl Param {
    pub fn name(&self) -> String {
        match self {
            Param::Corr(c) => c.name().to_string(),
            Param::Kr(i) => format!("log10_kr_{}", i + 1),
            Param::Kv => "log10_kv".to_string(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if let Some(c) = CorrParam::parse(s) {
            return Some(Param::Corr(c));
        }
        if s == "log10_kv" {
            return Some(Param::Kv);
        }
        let i: usize = s.strip_prefix("log10_kr_")?.parse().ok()?;
        (i >= 1).then(|| Param::Kr(i - 1))
    }

    pub fn default_bounds(&self) -> (f64, f64) {
        match self {
            Param::Corr(c) => default_corr_bounds(*c),
            Param::Kr(_) => LOG10_KR_BOUNDS,
            Param::Kv => LOG10_KV_BOUNDS,
        }
    }

    pub fn default_bound(&self) -> PriorBound {
        let (lo, hi) = self.default_bounds();
        PriorBound::new(self.name(), lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn transform_maps_corners_and_center() {
        let p = PriorBox::new(vec![
            Param::Kr(0).default_bound(),
            Param::Corr(CorrParam::Cv).default_bound(),
        ])
        .unwrap();
        assert_eq!(p.transform(&[0.0, 0.0]), vec![4.0, 0.0]);
        assert_eq!(p.transform(&[0.5, 1.0]), vec![7.0, 1.0]);
        assert!((p.log_density() + 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_bounds() {
        assert!(PriorBox::new(vec![PriorBound::new("a", 1.0, 1.0)]).is_err());
        assert!(PriorBox::new(vec![PriorBound::new("a", 0.0, f64::INFINITY)]).is_err());
        assert!(PriorBox::new(vec![PriorBound::new("a", 0.0, 1.0), PriorBound::new("a", 0.0, 2.0)]).is_err());
    }

    #[test]
    fn param_names_round_trip() {
        for p in [
            Param::Corr(CorrParam::LCorrX),
            Param::Kr(0),
            Param::Kr(3),
            Param::Kv,
        ] {
            assert_eq!(Param::parse(&p.name()), Some(p));
        }
        assert_eq!(Param::parse("log10_kr_0"), None);
    }
}
