//! Gaussian log-likelihood of residuals under separable space-time error
//! models.
//!
//! Three evaluators share one contract: a dense Cholesky oracle, a
//! structured multiplicative path (Woodbury identity plus block-tridiagonal
//! Cholesky of the exponential-kernel precision) and a structured additive
//! path (eigendecomposition of the two Kronecker factors). [`loglik`] picks
//! the cheapest valid one and reports which ran.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{correlation_matrix, KernelKind, SpaceTimeGrid};
use crate::linalg::dense::{cholesky, cholesky_logdet, logdet_and_quadratic, sym_eigen_clipped};
use crate::linalg::{
    block_tridiag_cholesky, block_tridiag_solve, exp_kernel_logdet, exp_kernel_precision,
    kron_dense, kron_logdet, kron_matvec, logdet_from_block_cholesky, scale_blocks, SymTridiagonal,
};

/// Largest problem the dense oracle will factor.
pub const N_DENSE_MAX: usize = 4096;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ErrorStructure {
    Multiplicative,
    Additive,
}

impl ErrorStructure {
    pub fn suffix(self) -> char {
        match self {
            ErrorStructure::Multiplicative => 'M',
            ErrorStructure::Additive => 'A',
        }
    }
}

/// Probabilistic parameters. Parameters a model does not use are zero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThetaC {
    /// Coefficient of variation of the multiplicative error.
    #[serde(default)]
    pub cv: f64,
    /// Standard deviation of the additive model error, MPa.
    #[serde(default)]
    pub sigma_model: f64,
    /// Standard deviation of the measurement noise, MPa.
    #[serde(default)]
    pub sigma_meas: f64,
    /// Temporal correlation length, m.
    #[serde(default)]
    pub l_corr_t: f64,
    /// Spatial correlation length, m.
    #[serde(default)]
    pub l_corr_x: f64,
}

/// Names of the entries of [`ThetaC`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrParam {
    Cv,
    SigmaModel,
    SigmaMeas,
    LCorrT,
    LCorrX,
}

impl CorrParam {
    pub const ALL: [CorrParam; 5] = [
        CorrParam::Cv,
        CorrParam::SigmaModel,
        CorrParam::SigmaMeas,
        CorrParam::LCorrT,
        CorrParam::LCorrX,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CorrParam::Cv => "cv",
            CorrParam::SigmaModel => "sigma_model",
            CorrParam::SigmaMeas => "sigma_meas",
            CorrParam::LCorrT => "l_corr_t",
            CorrParam::LCorrX => "l_corr_x",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        CorrParam::ALL.into_iter().find(|p| p.name() == s)
    }
}

impl ThetaC {
    pub fn get(&self, p: CorrParam) -> f64 {
        match p {
            CorrParam::Cv => self.cv,
            CorrParam::SigmaModel => self.sigma_model,
            CorrParam::SigmaMeas => self.sigma_meas,
            CorrParam::LCorrT => self.l_corr_t,
            CorrParam::LCorrX => self.l_corr_x,
        }
    }

    pub fn set(&mut self, p: CorrParam, v: f64) {
        match p {
            CorrParam::Cv => self.cv = v,
            CorrParam::SigmaModel => self.sigma_model = v,
            CorrParam::SigmaMeas => self.sigma_meas = v,
            CorrParam::LCorrT => self.l_corr_t = v,
            CorrParam::LCorrX => self.l_corr_x = v,
        }
    }
}

/// Error structure, kernels and parameters of one probabilistic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbModelSpec {
    pub error: ErrorStructure,
    pub kt: KernelKind,
    pub kx: KernelKind,
    pub theta: ThetaC,
}

impl ProbModelSpec {
    /// Checks signs and finiteness. Strict positivity of `sigma_meas` is left
    /// to the paths that need it.
    pub fn validate(&self) -> Result<()> {
        for p in CorrParam::ALL {
            let v = self.theta.get(p);
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::ParameterDomain {
                    name: p.name(),
                    value: v,
                });
            }
        }
        Ok(())
    }

    fn kt_eff(&self) -> KernelKind {
        self.kt.effective(self.theta.l_corr_t)
    }

    fn kx_eff(&self) -> KernelKind {
        self.kx.effective(self.theta.l_corr_x)
    }
}

/// Named probabilistic model: a temporal kernel and an error structure, or a
/// reference model (independent errors on a reduced peak-value dataset).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelShorthand {
    pub kernel: KernelKind,
    pub error: ErrorStructure,
    pub reference: bool,
}

impl ModelShorthand {
    pub fn new(kernel: KernelKind, error: ErrorStructure) -> Self {
        Self {
            kernel,
            error,
            reference: false,
        }
    }

    pub fn reference(error: ErrorStructure) -> Self {
        Self {
            kernel: KernelKind::Iid,
            error,
            reference: true,
        }
    }

    /// Spatial kernel paired with the temporal one: independent models stay
    /// independent in space, correlated models use the exponential kernel.
    pub fn spatial_kernel(&self) -> KernelKind {
        match self.kernel {
            KernelKind::Iid => KernelKind::Iid,
            _ => KernelKind::Exp,
        }
    }

    /// Parameters inferred under this model for `n_x` sensors.
    pub fn active_params(&self, n_x: usize) -> Vec<CorrParam> {
        let mut out = Vec::new();
        match self.error {
            ErrorStructure::Multiplicative => {
                out.push(CorrParam::Cv);
                out.push(CorrParam::SigmaMeas);
            }
            ErrorStructure::Additive => {
                out.push(CorrParam::SigmaModel);
                if self.kernel != KernelKind::Iid {
                    out.push(CorrParam::SigmaMeas);
                }
            }
        }
        if self.kernel.has_lengthscale() {
            out.push(CorrParam::LCorrT);
            if n_x > 1 {
                out.push(CorrParam::LCorrX);
            }
        }
        out
    }

    pub fn spec(&self, theta: ThetaC) -> ProbModelSpec {
        ProbModelSpec {
            error: self.error,
            kt: self.kernel,
            kx: self.spatial_kernel(),
            theta,
        }
    }

    /// Spec with every parameter outside the active set zeroed, so a full
    /// `theta` can drive any model as a data generator.
    pub fn active_spec(&self, theta: &ThetaC, n_x: usize) -> ProbModelSpec {
        let mut t = ThetaC::default();
        for p in self.active_params(n_x) {
            t.set(p, theta.get(p));
        }
        self.spec(t)
    }
}

impl fmt::Display for ModelShorthand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k = if self.reference {
            "REF"
        } else {
            self.kernel.as_str()
        };
        write!(f, "{}-{}", k, self.error.suffix())
    }
}

impl FromStr for ModelShorthand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Shorthand(s.to_string());
        let (k, e) = s.split_once('-').ok_or_else(bad)?;
        let error = match e {
            "M" => ErrorStructure::Multiplicative,
            "A" => ErrorStructure::Additive,
            _ => return Err(bad()),
        };
        if k == "REF" {
            return Ok(ModelShorthand::reference(error));
        }
        let kernel = KernelKind::parse(k).ok_or_else(bad)?;
        Ok(ModelShorthand::new(kernel, error))
    }
}

impl Serialize for ModelShorthand {
    fn serialize<S: serde::Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModelShorthand {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which evaluator produced a log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodPath {
    Dense,
    MultiplicativeFast,
    AdditiveEigen,
}

impl LikelihoodPath {
    pub fn as_str(self) -> &'static str {
        match self {
            LikelihoodPath::Dense => "dense",
            LikelihoodPath::MultiplicativeFast => "multiplicative_fast",
            LikelihoodPath::AdditiveEigen => "additive_eigen",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub path: LikelihoodPath,
}

fn check_lengths(grid: &SpaceTimeGrid, y_obs: &[f64], y_model: &[f64]) -> Result<()> {
    let n = grid.len();
    for len in [y_obs.len(), y_model.len()] {
        if len != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: len,
            });
        }
    }
    Ok(())
}

fn residual(y_obs: &[f64], y_model: &[f64]) -> Vec<f64> {
    y_obs.iter().zip(y_model).map(|(o, m)| o - m).collect()
}

/// Kronecker factors of the correlation, honoring the small-lengthscale
/// limit.
fn correlation_factors(spec: &ProbModelSpec, grid: &SpaceTimeGrid) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let ct = correlation_matrix(spec.kt_eff(), grid.t(), spec.theta.l_corr_t)?;
    let cx = correlation_matrix(spec.kx_eff(), grid.x(), spec.theta.l_corr_x)?;
    Ok((ct, cx))
}

/// Dense covariance: `Y (C_v² C_t ⊗ C_x) Y + σ_meas² I` for the
/// multiplicative model, `σ_model² C_t ⊗ C_x + σ_meas² I` for the additive
/// one. No jitter is added.
pub fn build_covariance_dense(
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
    y_model: &[f64],
    n_dense_max: usize,
) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let n = grid.len();
    if n > n_dense_max {
        return Err(Error::DenseCapExceeded { n, cap: n_dense_max });
    }
    if y_model.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_model.len(),
        });
    }
    let (ct, cx) = correlation_factors(spec, grid)?;
    let mut sigma = kron_dense(&ct, &cx);
    match spec.error {
        ErrorStructure::Multiplicative => {
            let cv2 = spec.theta.cv * spec.theta.cv;
            for j in 0..n {
                for i in 0..n {
                    sigma[(i, j)] *= cv2 * y_model[i] * y_model[j];
                }
            }
        }
        ErrorStructure::Additive => {
            sigma *= spec.theta.sigma_model * spec.theta.sigma_model;
        }
    }
    let w = spec.theta.sigma_meas * spec.theta.sigma_meas;
    for i in 0..n {
        sigma[(i, i)] += w;
    }
    Ok(sigma)
}

/// `-½ (log|Σ| + rᵀ Σ⁻¹ r + N log 2π)` with `r = y_obs - y_model`, by dense
/// Cholesky.
pub fn loglik_dense(y_obs: &[f64], y_model: &[f64], sigma: &DMatrix<f64>) -> Result<f64> {
    if y_obs.len() != y_model.len() {
        return Err(Error::DimensionMismatch {
            expected: y_model.len(),
            got: y_obs.len(),
        });
    }
    let r = residual(y_obs, y_model);
    let (logdet, quad) = logdet_and_quadratic(sigma, &r)?;
    Ok(-0.5 * (logdet + quad + r.len() as f64 * LN_2PI))
}

/// Inverse and log-determinant of the spatial correlation factor.
fn spatial_inverse(kx: KernelKind, x: &[f64], l_x: f64) -> Result<(DMatrix<f64>, f64)> {
    let n = x.len();
    match kx {
        KernelKind::Iid => Ok((DMatrix::identity(n, n), 0.0)),
        KernelKind::Exp => {
            let ones = vec![1.0; n];
            let p = exp_kernel_precision(x, &ones, l_x)?;
            Ok((p.to_dense(), exp_kernel_logdet(x, &ones, l_x)?))
        }
        KernelKind::Rbf => {
            let cx = correlation_matrix(kx, x, l_x)?;
            let c = cholesky(&cx)?;
            let logdet = cholesky_logdet(&c);
            Ok((c.inverse(), logdet))
        }
    }
}

/// Multiplicative-error log-likelihood without forming `Σ`.
///
/// With `C = C_v² C_t ⊗ C_x`, `W = σ_meas² I` and `Y = diag(y_model)`, the
/// Woodbury identity gives `rᵀΣ⁻¹r = rᵀr/w - bᵀ M⁻¹ b` where `b = Y r / w`
/// and `M = C⁻¹ + Y²/w` is block tridiagonal; the determinant lemma gives
/// `log|Σ| = log|M| + log|C| + N log w`.
pub fn loglik_multiplicative_fast(
    y_obs: &[f64],
    y_model: &[f64],
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
) -> Result<f64> {
    spec.validate()?;
    if spec.error != ErrorStructure::Multiplicative {
        return Err(Error::StructuredPathUnavailable(
            "multiplicative path called with an additive model".to_string(),
        ));
    }
    let kt = spec.kt_eff();
    if kt == KernelKind::Rbf {
        return Err(Error::StructuredPathUnavailable(
            "RBF temporal kernel has no tridiagonal precision; use the dense or additive path"
                .to_string(),
        ));
    }
    check_lengths(grid, y_obs, y_model)?;
    let th = &spec.theta;
    if !(th.sigma_meas > 0.0) {
        return Err(Error::ParameterDomain {
            name: "sigma_meas",
            value: th.sigma_meas,
        });
    }
    let w = th.sigma_meas * th.sigma_meas;
    let n = grid.len();
    let (m, n_x) = (grid.n_t(), grid.n_x());
    let r = residual(y_obs, y_model);
    let rr: f64 = r.iter().map(|v| v * v).sum();
    let noise_logdet = n as f64 * w.ln();

    if th.cv == 0.0 {
        return Ok(-0.5 * (noise_logdet + rr / w + n as f64 * LN_2PI));
    }
    // Independent in both directions: Σ is diagonal.
    if kt == KernelKind::Iid && (n_x == 1 || spec.kx_eff() == KernelKind::Iid) {
        let var: Vec<f64> = y_model.iter().map(|y| (th.cv * y).powi(2) + w).collect();
        return loglik_diagonal(&r, &var);
    }

    // Precision of C_v² C_t, with C_v folded into the per-point scale.
    let scale = vec![th.cv; m];
    let (pt, logdet_t) = match kt {
        KernelKind::Exp => (
            exp_kernel_precision(grid.t(), &scale, th.l_corr_t)?,
            exp_kernel_logdet(grid.t(), &scale, th.l_corr_t)?,
        ),
        _ => (
            SymTridiagonal::diagonal(vec![1.0 / (th.cv * th.cv); m]),
            2.0 * m as f64 * th.cv.ln(),
        ),
    };
    let (cx_inv, logdet_x) = spatial_inverse(spec.kx_eff(), grid.x(), th.l_corr_x)?;
    let logdet_c = kron_logdet(logdet_t, m, logdet_x, n_x);

    let extra: Vec<f64> = y_model.iter().map(|y| y * y / w).collect();
    let b: Vec<f64> = y_model.iter().zip(&r).map(|(y, r)| y * r / w).collect();

    // η = M⁻¹ b minimizes ‖r - Yη‖²/w + ηᵀC⁻¹η and the minimum equals
    // rᵀΣ⁻¹r. Both terms are nonnegative, so small σ_meas causes no
    // cancellation, and solve errors enter only at second order.
    let (logdet_m, eta, c_inv_eta) = if n_x == 1 {
        let mut mt = pt.clone();
        mt.add_diagonal(&extra)?;
        let f = mt.factor()?;
        let eta = f.solve(&b)?;
        let ce = pt.matvec(&eta)?;
        (f.logdet(), eta, ce)
    } else {
        let c_inv = scale_blocks(&pt, &cx_inv)?;
        let mut mb = c_inv.clone();
        mb.add_diagonal(&extra)?;
        let f = block_tridiag_cholesky(&mb)?;
        let eta = block_tridiag_solve(&f, &b)?;
        let ce = c_inv.matvec(&eta)?;
        (logdet_from_block_cholesky(&f), eta, ce)
    };
    let misfit: f64 = r
        .iter()
        .zip(y_model)
        .zip(&eta)
        .map(|((r, y), e)| (r - y * e).powi(2))
        .sum();
    let prior: f64 = eta.iter().zip(&c_inv_eta).map(|(a, b)| a * b).sum();
    let quad = misfit / w + prior;
    let logdet = logdet_m + logdet_c + noise_logdet;
    Ok(-0.5 * (logdet + quad + n as f64 * LN_2PI))
}

/// Eigendecomposition of the additive covariance, reusable across residual
/// vectors on the same grid.
#[derive(Debug, Clone)]
pub struct AdditiveEigen {
    qt: DMatrix<f64>,
    qx: DMatrix<f64>,
    /// Eigenvalues of `Σ`, time-major.
    lambda: Vec<f64>,
    logdet: f64,
}

impl AdditiveEigen {
    pub fn new(spec: &ProbModelSpec, grid: &SpaceTimeGrid) -> Result<Self> {
        spec.validate()?;
        if spec.error != ErrorStructure::Additive {
            return Err(Error::StructuredPathUnavailable(
                "eigen path called with a multiplicative model".to_string(),
            ));
        }
        let (ct, cx) = correlation_factors(spec, grid)?;
        let (lt, qt) = eigen_or_identity(&ct);
        let (lx, qx) = eigen_or_identity(&cx);
        let s2 = spec.theta.sigma_model * spec.theta.sigma_model;
        let w = spec.theta.sigma_meas * spec.theta.sigma_meas;
        let mut lambda = Vec::with_capacity(lt.len() * lx.len());
        let mut logdet = 0.0;
        for (k, a) in lt.iter().enumerate() {
            for b in &lx {
                let v = s2 * a * b + w;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::NotPositiveDefinite { block: k });
                }
                logdet += v.ln();
                lambda.push(v);
            }
        }
        Ok(Self {
            qt,
            qx,
            lambda,
            logdet,
        })
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    /// Log-likelihood of residual `r`.
    pub fn loglik_residual(&self, r: &[f64]) -> Result<f64> {
        let rot = kron_matvec(&self.qt.transpose(), &self.qx.transpose(), r)?;
        let quad: f64 = rot.iter().zip(&self.lambda).map(|(v, l)| v * v / l).sum();
        Ok(-0.5 * (self.logdet + quad + r.len() as f64 * LN_2PI))
    }
}

fn eigen_or_identity(c: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = c.nrows();
    if *c == DMatrix::identity(n, n) {
        (vec![1.0; n], DMatrix::identity(n, n))
    } else {
        sym_eigen_clipped(c)
    }
}

/// Additive-error log-likelihood via the eigendecompositions of `C_t` and
/// `C_x`: the eigenvalues of `Σ` are `σ_model² λ_t λ_x + σ_meas²`.
pub fn loglik_additive_fast(
    y_obs: &[f64],
    y_model: &[f64],
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
) -> Result<f64> {
    check_lengths(grid, y_obs, y_model)?;
    AdditiveEigen::new(spec, grid)?.loglik_residual(&residual(y_obs, y_model))
}

/// Log-likelihood through the cheapest valid path.
///
/// Multiplicative models with exponential or independent time kernels use
/// the structured path; additive models use the eigen path; anything else
/// falls back to the dense oracle up to `n_dense_max` points.
pub fn loglik(
    y_obs: &[f64],
    y_model: &[f64],
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
    n_dense_max: usize,
) -> Result<Evaluation> {
    spec.validate()?;
    check_lengths(grid, y_obs, y_model)?;
    let path = choose_path(spec, grid, n_dense_max)?;
    let value = match path {
        LikelihoodPath::MultiplicativeFast => loglik_multiplicative_fast(y_obs, y_model, spec, grid)?,
        LikelihoodPath::AdditiveEigen => loglik_additive_fast(y_obs, y_model, spec, grid)?,
        LikelihoodPath::Dense => {
            let sigma = build_covariance_dense(spec, grid, y_model, n_dense_max)?;
            loglik_dense(y_obs, y_model, &sigma)?
        }
    };
    Ok(Evaluation { value, path })
}

/// Path [`loglik`] would take for `spec` on `grid`.
pub fn choose_path(spec: &ProbModelSpec, grid: &SpaceTimeGrid, n_dense_max: usize) -> Result<LikelihoodPath> {
    let n = grid.len();
    let path = match spec.error {
        ErrorStructure::Additive => LikelihoodPath::AdditiveEigen,
        ErrorStructure::Multiplicative
            if spec.kt_eff() != KernelKind::Rbf && spec.theta.sigma_meas > 0.0 =>
        {
            LikelihoodPath::MultiplicativeFast
        }
        ErrorStructure::Multiplicative => {
            if n > n_dense_max {
                return Err(Error::Unsupported(format!(
                    "{}-M with {} points needs the dense path, capped at {}",
                    spec.kt, n, n_dense_max
                )));
            }
            LikelihoodPath::Dense
        }
    };
    Ok(path)
}

/// Sum of [`loglik`] over independent lanes. `y_obs` and `y_model` hold one
/// grid-sized block per lane, back to back.
pub fn loglik_lanes(
    y_obs: &[f64],
    y_model: &[f64],
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
    n_dense_max: usize,
) -> Result<Evaluation> {
    let n = grid.len();
    if y_obs.len() != y_model.len() || y_obs.len() % n != 0 || y_obs.is_empty() {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y_obs.len(),
        });
    }
    spec.validate()?;
    let path = choose_path(spec, grid, n_dense_max)?;
    let mut value = 0.0;
    if path == LikelihoodPath::AdditiveEigen {
        let eig = AdditiveEigen::new(spec, grid)?;
        for (o, m) in y_obs.chunks(n).zip(y_model.chunks(n)) {
            value += eig.loglik_residual(&residual(o, m))?;
        }
    } else {
        for (o, m) in y_obs.chunks(n).zip(y_model.chunks(n)) {
            value += loglik(o, m, spec, grid, n_dense_max)?.value;
        }
    }
    Ok(Evaluation { value, path })
}

/// Independent Gaussian log-likelihood with per-point variance `var_i`.
pub fn loglik_diagonal(r: &[f64], var: &[f64]) -> Result<f64> {
    if r.len() != var.len() {
        return Err(Error::DimensionMismatch {
            expected: var.len(),
            got: r.len(),
        });
    }
    let mut acc = 0.0;
    for (ri, v) in r.iter().zip(var) {
        if !(*v > 0.0) {
            return Err(Error::NotPositiveDefinite { block: 0 });
        }
        acc += v.ln() + ri * ri / v + LN_2PI;
    }
    Ok(-0.5 * acc)
}

/// Cholesky factors `(L_t, L_x)` of the spec's correlation factors with
/// `jitter` added to each diagonal, for structured sampling.
pub fn correlation_cholesky_factors(
    spec: &ProbModelSpec,
    grid: &SpaceTimeGrid,
    jitter: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (mut ct, mut cx) = correlation_factors(spec, grid)?;
    for i in 0..ct.nrows() {
        ct[(i, i)] += jitter;
    }
    for i in 0..cx.nrows() {
        cx[(i, i)] += jitter;
    }
    let lt = cholesky(&ct)?.l();
    let lx = cholesky(&cx)?.l();
    Ok((lt, lx))
}

/// `(L_t ⊗ L_x) z` for time-major `z`.
pub fn kron_lower_apply(lt: &DMatrix<f64>, lx: &DMatrix<f64>, z: &[f64]) -> Result<Vec<f64>> {
    kron_matvec(lt, lx, z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(nx: usize, nt: usize) -> SpaceTimeGrid {
        let x = (0..nx).map(|j| 3.0 + 7.5 * j as f64).collect();
        let t = (0..nt).map(|k| 1.7 * k as f64 + 0.1 * (k * k) as f64).collect();
        SpaceTimeGrid::new(x, t).unwrap()
    }

    fn theta(cv: f64, sm: f64, se: f64, lt: f64, lx: f64) -> ThetaC {
        ThetaC {
            cv,
            sigma_model: sm,
            sigma_meas: se,
            l_corr_t: lt,
            l_corr_x: lx,
        }
    }

    fn wiggle(n: usize, a: f64, b: f64) -> Vec<f64> {
        (0..n).map(|i| a * ((i as f64) * b + 0.3).sin() + 0.2 * a).collect()
    }

    #[test]
    fn iid_additive_covariance_is_diagonal() {
        let g = grid(2, 2);
        let spec = ModelShorthand::new(KernelKind::Iid, ErrorStructure::Additive).spec(theta(0.0, 1.0, 0.5, 0.0, 0.0));
        let s = build_covariance_dense(&spec, &g, &[0.0; 4], N_DENSE_MAX).unwrap();
        assert_eq!(s, DMatrix::identity(4, 4) * 1.25);
    }

    #[test]
    fn iid_multiplicative_covariance_scales() {
        let g = SpaceTimeGrid::new(vec![0.0], vec![0.0, 1.0]).unwrap();
        let spec = ModelShorthand::new(KernelKind::Iid, ErrorStructure::Multiplicative).spec(theta(0.1, 0.0, 0.0, 0.0, 0.0));
        let s = build_covariance_dense(&spec, &g, &[2.0, 3.0], N_DENSE_MAX).unwrap();
        assert!((s[(0, 0)] - 0.04).abs() < 1e-15);
        assert!((s[(1, 1)] - 0.09).abs() < 1e-15);
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn exp_multiplicative_entries_pairwise() {
        let g = grid(2, 2);
        let th = theta(0.3, 0.0, 0.2, 4.0, 9.0);
        let spec = ModelShorthand::new(KernelKind::Exp, ErrorStructure::Multiplicative).spec(th);
        let y = [1.0, -2.0, 0.5, 3.0];
        let s = build_covariance_dense(&spec, &g, &y, N_DENSE_MAX).unwrap();
        for k in 0..2 {
            for j in 0..2 {
                for k2 in 0..2 {
                    for j2 in 0..2 {
                        let (a, b) = (g.index(k, j), g.index(k2, j2));
                        let rho = (-(g.t()[k] - g.t()[k2]).abs() / 4.0).exp()
                            * (-(g.x()[j] - g.x()[j2]).abs() / 9.0).exp();
                        let mut want = 0.09 * y[a] * y[b] * rho;
                        if a == b {
                            want += 0.04;
                        }
                        assert!((s[(a, b)] - want).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn dense_scalar_cases() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let v = loglik_dense(&[0.0], &[0.0], &one).unwrap();
        assert!((v + 0.5 * LN_2PI).abs() < 1e-15);
        let four = DMatrix::from_element(1, 1, 4.0);
        let v = loglik_dense(&[2.0], &[0.0], &four).unwrap();
        assert!((v + 0.5 * (4.0f64.ln() + 1.0 + LN_2PI)).abs() < 1e-14);
        let v = loglik_dense(&[1.0, 1.0], &[0.0, 0.0], &DMatrix::identity(2, 2)).unwrap();
        assert!((v + 1.0 + LN_2PI).abs() < 1e-14);
    }

    fn dense_value(spec: &ProbModelSpec, g: &SpaceTimeGrid, yo: &[f64], ym: &[f64]) -> f64 {
        let s = build_covariance_dense(spec, g, ym, N_DENSE_MAX).unwrap();
        loglik_dense(yo, ym, &s).unwrap()
    }

    #[test]
    fn multiplicative_matches_dense_single_sensor() {
        let g = grid(1, 3);
        let spec = ModelShorthand::new(KernelKind::Exp, ErrorStructure::Multiplicative).spec(theta(0.2, 0.0, 0.3, 2.0, 0.0));
        let ym = [1.0, 4.0, -2.0];
        let yo = [1.3, 3.2, -2.5];
        let fast = loglik_multiplicative_fast(&yo, &ym, &spec, &g).unwrap();
        assert!((fast - dense_value(&spec, &g, &yo, &ym)).abs() < 1e-8);
    }

    #[test]
    fn multiplicative_handles_zero_prediction() {
        let g = grid(4, 6);
        let spec = ModelShorthand::new(KernelKind::Exp, ErrorStructure::Multiplicative).spec(theta(0.15, 0.0, 0.4, 5.0, 12.0));
        let mut ym = wiggle(24, 10.0, 0.7);
        ym[5] = 0.0;
        let yo: Vec<f64> = ym.iter().enumerate().map(|(i, y)| y + 0.3 * (i as f64).cos()).collect();
        let fast = loglik_multiplicative_fast(&yo, &ym, &spec, &g).unwrap();
        assert!(fast.is_finite());
        assert!((fast - dense_value(&spec, &g, &yo, &ym)).abs() < 1e-8);
    }

    #[test]
    fn multiplicative_tiny_lengthscale_is_iid() {
        let g = grid(3, 4);
        let ym = wiggle(12, 5.0, 1.1);
        let yo = wiggle(12, 5.5, 1.0);
        let exp = ModelShorthand::new(KernelKind::Exp, ErrorStructure::Multiplicative).spec(theta(0.2, 0.0, 0.3, 1e-12, 1e-12));
        let iid = ModelShorthand::new(KernelKind::Iid, ErrorStructure::Multiplicative).spec(theta(0.2, 0.0, 0.3, 0.0, 0.0));
        let a = loglik_multiplicative_fast(&yo, &ym, &exp, &g).unwrap();
        let b = dense_value(&iid, &g, &yo, &ym);
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn multiplicative_errors() {
        let g = grid(2, 3);
        let y = [1.0; 6];
        let mut spec = ModelShorthand::new(KernelKind::Rbf, ErrorStructure::Multiplicative).spec(theta(0.1, 0.0, 0.1, 3.0, 3.0));
        assert!(matches!(
            loglik_multiplicative_fast(&y, &y, &spec, &g),
            Err(Error::StructuredPathUnavailable(_))
        ));
        spec.kt = KernelKind::Exp;
        spec.theta.sigma_meas = 0.0;
        assert!(matches!(
            loglik_multiplicative_fast(&y, &y, &spec, &g),
            Err(Error::ParameterDomain { name: "sigma_meas", .. })
        ));
    }

    #[test]
    fn additive_matches_dense() {
        let g = grid(4, 5);
        let ym = wiggle(20, 3.0, 0.4);
        let yo = wiggle(20, 3.4, 0.45);
        for k in [KernelKind::Iid, KernelKind::Rbf, KernelKind::Exp] {
            let spec = ModelShorthand::new(k, ErrorStructure::Additive).spec(theta(0.0, 1.3, 0.4, 6.0, 10.0));
            let fast = loglik_additive_fast(&yo, &ym, &spec, &g).unwrap();
            assert!((fast - dense_value(&spec, &g, &yo, &ym)).abs() < 1e-8, "{k}");
        }
    }

    #[test]
    fn dispatch_rules() {
        let g = grid(3, 3);
        let y = wiggle(9, 1.0, 0.3);
        let th = theta(0.1, 1.0, 0.2, 5.0, 5.0);
        let path = |s: &str| {
            let spec = s.parse::<ModelShorthand>().unwrap().spec(th);
            loglik(&y, &y, &spec, &g, N_DENSE_MAX).unwrap().path
        };
        assert_eq!(path("EXP-M"), LikelihoodPath::MultiplicativeFast);
        assert_eq!(path("IID-M"), LikelihoodPath::MultiplicativeFast);
        assert_eq!(path("RBF-A"), LikelihoodPath::AdditiveEigen);
        assert_eq!(path("RBF-M"), LikelihoodPath::Dense);
        let spec = "RBF-M".parse::<ModelShorthand>().unwrap().spec(th);
        assert!(matches!(loglik(&y, &y, &spec, &g, 4), Err(Error::Unsupported(_))));
    }

    #[test]
    fn dense_fallback_is_bitwise_dense() {
        let g = grid(4, 25);
        let ym = wiggle(100, 2.0, 0.2);
        let yo = wiggle(100, 2.2, 0.21);
        let spec = ModelShorthand::new(KernelKind::Rbf, ErrorStructure::Multiplicative).spec(theta(0.2, 0.0, 0.3, 4.0, 8.0));
        let e = loglik(&yo, &ym, &spec, &g, N_DENSE_MAX).unwrap();
        assert_eq!(e.path, LikelihoodPath::Dense);
        assert_eq!(e.value, dense_value(&spec, &g, &yo, &ym));
    }

    #[test]
    fn shorthand_round_trip() {
        for s in ["IID-M", "RBF-A", "EXP-M", "EXP-A", "REF-M", "REF-A"] {
            assert_eq!(s.parse::<ModelShorthand>().unwrap().to_string(), s);
        }
        assert!("EXP".parse::<ModelShorthand>().is_err());
        assert!("XYZ-A".parse::<ModelShorthand>().is_err());
        assert!("EXP-Q".parse::<ModelShorthand>().is_err());
    }

    #[test]
    fn active_parameters() {
        let p = |s: &str, n: usize| s.parse::<ModelShorthand>().unwrap().active_params(n);
        assert_eq!(p("IID-M", 3), vec![CorrParam::Cv, CorrParam::SigmaMeas]);
        assert_eq!(p("IID-A", 3), vec![CorrParam::SigmaModel]);
        assert_eq!(p("EXP-M", 1), vec![CorrParam::Cv, CorrParam::SigmaMeas, CorrParam::LCorrT]);
        assert_eq!(p("EXP-M", 2).len(), 4);
        assert_eq!(p("RBF-A", 1).len(), 3);
        assert_eq!(p("RBF-A", 2).len(), 4);
    }

    #[test]
    fn lanes_sum() {
        let g = grid(2, 3);
        let spec = ModelShorthand::new(KernelKind::Exp, ErrorStructure::Additive).spec(theta(0.0, 1.0, 0.3, 3.0, 3.0));
        let ym = wiggle(12, 2.0, 0.5);
        let yo = wiggle(12, 2.1, 0.55);
        let both = loglik_lanes(&yo, &ym, &spec, &g, N_DENSE_MAX).unwrap().value;
        let a = loglik(&yo[..6], &ym[..6], &spec, &g, N_DENSE_MAX).unwrap().value;
        let b = loglik(&yo[6..], &ym[6..], &spec, &g, N_DENSE_MAX).unwrap().value;
        assert!((both - a - b).abs() < 1e-12);
    }
}
