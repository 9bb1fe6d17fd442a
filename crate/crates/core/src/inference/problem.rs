use alloc::format;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use rand_chacha::ChaCha8Rng;

use super::prior::{Param, PriorBound, PriorBox};
use crate::beam::{BeamGeometry, BeamModel, ThetaS, TruckLoad};
use crate::error::{Error, Result};
use crate::kernels::SpaceTimeGrid;
use crate::likelihood::{loglik_diagonal, loglik_lanes, ErrorStructure, ModelShorthand, ThetaC, N_DENSE_MAX};
use crate::study::add_noise;

/// Observations on a rectilinear grid, one time-major block per lane.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub grid: SpaceTimeGrid,
    pub y_obs: Vec<f64>,
}

impl Dataset {
    pub fn new(grid: SpaceTimeGrid, y_obs: Vec<f64>) -> Result<Self> {
        if y_obs.is_empty() || y_obs.len() % grid.len() != 0 {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: y_obs.len(),
            });
        }
        Ok(Self { grid, y_obs })
    }

    pub fn n_lanes(&self) -> usize {
        self.y_obs.len() / self.grid.len()
    }
}

/// Indices of the reduced peak dataset: per influence line, the largest
/// `|y|` within each span (by front-axle position), then the four spans with
/// the largest such peaks.
pub fn reference_indices(data: &Dataset, geometry: &BeamGeometry) -> Vec<usize> {
    let g = &data.grid;
    let supports = geometry.support_positions();
    let n_spans = supports.len() - 1;
    let span_of = |t: f64| supports[1..].iter().position(|s| t <= *s).unwrap_or(n_spans - 1);
    let mut out = Vec::new();
    for lane in 0..data.n_lanes() {
        let base = lane * g.len();
        for j in 0..g.n_x() {
            let mut peaks: Vec<Option<usize>> = alloc::vec![None; n_spans];
            for (k, &t) in g.t().iter().enumerate() {
                let i = base + g.index(k, j);
                let s = span_of(t);
                if peaks[s].is_none_or(|p| data.y_obs[i].abs() > data.y_obs[p].abs()) {
                    peaks[s] = Some(i);
                }
            }
            let mut found: Vec<usize> = peaks.into_iter().flatten().collect();
            found.sort_by(|a, b| data.y_obs[*b].abs().total_cmp(&data.y_obs[*a].abs()).then(a.cmp(b)));
            found.truncate(4);
            out.extend(found);
        }
    }
    out.sort_unstable();
    out
}

/// Posterior target for one model on one dataset: parameter layout, priors
/// and the log-likelihood of a parameter vector.
#[derive(Debug, Clone)]
pub struct BayesProblem {
    model: ModelShorthand,
    params: Vec<Param>,
    prior: PriorBox,
    theta_s: ThetaS,
    beam: BeamModel,
    trucks: Vec<TruckLoad>,
    data: Dataset,
    /// Model response when no structural parameter is inferred.
    fixed_response: Option<Vec<f64>>,
    reference: Option<Vec<usize>>,
    n_dense_max: usize,
}

impl BayesProblem {
    /// `structural` lists the Kr/Kv parameters to infer; the rest of
    /// `theta_s` stays fixed. Correlation parameters follow the model's
    /// active set; inactive ones are zero. `overrides` replace default
    /// bounds by name.
    pub fn new(
        model: ModelShorthand,
        beam: BeamModel,
        trucks: Vec<TruckLoad>,
        data: Dataset,
        theta_s: ThetaS,
        structural: &[Param],
        overrides: &[PriorBound],
    ) -> Result<Self> {
        if trucks.len() != data.n_lanes() {
            return Err(Error::DimensionMismatch {
                expected: trucks.len(),
                got: data.n_lanes(),
            });
        }
        if theta_s.log10_kr.len() != beam.geometry().spring_supports.len() {
            return Err(Error::DimensionMismatch {
                expected: beam.geometry().spring_supports.len(),
                got: theta_s.log10_kr.len(),
            });
        }
        let mut params: Vec<Param> = Vec::new();
        for p in structural {
            match p {
                Param::Kr(i) if *i < theta_s.log10_kr.len() => {}
                Param::Kv => {}
                _ => return Err(Error::Prior(format!("{} is not a structural parameter here", p.name()))),
            }
            if !params.contains(p) {
                params.push(*p);
            }
        }
        params.extend(model.active_params(data.grid.n_x()).into_iter().map(Param::Corr));
        let bounds = params
            .iter()
            .map(|p| {
                overrides
                    .iter()
                    .find(|o| o.name == p.name())
                    .cloned()
                    .unwrap_or_else(|| p.default_bound())
            })
            .collect();
        let prior = PriorBox::new(bounds)?;
        let fixed_response = if params.iter().any(|p| !matches!(p, Param::Corr(_))) {
            None
        } else {
            Some(beam.model_response_grid(&theta_s, &trucks, &data.grid)?)
        };
        let reference = model.reference.then(|| reference_indices(&data, beam.geometry()));
        Ok(Self {
            model,
            params,
            prior,
            theta_s,
            beam,
            trucks,
            data,
            fixed_response,
            reference,
            n_dense_max: N_DENSE_MAX,
        })
    }

    pub fn with_dense_cap(mut self, n_dense_max: usize) -> Self {
        self.n_dense_max = n_dense_max;
        self
    }

    pub fn model(&self) -> ModelShorthand {
        self.model
    }

    pub fn params(&self) -> &[Param] {
        &self.params
    }

    pub fn prior(&self) -> &PriorBox {
        &self.prior
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn beam(&self) -> &BeamModel {
        &self.beam
    }

    /// Points entering the likelihood: the reduced peak set for reference
    /// models, otherwise every observation.
    pub fn n_points(&self) -> usize {
        self.reference.as_ref().map_or(self.data.y_obs.len(), |r| r.len())
    }

    pub fn reference_set(&self) -> Option<&[usize]> {
        self.reference.as_deref()
    }

    /// Splits a parameter vector into structural and correlation parts.
    pub fn unpack(&self, theta: &[f64]) -> (ThetaS, ThetaC) {
        let mut s = self.theta_s.clone();
        let mut c = ThetaC {
            cv: 0.0,
            sigma_model: 0.0,
            sigma_meas: 0.0,
            l_corr_t: 0.0,
            l_corr_x: 0.0,
        };
        for (p, v) in self.params.iter().zip(theta) {
            match p {
                Param::Corr(k) => c.set(*k, *v),
                Param::Kr(i) => s.log10_kr[*i] = *v,
                Param::Kv => s.log10_kv = *v,
            }
        }
        (s, c)
    }

    pub fn model_response(&self, theta_s: &ThetaS) -> Result<Vec<f64>> {
        match &self.fixed_response {
            Some(y) => Ok(y.clone()),
            None => self.beam.model_response_grid(theta_s, &self.trucks, &self.data.grid),
        }
    }

    /// Log-likelihood, or an error from the model or likelihood evaluation.
    pub fn try_loglik(&self, theta: &[f64]) -> Result<f64> {
        let (s, c) = self.unpack(theta);
        let owned;
        let y_model: &[f64] = match &self.fixed_response {
            Some(y) => y,
            None => {
                owned = self.beam.model_response_grid(&s, &self.trucks, &self.data.grid)?;
                &owned
            }
        };
        match &self.reference {
            Some(idx) => {
                let r: Vec<f64> = idx.iter().map(|&i| self.data.y_obs[i] - y_model[i]).collect();
                let var: Vec<f64> = idx
                    .iter()
                    .map(|&i| match self.model.error {
                        ErrorStructure::Multiplicative => (c.cv * y_model[i]).powi(2) + c.sigma_meas * c.sigma_meas,
                        ErrorStructure::Additive => c.sigma_model * c.sigma_model + c.sigma_meas * c.sigma_meas,
                    })
                    .collect();
                loglik_diagonal(&r, &var)
            }
            None => {
                let spec = self.model.spec(c);
                Ok(loglik_lanes(&self.data.y_obs, y_model, &spec, &self.data.grid, self.n_dense_max)?.value)
            }
        }
    }

    /// Log-likelihood with failures mapped to `−∞` (rejection).
    pub fn loglik(&self, theta: &[f64]) -> f64 {
        self.try_loglik(theta).unwrap_or(f64::NEG_INFINITY)
    }

    /// One synthetic dataset (all lanes) from the data model at `theta`.
    pub fn simulate(&self, theta: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let (s, c) = self.unpack(theta);
        let y = self.model_response(&s)?;
        add_noise(&self.model.spec(c), &self.data.grid, &y, rng)
    }
}

