use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

/// Posterior model probabilities `∝ Z_i · p_i`, normalized with
/// max-subtraction.
pub fn model_posteriors(log_z: &[f64], prior_probs: &[f64]) -> Vec<f64> {
    assert_eq!(log_z.len(), prior_probs.len(), "one prior per model");
    let a: Vec<f64> = log_z.iter().zip(prior_probs).map(|(z, p)| z + p.ln()).collect();
    let m = a.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return alloc::vec![f64::NAN; a.len()];
    }
    let e: Vec<f64> = a.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Interpretation of a Bayes factor on the Jeffreys scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum JeffreysLabel {
    Negative,
    BarelyWorthMentioning,
    Substantial,
    Strong,
    VeryStrong,
    Decisive,
}

impl JeffreysLabel {
    /// Category of `log10 R`; lower boundaries are inclusive.
    pub fn from_log10(log10_r: f64) -> Self {
        if log10_r < 0.0 {
            JeffreysLabel::Negative
        } else if log10_r < 0.5 {
            JeffreysLabel::BarelyWorthMentioning
        } else if log10_r < 1.0 {
            JeffreysLabel::Substantial
        } else if log10_r < 1.5 {
            JeffreysLabel::Strong
        } else if log10_r < 2.0 {
            JeffreysLabel::VeryStrong
        } else {
            JeffreysLabel::Decisive
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            JeffreysLabel::Negative => "Negative",
            JeffreysLabel::BarelyWorthMentioning => "Barely worth mentioning",
            JeffreysLabel::Substantial => "Substantial",
            JeffreysLabel::Strong => "Strong",
            JeffreysLabel::VeryStrong => "Very strong",
            JeffreysLabel::Decisive => "Decisive",
        }
    }
}

impl fmt::Display for JeffreysLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesFactor {
    /// Natural log of `R`.
    pub ln_r: f64,
    pub label: JeffreysLabel,
}

impl BayesFactor {
    /// `R` itself; `inf` when it overflows.
    pub fn r(&self) -> f64 {
        self.ln_r.exp()
    }

    pub fn log10_r(&self) -> f64 {
        self.ln_r / core::f64::consts::LN_10
    }
}

/// `R = [p(M1|y) / p(M2|y)] · [p(M2) / p(M1)]`, which reduces to `Z1 / Z2`.
pub fn bayes_factor(log_z1: f64, log_z2: f64, prior1: f64, prior2: f64) -> BayesFactor {
    let posterior_odds = (log_z1 + prior1.ln()) - (log_z2 + prior2.ln());
    let ln_r = posterior_odds + (prior2.ln() - prior1.ln());
    BayesFactor {
        ln_r,
        label: JeffreysLabel::from_log10(ln_r / core::f64::consts::LN_10),
    }
}
