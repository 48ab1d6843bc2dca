//! Tolerances and caps threaded through every analysis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Band for classifying a class radius as equal to one.
    pub eps_rho: f64,
    /// Sup-norm step or residual at which an iteration counts as fixed.
    pub eps_fix: f64,
    pub eps_order: f64,
    /// Relative band for active terms of a max-affine row.
    pub eps_active: f64,
    pub eps_cycle: f64,
    /// Positivity threshold for strict comparisons.
    pub delta: f64,
    /// An entry above this is an arc of the digraph.
    pub arc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps_rho: 1e-9,
            eps_fix: 1e-10,
            eps_order: 1e-9,
            eps_active: 1e-9,
            eps_cycle: 1e-7,
            delta: 1e-12,
            arc: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Caps {
    /// Selection matrices enumerated per strongly connected block.
    pub selections: usize,
    /// Terms per row allowed in a composed max-affine map.
    pub terms: usize,
    pub iterations: usize,
    pub omega_iterations: usize,
    pub pmax: usize,
    pub magnitude: f64,
    /// Random pairs checked before a norm certificate is returned.
    pub norm_samples: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            selections: 4096,
            terms: 50_000,
            iterations: 10_000,
            omega_iterations: 100_000,
            pmax: 64,
            magnitude: 1e12,
            norm_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisConfig {
    pub tol: Tolerances,
    pub caps: Caps,
    pub seed: u64,
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        let t = &self.tol;
        let positive = [
            ("eps_rho", t.eps_rho),
            ("eps_fix", t.eps_fix),
            ("eps_order", t.eps_order),
            ("eps_active", t.eps_active),
            ("eps_cycle", t.eps_cycle),
            ("delta", t.delta),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("tolerance {name} must be positive")));
            }
        }
        if !(t.arc >= 0.0 && t.arc.is_finite()) {
            return Err(Error::InvalidInput("tolerance arc must be non-negative".into()));
        }
        let c = &self.caps;
        let counts = [
            ("selections", c.selections),
            ("terms", c.terms),
            ("iterations", c.iterations),
            ("omega_iterations", c.omega_iterations),
            ("pmax", c.pmax),
            ("norm_samples", c.norm_samples),
        ];
        for (name, v) in counts {
            if v < 1 {
                return Err(Error::InvalidInput(format!("cap {name} must be at least 1")));
            }
        }
        if !(c.magnitude >= 1.0) {
            return Err(Error::InvalidInput("cap magnitude must be at least 1".into()));
        }
        Ok(())
    }
}
