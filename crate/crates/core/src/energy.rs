//! Energy, dissipation, and the discrete energy identity.
//!
//! On the physical domain (0, L) the energy of a state (u, u_t) is
//!
//!   E = 1/2 ||u_t||_2^2 + (1/p) ||u_x||_p^p,
//!
//! which pulls back to E = L/2 int w^2 dy + L^{1-p}/p int |v_y|^p dy on the
//! reference interval. The damping dissipates D = L^{-1} int w_y^2 dy, so
//! exact solutions satisfy E(t1) - E(t0) + int_{t0}^{t1} D dt <= 0 with
//! equality on fixed domains. Quadrature matches the solver stencils:
//! trapezoid over nodes for w^2, midpoint over half-nodes for gradients.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::ReferenceState;

/// Relative slack, in units of E(0), granted on top of each interval's
/// recorded residual when checking monotone decay.
pub const MONOTONE_BUDGET_REL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("trace needs at least one sample")]
    Empty,
    #[error("sample times must be strictly increasing (index {index})")]
    NonMonotoneTime { index: usize },
    #[error("sample {index} invalid: {what}")]
    InvalidValue { index: usize, what: String },
}

/// Total energy of a state with the solver-consistent quadrature.
pub fn energy(state: &ReferenceState) -> f64 {
    let n = state.interior_nodes();
    let h = state.h();
    let mut kinetic = 0.0;
    for i in 1..=n {
        kinetic += state.w[i] * state.w[i];
    }
    kinetic *= 0.5 * state.l * h;

    let p = state.p;
    let mut potential = 0.0;
    for k in 0..=n {
        let g = (state.v[k + 1] - state.v[k]) / h;
        potential += if p == 2.0 { g * g } else { g.abs().powf(p) };
    }
    let l_factor = if p == 2.0 { 1.0 / state.l } else { state.l.powf(1.0 - p) };
    potential *= l_factor * h / p;

    kinetic + potential
}

/// Instantaneous dissipation rate D = L^{-1} int w_y^2 dy.
pub fn dissipation(state: &ReferenceState) -> f64 {
    let n = state.interior_nodes();
    let h = state.h();
    let mut sum = 0.0;
    for k in 0..=n {
        let g = (state.w[k + 1] - state.w[k]) / h;
        sum += g * g;
    }
    sum * h / state.l
}

/// One recorded trace sample.
///
/// `residual` is the defect of the discrete energy identity over the
/// interval this sample opens, E_{n+1} - E_n + dt (D_n + D_{n+1})/2; the
/// final sample carries 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    pub e: f64,
    pub d: f64,
    pub l: f64,
    pub residual: f64,
}

/// Time-ordered energy history of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyTrace {
    samples: Vec<TraceSample>,
}

impl EnergyTrace {
    /// Builds a trace from (t, E, D, L) tuples, computing the identity
    /// residual for each interval.
    pub fn from_measurements(rows: Vec<(f64, f64, f64, f64)>) -> Result<Self, EnergyError> {
        if rows.is_empty() {
            return Err(EnergyError::Empty);
        }
        let mut samples: Vec<TraceSample> = rows
            .into_iter()
            .map(|(t, e, d, l)| TraceSample { t, e, d, l, residual: 0.0 })
            .collect();
        validate(&samples)?;
        for i in 0..samples.len() - 1 {
            let (a, b) = (samples[i], samples[i + 1]);
            samples[i].residual = b.e - a.e + 0.5 * (a.d + b.d) * (b.t - a.t);
        }
        Ok(Self { samples })
    }

    /// Rebuilds a trace whose residuals were already computed (for example
    /// one read back from disk). Values are validated, residuals trusted.
    pub fn from_samples(samples: Vec<TraceSample>) -> Result<Self, EnergyError> {
        if samples.is_empty() {
            return Err(EnergyError::Empty);
        }
        validate(&samples)?;
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[TraceSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn initial_energy(&self) -> f64 {
        self.samples[0].e
    }

    pub fn final_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].t
    }

    /// Indices n where E_{n+1} exceeds E_n by more than the recorded
    /// residual magnitude plus the relative budget.
    pub fn monotone_violations(&self) -> Vec<usize> {
        let budget = MONOTONE_BUDGET_REL * self.initial_energy();
        self.samples
            .windows(2)
            .enumerate()
            .filter(|(_, pair)| pair[1].e > pair[0].e + pair[0].residual.abs() + budget)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.samples.iter().fold(0.0f64, |acc, s| acc.max(s.residual.abs()))
    }

    pub fn sum_abs_residual(&self) -> f64 {
        self.samples.iter().map(|s| s.residual.abs()).sum()
    }
}

fn validate(samples: &[TraceSample]) -> Result<(), EnergyError> {
    for (i, s) in samples.iter().enumerate() {
        if !s.t.is_finite() || !s.residual.is_finite() {
            return Err(EnergyError::InvalidValue { index: i, what: "non-finite entry".into() });
        }
        if !(s.e >= 0.0) || !s.e.is_finite() {
            return Err(EnergyError::InvalidValue {
                index: i,
                what: format!("energy must be finite and >= 0, got {}", s.e),
            });
        }
        if !(s.d >= 0.0) || !s.d.is_finite() {
            return Err(EnergyError::InvalidValue {
                index: i,
                what: format!("dissipation must be finite and >= 0, got {}", s.d),
            });
        }
        if !(s.l > 0.0) || !s.l.is_finite() {
            return Err(EnergyError::InvalidValue {
                index: i,
                what: format!("length must be finite and > 0, got {}", s.l),
            });
        }
        if i > 0 && !(s.t > samples[i - 1].t) {
            return Err(EnergyError::NonMonotoneTime { index: i });
        }
    }
    Ok(())
}

/// Evaluates the energy identity along a sequence of time-ordered states.
pub fn identity_residuals(states: &[ReferenceState]) -> Result<EnergyTrace, EnergyError> {
    EnergyTrace::from_measurements(
        states
            .iter()
            .map(|s| (s.t, energy(s), dissipation(s), s.l))
            .collect(),
    )
}
