//! Weight functions phi for the integral decay machinery: phi(0) = 0,
//! phi strictly increasing, phi(t) -> infinity.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WeightError {
    #[error("invalid weight parameter: {0}")]
    InvalidParameter(String),
    #[error("weight must be strictly increasing: {0}")]
    NotIncreasing(String),
}

#[derive(Debug, Clone, Serialize)]
pub enum WeightFunction {
    /// phi(t) = (1 + k t)^gamma - 1.
    PowerShift { k: f64, gamma: f64 },
    /// phi(t) = t.
    Identity,
    /// Piecewise-linear phi through (t, phi) samples; extrapolates with the
    /// final slope beyond the last sample.
    Tabulated { samples: Vec<(f64, f64)> },
}

impl WeightFunction {
    pub fn power_shift(k: f64, gamma: f64) -> Result<Self, WeightError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(WeightError::InvalidParameter(format!("k must be > 0, got {k}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(WeightError::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {gamma}"
            )));
        }
        Ok(Self::PowerShift { k, gamma })
    }

    pub fn identity() -> Self {
        Self::Identity
    }

    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self, WeightError> {
        if samples.len() < 2 {
            return Err(WeightError::InvalidParameter(
                "tabulated weight needs at least 2 samples".into(),
            ));
        }
        if samples[0] != (0.0, 0.0) {
            return Err(WeightError::InvalidParameter(
                "tabulated weight must start at (0, 0)".into(),
            ));
        }
        for pair in samples.windows(2) {
            let (t0, p0) = pair[0];
            let (t1, p1) = pair[1];
            if !(t1 > t0) {
                return Err(WeightError::InvalidParameter(format!(
                    "sample times must strictly increase ({t0} then {t1})"
                )));
            }
            if !(p1 > p0) {
                return Err(WeightError::NotIncreasing(format!(
                    "phi samples must strictly increase ({p0} then {p1})"
                )));
            }
        }
        if samples.iter().any(|&(t, p)| !t.is_finite() || !p.is_finite()) {
            return Err(WeightError::InvalidParameter("samples must be finite".into()));
        }
        Ok(Self::Tabulated { samples })
    }

    pub fn phi(&self, t: f64) -> f64 {
        match self {
            Self::PowerShift { k, gamma } => (1.0 + k * t).powf(*gamma) - 1.0,
            Self::Identity => t,
            Self::Tabulated { samples } => {
                let (i, frac) = locate(samples, t);
                let (_, p0) = samples[i];
                let (_, p1) = samples[i + 1];
                p0 + frac * (p1 - p0)
            }
        }
    }

    pub fn phi_prime(&self, t: f64) -> f64 {
        match self {
            Self::PowerShift { k, gamma } => k * gamma * (1.0 + k * t).powf(gamma - 1.0),
            Self::Identity => 1.0,
            Self::Tabulated { samples } => {
                let (i, _) = locate(samples, t);
                let (t0, p0) = samples[i];
                let (t1, p1) = samples[i + 1];
                (p1 - p0) / (t1 - t0)
            }
        }
    }

    /// Second derivative; zero almost everywhere for tabulated weights.
    pub fn phi_second(&self, t: f64) -> f64 {
        match self {
            Self::PowerShift { k, gamma } => {
                k * k * gamma * (gamma - 1.0) * (1.0 + k * t).powf(gamma - 2.0)
            }
            Self::Identity => 0.0,
            Self::Tabulated { .. } => 0.0,
        }
    }

    /// Rejects weights whose derivative is not strictly positive somewhere on
    /// the given times (possible only for tabulated data, but checked
    /// uniformly so callers need no case analysis).
    pub fn check_increasing_on(&self, times: &[f64]) -> Result<(), WeightError> {
        for &t in times {
            let d = self.phi_prime(t);
            if !(d > 0.0) || !d.is_finite() {
                return Err(WeightError::NotIncreasing(format!(
                    "phi'({t}) = {d} is not strictly positive"
                )));
            }
        }
        Ok(())
    }
}

/// Segment index containing t (extrapolating at both ends) plus the fraction.
fn locate(samples: &[(f64, f64)], t: f64) -> (usize, f64) {
    let last = samples.len() - 2;
    let i = match samples.iter().rposition(|&(ts, _)| ts <= t) {
        Some(i) => i.min(last),
        None => 0,
    };
    let (t0, _) = samples[i];
    let (t1, _) = samples[i + 1];
    (i, (t - t0) / (t1 - t0))
}
