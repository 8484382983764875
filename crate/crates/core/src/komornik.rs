//! Weighted integral machinery turning energy traces into decay bounds.
//!
//! The driving inequality asks for constants q >= 0 and A > 0 with
//!
//!   int_S^inf E^{q+1}(t) phi'(t) dt <= (1/A) E^q(0) E(S)  for all S >= 0,
//!
//! for a strictly increasing weight phi with phi(0) = 0. When it holds, E
//! obeys an explicit envelope: polynomial in phi for q > 0 and exponential
//! in phi for q = 0. On a finite trace the improper integral is truncated
//! at the horizon T, so the estimate carries a tail diagnostic and the
//! certified range stops short of T.

use serde::Serialize;
use thiserror::Error;

use crate::energy::EnergyTrace;
use crate::weight::{WeightError, WeightFunction};

/// Fraction of samples (by count) eligible as start times S; the rest is
/// reserved so every truncated integral keeps meaningful support.
const S_GRID_FRACTION: f64 = 0.8;

/// Tail fractions above this mark the truncated estimate untrusted.
pub const TAIL_TRUST_LIMIT: f64 = 0.01;

#[derive(Debug, Error)]
pub enum KomornikError {
    #[error("exponent q must be finite and >= 0, got {0}")]
    InvalidExponent(f64),
    #[error("degenerate trace: {0}")]
    DegenerateTrace(String),
    #[error("trace violates monotone decay beyond the residual budget at sample {index}")]
    HypothesisViolation { index: usize },
    #[error("trace too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },
    #[error(transparent)]
    Weight(#[from] WeightError),
}

/// Outcome of estimating the integral-inequality constant on a trace.
#[derive(Debug, Clone, Serialize)]
pub struct KomornikReport {
    /// Lemma exponent (named q_lemma internally to keep it apart from the
    /// Holder conjugate exponent used elsewhere).
    pub q: f64,
    /// Largest constant for which the truncated inequality holds on every
    /// tested start time.
    pub a_hat: f64,
    /// Start times S at which the inequality was evaluated.
    pub s_grid: Vec<f64>,
    /// Per-S slack (1/a_hat) E^q(0) E(S) - int_S^T E^{q+1} phi' dt; all
    /// nonnegative by construction of a_hat.
    pub hypothesis_margins: Vec<f64>,
    /// E(T)/E(0), quantifying the truncation of the improper integral.
    pub tail_fraction: f64,
    /// Set when tail_fraction exceeds TAIL_TRUST_LIMIT.
    pub tail_warning: bool,
    /// max E(t)/bound(t) over the S-grid-covered range, with the bound
    /// built from this report's own a_hat.
    pub bound_violation: f64,
}

/// Estimates the best constant A on a measured trace.
///
/// a_hat is the minimum over eligible start times S of
/// E^q(0) E(S) / int_S^T E^{q+1} phi' dt, with the integral evaluated by
/// trapezoid; start times are the first 80% of samples.
pub fn estimate_a(
    trace: &EnergyTrace,
    phi: &WeightFunction,
    q_lemma: f64,
) -> Result<KomornikReport, KomornikError> {
    if !q_lemma.is_finite() || q_lemma < 0.0 {
        return Err(KomornikError::InvalidExponent(q_lemma));
    }
    let samples = trace.samples();
    let len = samples.len();
    if len < 3 {
        return Err(KomornikError::TooShort { len, min: 3 });
    }
    let e0 = trace.initial_energy();
    if e0 <= 0.0 {
        return Err(KomornikError::DegenerateTrace("E(0) must be positive".into()));
    }
    if let Some(&index) = trace.monotone_violations().first() {
        return Err(KomornikError::HypothesisViolation { index });
    }
    let times: Vec<f64> = samples.iter().map(|s| s.t).collect();
    phi.check_increasing_on(&times)?;

    // Reverse cumulative trapezoid of E^{q+1} phi' from each sample to T.
    let integrand: Vec<f64> =
        samples.iter().map(|s| s.e.powf(q_lemma + 1.0) * phi.phi_prime(s.t)).collect();
    let mut tail_integral = vec![0.0; len];
    for i in (0..len - 1).rev() {
        tail_integral[i] = tail_integral[i + 1]
            + 0.5 * (integrand[i] + integrand[i + 1]) * (samples[i + 1].t - samples[i].t);
    }

    let n_s = ((len as f64 * S_GRID_FRACTION).floor() as usize).clamp(1, len - 1);
    let e0_pow_q = e0.powf(q_lemma);
    let mut a_hat = f64::INFINITY;
    for j in 0..n_s {
        let numer = e0_pow_q * samples[j].e;
        if numer > 0.0 && tail_integral[j] > 0.0 {
            a_hat = a_hat.min(numer / tail_integral[j]);
        }
    }
    if !a_hat.is_finite() || a_hat <= 0.0 {
        return Err(KomornikError::DegenerateTrace(
            "no start time yields a positive finite inequality ratio".into(),
        ));
    }

    let s_grid: Vec<f64> = times[..n_s].to_vec();
    let hypothesis_margins: Vec<f64> = (0..n_s)
        .map(|j| e0_pow_q * samples[j].e / a_hat - tail_integral[j])
        .collect();

    let tail_fraction = samples[len - 1].e / e0;
    let bound = decay_bound(e0, q_lemma, a_hat, phi.clone());
    let bound_violation = samples[..n_s]
        .iter()
        .map(|s| ratio(s.e, bound(s.t)))
        .fold(0.0f64, f64::max);

    Ok(KomornikReport {
        q: q_lemma,
        a_hat,
        s_grid,
        hypothesis_margins,
        tail_fraction,
        tail_warning: tail_fraction > TAIL_TRUST_LIMIT,
        bound_violation,
    })
}

/// Closed-form decay bound guaranteed by the integral inequality:
/// E0 ((1+q)/(1+qA phi(t)))^{1/q} for q > 0, E0 e^{1-A phi(t)} for q = 0.
pub fn decay_bound(
    e0: f64,
    q_lemma: f64,
    a: f64,
    phi: WeightFunction,
) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        let w = phi.phi(t);
        if q_lemma == 0.0 {
            e0 * (1.0 - a * w).exp()
        } else {
            e0 * ((1.0 + q_lemma) / (1.0 + q_lemma * a * w)).powf(1.0 / q_lemma)
        }
    }
}

/// Largest ratio E(t)/bound(t) over the whole trace; at most 1 + tol means
/// the bound dominates the measurements.
pub fn verify_bound(trace: &EnergyTrace, bound: impl Fn(f64) -> f64) -> f64 {
    trace
        .samples()
        .iter()
        .map(|s| ratio(s.e, bound(s.t)))
        .fold(0.0f64, f64::max)
}

fn ratio(e: f64, bound: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else if bound > 0.0 {
        e / bound
    } else {
        f64::INFINITY
    }
}
