//! Moving spatial domains Omega_t = (0, L(t)): length, growth rate, rate bounds.

use serde::Serialize;
use thiserror::Error;

/// Default number of uniform points used for sup computations over [0, t_max].
pub const DEFAULT_SUP_GRID: usize = 10_001;

/// Relative slack accepted on time-range checks to absorb accumulated
/// floating-point error in step times.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum DomainError {
    #[error("time {t} outside trajectory range [0, {t_max}]")]
    TimeOutOfRange { t: f64, t_max: f64 },
    #[error("invalid trajectory parameter: {0}")]
    InvalidParameter(String),
    #[error("tabulated trajectory must be sorted in t with nondecreasing L: {0}")]
    NonMonotone(String),
}

/// Shape family of the domain trajectory.
///
/// Lengths must stay positive and nondecreasing on [0, t_max]; expanding
/// domains are the only case the decay theory covers.
#[derive(Debug, Clone, Serialize)]
pub enum TrajectoryFamily {
    /// L(t) = (1 + k t)^{(1-gamma)/m}, so L(0) = 1.
    PowerLaw { k: f64, gamma: f64, m: f64 },
    /// L(t) = l0.
    Constant { l0: f64 },
    /// Monotone piecewise-linear interpolation of (t, L) samples.
    Tabulated { samples: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainTrajectory {
    family: TrajectoryFamily,
    t_max: f64,
}

impl DomainTrajectory {
    /// Expanding power-law domain, L(t) = (1 + k t)^{(1-gamma)/m}.
    ///
    /// m is the growth-shaping exponent; values below the theory's threshold
    /// are allowed here (the geometry stays valid) and are judged by the
    /// constraints module, not at construction.
    pub fn power_law(k: f64, gamma: f64, m: f64, t_max: f64) -> Result<Self, DomainError> {
        if !(k > 0.0) || !k.is_finite() {
            return Err(DomainError::InvalidParameter(format!("k must be > 0, got {k}")));
        }
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(DomainError::InvalidParameter(format!(
                "gamma must lie in (0, 1), got {gamma}"
            )));
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(DomainError::InvalidParameter(format!("m must be > 0, got {m}")));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(DomainError::InvalidParameter(format!(
                "t_max must be > 0, got {t_max}"
            )));
        }
        Ok(Self { family: TrajectoryFamily::PowerLaw { k, gamma, m }, t_max })
    }

    /// Fixed domain of length l0.
    pub fn constant(l0: f64, t_max: f64) -> Result<Self, DomainError> {
        if !(l0 > 0.0) || !l0.is_finite() {
            return Err(DomainError::InvalidParameter(format!("l0 must be > 0, got {l0}")));
        }
        if !(t_max > 0.0) || !t_max.is_finite() {
            return Err(DomainError::InvalidParameter(format!(
                "t_max must be > 0, got {t_max}"
            )));
        }
        Ok(Self { family: TrajectoryFamily::Constant { l0 }, t_max })
    }

    /// Piecewise-linear trajectory through the given (t, L) samples.
    /// Samples must start at t = 0, be strictly increasing in t, and have
    /// positive nondecreasing L. The horizon is the last sample time.
    pub fn tabulated(samples: Vec<(f64, f64)>) -> Result<Self, DomainError> {
        if samples.len() < 2 {
            return Err(DomainError::InvalidParameter(
                "tabulated trajectory needs at least 2 samples".into(),
            ));
        }
        if samples[0].0 != 0.0 {
            return Err(DomainError::InvalidParameter(format!(
                "tabulated trajectory must start at t = 0, got t = {}",
                samples[0].0
            )));
        }
        for pair in samples.windows(2) {
            let (t0, l0) = pair[0];
            let (t1, l1) = pair[1];
            if !(t1 > t0) {
                return Err(DomainError::NonMonotone(format!(
                    "sample times must strictly increase ({t0} then {t1})"
                )));
            }
            if !(l1 >= l0) {
                return Err(DomainError::NonMonotone(format!(
                    "lengths must be nondecreasing ({l0} then {l1})"
                )));
            }
        }
        if samples.iter().any(|&(t, l)| !t.is_finite() || !(l > 0.0) || !l.is_finite()) {
            return Err(DomainError::InvalidParameter(
                "tabulated samples must be finite with L > 0".into(),
            ));
        }
        let t_max = samples.last().unwrap().0;
        Ok(Self { family: TrajectoryFamily::Tabulated { samples }, t_max })
    }

    pub fn family(&self) -> &TrajectoryFamily {
        &self.family
    }

    pub fn t_max(&self) -> f64 {
        self.t_max
    }

    fn check_time(&self, t: f64) -> Result<f64, DomainError> {
        let slack = TIME_SLACK * self.t_max.max(1.0);
        if !t.is_finite() || t < -slack || t > self.t_max + slack {
            return Err(DomainError::TimeOutOfRange { t, t_max: self.t_max });
        }
        Ok(t.clamp(0.0, self.t_max))
    }

    /// Domain measure |Omega_t| = L(t).
    pub fn length(&self, t: f64) -> Result<f64, DomainError> {
        let t = self.check_time(t)?;
        Ok(match &self.family {
            TrajectoryFamily::PowerLaw { k, gamma, m } => {
                (1.0 + k * t).powf((1.0 - gamma) / m)
            }
            TrajectoryFamily::Constant { l0 } => *l0,
            TrajectoryFamily::Tabulated { samples } => {
                let (i, frac) = locate(samples, t);
                let (_, l0) = samples[i];
                let (_, l1) = samples[i + 1];
                l0 + frac * (l1 - l0)
            }
        })
    }

    /// Growth rate dL/dt. Tabulated trajectories report the slope of the
    /// segment containing t (right-continuous at the sample points).
    pub fn length_rate(&self, t: f64) -> Result<f64, DomainError> {
        let t = self.check_time(t)?;
        Ok(match &self.family {
            TrajectoryFamily::PowerLaw { k, gamma, m } => {
                let e = (1.0 - gamma) / m;
                k * e * (1.0 + k * t).powf(e - 1.0)
            }
            TrajectoryFamily::Constant { .. } => 0.0,
            TrajectoryFamily::Tabulated { samples } => {
                let (i, _) = locate(samples, t);
                let (t0, l0) = samples[i];
                let (t1, l1) = samples[i + 1];
                (l1 - l0) / (t1 - t0)
            }
        })
    }

    /// sup |dL/dt| over a dense uniform grid on [0, t_max]
    /// (the bounded-rate hypothesis of the decay estimates).
    pub fn rate_bound(&self) -> f64 {
        self.rate_bound_on_grid(DEFAULT_SUP_GRID)
    }

    /// Same as [`rate_bound`](Self::rate_bound) with an explicit grid size.
    pub fn rate_bound_on_grid(&self, points: usize) -> f64 {
        match &self.family {
            TrajectoryFamily::Constant { .. } => 0.0,
            // Segment slopes already realize the sup of the piecewise rate.
            TrajectoryFamily::Tabulated { samples } => samples
                .windows(2)
                .map(|p| (p[1].1 - p[0].1) / (p[1].0 - p[0].0))
                .fold(0.0, f64::max),
            TrajectoryFamily::PowerLaw { .. } => {
                let points = points.max(2);
                let mut sup: f64 = 0.0;
                for i in 0..points {
                    let t = self.t_max * i as f64 / (points - 1) as f64;
                    let r = self.length_rate(t).expect("grid point inside range").abs();
                    sup = sup.max(r);
                }
                sup
            }
        }
    }
}

/// Index of the segment containing t and the interpolation fraction in it.
fn locate(samples: &[(f64, f64)], t: f64) -> (usize, f64) {
    let last = samples.len() - 2;
    let i = match samples.iter().rposition(|&(ts, _)| ts <= t) {
        Some(i) => i.min(last),
        None => 0,
    };
    let (t0, _) = samples[i];
    let (t1, _) = samples[i + 1];
    (i, ((t - t0) / (t1 - t0)).clamp(0.0, 1.0))
}
