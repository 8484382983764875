//! Implicit integrator for the damped p-Laplacian wave system on the fixed
//! reference interval y in [0, 1].
//!
//! The moving-domain problem on (0, L(t)) is pulled back by y = x / L(t).
//! With v(y, t) = u(L t y, t), w = u_t and mu = L'/L the system becomes
//!
//!   v_t = w + mu y v_y,
//!   w_t = mu y w_y + L^{-p} (Phi(v_y))_y + L^{-2} w_yy,
//!
//! where Phi(s) = (s^2 + eps^2)^{(p-2)/2} s is the regularized flux. Both
//! components carry homogeneous Dirichlet data. Time stepping is the
//! trapezoidal rule; each step solves the stacked nonlinear system with
//! Newton iteration on a banded Jacobian.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::banded::BandedMatrix;
use crate::domain::{DomainError, DomainTrajectory};
use crate::energy::{self, EnergyTrace};

/// Maximum number of recursive step halvings before a failed step aborts.
const MAX_HALVINGS: u32 = 10;

/// Optional forcing term f(y, t) added to dw/dt; used to manufacture exact
/// solutions in convergence tests, never in production runs.
pub type SourceFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("non-finite values encountered at t = {t}")]
    Blowup { t: f64 },
    #[error("Newton failed to converge at t = {t} after {iterations} iterations")]
    NewtonDiverged { t: f64, iterations: usize },
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Initial data selector for either solution component.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Zero,
    /// sin(n pi x / L(0)), i.e. sin(n pi y) on the reference grid.
    SineMode(u32),
    /// x (L0 - x) normalized to unit maximum, i.e. 4 y (1 - y).
    Bump,
    /// Values at uniformly spaced points on [0, 1] (endpoints included),
    /// linearly interpolated to the solver grid.
    Table(Vec<f64>),
}

impl InitialData {
    fn eval(&self, y: f64) -> f64 {
        match self {
            InitialData::Zero => 0.0,
            InitialData::SineMode(n) => (*n as f64 * std::f64::consts::PI * y).sin(),
            InitialData::Bump => 4.0 * y * (1.0 - y),
            InitialData::Table(values) => {
                let m = values.len();
                let pos = y * (m - 1) as f64;
                let i = (pos.floor() as usize).min(m - 2);
                let frac = pos - i as f64;
                values[i] + frac * (values[i + 1] - values[i])
            }
        }
    }

    fn validate(&self) -> Result<(), SolverError> {
        if let InitialData::Table(values) = self {
            if values.len() < 2 {
                return Err(SolverError::InvalidConfig(
                    "table initial data needs at least 2 values".into(),
                ));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::InvalidConfig(
                    "table initial data must be finite".into(),
                ));
            }
        }
        if let InitialData::SineMode(0) = self {
            return Err(SolverError::InvalidConfig("sine mode index must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone)]
pub struct SolverConfig {
    pub p: f64,
    pub trajectory: DomainTrajectory,
    /// Interior node count N; the grid is y_i = i / (N+1), i = 0..N+1.
    pub interior_nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Flux regularization epsilon; keeps the Jacobian nondegenerate at
    /// v_y = 0 for p > 2. Safe to set to 0 when p = 2.
    pub eps_reg: f64,
    /// Newton residual tolerance, relative to the sup norm of the state.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub initial_profile: InitialData,
    pub initial_velocity: InitialData,
    /// Trace recording cadence in steps (1 = every step).
    pub sample_every: usize,
    /// Full-state recording cadence in steps; 0 keeps only the first and
    /// last states.
    pub state_every: usize,
    pub source: Option<SourceFn>,
}

impl fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SolverConfig")
            .field("p", &self.p)
            .field("trajectory", &self.trajectory)
            .field("interior_nodes", &self.interior_nodes)
            .field("dt", &self.dt)
            .field("t_end", &self.t_end)
            .field("eps_reg", &self.eps_reg)
            .field("newton_tol", &self.newton_tol)
            .field("newton_max_iter", &self.newton_max_iter)
            .field("initial_profile", &self.initial_profile)
            .field("initial_velocity", &self.initial_velocity)
            .field("sample_every", &self.sample_every)
            .field("state_every", &self.state_every)
            .field("source", &self.source.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl SolverConfig {
    pub fn new(
        p: f64,
        trajectory: DomainTrajectory,
        interior_nodes: usize,
        dt: f64,
        t_end: f64,
    ) -> Self {
        Self {
            p,
            trajectory,
            interior_nodes,
            dt,
            t_end,
            eps_reg: 1e-8,
            newton_tol: 1e-10,
            newton_max_iter: 30,
            initial_profile: InitialData::SineMode(1),
            initial_velocity: InitialData::Zero,
            sample_every: 1,
            state_every: 0,
            source: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.p >= 2.0) || !self.p.is_finite() {
            return Err(SolverError::InvalidConfig(format!("p must be >= 2, got {}", self.p)));
        }
        if self.interior_nodes < 3 {
            return Err(SolverError::InvalidConfig(format!(
                "need at least 3 interior nodes, got {}",
                self.interior_nodes
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(SolverError::InvalidConfig(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(SolverError::InvalidConfig(format!(
                "t_end must be > 0, got {}",
                self.t_end
            )));
        }
        if !(self.eps_reg >= 0.0) || !self.eps_reg.is_finite() {
            return Err(SolverError::InvalidConfig(format!(
                "eps_reg must be >= 0, got {}",
                self.eps_reg
            )));
        }
        if !(self.newton_tol > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "newton_tol must be > 0, got {}",
                self.newton_tol
            )));
        }
        if self.sample_every == 0 {
            return Err(SolverError::InvalidConfig("sample_every must be >= 1".into()));
        }
        let slack = 1e-9 * self.t_end.max(1.0);
        if self.trajectory.t_max() + slack < self.t_end {
            return Err(SolverError::InvalidConfig(format!(
                "trajectory horizon {} does not cover t_end {}",
                self.trajectory.t_max(),
                self.t_end
            )));
        }
        self.initial_profile.validate()?;
        self.initial_velocity.validate()?;
        Ok(())
    }
}

/// Solution snapshot (v, w) = (u, u_t) on the reference grid at one time.
#[derive(Debug, Clone)]
pub struct ReferenceState {
    pub t: f64,
    /// u at nodes y_i = i/(N+1), length N+2, zero at both ends.
    pub v: Vec<f64>,
    /// u_t at the same nodes, zero at both ends.
    pub w: Vec<f64>,
    /// Domain length L(t) > 0.
    pub l: f64,
    /// Nonlinearity exponent p >= 2.
    pub p: f64,
}

impl ReferenceState {
    pub fn new(t: f64, v: Vec<f64>, w: Vec<f64>, l: f64, p: f64) -> Result<Self, SolverError> {
        if v.len() != w.len() || v.len() < 5 {
            return Err(SolverError::InvalidState(format!(
                "v and w must have equal length >= 5, got {} and {}",
                v.len(),
                w.len()
            )));
        }
        let last = v.len() - 1;
        if v[0] != 0.0 || v[last] != 0.0 || w[0] != 0.0 || w[last] != 0.0 {
            return Err(SolverError::InvalidState("boundary values must be exactly zero".into()));
        }
        if v.iter().chain(w.iter()).any(|x| !x.is_finite()) {
            return Err(SolverError::InvalidState("state entries must be finite".into()));
        }
        if !(l > 0.0) || !l.is_finite() {
            return Err(SolverError::InvalidState(format!("L must be > 0, got {l}")));
        }
        if !(p >= 2.0) || !p.is_finite() {
            return Err(SolverError::InvalidState(format!("p must be >= 2, got {p}")));
        }
        Ok(Self { t, v, w, l, p })
    }

    pub fn interior_nodes(&self) -> usize {
        self.v.len() - 2
    }

    /// Grid spacing h = 1/(N+1).
    pub fn h(&self) -> f64 {
        1.0 / (self.v.len() - 1) as f64
    }
}

/// Regularized p-Laplacian flux Phi(s) = (s^2 + eps^2)^{(p-2)/2} s.
#[inline]
fn flux(s: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        return s;
    }
    let r = s * s + eps * eps;
    if p == 4.0 {
        return r * s;
    }
    r.powf(0.5 * (p - 2.0)) * s
}

/// Phi'(s) = (s^2 + eps^2)^{(p-4)/2} ((p-1) s^2 + eps^2).
#[inline]
fn flux_deriv(s: f64, p: f64, eps: f64) -> f64 {
    if p == 2.0 {
        return 1.0;
    }
    let r = s * s + eps * eps;
    if r == 0.0 {
        // Degenerate point of the unregularized flux; the derivative limit
        // is 0 for every p > 2.
        return 0.0;
    }
    if p == 4.0 {
        return 3.0 * s * s + eps * eps;
    }
    r.powf(0.5 * (p - 4.0)) * ((p - 1.0) * s * s + eps * eps)
}

/// Coefficients of the reference-domain system frozen at one time.
struct RhsCoefficients {
    mu: f64,
    l_pow_minus_p: f64,
    l_pow_minus_2: f64,
}

fn coefficients(
    traj: &DomainTrajectory,
    t: f64,
    p: f64,
) -> Result<RhsCoefficients, SolverError> {
    let l = traj.length(t)?;
    let rate = traj.length_rate(t)?;
    Ok(RhsCoefficients {
        mu: rate / l,
        l_pow_minus_p: if p == 2.0 { 1.0 / (l * l) } else { l.powf(-p) },
        l_pow_minus_2: 1.0 / (l * l),
    })
}

/// Semi-discrete right-hand side of the transformed system.
///
/// Returns (dv/dt, dw/dt) on the full grid with zero boundary entries.
/// The flux divergence uses half-node fluxes; advection uses second-order
/// central differences.
pub fn system_rhs(
    state: &ReferenceState,
    traj: &DomainTrajectory,
    eps_reg: f64,
    source: Option<&SourceFn>,
) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
    let n = state.interior_nodes();
    let mut dv = vec![0.0; n + 2];
    let mut dw = vec![0.0; n + 2];
    let coeff = coefficients(traj, state.t, state.p)?;
    rhs_into(
        &state.v,
        &state.w,
        state.t,
        state.p,
        eps_reg,
        &coeff,
        source,
        &mut dv,
        &mut dw,
    );
    if dv.iter().chain(dw.iter()).any(|x| !x.is_finite()) {
        return Err(SolverError::Blowup { t: state.t });
    }
    Ok((dv, dw))
}

#[allow(clippy::too_many_arguments)]
fn rhs_into(
    v: &[f64],
    w: &[f64],
    t: f64,
    p: f64,
    eps: f64,
    coeff: &RhsCoefficients,
    source: Option<&SourceFn>,
    dv: &mut [f64],
    dw: &mut [f64],
) {
    let n = v.len() - 2;
    let h = 1.0 / (n + 1) as f64;
    let inv_h = 1.0 / h;
    let inv_2h = 0.5 * inv_h;
    let inv_h2 = inv_h * inv_h;
    dv[0] = 0.0;
    dv[n + 1] = 0.0;
    dw[0] = 0.0;
    dw[n + 1] = 0.0;
    let mut flux_left = flux((v[1] - v[0]) * inv_h, p, eps);
    for i in 1..=n {
        let y = i as f64 * h;
        let flux_right = flux((v[i + 1] - v[i]) * inv_h, p, eps);
        let adv_v = coeff.mu * y * (v[i + 1] - v[i - 1]) * inv_2h;
        let adv_w = coeff.mu * y * (w[i + 1] - w[i - 1]) * inv_2h;
        let damp = (w[i + 1] - 2.0 * w[i] + w[i - 1]) * inv_h2;
        dv[i] = w[i] + adv_v;
        dw[i] = adv_w
            + coeff.l_pow_minus_p * (flux_right - flux_left) * inv_h
            + coeff.l_pow_minus_2 * damp;
        if let Some(f) = source {
            dw[i] += f(y, t);
        }
        flux_left = flux_right;
    }
}

/// Scratch buffers for one trapezoidal step, reused across the run.
struct Stepper {
    n: usize,
    h: f64,
    /// F at the old time level, interleaved (dv_1, dw_1, dv_2, ...).
    f_old: Vec<f64>,
    /// Current Newton iterate as full grid arrays.
    v: Vec<f64>,
    w: Vec<f64>,
    dv: Vec<f64>,
    dw: Vec<f64>,
    residual: Vec<f64>,
    jacobian: BandedMatrix,
}

impl Stepper {
    fn new(n: usize) -> Self {
        Self {
            n,
            h: 1.0 / (n + 1) as f64,
            f_old: vec![0.0; 2 * n],
            v: vec![0.0; n + 2],
            w: vec![0.0; n + 2],
            dv: vec![0.0; n + 2],
            dw: vec![0.0; n + 2],
            residual: vec![0.0; 2 * n],
            jacobian: BandedMatrix::zeros(2 * n, 3, 2),
        }
    }

    /// One trapezoidal step of size dt from `state`, solved with Newton.
    fn advance(
        &mut self,
        state: &ReferenceState,
        cfg: &SolverConfig,
        dt: f64,
    ) -> Result<ReferenceState, SolverError> {
        let n = self.n;
        let t_new = state.t + dt;
        let p = cfg.p;
        let eps = cfg.eps_reg;
        let coeff_old = coefficients(&cfg.trajectory, state.t, p)?;
        let coeff_new = coefficients(&cfg.trajectory, t_new, p)?;

        rhs_into(
            &state.v,
            &state.w,
            state.t,
            p,
            eps,
            &coeff_old,
            cfg.source.as_ref(),
            &mut self.dv,
            &mut self.dw,
        );
        for i in 1..=n {
            self.f_old[2 * (i - 1)] = self.dv[i];
            self.f_old[2 * (i - 1) + 1] = self.dw[i];
        }

        self.v.copy_from_slice(&state.v);
        self.w.copy_from_slice(&state.w);

        // Residual scale: tolerances track the state magnitude so decayed
        // solutions keep converging multiplicatively instead of freezing.
        let scale = state
            .v
            .iter()
            .chain(state.w.iter())
            .fold(0.0f64, |acc, x| acc.max(x.abs()));
        let tol = cfg.newton_tol * scale;

        let mut iterations = 0;
        loop {
            rhs_into(
                &self.v,
                &self.w,
                t_new,
                p,
                eps,
                &coeff_new,
                cfg.source.as_ref(),
                &mut self.dv,
                &mut self.dw,
            );
            let mut res_norm = 0.0f64;
            for i in 1..=n {
                let rv = self.v[i]
                    - state.v[i]
                    - 0.5 * dt * (self.f_old[2 * (i - 1)] + self.dv[i]);
                let rw = self.w[i]
                    - state.w[i]
                    - 0.5 * dt * (self.f_old[2 * (i - 1) + 1] + self.dw[i]);
                self.residual[2 * (i - 1)] = rv;
                self.residual[2 * (i - 1) + 1] = rw;
                res_norm = res_norm.max(rv.abs()).max(rw.abs());
            }
            if !res_norm.is_finite() {
                return Err(SolverError::Blowup { t: t_new });
            }
            if res_norm <= tol {
                break;
            }
            if iterations >= cfg.newton_max_iter {
                return Err(SolverError::NewtonDiverged { t: t_new, iterations });
            }
            self.assemble_jacobian(dt, p, eps, &coeff_new);
            let delta = &mut self.residual;
            if self.jacobian.solve_in_place(delta).is_err() {
                return Err(SolverError::NewtonDiverged { t: t_new, iterations });
            }
            for i in 1..=n {
                self.v[i] -= delta[2 * (i - 1)];
                self.w[i] -= delta[2 * (i - 1) + 1];
            }
            iterations += 1;
        }

        let l_new = cfg.trajectory.length(t_new)?;
        ReferenceState::new(t_new, self.v.clone(), self.w.clone(), l_new, p)
    }

    /// Jacobian of the trapezoidal residual at the current iterate,
    /// d/dz [z - z_old - dt/2 (F_old + F(z))] = I - dt/2 dF(z).
    fn assemble_jacobian(&mut self, dt: f64, p: f64, eps: f64, coeff: &RhsCoefficients) {
        let n = self.n;
        let h = self.h;
        let inv_h = 1.0 / h;
        let inv_2h = 0.5 * inv_h;
        let inv_h2 = inv_h * inv_h;
        let half_dt = 0.5 * dt;
        self.jacobian.reset();
        let iv = |i: usize| 2 * (i - 1);
        let iw = |i: usize| 2 * (i - 1) + 1;
        for i in 1..=n {
            let y = i as f64 * h;
            let adv = coeff.mu * y * inv_2h;
            let dphi_l = flux_deriv((self.v[i] - self.v[i - 1]) * inv_h, p, eps);
            let dphi_r = flux_deriv((self.v[i + 1] - self.v[i]) * inv_h, p, eps);
            let kp = coeff.l_pow_minus_p * inv_h2;
            let kd = coeff.l_pow_minus_2 * inv_h2;

            // Row for the v-component equation.
            self.jacobian.set(iv(i), iv(i), 1.0);
            self.jacobian.add(iv(i), iw(i), -half_dt);
            if i > 1 {
                self.jacobian.add(iv(i), iv(i - 1), -half_dt * (-adv));
            }
            if i < n {
                self.jacobian.add(iv(i), iv(i + 1), -half_dt * adv);
            }

            // Row for the w-component equation.
            self.jacobian.set(iw(i), iw(i), 1.0 - half_dt * (-2.0 * kd));
            self.jacobian.add(iw(i), iv(i), -half_dt * (-(dphi_l + dphi_r) * kp));
            if i > 1 {
                self.jacobian.add(iw(i), iv(i - 1), -half_dt * (dphi_l * kp));
                self.jacobian.add(iw(i), iw(i - 1), -half_dt * (kd - adv));
            }
            if i < n {
                self.jacobian.add(iw(i), iv(i + 1), -half_dt * (dphi_r * kp));
                self.jacobian.add(iw(i), iw(i + 1), -half_dt * (kd + adv));
            }
        }
    }
}

/// Advances one step of size dt, recursively halving on Newton failure.
fn advance_with_halving(
    stepper: &mut Stepper,
    state: &ReferenceState,
    cfg: &SolverConfig,
    dt: f64,
    depth: u32,
) -> Result<ReferenceState, SolverError> {
    match stepper.advance(state, cfg, dt) {
        Ok(next) => Ok(next),
        Err(SolverError::NewtonDiverged { .. }) if depth < MAX_HALVINGS => {
            let half = 0.5 * dt;
            let mid = advance_with_halving(stepper, state, cfg, half, depth + 1)?;
            advance_with_halving(stepper, &mid, cfg, half, depth + 1)
        }
        Err(e) => Err(e),
    }
}

/// Single implicit step of size cfg.dt (trapezoidal rule plus Newton).
pub fn step(state: &ReferenceState, cfg: &SolverConfig) -> Result<ReferenceState, SolverError> {
    cfg.validate()?;
    if state.interior_nodes() != cfg.interior_nodes {
        return Err(SolverError::InvalidConfig(format!(
            "state has {} interior nodes, config expects {}",
            state.interior_nodes(),
            cfg.interior_nodes
        )));
    }
    let slack = 1e-9 * cfg.t_end.max(1.0);
    if state.t + cfg.dt > cfg.t_end + slack {
        return Err(SolverError::InvalidConfig(format!(
            "step from t = {} by dt = {} exceeds t_end = {}",
            state.t, cfg.dt, cfg.t_end
        )));
    }
    let mut stepper = Stepper::new(cfg.interior_nodes);
    stepper.advance(state, cfg, cfg.dt)
}

/// Initial state sampled from the configured profiles.
pub fn initial_state(cfg: &SolverConfig) -> Result<ReferenceState, SolverError> {
    cfg.validate()?;
    let n = cfg.interior_nodes;
    let h = 1.0 / (n + 1) as f64;
    let mut v = vec![0.0; n + 2];
    let mut w = vec![0.0; n + 2];
    for i in 1..=n {
        let y = i as f64 * h;
        v[i] = cfg.initial_profile.eval(y);
        w[i] = cfg.initial_velocity.eval(y);
    }
    let l0 = cfg.trajectory.length(0.0)?;
    ReferenceState::new(0.0, v, w, l0, cfg.p)
}

/// Full simulation output: the energy trace and the recorded states.
#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub trace: EnergyTrace,
    pub states: Vec<ReferenceState>,
}

/// Runs the configured simulation from t = 0 to t_end.
///
/// The energy trace is sampled every `sample_every` steps (plus the initial
/// and final samples); full states are kept every `state_every` steps, or
/// only at the endpoints when `state_every` is 0. Failed steps retry with
/// halved dt before giving up.
pub fn simulate(cfg: &SolverConfig) -> Result<SimulationOutput, SolverError> {
    cfg.validate()?;
    let mut state = initial_state(cfg)?;
    let mut stepper = Stepper::new(cfg.interior_nodes);

    let ratio = cfg.t_end / cfg.dt;
    let full_steps = (ratio + 1e-9).floor() as usize;
    let remainder = cfg.t_end - full_steps as f64 * cfg.dt;
    let tail_step = if remainder > 1e-9 * cfg.dt { Some(remainder) } else { None };
    let total_steps = full_steps + usize::from(tail_step.is_some());

    let mut measurements = Vec::with_capacity(total_steps / cfg.sample_every + 2);
    let mut states = Vec::new();
    let record = |state: &ReferenceState,
                  measurements: &mut Vec<(f64, f64, f64, f64)>,
                  keep_state: bool,
                  states: &mut Vec<ReferenceState>| {
        measurements.push((
            state.t,
            energy::energy(state),
            energy::dissipation(state),
            state.l,
        ));
        if keep_state {
            states.push(state.clone());
        }
    };

    record(&state, &mut measurements, true, &mut states);
    for k in 1..=total_steps {
        let dt = if k <= full_steps { cfg.dt } else { tail_step.unwrap() };
        state = advance_with_halving(&mut stepper, &state, cfg, dt, 0)?;
        // Phrase the time as k * dt to keep sample times reproducible.
        if k <= full_steps {
            state.t = k as f64 * cfg.dt;
        } else {
            state.t = cfg.t_end;
        }
        let last = k == total_steps;
        let keep_state = last || (cfg.state_every > 0 && k % cfg.state_every == 0);
        if last || k % cfg.sample_every == 0 {
            record(&state, &mut measurements, keep_state, &mut states);
        } else if keep_state {
            states.push(state.clone());
        }
    }

    let trace = EnergyTrace::from_measurements(measurements)
        .map_err(|e| SolverError::InvalidState(format!("trace assembly failed: {e}")))?;
    Ok(SimulationOutput { trace, states })
}
