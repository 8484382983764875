//! Structural solver checks: superposition in the linear regime, agreement
//! with an independently coded fixed-domain scheme, and the interaction of
//! simulated states with the inequality and decay-certificate modules.

use std::f64::consts::PI;

use pwave_core::solver::{simulate, InitialData, SolverConfig};
use pwave_core::{inequalities, komornik, DomainTrajectory, WeightFunction};

#[test]
fn superposition_holds_for_linear_flux() {
    let n = 60;
    let h = 1.0 / (n + 1) as f64;
    let run = |profile: InitialData, velocity: InitialData| {
        let traj = DomainTrajectory::constant(1.0, 2.0).unwrap();
        let mut cfg = SolverConfig::new(2.0, traj, n, 5e-3, 1.0);
        cfg.eps_reg = 0.0;
        cfg.initial_profile = profile;
        cfg.initial_velocity = velocity;
        simulate(&cfg).unwrap().states.last().unwrap().clone()
    };

    let (alpha, beta) = (0.7, -1.3);
    let a = run(InitialData::SineMode(1), InitialData::Zero);
    let b = run(InitialData::Bump, InitialData::SineMode(2));
    let mix_profile: Vec<f64> = (0..=n + 1)
        .map(|i| {
            let y = i as f64 * h;
            alpha * (PI * y).sin() + beta * 4.0 * y * (1.0 - y)
        })
        .collect();
    let mix_velocity: Vec<f64> =
        (0..=n + 1).map(|i| beta * (2.0 * PI * i as f64 * h).sin()).collect();
    let c = run(InitialData::Table(mix_profile), InitialData::Table(mix_velocity));

    let mut diff = 0.0f64;
    for i in 0..=n + 1 {
        diff = diff.max((c.v[i] - (alpha * a.v[i] + beta * b.v[i])).abs());
        diff = diff.max((c.w[i] - (alpha * a.w[i] + beta * b.w[i])).abs());
    }
    assert!(diff <= 1e-9, "linear runs failed to superpose, drift {diff:e}");
}

/// Fixed-domain trapezoidal stepper with a dense forward-difference
/// Jacobian; shares no code with the production solver.
struct DenseStepper {
    n: usize,
    h: f64,
    p: f64,
    eps: f64,
    l: f64,
    dt: f64,
}

impl DenseStepper {
    /// Interleaved rhs (dv_1, dw_1, dv_2, ...) without transport terms.
    fn rhs(&self, z: &[f64]) -> Vec<f64> {
        let n = self.n;
        let v = |i: usize| if i == 0 || i == n + 1 { 0.0 } else { z[2 * (i - 1)] };
        let w = |i: usize| if i == 0 || i == n + 1 { 0.0 } else { z[2 * (i - 1) + 1] };
        let phi = |s: f64| (s * s + self.eps * self.eps).powf(0.5 * (self.p - 2.0)) * s;
        let inv_h = 1.0 / self.h;
        let lp = self.l.powf(-self.p);
        let l2 = self.l.powi(-2);
        let mut out = vec![0.0; 2 * n];
        for i in 1..=n {
            let flux_r = phi((v(i + 1) - v(i)) * inv_h);
            let flux_l = phi((v(i) - v(i - 1)) * inv_h);
            let damp = (w(i + 1) - 2.0 * w(i) + w(i - 1)) * inv_h * inv_h;
            out[2 * (i - 1)] = w(i);
            out[2 * (i - 1) + 1] = lp * (flux_r - flux_l) * inv_h + l2 * damp;
        }
        out
    }

    fn residual(&self, z: &[f64], z_old: &[f64], f_old: &[f64]) -> Vec<f64> {
        let f_new = self.rhs(z);
        (0..z.len()).map(|j| z[j] - z_old[j] - 0.5 * self.dt * (f_old[j] + f_new[j])).collect()
    }

    fn step(&self, z_old: &[f64]) -> Vec<f64> {
        let m = z_old.len();
        let f_old = self.rhs(z_old);
        let mut z = z_old.to_vec();
        let scale = z_old.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        for _ in 0..50 {
            let g = self.residual(&z, z_old, &f_old);
            let norm = g.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if norm <= 1e-13 * scale {
                return z;
            }
            let mut jac = vec![vec![0.0; m]; m];
            for col in 0..m {
                let probe = 1e-7 * (1.0 + z[col].abs());
                let mut shifted = z.clone();
                shifted[col] += probe;
                let g_shifted = self.residual(&shifted, z_old, &f_old);
                for row in 0..m {
                    jac[row][col] = (g_shifted[row] - g[row]) / probe;
                }
            }
            let update = solve_dense(jac, g);
            for j in 0..m {
                z[j] -= update[j];
            }
        }
        panic!("reference Newton failed to converge");
    }
}

fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    for k in 0..m {
        let pivot = (k..m).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs())).unwrap();
        a.swap(k, pivot);
        b.swap(k, pivot);
        assert!(a[k][k] != 0.0, "singular reference Jacobian");
        for i in k + 1..m {
            let f = a[i][k] / a[k][k];
            if f == 0.0 {
                continue;
            }
            for j in k..m {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; m];
    for k in (0..m).rev() {
        let mut s = b[k];
        for j in k + 1..m {
            s -= a[k][j] * x[j];
        }
        x[k] = s / a[k][k];
    }
    x
}

#[test]
fn constant_trajectory_reduces_to_fixed_domain_scheme() {
    let n = 10;
    let l = 2.0;
    let dt = 0.02;
    let steps = 25;
    let traj = DomainTrajectory::constant(l, 1.0).unwrap();
    let mut cfg = SolverConfig::new(3.0, traj, n, dt, dt * steps as f64);
    cfg.initial_profile = InitialData::Bump;
    cfg.initial_velocity = InitialData::SineMode(1);
    let out = simulate(&cfg).unwrap();
    let state = out.states.last().unwrap();

    let h = 1.0 / (n + 1) as f64;
    let reference = DenseStepper { n, h, p: cfg.p, eps: cfg.eps_reg, l, dt };
    let mut z = vec![0.0; 2 * n];
    for i in 1..=n {
        let y = i as f64 * h;
        z[2 * (i - 1)] = 4.0 * y * (1.0 - y);
        z[2 * (i - 1) + 1] = (PI * y).sin();
    }
    for _ in 0..steps {
        z = reference.step(&z);
    }

    let mut diff = 0.0f64;
    for i in 1..=n {
        diff = diff.max((state.v[i] - z[2 * (i - 1)]).abs());
        diff = diff.max((state.w[i] - z[2 * (i - 1) + 1]).abs());
    }
    assert!(diff <= 1e-8, "transport-free run drifted {diff:e} from the reference scheme");
}

#[test]
fn embedding_margins_hold_along_simulated_runs() {
    let traj = DomainTrajectory::power_law(1.0, 0.5, 3.0, 5.0).unwrap();
    let mut cfg = SolverConfig::new(4.0, traj, 80, 5e-3, 2.0);
    cfg.initial_velocity = InitialData::SineMode(1);
    cfg.state_every = 20;
    let out = simulate(&cfg).unwrap();
    assert!(out.states.len() > 10);
    for state in &out.states {
        let report = inequalities::check_embeddings(state);
        assert!(
            !report.any_violation(),
            "embedding margins {:?} violated at t = {}",
            report.margins,
            state.t
        );
    }

    // At p = 2 both sides of the gradient comparison are the same
    // expression, so its margin must vanish identically.
    let traj = DomainTrajectory::constant(1.5, 2.0).unwrap();
    let mut cfg = SolverConfig::new(2.0, traj, 64, 5e-3, 1.0);
    cfg.state_every = 50;
    let out = simulate(&cfg).unwrap();
    for state in &out.states {
        let report = inequalities::check_embeddings(state);
        assert_eq!(report.margins[0], 0.0);
    }
}

#[test]
fn decay_certificate_holds_on_simulated_trace() {
    // Matched pair: L = (1 + t)^{1/4} grows with m = 2 while
    // phi = (1 + t)^{1/2} - 1, so phi' L^2 is constant.
    let traj = DomainTrajectory::power_law(1.0, 0.5, 2.0, 25.0).unwrap();
    let mut cfg = SolverConfig::new(2.0, traj, 80, 5e-3, 20.0);
    cfg.initial_velocity = InitialData::SineMode(1);
    cfg.sample_every = 4;
    let out = simulate(&cfg).unwrap();
    let phi = WeightFunction::power_shift(1.0, 0.5).unwrap();
    let report = komornik::estimate_a(&out.trace, &phi, 0.0).unwrap();
    assert!(report.a_hat > 0.0 && report.a_hat.is_finite());
    assert!(
        report.bound_violation <= 1.0 + 1e-6,
        "trace escapes its own certified bound by {}",
        report.bound_violation
    );
    let bound = komornik::decay_bound(out.trace.initial_energy(), 0.0, report.a_hat, phi);
    let everywhere = komornik::verify_bound(&out.trace, bound);
    assert!(
        everywhere <= 1.0 + 1e-6,
        "certified bound fails beyond the estimation range, ratio {everywhere}"
    );
}
