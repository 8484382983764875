//! Acceptance gate: each test measures one shipping criterion end to end
//! and prints a single [PASS]/[FAIL] line with the observed values (run
//! with --nocapture to see the lines for passing tests).

use std::f64::consts::PI;
use std::sync::OnceLock;
use std::time::Instant;

use pwave_cli::csv_io;
use pwave_core::constraints::{self, ConstraintReport, ParameterSet};
use pwave_core::domain::DomainTrajectory;
use pwave_core::energy::EnergyTrace;
use pwave_core::envelope::{self, EnvelopeKind};
use pwave_core::inequalities;
use pwave_core::komornik;
use pwave_core::solver::{simulate, ReferenceState, SimulationOutput, SolverConfig};
use pwave_core::weight::WeightFunction;

struct TimedRun {
    out: SimulationOutput,
    seconds: f64,
}

fn timed(cfg: &SolverConfig) -> TimedRun {
    let start = Instant::now();
    let out = simulate(cfg).expect("suite run");
    TimedRun { out, seconds: start.elapsed().as_secs_f64() }
}

struct Suite {
    modal: TimedRun,
    modal_refined: TimedRun,
    expanding_p2: TimedRun,
    expanding_p4: TimedRun,
    fixed_p4: TimedRun,
}

fn modal_config(n: usize, dt: f64) -> SolverConfig {
    let traj = DomainTrajectory::constant(1.0, 2.0).unwrap();
    let mut cfg = SolverConfig::new(2.0, traj, n, dt, 2.0);
    cfg.state_every = 200;
    cfg
}

fn expanding_p2_config() -> SolverConfig {
    let traj = DomainTrajectory::power_law(1.0, 0.5, 2.0, 50.0).unwrap();
    let mut cfg = SolverConfig::new(2.0, traj, 200, 0.01, 50.0);
    cfg.state_every = 500;
    cfg
}

fn expanding_p4_config() -> SolverConfig {
    let traj = DomainTrajectory::power_law(1.0, 0.5, 3.0, 50.0).unwrap();
    let mut cfg = SolverConfig::new(4.0, traj, 100, 0.01, 50.0);
    cfg.state_every = 500;
    cfg
}

fn fixed_p4_config() -> SolverConfig {
    let traj = DomainTrajectory::constant(1.0, 60.0).unwrap();
    let mut cfg = SolverConfig::new(4.0, traj, 100, 0.01, 60.0);
    cfg.state_every = 600;
    cfg
}

fn suite() -> &'static Suite {
    static SUITE: OnceLock<Suite> = OnceLock::new();
    SUITE.get_or_init(|| Suite {
        modal: timed(&modal_config(200, 1e-3)),
        modal_refined: timed(&modal_config(400, 5e-4)),
        expanding_p2: timed(&expanding_p2_config()),
        expanding_p4: timed(&expanding_p4_config()),
        fixed_p4: timed(&fixed_p4_config()),
    })
}

fn all_runs(s: &Suite) -> [(&'static str, &TimedRun); 5] {
    [
        ("modal", &s.modal),
        ("modal refined", &s.modal_refined),
        ("expanding p=2", &s.expanding_p2),
        ("expanding p=4", &s.expanding_p4),
        ("fixed p=4", &s.fixed_p4),
    ]
}

fn report_line(ok: bool, name: &str, detail: String) {
    println!("[{}] {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    assert!(ok, "{name}: {detail}");
}

fn synthetic(f: impl Fn(f64) -> f64, t_end: f64, dt: f64) -> EnergyTrace {
    let n = (t_end / dt).round() as usize;
    let rows: Vec<(f64, f64, f64, f64)> = (0..=n)
        .map(|i| {
            let t = i as f64 * dt;
            (t, f(t), 0.0, 1.0)
        })
        .collect();
    EnergyTrace::from_measurements(rows).unwrap()
}

#[test]
fn dissipation_residuals_shrink_under_refinement() {
    let s = suite();
    let stats = |run: &TimedRun| {
        let tr = &run.out.trace;
        let e0 = tr.initial_energy();
        let max_r = tr.samples().iter().map(|x| x.residual.abs()).fold(0.0f64, f64::max);
        let sum_r: f64 = tr.samples().iter().map(|x| x.residual.abs()).sum();
        (max_r / e0, sum_r)
    };
    let (max_coarse, sum_coarse) = stats(&s.modal);
    let (max_fine, sum_fine) = stats(&s.modal_refined);
    let factor = sum_coarse / sum_fine;
    let seconds = s.modal.seconds + s.modal_refined.seconds;
    let ok = max_coarse <= 1e-4
        && max_fine <= 1e-4
        && (3.2..=4.8).contains(&factor)
        && seconds < 10.0;
    report_line(
        ok,
        "dissipation residual",
        format!(
            "max|R|/E(0) = {max_coarse:.3e} coarse, {max_fine:.3e} refined (budget 1e-4); \
             accumulated |R| contracts x{factor:.2} in [3.2, 4.8]; runtime {seconds:.2}s < 10s"
        ),
    );
}

#[test]
fn fixed_domain_energy_decays_at_the_modal_rate() {
    let s = suite();
    let fitted =
        envelope::fit(&s.modal.out.trace, EnvelopeKind::ExpInT, 2.0, None, Some((1.0, 2.0)))
            .unwrap();
    let rate = -fitted.slope;
    let pi2 = PI * PI;
    let lambda_slow = (-pi2 + (pi2 * pi2 - 4.0 * pi2).sqrt()) / 2.0;
    let target = 2.0 * lambda_slow.abs();
    let rel = (rate - target).abs() / target;
    let ok = rel <= 0.05 && s.modal.seconds < 10.0;
    report_line(
        ok,
        "modal decay rate",
        format!(
            "fitted rate {rate:.4} vs closed-form root {target:.4} (rel err {rel:.2e} <= 5e-2); \
             runtime {:.2}s < 10s",
            s.modal.seconds
        ),
    );
}

#[test]
fn energy_never_rises_beyond_the_residual_budget() {
    let s = suite();
    let mut violations = 0usize;
    let mut worst = f64::NEG_INFINITY;
    let mut samples = 0usize;
    for (_, run) in all_runs(s) {
        let tr = &run.out.trace;
        violations += tr.monotone_violations().len();
        let e0 = tr.initial_energy().max(f64::MIN_POSITIVE);
        samples += tr.len();
        for w in tr.samples().windows(2) {
            worst = worst.max((w[1].e - w[0].e - w[0].residual.abs()) / e0);
        }
    }
    let ok = violations == 0 && worst <= 1e-12;
    report_line(
        ok,
        "energy monotonicity",
        format!(
            "{samples} samples over 5 runs, 0 budget violations expected (got {violations}); \
             worst normalized uptick {worst:.3e} <= 1e-12"
        ),
    );
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    assert!(m % 2 == 0);
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

fn oracle_state(n: usize, l: f64, p: f64, f: &dyn Fn(f64) -> f64) -> ReferenceState {
    let h = 1.0 / (n + 1) as f64;
    let mut v = vec![0.0; n + 2];
    for i in 1..=n {
        v[i] = f(i as f64 * h);
    }
    ReferenceState::new(0.0, v, vec![0.0; n + 2], l, p).unwrap()
}

/// Compares the quadrature behind the embedding checks against Simpson
/// integration of the continuum norms on analytic profiles.
fn simpson_oracle_max_rel_error() -> f64 {
    struct Case {
        p: f64,
        l: f64,
        f: fn(f64) -> f64,
        df: fn(f64) -> f64,
    }
    let cases = [
        Case {
            p: 2.0,
            l: 1.0,
            f: |y| (PI * y).sin() + 0.3 * (3.0 * PI * y).sin(),
            df: |y| PI * (PI * y).cos() + 0.9 * PI * (3.0 * PI * y).cos(),
        },
        Case { p: 2.5, l: 0.5, f: |y| y * (1.0 - y), df: |y| 1.0 - 2.0 * y },
        Case {
            p: 3.0,
            l: 2.0,
            f: |y| 0.7 * (2.0 * PI * y).sin(),
            df: |y| 1.4 * PI * (2.0 * PI * y).cos(),
        },
        Case { p: 4.0, l: 3.8, f: |y| y * y * (1.0 - y), df: |y| 2.0 * y - 3.0 * y * y },
        Case { p: 7.0, l: 0.25, f: |y| (PI * y).sin(), df: |y| PI * (PI * y).cos() },
    ];
    let m = 100_000;
    let mut worst = 0.0f64;
    for c in &cases {
        let state = oracle_state(6000, c.l, c.p, &|y| (c.f)(y));
        let rep = inequalities::check_embeddings(&state);
        let u2 = c.l * simpson(&|y| (c.f)(y).powi(2), 0.0, 1.0, m);
        let gx2 = simpson(&|y| (c.df)(y).powi(2), 0.0, 1.0, m) / c.l;
        let gxp_sq = (c.l.powf(1.0 - c.p)
            * simpson(&|y| (c.df)(y).abs().powf(c.p), 0.0, 1.0, m))
        .powf(2.0 / c.p);
        let d_gxp_sq =
            if c.p == 2.0 { rep.lhs1 } else { rep.rhs1 / c.l.powf(1.0 - 2.0 / c.p) };
        for (discrete, oracle) in [(rep.lhs2, u2), (rep.lhs1, gx2), (d_gxp_sq, gxp_sq)] {
            worst = worst.max((discrete - oracle).abs() / oracle);
        }
    }
    worst
}

#[test]
fn embedding_inequalities_hold_on_every_stored_state() {
    let s = suite();
    let mut checked = 0usize;
    let mut violated = 0usize;
    let mut worst_margin = f64::INFINITY;
    for (_, run) in all_runs(s) {
        for state in &run.out.states {
            let rep = inequalities::check_embeddings(state);
            checked += 1;
            if rep.any_violation() {
                violated += 1;
            }
            let rhs = [rep.rhs1, rep.rhs2, rep.rhs3];
            for i in 0..3 {
                worst_margin = worst_margin.min(rep.margins[i] / rhs[i].max(1.0));
            }
        }
    }
    let oracle_err = simpson_oracle_max_rel_error();
    let ok = violated == 0 && worst_margin >= -1e-8 && oracle_err <= 1e-6;
    report_line(
        ok,
        "embedding inequalities",
        format!(
            "{checked} stored states, {violated} violations, worst normalized margin \
             {worst_margin:.3e} >= -1e-8; Simpson oracle max rel err {oracle_err:.3e} <= 1e-6"
        ),
    );
}

#[test]
fn expanding_domain_p2_decays_exponentially_in_the_weight() {
    let s = suite();
    let run = &s.expanding_p2;
    let phi = WeightFunction::power_shift(1.0, 0.5).unwrap();
    let fitted =
        envelope::fit(&run.out.trace, EnvelopeKind::ExpInPhi, 2.0, Some(&phi), None).unwrap();
    let ratio = fitted.verify(&run.out.trace);
    let ok = fitted.r_squared >= 0.95
        && fitted.slope < 0.0
        && ratio <= 1.0 + 1e-6
        && run.seconds < 60.0;
    report_line(
        ok,
        "expanding p=2 envelope",
        format!(
            "ln E vs phi slope {:.4} < 0, R^2 = {:.4} >= 0.95, domination ratio {:.9} <= \
             1 + 1e-6; runtime {:.2}s < 60s",
            fitted.slope, fitted.r_squared, ratio, run.seconds
        ),
    );
}

#[test]
fn expanding_domain_p4_weighted_energy_stays_bounded() {
    let s = suite();
    let run = &s.expanding_p4;
    let phi = WeightFunction::power_shift(1.0, 0.5).unwrap();
    // beta = (p - 2)/p = 1/2 at p = 4, so the certified shape is E phi^2.
    let weighted: Vec<f64> =
        run.out.trace.samples().iter().map(|x| x.e * phi.phi(x.t).powi(2)).collect();
    let tail = &weighted[weighted.len() / 2..];
    let sup_all = weighted.iter().copied().fold(0.0f64, f64::max);
    let sup_tail = tail.iter().copied().fold(0.0f64, f64::max);
    let max_rel_uptick = tail
        .windows(2)
        .map(|w| (w[1] - w[0]) / w[0].max(f64::MIN_POSITIVE))
        .fold(f64::NEG_INFINITY, f64::max);
    let ok = sup_all.is_finite()
        && sup_tail <= sup_all
        && max_rel_uptick <= 1e-12
        && run.seconds < 120.0;
    report_line(
        ok,
        "expanding p=4 envelope",
        format!(
            "sup E phi^2 = {sup_all:.4e} (tail sup {sup_tail:.4e}), max relative uptick over \
             the final half {max_rel_uptick:.3e} <= 1e-12; runtime {:.2}s < 120s",
            run.seconds
        ),
    );
}

#[test]
fn fixed_domain_fits_match_both_nonlinearity_regimes() {
    let s = suite();
    let exp_fit = envelope::fit(&s.modal.out.trace, EnvelopeKind::ExpInT, 2.0, None, None).unwrap();
    let poly_fit =
        envelope::fit(&s.fixed_p4.out.trace, EnvelopeKind::PolyInT, 4.0, None, None).unwrap();
    let ok = exp_fit.r_squared >= 0.99 && poly_fit.slope <= -1.8;
    report_line(
        ok,
        "fixed-domain envelopes",
        format!(
            "p=2 exponential fit R^2 = {:.6} >= 0.99; p=4 log-log slope {:.3} <= -1.8 \
             (R^2 = {:.4})",
            exp_fit.r_squared, poly_fit.slope, poly_fit.r_squared
        ),
    );
}

#[test]
fn integral_inequality_constants_match_closed_forms() {
    let id = WeightFunction::identity();
    let exp_trace = synthetic(|t| (-t).exp(), 20.0, 0.01);
    let a_exp = komornik::estimate_a(&exp_trace, &id, 0.0).unwrap().a_hat;
    let mut oracle_err = (a_exp - 1.0).abs();
    for (q, pow) in [(0.5, -2.0), (1.0, -1.0)] {
        let tr = synthetic(|t| (1.0 + t).powf(pow), 500.0, 0.05);
        let a_hat = komornik::estimate_a(&tr, &id, q).unwrap().a_hat;
        let expect = 1.0 / q;
        oracle_err = oracle_err.max((a_hat - expect).abs() / expect);
    }

    let s = suite();
    let shift = WeightFunction::power_shift(1.0, 0.5).unwrap();
    let cases: [(&TimedRun, &WeightFunction, f64); 5] = [
        (&s.modal, &id, 0.0),
        (&s.modal_refined, &id, 0.0),
        (&s.expanding_p2, &shift, 0.0),
        (&s.expanding_p4, &shift, 0.5),
        (&s.fixed_p4, &id, 0.5),
    ];
    let mut self_worst = 0.0f64;
    for (run, phi, q) in cases {
        let rep = komornik::estimate_a(&run.out.trace, phi, q).unwrap();
        self_worst = self_worst.max(rep.bound_violation);
    }
    let ok = oracle_err <= 0.01 && self_worst <= 1.0 + 1e-6;
    report_line(
        ok,
        "integral inequality constants",
        format!(
            "closed-form traces (exp, poly q=0.5, poly q=1) recover A to rel err \
             {oracle_err:.3e} <= 1e-2; worst self-consistency ratio over 5 simulated traces \
             {self_worst:.9} <= 1 + 1e-6"
        ),
    );
}

fn family_report(p: f64, alpha: f64, m: f64, grid: &[f64]) -> ConstraintReport {
    let params = ParameterSet::new(p, alpha, m, 1.0, 0.5).unwrap();
    let traj = DomainTrajectory::power_law(1.0, 0.5, m, 1e4).unwrap();
    let phi = WeightFunction::power_shift(1.0, 0.5).unwrap();
    constraints::phi_condition_sups(&params, &traj, &phi, grid).unwrap()
}

#[test]
fn constraint_certificates_are_exact_on_the_power_family() {
    let m_a = constraints::m_min(4.0, 0.5).unwrap();
    let m_b = constraints::m_min(3.0, 0.5).unwrap();
    let m_c = constraints::m_min_p2(2.0 / 3.0).unwrap();
    let beta_worst = [2.5, 3.0, 4.0, 5.0, 10.0]
        .iter()
        .map(|&p| constraints::beta_identity_check(p).abs())
        .fold(0.0f64, f64::max);

    let grid = constraints::certification_grid(1e4, 2000);
    let admissible = [(4.0, 0.5, 3.0), (3.0, 0.5, 3.0), (2.0, 2.0 / 3.0, 2.0)];
    let below = [(4.0, 0.5, 2.5), (3.0, 0.5, 2.5), (2.0, 2.0 / 3.0, 1.5)];
    let mut defect_worst = 0.0f64;
    let mut admissible_ok = true;
    for (p, alpha, m) in admissible {
        let report = family_report(p, alpha, m, &grid);
        defect_worst = defect_worst.max(report.ansatz_defect);
        admissible_ok &= report.all_satisfied()
            && report.conditions.iter().all(|c| c.sup.is_finite());
    }
    let mut divergent_ok = true;
    for (p, alpha, m) in below {
        divergent_ok &= !family_report(p, alpha, m, &grid).all_satisfied();
    }

    let ok = m_a == 3.0
        && m_b == 3.0
        && (m_c - 2.0).abs() <= 1e-14
        && beta_worst <= 1e-14
        && defect_worst <= 1e-12
        && admissible_ok
        && divergent_ok;
    report_line(
        ok,
        "constraint exactness",
        format!(
            "m_min(4, 1/2) = {m_a}, m_min(3, 1/2) = {m_b}, m_min_p2(2/3) - 2 = {:.2e} \
             (<= 1e-14); conjugate-exponent identity residual <= {beta_worst:.2e}; matched \
             family defect <= {defect_worst:.2e} on the grid; sups bounded when admissible \
             ({admissible_ok}) and divergent half below threshold ({divergent_ok})",
            m_c - 2.0
        ),
    );
}

#[test]
fn repeated_runs_are_byte_identical_and_round_trip() {
    let s = suite();
    let first = &s.expanding_p2.out.trace;
    let again = simulate(&expanding_p2_config()).unwrap().trace;

    let dir = tempfile::tempdir().unwrap();
    let path_a = dir.path().join("a.csv");
    let path_b = dir.path().join("b.csv");
    csv_io::write_trace(&path_a, first).unwrap();
    csv_io::write_trace(&path_b, &again).unwrap();
    let bytes_a = std::fs::read(&path_a).unwrap();
    let bytes_b = std::fs::read(&path_b).unwrap();
    let identical = bytes_a == bytes_b;

    let reread = csv_io::read_trace(&path_a).unwrap();
    let exact = reread.len() == first.len()
        && reread.samples().iter().zip(first.samples()).all(|(a, b)| {
            a.t.to_bits() == b.t.to_bits()
                && a.e.to_bits() == b.e.to_bits()
                && a.d.to_bits() == b.d.to_bits()
                && a.l.to_bits() == b.l.to_bits()
                && a.residual.to_bits() == b.residual.to_bits()
        });
    let ok = identical && exact;
    report_line(
        ok,
        "determinism round-trip",
        format!(
            "repeat run CSV identical over {} bytes: {identical}; re-parsed trace bitwise \
             equal across {} samples: {exact}",
            bytes_a.len(),
            first.len()
        ),
    );
}
