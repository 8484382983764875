//! Implementations of the CLI verbs.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pwave_core::constraints::{self, ParameterSet};
use pwave_core::envelope::{DecayEnvelope, EnvelopeError, EnvelopeKind, FittedEnvelope};
use pwave_core::inequalities::{self, EmbeddingReport};
use pwave_core::komornik::{KomornikError, TAIL_TRUST_LIMIT};
use pwave_core::{DomainTrajectory, WeightFunction};
use rayon::prelude::*;

use crate::config::{run_config, sweep_points, KvFile, RunConfig};
use crate::csv_io::{self, SummaryRow};
use crate::plot::{write_svg, Chart, Series, PALETTE};
use crate::report::{
    write_json, ConstraintArtifact, EmbeddingArtifact, EnvelopeArtifact, KomornikArtifact,
    RunRecord, SCHEMA_VERSION,
};
use crate::CliError;

/// Bounds verify as "holds" while E stays within this relative factor of
/// the bound (fit constants are themselves floating-point).
pub const DOMINATION_TOL: f64 = 1e-6;
/// Relative slack when comparing the configured m against the threshold;
/// both sides carry rounding, so exact-threshold parameter sets need room.
pub const M_THRESHOLD_SLACK: f64 = 1e-12;

struct Args {
    positional: Vec<String>,
    options: BTreeMap<String, String>,
}

fn scan_args(args: &[String], allowed: &[&str]) -> Result<Args, CliError> {
    let mut positional = Vec::new();
    let mut options = BTreeMap::new();
    let mut iter = args.iter();
    while let Some(tok) = iter.next() {
        if let Some(name) = tok.strip_prefix("--") {
            let (name, value) = match name.split_once('=') {
                Some((n, v)) => (n.to_string(), v.to_string()),
                None => {
                    let value = iter.next().ok_or_else(|| {
                        CliError::Usage(format!("option --{name} needs a value"))
                    })?;
                    (name.to_string(), value.clone())
                }
            };
            if !allowed.contains(&name.as_str()) {
                return Err(CliError::Usage(format!("unknown option --{name}")));
            }
            if options.insert(name.clone(), value).is_some() {
                return Err(CliError::Usage(format!("option --{name} given more than once")));
            }
        } else {
            positional.push(tok.clone());
        }
    }
    Ok(Args { positional, options })
}

impl Args {
    fn one_positional(&self, what: &str) -> Result<&str, CliError> {
        match self.positional.as_slice() {
            [one] => Ok(one),
            [] => Err(CliError::Usage(format!("missing {what}"))),
            more => Err(CliError::Usage(format!("expected one {what}, got {}", more.len()))),
        }
    }

    fn no_positional(&self, verb: &str) -> Result<(), CliError> {
        if self.positional.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!(
                "{verb} takes no positional arguments, got {:?}",
                self.positional[0]
            )))
        }
    }

    fn str_opt(&self, name: &str) -> Option<&str> {
        self.options.get(name).map(String::as_str)
    }

    fn f64_opt(&self, name: &str) -> Result<Option<f64>, CliError> {
        self.str_opt(name)
            .map(|v| {
                v.parse::<f64>().map_err(|_| {
                    CliError::Usage(format!("option --{name} expects a number, got {v:?}"))
                })
            })
            .transpose()
    }

    fn f64_or(&self, name: &str, default: f64) -> Result<f64, CliError> {
        Ok(self.f64_opt(name)?.unwrap_or(default))
    }

    fn require_f64(&self, name: &str) -> Result<f64, CliError> {
        self.f64_opt(name)?
            .ok_or_else(|| CliError::Usage(format!("option --{name} is required")))
    }

    fn usize_or(&self, name: &str, default: usize) -> Result<usize, CliError> {
        self.str_opt(name)
            .map(|v| {
                v.parse::<usize>().map_err(|_| {
                    CliError::Usage(format!(
                        "option --{name} expects a nonnegative integer, got {v:?}"
                    ))
                })
            })
            .transpose()
            .map(|o| o.unwrap_or(default))
    }
}

fn parse_weight_spec(spec: &str) -> Result<WeightFunction, CliError> {
    if spec == "identity" {
        return Ok(WeightFunction::identity());
    }
    if let Some(rest) = spec.strip_prefix("powershift:") {
        if let [k, gamma] = rest.split(':').collect::<Vec<_>>()[..] {
            let parse = |v: &str| {
                v.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("bad number {v:?} in weight spec")))
            };
            return WeightFunction::power_shift(parse(k)?, parse(gamma)?)
                .map_err(|e| CliError::Config(e.to_string()));
        }
    }
    Err(CliError::Config(format!(
        "bad weight spec {spec:?} (expected identity or powershift:K:GAMMA)"
    )))
}

/// The decay theory covers domain growth exponents (1 - gamma)/m up to 1/2;
/// faster-growing trajectories get flagged in sweep summaries.
fn outside_theory(m: f64, gamma: f64) -> bool {
    (1.0 - gamma) / m > 0.5
}

#[derive(Debug, Clone, Copy)]
pub struct FitMetrics {
    pub slope: f64,
    pub r_squared: f64,
    pub ratio: f64,
}

/// Everything one run produced that the caller needs to report.
pub struct RunOutcome {
    /// Human-readable progress lines, printed by the verb in a
    /// deterministic order (not from worker threads).
    pub log: String,
    /// Analysis conditions that did not hold; nonempty means exit 4.
    pub failures: Vec<String>,
    pub fit_metrics: Option<FitMetrics>,
}

/// Runs one configured simulation plus its analyses and writes all
/// artifacts into the run's output directory.
pub fn execute_run(run: &RunConfig) -> Result<RunOutcome, CliError> {
    let dir = &run.output_dir;
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Io { path: dir.clone(), source: e })?;

    let started = Instant::now();
    let output = pwave_core::solver::simulate(&run.solver)?;
    let duration = started.elapsed().as_secs_f64();
    let trace = &output.trace;
    csv_io::write_trace(&dir.join("trace.csv"), trace)?;

    let mut log = String::new();
    let mut failures: Vec<String> = Vec::new();
    let mut reports: Vec<String> = Vec::new();
    let mut plots: Vec<String> = Vec::new();

    let last = *trace.samples().last().expect("traces are never empty");
    let _ = writeln!(
        log,
        "{}: {} samples to t = {}, E(0) = {:.6e}, E(end) = {:.6e}, max |residual| = {:.3e}",
        run.label,
        trace.len(),
        last.t,
        trace.initial_energy(),
        last.e,
        trace.max_abs_residual(),
    );

    // Energy must not rise beyond each interval's recorded defect.
    let rises = trace.monotone_violations();
    if let Some(&i) = rises.first() {
        failures.push(format!(
            "monotone decay violated at sample {i} (t = {}): energy rose beyond the residual budget",
            trace.samples()[i].t
        ));
    }

    if run.analysis.check_embeddings {
        let checks: Vec<EmbeddingReport> =
            output.states.iter().map(inequalities::check_embeddings).collect();
        let worst = checks
            .iter()
            .flat_map(|r| r.margins)
            .fold(f64::INFINITY, f64::min);
        let mut violations = 0usize;
        for r in &checks {
            for (j, bad) in r.violated().into_iter().enumerate() {
                if bad {
                    if violations == 0 {
                        failures.push(format!(
                            "embedding inequality {} violated at t = {} (margin = {:.3e})",
                            j + 1,
                            r.t,
                            r.margins[j]
                        ));
                    }
                    violations += 1;
                }
            }
        }
        let _ = writeln!(
            log,
            "embeddings: {} states checked, worst margin = {:.3e}, violations = {violations}",
            checks.len(),
            worst
        );
        write_json(
            &dir.join("embeddings.json"),
            &EmbeddingArtifact {
                schema_version: SCHEMA_VERSION,
                checked_states: checks.len(),
                worst_margin: worst,
                violations,
                reports: checks,
            },
        )?;
        reports.push("embeddings.json".into());
    }

    if let Some(q) = run.analysis.komornik_q {
        let phi = run.weight.as_ref().expect("checked when the config was parsed");
        match pwave_core::komornik::estimate_a(trace, phi, q) {
            Ok(est) => {
                let _ = writeln!(
                    log,
                    "komornik: A_hat = {:.6e}, tail fraction = {:.3e}, bound ratio = {:.8}",
                    est.a_hat, est.tail_fraction, est.bound_violation
                );
                if est.tail_warning {
                    failures.push(format!(
                        "komornik tail untrusted: E(T)/E(0) = {:.3e} exceeds {TAIL_TRUST_LIMIT} \
                         (extend the run)",
                        est.tail_fraction
                    ));
                }
                if est.bound_violation > 1.0 + DOMINATION_TOL {
                    failures.push(format!(
                        "komornik decay bound violated: max E/bound = {}",
                        est.bound_violation
                    ));
                }
                write_json(
                    &dir.join("komornik.json"),
                    &KomornikArtifact { schema_version: SCHEMA_VERSION, estimate: est },
                )?;
                reports.push("komornik.json".into());
            }
            Err(e @ (KomornikError::InvalidExponent(_) | KomornikError::Weight(_))) => {
                return Err(CliError::Config(e.to_string()))
            }
            Err(e) => failures.push(format!("komornik estimate failed: {e}")),
        }
    }

    let mut fit_metrics = None;
    let mut fitted: Option<FittedEnvelope> = None;
    if let Some(kind) = run.analysis.fit_envelope {
        match pwave_core::envelope::fit(
            trace,
            kind,
            run.solver.p,
            run.weight.as_ref(),
            run.analysis.window,
        ) {
            Ok(fit) => {
                let ratio = fit.verify(trace);
                let _ = writeln!(
                    log,
                    "envelope ({kind}): slope = {:.6}, R^2 = {:.6}, domination ratio = {:.8}",
                    fit.slope, fit.r_squared, ratio
                );
                if ratio > 1.0 + DOMINATION_TOL {
                    failures.push(format!(
                        "fitted envelope fails to dominate the trace: ratio = {ratio}"
                    ));
                }
                fit_metrics =
                    Some(FitMetrics { slope: fit.slope, r_squared: fit.r_squared, ratio });
                write_json(
                    &dir.join("envelope.json"),
                    &EnvelopeArtifact {
                        schema_version: SCHEMA_VERSION,
                        fit: fit.clone(),
                        ratio,
                    },
                )?;
                reports.push("envelope.json".into());
                fitted = Some(fit);
            }
            Err(e @ (EnvelopeError::MissingWeight(_) | EnvelopeError::InvalidParameter(_))) => {
                return Err(CliError::Config(e.to_string()))
            }
            Err(e) => failures.push(format!("envelope fit failed: {e}")),
        }
    }

    if run.analysis.constraints {
        let (k, gamma, m) = run.powerlaw.expect("checked when the config was parsed");
        let alpha = run.analysis.alpha.expect("checked when the config was parsed");
        let params = ParameterSet::new(run.solver.p, alpha, m, k, gamma)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let t_max = run.analysis.grid_t_max;
        let traj = DomainTrajectory::power_law(k, gamma, m, t_max)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let phi = match &run.weight {
            Some(w) => w.clone(),
            None => WeightFunction::power_shift(k, gamma)
                .map_err(|e| CliError::Config(e.to_string()))?,
        };
        let grid = constraints::certification_grid(t_max, run.analysis.grid_points);
        let report = constraints::phi_condition_sups(&params, &traj, &phi, &grid)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let m_ok = m + M_THRESHOLD_SLACK * m.abs().max(1.0) >= report.m_min;
        let _ = writeln!(
            log,
            "constraints: m_min = {}, {} of {} conditions bounded, rate bound = {:.3e}",
            report.m_min,
            report.conditions.iter().filter(|c| c.satisfied).count(),
            report.conditions.len(),
            report.rate_bound
        );
        for c in report.conditions.iter().filter(|c| !c.satisfied) {
            failures.push(format!(
                "constraint {} diverges on the certification grid (sup = {:.3e})",
                c.label, c.sup
            ));
        }
        if !m_ok {
            failures.push(format!(
                "m = {m} is below the required threshold m_min = {}",
                report.m_min
            ));
        }
        write_json(
            &dir.join("constraints.json"),
            &ConstraintArtifact { schema_version: SCHEMA_VERSION, report, m_ok },
        )?;
        reports.push("constraints.json".into());
    }

    if run.plots {
        let energy_pts: Vec<(f64, f64)> =
            trace.samples().iter().map(|s| (s.t, s.e)).collect();
        let mut series = vec![Series::new("E(t)", PALETTE[0], energy_pts)];
        if let Some(fit) = &fitted {
            let env_pts: Vec<(f64, f64)> = trace
                .samples()
                .iter()
                .map(|s| (s.t, fit.envelope.eval(s.t)))
                .filter(|(_, y)| y.is_finite())
                .collect();
            series.push(
                Series::new(format!("envelope ({})", fit.envelope.kind()), PALETTE[1], env_pts)
                    .dashed(),
            );
        }
        for (file, log_y, title) in [
            ("energy_t.svg", false, "energy decay"),
            ("energy_t_log.svg", true, "energy decay (log scale)"),
        ] {
            let chart = Chart {
                title: format!("{}: {title}", run.label),
                x_label: "t".into(),
                y_label: "E".into(),
                log_y,
                series: series.clone(),
            };
            write_svg(&dir.join(file), &chart)?;
            plots.push(file.into());
        }
        if let Some(w) = &run.weight {
            let mut phi_series = vec![Series::new(
                "E",
                PALETTE[0],
                trace.samples().iter().map(|s| (w.phi(s.t), s.e)).collect(),
            )];
            if let Some(fit) = &fitted {
                phi_series.push(
                    Series::new(
                        format!("envelope ({})", fit.envelope.kind()),
                        PALETTE[1],
                        trace
                            .samples()
                            .iter()
                            .map(|s| (w.phi(s.t), fit.envelope.eval(s.t)))
                            .filter(|(_, y)| y.is_finite())
                            .collect(),
                    )
                    .dashed(),
                );
            }
            let chart = Chart {
                title: format!("{}: energy against the weight", run.label),
                x_label: "phi(t)".into(),
                y_label: "E".into(),
                log_y: true,
                series: phi_series,
            };
            write_svg(&dir.join("energy_phi.svg"), &chart)?;
            plots.push("energy_phi.svg".into());
        }
    }

    // The record goes last so its reference check sees every file.
    let record = RunRecord {
        schema_version: SCHEMA_VERSION,
        label: run.label.clone(),
        config: run.snapshot.clone(),
        trace_csv: "trace.csv".into(),
        reports,
        plots,
        duration_seconds: duration,
        failures: failures.clone(),
    };
    record.verify_references(dir)?;
    write_json(&dir.join("run.json"), &record)?;
    let _ = writeln!(log, "wrote {}", dir.join("run.json").display());

    Ok(RunOutcome { log, failures, fit_metrics })
}

pub fn simulate(args: &[String]) -> Result<(), CliError> {
    let args = scan_args(args, &[])?;
    let path = PathBuf::from(args.one_positional("config file")?);
    let kv = KvFile::load(&path)?;
    let run = run_config(&kv, None)?;
    kv.finish()?;
    let outcome = execute_run(&run)?;
    print!("{}", outcome.log);
    if outcome.failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(outcome.failures.join("; ")))
    }
}

pub fn check_constraints(args: &[String]) -> Result<(), CliError> {
    let args = scan_args(
        args,
        &["p", "alpha", "m", "k", "gamma", "t-max", "grid-points", "json"],
    )?;
    args.no_positional("check-constraints")?;
    let p = args.require_f64("p")?;
    let alpha = args.require_f64("alpha")?;
    let m = args.require_f64("m")?;
    let k = args.f64_or("k", 1.0)?;
    let gamma = args.f64_or("gamma", 0.5)?;
    let t_max = args.f64_or("t-max", constraints::DEFAULT_GRID_T_MAX)?;
    let points = args.usize_or("grid-points", constraints::DEFAULT_GRID_POINTS)?;
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(CliError::Config(format!("--t-max must be finite and > 0, got {t_max}")));
    }
    if points < 2 {
        return Err(CliError::Config("--grid-points must be at least 2".into()));
    }

    let config_err = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
    let params = ParameterSet::new(p, alpha, m, k, gamma).map_err(|e| config_err(&e))?;
    let traj = DomainTrajectory::power_law(k, gamma, m, t_max).map_err(|e| config_err(&e))?;
    let phi = WeightFunction::power_shift(k, gamma).map_err(|e| config_err(&e))?;
    let grid = constraints::certification_grid(t_max, points);
    let report =
        constraints::phi_condition_sups(&params, &traj, &phi, &grid).map_err(|e| config_err(&e))?;
    let m_ok = m + M_THRESHOLD_SLACK * m.abs().max(1.0) >= report.m_min;

    println!("parameters: p = {p}, alpha = {alpha}, m = {m}, k = {k}, gamma = {gamma}");
    println!(
        "derived:    beta = {}, q = {}, m_min = {}",
        report.beta, report.q_conj, report.m_min
    );
    println!(
        "grid:       [0, {t_max}] with {points} points; sup |dL/dt| = {:.6e}; \
         ansatz defect = {:.3e}",
        report.rate_bound, report.ansatz_defect
    );
    println!("{:<10} {:>14}  trend", "condition", "sup");
    for c in &report.conditions {
        println!(
            "{:<10} {:>14.6e}  {}",
            c.label,
            c.sup,
            if c.satisfied { "bounded" } else { "DIVERGES" }
        );
    }
    let verdict = report.all_satisfied() && m_ok;
    println!(
        "verdict: {}",
        if verdict { "PASS (all conditions bounded, m meets the threshold)" } else { "FAIL" }
    );

    let mut why = Vec::new();
    if let Some(c) = report.first_unsatisfied() {
        why.push(format!("condition {} diverges (sup = {:.3e})", c.label, c.sup));
    }
    if !m_ok {
        why.push(format!("m = {m} is below m_min = {}", report.m_min));
    }
    if let Some(json) = args.str_opt("json") {
        write_json(
            Path::new(json),
            &ConstraintArtifact { schema_version: SCHEMA_VERSION, report, m_ok },
        )?;
    }
    if verdict {
        Ok(())
    } else {
        Err(CliError::Analysis(why.join("; ")))
    }
}

pub fn komornik(args: &[String]) -> Result<(), CliError> {
    let args = scan_args(args, &["q", "weight", "json"])?;
    let path = PathBuf::from(args.one_positional("trace CSV")?);
    let q = args.f64_or("q", 0.0)?;
    let phi = parse_weight_spec(args.str_opt("weight").unwrap_or("identity"))?;

    let trace = csv_io::read_trace(&path)?;
    let est = pwave_core::komornik::estimate_a(&trace, &phi, q).map_err(|e| match e {
        KomornikError::HypothesisViolation { .. } => CliError::Analysis(e.to_string()),
        other => CliError::Config(other.to_string()),
    })?;

    println!("q = {q}");
    println!("A_hat = {:.8e}", est.a_hat);
    println!(
        "tail_fraction = {:.6e}{}",
        est.tail_fraction,
        if est.tail_warning { "  (exceeds trust limit)" } else { "" }
    );
    println!("bound_violation = {:.8}", est.bound_violation);

    let mut why = Vec::new();
    if est.tail_warning {
        why.push(format!(
            "tail fraction E(T)/E(0) = {:.3e} exceeds {TAIL_TRUST_LIMIT} \
             (truncated estimate untrusted; extend the trace)",
            est.tail_fraction
        ));
    }
    if est.bound_violation > 1.0 + DOMINATION_TOL {
        why.push(format!("decay bound violated: max E/bound = {}", est.bound_violation));
    }
    if let Some(json) = args.str_opt("json") {
        write_json(
            Path::new(json),
            &KomornikArtifact { schema_version: SCHEMA_VERSION, estimate: est },
        )?;
    }
    if why.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(why.join("; ")))
    }
}

pub fn fit(args: &[String]) -> Result<(), CliError> {
    let args =
        scan_args(args, &["kind", "p", "weight", "window-start", "window-end", "json"])?;
    let path = PathBuf::from(args.one_positional("trace CSV")?);
    let kind: EnvelopeKind = args
        .str_opt("kind")
        .ok_or_else(|| CliError::Usage("option --kind is required".into()))?
        .parse()
        .map_err(CliError::Config)?;
    let p = args.f64_or("p", 2.0)?;
    let weight = args.str_opt("weight").map(parse_weight_spec).transpose()?;
    let window = match (args.f64_opt("window-start")?, args.f64_opt("window-end")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => {
            return Err(CliError::Usage(
                "--window-start and --window-end must be given together".into(),
            ))
        }
    };

    let trace = csv_io::read_trace(&path)?;
    let fit = pwave_core::envelope::fit(&trace, kind, p, weight.as_ref(), window).map_err(
        |e| match e {
            EnvelopeError::MissingWeight(_) | EnvelopeError::InvalidParameter(_) => {
                CliError::Config(e.to_string())
            }
            other => CliError::Analysis(other.to_string()),
        },
    )?;
    let ratio = fit.verify(&trace);

    println!("kind = {}", fit.envelope.kind());
    println!("window = [{}, {}]", fit.window.0, fit.window.1);
    println!("slope = {:.8e}", fit.slope);
    println!("r_squared = {:.8}", fit.r_squared);
    println!("domination_ratio = {:.10}", ratio);
    match &fit.envelope {
        DecayEnvelope::PolyInPhi { amplitude, beta, .. } => {
            println!("bound: E(t) <= {amplitude:.6e} * phi(t)^(-1/{beta})")
        }
        DecayEnvelope::ExpInPhi { e0, c, .. } => {
            println!("bound: E(t) <= {e0:.6e} * exp(1 - phi(t)/{c:.6e})")
        }
        DecayEnvelope::PolyInT { e0, a, beta } => println!(
            "bound: E(t) <= {e0:.6e} * ((1 + {beta}) / (1 + {beta} * {a:.6e} * t))^(1/{beta})"
        ),
        DecayEnvelope::ExpInT { e0, c } => {
            println!("bound: E(t) <= {e0:.6e} * exp(1 - t/{c:.6e})")
        }
    }
    if let Some(json) = args.str_opt("json") {
        write_json(
            Path::new(json),
            &EnvelopeArtifact { schema_version: SCHEMA_VERSION, fit: fit.clone(), ratio },
        )?;
    }
    if ratio > 1.0 + DOMINATION_TOL {
        Err(CliError::Analysis(format!(
            "fitted envelope fails to dominate the trace: ratio = {ratio}"
        )))
    } else {
        Ok(())
    }
}

pub fn sweep(args: &[String]) -> Result<(), CliError> {
    let args = scan_args(args, &[])?;
    let path = PathBuf::from(args.one_positional("sweep file")?);
    let kv = KvFile::load(&path)?;

    let weight_keys = kv.keys_with_prefix("weight.");
    if !weight_keys.is_empty() {
        return Err(CliError::Config(format!(
            "{}: sweeps derive the weight from each run's trajectory; remove {}",
            kv.path().display(),
            weight_keys.join(", ")
        )));
    }

    let root = PathBuf::from(kv.require("output.dir")?);
    let points = sweep_points(&kv)?;
    let runs: Vec<RunConfig> = points
        .iter()
        .map(|pt| run_config(&kv, Some(pt)))
        .collect::<Result<_, _>>()?;
    kv.finish()?;

    let threads = match std::env::var("PWAVE_THREADS") {
        // num_threads(0) asks rayon for its default, one thread per core.
        Err(std::env::VarError::NotPresent) => 0,
        Err(e) => return Err(CliError::Config(format!("PWAVE_THREADS: {e}"))),
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|&n| n >= 1)
            .ok_or_else(|| {
                CliError::Config(format!("PWAVE_THREADS must be a positive integer, got {v:?}"))
            })?,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;

    let results: Vec<Result<RunOutcome, CliError>> =
        pool.install(|| runs.par_iter().map(execute_run).collect());

    let mut rows = Vec::with_capacity(points.len());
    let mut failed: Vec<&str> = Vec::new();
    for (pt, result) in points.iter().zip(&results) {
        let (metrics, status) = match result {
            Ok(outcome) => {
                print!("{}", outcome.log);
                let status = if outcome.failures.is_empty() {
                    "ok".to_string()
                } else {
                    outcome.failures.join("; ")
                };
                (outcome.fit_metrics, status)
            }
            Err(e) => {
                println!("{}: failed: {e}", pt.name);
                (None, format!("error: {e}"))
            }
        };
        if status != "ok" {
            failed.push(&pt.name);
        }
        rows.push(SummaryRow {
            run: pt.name.clone(),
            p: pt.p,
            m: pt.m,
            gamma: pt.gamma,
            fitted_slope: metrics.map(|m| m.slope),
            r_squared: metrics.map(|m| m.r_squared),
            envelope_ratio: metrics.map(|m| m.ratio),
            outside_theory: outside_theory(pt.m, pt.gamma),
            status,
        });
    }

    std::fs::create_dir_all(&root)
        .map_err(|e| CliError::Io { path: root.clone(), source: e })?;
    csv_io::write_summary(&root.join("summary.csv"), &rows)?;
    println!("wrote {}", root.join("summary.csv").display());

    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Analysis(format!(
            "{} of {} sweep runs failed: {}",
            failed.len(),
            rows.len(),
            failed.join(", ")
        )))
    }
}
