//! Flat key=value configuration files with dotted section prefixes.
//!
//! The format is a plain text file of `section.key = value` lines; `#`
//! starts a full-line comment. Flatness keeps sweep configs diffable and
//! overridable one key at a time.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use pwave_core::constraints::{self, ParameterSet};
use pwave_core::envelope::EnvelopeKind;
use pwave_core::solver::{InitialData, SolverConfig};
use pwave_core::{DomainTrajectory, WeightFunction};

use crate::CliError;

#[derive(Debug)]
struct Entry {
    value: String,
    line: usize,
    used: Cell<bool>,
}

/// A parsed key=value file that tracks which keys were consumed, so typos
/// surface as "unknown key" diagnostics instead of being ignored.
#[derive(Debug)]
pub struct KvFile {
    path: PathBuf,
    entries: BTreeMap<String, Entry>,
}

impl KvFile {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.into(), source: e })?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut entries: BTreeMap<String, Entry> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let Some((key, value)) = trimmed.split_once('=') else {
                return Err(CliError::Config(format!(
                    "{}:{line}: expected key=value, got {trimmed:?}",
                    path.display()
                )));
            };
            let key = key.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("{}:{line}: empty key", path.display())));
            }
            let entry = Entry { value: value.trim().to_string(), line, used: Cell::new(false) };
            if let Some(prev) = entries.insert(key.clone(), entry) {
                return Err(CliError::Config(format!(
                    "{}:{line}: duplicate key {key:?} (first on line {})",
                    path.display(),
                    prev.line
                )));
            }
        }
        Ok(Self { path: path.to_path_buf(), entries })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    fn fail(&self, key: &str, msg: &str) -> CliError {
        match self.entries.get(key) {
            Some(e) => {
                CliError::Config(format!("{}:{}: {key}: {msg}", self.path.display(), e.line))
            }
            None => CliError::Config(format!("{}: {key}: {msg}", self.path.display())),
        }
    }

    /// Raw value lookup; marks the key as consumed.
    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| {
            e.used.set(true);
            e.value.as_str()
        })
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key).ok_or_else(|| self.fail(key, "required key is missing"))
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>().map_err(|_| self.fail(key, &format!("expected a number, got {v:?}")))
            })
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, CliError> {
        self.require(key)?;
        Ok(self.f64(key)?.expect("key present"))
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| self.fail(key, &format!("expected a nonnegative integer, got {v:?}")))
            })
            .transpose()
    }

    pub fn require_usize(&self, key: &str) -> Result<usize, CliError> {
        self.require(key)?;
        Ok(self.usize(key)?.expect("key present"))
    }

    pub fn bool_or(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.get(key) {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(self.fail(key, &format!("expected true or false, got {v:?}"))),
        }
    }

    /// Errors on keys that no consumer ever read (typo protection).
    pub fn finish(&self) -> Result<(), CliError> {
        let unused: Vec<String> = self
            .entries
            .iter()
            .filter(|(_, e)| !e.used.get())
            .map(|(k, e)| format!("{k} (line {})", e.line))
            .collect();
        if unused.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(format!(
                "{}: unknown keys: {}",
                self.path.display(),
                unused.join(", ")
            )))
        }
    }

    pub fn snapshot(&self) -> BTreeMap<String, String> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value.clone())).collect()
    }

    /// Keys starting with `prefix`, without marking them consumed.
    pub fn keys_with_prefix(&self, prefix: &str) -> Vec<&str> {
        self.entries.keys().filter(|k| k.starts_with(prefix)).map(String::as_str).collect()
    }
}

/// Analysis stages requested for a run.
#[derive(Debug, Clone, Default)]
pub struct AnalysisFlags {
    pub check_embeddings: bool,
    pub komornik_q: Option<f64>,
    pub fit_envelope: Option<EnvelopeKind>,
    pub constraints: bool,
    pub alpha: Option<f64>,
    /// Fit window; defaults to the trailing three quarters of the trace.
    pub window: Option<(f64, f64)>,
    pub grid_t_max: f64,
    pub grid_points: usize,
}

/// One grid point of a sweep; tokens keep the literal spelling from the
/// sweep file for run names and the summary CSV.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub name: String,
    pub p: f64,
    pub m: f64,
    pub gamma: f64,
    pub p_token: String,
    pub m_token: String,
    pub gamma_token: String,
}

/// Fully resolved configuration of one simulation run.
#[derive(Debug)]
pub struct RunConfig {
    pub label: String,
    pub solver: SolverConfig,
    pub weight: Option<WeightFunction>,
    pub analysis: AnalysisFlags,
    pub output_dir: PathBuf,
    pub plots: bool,
    /// PowerLaw trajectory parameters (k, gamma, m) when applicable.
    pub powerlaw: Option<(f64, f64, f64)>,
    /// Raw key=value pairs, with sweep overrides applied.
    pub snapshot: BTreeMap<String, String>,
}

fn parse_initial(spec: &str) -> Result<InitialData, String> {
    if spec == "zero" {
        return Ok(InitialData::Zero);
    }
    if spec == "bump" {
        return Ok(InitialData::Bump);
    }
    if let Some(rest) = spec.strip_prefix("sine:") {
        let n: u32 = rest
            .parse()
            .map_err(|_| format!("bad sine mode {rest:?} (expected a positive integer)"))?;
        return Ok(InitialData::SineMode(n));
    }
    if let Some(rest) = spec.strip_prefix("table:") {
        let values: Result<Vec<f64>, _> = rest.split(',').map(|t| t.trim().parse::<f64>()).collect();
        return match values {
            Ok(v) => Ok(InitialData::Table(v)),
            Err(_) => Err(format!("bad table values {rest:?}")),
        };
    }
    Err(format!("unknown initial data {spec:?} (expected zero, bump, sine:N, or table:V0,V1,...)"))
}

fn parse_trajectory_samples(spec: &str) -> Result<Vec<(f64, f64)>, String> {
    spec.split(',')
        .map(|pair| {
            let (t, l) = pair
                .trim()
                .split_once(':')
                .ok_or_else(|| format!("bad sample {pair:?} (expected T:L)"))?;
            let t = t.trim().parse().map_err(|_| format!("bad time in {pair:?}"))?;
            let l = l.trim().parse().map_err(|_| format!("bad length in {pair:?}"))?;
            Ok((t, l))
        })
        .collect()
}

/// Builds a run configuration from a parsed file, optionally overriding
/// (p, m, gamma), the output directory, and the label with a sweep point.
pub fn run_config(kv: &KvFile, point: Option<&SweepPoint>) -> Result<RunConfig, CliError> {
    let p = match point {
        Some(pt) => {
            kv.get("solver.p");
            pt.p
        }
        None => kv.require_f64("solver.p")?,
    };
    let n = kv.require_usize("solver.n")?;
    let dt = kv.require_f64("solver.dt")?;
    let t_end = kv.require_f64("solver.t_end")?;

    let family = kv.require("trajectory.family")?.to_string();
    let t_max = kv.f64("trajectory.t_max")?.unwrap_or(t_end);
    let mut powerlaw = None;
    let trajectory = match family.as_str() {
        "constant" => {
            if point.is_some() {
                return Err(kv.fail("trajectory.family", "sweeps require the powerlaw family"));
            }
            let l0 = kv.require_f64("trajectory.l0")?;
            DomainTrajectory::constant(l0, t_max)
        }
        "powerlaw" => {
            let k = kv.require_f64("trajectory.k")?;
            let gamma = match point {
                Some(pt) => {
                    kv.get("trajectory.gamma");
                    pt.gamma
                }
                None => kv.require_f64("trajectory.gamma")?,
            };
            let m = match point {
                Some(pt) => {
                    kv.get("trajectory.m");
                    pt.m
                }
                None => kv.require_f64("trajectory.m")?,
            };
            powerlaw = Some((k, gamma, m));
            DomainTrajectory::power_law(k, gamma, m, t_max)
        }
        "tabulated" => {
            if point.is_some() {
                return Err(kv.fail("trajectory.family", "sweeps require the powerlaw family"));
            }
            let spec = kv.require("trajectory.samples")?;
            let samples = parse_trajectory_samples(spec)
                .map_err(|m| kv.fail("trajectory.samples", &m))?;
            DomainTrajectory::tabulated(samples)
        }
        other => {
            return Err(kv.fail(
                "trajectory.family",
                &format!("unknown family {other:?} (expected constant, powerlaw, or tabulated)"),
            ))
        }
    }
    .map_err(|e| kv.fail("trajectory.family", &e.to_string()))?;

    let mut solver = SolverConfig::new(p, trajectory, n, dt, t_end);
    if let Some(x) = kv.f64("solver.eps_reg")? {
        solver.eps_reg = x;
    }
    if let Some(x) = kv.f64("solver.newton_tol")? {
        solver.newton_tol = x;
    }
    if let Some(x) = kv.usize("solver.newton_max_iter")? {
        solver.newton_max_iter = x;
    }
    if let Some(x) = kv.usize("solver.sample_every")? {
        solver.sample_every = x;
    }
    if let Some(x) = kv.usize("solver.state_every")? {
        solver.state_every = x;
    }
    if let Some(s) = kv.get("solver.initial_profile") {
        solver.initial_profile =
            parse_initial(s).map_err(|m| kv.fail("solver.initial_profile", &m))?;
    }
    if let Some(s) = kv.get("solver.initial_velocity") {
        solver.initial_velocity =
            parse_initial(s).map_err(|m| kv.fail("solver.initial_velocity", &m))?;
    }
    solver
        .validate()
        .map_err(|e| CliError::Config(format!("{}: {e}", kv.path.display())))?;

    // Sweeps always analyze against the weight matched to the run's own
    // growth exponent; standalone runs take it from the weight.* section.
    let weight = if point.is_some() {
        let (k, gamma, _) = powerlaw.expect("sweeps are powerlaw-only");
        Some(
            WeightFunction::power_shift(k, gamma)
                .map_err(|e| kv.fail("trajectory.gamma", &e.to_string()))?,
        )
    } else {
        match kv.get("weight.family") {
            None => None,
            Some("identity") => Some(WeightFunction::identity()),
            Some("powershift") => {
                let wk = kv.require_f64("weight.k")?;
                let wg = kv.require_f64("weight.gamma")?;
                Some(
                    WeightFunction::power_shift(wk, wg)
                        .map_err(|e| kv.fail("weight.family", &e.to_string()))?,
                )
            }
            Some(other) => {
                return Err(kv.fail(
                    "weight.family",
                    &format!("unknown family {other:?} (expected identity or powershift)"),
                ))
            }
        }
    };

    let fit_envelope = match point {
        // Theory shape per run: polynomial decay in phi for p > 2,
        // exponential in phi at p = 2.
        Some(_) => {
            kv.get("analysis.fit_envelope");
            Some(if p > 2.0 { EnvelopeKind::PolyInPhi } else { EnvelopeKind::ExpInPhi })
        }
        None => match kv.get("analysis.fit_envelope") {
            Some(s) => {
                Some(s.parse::<EnvelopeKind>().map_err(|m| kv.fail("analysis.fit_envelope", &m))?)
            }
            None => None,
        },
    };

    let window = match (kv.f64("analysis.window_start")?, kv.f64("analysis.window_end")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => {
            return Err(kv.fail(
                "analysis.window_start",
                "window_start and window_end must be given together",
            ))
        }
    };

    let analysis = AnalysisFlags {
        check_embeddings: kv.bool_or("analysis.check_embeddings", false)?,
        komornik_q: kv.f64("analysis.komornik_q")?,
        fit_envelope,
        constraints: kv.bool_or("analysis.constraints", false)?,
        alpha: kv.f64("analysis.alpha")?,
        window,
        grid_t_max: kv.f64("analysis.grid_t_max")?.unwrap_or(constraints::DEFAULT_GRID_T_MAX),
        grid_points: kv.usize("analysis.grid_points")?.unwrap_or(constraints::DEFAULT_GRID_POINTS),
    };

    if let Some(q) = analysis.komornik_q {
        if !q.is_finite() || q < 0.0 {
            return Err(kv.fail("analysis.komornik_q", &format!("q must be finite and >= 0, got {q}")));
        }
        if weight.is_none() {
            return Err(kv.fail(
                "analysis.komornik_q",
                "the komornik estimate needs a weight.* section",
            ));
        }
    }
    if let Some(kind) = analysis.fit_envelope {
        let needs_weight =
            matches!(kind, EnvelopeKind::PolyInPhi | EnvelopeKind::ExpInPhi) && weight.is_none();
        if needs_weight {
            return Err(kv.fail(
                "analysis.fit_envelope",
                &format!("envelope kind {kind} needs a weight.* section"),
            ));
        }
        if matches!(kind, EnvelopeKind::PolyInPhi | EnvelopeKind::PolyInT) && !(p > 2.0) {
            return Err(kv.fail(
                "analysis.fit_envelope",
                &format!("envelope kind {kind} needs p > 2, got p = {p}"),
            ));
        }
    }
    if analysis.constraints {
        let Some((k, gamma, m)) = powerlaw else {
            return Err(kv.fail(
                "analysis.constraints",
                "constraint certification needs a powerlaw trajectory",
            ));
        };
        let Some(alpha) = analysis.alpha else {
            return Err(kv.fail("analysis.constraints", "analysis.alpha is required"));
        };
        // Validates p, alpha, m, k, gamma jointly; the report itself is
        // produced while the run executes.
        ParameterSet::new(p, alpha, m, k, gamma)
            .map_err(|e| kv.fail("analysis.alpha", &e.to_string()))?;
        if !(analysis.grid_t_max > 0.0) || !analysis.grid_t_max.is_finite() {
            return Err(kv.fail("analysis.grid_t_max", "must be finite and > 0"));
        }
        if analysis.grid_points < 2 {
            return Err(kv.fail("analysis.grid_points", "need at least 2 grid points"));
        }
    }

    let base_out = PathBuf::from(kv.require("output.dir")?);
    let (label, output_dir) = match point {
        Some(pt) => (pt.name.clone(), base_out.join(&pt.name)),
        None => (kv.get("run.label").unwrap_or("run").to_string(), base_out),
    };
    let plots = kv.bool_or("output.plots", true)?;

    let mut snapshot = kv.snapshot();
    if let Some(pt) = point {
        snapshot.insert("solver.p".into(), pt.p_token.clone());
        snapshot.insert("trajectory.m".into(), pt.m_token.clone());
        snapshot.insert("trajectory.gamma".into(), pt.gamma_token.clone());
        snapshot.insert("output.dir".into(), output_dir.display().to_string());
        snapshot.insert("run.label".into(), label.clone());
    }

    Ok(RunConfig {
        label,
        solver,
        weight,
        analysis,
        output_dir,
        plots,
        powerlaw,
        snapshot,
    })
}

/// Expands the sweep axes (sweep.p, sweep.m, sweep.gamma) into the full
/// cartesian grid, falling back to the base value for missing axes.
pub fn sweep_points(kv: &KvFile) -> Result<Vec<SweepPoint>, CliError> {
    let axis = |axis_key: &str, base_key: &str| -> Result<Vec<String>, CliError> {
        match kv.get(axis_key) {
            Some(spec) => {
                let tokens: Vec<String> =
                    spec.split(',').map(|t| t.trim().to_string()).collect();
                if tokens.is_empty() || tokens.iter().any(String::is_empty) {
                    return Err(kv.fail(axis_key, "expected a comma-separated list of numbers"));
                }
                Ok(tokens)
            }
            None => match kv.get(base_key) {
                Some(v) => Ok(vec![v.to_string()]),
                None => Err(kv.fail(
                    axis_key,
                    &format!("axis missing and no base value under {base_key}"),
                )),
            },
        }
    };
    let parse = |key: &str, token: &str| -> Result<f64, CliError> {
        token.parse::<f64>().map_err(|_| kv.fail(key, &format!("bad number {token:?}")))
    };

    let ps = axis("sweep.p", "solver.p")?;
    let ms = axis("sweep.m", "trajectory.m")?;
    let gs = axis("sweep.gamma", "trajectory.gamma")?;

    let mut points = Vec::with_capacity(ps.len() * ms.len() * gs.len());
    for p_tok in &ps {
        let p = parse("sweep.p", p_tok)?;
        for m_tok in &ms {
            let m = parse("sweep.m", m_tok)?;
            for g_tok in &gs {
                let gamma = parse("sweep.gamma", g_tok)?;
                points.push(SweepPoint {
                    name: format!("p{p_tok}-m{m_tok}-g{g_tok}"),
                    p,
                    m,
                    gamma,
                    p_token: p_tok.clone(),
                    m_token: m_tok.clone(),
                    gamma_token: g_tok.clone(),
                });
            }
        }
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kv(text: &str) -> KvFile {
        KvFile::parse(Path::new("test.cfg"), text).unwrap()
    }

    const BASE: &str = "\
solver.p = 2
solver.n = 16
solver.dt = 0.01
solver.t_end = 1.0
trajectory.family = constant
trajectory.l0 = 1.0
output.dir = /tmp/out
";

    #[test]
    fn parses_flat_keys_with_comments() {
        let f = kv("# header\nsolver.p = 4\n\n  trajectory.k=1.5  \n");
        assert_eq!(f.get("solver.p"), Some("4"));
        assert_eq!(f.require_f64("trajectory.k").unwrap(), 1.5);
        assert!(f.finish().is_ok());
    }

    #[test]
    fn diagnostics_carry_line_numbers() {
        let err = KvFile::parse(Path::new("x.cfg"), "a = 1\nnonsense\n").unwrap_err();
        assert!(err.to_string().contains("x.cfg:2"), "{err}");

        let f = kv("solver.p = fast\n");
        let err = f.f64("solver.p").unwrap_err();
        assert!(err.to_string().contains("test.cfg:1"), "{err}");
        assert!(err.to_string().contains("solver.p"), "{err}");
    }

    #[test]
    fn duplicate_and_unknown_keys_are_rejected() {
        let err = KvFile::parse(Path::new("x.cfg"), "a = 1\na = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");

        let f = kv("a = 1\nb = 2\n");
        let _ = f.get("a");
        let err = f.finish().unwrap_err();
        assert!(err.to_string().contains("b (line 2)"), "{err}");
    }

    #[test]
    fn initial_data_forms() {
        assert_eq!(parse_initial("zero").unwrap(), InitialData::Zero);
        assert_eq!(parse_initial("bump").unwrap(), InitialData::Bump);
        assert_eq!(parse_initial("sine:3").unwrap(), InitialData::SineMode(3));
        assert_eq!(
            parse_initial("table:0, 0.5, 0").unwrap(),
            InitialData::Table(vec![0.0, 0.5, 0.0])
        );
        assert!(parse_initial("wavelet").is_err());
        assert!(parse_initial("sine:-1").is_err());
    }

    #[test]
    fn builds_a_minimal_run() {
        let f = kv(BASE);
        let run = run_config(&f, None).unwrap();
        f.finish().unwrap();
        assert_eq!(run.label, "run");
        assert_eq!(run.solver.interior_nodes, 16);
        assert!(run.weight.is_none());
        assert!(run.powerlaw.is_none());
        assert!(run.plots);
    }

    #[test]
    fn tabulated_trajectories_parse() {
        let text = "\
solver.p = 2
solver.n = 16
solver.dt = 0.01
solver.t_end = 1.0
trajectory.family = tabulated
trajectory.samples = 0:1, 0.5:1.2, 1:1.4
output.dir = /tmp/out
";
        let f = kv(text);
        let run = run_config(&f, None).unwrap();
        f.finish().unwrap();
        assert!((run.solver.trajectory.length(0.25).unwrap() - 1.1).abs() < 1e-15);

        assert!(parse_trajectory_samples("0:1, oops").is_err());
        assert!(parse_trajectory_samples("0;1").is_err());
    }

    #[test]
    fn komornik_without_weight_is_a_config_error() {
        let text = format!("{BASE}analysis.komornik_q = 0\n");
        let err = run_config(&kv(&text), None).unwrap_err();
        assert!(err.to_string().contains("weight"), "{err}");
    }

    #[test]
    fn polynomial_fit_at_p2_is_a_config_error() {
        let text = format!("{BASE}analysis.fit_envelope = poly-in-t\n");
        let err = run_config(&kv(&text), None).unwrap_err();
        assert!(err.to_string().contains("p > 2"), "{err}");
    }

    #[test]
    fn window_keys_must_pair() {
        let text = format!("{BASE}analysis.window_start = 1\n");
        let err = run_config(&kv(&text), None).unwrap_err();
        assert!(err.to_string().contains("together"), "{err}");
    }

    #[test]
    fn sweep_grid_is_cartesian_in_file_order() {
        let f = kv("sweep.p = 2\nsweep.m = 2, 4\nsweep.gamma = 0.3,0.5\n");
        let pts = sweep_points(&f).unwrap();
        let names: Vec<&str> = pts.iter().map(|p| p.name.as_str()).collect();
        assert_eq!(names, ["p2-m2-g0.3", "p2-m2-g0.5", "p2-m4-g0.3", "p2-m4-g0.5"]);
        assert_eq!(pts[3].m, 4.0);
        assert_eq!(pts[3].gamma, 0.5);
    }

    #[test]
    fn sweep_axes_fall_back_to_base_values() {
        let f = kv("solver.p = 3\ntrajectory.m = 2.5\nsweep.gamma = 0.4\n");
        let pts = sweep_points(&f).unwrap();
        assert_eq!(pts.len(), 1);
        assert_eq!(pts[0].name, "p3-m2.5-g0.4");
        assert_eq!(pts[0].p, 3.0);
    }

    #[test]
    fn sweep_point_overrides_and_matched_weight() {
        let text = "\
solver.n = 16
solver.dt = 0.01
solver.t_end = 1.0
trajectory.family = powerlaw
trajectory.k = 1.0
output.dir = /tmp/sweep
";
        let f = kv(text);
        let pt = SweepPoint {
            name: "p4-m3-g0.5".into(),
            p: 4.0,
            m: 3.0,
            gamma: 0.5,
            p_token: "4".into(),
            m_token: "3".into(),
            gamma_token: "0.5".into(),
        };
        let run = run_config(&f, Some(&pt)).unwrap();
        f.finish().unwrap();
        assert_eq!(run.solver.p, 4.0);
        assert_eq!(run.powerlaw, Some((1.0, 0.5, 3.0)));
        assert!(run.weight.is_some());
        assert_eq!(run.analysis.fit_envelope, Some(EnvelopeKind::PolyInPhi));
        assert!(run.output_dir.ends_with("p4-m3-g0.5"));
        assert_eq!(run.snapshot.get("trajectory.m").map(String::as_str), Some("3"));
    }
}
