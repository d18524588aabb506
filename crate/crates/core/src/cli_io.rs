//! Batch front end: JSON configs in, CSV tables and a JSON manifest out.
//!
//! Every run is fully described by its resolved config, which is embedded in the
//! manifest; feeding a manifest back as a config repeats the run.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::contour::{ContourEvaluator, FamilyKind, HankelContour};
use crate::experiments::{
    alpha_sweep_existence, op_convergence_lp, op_convergence_sup, sequence_limit, solution_convergence, CompactSet,
    Omega, DEFAULT_PROBE_HORIZON,
};
use crate::linalg::{Complex, ComplexMatrix, ComplexVector};
use crate::mild_solver::{
    residual_check, solve, Nonlinearity, NonlinearityKind, ProblemSpec, SolveStatus, DEFAULT_BLOWUP_THRESHOLD,
    DEFAULT_LIPSCHITZ_RADIUS, DEFAULT_PICARD_MAX, DEFAULT_PICARD_TOL,
};
use crate::sectorial::{certify_sectorial, SampleGrid, SectorialCertificate, DEFAULT_THETA, MIN_ARC_SAMPLES};

pub const MODULE_VERSION: &str = concat!("frac-cauchy ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";
pub const THREADS_ENV: &str = "FRAC_CAUCHY_THREADS";

/// Keys that only appear in manifests and are dropped when a manifest is read as a config.
const MANIFEST_KEYS: [&str; 5] = ["module_version", "status", "omega_estimate", "results", "outputs"];

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("ParseError at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("ValidationError: {0}")]
    Validation(String),
}

fn parse_err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Parse { path: path.to_string(), message: message.into() }
}

fn invalid(constraint: &str) -> ConfigError {
    ConfigError::Validation(constraint.to_string())
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Numeric(#[from] crate::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Usage(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Certify,
    Eval,
    Solve,
    ConvergeOp,
    ConvergeLp,
    SeqLimit,
    Sweep,
    ConvergeSol,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Self::Certify => "certify",
            Self::Eval => "eval",
            Self::Solve => "solve",
            Self::ConvergeOp => "converge-op",
            Self::ConvergeLp => "converge-lp",
            Self::SeqLimit => "seq-limit",
            Self::Sweep => "sweep",
            Self::ConvergeSol => "converge-sol",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::Certify,
            Self::Eval,
            Self::Solve,
            Self::ConvergeOp,
            Self::ConvergeLp,
            Self::SeqLimit,
            Self::Sweep,
            Self::ConvergeSol,
        ]
        .into_iter()
        .find(|c| c.name() == s)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CertifyParams {
    pub theta: f64,
    pub arc_samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub per_decade: usize,
}

impl Default for CertifyParams {
    fn default() -> Self {
        Self { theta: DEFAULT_THETA, arc_samples: 128, r_min: 1e-3, r_max: 1e3, per_decade: 25 }
    }
}

impl CertifyParams {
    fn grid(&self) -> SampleGrid {
        SampleGrid {
            arc_samples: self.arc_samples,
            radii: SampleGrid::log_radii(self.r_min, self.r_max, self.per_decade),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinearityConfig {
    Zero,
    Linear(ComplexMatrix),
    Quadratic { c: Complex, radius: f64 },
    Logistic { radius: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemParams {
    pub u0: ComplexVector,
    pub alpha: f64,
    pub nonlinearity: NonlinearityConfig,
    pub horizon: f64,
    pub step: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub blowup_threshold: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum CommandParams {
    Certify,
    Eval { family: FamilyKind, alpha: f64, times: Vec<f64> },
    Solve { problem: ProblemParams, residual_refine: Option<usize> },
    ConvergeOp { family: FamilyKind, alphas: Vec<f64>, set: CompactSet },
    ConvergeLp { family: FamilyKind, alphas: Vec<f64>, set: CompactSet, p: f64 },
    SeqLimit { alpha_seq: Vec<f64>, sigma_seq: Vec<f64>, alpha_limit: Option<f64> },
    Sweep { problem: ProblemParams, alphas: Vec<f64>, alpha0: f64, probe_horizon: f64 },
    ConvergeSol { problem: ProblemParams, alphas: Vec<f64>, t_star: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub matrix: ComplexMatrix,
    pub certify: CertifyParams,
    pub contour: HankelContour,
    pub params: CommandParams,
}

// ---- JSON reading with field paths ----

struct Obj<'a> {
    map: &'a Map<String, Value>,
    path: String,
}

impl<'a> Obj<'a> {
    fn new(v: &'a Value, path: &str) -> Result<Self, ConfigError> {
        match v.as_object() {
            Some(map) => Ok(Self { map, path: path.to_string() }),
            None => Err(parse_err(if path.is_empty() { "." } else { path }, "expected an object")),
        }
    }

    fn field_path(&self, key: &str) -> String {
        format!("{}.{key}", self.path)
    }

    fn get(&self, key: &str) -> Option<&'a Value> {
        self.map.get(key).filter(|v| !v.is_null())
    }

    fn req(&self, key: &str) -> Result<&'a Value, ConfigError> {
        self.get(key).ok_or_else(|| parse_err(&self.field_path(key), "missing required field"))
    }

    fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        as_f64(self.req(key)?, &self.field_path(key))
    }

    fn opt_f64(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        self.get(key).map(|v| as_f64(v, &self.field_path(key))).transpose()
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_f64(key)?.unwrap_or(default))
    }

    fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| parse_err(&self.field_path(key), "expected a non-negative integer")),
        }
    }

    fn str(&self, key: &str) -> Result<&'a str, ConfigError> {
        self.req(key)?.as_str().ok_or_else(|| parse_err(&self.field_path(key), "expected a string"))
    }

    fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let path = self.field_path(key);
        let arr = self.req(key)?.as_array().ok_or_else(|| parse_err(&path, "expected an array"))?;
        arr.iter().enumerate().map(|(i, v)| as_f64(v, &format!("{path}[{i}]"))).collect()
    }
}

fn as_f64(v: &Value, path: &str) -> Result<f64, ConfigError> {
    v.as_f64().ok_or_else(|| parse_err(path, "expected a number"))
}

fn as_complex(v: &Value, path: &str) -> Result<Complex, ConfigError> {
    if let Some(x) = v.as_f64() {
        return Ok(Complex::new(x, 0.0));
    }
    match v.as_array().map(Vec::as_slice) {
        Some([re, im]) => Ok(Complex::new(as_f64(re, &format!("{path}[0]"))?, as_f64(im, &format!("{path}[1]"))?)),
        _ => Err(parse_err(path, "expected a complex number [re, im]")),
    }
}

fn as_vector(v: &Value, path: &str) -> Result<ComplexVector, ConfigError> {
    let arr = v.as_array().ok_or_else(|| parse_err(path, "expected an array of [re, im] entries"))?;
    let entries =
        arr.iter().enumerate().map(|(i, z)| as_complex(z, &format!("{path}[{i}]"))).collect::<Result<Vec<_>, _>>()?;
    ComplexVector::new(entries).map_err(|_| invalid("vector entries finite"))
}

fn as_matrix(v: &Value, path: &str) -> Result<ComplexMatrix, ConfigError> {
    let rows = v.as_array().ok_or_else(|| parse_err(path, "expected an array of rows"))?;
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, r)| as_vector(r, &format!("{path}[{i}]")).map(ComplexVector::into_vec))
        .collect::<Result<Vec<_>, _>>()?;
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(invalid("matrix square and non-empty"));
    }
    ComplexMatrix::from_rows(&rows).map_err(|_| invalid("matrix entries finite"))
}

fn family_of(obj: &Obj, key: &str) -> Result<FamilyKind, ConfigError> {
    let s = obj.str(key)?;
    FamilyKind::parse(s).ok_or_else(|| parse_err(&obj.field_path(key), format!("unknown family {s:?}")))
}

fn check_alpha(alpha: f64) -> Result<(), ConfigError> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha in (0,1]"))
    }
}

fn check_open_alpha(alpha: f64) -> Result<(), ConfigError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(invalid("alpha in (0,1)"))
    }
}

fn parse_certify(root: &Obj) -> Result<CertifyParams, ConfigError> {
    let d = CertifyParams::default();
    let p = match root.get("certify") {
        None => d,
        Some(v) => {
            let o = Obj::new(v, &root.field_path("certify"))?;
            CertifyParams {
                theta: o.f64_or("theta", d.theta)?,
                arc_samples: o.usize_or("arc_samples", d.arc_samples)?,
                r_min: o.f64_or("r_min", d.r_min)?,
                r_max: o.f64_or("r_max", d.r_max)?,
                per_decade: o.usize_or("per_decade", d.per_decade)?,
            }
        }
    };
    if !(p.theta > std::f64::consts::FRAC_PI_2 && p.theta < std::f64::consts::PI) {
        return Err(invalid("certify.theta in (pi/2, pi)"));
    }
    if p.arc_samples < MIN_ARC_SAMPLES {
        return Err(invalid("certify.arc_samples >= 64"));
    }
    if !(p.r_min > 0.0 && p.r_max > p.r_min) || p.per_decade == 0 {
        return Err(invalid("certify radii 0 < r_min < r_max, per_decade >= 1"));
    }
    Ok(p)
}

fn parse_contour(root: &Obj, theta_default: f64) -> Result<HankelContour, ConfigError> {
    let d = HankelContour { theta: theta_default, ..HankelContour::default() };
    let c = match root.get("contour") {
        None => d,
        Some(v) => {
            let o = Obj::new(v, &root.field_path("contour"))?;
            HankelContour {
                epsilon: o.f64_or("epsilon", d.epsilon)?,
                theta: o.f64_or("theta", d.theta)?,
                ray_cutoff: o.opt_f64("ray_cutoff")?,
                ray_panels: o.usize_or("ray_panels", d.ray_panels)?,
                arc_panels: o.usize_or("arc_panels", d.arc_panels)?,
                points_per_panel: o.usize_or("points_per_panel", d.points_per_panel)?,
                tail_tol: o.f64_or("tail_tol", d.tail_tol)?,
            }
        }
    };
    c.validate().map_err(|e| ConfigError::Validation(format!("contour: {e}")))?;
    if c.theta > theta_default {
        return Err(invalid("contour.theta <= certify.theta"));
    }
    Ok(c)
}

fn parse_nonlinearity(root: &Obj) -> Result<NonlinearityConfig, ConfigError> {
    let Some(v) = root.get("nonlinearity") else {
        return Ok(NonlinearityConfig::Zero);
    };
    let o = Obj::new(v, &root.field_path("nonlinearity"))?;
    let radius = o.f64_or("lipschitz_radius", DEFAULT_LIPSCHITZ_RADIUS)?;
    let kind = o.str("kind")?;
    let f = match kind {
        "zero" => NonlinearityConfig::Zero,
        "linear" => NonlinearityConfig::Linear(as_matrix(o.req("l")?, &o.field_path("l"))?),
        "quadratic" => NonlinearityConfig::Quadratic { c: as_complex(o.req("c")?, &o.field_path("c"))?, radius },
        "logistic" => NonlinearityConfig::Logistic { radius },
        other => return Err(parse_err(&o.field_path("kind"), format!("unknown nonlinearity {other:?}"))),
    };
    if matches!(f, NonlinearityConfig::Quadratic { .. } | NonlinearityConfig::Logistic { .. })
        && !(radius > 0.0 && radius.is_finite())
    {
        return Err(invalid("nonlinearity.lipschitz_radius > 0"));
    }
    Ok(f)
}

fn parse_problem(
    root: &Obj,
    n: usize,
    needs_alpha: bool,
    horizon_default: Option<f64>,
) -> Result<ProblemParams, ConfigError> {
    let u0 = as_vector(root.req("u0")?, &root.field_path("u0"))?;
    if u0.len() != n {
        return Err(invalid("u0 length equals matrix dimension"));
    }
    let alpha = if needs_alpha { root.f64("alpha")? } else { root.f64_or("alpha", 1.0)? };
    check_alpha(alpha)?;
    let step = root.f64("step")?;
    if !(step > 0.0 && step.is_finite()) {
        return Err(invalid("step > 0"));
    }
    let horizon = match horizon_default {
        None => root.f64("horizon")?,
        Some(d) => root.f64_or("horizon", d)?,
    };
    let k = (horizon / step).round();
    if !(horizon > 0.0) || k < 1.0 || (k * step - horizon).abs() > 1e-9 * horizon {
        return Err(invalid("horizon a positive multiple of step"));
    }
    let nonlinearity = parse_nonlinearity(root)?;
    if let NonlinearityConfig::Linear(l) = &nonlinearity {
        if l.rows() != n {
            return Err(invalid("nonlinearity.l dimension equals matrix dimension"));
        }
    }
    let picard_tol = root.f64_or("picard_tol", DEFAULT_PICARD_TOL)?;
    let picard_max = root.usize_or("picard_max", DEFAULT_PICARD_MAX)?;
    let blowup_threshold = root.f64_or("blowup_threshold", DEFAULT_BLOWUP_THRESHOLD)?;
    if !(picard_tol > 0.0) || picard_max == 0 {
        return Err(invalid("picard_tol > 0 and picard_max >= 1"));
    }
    if !(blowup_threshold > u0.norm()) {
        return Err(invalid("blowup_threshold > |u0|"));
    }
    Ok(ProblemParams { u0, alpha, nonlinearity, horizon, step, picard_tol, picard_max, blowup_threshold })
}

fn parse_set(root: &Obj, lp: bool) -> Result<CompactSet, ConfigError> {
    let o = Obj::new(root.req("set")?, &root.field_path("set"))?;
    let (a, b) = (o.f64("a")?, o.f64("b")?);
    let samples = o.usize_or("samples", 64)?;
    let set = if lp { CompactSet::lp_mode(a, b, samples) } else { CompactSet::sup_mode(a, b, samples) };
    set.map_err(|_| invalid(if lp { "set: 0 <= a < b, samples >= 16" } else { "set: 0 < a < b, samples >= 16" }))
}

fn parse_alphas(root: &Obj, key: &str, open: bool) -> Result<Vec<f64>, ConfigError> {
    let alphas = root.f64_list(key)?;
    if alphas.is_empty() {
        return Err(invalid(&format!("{key} non-empty")));
    }
    for &a in &alphas {
        if open {
            check_open_alpha(a)?
        } else {
            check_alpha(a)?
        }
    }
    Ok(alphas)
}

/// Parse and validate a JSON config (or a manifest from an earlier run).
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| parse_err(".", e.to_string()))?;
    if let Some(map) = value.as_object_mut() {
        for key in MANIFEST_KEYS {
            map.remove(key);
        }
    }
    let root = Obj::new(&value, "")?;
    let cmd_name = root.str("command")?;
    let command =
        Command::parse(cmd_name).ok_or_else(|| parse_err(".command", format!("unknown command {cmd_name:?}")))?;
    let matrix = as_matrix(root.req("matrix")?, ".matrix")?;
    let n = matrix.rows();
    let certify = parse_certify(&root)?;
    let contour = parse_contour(&root, certify.theta)?;

    let params = match command {
        Command::Certify => CommandParams::Certify,
        Command::Eval => {
            let family = family_of(&root, "family")?;
            let alpha = if family == FamilyKind::Semigroup { root.f64_or("alpha", 1.0)? } else { root.f64("alpha")? };
            check_alpha(alpha)?;
            let times = match root.get("times") {
                Some(_) => root.f64_list("times")?,
                None => vec![root.f64("t")?],
            };
            if times.is_empty() || times.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
                return Err(invalid("times non-empty, each t >= 0"));
            }
            if times.windows(2).any(|w| w[1] < w[0]) {
                return Err(invalid("times ascending"));
            }
            CommandParams::Eval { family, alpha, times }
        }
        Command::Solve => {
            let problem = parse_problem(&root, n, true, None)?;
            let residual_refine = match root.get("residual_refine") {
                None => None,
                Some(_) => Some(root.usize_or("residual_refine", 0)?),
            };
            if residual_refine == Some(0) {
                return Err(invalid("residual_refine >= 1"));
            }
            CommandParams::Solve { problem, residual_refine }
        }
        Command::ConvergeOp => CommandParams::ConvergeOp {
            family: family_of(&root, "family")?,
            alphas: parse_alphas(&root, "alphas", true)?,
            set: parse_set(&root, false)?,
        },
        Command::ConvergeLp => {
            let p = root.f64_or("p", 1.0)?;
            if !(p >= 1.0 && p.is_finite()) {
                return Err(invalid("p >= 1"));
            }
            CommandParams::ConvergeLp {
                family: family_of(&root, "family")?,
                alphas: parse_alphas(&root, "alphas", true)?,
                set: parse_set(&root, true)?,
                p,
            }
        }
        Command::SeqLimit => {
            let alpha_seq = parse_alphas(&root, "alpha_seq", false)?;
            let sigma_seq = root.f64_list("sigma_seq")?;
            if sigma_seq.len() != alpha_seq.len() {
                return Err(invalid("sigma_seq length equals alpha_seq length"));
            }
            if sigma_seq.iter().any(|s| !(*s >= 0.0)) || sigma_seq.windows(2).any(|w| w[1] > w[0]) {
                return Err(invalid("sigma_seq non-negative and non-increasing"));
            }
            let alpha_limit = root.opt_f64("alpha_limit")?;
            if let Some(a) = alpha_limit {
                check_alpha(a)?;
            }
            CommandParams::SeqLimit { alpha_seq, sigma_seq, alpha_limit }
        }
        Command::Sweep => {
            let probe_horizon = root.f64_or("probe_horizon", DEFAULT_PROBE_HORIZON)?;
            let problem = parse_problem(&root, n, false, Some(probe_horizon))?;
            let alphas = parse_alphas(&root, "alphas", false)?;
            let alpha0 = root.f64_or("alpha0", alphas.iter().copied().fold(1.0, f64::min))?;
            check_alpha(alpha0)?;
            if alphas.iter().any(|a| *a < alpha0) || !alphas.contains(&1.0) {
                return Err(invalid("alphas within [alpha0, 1] and containing 1"));
            }
            let k = (probe_horizon / problem.step).round();
            if !(probe_horizon > 0.0) || (k * problem.step - probe_horizon).abs() > 1e-9 * probe_horizon {
                return Err(invalid("probe_horizon a positive multiple of step"));
            }
            CommandParams::Sweep { problem, alphas, alpha0, probe_horizon }
        }
        Command::ConvergeSol => {
            let t_star = root.f64("t_star")?;
            if !(t_star > 0.0 && t_star.is_finite()) {
                return Err(invalid("t_star > 0"));
            }
            let problem = parse_problem(&root, n, false, Some(t_star.max(root.f64("step")?)))?;
            CommandParams::ConvergeSol { problem, alphas: parse_alphas(&root, "alphas", false)?, t_star }
        }
    };
    Ok(RunConfig { command, matrix, certify, contour, params })
}

// ---- JSON writing ----

fn complex_json(z: Complex) -> Value {
    json!([z.re, z.im])
}

fn vector_json(v: &ComplexVector) -> Value {
    Value::Array(v.as_slice().iter().map(|z| complex_json(*z)).collect())
}

fn matrix_json(m: &ComplexMatrix) -> Value {
    Value::Array((0..m.rows()).map(|i| Value::Array(m.row(i).iter().map(|z| complex_json(*z)).collect())).collect())
}

fn problem_json(p: &ProblemParams, out: &mut Map<String, Value>) {
    out.insert("u0".into(), vector_json(&p.u0));
    out.insert("alpha".into(), json!(p.alpha));
    out.insert("horizon".into(), json!(p.horizon));
    out.insert("step".into(), json!(p.step));
    out.insert("picard_tol".into(), json!(p.picard_tol));
    out.insert("picard_max".into(), json!(p.picard_max));
    out.insert("blowup_threshold".into(), json!(p.blowup_threshold));
    let f = match &p.nonlinearity {
        NonlinearityConfig::Zero => json!({"kind": "zero"}),
        NonlinearityConfig::Linear(l) => json!({"kind": "linear", "l": matrix_json(l)}),
        NonlinearityConfig::Quadratic { c, radius } => {
            json!({"kind": "quadratic", "c": complex_json(*c), "lipschitz_radius": radius})
        }
        NonlinearityConfig::Logistic { radius } => json!({"kind": "logistic", "lipschitz_radius": radius}),
    };
    out.insert("nonlinearity".into(), f);
}

fn set_json(s: &CompactSet) -> Value {
    json!({"a": s.a, "b": s.b, "samples": s.samples})
}

impl RunConfig {
    /// The fully resolved config with every default expanded.
    pub fn to_json(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("command".into(), json!(self.command.name()));
        m.insert("matrix".into(), matrix_json(&self.matrix));
        let c = &self.certify;
        m.insert(
            "certify".into(),
            json!({"theta": c.theta, "arc_samples": c.arc_samples, "r_min": c.r_min, "r_max": c.r_max, "per_decade": c.per_decade}),
        );
        let k = &self.contour;
        m.insert(
            "contour".into(),
            json!({
                "epsilon": k.epsilon, "theta": k.theta, "ray_cutoff": k.ray_cutoff, "ray_panels": k.ray_panels,
                "arc_panels": k.arc_panels, "points_per_panel": k.points_per_panel, "tail_tol": k.tail_tol,
            }),
        );
        match &self.params {
            CommandParams::Certify => {}
            CommandParams::Eval { family, alpha, times } => {
                m.insert("family".into(), json!(family.label()));
                m.insert("alpha".into(), json!(alpha));
                m.insert("times".into(), json!(times));
            }
            CommandParams::Solve { problem, residual_refine } => {
                problem_json(problem, &mut m);
                m.insert("residual_refine".into(), json!(residual_refine));
            }
            CommandParams::ConvergeOp { family, alphas, set } => {
                m.insert("family".into(), json!(family.label()));
                m.insert("alphas".into(), json!(alphas));
                m.insert("set".into(), set_json(set));
            }
            CommandParams::ConvergeLp { family, alphas, set, p } => {
                m.insert("family".into(), json!(family.label()));
                m.insert("alphas".into(), json!(alphas));
                m.insert("set".into(), set_json(set));
                m.insert("p".into(), json!(p));
            }
            CommandParams::SeqLimit { alpha_seq, sigma_seq, alpha_limit } => {
                m.insert("alpha_seq".into(), json!(alpha_seq));
                m.insert("sigma_seq".into(), json!(sigma_seq));
                m.insert("alpha_limit".into(), json!(alpha_limit));
            }
            CommandParams::Sweep { problem, alphas, alpha0, probe_horizon } => {
                problem_json(problem, &mut m);
                m.insert("alphas".into(), json!(alphas));
                m.insert("alpha0".into(), json!(alpha0));
                m.insert("probe_horizon".into(), json!(probe_horizon));
            }
            CommandParams::ConvergeSol { problem, alphas, t_star } => {
                problem_json(problem, &mut m);
                m.insert("alphas".into(), json!(alphas));
                m.insert("t_star".into(), json!(t_star));
            }
        }
        m
    }
}

// ---- running ----

/// Fixed-width scientific notation with 17 significant digits.
pub fn fmt_real(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

struct Table {
    name: &'static str,
    text: String,
}

impl Table {
    fn new(name: &'static str, header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { name, text }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

/// Results of one run, held in memory until everything succeeded.
pub struct RunReport {
    pub exit_code: i32,
    pub status: String,
    pub omega_estimate: Option<f64>,
    pub results: Value,
    tables: Vec<Table>,
    config: Map<String, Value>,
}

impl RunReport {
    pub fn manifest(&self) -> Value {
        let mut m = self.config.clone();
        m.insert("module_version".into(), json!(MODULE_VERSION));
        m.insert("status".into(), json!(self.status));
        m.insert("omega_estimate".into(), json!(self.omega_estimate));
        m.insert("results".into(), self.results.clone());
        m.insert("outputs".into(), json!(self.tables.iter().map(|t| t.name).collect::<Vec<_>>()));
        Value::Object(m)
    }

    pub fn table(&self, name: &str) -> Option<&str> {
        self.tables.iter().find(|t| t.name == name).map(|t| t.text.as_str())
    }

    /// Write every table plus the manifest into `dir`, returning the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir)?;
        let mut paths = Vec::new();
        for t in &self.tables {
            let p = dir.join(t.name);
            fs::write(&p, &t.text)?;
            paths.push(p);
        }
        let mut text = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        text.push('\n');
        let p = dir.join(MANIFEST_FILE);
        fs::write(&p, text)?;
        paths.push(p);
        Ok(paths)
    }
}

fn certificate_table(cert: &SectorialCertificate) -> Table {
    let mut t = Table::new(
        "certificate.csv",
        &["theta", "m_theta", "sampled_max", "sample_count", "enclosed_eigenvalues", "verdict"],
    );
    t.row(&[
        fmt_real(cert.theta),
        fmt_real(cert.m_theta),
        fmt_real(cert.sampled_max),
        cert.sample_count.to_string(),
        cert.enclosed_eigenvalues.to_string(),
        if cert.is_certified() { "certified".into() } else { "rejected".into() },
    ]);
    t
}

fn build_nonlinearity(cfg: &NonlinearityConfig, u0: &ComplexVector) -> crate::Result<Nonlinearity> {
    match cfg {
        NonlinearityConfig::Zero => Ok(Nonlinearity::zero()),
        NonlinearityConfig::Linear(l) => Nonlinearity::linear(l.clone()),
        NonlinearityConfig::Quadratic { c, radius } => {
            Nonlinearity::from_kind(NonlinearityKind::Quadratic { c: *c }, u0, *radius)
        }
        NonlinearityConfig::Logistic { radius } => Nonlinearity::logistic(u0, *radius),
    }
}

fn build_problem(cfg: &RunConfig, p: &ProblemParams, sector: crate::sectorial::Sector) -> crate::Result<ProblemSpec> {
    let f = build_nonlinearity(&p.nonlinearity, &p.u0)?;
    let mut spec = ProblemSpec::new(cfg.matrix.clone(), sector, p.u0.clone(), p.alpha, f, p.horizon, p.step);
    spec.contour = cfg.contour.clone();
    spec.picard_tol = p.picard_tol;
    spec.picard_max = p.picard_max;
    spec.blowup_threshold = p.blowup_threshold;
    Ok(spec)
}

fn convergence_table(rows: &[crate::experiments::ConvergenceRow]) -> Table {
    let mut t = Table::new("distances.csv", &["alpha", "family", "mode", "distance"]);
    for r in rows {
        t.row(&[fmt_real(r.alpha), r.family.label().into(), r.mode.label(), fmt_real(r.distance)]);
    }
    t
}

/// Execute a validated config. Numeric failures are errors; no files are written here.
pub fn run(cfg: &RunConfig) -> Result<RunReport, CliError> {
    let cert = certify_sectorial(&cfg.matrix, cfg.certify.theta, &cfg.certify.grid())?;
    let mut report = RunReport {
        exit_code: 0,
        status: "ok".into(),
        omega_estimate: None,
        results: json!({"certificate": {"m_theta": cert.m_theta, "sampled_max": cert.sampled_max,
            "sample_count": cert.sample_count, "verdict": cert.verdict}}),
        tables: vec![certificate_table(&cert)],
        config: cfg.to_json(),
    };
    if !cert.is_certified() {
        report.exit_code = 2;
        report.status = "rejected".into();
        return Ok(report);
    }
    if cfg.command == Command::Certify {
        report.status = "certified".into();
        return Ok(report);
    }
    let sector = cert.sector()?;
    let results = report.results.as_object_mut().expect("results object");

    match &cfg.params {
        CommandParams::Certify => unreachable!("handled above"),
        CommandParams::Eval { family, alpha, times } => {
            let ev = ContourEvaluator::new(&cfg.matrix, &sector, &cfg.contour, family.at(*alpha)?)?;
            let values = ev.eval_grid(times)?;
            let mut t = Table::new("values.csv", &["t", "row", "col", "re", "im"]);
            for (time, m) in times.iter().zip(&values) {
                for i in 0..m.rows() {
                    for j in 0..m.cols() {
                        let z = m[(i, j)];
                        t.row(&[fmt_real(*time), i.to_string(), j.to_string(), fmt_real(z.re), fmt_real(z.im)]);
                    }
                }
            }
            results.insert("ray_cutoff".into(), json!(ev.ray_cutoff()));
            results.insert("tail_estimate".into(), json!(ev.tail_estimate()));
            results.insert("node_count".into(), json!(ev.node_count()));
            report.tables.push(t);
        }
        CommandParams::Solve { problem, residual_refine } => {
            let spec = build_problem(cfg, problem, sector)?;
            let mut out = solve(&spec)?;
            if let (Some(r), SolveStatus::Completed) = (residual_refine, out.status) {
                residual_check(&mut out, &spec, *r)?;
            }
            let dim = spec.u0.len();
            let mut header = vec!["t".to_string(), "norm".into()];
            for k in 0..dim {
                header.push(format!("re_{k}"));
                header.push(format!("im_{k}"));
            }
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let mut t = Table::new("trace.csv", &header_refs);
            for (time, v) in out.grid.iter().zip(&out.values) {
                let mut cells = vec![fmt_real(*time), fmt_real(v.norm())];
                for z in v.as_slice() {
                    cells.push(fmt_real(z.re));
                    cells.push(fmt_real(z.im));
                }
                t.row(&cells);
            }
            report.tables.push(t);
            report.status = out.status.label().into();
            report.omega_estimate = out.status.omega();
            if let SolveStatus::PicardFailure { at } = out.status {
                results.insert("picard_failure_at".into(), json!(at));
            }
            results.insert("residual_max".into(), json!(out.residual_max));
            results.insert("steps".into(), json!(out.grid.len() - 1));
            results.insert("uniform_steps".into(), json!(out.uniform_steps()));
        }
        CommandParams::ConvergeOp { family, alphas, set } => {
            let rows = op_convergence_sup(&cfg.matrix, &sector, &cfg.contour, *family, set, alphas)?;
            report.tables.push(convergence_table(&rows));
        }
        CommandParams::ConvergeLp { family, alphas, set, p } => {
            let rows = op_convergence_lp(&cfg.matrix, &sector, &cfg.contour, *family, set, *p, alphas)?;
            report.tables.push(convergence_table(&rows));
        }
        CommandParams::SeqLimit { alpha_seq, sigma_seq, alpha_limit } => {
            let d = sequence_limit(&cfg.matrix, &sector, &cfg.contour, alpha_seq, sigma_seq, *alpha_limit)?;
            let mut t = Table::new("sequence.csv", &["n", "alpha", "sigma", "distance"]);
            for (k, ((a, s), v)) in alpha_seq.iter().zip(sigma_seq).zip(&d).enumerate() {
                t.row(&[(k + 1).to_string(), fmt_real(*a), fmt_real(*s), fmt_real(*v)]);
            }
            report.tables.push(t);
        }
        CommandParams::Sweep { problem, alphas, alpha0, probe_horizon } => {
            let spec = build_problem(cfg, problem, sector)?;
            let sweep = alpha_sweep_existence(&spec, alphas, *alpha0, *probe_horizon)?;
            let mut t = Table::new("sweep.csv", &["alpha", "kind", "omega"]);
            let mut failed = false;
            for (a, w) in sweep.alphas.iter().zip(&sweep.omegas) {
                let (kind, value) = match w {
                    Omega::Finite(v) => ("finite", fmt_real(*v)),
                    Omega::Infinite => ("infinite", fmt_real(f64::INFINITY)),
                    Omega::PicardFailure(at) => ("picard_failure", fmt_real(*at)),
                    Omega::Error(msg) => {
                        failed = true;
                        eprintln!("alpha {a}: {msg}");
                        ("error", fmt_real(f64::NAN))
                    }
                };
                t.row(&[fmt_real(*a), kind.into(), value]);
            }
            report.tables.push(t);
            results.insert("omega_floor".into(), json!(sweep.omega_floor));
            if failed {
                report.exit_code = 2;
                report.status = "partial".into();
            }
        }
        CommandParams::ConvergeSol { problem, alphas, t_star } => {
            let spec = build_problem(cfg, problem, sector)?;
            let rows = solution_convergence(&spec, alphas, *t_star)?;
            let mut t = Table::new("deviations.csv", &["alpha", "deviation"]);
            for r in &rows {
                t.row(&[fmt_real(r.alpha), fmt_real(r.deviation)]);
            }
            report.tables.push(t);
        }
    }
    Ok(report)
}

fn thread_count() -> Result<Option<usize>, CliError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {s:?}"))),
        },
    }
}

/// Read, validate, run and write. Returns the process exit code.
pub fn execute(command: Command, config_path: &Path, out_dir: &Path) -> i32 {
    match try_execute(command, config_path, out_dir) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn try_execute(command: Command, config_path: &Path, out_dir: &Path) -> Result<i32, CliError> {
    let text = fs::read_to_string(config_path)?;
    let cfg = parse_config(&text)?;
    if cfg.command != command {
        return Err(CliError::Usage(format!(
            "config is for command {:?} but {:?} was requested",
            cfg.command.name(),
            command.name()
        )));
    }
    let report = match thread_count()? {
        None => run(&cfg)?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("thread pool: {e}")))?;
            pool.install(|| run(&cfg))?
        }
    };
    report.write(out_dir)?;
    let mut line = format!("{}: {}", command.name(), report.status);
    if let Some(w) = report.omega_estimate {
        let _ = write!(line, " (omega_estimate {})", fmt_real(w));
    }
    eprintln!("{line}");
    Ok(report.exit_code)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_example_parses() {
        let cfg = parse_config(r#"{"command":"eval","matrix":[[[-1,0]]],"family":"E","alpha":0.5,"t":1.0}"#).unwrap();
        assert_eq!(cfg.command, Command::Eval);
        assert_eq!(cfg.params, CommandParams::Eval { family: FamilyKind::MittagLeffler, alpha: 0.5, times: vec![1.0] });
    }

    #[test]
    fn alpha_out_of_range() {
        let err =
            parse_config(r#"{"command":"eval","matrix":[[[-1,0]]],"family":"E","alpha":1.5,"t":1.0}"#).unwrap_err();
        assert_eq!(err, ConfigError::Validation("alpha in (0,1]".into()));
    }

    #[test]
    fn missing_matrix_path() {
        let err = parse_config(r#"{"command":"eval","family":"E","alpha":0.5,"t":1.0}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { ref path, .. } if path == ".matrix"), "{err:?}");
        let err = parse_config(r#"{"command":"solve","matrix":[[[-1,0]]],"u0":[[1,"x"]]}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Parse { ref path, .. } if path == ".u0[0][1]"), "{err:?}");
    }

    #[test]
    fn resolved_config_reparses_identically() {
        let text = r#"{"command":"solve","matrix":[[[-1,0]]],"u0":[[2,0]],"alpha":1,"horizon":0.5,"step":0.125,
            "nonlinearity":{"kind":"quadratic","c":[1,0]}}"#;
        let cfg = parse_config(text).unwrap();
        let again = parse_config(&Value::Object(cfg.to_json()).to_string()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn csv_number_format() {
        assert_eq!(fmt_real(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_real(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_real(f64::INFINITY), "inf");
    }
}
