//! Mild solutions of `cD^α u = A u + f(u)`, `u(0) = u0`, by product integration.
//!
//! For `α < 1` the solution satisfies
//! `φ(t) = E_α(A t^α) u0 + ∫_0^t (t-s)^(α-1) E_{α,α}(A (t-s)^α) f(φ(s)) ds`,
//! and for `α = 1` the semigroup form `φ(t) = e^{At} u0 + ∫_0^t e^{A(t-s)} f(φ(s)) ds`.
//! The singular factor is integrated exactly against a piecewise-linear interpolant of
//! the rest; at `α = 1` this is the trapezoidal rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{ContourEvaluator, FamilyKind, HankelContour};
use crate::error::{Error, Result};
use crate::frac_calc::interval_weights;
use crate::linalg::{gamma, operator_norm_or_bound, Complex, ComplexMatrix, ComplexVector};
use crate::sectorial::Sector;

pub const DEFAULT_PICARD_TOL: f64 = 1e-10;
pub const DEFAULT_PICARD_MAX: usize = 50;
pub const DEFAULT_BLOWUP_THRESHOLD: f64 = 1e8;
pub const DEFAULT_LIPSCHITZ_RADIUS: f64 = 1.0;

/// Each refinement level divides the step by this factor.
pub const REFINE_FACTOR: usize = 8;
/// Blow-up is declared only from an unbounded step at this level or finer, so the
/// reported bracket is at most `h / 8^3` wide.
pub const REFINE_LEVELS: u32 = 3;
/// Cap on sub-steps taken after the first refinement.
pub const MAX_SUBSTEPS: usize = 2048;
/// Sub-steps shorter than this multiple of `ε_mach · max(t, 1)` are not attempted.
const RESOLUTION_FLOOR: f64 = 256.0;

/// Lags whose kernels are evaluated together.
const KERNEL_CHUNK: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub enum NonlinearityKind {
    Zero,
    Linear {
        l: ComplexMatrix,
    },
    /// `u ↦ c (u∘u)`
    Quadratic {
        c: Complex,
    },
    /// `u ↦ u∘(u - 1)`
    Logistic,
}

/// A registered nonlinearity together with Lipschitz data on the ball of radius
/// `lipschitz_radius` about `u0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    kind: NonlinearityKind,
    center_norm: f64,
    lipschitz_radius: f64,
    lipschitz_const: f64,
}

impl Nonlinearity {
    pub fn zero() -> Self {
        Self { kind: NonlinearityKind::Zero, center_norm: 0.0, lipschitz_radius: f64::INFINITY, lipschitz_const: 0.0 }
    }

    pub fn linear(l: ComplexMatrix) -> Result<Self> {
        if !l.is_square() {
            return Err(Error::DimensionMismatch("linear nonlinearity needs a square matrix".into()));
        }
        let (norm, _) = operator_norm_or_bound(&l)?;
        Ok(Self {
            kind: NonlinearityKind::Linear { l },
            center_norm: 0.0,
            lipschitz_radius: f64::INFINITY,
            lipschitz_const: norm,
        })
    }

    pub fn quadratic(c: Complex, u0: &ComplexVector, radius: f64) -> Result<Self> {
        Self::local(NonlinearityKind::Quadratic { c }, u0, radius)
    }

    pub fn logistic(u0: &ComplexVector, radius: f64) -> Result<Self> {
        Self::local(NonlinearityKind::Logistic, u0, radius)
    }

    pub fn from_kind(kind: NonlinearityKind, u0: &ComplexVector, radius: f64) -> Result<Self> {
        match kind {
            NonlinearityKind::Zero => Ok(Self::zero()),
            NonlinearityKind::Linear { l } => Self::linear(l),
            other => Self::local(other, u0, radius),
        }
    }

    fn local(kind: NonlinearityKind, u0: &ComplexVector, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::precondition("Lipschitz radius must be positive and finite"));
        }
        let mut f = Self { kind, center_norm: u0.norm(), lipschitz_radius: radius, lipschitz_const: 0.0 };
        f.lipschitz_const = f.lipschitz_on(radius);
        Ok(f)
    }

    pub fn kind(&self) -> &NonlinearityKind {
        &self.kind
    }

    pub fn lipschitz_radius(&self) -> f64 {
        self.lipschitz_radius
    }

    pub fn lipschitz_const(&self) -> f64 {
        self.lipschitz_const
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, NonlinearityKind::Zero)
    }

    /// Lipschitz constant on the ball of radius `radius` about `u0`.
    pub fn lipschitz_on(&self, radius: f64) -> f64 {
        let bound = self.center_norm + radius;
        match &self.kind {
            NonlinearityKind::Quadratic { c } => 2.0 * c.norm() * bound,
            NonlinearityKind::Logistic => 2.0 * bound + 1.0,
            _ => self.lipschitz_const,
        }
    }

    pub fn dim_ok(&self, n: usize) -> bool {
        match &self.kind {
            NonlinearityKind::Linear { l } => l.rows() == n,
            _ => true,
        }
    }

    pub fn apply(&self, u: &ComplexVector) -> ComplexVector {
        let one = Complex::new(1.0, 0.0);
        match &self.kind {
            NonlinearityKind::Zero => ComplexVector::zeros(u.len()),
            NonlinearityKind::Linear { l } => l.apply(u),
            NonlinearityKind::Quadratic { c } => {
                ComplexVector::from_vec_unchecked(u.as_slice().iter().map(|z| c * z * z).collect())
            }
            NonlinearityKind::Logistic => {
                ComplexVector::from_vec_unchecked(u.as_slice().iter().map(|z| z * (z - one)).collect())
            }
        }
    }
}

/// One instance of the fractional Cauchy problem.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub a: ComplexMatrix,
    pub sector: Sector,
    pub contour: HankelContour,
    pub u0: ComplexVector,
    pub alpha: f64,
    pub f: Nonlinearity,
    pub horizon: f64,
    pub step: f64,
    pub picard_tol: f64,
    pub picard_max: usize,
    pub blowup_threshold: f64,
}

impl ProblemSpec {
    pub fn new(
        a: ComplexMatrix,
        sector: Sector,
        u0: ComplexVector,
        alpha: f64,
        f: Nonlinearity,
        horizon: f64,
        step: f64,
    ) -> Self {
        Self {
            a,
            sector,
            contour: HankelContour::default(),
            u0,
            alpha,
            f,
            horizon,
            step,
            picard_tol: DEFAULT_PICARD_TOL,
            picard_max: DEFAULT_PICARD_MAX,
            blowup_threshold: DEFAULT_BLOWUP_THRESHOLD,
        }
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self { alpha, ..self.clone() }
    }

    pub fn with_horizon(&self, horizon: f64) -> Self {
        Self { horizon, ..self.clone() }
    }

    pub fn with_step(&self, step: f64) -> Self {
        Self { step, ..self.clone() }
    }

    /// Number of uniform steps to the horizon.
    pub fn steps(&self) -> Result<usize> {
        steps_for(self.horizon, self.step)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.a.rows();
        if !self.a.is_square() || n == 0 {
            return Err(Error::DimensionMismatch("A must be a non-empty square matrix".into()));
        }
        if self.u0.len() != n {
            return Err(Error::DimensionMismatch(format!("u0 has length {} for a {n}x{n} operator", self.u0.len())));
        }
        if !self.f.dim_ok(n) {
            return Err(Error::DimensionMismatch("nonlinearity dimension differs from A".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::precondition(format!("alpha must lie in (0,1], got {}", self.alpha)));
        }
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(Error::precondition("step must be positive"));
        }
        self.steps()?;
        if !(self.picard_tol > 0.0) || self.picard_max == 0 {
            return Err(Error::precondition("Picard tolerance and iteration cap must be positive"));
        }
        if !(self.blowup_threshold > self.u0.norm()) {
            return Err(Error::precondition("blow-up threshold must exceed |u0|"));
        }
        self.contour.validate()
    }
}

fn steps_for(horizon: f64, step: f64) -> Result<usize> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::precondition("horizon must be positive and finite"));
    }
    let k = (horizon / step).round();
    if k < 1.0 || (k * step - horizon).abs() > 1e-9 * horizon {
        return Err(Error::precondition(format!("horizon {horizon} is not a multiple of step {step}")));
    }
    Ok(k as usize)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SolveStatus {
    Completed,
    Blowup { omega_estimate: f64 },
    PicardFailure { at: f64 },
}

impl SolveStatus {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Completed => "completed",
            Self::Blowup { .. } => "blowup",
            Self::PicardFailure { .. } => "picard_failure",
        }
    }

    pub fn omega(&self) -> Option<f64> {
        match self {
            Self::Blowup { omega_estimate } => Some(*omega_estimate),
            _ => None,
        }
    }
}

/// Per-step record of the fixed-point solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Refinement level: the step was `h / 8^level`.
    pub level: u32,
    /// Successive Picard update norms.
    pub deltas: Vec<f64>,
    /// Radius about `u0` of the ball containing every value and iterate seen so far.
    pub ball_radius: f64,
    /// Lipschitz constant of `f` on that ball.
    pub lipschitz: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub grid: Vec<f64>,
    pub values: Vec<ComplexVector>,
    pub status: SolveStatus,
    /// Before [`residual_check`], the largest final Picard update; afterwards the
    /// refined integral-equation residual.
    pub residual_max: f64,
    pub diagnostics: Vec<StepRecord>,
    steps_done: usize,
}

impl SolveOutcome {
    /// Number of uniform steps completed before any refinement.
    pub fn uniform_steps(&self) -> usize {
        self.steps_done
    }

    pub fn is_uniform(&self) -> bool {
        self.grid.len() == self.steps_done + 1
    }

    pub fn max_norm(&self) -> f64 {
        self.values.iter().map(ComplexVector::norm).fold(0.0, f64::max)
    }
}

enum PicardResult {
    Converged(ComplexVector, Vec<f64>),
    Unbounded(ComplexVector, Vec<f64>),
    Stalled,
}

struct Marcher<'a> {
    spec: &'a ProblemSpec,
    h: f64,
    h_alpha: f64,
    kernel0: f64,
    linear_eval: ContourEvaluator,
    kernel_eval: ContourEvaluator,
    // Normalized (h = 1) interval weights at distance q: left node, right node.
    wl: Vec<f64>,
    wr: Vec<f64>,
    kernels: Vec<ComplexMatrix>,
    grid: Vec<f64>,
    values: Vec<ComplexVector>,
    fvals: Vec<ComplexVector>,
    diagnostics: Vec<StepRecord>,
    ball_radius: f64,
    residual_max: f64,
}

impl<'a> Marcher<'a> {
    fn new(spec: &'a ProblemSpec) -> Result<Self> {
        spec.validate()?;
        let linear_family = FamilyKind::MittagLeffler.at(spec.alpha)?;
        let kernel_family = FamilyKind::MittagLefflerAlpha.at(spec.alpha)?;
        let linear_eval = ContourEvaluator::new(&spec.a, &spec.sector, &spec.contour, linear_family)?;
        let kernel_eval = ContourEvaluator::new(&spec.a, &spec.sector, &spec.contour, kernel_family)?;
        let kernel0 = if spec.alpha == 1.0 { 1.0 } else { 1.0 / gamma(spec.alpha)? };
        let r0 = spec.f.lipschitz_radius();
        let ball_radius = if r0.is_finite() { r0 } else { 0.0 };
        Ok(Self {
            spec,
            h: spec.step,
            h_alpha: spec.step.powf(spec.alpha),
            kernel0,
            linear_eval,
            kernel_eval,
            wl: Vec::new(),
            wr: Vec::new(),
            kernels: vec![ComplexMatrix::identity(spec.a.rows()).scale(Complex::new(kernel0, 0.0))],
            grid: vec![0.0],
            values: vec![spec.u0.clone()],
            fvals: vec![spec.f.apply(&spec.u0)],
            diagnostics: Vec::new(),
            ball_radius,
            residual_max: 0.0,
        })
    }

    /// Rebuild the marching state from a stored uniform prefix.
    fn resume(spec: &'a ProblemSpec, prior: &SolveOutcome) -> Result<Self> {
        let mut m = Self::new(spec)?;
        m.grid = prior.grid.clone();
        m.values = prior.values.clone();
        m.fvals = prior.values.iter().map(|v| spec.f.apply(v)).collect();
        m.diagnostics = prior.diagnostics.clone();
        if let Some(last) = prior.diagnostics.last() {
            m.ball_radius = last.ball_radius;
        }
        m.residual_max = prior.residual_max;
        Ok(m)
    }

    fn ensure_weights(&mut self, q_max: usize) {
        let alpha = self.spec.alpha;
        while self.wl.len() <= q_max {
            let d = self.wl.len() as f64;
            let (l, r) = interval_weights(d + 1.0, 0.0, 1.0, alpha);
            self.wl.push(l);
            self.wr.push(r);
        }
    }

    fn ensure_kernels(&mut self, q_max: usize) -> Result<()> {
        while self.kernels.len() <= q_max {
            let start = self.kernels.len();
            let end = (start + KERNEL_CHUNK).max(q_max + 1);
            let h = self.h;
            let eval = &self.kernel_eval;
            let chunk: Vec<ComplexMatrix> =
                (start..end).into_par_iter().map(|q| eval.eval(q as f64 * h)).collect::<Result<_>>()?;
            self.kernels.extend(chunk);
        }
        Ok(())
    }

    fn track_ball(&mut self, x: &ComplexVector) {
        if self.spec.f.is_zero() {
            return;
        }
        let r = x.sub(&self.spec.u0).norm();
        if r > self.ball_radius {
            self.ball_radius = r;
        }
    }

    fn picard(&mut self, known: &ComplexVector, c: f64) -> PicardResult {
        let spec = self.spec;
        let mut x = self.values.last().cloned().unwrap_or_else(|| spec.u0.clone());
        let mut deltas = Vec::new();
        if spec.f.is_zero() {
            return PicardResult::Converged(known.clone(), deltas);
        }
        let cc = Complex::new(c, 0.0);
        for _ in 0..spec.picard_max {
            let mut next = known.clone();
            next.axpy(cc, &spec.f.apply(&x));
            let delta = next.sub(&x).norm();
            let size = next.norm();
            deltas.push(delta);
            if !next.is_finite() || !(size <= spec.blowup_threshold) {
                return PicardResult::Unbounded(next, deltas);
            }
            self.track_ball(&next);
            x = next;
            if delta <= spec.picard_tol * size.max(1.0) {
                return PicardResult::Converged(x, deltas);
            }
        }
        PicardResult::Stalled
    }

    /// Known part of the uniform step to `t_m`.
    fn uniform_known(&mut self, m: usize) -> Result<ComplexVector> {
        let t = m as f64 * self.h;
        let mut known = self.linear_eval.eval_apply(t, &self.spec.u0)?;
        if self.spec.f.is_zero() {
            return Ok(known);
        }
        self.ensure_weights(m);
        self.ensure_kernels(m)?;
        let ha = Complex::new(self.h_alpha, 0.0);
        // Node 0 sees only the interval [0, h]; interior nodes see two intervals.
        let mut acc = self.kernels[m].apply(&self.fvals[0]).scale(Complex::new(self.wl[m - 1], 0.0));
        for j in 1..m {
            let q = m - j;
            let w = self.wr[q] + self.wl[q - 1];
            acc.axpy(Complex::new(w, 0.0), &self.kernels[q].apply(&self.fvals[j]));
        }
        known.axpy(ha, &acc);
        Ok(known)
    }

    /// Known part and implicit coefficient for an arbitrary new time `t` past the history.
    fn general_known(&self, t: f64) -> Result<(ComplexVector, f64)> {
        let spec = self.spec;
        let alpha = spec.alpha;
        let mut known = self.linear_eval.eval_apply(t, &spec.u0)?;
        let m = self.grid.len();
        let mut weights = vec![0.0; m + 1];
        for j in 0..m {
            let b = if j + 1 < m { self.grid[j + 1] } else { t };
            let (wa, wb) = interval_weights(t, self.grid[j], b, alpha);
            weights[j] += wa;
            weights[j + 1] += wb;
        }
        if !spec.f.is_zero() {
            let eval = &self.kernel_eval;
            let terms: Vec<ComplexVector> = (0..m)
                .into_par_iter()
                .map(|j| eval.eval_apply(t - self.grid[j], &self.fvals[j]))
                .collect::<Result<_>>()?;
            for (w, term) in weights.iter().zip(&terms) {
                known.axpy(Complex::new(*w, 0.0), term);
            }
        }
        Ok((known, weights[m] * self.kernel0))
    }

    fn accept(&mut self, t: f64, x: ComplexVector, level: u32, deltas: Vec<f64>) {
        if let Some(d) = deltas.last() {
            let scale = x.norm().max(1.0);
            self.residual_max = self.residual_max.max(d / scale);
        }
        self.grid.push(t);
        self.fvals.push(self.spec.f.apply(&x));
        self.values.push(x);
        let lipschitz = self.spec.f.lipschitz_on(self.ball_radius);
        self.diagnostics.push(StepRecord { t, level, deltas, ball_radius: self.ball_radius, lipschitz });
    }

    fn finish(self, status: SolveStatus, steps_done: usize) -> SolveOutcome {
        SolveOutcome {
            grid: self.grid,
            values: self.values,
            status,
            residual_max: self.residual_max,
            diagnostics: self.diagnostics,
            steps_done,
        }
    }

    fn run(mut self, target_steps: usize) -> Result<SolveOutcome> {
        let mut m = self.grid.len();
        while m <= target_steps {
            let known = self.uniform_known(m)?;
            let c = self.h_alpha * self.wr_zero() * self.kernel0;
            match self.picard(&known, c) {
                PicardResult::Converged(x, deltas) => {
                    self.accept(m as f64 * self.h, x, 0, deltas);
                    m += 1;
                }
                _ => {
                    let uniform = self.grid.len() - 1;
                    return self.refine(uniform);
                }
            }
        }
        Ok(self.finish(SolveStatus::Completed, target_steps))
    }

    fn wr_zero(&mut self) -> f64 {
        self.ensure_weights(0);
        self.wr[0]
    }

    /// Sub-step from the last accepted value after a failed step, locating blow-up.
    fn refine(mut self, uniform_steps: usize) -> Result<SolveOutcome> {
        let horizon = self.spec.horizon;
        let mut level = 1;
        let mut taken = 0;
        loop {
            let delta = self.h / (REFINE_FACTOR as f64).powi(level as i32);
            let t_prev = *self.grid.last().expect("grid holds t = 0");
            if t_prev >= horizon - 1e-9 * delta {
                return Ok(self.finish(SolveStatus::Completed, uniform_steps));
            }
            if taken >= MAX_SUBSTEPS {
                return Ok(self.finish(SolveStatus::PicardFailure { at: t_prev + delta }, uniform_steps));
            }
            let mut t = t_prev + delta;
            if t > horizon - 1e-9 * delta {
                t = horizon;
            }
            let (known, c) = self.general_known(t)?;
            match self.picard(&known, c) {
                PicardResult::Converged(x, deltas) => {
                    self.accept(t, x, level, deltas);
                    taken += 1;
                }
                PicardResult::Unbounded(x, deltas) if level >= REFINE_LEVELS => {
                    let omega = 0.5 * (t_prev + t);
                    self.grid.push(t);
                    self.values.push(x);
                    let lipschitz = self.spec.f.lipschitz_on(self.ball_radius);
                    self.diagnostics.push(StepRecord { t, level, deltas, ball_radius: self.ball_radius, lipschitz });
                    return Ok(self.finish(SolveStatus::Blowup { omega_estimate: omega }, uniform_steps));
                }
                _ => {
                    let next = delta / REFINE_FACTOR as f64;
                    if next < RESOLUTION_FLOOR * f64::EPSILON * t.max(1.0) {
                        return Ok(self.finish(SolveStatus::PicardFailure { at: t }, uniform_steps));
                    }
                    level += 1;
                }
            }
        }
    }
}

/// March the mild-solution equation to the horizon, stopping at blow-up or Picard failure.
pub fn solve(spec: &ProblemSpec) -> Result<SolveOutcome> {
    let target = spec.steps()?;
    Marcher::new(spec)?.run(target)
}

/// Extend a completed solve to `new_horizon`, replaying the stored history.
pub fn continue_solution(outcome: &SolveOutcome, spec: &ProblemSpec, new_horizon: f64) -> Result<SolveOutcome> {
    if outcome.status != SolveStatus::Completed {
        return Err(Error::precondition("only completed solves can be continued"));
    }
    if !outcome.is_uniform() {
        return Err(Error::precondition("outcome contains refined sub-steps"));
    }
    let old_steps = outcome.uniform_steps();
    let new_steps = steps_for(new_horizon, spec.step)?;
    if new_steps <= old_steps {
        return Err(Error::precondition("new horizon must exceed the old one"));
    }
    let extended = spec.with_horizon(new_horizon);
    Marcher::resume(&extended, outcome)?.run(new_steps)
}

/// Cubic Lagrange interpolation on a uniform grid.
fn interpolate(values: &[ComplexVector], h: f64, t: f64) -> ComplexVector {
    let n = values.len();
    let pos = t / h;
    let k = pos.floor() as usize;
    if (pos - k as f64) == 0.0 && k < n {
        return values[k].clone();
    }
    if n < 4 {
        let k = k.min(n - 2);
        let s = pos - k as f64;
        let mut v = values[k].scale(Complex::new(1.0 - s, 0.0));
        v.axpy(Complex::new(s, 0.0), &values[k + 1]);
        return v;
    }
    let start = k.saturating_sub(1).min(n - 4);
    let xs: Vec<f64> = (start..start + 4).map(|i| i as f64).collect();
    let mut out = ComplexVector::zeros(values[0].len());
    for i in 0..4 {
        let mut w = 1.0;
        for j in 0..4 {
            if i != j {
                w *= (pos - xs[j]) / (xs[i] - xs[j]);
            }
        }
        out.axpy(Complex::new(w, 0.0), &values[start + i]);
    }
    out
}

/// Re-evaluate the right-hand side of the mild-solution equation with a `refine`-times finer
/// product quadrature on cubic interpolants of the samples, returning (and storing) the largest
/// discrepancy over the grid.
pub fn residual_check(outcome: &mut SolveOutcome, spec: &ProblemSpec, refine: usize) -> Result<f64> {
    if outcome.status != SolveStatus::Completed {
        return Err(Error::precondition("residual check needs a completed solve"));
    }
    if !outcome.is_uniform() {
        return Err(Error::precondition("residual check needs a uniform grid"));
    }
    if refine == 0 {
        return Err(Error::precondition("refinement factor must be at least 1"));
    }
    spec.validate()?;
    let alpha = spec.alpha;
    let h = spec.step;
    let n = outcome.grid.len() - 1;
    let fine_n = n * refine;
    let delta = h / refine as f64;

    let linear_eval =
        ContourEvaluator::new(&spec.a, &spec.sector, &spec.contour, FamilyKind::MittagLeffler.at(alpha)?)?;
    let linear: Vec<ComplexVector> =
        outcome.grid.par_iter().map(|&t| linear_eval.eval_apply(t, &spec.u0)).collect::<Result<_>>()?;

    let residual = if spec.f.is_zero() {
        outcome.values.iter().zip(&linear).map(|(v, l)| v.sub(l).norm()).fold(0.0, f64::max)
    } else {
        let kernel_eval =
            ContourEvaluator::new(&spec.a, &spec.sector, &spec.contour, FamilyKind::MittagLefflerAlpha.at(alpha)?)?;
        let kernel0 = if alpha == 1.0 { 1.0 } else { 1.0 / gamma(alpha)? };
        let dim = spec.a.rows();
        let mut kernels = vec![ComplexMatrix::identity(dim).scale(Complex::new(kernel0, 0.0))];
        let rest: Vec<ComplexMatrix> =
            (1..=fine_n).into_par_iter().map(|q| kernel_eval.eval(q as f64 * delta)).collect::<Result<_>>()?;
        kernels.extend(rest);
        let g: Vec<ComplexVector> = (0..=fine_n)
            .into_par_iter()
            .map(|i| spec.f.apply(&interpolate(&outcome.values, h, i as f64 * delta)))
            .collect();
        let mut wl = Vec::with_capacity(fine_n);
        let mut wr = Vec::with_capacity(fine_n);
        for d in 0..fine_n {
            let (l, r) = interval_weights(d as f64 + 1.0, 0.0, 1.0, alpha);
            wl.push(l);
            wr.push(r);
        }
        let scale = Complex::new(delta.powf(alpha), 0.0);
        (1..=n)
            .into_par_iter()
            .map(|m| {
                let fm = m * refine;
                let mut acc = kernels[fm].apply(&g[0]).scale(Complex::new(wl[fm - 1], 0.0));
                for j in 1..fm {
                    let q = fm - j;
                    acc.axpy(Complex::new(wr[q] + wl[q - 1], 0.0), &kernels[q].apply(&g[j]));
                }
                acc.axpy(Complex::new(wr[0], 0.0), &kernels[0].apply(&g[fm]));
                let mut rhs = linear[m].clone();
                rhs.axpy(scale, &acc);
                outcome.values[m].sub(&rhs).norm()
            })
            .reduce(|| 0.0, f64::max)
    };
    outcome.residual_max = residual;
    Ok(residual)
}
