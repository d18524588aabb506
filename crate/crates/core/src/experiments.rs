//! Numerical studies of the limits `α → 1⁻`: operator convergence in sup and `L^p`,
//! two-parameter sequences, common existence intervals and solution convergence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contour::{ContourEvaluator, FamilyKind, HankelContour, OperatorFamily};
use crate::error::{Error, Result};
use crate::linalg::{operator_norm, ComplexMatrix};
use crate::mild_solver::{solve, ProblemSpec, SolveStatus};
use crate::sectorial::Sector;

pub const MIN_SET_SAMPLES: usize = 16;
pub const DEFAULT_PROBE_HORIZON: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompactSet {
    pub a: f64,
    pub b: f64,
    pub samples: usize,
}

impl CompactSet {
    /// A set for sup-distances; must stay away from `t = 0`.
    pub fn sup_mode(a: f64, b: f64, samples: usize) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::precondition("sup-mode sets need a > 0"));
        }
        Self::checked(a, b, samples)
    }

    /// A set for `L^p` distances; may start at `t = 0`.
    pub fn lp_mode(a: f64, b: f64, samples: usize) -> Result<Self> {
        if !(a >= 0.0) {
            return Err(Error::precondition("Lp-mode sets need a >= 0"));
        }
        Self::checked(a, b, samples)
    }

    fn checked(a: f64, b: f64, samples: usize) -> Result<Self> {
        if !(b > a) || !b.is_finite() {
            return Err(Error::precondition("compact set needs a < b"));
        }
        if samples < MIN_SET_SAMPLES {
            return Err(Error::precondition(format!("compact set needs at least {MIN_SET_SAMPLES} samples")));
        }
        Ok(Self { a, b, samples })
    }

    /// Equispaced sample times including both ends.
    pub fn grid(&self) -> Vec<f64> {
        let n = self.samples - 1;
        (0..=n).map(|k| if k == n { self.b } else { self.a + (self.b - self.a) * k as f64 / n as f64 }).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", content = "p", rename_all = "snake_case")]
pub enum DistanceMode {
    Sup,
    Lp(f64),
}

impl DistanceMode {
    pub fn label(&self) -> String {
        match self {
            Self::Sup => "sup".into(),
            Self::Lp(p) => format!("lp{p}"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub alpha: f64,
    pub distance: f64,
    pub mode: DistanceMode,
    pub family: FamilyKind,
}

fn check_open_alphas(alphas: &[f64]) -> Result<()> {
    if alphas.is_empty() {
        return Err(Error::precondition("alpha list is empty"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a < 1.0)) {
        return Err(Error::precondition(format!("alpha {a} outside (0,1)")));
    }
    Ok(())
}

/// `‖F_α(t) - e^{At}‖` over `grid` for each α, in input order.
fn distance_profiles(
    a: &ComplexMatrix,
    sector: &Sector,
    contour: &HankelContour,
    family: FamilyKind,
    grid: &[f64],
    alphas: &[f64],
) -> Result<Vec<Vec<f64>>> {
    let semigroup = ContourEvaluator::new(a, sector, contour, OperatorFamily::Semigroup)?.eval_grid(grid)?;
    alphas
        .par_iter()
        .map(|&alpha| {
            let values = ContourEvaluator::new(a, sector, contour, family.at(alpha)?)?.eval_grid(grid)?;
            values.iter().zip(&semigroup).map(|(v, s)| operator_norm(&v.sub(s))).collect::<Result<Vec<_>>>()
        })
        .collect()
}

pub fn op_convergence_sup(
    a: &ComplexMatrix,
    sector: &Sector,
    contour: &HankelContour,
    family: FamilyKind,
    set: &CompactSet,
    alphas: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    check_open_alphas(alphas)?;
    if !(set.a > 0.0) {
        return Err(Error::precondition("sup-mode sets need a > 0"));
    }
    let profiles = distance_profiles(a, sector, contour, family, &set.grid(), alphas)?;
    Ok(alphas
        .iter()
        .zip(profiles)
        .map(|(&alpha, d)| ConvergenceRow {
            alpha,
            distance: d.into_iter().fold(0.0, f64::max),
            mode: DistanceMode::Sup,
            family,
        })
        .collect())
}

pub fn op_convergence_lp(
    a: &ComplexMatrix,
    sector: &Sector,
    contour: &HankelContour,
    family: FamilyKind,
    set: &CompactSet,
    p: f64,
    alphas: &[f64],
) -> Result<Vec<ConvergenceRow>> {
    check_open_alphas(alphas)?;
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::precondition("p must be finite and at least 1"));
    }
    let grid = set.grid();
    let profiles = distance_profiles(a, sector, contour, family, &grid, alphas)?;
    Ok(alphas
        .iter()
        .zip(profiles)
        .map(|(&alpha, d)| {
            let integral: f64 = grid
                .windows(2)
                .zip(d.windows(2))
                .map(|(t, v)| 0.5 * (t[1] - t[0]) * (v[0].powf(p) + v[1].powf(p)))
                .sum();
            ConvergenceRow { alpha, distance: integral.powf(1.0 / p), mode: DistanceMode::Lp(p), family }
        })
        .collect())
}

/// `‖E_{α_n}(A σ_n^{α_n}) - E_α(A σ_n^α)‖` per `n`, with `α` the supplied limit or the last
/// sequence element.
pub fn sequence_limit(
    a: &ComplexMatrix,
    sector: &Sector,
    contour: &HankelContour,
    alpha_seq: &[f64],
    sigma_seq: &[f64],
    alpha_limit: Option<f64>,
) -> Result<Vec<f64>> {
    if alpha_seq.len() != sigma_seq.len() || alpha_seq.is_empty() {
        return Err(Error::precondition("alpha and sigma sequences must be non-empty and of equal length"));
    }
    if let Some(a) = alpha_seq.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::precondition(format!("alpha {a} outside (0,1]")));
    }
    if sigma_seq.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || sigma_seq.windows(2).any(|w| w[1] > w[0]) {
        return Err(Error::precondition("sigma sequence must be non-negative and non-increasing"));
    }
    let limit = alpha_limit.unwrap_or(*alpha_seq.last().expect("non-empty"));
    let limit_eval = ContourEvaluator::new(a, sector, contour, OperatorFamily::mittag_leffler(limit)?)?;
    alpha_seq
        .par_iter()
        .zip(sigma_seq.par_iter())
        .map(|(&alpha, &sigma)| {
            if alpha == limit {
                return Ok(0.0);
            }
            let ev = ContourEvaluator::new(a, sector, contour, OperatorFamily::mittag_leffler(alpha)?)?;
            operator_norm(&ev.eval(sigma)?.sub(&limit_eval.eval(sigma)?))
        })
        .collect()
}

/// Blow-up time of one sweep member.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Omega {
    Finite(f64),
    /// No blow-up before the probe horizon.
    Infinite,
    PicardFailure(f64),
    Error(String),
}

impl Omega {
    pub fn finite(&self) -> Option<f64> {
        match self {
            Self::Finite(w) => Some(*w),
            _ => None,
        }
    }
}

/// Sampled estimate of the common existence interval over `[alpha0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaSweepResult {
    pub alphas: Vec<f64>,
    pub omegas: Vec<Omega>,
    /// Smallest finite ω, or the probe horizon when every member ran to it.
    pub omega_floor: f64,
    pub alpha0: f64,
    pub probe_horizon: f64,
}

pub fn alpha_sweep_existence(
    base: &ProblemSpec,
    alphas: &[f64],
    alpha0: f64,
    probe_horizon: f64,
) -> Result<AlphaSweepResult> {
    if !(alpha0 > 0.0 && alpha0 <= 1.0) {
        return Err(Error::precondition("alpha0 must lie in (0,1]"));
    }
    if let Some(a) = alphas.iter().find(|a| !(**a >= alpha0 && **a <= 1.0)) {
        return Err(Error::precondition(format!("alpha {a} outside [alpha0, 1]")));
    }
    if !alphas.contains(&1.0) {
        return Err(Error::precondition("alpha sweep must include alpha = 1"));
    }
    let probe = base.with_horizon(probe_horizon);
    probe.steps()?;
    let omegas: Vec<Omega> = alphas
        .par_iter()
        .map(|&alpha| match solve(&probe.with_alpha(alpha)) {
            Ok(out) => match out.status {
                SolveStatus::Completed => Omega::Infinite,
                SolveStatus::Blowup { omega_estimate } => Omega::Finite(omega_estimate),
                SolveStatus::PicardFailure { at } => Omega::PicardFailure(at),
            },
            Err(e) => Omega::Error(e.to_string()),
        })
        .collect();
    let omega_floor = omegas.iter().filter_map(Omega::finite).reduce(f64::min).unwrap_or(probe_horizon);
    Ok(AlphaSweepResult { alphas: alphas.to_vec(), omegas, omega_floor, alpha0, probe_horizon })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeviationRow {
    pub alpha: f64,
    pub deviation: f64,
}

/// `max_{t_k ≤ t_star} ‖φ_α(t_k) - φ_1(t_k)‖` per α. Every member, and the `α = 1`
/// reference, must run one step past `t_star` without blow-up or Picard failure.
pub fn solution_convergence(base: &ProblemSpec, alphas: &[f64], t_star: f64) -> Result<Vec<DeviationRow>> {
    if let Some(a) = alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
        return Err(Error::precondition(format!("alpha {a} outside (0,1]")));
    }
    if !(t_star > 0.0) || !t_star.is_finite() {
        return Err(Error::precondition("t_star must be positive"));
    }
    let h = base.step;
    let steps = (t_star / h - 1e-9).ceil() as usize + 1;
    let run = base.with_horizon(steps as f64 * h);

    let mut all: Vec<f64> = vec![1.0];
    all.extend(alphas.iter().copied().filter(|a| *a != 1.0));
    let outcomes = all.par_iter().map(|&alpha| solve(&run.with_alpha(alpha))).collect::<Result<Vec<_>>>()?;

    let floor = outcomes
        .iter()
        .filter_map(|o| match o.status {
            SolveStatus::Completed => None,
            SolveStatus::Blowup { omega_estimate } => Some(omega_estimate),
            SolveStatus::PicardFailure { at } => Some(at),
        })
        .reduce(f64::min);
    if let Some(omega_floor) = floor {
        return Err(Error::CommonIntervalViolated { t_star, omega_floor });
    }

    let reference = &outcomes[0];
    let rows = alphas
        .iter()
        .map(|&alpha| {
            if alpha == 1.0 {
                return DeviationRow { alpha, deviation: 0.0 };
            }
            let idx = all.iter().position(|a| *a == alpha).expect("alpha present");
            let out = &outcomes[idx];
            let deviation = out
                .grid
                .iter()
                .zip(&out.values)
                .zip(&reference.values)
                .filter(|((t, _), _)| **t <= t_star * (1.0 + 1e-12))
                .map(|((_, v), r)| v.sub(r).norm())
                .fold(0.0, f64::max);
            DeviationRow { alpha, deviation }
        })
        .collect();
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Complex, ComplexVector};
    use crate::mild_solver::Nonlinearity;
    use crate::sectorial::DEFAULT_THETA;

    fn scalar() -> (ComplexMatrix, Sector, HankelContour) {
        let a = ComplexMatrix::from_real_rows(&[&[-1.0]]).unwrap();
        (a, Sector::new(DEFAULT_THETA, 1.5).unwrap(), HankelContour::default())
    }

    #[test]
    fn compact_set_rules() {
        assert!(CompactSet::sup_mode(0.0, 1.0, 32).is_err());
        assert!(CompactSet::lp_mode(0.0, 1.0, 32).is_ok());
        assert!(CompactSet::lp_mode(0.0, 1.0, 8).is_err());
        let g = CompactSet::lp_mode(0.0, 1.0, 17).unwrap().grid();
        assert_eq!(g.len(), 17);
        assert_eq!((g[0], g[16]), (0.0, 1.0));
    }

    #[test]
    fn sup_rejects_alpha_one() {
        let (a, s, c) = scalar();
        let set = CompactSet::sup_mode(0.5, 1.0, 16).unwrap();
        assert!(op_convergence_sup(&a, &s, &c, FamilyKind::MittagLeffler, &set, &[0.9, 1.0]).is_err());
    }

    #[test]
    fn semigroup_against_itself_is_zero() {
        let (a, s, c) = scalar();
        let set = CompactSet::lp_mode(0.0, 1.0, 16).unwrap();
        let rows = op_convergence_lp(&a, &s, &c, FamilyKind::Semigroup, &set, 1.0, &[0.5]).unwrap();
        assert_eq!(rows[0].distance, 0.0);
    }

    #[test]
    fn sequence_trivial_cases() {
        let (a, s, c) = scalar();
        let d = sequence_limit(&a, &s, &c, &[0.7, 0.7, 0.7], &[1.0, 0.5, 0.25], None).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
        let d = sequence_limit(&a, &s, &c, &[0.5, 0.8], &[0.0, 0.0], Some(1.0)).unwrap();
        assert!(d.iter().all(|v| *v == 0.0));
        assert!(sequence_limit(&a, &s, &c, &[0.5, 0.8], &[0.1, 0.2], None).is_err());
    }

    #[test]
    fn zero_forcing_sweep_is_global() {
        let (a, s, _) = scalar();
        let base = ProblemSpec::new(a, s, ComplexVector::from_real(&[1.0]), 1.0, Nonlinearity::zero(), 1.0, 0.25);
        let sweep = alpha_sweep_existence(&base, &[0.5, 1.0], 0.5, 10.0).unwrap();
        assert!(sweep.omegas.iter().all(|w| *w == Omega::Infinite));
        assert_eq!(sweep.omega_floor, 10.0);
        assert!(alpha_sweep_existence(&base, &[0.5, 0.9], 0.5, 10.0).is_err());
        assert!(alpha_sweep_existence(&base, &[0.4, 1.0], 0.5, 10.0).is_err());
    }

    #[test]
    fn solution_convergence_flags_short_interval() {
        let (a, s, _) = scalar();
        let u0 = ComplexVector::from_real(&[2.0]);
        let f = Nonlinearity::quadratic(Complex::new(1.0, 0.0), &u0, 1.0).unwrap();
        let base = ProblemSpec::new(a, s, u0, 1.0, f, 1.0, 1.0 / 64.0);
        let err = solution_convergence(&base, &[0.9, 1.0], 0.8).unwrap_err();
        assert!(matches!(err, Error::CommonIntervalViolated { .. }));
        let rows = solution_convergence(&base, &[0.9, 1.0], 0.25).unwrap();
        assert_eq!(rows[1].deviation, 0.0);
        assert!(rows[0].deviation > 0.0);
    }
}
