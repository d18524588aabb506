//! Sector data and a sampled sectoriality certificate.
//!
//! A matrix `A` is certified on `S_θ = {|arg λ| ≤ θ, λ ≠ 0}` when every sampled
//! resolvent exists and `|λ| ‖(λ - A)^{-1}‖` stays bounded. Sampling cannot
//! prove the bound; the certificate records what was sampled and applies a
//! 1.05 safety factor to the observed maximum.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{operator_norm_with, Complex, ComplexMatrix, ComplexVector, Lu, NormOptions, PIVOT_TOL};

pub const DEFAULT_THETA: f64 = 3.0 * PI / 4.0;
pub const SAFETY_FACTOR: f64 = 1.05;
pub const MIN_ARC_SAMPLES: usize = 64;

const CERT_NORM: NormOptions = NormOptions { tol: 1e-10, max_iters: 200_000 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    theta: f64,
    m_theta: f64,
}

impl Sector {
    pub fn new(theta: f64, m_theta: f64) -> Result<Self> {
        check_angle(theta)?;
        if !(m_theta > 0.0) || !m_theta.is_finite() {
            return Err(Error::precondition(format!("m_theta must be positive and finite, got {m_theta}")));
        }
        Ok(Self { theta, m_theta })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn m_theta(&self) -> f64 {
        self.m_theta
    }
}

pub(crate) fn check_angle(theta: f64) -> Result<()> {
    if theta > FRAC_PI_2 && theta < PI {
        Ok(())
    } else {
        Err(Error::InvalidAngle { theta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Certified,
    Rejected,
}

/// Where the resolvent was sampled: `arc_samples` angles spanning `[-θ, θ]`
/// (endpoints on the rays) at every radius.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleGrid {
    pub arc_samples: usize,
    pub radii: Vec<f64>,
}

impl SampleGrid {
    /// `per_decade` log-spaced radii from `r_min` to `r_max` inclusive.
    pub fn log_radii(r_min: f64, r_max: f64, per_decade: usize) -> Vec<f64> {
        let lo = r_min.log10();
        let hi = r_max.log10();
        let steps = ((hi - lo) * per_decade as f64).round().max(1.0) as usize;
        (0..=steps).map(|k| 10f64.powf(lo + (hi - lo) * (k as f64 / steps as f64))).collect()
    }
}

impl Default for SampleGrid {
    fn default() -> Self {
        Self { arc_samples: 128, radii: Self::log_radii(1e-3, 1e3, 25) }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SectorialCertificate {
    pub theta: f64,
    /// `SAFETY_FACTOR * sampled_max`; infinite when a sample hit the spectrum.
    pub m_theta: f64,
    pub sampled_max: f64,
    pub sample_count: usize,
    /// Winding number of `det(λ - A)` around the sampled sector annulus.
    pub enclosed_eigenvalues: i64,
    pub verdict: Verdict,
}

impl SectorialCertificate {
    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn sector(&self) -> Result<Sector> {
        if !self.is_certified() {
            return Err(Error::precondition("matrix was not certified sectorial on the sampled sector"));
        }
        Sector::new(self.theta, self.m_theta)
    }
}

/// `y` with `(λI - A) y = x`.
pub fn resolvent_apply(a: &ComplexMatrix, lambda: Complex, x: &ComplexVector) -> Result<ComplexVector> {
    Lu::factor(&a.shifted_negated(lambda), PIVOT_TOL)?.solve(x)
}

struct Sample {
    scaled_norm: Option<f64>,
    det: Complex,
}

fn sample_at(a: &ComplexMatrix, lambda: Complex) -> Result<Sample> {
    match Lu::factor(&a.shifted_negated(lambda), PIVOT_TOL) {
        Ok(lu) => {
            let norm = operator_norm_with(&lu.inverse(), CERT_NORM)?;
            Ok(Sample { scaled_norm: Some(lambda.norm() * norm), det: lu.determinant() })
        }
        Err(Error::SingularMatrix { .. }) => Ok(Sample { scaled_norm: None, det: Complex::new(0.0, 0.0) }),
        Err(e) => Err(e),
    }
}

fn arc_angle(theta: f64, j: usize, count: usize) -> f64 {
    -theta + 2.0 * theta * (j as f64 / (count - 1) as f64)
}

pub fn certify_sectorial(a: &ComplexMatrix, theta: f64, grid: &SampleGrid) -> Result<SectorialCertificate> {
    check_angle(theta)?;
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::DimensionMismatch("sectorial certification needs a non-empty square matrix".into()));
    }
    if grid.arc_samples < MIN_ARC_SAMPLES {
        return Err(Error::precondition(format!("need at least {MIN_ARC_SAMPLES} arc samples")));
    }
    if grid.radii.is_empty() || grid.radii.iter().any(|r| !(*r > 0.0) || !r.is_finite()) {
        return Err(Error::precondition("radii must be positive and finite"));
    }
    let mut radii = grid.radii.clone();
    radii.sort_by(f64::total_cmp);
    radii.dedup();

    let n_arc = grid.arc_samples;
    let rows: Vec<Vec<Sample>> = radii
        .par_iter()
        .map(|&r| {
            (0..n_arc)
                .map(|j| sample_at(a, Complex::from_polar(r, arc_angle(theta, j, n_arc))))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sampled_max: f64 = 0.0;
    let mut hit_spectrum = false;
    for s in rows.iter().flatten() {
        match s.scaled_norm {
            Some(v) => sampled_max = sampled_max.max(v),
            None => hit_spectrum = true,
        }
    }

    let enclosed = if hit_spectrum { 0 } else { winding_number(&rows) };
    let certified = !hit_spectrum && enclosed == 0 && sampled_max.is_finite();
    Ok(SectorialCertificate {
        theta,
        m_theta: if hit_spectrum { f64::INFINITY } else { SAFETY_FACTOR * sampled_max },
        sampled_max: if hit_spectrum { f64::INFINITY } else { sampled_max },
        sample_count: rows.iter().map(Vec::len).sum(),
        enclosed_eigenvalues: enclosed,
        verdict: if certified { Verdict::Certified } else { Verdict::Rejected },
    })
}

/// Counts eigenvalues inside `{r_min ≤ |λ| ≤ r_max, |arg λ| ≤ θ}` by the argument
/// principle applied to the sampled determinants along the annulus boundary.
fn winding_number(rows: &[Vec<Sample>]) -> i64 {
    let last = rows.len() - 1;
    let n_arc = rows[0].len();
    let mut path: Vec<Complex> = Vec::new();
    // outer arc, counter-clockwise
    path.extend(rows[last].iter().map(|s| s.det));
    // upper ray inward
    path.extend((0..last).rev().map(|i| rows[i][n_arc - 1].det));
    // inner arc, clockwise
    path.extend(rows[0].iter().rev().skip(1).map(|s| s.det));
    // lower ray outward, closing at the outer arc start
    path.extend((1..=last).map(|i| rows[i][0].det));

    let total: f64 = path.windows(2).map(|w| (w[1] / w[0]).arg()).sum();
    (total / (2.0 * PI)).round() as i64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolvent_scalar() {
        let a = ComplexMatrix::from_real_rows(&[&[-1.0]]).unwrap();
        let y = resolvent_apply(&a, Complex::new(1.0, 0.0), &ComplexVector::from_real(&[1.0])).unwrap();
        assert!((y[0] - Complex::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn resolvent_diagonal_matches_entrywise_division() {
        let a = ComplexMatrix::from_real_diag(&[-1.0, -2.0]);
        let lambda = Complex::new(0.0, 1.0);
        let y = resolvent_apply(&a, lambda, &ComplexVector::from_real(&[1.0, 1.0])).unwrap();
        assert!((y[0] - Complex::new(0.5, -0.5)).norm() < 1e-15);
        assert!((y[1] - Complex::new(0.4, -0.2)).norm() < 1e-15);
    }

    #[test]
    fn resolvent_in_spectrum() {
        let a = ComplexMatrix::from_real_diag(&[-1.0, 2.0]);
        let r = resolvent_apply(&a, Complex::new(2.0, 0.0), &ComplexVector::from_real(&[1.0, 1.0]));
        assert!(matches!(r, Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn invalid_angles() {
        let a = ComplexMatrix::from_real_diag(&[-1.0]);
        for theta in [FRAC_PI_2, PI, 0.3, 3.5] {
            assert!(matches!(certify_sectorial(&a, theta, &SampleGrid::default()), Err(Error::InvalidAngle { .. })));
        }
        let small = SampleGrid { arc_samples: 16, radii: vec![1.0] };
        assert!(certify_sectorial(&a, DEFAULT_THETA, &small).is_err());
    }

    #[test]
    fn scalar_negative_certified() {
        let a = ComplexMatrix::from_real_rows(&[&[-1.0]]).unwrap();
        let grid = SampleGrid::default();
        let cert = certify_sectorial(&a, DEFAULT_THETA, &grid).unwrap();
        assert!(cert.is_certified());
        // brute-force max of |λ|/|λ+1| over the same sample points
        let mut expected: f64 = 0.0;
        for &r in &grid.radii {
            for j in 0..grid.arc_samples {
                let l = Complex::from_polar(r, arc_angle(DEFAULT_THETA, j, grid.arc_samples));
                expected = expected.max(l.norm() / (l + 1.0).norm());
            }
        }
        assert!((cert.sampled_max - expected).abs() < 1e-8 * expected);
        assert!((cert.m_theta - 1.05 * expected).abs() < 1e-8 * expected);
        // sup over the sector is 1/sin(π - θ) = √2
        assert!(cert.sampled_max <= 2f64.sqrt() + 1e-9);
        assert!(cert.sampled_max > 1.3);
    }

    #[test]
    fn diagonal_certified() {
        let a = ComplexMatrix::from_real_diag(&[-1.0, -4.0]);
        let cert = certify_sectorial(&a, 2.0 * PI / 3.0, &SampleGrid::default()).unwrap();
        assert!(cert.is_certified());
        assert!(cert.sampled_max <= 1.0 / (PI / 3.0).sin() + 1e-9);
        assert_eq!(cert.sample_count, 151 * 128);
    }

    #[test]
    fn positive_spectrum_rejected() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap();
        let cert = certify_sectorial(&a, DEFAULT_THETA, &SampleGrid::default()).unwrap();
        assert_eq!(cert.verdict, Verdict::Rejected);
        assert_eq!(cert.enclosed_eigenvalues, 1);
        assert!(cert.sector().is_err());
    }

    #[test]
    fn sample_hitting_spectrum_rejected() {
        let a = ComplexMatrix::from_real_rows(&[&[1.0]]).unwrap();
        let grid = SampleGrid { arc_samples: 65, radii: vec![0.5, 1.0, 2.0] };
        let cert = certify_sectorial(&a, DEFAULT_THETA, &grid).unwrap();
        assert_eq!(cert.verdict, Verdict::Rejected);
        assert!(cert.m_theta.is_infinite());
    }

    #[test]
    fn refinement_never_lowers_the_max() {
        let a = ComplexMatrix::from_rows(&[
            vec![Complex::new(-1.0, 0.0), Complex::new(3.0, 0.0)],
            vec![Complex::new(0.0, 0.0), Complex::new(-2.0, 0.5)],
        ])
        .unwrap();
        let coarse = SampleGrid { arc_samples: 65, radii: SampleGrid::log_radii(1e-2, 1e2, 5) };
        let fine = SampleGrid { arc_samples: 129, radii: SampleGrid::log_radii(1e-2, 1e2, 10) };
        let c = certify_sectorial(&a, DEFAULT_THETA, &coarse).unwrap();
        let f = certify_sectorial(&a, DEFAULT_THETA, &fine).unwrap();
        assert!(c.is_certified() && f.is_certified());
        assert!(f.sampled_max >= c.sampled_max);
    }
}
