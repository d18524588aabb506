//! Scalar Mittag-Leffler function `E_{α,β}(z) = Σ z^k / Γ(αk + β)` by its Taylor series.
//!
//! This is the independent reference for the contour code. For negative
//! arguments the partial sums cancel by roughly `exp(|z|^{1/α})`, far beyond
//! what `f64` can absorb once `α < 1/2`, so the series is summed in MPFR
//! arithmetic with a working precision sized from the largest term.

use rug::float::Round;
use rug::ops::PowAssign;
use rug::Float;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ln_gamma, Complex, ComplexMatrix};

pub const DEFAULT_SERIES_RADIUS: f64 = 30.0;
pub const MIN_TERMS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlSeriesParams {
    pub alpha: f64,
    pub beta: f64,
    pub max_terms: usize,
    pub term_tol: f64,
    pub radius: f64,
}

impl MlSeriesParams {
    pub fn new(alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, max_terms: 50_000, term_tol: 1e-18, radius: DEFAULT_SERIES_RADIUS }
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !(self.beta > 0.0) {
            return Err(Error::precondition(format!(
                "series needs alpha > 0 and beta > 0, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if self.max_terms < MIN_TERMS {
            return Err(Error::precondition(format!("max_terms must be at least {MIN_TERMS}")));
        }
        if !(self.term_tol > 0.0) {
            return Err(Error::precondition("term_tol must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct BigComplex {
    re: Float,
    im: Float,
}

impl BigComplex {
    fn new(prec: u32, z: Complex) -> Self {
        Self { re: Float::with_val(prec, z.re), im: Float::with_val(prec, z.im) }
    }

    fn mul_assign(&mut self, other: &BigComplex) {
        let prec = self.re.prec();
        let re = Float::with_val(prec, &self.re * &other.re) - Float::with_val(prec, &self.im * &other.im);
        let im = Float::with_val(prec, &self.re * &other.im) + Float::with_val(prec, &self.im * &other.re);
        self.re = re;
        self.im = im;
    }

    fn abs_f64(&self) -> f64 {
        let prec = self.re.prec();
        let m = Float::with_val(prec, self.re.clone().hypot(&self.im));
        m.to_f64_round(Round::Nearest)
    }

    fn log2_abs(&self) -> f64 {
        let prec = self.re.prec();
        let m = Float::with_val(prec, self.re.clone().hypot(&self.im));
        if m.is_zero() {
            return f64::NEG_INFINITY;
        }
        m.log2().to_f64()
    }

    fn to_complex(&self) -> Complex {
        Complex::new(self.re.to_f64(), self.im.to_f64())
    }
}

/// Largest `log2 |c_k z^k / Γ(αk + β)|` over the first `max_terms` terms, and its index.
fn peak_term(params: &MlSeriesParams, z_abs: f64, weight_log: impl Fn(usize) -> f64) -> Result<(f64, usize)> {
    if z_abs == 0.0 {
        return Ok((0.0, 0));
    }
    let ln_z = z_abs.ln();
    let mut best = f64::NEG_INFINITY;
    let mut best_k = 0;
    for k in 0..params.max_terms {
        let l = k as f64 * ln_z - ln_gamma(params.alpha * k as f64 + params.beta)? + weight_log(k);
        if l > best {
            best = l;
            best_k = k;
        } else if l < best - 800.0 {
            break;
        }
    }
    Ok((best / std::f64::consts::LN_2, best_k))
}

/// `Σ_k c_k z^k / Γ(αk + β)` with `c_k = weight(k)`, starting at `k = first`.
fn sum_series(
    params: &MlSeriesParams,
    z: Complex,
    first: usize,
    weight: impl Fn(usize) -> f64,
    weight_log: impl Fn(usize) -> f64,
) -> Result<Complex> {
    params.validate()?;
    if !z.is_finite() {
        return Err(Error::precondition("series argument must be finite"));
    }
    if z.norm() > params.radius {
        return Err(Error::RadiusExceeded { modulus: z.norm(), radius: params.radius });
    }
    let (peak_bits, peak_k) = peak_term(params, z.norm(), &weight_log)?;
    let tol_bits = (-params.term_tol.log2()).ceil().max(0.0) as u32;
    let mut prec = 64 + tol_bits + peak_bits.max(0.0).ceil() as u32 + 64;

    for _ in 0..4 {
        let sum = sum_at_precision(params, z, first, &weight, peak_k, prec)?;
        let lost = peak_bits.max(0.0) - sum.log2_abs().min(peak_bits.max(0.0));
        let needed = (lost.ceil() as u32).saturating_add(64 + tol_bits);
        if needed <= prec {
            return Ok(sum.to_complex());
        }
        prec = needed + 64;
    }
    Err(Error::NoConvergence { what: "Mittag-Leffler series precision", iterations: 4 })
}

fn sum_at_precision(
    params: &MlSeriesParams,
    z: Complex,
    first: usize,
    weight: &impl Fn(usize) -> f64,
    peak_k: usize,
    prec: u32,
) -> Result<BigComplex> {
    let zb = BigComplex::new(prec, z);
    let mut power = BigComplex::new(prec, Complex::new(1.0, 0.0));
    if first > 0 {
        let mut p = zb.clone();
        for _ in 1..first {
            p.mul_assign(&zb);
        }
        power = p;
    }
    let mut sum = BigComplex::new(prec, Complex::new(0.0, 0.0));
    let mut small_run = 0;
    for k in first..params.max_terms {
        // 1/Γ(αk+β); αk + β is exact at this precision.
        let mut arg = Float::with_val(prec, params.alpha);
        arg *= k as u32;
        arg += params.beta;
        let mut inv_gamma = arg.gamma();
        inv_gamma.pow_assign(-1i32);
        inv_gamma *= weight(k);

        let term_re = Float::with_val(prec, &power.re * &inv_gamma);
        let term_im = Float::with_val(prec, &power.im * &inv_gamma);
        sum.re += &term_re;
        sum.im += &term_im;

        let term = BigComplex { re: term_re, im: term_im };
        let term_abs = term.abs_f64();
        let sum_abs = sum.abs_f64();
        if k > peak_k && term_abs <= params.term_tol * sum_abs.max(f64::MIN_POSITIVE) {
            small_run += 1;
            if small_run >= 3 {
                return Ok(sum);
            }
        } else {
            small_run = 0;
        }
        power.mul_assign(&zb);
    }
    Err(Error::NoConvergence { what: "Mittag-Leffler series", iterations: params.max_terms })
}

/// `E_{α,β}(z)`.
pub fn ml_series(params: &MlSeriesParams, z: Complex) -> Result<Complex> {
    sum_series(params, z, 0, |_| 1.0, |_| 0.0)
}

/// `d/dz E_{α,β}(z)` by the termwise-differentiated series.
pub fn ml_series_derivative(params: &MlSeriesParams, z: Complex) -> Result<Complex> {
    // Σ_{k≥1} k z^{k-1}/Γ(αk+β): shift to z^k with coefficient (k+1) against Γ(α(k+1)+β).
    let shifted = MlSeriesParams { beta: params.beta + params.alpha, ..*params };
    sum_series(&shifted, z, 0, |k| (k + 1) as f64, |k| ((k + 1) as f64).ln())
}

/// Extra scalar factor applied by [`ml_diag_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prefactor {
    None,
    /// Multiply by `t^{α-1}`, giving the mild-solution kernel `t^{α-1} E_{α,β}(d t^α)`.
    KernelPower,
}

/// `diag(E_{α,β}(d_i t^α))`, optionally times `t^{α-1}`.
pub fn ml_diag_operator(
    params: &MlSeriesParams,
    diag: &[Complex],
    t: f64,
    prefactor: Prefactor,
) -> Result<ComplexMatrix> {
    if !(t >= 0.0) {
        return Err(Error::precondition("time must be non-negative"));
    }
    let scale = t.powf(params.alpha);
    let factor = match prefactor {
        Prefactor::None => 1.0,
        Prefactor::KernelPower => {
            if t == 0.0 && params.alpha < 1.0 {
                return Err(Error::precondition("kernel prefactor is singular at t = 0"));
            }
            t.powf(params.alpha - 1.0)
        }
    };
    let values = diag.iter().map(|&d| ml_series(params, d * scale).map(|v| v * factor)).collect::<Result<Vec<_>>>()?;
    Ok(ComplexMatrix::from_diag(&values))
}
