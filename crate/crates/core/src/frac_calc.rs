//! Riemann–Liouville integral and Caputo derivative of sampled paths.
//!
//! Both operators work on uniform grids. The integral uses product integration
//! against a piecewise-linear interpolant; the derivative uses the L1 scheme.

use crate::error::{Error, Result};
use crate::linalg::{gamma, Complex, ComplexVector};

/// Relative slack allowed in grid spacing before a grid counts as non-uniform.
const UNIFORM_RTOL: f64 = 1e-9;

/// Below this interval-to-distance ratio the weights switch to their series form.
const SERIES_RATIO: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct SampledPath {
    grid: Vec<f64>,
    values: Vec<ComplexVector>,
}

impl SampledPath {
    pub fn new(grid: Vec<f64>, values: Vec<ComplexVector>) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::DimensionMismatch(format!("{} grid points but {} samples", grid.len(), values.len())));
        }
        if grid.len() < 2 {
            return Err(Error::GridTooShort { len: grid.len(), min: 2 });
        }
        if grid[0] != 0.0 {
            return Err(Error::precondition("sampled paths start at t = 0"));
        }
        if grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::precondition("grid must be strictly increasing"));
        }
        let dim = values[0].len();
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("samples of differing dimension".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f` on `0, h, ..., n h`.
    pub fn uniform(h: f64, steps: usize, f: impl Fn(f64) -> ComplexVector) -> Result<Self> {
        let grid: Vec<f64> = (0..=steps).map(|k| k as f64 * h).collect();
        let values = grid.iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    /// Scalar real path, convenient for tests and examples.
    pub fn scalar(h: f64, steps: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::uniform(h, steps, |t| ComplexVector::from_real(&[f(t)]))
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[ComplexVector] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    /// Uniform step, or `NonUniformGrid` naming the first offending interval.
    pub fn step(&self) -> Result<f64> {
        let n = self.grid.len() - 1;
        let h = self.grid[n] / n as f64;
        for (k, w) in self.grid.windows(2).enumerate() {
            if ((w[1] - w[0]) - h).abs() > UNIFORM_RTOL * h {
                return Err(Error::NonUniformGrid { index: k + 1 });
            }
        }
        Ok(h)
    }
}

fn binomial_series(alpha: f64, x: f64, denom: impl Fn(f64) -> f64) -> f64 {
    // sum_k C(alpha - 1, k) x^(k+1) / denom(k)
    let mut coeff = 1.0;
    let mut xp = x;
    let mut sum = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        let term = coeff * xp / denom(kf);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        coeff *= (alpha - 1.0 - kf) / (kf + 1.0);
        xp *= x;
    }
    sum
}

/// Weights `(w_a, w_b)` with
/// `∫_a^b (t - s)^(α-1) g(s) ds = w_a g(a) + w_b g(b)` for linear `g`, where `b ≤ t`.
pub fn interval_weights(t: f64, a: f64, b: f64, alpha: f64) -> (f64, f64) {
    let len = b - a;
    let d = t - b;
    if alpha == 1.0 {
        return (0.5 * len, 0.5 * len);
    }
    if d > 0.0 && len < SERIES_RATIO * d {
        let x = len / d;
        let scale = d.powf(alpha);
        let w_a = scale * binomial_series(alpha, x, |k| k + 2.0);
        let w_b = scale * binomial_series(alpha, x, |k| (k + 1.0) * (k + 2.0));
        return (w_a, w_b);
    }
    let far = d + len;
    let f0 = (far.powf(alpha) - d.powf(alpha)) / alpha;
    let f1 = (far.powf(alpha + 1.0) - d.powf(alpha + 1.0)) / (alpha + 1.0);
    ((f1 - d * f0) / len, (far * f0 - f1) / len)
}

/// Weights `w_0..=w_n` for the lag-form sum `∫_0^{nh} (nh - s)^(α-1) g(s) ds ≈ Σ w_j g(jh)`,
/// computed at `h = 1`; multiply by `h^α` for a general step.
pub fn uniform_weights(n: usize, alpha: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    let t = n as f64;
    for j in 0..n {
        let (wa, wb) = interval_weights(t, j as f64, (j + 1) as f64, alpha);
        w[j] += wa;
        w[j + 1] += wb;
    }
    w
}

fn check_alpha(alpha: f64, allow_one: bool) -> Result<()> {
    let ok = alpha > 0.0 && (alpha < 1.0 || (allow_one && alpha == 1.0));
    if ok {
        Ok(())
    } else {
        let range = if allow_one { "(0,1]" } else { "(0,1)" };
        Err(Error::precondition(format!("alpha must lie in {range}, got {alpha}")))
    }
}

/// `J^α f` on the same grid.
pub fn rl_integral(path: &SampledPath, alpha: f64) -> Result<SampledPath> {
    check_alpha(alpha, false)?;
    let h = path.step()?;
    let scale = h.powf(alpha) / gamma(alpha)?;
    let dim = path.dim();
    let mut out = Vec::with_capacity(path.len());
    out.push(ComplexVector::zeros(dim));
    for n in 1..path.len() {
        let w = uniform_weights(n, alpha);
        let mut acc = ComplexVector::zeros(dim);
        for (wj, fj) in w.iter().zip(&path.values) {
            acc.axpy(Complex::new(scale * wj, 0.0), fj);
        }
        out.push(acc);
    }
    SampledPath::new(path.grid.clone(), out)
}

/// `(k+1)^(1-α) - k^(1-α)` without cancellation for large `k`.
fn l1_coeff(k: usize, alpha: f64) -> f64 {
    let p = 1.0 - alpha;
    if k == 0 {
        return 1.0;
    }
    let kf = k as f64;
    kf.powf(p) * (p * (1.0 / kf).ln_1p()).exp_m1()
}

/// Caputo derivative `cD^α f` on the same grid. The value at `t = 0` is set to zero for
/// `α < 1`; at `α = 1` the classical derivative is returned with second-order end stencils.
pub fn caputo_derivative(path: &SampledPath, alpha: f64) -> Result<SampledPath> {
    check_alpha(alpha, true)?;
    if path.len() < 3 {
        return Err(Error::GridTooShort { len: path.len(), min: 3 });
    }
    let h = path.step()?;
    let v = &path.values;
    let dim = path.dim();
    let n_pts = path.len();

    if alpha == 1.0 {
        let c = |s: f64| Complex::new(s / (2.0 * h), 0.0);
        let mut out = Vec::with_capacity(n_pts);
        let mut first = v[0].scale(c(-3.0));
        first.axpy(c(4.0), &v[1]);
        first.axpy(c(-1.0), &v[2]);
        out.push(first);
        for k in 1..n_pts - 1 {
            let mut d = v[k + 1].scale(c(1.0));
            d.axpy(c(-1.0), &v[k - 1]);
            out.push(d);
        }
        let m = n_pts - 1;
        let mut last = v[m].scale(c(3.0));
        last.axpy(c(-4.0), &v[m - 1]);
        last.axpy(c(1.0), &v[m - 2]);
        out.push(last);
        return SampledPath::new(path.grid.clone(), out);
    }

    let b: Vec<f64> = (0..n_pts).map(|k| l1_coeff(k, alpha)).collect();
    let diffs: Vec<ComplexVector> = v.windows(2).map(|w| w[1].sub(&w[0])).collect();
    let scale = h.powf(-alpha) / gamma(2.0 - alpha)?;
    let mut out = Vec::with_capacity(n_pts);
    out.push(ComplexVector::zeros(dim));
    for n in 1..n_pts {
        let mut acc = ComplexVector::zeros(dim);
        // Σ_k b_k (f_{n-k} - f_{n-k-1})
        for k in 0..n {
            acc.axpy(Complex::new(scale * b[k], 0.0), &diffs[n - 1 - k]);
        }
        out.push(acc);
    }
    SampledPath::new(path.grid.clone(), out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn last_re(p: &SampledPath) -> f64 {
        p.values().last().unwrap()[0].re
    }

    /// Textbook closed-form L1-type weights, used as an independent check.
    fn textbook_weight(j: usize, n: usize, alpha: f64) -> f64 {
        let p = alpha + 1.0;
        let (j, n) = (j as f64, n as f64);
        let raw = if j == 0.0 {
            (n - 1.0).powf(p) - (n - alpha - 1.0) * n.powf(alpha)
        } else if j == n {
            1.0
        } else {
            (n - j + 1.0).powf(p) - 2.0 * (n - j).powf(p) + (n - j - 1.0).powf(p)
        };
        raw / (alpha * (alpha + 1.0))
    }

    #[test]
    fn weights_match_textbook_form() {
        for &alpha in &[0.3, 0.5, 0.9] {
            for &n in &[1usize, 2, 7, 40] {
                let w = uniform_weights(n, alpha);
                for (j, wj) in w.iter().enumerate() {
                    let e = textbook_weight(j, n, alpha);
                    assert!((wj - e).abs() < 1e-12 * (1.0 + e.abs()), "alpha {alpha} n {n} j {j}: {wj} vs {e}");
                }
            }
        }
    }

    #[test]
    fn series_and_direct_weights_agree_at_switch() {
        let alpha = 0.4;
        let d = 10.0;
        let below = interval_weights(d + 0.999, 0.0, 0.999, alpha);
        let direct = {
            let (len, dd) = (0.999, d);
            let far = dd + len;
            let f0 = (far.powf(alpha) - dd.powf(alpha)) / alpha;
            let f1 = (far.powf(alpha + 1.0) - dd.powf(alpha + 1.0)) / (alpha + 1.0);
            ((f1 - dd * f0) / len, (far * f0 - f1) / len)
        };
        assert!((below.0 - direct.0).abs() < 1e-13);
        assert!((below.1 - direct.1).abs() < 1e-13);
    }

    #[test]
    fn weights_sum_to_kernel_mass() {
        let alpha = 0.6;
        let n = 5000;
        let total: f64 = uniform_weights(n, alpha).iter().sum();
        let exact = (n as f64).powf(alpha) / alpha;
        assert!((total - exact).abs() < 1e-10 * exact);
    }

    #[test]
    fn rl_of_zero_is_zero() {
        let p = SampledPath::scalar(0.1, 10, |_| 0.0).unwrap();
        let j = rl_integral(&p, 0.5).unwrap();
        assert!(j.values().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rl_of_constant_and_linear() {
        let p = SampledPath::scalar(1.0 / 64.0, 64, |_| 1.0).unwrap();
        assert!((last_re(&rl_integral(&p, 0.5).unwrap()) - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-9);
        let p = SampledPath::scalar(1.0 / 64.0, 64, |t| t).unwrap();
        assert!((last_re(&rl_integral(&p, 0.5).unwrap()) - 0.7522527781).abs() < 1e-9);
    }

    #[test]
    fn caputo_examples() {
        let p = SampledPath::scalar(0.05, 20, |_| 3.0).unwrap();
        assert!(caputo_derivative(&p, 0.5).unwrap().values().iter().all(|v| v.norm() == 0.0));
        let p = SampledPath::scalar(1.0 / 64.0, 64, |t| t).unwrap();
        assert!((last_re(&caputo_derivative(&p, 0.5).unwrap()) - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-9);
        let p = SampledPath::scalar(1.0 / 64.0, 64, |t| t * t).unwrap();
        assert!((last_re(&caputo_derivative(&p, 1.0).unwrap()) - 2.0).abs() < 1e-10);
    }

    #[test]
    fn grid_errors() {
        let g = vec![0.0, 0.1, 0.25, 0.3];
        let v = vec![ComplexVector::from_real(&[1.0]); 4];
        let p = SampledPath::new(g, v).unwrap();
        assert!(matches!(rl_integral(&p, 0.5), Err(Error::NonUniformGrid { index: 2 })));
        let p = SampledPath::scalar(0.1, 1, |t| t).unwrap();
        assert!(matches!(caputo_derivative(&p, 0.5), Err(Error::GridTooShort { len: 2, min: 3 })));
        assert!(SampledPath::new(vec![0.1, 0.2], vec![ComplexVector::zeros(1); 2]).is_err());
    }

    #[test]
    fn linearity() {
        let f = SampledPath::uniform(0.02, 50, |t| {
            ComplexVector::new(vec![Complex::new(t.sin(), t), Complex::new(1.0, -t * t)]).unwrap()
        })
        .unwrap();
        let g = SampledPath::uniform(0.02, 50, |t| ComplexVector::from_real(&[t.exp(), (2.0 * t).cos()])).unwrap();
        let (a, b) = (Complex::new(2.0, -1.0), Complex::new(-0.5, 0.0));
        let combo: Vec<ComplexVector> = f
            .values()
            .iter()
            .zip(g.values())
            .map(|(x, y)| {
                let mut s = x.scale(a);
                s.axpy(b, y);
                s
            })
            .collect();
        let combo = SampledPath::new(f.grid().to_vec(), combo).unwrap();
        for op in [|p: &SampledPath| rl_integral(p, 0.4), |p: &SampledPath| caputo_derivative(p, 0.4)] {
            let lhs = op(&combo).unwrap();
            let (of, og) = (op(&f).unwrap(), op(&g).unwrap());
            for k in 0..lhs.len() {
                let mut rhs = of.values()[k].scale(a);
                rhs.axpy(b, &og.values()[k]);
                assert!(lhs.values()[k].sub(&rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
            }
        }
    }

    fn max_interior_error(h_steps: usize, alpha: f64) -> f64 {
        // D^α J^α f = f for f(0) = 0; compare on t ≥ 0.25 away from the start-up layer.
        let h = 1.0 / h_steps as f64;
        let f = |t: f64| t * t + t;
        let p = SampledPath::scalar(h, h_steps, f).unwrap();
        let back = caputo_derivative(&rl_integral(&p, alpha).unwrap(), alpha).unwrap();
        back.grid()
            .iter()
            .zip(back.values())
            .filter(|(t, _)| **t >= 0.25)
            .map(|(t, v)| (v[0].re - f(*t)).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn composition_recovers_path_at_first_order_or_better() {
        for &alpha in &[0.3, 0.5, 0.8] {
            let coarse = max_interior_error(128, alpha);
            let fine = max_interior_error(256, alpha);
            let order = (coarse / fine).log2();
            assert!(fine < 1e-2, "alpha {alpha}: error {fine}");
            assert!(order > 1.0 - 0.3, "alpha {alpha}: order {order}");
        }
    }
}
