use frac_cauchy::contour::{ContourEvaluator, HankelContour, OperatorFamily};
use frac_cauchy::linalg::{gamma, operator_norm, Complex, ComplexMatrix, ComplexVector, Lu, PIVOT_TOL};
use frac_cauchy::sectorial::{certify_sectorial, SampleGrid, Sector, DEFAULT_THETA};
use proptest::prelude::*;

fn complex() -> impl Strategy<Value = Complex> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(re, im)| Complex::new(re, im))
}

fn matrix(n: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(complex(), n * n)
        .prop_map(move |v| ComplexMatrix::from_rows(&v.chunks(n).map(<[Complex]>::to_vec).collect::<Vec<_>>()).unwrap())
}

fn sized_matrix() -> impl Strategy<Value = ComplexMatrix> {
    (1usize..=8).prop_flat_map(matrix)
}

/// Stable matrix with well-separated negative spectrum: `D + εN` with `D` diagonal in `[-4, -0.5]`.
fn stable_matrix() -> impl Strategy<Value = ComplexMatrix> {
    (1usize..=4).prop_flat_map(|n| {
        (prop::collection::vec(-4.0..-0.5f64, n), matrix(n))
            .prop_map(|(d, noise)| ComplexMatrix::from_real_diag(&d).add(&noise.scale(Complex::new(0.05, 0.0))))
    })
}

fn sector_of(a: &ComplexMatrix) -> Sector {
    let grid = SampleGrid { arc_samples: 65, radii: SampleGrid::log_radii(1e-2, 1e2, 5) };
    let cert = certify_sectorial(a, DEFAULT_THETA, &grid).unwrap();
    assert!(cert.is_certified(), "fixture should be sectorial");
    cert.sector().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lu_residual_small(n in 1usize..=32, seed in prop::collection::vec(complex(), 32 * 32 + 32)) {
        let rows: Vec<Vec<Complex>> = (0..n)
            .map(|i| (0..n).map(|j| seed[i * 32 + j] + if i == j { Complex::new(n as f64, 0.0) } else { Complex::new(0.0, 0.0) }).collect())
            .collect();
        let m = ComplexMatrix::from_rows(&rows).unwrap();
        let b = ComplexVector::new(seed[32 * 32..32 * 32 + n].to_vec()).unwrap();
        let x = Lu::factor(&m, PIVOT_TOL).unwrap().solve(&b).unwrap();
        let r = m.matvec(&x).unwrap().sub(&b).norm_inf();
        prop_assert!(r <= 1e-12 * m.norm_inf() * x.norm_inf().max(1.0), "residual {}", r);
    }

    #[test]
    fn norm_phase_invariant(m in sized_matrix(), phi in 0.0..std::f64::consts::TAU) {
        let a = operator_norm(&m).unwrap();
        let b = operator_norm(&m.scale(Complex::from_polar(1.0, phi))).unwrap();
        prop_assert!((a - b).abs() <= 1e-8 * a.max(1e-300));
    }

    #[test]
    fn norm_between_frobenius_bounds(m in sized_matrix()) {
        let s = operator_norm(&m).unwrap();
        let f = m.norm_frobenius();
        let n = m.rows() as f64;
        prop_assert!(s <= f * (1.0 + 1e-10) && s >= f / n.sqrt() * (1.0 - 1e-8));
    }

    #[test]
    fn norm_submultiplicative(n in 1usize..=6, pair in (1usize..=6).prop_flat_map(|n| (matrix(n), matrix(n)))) {
        let _ = n;
        let (a, b) = pair;
        let ab = operator_norm(&a.matmul(&b).unwrap()).unwrap();
        prop_assert!(ab <= operator_norm(&a).unwrap() * operator_norm(&b).unwrap() * (1.0 + 1e-8) + 1e-300);
    }

    #[test]
    fn gamma_recurrence(x in 0.05..60.0f64) {
        let lhs = gamma(x + 1.0).unwrap();
        let rhs = x * gamma(x).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs());
    }

    #[test]
    fn gamma_reflection(x in 0.05..0.95f64) {
        let lhs = gamma(x).unwrap() * gamma(1.0 - x).unwrap();
        let rhs = std::f64::consts::PI / (std::f64::consts::PI * x).sin();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn semigroup_law(a in stable_matrix(), t in 0.05..2.0f64, s in 0.05..2.0f64) {
        let ev = ContourEvaluator::new(&a, &sector_of(&a), &HankelContour::default(), OperatorFamily::Semigroup).unwrap();
        let lhs = ev.eval(t).unwrap().matmul(&ev.eval(s).unwrap()).unwrap();
        let err = operator_norm(&lhs.sub(&ev.eval(t + s).unwrap())).unwrap();
        prop_assert!(err <= 1e-8, "‖T(t)T(s) - T(t+s)‖ = {}", err);
    }

    #[test]
    fn generator_residual(a in stable_matrix(), t in 0.5..2.0f64) {
        let ev = ContourEvaluator::new(&a, &sector_of(&a), &HankelContour::default(), OperatorFamily::Semigroup).unwrap();
        let x = ComplexVector::new(vec![Complex::new(1.0, 0.0); a.rows()]).unwrap();
        let at = a.matvec(&ev.eval_apply(t, &x).unwrap()).unwrap();
        let res = |h: f64| {
            let d = ev.eval_apply(t + h, &x).unwrap().sub(&ev.eval_apply(t - h, &x).unwrap());
            d.scale(Complex::new(0.5 / h, 0.0)).sub(&at).norm()
        };
        let (r1, r2) = (res(1.0 / 16.0), res(1.0 / 32.0));
        prop_assert!(r2 <= r1 / 3.0 + 1e-10, "{} -> {}", r1, r2);
    }

    #[test]
    fn contour_invariance(a in stable_matrix(), eps in 1.1..4.0f64, theta in 0.55..0.75f64, alpha in 0.3..1.0f64, t in 0.1..4.0f64) {
        let sector = sector_of(&a);
        let fam = OperatorFamily::mittag_leffler(alpha).unwrap();
        let reference = ContourEvaluator::new(&a, &sector, &HankelContour::default(), fam).unwrap().eval(t).unwrap();
        let alt = ContourEvaluator::new(&a, &sector, &HankelContour::with_geometry(eps, theta * std::f64::consts::PI), fam)
            .unwrap()
            .eval(t)
            .unwrap();
        prop_assert!(alt.sub(&reference).max_abs() <= 1e-8);
    }

    #[test]
    fn strong_continuity(a in stable_matrix(), alpha in 0.2..1.0f64) {
        let ev = ContourEvaluator::new(&a, &sector_of(&a), &HankelContour::default(), OperatorFamily::mittag_leffler(alpha).unwrap())
            .unwrap();
        let x = ComplexVector::new(vec![Complex::new(1.0, -1.0); a.rows()]).unwrap();
        let gaps: Vec<f64> = (2..=10).map(|k| ev.eval_apply(2f64.powi(-k), &x).unwrap().sub(&x).norm()).collect();
        prop_assert!(gaps.windows(2).all(|w| w[1] <= w[0]), "{:?}", gaps);
        prop_assert!(ev.eval_apply(0.0, &x).unwrap() == x);
    }

    #[test]
    fn sampled_max_grows_with_samples(a in stable_matrix()) {
        // The finer grid contains every point of the coarse one.
        let coarse = SampleGrid { arc_samples: 65, radii: SampleGrid::log_radii(1e-2, 1e2, 4) };
        let fine = SampleGrid { arc_samples: 129, radii: coarse.radii.clone() };
        let c = certify_sectorial(&a, DEFAULT_THETA, &coarse).unwrap();
        let f = certify_sectorial(&a, DEFAULT_THETA, &fine).unwrap();
        prop_assert!(f.sampled_max >= c.sampled_max * (1.0 - 1e-12));
        prop_assert!(f.sample_count > c.sample_count);
    }
}
