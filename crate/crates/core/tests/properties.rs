use cocyclelab::base::{stream_rng, BasePoint, BaseSystem, ShiftMeasure};
use cocyclelab::cocycle::{torus_point, Cocycle, MatrixField};
use cocyclelab::continuity::wilson_interval;
use cocyclelab::matrix::Matrix2;
use cocyclelab::oseledets::{projective_distance, Direction};
use cocyclelab::spectrum::finite_time_exponents;
use proptest::prelude::*;

fn shift() -> BaseSystem {
    BaseSystem::full_shift(ShiftMeasure::uniform(2), 0.5).unwrap()
}

fn cat() -> BaseSystem {
    BaseSystem::torus([[2, 1], [1, 1]]).unwrap()
}

fn shift_point(seed: u64, h: usize) -> BasePoint {
    shift().sample_point(h, &mut stream_rng(seed, 0))
}

fn invertible() -> impl Strategy<Value = Matrix2> {
    (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)
        .prop_map(|(a, b, c, d)| Matrix2::new(a, b, c, d))
        .prop_filter("well conditioned", |m| m.det().abs() > 0.1)
}

fn rel_err(a: &Matrix2, b: &Matrix2) -> f64 {
    a.max_abs_diff(b) / a.norm().max(b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn shift_metric_is_an_ultrametric(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>()) {
        let sys = shift();
        let (x, y, z) = (shift_point(s1, 12), shift_point(s2, 12), shift_point(s3, 12));
        let d = |a: &BasePoint, b: &BasePoint| sys.distance(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y).max(d(&y, &z)));
    }

    #[test]
    fn torus_metric_axioms(u in prop::array::uniform6(0.0..1.0f64)) {
        let sys = cat();
        let (x, y, z) = (torus_point(u[0], u[1]), torus_point(u[2], u[3]), torus_point(u[4], u[5]));
        let d = |a: &BasePoint, b: &BasePoint| sys.distance(a, b).unwrap();
        prop_assert_eq!(d(&x, &x), 0.0);
        prop_assert_eq!(d(&x, &y), d(&y, &x));
        prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-15);
        prop_assert!(d(&x, &y) <= 0.5);
    }

    #[test]
    fn orbit_composition(seed in any::<u64>(), a in -8i64..8, b in -8i64..8, u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let sys = shift();
        let x = shift_point(seed, 20);
        prop_assert_eq!(sys.apply_f(&sys.apply_f(&x, a).unwrap(), b).unwrap(), sys.apply_f(&x, a + b).unwrap());
        let t = cat();
        let p = torus_point(u, v);
        prop_assert_eq!(t.apply_f(&t.apply_f(&p, a).unwrap(), b).unwrap(), t.apply_f(&p, a + b).unwrap());
    }

    #[test]
    fn bracket_identities(s1 in any::<u64>(), s2 in any::<u64>()) {
        let sys = shift();
        let (x, y) = (shift_point(s1, 10), shift_point(s2, 10));
        prop_assert_eq!(sys.bracket(&x, &x).unwrap(), x.clone());
        let xy = sys.bracket(&x, &y).unwrap();
        prop_assert_eq!(sys.bracket(&xy, &y).unwrap(), xy.clone());
        prop_assert_eq!(sys.bracket(&x, &xy).unwrap(), xy);
    }

    #[test]
    fn torus_bracket_fixes_diagonal(u in 0.0..1.0f64, v in 0.0..1.0f64) {
        let sys = cat();
        let x = torus_point(u, v);
        prop_assert_eq!(sys.bracket(&x, &x).unwrap(), x);
    }

    #[test]
    fn cocycle_identity(a in invertible(), b in invertible(), seed in any::<u64>(), m in -10i64..10, n in -10i64..10) {
        let sys = shift();
        let c = Cocycle::new(MatrixField::symbol_table(vec![a, b]).unwrap(), 1.0).unwrap();
        let x = shift_point(seed, 25);
        let whole = c.product(&sys, &x, m + n).unwrap();
        let fnx = sys.apply_f(&x, n).unwrap();
        let split = c.product(&sys, &fnx, m).unwrap() * c.product(&sys, &x, n).unwrap();
        prop_assert!(rel_err(&whole, &split) < 1e-9);
    }

    #[test]
    fn inverse_consistency(a in invertible(), b in invertible(), seed in any::<u64>(), n in 1i64..12) {
        let sys = shift();
        let c = Cocycle::new(MatrixField::symbol_table(vec![a, b]).unwrap(), 1.0).unwrap();
        let x = shift_point(seed, 25);
        let fwd = c.product(&sys, &x, n).unwrap();
        let back = c.product(&sys, &sys.apply_f(&x, n).unwrap(), -n).unwrap();
        prop_assert!((back * fwd).max_abs_diff(&Matrix2::IDENTITY) < 1e-9 * fwd.norm() * fwd.inverse_norm());
    }

    #[test]
    fn submultiplicative(a in invertible(), b in invertible(), seed in any::<u64>(), m in 0i64..10, n in 0i64..10) {
        let sys = shift();
        let c = Cocycle::new(MatrixField::symbol_table(vec![a, b]).unwrap(), 1.0).unwrap();
        let x = shift_point(seed, 25);
        let whole = c.product(&sys, &x, m + n).unwrap().norm();
        let parts = c.product(&sys, &sys.apply_f(&x, n).unwrap(), m).unwrap().norm() * c.product(&sys, &x, n).unwrap().norm();
        prop_assert!(whole <= parts * (1.0 + 1e-12));
    }

    #[test]
    fn determinant_conservation(a in invertible(), b in invertible(), seed in any::<u64>(), n in 1usize..200) {
        let sys = shift();
        let c = Cocycle::new(MatrixField::symbol_table(vec![a, b]).unwrap(), 1.0).unwrap();
        let x = shift_point(seed, 210);
        let (p, q) = finite_time_exponents(&c, &sys, &x, n).unwrap();
        let mut y = x.clone();
        let mut sum = 0.0;
        for _ in 0..n {
            sum += c.evaluate(&y).unwrap().det().abs().ln();
            y = sys.apply_f(&y, 1).unwrap();
        }
        prop_assert!((p + q - sum / n as f64).abs() < 1e-9);
    }

    #[test]
    fn singular_value_identities(m in invertible()) {
        let (s1, s2) = m.singular_values();
        prop_assert!(s1 >= s2 && s2 > 0.0);
        prop_assert!((s1 * s2 - m.det().abs()).abs() < 1e-12 * s1 * s1);
        prop_assert!((s1 * s1 + s2 * s2 - m.frobenius_sq()).abs() < 1e-12 * m.frobenius_sq());
        let v = Direction::from_angle(m.top_right_singular_angle()).unit_vector();
        let w = m.apply(v);
        prop_assert!((w[0].hypot(w[1]) - s1).abs() < 1e-9 * s1);
    }

    #[test]
    fn exponential_identities(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64, d in -2.0..2.0f64) {
        let m = Matrix2::new(a, b, c, d);
        let e = m.exp();
        prop_assert!((e * m.scale(-1.0).exp()).max_abs_diff(&Matrix2::IDENTITY) < 1e-10);
        prop_assert!((e.det() - m.trace().exp()).abs() < 1e-10 * m.trace().exp());
    }

    #[test]
    fn projective_metric_axioms(a in 0.0..std::f64::consts::PI, b in 0.0..std::f64::consts::PI, c in 0.0..std::f64::consts::PI) {
        let (u, v, w) = (Direction::from_angle(a), Direction::from_angle(b), Direction::from_angle(c));
        prop_assert_eq!(projective_distance(u, u), 0.0);
        prop_assert_eq!(projective_distance(u, v), projective_distance(v, u));
        prop_assert!(projective_distance(u, v) <= std::f64::consts::FRAC_PI_2);
        prop_assert!(projective_distance(u, w) <= projective_distance(u, v) + projective_distance(v, w) + 1e-15);
    }

    #[test]
    fn projective_representatives(x in -5.0..5.0f64, y in -5.0..5.0f64, k in -20i32..20) {
        prop_assume!(x.hypot(y) > 1e-6);
        let d = Direction::from_vector([x, y]);
        prop_assert_eq!(d, Direction::from_vector([-x, -y]));
        let s = 2f64.powi(k);
        prop_assert_eq!(d, Direction::from_vector([s * x, s * y]));
    }

    #[test]
    fn wilson_contains_estimate(n in 1usize..5000, frac in 0.0..=1.0f64) {
        let k = ((n as f64) * frac).round() as usize;
        let (lo, hi) = wilson_interval(k, n);
        let p = k as f64 / n as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }
}
