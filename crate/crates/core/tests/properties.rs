use nalgebra::DMatrix;
use normhol_core::lie::bracket_closure;
use normhol_core::numeric::{bracket, eigh, matrix_exp, orthonormal_span};
use proptest::prelude::*;

fn square(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, n * n).prop_map(move |v| DMatrix::from_vec(n, n, v))
}

fn skew(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    square(n).prop_map(|m| (&m - m.transpose()) * 0.5)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn trace_is_eigenvalue_sum(m in square(5)) {
        let s = &m + m.transpose();
        let sum: f64 = eigh(&s, 1e-9).eigenvalues.iter().sum();
        prop_assert!((sum - s.trace()).abs() <= 1e-10 * (1.0 + s.norm()));
    }

    #[test]
    fn exponential_is_additive_along_a_line(x in skew(4), s in -2.0f64..2.0, t in -2.0f64..2.0) {
        let lhs = matrix_exp(&x, s + t).unwrap();
        let rhs = matrix_exp(&x, s).unwrap() * matrix_exp(&x, t).unwrap();
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn jacobi_identity(x in skew(4), y in skew(4), z in skew(4)) {
        let b = |a: &DMatrix<f64>, c: &DMatrix<f64>| bracket(a, c).unwrap();
        let sum = b(&x, &b(&y, &z)) + b(&y, &b(&z, &x)) + b(&z, &b(&x, &y));
        prop_assert!(sum.amax() <= 1e-12);
    }

    #[test]
    fn span_dimension_is_monotone(vs in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 6), 1..8)) {
        let vs: Vec<_> = vs.into_iter().map(nalgebra::DVector::from_vec).collect();
        let mut prev = 0;
        for k in 1..=vs.len() {
            let d = orthonormal_span(6, &vs[..k], 1e-9).unwrap().dim();
            prop_assert!(d >= prev && d <= prev + 1);
            prev = d;
        }
    }

    #[test]
    fn closure_is_idempotent(gens in prop::collection::vec(skew(4), 1..3)) {
        let once = bracket_closure(4, &gens, 6, 1e-9).unwrap();
        let twice = bracket_closure(4, once.basis(), 6, 1e-9).unwrap();
        prop_assert_eq!(once.dim(), twice.dim());
        prop_assert!(once.distance(&twice) <= 1e-8, "dims {} {} distance {}", once.dim(), twice.dim(), once.distance(&twice));
    }
}
