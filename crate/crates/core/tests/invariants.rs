//! Randomized structural invariants of fields and assembled operators.

use cwbnlw_core::{assemble, resonant_set, ConvolutionConfig, FourierField, LatticeIndex, OperatorKind, ProblemParams};
use proptest::prelude::*;

fn field(d: usize) -> impl Strategy<Value = FourierField> {
    prop::collection::vec((prop::collection::vec(-3i64..=3, d), -3i64..=3, -1.0f64..1.0), 1..7).prop_map(move |pairs| {
        FourierField::from_pairs(d, pairs.into_iter().map(|(m, n, v)| (LatticeIndex::new(m, n), v))).unwrap()
    })
}

fn instance() -> impl Strategy<Value = (ProblemParams, FourierField, f64)> {
    (1usize..=2).prop_flat_map(|d| {
        let m0 = if d == 1 { vec![1] } else { vec![1, 0] };
        (0.5f64..3.0, 0.0f64..0.5, 0.0f64..0.3, field(d), 0.5f64..4.0).prop_map(
            move |(rho, alpha, eps, u, lambda_sq)| {
                (ProblemParams::new(m0.clone(), rho, alpha, eps).unwrap(), u, lambda_sq)
            },
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn products_stay_even((_, u, _) in instance()) {
        let direct = ConvolutionConfig::default();
        let fft = ConvolutionConfig { fft_threshold: 0, ..Default::default() };
        let a = u.cube(&direct).unwrap();
        let b = u.cube(&fft).unwrap();
        prop_assert_eq!(a.symmetry_defect(), 0.0);
        prop_assert_eq!(b.symmetry_defect(), 0.0);
        prop_assert!(a.add_scaled(&b, -1.0).sup_norm() <= 1e-12 * a.sup_norm().max(1.0));
        prop_assert_eq!(u.square(&direct).unwrap().symmetry_defect(), 0.0);
    }

    #[test]
    fn weighted_operator_is_symmetric((params, u, lambda_sq) in instance()) {
        let t = assemble(&u, lambda_sq, &params, 4, OperatorKind::TTilde, &Default::default()).unwrap();
        let m = &t.entries;
        let scale = m.amax().max(1.0);
        prop_assert!((m - m.transpose()).amax() <= 1e-14 * scale);
    }

    #[test]
    fn operator_factors_through_weights((params, u, lambda_sq) in instance()) {
        let cfg = ConvolutionConfig::default();
        let t = assemble(&u, lambda_sq, &params, 4, OperatorKind::T, &cfg).unwrap();
        let tt = assemble(&u, lambda_sq, &params, 4, OperatorKind::TTilde, &cfg).unwrap();
        prop_assert_eq!(t.basis.sites(), tt.basis.sites());
        for (i, xi) in t.basis.sites().iter().enumerate() {
            let w = params.weight(&xi.m);
            for j in 0..t.size() {
                let want = w * tt.entries[(i, j)];
                prop_assert!((t.entries[(i, j)] - want).abs() <= 1e-13 * want.abs().max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn projections_partition((params, u, _) in instance(), n in 1i64..6) {
        let s = resonant_set(&params);
        let p = u.project_p(&s);
        let q = u.project_q(&s);
        prop_assert_eq!(p.len() + q.len(), u.len());
        prop_assert_eq!(p.add_scaled(&q, 1.0), u.clone());
        prop_assert_eq!(u.project_n(&s, n), u.project_ball(n).project_p(&s));
        let inside = u.project_ball(n);
        let outside = u.filter(|xi| xi.one_norm() >= n);
        prop_assert_eq!(inside.len() + outside.len(), u.len());
        prop_assert_eq!(p.symmetry_defect(), 0.0);
        prop_assert_eq!(q.symmetry_defect(), 0.0);
    }
}
