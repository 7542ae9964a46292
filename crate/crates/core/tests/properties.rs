use hugevar::dists::{sample_gig, GigParams};
use hugevar::forecast::log_predictive_score;
use hugevar::layout::{Slot, VarLayout};
use hugevar::rng::stream_from_seed;
use hugevar::store::P2Quantile;
use proptest::prelude::*;

proptest! {
    #[test]
    fn layout_columns_and_slots_are_inverse(m in 1usize..30, p in 1usize..6, intercept: bool, lag_off in 0usize..6, var_off in 0usize..30) {
        let l = VarLayout::new(m, p, intercept);
        let (lag, var) = (lag_off % p + 1, var_off % m);
        prop_assert_eq!(l.slot(l.column(lag, var)), Slot::Lag { lag, var });
        prop_assert!(l.column(lag, var) < l.k());
        prop_assert_eq!(l.equation_range(m - 1).end, l.total());
    }

    #[test]
    fn gig_draws_are_positive_and_finite(lambda in -8.0f64..8.0, lr in -6.0f64..6.0, lc in -6.0f64..6.0, seed: u64) {
        let g = GigParams::new(lambda, lr.exp(), lc.exp()).unwrap();
        let mut rng = stream_from_seed(seed);
        for _ in 0..20 {
            let x = sample_gig(&g, &mut rng).unwrap();
            prop_assert!(x > 0.0 && x.is_finite());
            prop_assert!(g.log_kernel(x).is_finite());
        }
    }

    #[test]
    fn reciprocal_kernel_matches_change_of_variables(lambda in -5.0f64..5.0, rho in 0.01f64..10.0, chi in 0.01f64..10.0, x in 0.01f64..100.0) {
        // density of 1/X at y is f(1/y)/y², so kernels differ by -2 ln y
        let g = GigParams::new(lambda, rho, chi).unwrap();
        let y = 1.0 / x;
        let lhs = g.reciprocal().log_kernel(y);
        let rhs = g.log_kernel(x) - 2.0 * y.ln();
        prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn lps_is_shift_equivariant_and_bounded(l in prop::collection::vec(-500.0f64..50.0, 1..200), c in -1e3f64..1e3) {
        let s = log_predictive_score(&l).unwrap();
        let lo = l.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s >= lo - 1e-9 && s <= hi + 1e-9);
        let shifted: Vec<f64> = l.iter().map(|v| v + c).collect();
        prop_assert!((log_predictive_score(&shifted).unwrap() - (s + c)).abs() < 1e-9 * (1.0 + c.abs() + s.abs()));
    }

    #[test]
    fn p2_estimate_stays_within_the_data(xs in prop::collection::vec(-1e6f64..1e6, 5..400), p in 0.01f64..0.99) {
        let mut q = P2Quantile::new(p);
        xs.iter().for_each(|&x| q.push(x));
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let e = q.estimate();
        prop_assert!(e >= lo && e <= hi);
    }
}
