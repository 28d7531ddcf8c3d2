use bubbleloja::loj::{f_infty, f_zero, q, to_f64, ExpPair};
use proptest::prelude::*;

fn pair() -> impl Strategy<Value = ExpPair> {
    (-4i64..=4, -2i64..=2).prop_map(|(a, b)| ExpPair::new(q(a, 2), q(b, 2)))
}

fn profile(p: ExpPair, x: f64) -> f64 {
    let (a, b) = p.to_f64();
    x.powf(a) * x.ln().abs().powf(b)
}

proptest! {
    #[test]
    fn selections_commute(p in pair(), r in pair()) {
        prop_assert_eq!(f_infty(p, r), f_infty(r, p));
        prop_assert_eq!(f_zero(p, r), f_zero(r, p));
    }

    #[test]
    fn selections_are_idempotent(p in pair()) {
        prop_assert_eq!(f_infty(p, p), p);
        prop_assert_eq!(f_zero(p, p), p);
    }

    #[test]
    fn selections_associate(p in pair(), r in pair(), s in pair()) {
        prop_assert_eq!(f_infty(f_infty(p, r), s), f_infty(p, f_infty(r, s)));
        prop_assert_eq!(f_zero(f_zero(p, r), s), f_zero(p, f_zero(r, s)));
    }

    #[test]
    fn f_infty_dominates_large_arguments(p in pair(), r in pair()) {
        let d = f_infty(p, r);
        for k in 0..=20 {
            let lam = 10f64.powf(7.0 + k as f64 / 20.0);
            let sum = profile(p, lam) + profile(r, lam);
            prop_assert!(sum <= 2.0 * profile(d, lam) * (1.0 + 1e-12), "{:?} {:?} at {}", p, r, lam);
        }
    }

    #[test]
    fn f_zero_dominates_small_arguments(p in pair(), r in pair()) {
        let d = f_zero(p, r);
        for k in 0..=20 {
            let delta = 10f64.powf(-8.0 + k as f64 / 20.0);
            let sum = profile(p, delta) + profile(r, delta);
            prop_assert!(sum <= 2.0 * profile(d, delta) * (1.0 + 1e-12), "{:?} {:?} at {}", p, r, delta);
        }
    }

    #[test]
    fn selection_returns_an_input(p in pair(), r in pair()) {
        let d = f_infty(p, r);
        prop_assert!(d == p || d == r);
        prop_assert!(to_f64(d.a) >= to_f64(p.a).min(to_f64(r.a)));
    }
}
