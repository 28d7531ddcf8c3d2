use bubbleloja::energy::*;
use bubbleloja::field::{h1_inner, Field};
use bubbleloja::lattice::{square_torus, LatticeTorus};
use bubbleloja::random::{random_field, seeded_rng};
use proptest::prelude::*;
use std::f64::consts::PI;

fn torus() -> LatticeTorus {
    square_torus(48).unwrap()
}

fn fields(seed: u64, count: usize, t: &LatticeTorus) -> Vec<Field> {
    let mut rng = seeded_rng(seed);
    (0..count)
        .map(|_| random_field(t, 3, 5.0, 1.0, &mut rng))
        .collect()
}

fn sines(t: &LatticeTorus) -> (Field, Field) {
    let a = Field::from_fn(t, 1, |x, o| o[0] = (2.0 * PI * x[0]).sin()).unwrap();
    let b = Field::from_fn(t, 1, |x, o| o[0] = (2.0 * PI * x[1]).sin()).unwrap();
    (a, b)
}

#[test]
fn zero_map_has_zero_energy() {
    let t = torus();
    let e = energy(&Field::zeros(&t, 3)).unwrap();
    assert_eq!((e.e, e.v, e.dirichlet), (0.0, 0.0, 0.0));
}

#[test]
fn energy_splits_into_dirichlet_and_volume() {
    let t = torus();
    for u in fields(1, 5, &t) {
        let e = energy(&u).unwrap();
        assert!((e.e - (e.dirichlet - 2.0 * e.v)).abs() <= 1e-10 * (1.0 + e.e.abs()));
    }
}

#[test]
fn wrong_component_count_is_rejected() {
    let t = torus();
    assert!(energy(&Field::zeros(&t, 2)).is_err());
}

#[test]
fn first_variation_matches_central_differences() {
    let t = torus();
    let fs = fields(2, 6, &t);
    let h = 1e-4;
    for pair in fs.chunks(2) {
        let (u, v) = (&pair[0], &pair[1]);
        let de = first_variation(u).unwrap().apply(v).unwrap();
        let fd = (energy(&u.axpy(h, v).unwrap()).unwrap().e
            - energy(&u.axpy(-h, v).unwrap()).unwrap().e)
            / (2.0 * h);
        let bound = 1e-6 * (1.0 + v.h1_norm().powi(3));
        assert!((de - fd).abs() <= bound, "{de} vs {fd}");
    }
}

#[test]
fn density_and_trilinear_routes_agree() {
    let t = torus();
    let fs = fields(3, 4, &t);
    for pair in fs.chunks(2) {
        let a = first_variation(&pair[0]).unwrap().apply(&pair[1]).unwrap();
        let b = first_variation_direct(&pair[0], &pair[1]).unwrap();
        assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}

#[test]
fn scaling_identity_for_cubic_energy() {
    let t = torus();
    for u in fields(4, 5, &t) {
        let e = energy(&u).unwrap().e;
        let du = first_variation(&u).unwrap().apply(&u).unwrap();
        let lhs = e - u.h1_norm().powi(2) / 6.0 - du / 3.0;
        assert!(lhs.abs() <= 1e-9 * (1.0 + e.abs()), "{lhs}");
    }
}

#[test]
fn second_variation_matches_differences_of_first() {
    let t = torus();
    let fs = fields(5, 6, &t);
    let h = 1e-4;
    for tri in fs.chunks(3) {
        let (u, w, v) = (&tri[0], &tri[1], &tri[2]);
        let d2 = second_variation(u, w, v).unwrap();
        let fd = (first_variation(&u.axpy(h, w).unwrap())
            .unwrap()
            .apply(v)
            .unwrap()
            - first_variation(&u.axpy(-h, w).unwrap())
                .unwrap()
                .apply(v)
                .unwrap())
            / (2.0 * h);
        assert!(
            (d2 - fd).abs() <= 1e-5 * d2.abs().max(fd.abs()),
            "{d2} vs {fd}"
        );
    }
}

#[test]
fn second_variation_at_zero_is_the_dirichlet_form() {
    let t = torus();
    let w = &fields(6, 1, &t)[0];
    let d2 = second_variation(&Field::zeros(&t, 3), w, w).unwrap();
    assert!((d2 - w.h1_norm().powi(2)).abs() <= 1e-12 * d2);
}

#[test]
fn jacobi_operator_at_zero_is_identity() {
    let t = torus();
    let w = &fields(7, 1, &t)[0];
    let lw = jacobi_apply(&Field::zeros(&t, 3), w).unwrap();
    assert!(lw.sub(w).unwrap().h1_norm() <= 1e-12 * w.h1_norm());
}

#[test]
fn jacobi_operator_represents_the_second_variation() {
    let t = torus();
    let fs = fields(8, 9, &t);
    for tri in fs.chunks(3) {
        let (u, w, v) = (&tri[0], &tri[1], &tri[2]);
        let lw = jacobi_apply(u, w).unwrap();
        let lv = jacobi_apply(u, v).unwrap();
        let d2 = second_variation(u, w, v).unwrap();
        let a = h1_inner(&lw, v);
        let b = h1_inner(w, &lv);
        assert!((a - d2).abs() <= 1e-8 * d2.abs().max(1.0));
        assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0));
    }
}

#[test]
fn wente_lift_of_coordinate_sines() {
    let t = torus();
    let (a, b) = sines(&t);
    let phi = wente_solve(&a, &b).unwrap();
    let want = Field::from_fn(&t, 1, |x, o| {
        o[0] = 0.5 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()
    })
    .unwrap();
    assert!(phi.sub(&want).unwrap().max_abs() < 1e-12);
    assert!(wente_solve(&a, &a).unwrap().max_abs() < 1e-14);
}

#[test]
fn wente_energy_identity_and_lower_bound() {
    let t = torus();
    let mut rng = seeded_rng(9);
    for _ in 0..10 {
        let a = random_field(&t, 1, 5.0, 1.0, &mut rng);
        let b = random_field(&t, 1, 5.0, 1.0, &mut rng);
        let a = a.scale(1.0 / a.h1_norm());
        let b = b.scale(1.0 / b.h1_norm());
        let (w, u) = wente_energy_and_lift(&a, &b).unwrap();
        let e = energy(&u).unwrap().e;
        assert!((w - 8.0 * e).abs() <= 1e-8 * w);
        assert!(w >= 32.0 * PI / 3.0);
        let du = first_variation(&u).unwrap().apply(&u).unwrap();
        assert!(du.abs() <= 1e-8 * w);
        let phi = wente_solve(&a, &b).unwrap().h1_norm();
        assert!(phi <= (3.0 / (32.0 * PI)).sqrt());
    }
}

#[test]
fn wente_energy_variation_matches_lift() {
    let t = torus();
    let mut rng = seeded_rng(10);
    let a = random_field(&t, 1, 5.0, 1.0, &mut rng);
    let b = random_field(&t, 1, 5.0, 1.0, &mut rng);
    let a = a.scale(1.0 / a.h1_norm());
    let b = b.scale(1.0 / b.h1_norm());
    let w1 = random_field(&t, 1, 5.0, 1.0, &mut rng);
    let (w, u) = wente_energy_and_lift(&a, &b).unwrap();
    let h = 1e-5;
    let fd = (wente_energy(&a.axpy(h, &w1).unwrap(), &b).unwrap()
        - wente_energy(&a.axpy(-h, &w1).unwrap(), &b).unwrap())
        / (2.0 * h);
    let zero = Field::zeros(&t, 1);
    let dir = Field::stack(&[&w1, &zero, &zero]).unwrap();
    let exact = 4.0 * w.sqrt() * first_variation(&u).unwrap().apply(&dir).unwrap();
    assert!(
        (fd - exact).abs() <= 1e-6 * fd.abs().max(1.0),
        "{fd} vs {exact}"
    );
}

#[test]
fn degenerate_pair_is_reported() {
    let t = torus();
    let (a, _) = sines(&t);
    let a = a.scale(1.0 / a.h1_norm());
    assert!(wente_energy_and_lift(&a, &a).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn cubic_term_is_odd(seed in any::<u64>()) {
        let t = square_torus(32).unwrap();
        let u = random_field(&t, 3, 4.0, 1.0, &mut seeded_rng(seed));
        let plus = energy(&u).unwrap().e;
        let minus = energy(&u.scale(-1.0)).unwrap().e;
        let d = u.h1_norm().powi(2);
        prop_assert!((plus + minus - d).abs() <= 1e-10 * (1.0 + d));
    }

    #[test]
    fn second_variation_is_symmetric(seed in any::<u64>()) {
        let t = square_torus(32).unwrap();
        let mut rng = seeded_rng(seed);
        let u = random_field(&t, 3, 4.0, 1.0, &mut rng);
        let w = random_field(&t, 3, 4.0, 1.0, &mut rng);
        let v = random_field(&t, 3, 4.0, 1.0, &mut rng);
        let a = second_variation(&u, &w, &v).unwrap();
        let b = second_variation(&u, &v, &w).unwrap();
        prop_assert!((a - b).abs() <= 1e-10 * (1.0 + a.abs()));
    }
}
