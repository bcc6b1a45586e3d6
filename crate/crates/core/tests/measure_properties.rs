use agebranch::{AgeMeasure, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ages() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), Just(1.0), 0.0..5.0f64], 0..8)
}

fn measure() -> impl Strategy<Value = AgeMeasure> {
    ages().prop_map(|a| AgeMeasure::from_ages(a).unwrap())
}

fn field() -> impl Strategy<Value = ScalarField> {
    prop_oneof![
        (0.1..3.0f64).prop_map(ScalarField::constant),
        (0.1..2.0f64, 0.1..2.0f64, 0.0..1.0f64).prop_map(|(s, r, f)| ScalarField::exp_decay(s, r, f)),
        (0.0..1.0f64, 0.1..2.0f64, 0.1..2.0f64, 0.1..2.0f64)
            .prop_map(|(a, w, from, to)| ScalarField::ramp(a, a + w, from, to)),
        (0.1..2.0f64, 0.05..1.0f64).prop_map(|(s, f)| ScalarField::rational(s, f)),
    ]
}

/// `ρ` by brute-force midpoint quadrature on [0, 40].
fn rho_numeric(a: &AgeMeasure, b: &AgeMeasure) -> f64 {
    let n = 400_000;
    let h = 40.0 / n as f64;
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) * h;
            (-x).exp() * (a.dist_fn(x) as f64 - b.dist_fn(x) as f64).abs() * h
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shift_commutes_with_integration(nu in measure(), f in field(), t in 0.0..4.0f64) {
        let shifted = nu.shift(t).unwrap();
        prop_assert_eq!(shifted.integrate(&f), nu.integrate_with(|x| f.eval(x + t)));
    }

    #[test]
    fn rho_is_a_metric(a in measure(), b in measure(), c in measure()) {
        prop_assert_eq!(a.rho_distance(&b), b.rho_distance(&a));
        prop_assert_eq!(a.rho_distance(&a), 0.0);
        prop_assert!(a.rho_distance(&c) <= a.rho_distance(&b) + b.rho_distance(&c) + 1e-12);
        if a != b {
            prop_assert!(a.rho_distance(&b) > 0.0);
        }
    }

    #[test]
    fn inverse_is_galois_dual(a in prop::collection::vec(0.0..5.0f64, 1..8), alpha in field(), y in 0.0..1.0f64) {
        let nu = AgeMeasure::from_ages(a).unwrap();
        let target = nu.integrate(&alpha) * y;
        let pick = nu.alpha_weighted_inverse(&alpha, y).unwrap();
        prop_assert!(nu.ages().contains(&pick));
        prop_assert!(nu.alpha_dist_fn(&alpha, pick) > target);
        for &z in nu.ages().iter().filter(|z| **z < pick) {
            prop_assert!(nu.alpha_dist_fn(&alpha, z) <= target);
        }
    }

    #[test]
    fn insert_then_remove_restores(nu in measure(), age in 0.0..5.0f64) {
        let mut m = nu.clone();
        m.insert(age).unwrap();
        prop_assert_eq!(m.total_mass(), nu.total_mass() + 1);
        prop_assert!(m.ages().windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(m.remove_one(age));
        prop_assert_eq!(m, nu);
    }
}

#[test]
fn rho_matches_quadrature() {
    let cases = [
        (vec![0.0], vec![]),
        (vec![0.0, 1.0, 1.0], vec![0.5, 3.0]),
        (vec![2.0, 2.5], vec![0.1, 0.2, 0.3, 4.0]),
    ];
    for (a, b) in cases {
        let (a, b) = (AgeMeasure::from_ages(a).unwrap(), AgeMeasure::from_ages(b).unwrap());
        assert!((a.rho_distance(&b) - rho_numeric(&a, &b)).abs() < 1e-8);
    }
}

#[test]
fn inverse_sampling_frequencies() {
    let alpha = ScalarField::ramp(0.0, 2.0, 0.5, 3.0);
    let measures = [
        vec![0.0, 0.0, 1.0, 2.5],
        vec![0.3, 0.7, 1.1, 1.5, 1.9],
        vec![4.0, 0.0],
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let draws = 40_000;
    for ages in measures {
        let nu = AgeMeasure::from_ages(ages).unwrap();
        let total = nu.integrate(&alpha);
        let mut atoms: Vec<f64> = nu.ages().to_vec();
        atoms.dedup();
        let mut counts = vec![0usize; atoms.len()];
        for _ in 0..draws {
            let a = nu.alpha_weighted_inverse(&alpha, rng.random::<f64>()).unwrap();
            counts[atoms.iter().position(|x| *x == a).unwrap()] += 1;
        }
        for (atom, count) in atoms.iter().zip(counts) {
            let mult = nu.ages().iter().filter(|x| *x == atom).count() as f64;
            let p = alpha.eval(*atom) * mult / total;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            let freq = count as f64 / draws as f64;
            assert!((freq - p).abs() <= 3.0 * se, "atom {atom}: {freq} vs {p}");
        }
    }
}
