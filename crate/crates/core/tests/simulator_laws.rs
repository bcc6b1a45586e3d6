use agebranch::sim::{simulate_replicate, EventKind, Termination};
use agebranch::validation::{estimate_mass_mean, Runner};
use agebranch::{
    simulate_branching, simulate_with_immigration, AgeMeasure, BranchingModel, ImmigrationMechanism, OffspringLaw,
    ScalarField, SimConfig,
};
use proptest::prelude::*;

fn model() -> impl Strategy<Value = BranchingModel> {
    let pmf = prop::collection::vec(0.05..1.0f64, 1..4).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|x| x / s).collect::<Vec<_>>()
    });
    prop_oneof![
        (0.2..2.0f64, pmf.clone())
            .prop_map(|(r, p)| BranchingModel::constant_rate(r, OffspringLaw::finite(p)).unwrap()),
        (0.2..2.0f64, 0.2..2.0f64, pmf).prop_map(|(a, b, p)| {
            BranchingModel::new(ScalarField::ramp(0.0, 1.5, a, b), OffspringLaw::finite(p)).unwrap()
        }),
    ]
}

fn immigration() -> impl Strategy<Value = Option<ImmigrationMechanism>> {
    prop_oneof![
        Just(None),
        (0.1..2.0f64, 0.0..2.0f64).prop_map(|(r, a)| Some(ImmigrationMechanism::single_immigrants(r, a).unwrap())),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mass_identity_per_trajectory(
        m in model(),
        imm in immigration(),
        ages in prop::collection::vec(0.0..2.0f64, 0..5),
        seed in any::<u64>(),
    ) {
        let mut cfg = SimConfig::new(m, AgeMeasure::from_ages(ages).unwrap(), 2.0)
            .with_seed(seed)
            .with_max_events(20_000)
            .recording_events();
        cfg.immigration = imm;
        let tr = simulate_replicate(&cfg, 0).unwrap();
        let mut mass = cfg.initial.total_mass() as i64;
        for e in &tr.event_log {
            mass += match &e.kind {
                EventKind::Branch { offspring, .. } => *offspring as i64 - 1,
                EventKind::Immigrate { group } => group.total_mass() as i64,
            };
        }
        prop_assert_eq!(mass, tr.final_state.total_mass() as i64);
        prop_assert_eq!(tr.event_log.len() as u64, tr.branch_events + tr.immigration_events);
        prop_assert!(tr.event_log.windows(2).all(|w| w[0].time <= w[1].time));
    }

    #[test]
    fn identical_seed_gives_identical_trajectory(m in model(), seed in any::<u64>(), r in 0u64..1000) {
        let cfg = SimConfig::new(m, AgeMeasure::repeated(0.0, 2).unwrap(), 1.5)
            .with_seed(seed)
            .with_uniform_snapshots(5)
            .with_max_events(20_000)
            .recording_events();
        prop_assert_eq!(simulate_replicate(&cfg, r).unwrap(), simulate_replicate(&cfg, r).unwrap());
    }

    #[test]
    fn zero_rate_immigration_reproduces_branching(m in model(), seed in any::<u64>()) {
        let cfg = SimConfig::new(m, AgeMeasure::repeated(0.5, 3).unwrap(), 1.0)
            .with_seed(seed)
            .with_max_events(20_000);
        let zero = cfg.clone().with_immigration(ImmigrationMechanism::none());
        let mut r1 = agebranch::rng::stream(seed, 0);
        let mut r2 = agebranch::rng::stream(seed, 0);
        prop_assert_eq!(
            simulate_branching(&cfg, &mut r1).unwrap(),
            simulate_with_immigration(&zero, &mut r2).unwrap()
        );
    }
}

#[test]
fn mean_growth_is_exponential_for_constant_rates() {
    let runner = Runner::new(2).unwrap();
    for (pmf, t) in [(vec![0.2, 0.3, 0.5], 1.0), (vec![0.6, 0.0, 0.4], 2.0), (vec![0.25, 0.5, 0.25], 1.5)] {
        let m = BranchingModel::constant_rate(1.3, OffspringLaw::finite(pmf)).unwrap();
        let c0 = m.constants().c0;
        let cfg = SimConfig::new(m, AgeMeasure::repeated(0.0, 5).unwrap(), t).with_seed(31);
        let est = estimate_mass_mean(&cfg, &ScalarField::constant(1.0), t, 20_000, &runner).unwrap();
        let exact = 5.0 * (c0 * t).exp();
        assert!((est.value - exact).abs() <= 3.0 * est.std_error, "{} vs {exact}", est.value);
    }
}

#[test]
fn pure_death_is_binomial() {
    // each of 100 particles survives to t = 1 independently with probability e^-1
    let m = BranchingModel::constant_rate(1.0, OffspringLaw::pure_death()).unwrap();
    let cfg = SimConfig::new(m, AgeMeasure::repeated(0.0, 100).unwrap(), 1.0).with_seed(5);
    let n = 4000;
    let samples: Vec<f64> = (0..n)
        .map(|r| simulate_replicate(&cfg, r).unwrap().final_state.total_mass() as f64)
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let p = (-1.0f64).exp();
    assert!((mean - 100.0 * p).abs() <= 3.0 * (100.0 * p * (1.0 - p) / n as f64).sqrt());
    assert!((var / (100.0 * p * (1.0 - p)) - 1.0).abs() < 0.1);
}

#[test]
fn event_cap_is_reported() {
    let m = BranchingModel::constant_rate(2.0, OffspringLaw::finite(vec![0.0, 0.0, 1.0])).unwrap();
    let cfg = SimConfig::new(m, AgeMeasure::repeated(0.0, 1).unwrap(), 10.0).with_max_events(100);
    let tr = simulate_replicate(&cfg, 0).unwrap();
    assert_eq!(tr.terminated_by, Termination::EventCap);
    assert_eq!(tr.branch_events, 100);
    assert!(tr.final_time < 10.0);
}
