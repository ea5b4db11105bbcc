use steinpp::distances::{cardinality, kr_lower_bound};
use steinpp::dominance::{run_pair, run_suite, setup, DominanceSettings, PairSpec};
use steinpp::Streams;

#[test]
fn eight_pairs_are_dominated() {
    let settings = DominanceSettings::default();
    let rows = run_suite(&PairSpec::suite(), &settings, &Streams::new(20240501, "dominance")).unwrap();
    assert_eq!(rows.len(), 8);
    for r in &rows {
        eprintln!("{r:?}");
    }
    for r in &rows {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn empty_process_attains_the_bounded_bound() {
    let settings = DominanceSettings { n_kr: 100_000, n_bound: 1 };
    let streams = Streams::new(7, "tight");
    let s = setup(&PairSpec::BoundedZero { mx: 1.0 }, &settings, &streams).unwrap();
    assert!((s.bound.value - 1.0).abs() < 1e-12);
    let kr = kr_lower_bound(s.model.as_ref(), s.target.as_ref(), &[cardinality()], 100_000, &streams).unwrap();
    assert!((kr.value - 1.0).abs() <= 0.02, "{kr:?}");
}

#[test]
fn poisson_against_itself() {
    let r = run_pair(
        &PairSpec::PoissonPoisson { lambda1: 1.0, lambda2: 1.0 },
        &DominanceSettings { n_kr: 10_000, n_bound: 1 },
        &Streams::new(3, "self"),
    )
    .unwrap();
    assert_eq!(r.bound, 0.0);
    assert!(r.pass, "{r:?}");
}

#[test]
fn gibbs_bound_is_linear_in_the_potential_height() {
    let settings = DominanceSettings { n_kr: 2_000, n_bound: 1 };
    let values: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|h| {
            setup(&PairSpec::GibbsPoisson { theta: 1.0, height: *h, range: 0.2 }, &settings, &Streams::new(1, "g"))
                .unwrap()
                .bound
                .value
        })
        .collect();
    assert!((values[0] - 0.05).abs() < 1e-12 && (values[1] - 0.1).abs() < 1e-12 && (values[2] - 0.2).abs() < 1e-12);
}
