mod common;

use proptest::prelude::*;
use steinpp::distances::{
    cardinality, certify_lipschitz, cox_distance_bound, default_family, kr_lower_bound, kr_upper_bound_coupled,
    polish_distance, w1_counts,
};
use steinpp::geometry::tv_measures;
use steinpp::models::sample_poisson;
use steinpp::transforms::thin_config;
use steinpp::{CountDistribution, Density, Model, Space, Streams};

const N: usize = 20_000;

fn line_poisson(l: f64) -> Model {
    Model::poisson(Space::unit_box(1), Density::constant(l)).unwrap()
}

#[test]
fn poisson_intensity_gap_is_attained_by_the_count() {
    let r = kr_lower_bound(&line_poisson(1.0), &line_poisson(2.0), &[cardinality()], N, &Streams::new(1, "kr")).unwrap();
    assert!((r.value - 1.0).abs() <= 3.0 * r.stderr, "{r:?}");
    let r = kr_lower_bound(&line_poisson(1.0), &line_poisson(2.0), &default_family(&Space::unit_box(1)), N, &Streams::new(2, "kr"))
        .unwrap();
    assert!(r.value > 0.9, "{r:?}");
}

#[test]
fn thinning_and_superposition_couplings() {
    let sq = Space::unit_box(2);
    let two = Density::constant(2.0);
    let beta = Density::constant(0.3);
    let thin = |rng: &mut steinpp::StreamRng| {
        let phi = sample_poisson(&two, &sq, rng)?;
        let kept = thin_config(&phi, &beta, rng)?;
        Ok((phi, kept))
    };
    let up = kr_upper_bound_coupled(&thin, N, &Streams::new(3, "thin")).unwrap();
    assert!((up.value - 0.7 * 2.0).abs() <= 3.0 * up.stderr, "{up:?}");

    let half = Density::constant(0.5);
    let sup = |rng: &mut steinpp::StreamRng| {
        let phi = sample_poisson(&two, &sq, rng)?;
        let psi = sample_poisson(&half, &sq, rng)?;
        Ok((phi.clone(), phi.union(&psi)))
    };
    let up = kr_upper_bound_coupled(&sup, N, &Streams::new(4, "sup")).unwrap();
    assert!((up.value - 0.5).abs() <= 3.0 * up.stderr, "{up:?}");

    // A lower bound from the family never exceeds a coupling upper bound.
    let thinned = Model::poisson(sq.clone(), Density::constant(0.6)).unwrap();
    let lo = kr_lower_bound(&Model::poisson(sq.clone(), two.clone()).unwrap(), &thinned, &default_family(&sq), N, &Streams::new(5, "lo"))
        .unwrap();
    let up = kr_upper_bound_coupled(&thin, N, &Streams::new(6, "thin")).unwrap();
    assert!(lo.value <= up.value + 3.0 * (lo.stderr + up.stderr));
}

#[test]
fn polish_distance_is_weaker_than_coupled_tv() {
    let (a, b) = (line_poisson(1.0), line_poisson(1.1));
    let p = polish_distance(&a, &b, &Space::unit_box(1), N, &Streams::new(7, "polish")).unwrap();
    // Superposing an independent Poisson(0.1) couples the two at cost 0.1.
    let line = Space::unit_box(1);
    let (one, extra) = (Density::constant(1.0), Density::constant(0.1));
    let coupled = |rng: &mut steinpp::StreamRng| {
        let phi = sample_poisson(&one, &line, rng)?;
        let psi = sample_poisson(&extra, &line, rng)?;
        Ok((phi.clone(), phi.union(&psi)))
    };
    let up = kr_upper_bound_coupled(&coupled, N, &Streams::new(8, "c")).unwrap();
    assert!(p.value <= up.value + 3.0 * (p.stderr + up.stderr), "{} vs {}", p.value, up.value);
    assert!(p.value < 1.0);
    let same = polish_distance(&a, &a, &line, 2_000, &Streams::new(9, "same")).unwrap();
    assert!(same.value <= 3.0 * same.stderr + 1e-3, "{same:?}");
}

/// `W1(Bernoulli(p), Poisson(p)) = |e^{−p} − (1 − p)| + Σ_{k≥1} P(N > k) = 2(e^{−p} − 1 + p)`.
fn w1_bernoulli_poisson(p: f64) -> f64 {
    2.0 * ((-p).exp() - 1.0 + p)
}

#[test]
fn bernoulli_poisson_w1_against_closed_form() {
    for p in [0.01, 0.05, 0.1, 0.2, 0.5] {
        let w = w1_counts(&CountDistribution::bernoulli(p).unwrap(), &CountDistribution::poisson(p).unwrap());
        assert!((w - w1_bernoulli_poisson(p)).abs() < 1e-12, "{p}: {w}");
        assert!(w <= 2.0 * p * p);
    }
    let at = w1_counts(&CountDistribution::bernoulli(0.1).unwrap(), &CountDistribution::poisson(0.1).unwrap());
    assert!((at - 0.0096748).abs() < 1e-7, "{at}");
    // Total variation p(1 − e^{−p}) is the smaller 0.00952 at p = 0.1.
    let tv = 0.1 * (1.0 - (-0.1f64).exp());
    assert!((tv - 0.00952).abs() < 1e-5 && tv < at);
    assert!((w1_counts(&CountDistribution::dirac(0), &CountDistribution::poisson(1.0).unwrap()) - 1.0).abs() < 1e-12);
}

#[test]
fn cox_transport_reduces_to_measure_distance() {
    let sq = Space::unit_box(2);
    let a = Model::cox_atomic(sq.clone(), vec![(1.0, Density::constant(1.0))]).unwrap();
    let b = Model::cox_atomic(sq.clone(), vec![(1.0, Density::Affine { offset: 0.5, slope: [1.0, 0.0, 0.0] })]).unwrap();
    let direct = tv_measures(&Density::constant(1.0), &Density::Affine { offset: 0.5, slope: [1.0, 0.0, 0.0] }, &sq).unwrap();
    assert!((cox_distance_bound(&a, &b).unwrap() - direct).abs() < 1e-12);
    assert!((direct - 0.25).abs() < 1e-4);
    assert_eq!(cox_distance_bound(&a, &a).unwrap(), 0.0);
}

#[test]
fn default_family_is_one_lipschitz() {
    for space in [Space::unit_box(1), Space::unit_box(2)] {
        for f in default_family(&space) {
            assert!(certify_lipschitz(&f, &space, 500, &Streams::new(10, &f.id)).unwrap() <= 1.0);
        }
    }
}

fn table() -> impl Strategy<Value = CountDistribution> {
    prop::collection::vec(0.01f64..1.0, 1..8).prop_map(|v| {
        let s: f64 = v.iter().sum();
        CountDistribution::from_probs(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn w1_counts_is_a_metric(p in table(), q in table(), r in table()) {
        let pq = w1_counts(&p, &q);
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - w1_counts(&q, &p)).abs() < 1e-12);
        prop_assert!(w1_counts(&p, &p) == 0.0);
        prop_assert!(pq <= w1_counts(&p, &r) + w1_counts(&r, &q) + 1e-12);
        // Mean difference is a lower bound (|k| is 1-Lipschitz).
        prop_assert!((p.mean() - q.mean()).abs() <= pq + 1e-12);
    }

    #[test]
    fn identity_coupling_costs_nothing(seed in any::<u64>()) {
        let sq = Space::unit_box(2);
        let one = Density::constant(1.0);
        let same = |rng: &mut steinpp::StreamRng| {
            let phi = sample_poisson(&one, &sq, rng)?;
            Ok((phi.clone(), phi))
        };
        prop_assert_eq!(kr_upper_bound_coupled(&same, 50, &Streams::new(seed, "id")).unwrap().value, 0.0);
    }
}
