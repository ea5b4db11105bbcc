mod common;

use steinpp::distances::psi;
use steinpp::geometry::Grid;
use steinpp::models::{Deterministic, GibbsPairwise, PairPotential};
use steinpp::papangelou::evaluator;
use steinpp::stein_bounds::{
    bound_bounded, bound_conditional_mc, bound_generic, bound_gibbs, bound_hardcore, bound_kallenberg,
    bound_superposition_iid, bound_thinned_vs_cox, estimate_p_r, BallVolume,
};
use steinpp::{Condition, Configuration, Density, Model, Space, Streams};

const N: usize = 20_000;

#[test]
fn generic_bound_vanishes_for_poisson() {
    let m = common::poisson();
    let e = evaluator(&m).unwrap();
    let b = bound_generic(&Density::constant(1.0), e.as_ref(), &m, &common::square(), None, 1_000, &Streams::new(1, "g"))
        .unwrap();
    assert_eq!(b.value, 0.0);
    assert_eq!(b.stderr, 0.0);
}

#[test]
fn hardcore_generic_and_conditional_estimators_agree() {
    let m = common::hardcore(1.0, 0.1);
    let e = evaluator(&m).unwrap();
    let one = Density::constant(1.0);
    let sq = common::square();
    let g = bound_generic(&one, e.as_ref(), &m, &sq, Some(64), N, &Streams::new(2, "generic")).unwrap();
    let c = bound_conditional_mc(&one, &Condition::Hardcore(0.1), &m, &sq, 64, N, &Streams::new(3, "cond")).unwrap();
    assert!((g.value - c.value).abs() <= 3.0 * (g.stderr + c.stderr), "{} vs {}", g.value, c.value);

    let p_r = estimate_p_r(&one, &sq, 0.1, N, &Streams::new(4, "p_r")).unwrap();
    let closed = bound_hardcore(1.0, 1.0, 0.1, 2, p_r, BallVolume::Printed).unwrap();
    assert!(c.value <= closed.value + 3.0 * (c.stderr + closed.stderr), "{} vs {}", c.value, closed.value);
}

#[test]
fn bounded_conditional_estimate_matches_closed_form() {
    let m = common::bounded(1.0, 2);
    let c = bound_conditional_mc(&Density::constant(1.0), &Condition::Bounded(2), &m, &common::square(), 8, N, &Streams::new(5, "b"))
        .unwrap();
    let closed = bound_bounded(1.0, 2, None).unwrap();
    assert!((c.value - closed.value).abs() <= 3.0 * c.stderr + 1e-3, "{} vs {}", c.value, closed.value);
    assert!(bound_conditional_mc(&Density::constant(1.0), &Condition::always(), &common::poisson(), &common::square(), 8, 100, &Streams::new(5, "t"))
        .unwrap()
        .value
        == 0.0);
}

#[test]
fn gibbs_generic_bound_below_closed_form() {
    let line = Space::unit_box(1);
    let g = GibbsPairwise::new(line.clone(), 1.0, Density::constant(0.0), PairPotential::Step { height: 0.1, range: 0.2 }).unwrap();
    let m = Model::Gibbs(g);
    let e = evaluator(&m).unwrap();
    let generic = bound_generic(&Density::constant(1.0), e.as_ref(), &m, &line, None, N, &Streams::new(6, "gibbs")).unwrap();
    let closed = bound_gibbs(1.0, 1.0, 0.1).unwrap();
    assert!((closed.value - 0.1).abs() < 1e-15);
    assert!(generic.value <= closed.value + 3.0 * generic.stderr, "{} vs {}", generic.value, closed.value);
}

#[test]
fn thinned_poisson_cox_term() {
    let m = Model::poisson(Space::unit_box(1), Density::constant(1.0)).unwrap();
    let b = bound_thinned_vs_cox(&m, &Density::constant(0.1), N, &Streams::new(7, "tc")).unwrap();
    assert!((b.value - 0.02).abs() <= 3.0 * b.stderr, "{b:?}");
    let zero = bound_thinned_vs_cox(&m, &Density::constant(0.0), 100, &Streams::new(7, "tc")).unwrap();
    assert_eq!(zero.value, 0.0);
}

fn grid_space() -> Space {
    Space::Grid(Grid::regular(&[0.0, 0.0], &[1.0, 1.0], 4).unwrap())
}

#[test]
fn kallenberg_superposed_fixed_configuration() {
    // n copies of φ thinned with p = 1/n direct the same measure as φ itself.
    let space = grid_space();
    let grid = space.as_grid().unwrap().clone();
    let chosen = [0usize, 5, 10];
    let mut tab = vec![0.0; 16];
    for &i in &chosen {
        tab[i] = 16.0;
    }
    let target = Model::cox_atomic(space.clone(), vec![(1.0, Density::tabulated(tab))]).unwrap();
    for n in [2u32, 5, 10] {
        let phi = Configuration::from_entries(chosen.iter().map(|&i| (grid.point(i), n))).unwrap();
        let b = bound_kallenberg(&Deterministic(phi), &Density::constant(1.0 / n as f64), &target, 4, 50, &Streams::new(8, "k"))
            .unwrap();
        let first = 2.0 * chosen.len() as f64 / n as f64;
        assert!((b.components["thinning_term"] - first).abs() < 1e-12);
        assert!(b.components["polish_term"].abs() < 1e-12, "{:?}", b.components);
    }
}

#[test]
fn kallenberg_without_retention_measures_the_empty_process() {
    let sq = common::square();
    let target = Model::cox_atomic(sq.clone(), vec![(1.0, Density::constant(1.0))]).unwrap();
    let b = bound_kallenberg(&common::poisson(), &Density::constant(0.0), &target, 64, 100, &Streams::new(9, "k0")).unwrap();
    // Dyadic boxes in level order: 1 of area 1, 4 of 1/4, 16 of 1/16, 11 of 1/64.
    let areas: Vec<f64> = std::iter::repeat_n(1.0, 1)
        .chain(std::iter::repeat_n(0.25, 4))
        .chain(std::iter::repeat_n(1.0 / 16.0, 16))
        .chain(std::iter::repeat_n(1.0 / 64.0, 11))
        .collect();
    let lift = |a: f64| 1.0 - (-(1.0 - (-1.0f64).exp()) * a).exp();
    let oracle: f64 = areas.iter().enumerate().map(|(k, a)| 0.5f64.powi(k as i32 + 1) * psi(lift(*a))).sum();
    assert_eq!(b.components["thinning_term"], 0.0);
    assert!((b.value - oracle).abs() < 1e-12, "{} vs {oracle}", b.value);
}

#[test]
fn iid_superposition_corollary() {
    // h = 2·1{x < 1/2} on [0,1]: h(x/n) = 2 on Λ = [0,1] once n ≥ 2, so the
    // first term vanishes and the second is (2/n)·4.
    let region = Space::unit_box(1);
    for n in [2usize, 4, 8] {
        let b = bound_superposition_iid(|x| if x[0] < 0.5 { 2.0 } else { 0.0 }, 2.0, n, &region, 256).unwrap();
        assert!((b.value - 8.0 / n as f64).abs() < 1e-12, "{n}: {}", b.value);
    }
}
