mod common;

use steinpp::dominance::gaussian_grid_kernel;
use steinpp::glauber::CHI_SQUARE_LEVEL;
use steinpp::models::{ginibre_kernel, sample_conditional, sample_poisson, GibbsPairwise, PairPotential};
use steinpp::montecarlo::{mean, replicate};
use steinpp::stats::{chi_square_gof, chi_square_two_sample};
use steinpp::transforms::{rescale_config, thin_config, transform_model, Transform};
use steinpp::{Condition, Configuration, Density, Model, PointProcess, Space, Streams};

fn counts(m: &dyn PointProcess, n: usize, s: &Streams) -> Vec<usize> {
    replicate(s, n, |rng| Ok(m.sample(rng)?.len())).unwrap()
}

#[test]
fn poisson_counts_follow_the_poisson_law() {
    let m = Model::poisson(Space::unit_box(2), Density::Affine { offset: 1.0, slope: [1.0, 1.0, 0.0] }).unwrap();
    let c = counts(&m, 100_000, &Streams::new(1, "pois"));
    // M(X) = 1 + 1/2 + 1/2.
    let pmf = |k: usize| (-2.0 + k as f64 * 2f64.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();
    let chi = chi_square_gof(&c, pmf);
    assert!(chi.passes(1e-3), "{chi:?}");
}

#[test]
fn empty_bounded_process_needs_e_attempts_on_average() {
    let sq = Space::unit_box(2);
    let one = Density::constant(1.0);
    let s = Streams::new(2, "attempts");
    let att = mean(&s, 50_000, |rng| {
        let (phi, a) = sample_conditional(&one, &Condition::Bounded(0), &sq, rng, 1_000_000)?;
        assert!(phi.is_empty());
        Ok(a as f64)
    })
    .unwrap();
    assert!((att.mean - std::f64::consts::E).abs() <= 3.0 * att.stderr, "{att:?}");
}

#[test]
fn hardcore_draws_respect_the_radius() {
    let m = common::hardcore(1.0, 0.1);
    let mut rng = Streams::new(3, "hc").rng(0);
    for _ in 0..2_000 {
        let phi = m.sample(&mut rng).unwrap();
        let pts: Vec<_> = phi.iter().collect();
        for i in 0..pts.len() {
            for j in 0..i {
                assert!(pts[i].distance(pts[j]) >= 0.1);
            }
        }
    }
}

fn close_pairs(phi: &Configuration, r: f64) -> usize {
    let pts: Vec<_> = phi.iter().collect();
    (0..pts.len()).map(|i| (0..i).filter(|&j| pts[i].distance(pts[j]) < r).count()).sum()
}

#[test]
fn gibbs_interaction_depresses_close_pairs() {
    let line = Space::unit_box(1);
    let g = Model::Gibbs(GibbsPairwise::new(line.clone(), 1.0, Density::constant(0.0), PairPotential::Step { height: 0.5, range: 0.2 }).unwrap());
    let p = Model::poisson(line, Density::constant(1.0)).unwrap();
    let n = 40_000;
    let pairs = |m: &Model, label: &str| mean(&Streams::new(4, label), n, |rng| Ok(close_pairs(&m.sample(rng)?, 0.2) as f64)).unwrap();
    let (eg, ep) = (pairs(&g, "gibbs"), pairs(&p, "poisson"));
    assert!(eg.mean + 3.0 * (eg.stderr + ep.stderr) < ep.mean, "{eg:?} vs {ep:?}");
}

#[test]
fn zero_interaction_gibbs_is_poisson() {
    let sq = Space::unit_box(2);
    let g = Model::Gibbs(GibbsPairwise::new(sq.clone(), 2.0, Density::constant(0.5), PairPotential::Zero).unwrap());
    let p = Model::poisson(sq, Density::constant((-1.0f64).exp())).unwrap();
    let chi = chi_square_two_sample(&counts(&g, 40_000, &Streams::new(5, "g")), &counts(&p, 40_000, &Streams::new(5, "p")));
    assert!(chi.passes(CHI_SQUARE_LEVEL), "{chi:?}");
}

/// Sampling the closed-form transformed model and transforming base samples
/// give the same count law and the same mean box count.
#[test]
fn closed_forms_match_transformed_samples() {
    let sq = Space::unit_box(2);
    let left = Space::new_box(&[0.0, 0.0], &[0.5, 1.0]).unwrap();
    let dpp = common::dpp16();
    let cases: Vec<(Model, Transform)> = vec![
        (common::poisson(), Transform::Thin(Density::Affine { offset: 0.2, slope: [0.6, 0.0, 0.0] })),
        (common::poisson(), Transform::Restrict(left.clone())),
        (common::poisson(), Transform::Rescale(4.0)),
        (common::poisson(), Transform::Superpose(vec![Model::poisson(sq.clone(), Density::constant(0.5)).unwrap()])),
        (dpp.clone(), Transform::Thin(Density::constant(0.5))),
        (dpp.clone(), Transform::Restrict(left)),
        (dpp, Transform::Rescale(0.25)),
    ];
    for (i, (base, t)) in cases.into_iter().enumerate() {
        let closed = transform_model(&base, &t).unwrap();
        let sampled = Model::transformed(base, t);
        let s = Streams::new(6, &format!("case{i}"));
        let (a, b) = (counts(&closed, 20_000, &s.child("closed")), counts(&sampled, 20_000, &s.child("sampled")));
        let chi = chi_square_two_sample(&a, &b);
        assert!(chi.passes(CHI_SQUARE_LEVEL), "case {i}: {chi:?}");
        let space = closed.space().unwrap();
        let (lo, hi) = space.bounding_box();
        let mid = 0.5 * (lo[0] + hi[0]);
        let box_mean = |m: &Model, l: &str| mean(&s.child(l), 20_000, |rng| Ok(m.sample(rng)?.count(|p| p.coords()[0] < mid) as f64)).unwrap();
        let (x, y) = (box_mean(&closed, "bc"), box_mean(&sampled, "bs"));
        assert!((x.mean - y.mean).abs() <= 3.0 * (x.stderr + y.stderr) + 1e-3, "case {i}: {x:?} vs {y:?}");
    }
}

#[test]
fn poisson_is_invariant_under_mixing_of_two_copies() {
    let sq = Space::unit_box(2);
    let two = Density::constant(2.0);
    let t = 0.35;
    let keep_t = Density::constant(t);
    let keep_rest = Density::constant(1.0 - t);
    let mixed = replicate(&Streams::new(7, "mix"), 40_000, |rng| {
        let a = thin_config(&sample_poisson(&two, &sq, rng)?, &keep_t, rng)?;
        let b = thin_config(&sample_poisson(&two, &sq, rng)?, &keep_rest, rng)?;
        Ok(a.union(&b))
    })
    .unwrap();
    let pmf = |k: usize| (-2.0 + k as f64 * 2f64.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp();
    let c: Vec<usize> = mixed.iter().map(|p| p.len()).collect();
    assert!(chi_square_gof(&c, pmf).passes(CHI_SQUARE_LEVEL));
    let pairs: Vec<usize> = mixed.iter().map(|p| close_pairs(p, 0.1)).collect();
    let direct: Vec<usize> = replicate(&Streams::new(7, "direct"), 40_000, |rng| Ok(close_pairs(&sample_poisson(&two, &sq, rng)?, 0.1)))
        .unwrap();
    assert!(chi_square_two_sample(&pairs, &direct).passes(CHI_SQUARE_LEVEL));
}

#[test]
fn thinning_then_rescaling_keeps_the_density() {
    let sq = Space::unit_box(2);
    let lambda = Density::constant(5.0);
    let beta = 0.25;
    let b = Density::constant(beta);
    let rescaled_space = sq.rescaled(beta).unwrap();
    let per_area = mean(&Streams::new(8, "tr"), 40_000, |rng| {
        let phi = rescale_config(&thin_config(&sample_poisson(&lambda, &sq, rng)?, &b, rng)?, beta, 2)?;
        Ok(phi.len() as f64 / rescaled_space.volume())
    })
    .unwrap();
    assert!((per_area.mean - 5.0).abs() <= 3.0 * per_area.stderr, "{per_area:?}");
}

#[test]
fn ginibre_mean_count_matches_trace() {
    let disk = Space::disk([0.0, 0.0], 2.0).unwrap();
    for beta in [1.0, 0.5] {
        let k = ginibre_kernel(1.0, beta, &disk, 6).unwrap();
        let m = Model::Dpp(k.clone());
        let e = mean(&Streams::new(9, &format!("gin{beta}")), 20_000, |rng| Ok(m.sample(rng)?.len() as f64)).unwrap();
        assert!((e.mean - k.trace()).abs() <= 3.0 * e.stderr, "β = {beta}: {e:?} vs trace {}", k.trace());
    }
}

#[test]
fn seeded_draws_are_bit_identical() {
    let k = gaussian_grid_kernel(4, 0.8, 0.15).unwrap();
    for (name, m) in common::gnz_families().into_iter().chain([("dpp", Model::Dpp(k))]) {
        let a = replicate(&Streams::new(10, name), 50, |rng| m.sample(rng)).unwrap();
        let b = replicate(&Streams::new(10, name), 50, |rng| m.sample(rng)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}
