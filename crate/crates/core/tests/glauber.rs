mod common;

use steinpp::distances::{box_count, cardinality, dyadic_boxes, TestFunctional};
use steinpp::glauber::{
    stein_dirichlet, verify_commutation, verify_invariance_and_rate, verify_semigroup, verify_stationarity,
    GlauberTarget, SteinDirichletSettings,
};
use steinpp::{Configuration, Density, Point, Space, Streams};

fn target() -> GlauberTarget {
    GlauberTarget::new(Space::unit_box(2), Density::constant(1.0)).unwrap()
}

fn functionals() -> Vec<TestFunctional> {
    let quarter = dyadic_boxes(&Space::unit_box(2), 2)[1];
    vec![
        cardinality(),
        TestFunctional::new("soft_count", 1.0, |phi| 1.0 - (-(phi.len() as f64)).exp()),
        box_count("quarter", quarter),
    ]
}

fn configurations() -> Vec<Configuration> {
    vec![
        Configuration::new(),
        [Point::xy(0.1, 0.1), Point::xy(0.5, 0.5), Point::xy(0.9, 0.2)].into_iter().collect(),
        (0..6).map(|i| Point::xy(0.05 + 0.15 * i as f64, 0.3)).collect(),
    ]
}

#[test]
fn semigroup_and_commutation() {
    let g = target();
    let s = Streams::new(31, "glauber");
    for f in functionals() {
        for (i, phi) in configurations().iter().enumerate() {
            let r = verify_semigroup(&f, phi, 0.4, 0.7, &g, 20_000, &s.child(&format!("sg{i}:{}", f.id))).unwrap();
            assert!(r.pass, "{r:?}");
            let r = verify_commutation(&f, &Point::xy(0.2, 0.2), phi, 0.8, &g, 20_000, &s.child(&format!("cm{i}:{}", f.id)))
                .unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}

#[test]
fn invariance_and_rate() {
    let g = target();
    let s = Streams::new(32, "glauber");
    for (i, phi) in configurations().iter().enumerate() {
        for f in functionals() {
            for r in verify_invariance_and_rate(&f, phi, &g, 20_000, &s.child(&format!("ir{i}:{}", f.id))).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }
}

#[test]
fn stationarity_accepts_target_and_rejects_hardcore() {
    let g = target();
    let family = functionals();
    let ok = verify_stationarity(&g, &g, &family, 16, 20_000, &Streams::new(33, "stat")).unwrap();
    assert!(ok.iter().all(|r| r.pass), "{ok:?}");
    let hc = common::hardcore(5.0, 0.3);
    let bad = verify_stationarity(&hc, &g, &family, 16, 20_000, &Streams::new(34, "stat")).unwrap();
    assert!(bad.iter().any(|r| !r.pass), "{bad:?}");
}

#[test]
fn stein_dirichlet_identity() {
    let g = target();
    let settings = SteinDirichletSettings { n_samples: 10_000, ..Default::default() };
    for f in functionals() {
        for (i, phi) in configurations().iter().enumerate() {
            let r = stein_dirichlet(&f, phi, &g, settings, &Streams::new(35, &format!("sd{i}:{}", f.id))).unwrap();
            assert!(r.pass, "{r:?}");
        }
    }
}
