mod common;

use nalgebra::DMatrix;
use steinpp::dominance::gaussian_grid_kernel;
use steinpp::models::kernel::C64;
use steinpp::models::{Alpha, GibbsPairwise, PairPotential};
use steinpp::papangelou::{evaluator, exhaustive_monotonicity, pap_dpp, random_monotonicity, Labeled, Papangelou};
use steinpp::transforms::Transform;
use steinpp::{Configuration, CountDistribution, Density, Grid, Kernel, Model, Point, Space, Streams};

/// A Hermitian kernel with prescribed spectrum and pseudo-random complex
/// eigenvectors (Gram–Schmidt of a fixed matrix).
fn random_kernel(n: usize, spectrum: &[f64], seed: u64) -> Kernel {
    use rand::Rng;
    let mut rng = Streams::new(seed, "kernel").rng(0);
    let a = DMatrix::from_fn(n, n, |_, _| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let q = a.qr().q();
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(n, spectrum.iter().map(|l| C64::new(*l, 0.0))));
    let mut m = &q * d * q.adjoint();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in 0..i {
            let z = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = z;
            m[(j, i)] = z.conj();
        }
    }
    let grid = Grid::regular(&[0.0, 0.0], &[1.0, 1.0], 4).unwrap();
    Kernel::from_weighted(grid, m, Alpha::MinusOne).unwrap()
}

/// Every 16-cell α = −1 kernel used by the test suites.
pub fn sixteen_cell_kernels() -> Vec<(&'static str, Kernel)> {
    let spread: Vec<f64> = (0..16).map(|i| 0.05 + 0.06 * i as f64).collect();
    let mut projection_like = vec![0.999; 5];
    projection_like.extend(vec![0.0; 11]);
    vec![
        ("gaussian_0.8_0.15", gaussian_grid_kernel(4, 0.8, 0.15).unwrap()),
        ("gaussian_0.5_0.3", gaussian_grid_kernel(4, 0.5, 0.3).unwrap()),
        ("gaussian_thinned", gaussian_grid_kernel(4, 0.8, 0.15).unwrap().scaled(0.4).unwrap()),
        ("random_spread", random_kernel(16, &spread, 1)),
        ("random_near_projection", random_kernel(16, &projection_like, 2)),
    ]
}

#[test]
fn dpp_intensity_is_monotone_exhaustively() {
    for (name, k) in sixteen_cell_kernels() {
        let e = pap_dpp(&k);
        let rep = exhaustive_monotonicity(&e, k.grid(), 4, 1e-10);
        assert_eq!(rep.checked, 2517 * 256, "{name}");
        assert!(rep.pass(), "{name}: worst excess {:e}, witness {:?}", rep.worst_excess, rep.witness);
    }
}

#[test]
fn superposed_dpp_is_only_weakly_repulsive() {
    // (−1/2)-DPP: with labels it is weakly repulsive; the test is c(x, φ) ≤ c(x, ∅).
    let k = gaussian_grid_kernel(4, 0.8, 0.15).unwrap().with_alpha(Alpha::MinusOneOver(2)).unwrap();
    let e = pap_dpp(&k);
    let cells: Vec<Point> = k.grid().points().collect();
    for i in 0..16 {
        for j in 0..16 {
            let phi = Configuration::from_points([cells[j]]);
            assert!(e.at(&cells[i], &phi) <= e.at(&cells[i], &Configuration::new()) + 1e-10);
        }
    }
}

#[test]
fn gibbs_intensity_is_monotone_on_continuous_space() {
    let g = GibbsPairwise::new(Space::unit_box(2), 1.0, Density::constant(0.3), PairPotential::Step { height: 0.5, range: 0.2 })
        .unwrap();
    let e = evaluator(&Model::Gibbs(g)).unwrap();
    let rep = random_monotonicity(e.as_ref(), &Space::unit_box(2), 4, 20_000, 1e-10, &Streams::new(5, "gibbs-mono"));
    assert!(rep.pass(), "{rep:?}");
    assert!(rep.worst_excess <= 0.0);
}

#[test]
fn hardcore_is_monotone_and_geometric_prpp_is_not() {
    let sq = Space::unit_box(2);
    let hc = evaluator(&common::hardcore(1.0, 0.1)).unwrap();
    assert!(random_monotonicity(hc.as_ref(), &sq, 4, 20_000, 1e-10, &Streams::new(6, "hc")).pass());
    // Geometric counts: c(x, φ) = (n+1)/2 grows with |φ|.
    let pr = evaluator(&common::prpp_geometric()).unwrap();
    assert!(!random_monotonicity(pr.as_ref(), &sq, 4, 1_000, 1e-10, &Streams::new(7, "pr")).pass());
}

#[test]
fn superposition_of_weakly_repulsive_components_is_weakly_repulsive() {
    let base = Model::purely_random(Space::unit_box(2), CountDistribution::poisson(2.0).unwrap(), Density::constant(1.0)).unwrap();
    let m = Model::transformed(base, Transform::Superpose(vec![common::hardcore(1.0, 0.1), common::bounded(1.0, 2)]));
    let e = evaluator(&m).unwrap();
    let mut rng = Streams::new(8, "sup").rng(0);
    let sq = Space::unit_box(2);
    let empty = vec![Configuration::new(); 3];
    for _ in 0..2_000 {
        let d = m.draw_with(&mut rng).unwrap();
        let x = sq.uniform_point(&mut rng);
        let c = e.intensity(&x, Labeled::from(&d));
        let c0 = e.intensity(&x, Labeled::Parts { union: &Configuration::new(), parts: &empty });
        assert!(c <= c0 + 1e-10, "{c} > {c0}");
    }
}

#[test]
fn dpp_pairs_are_negatively_associated() {
    // Joint inclusion P(i, j ∈ Φ) = M_ii M_jj − |M_ij|² ≤ P(i) P(j), checked against draws.
    let k = gaussian_grid_kernel(4, 0.8, 0.15).unwrap();
    let m = k.matrix();
    let n = 40_000;
    let mut joint = vec![0usize; 256];
    let mut rng = Streams::new(9, "assoc").rng(0);
    for _ in 0..n {
        let cells = k.sample_dpp_cells(1.0, &mut rng);
        for &i in &cells {
            for &j in &cells {
                joint[i * 16 + j] += 1;
            }
        }
    }
    for i in 0..16 {
        for j in 0..16 {
            if i == j {
                continue;
            }
            let exact = m[(i, i)].re * m[(j, j)].re - m[(i, j)].norm_sqr();
            assert!(exact <= m[(i, i)].re * m[(j, j)].re + 1e-15);
            let p = joint[i * 16 + j] as f64 / n as f64;
            let se = (exact.max(1e-4) * (1.0 - exact) / n as f64).sqrt();
            assert!((p - exact).abs() <= 4.0 * se + 1e-3, "({i},{j}): {p} vs {exact}");
        }
    }
}
