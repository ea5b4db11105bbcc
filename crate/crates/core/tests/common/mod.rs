#![allow(dead_code)]

use steinpp::dominance::gaussian_grid_kernel;
use steinpp::models::{GibbsPairwise, PairPotential};
use steinpp::{Condition, CountDistribution, Density, Model, Space};

pub fn square() -> Space {
    Space::unit_box(2)
}

pub fn poisson() -> Model {
    Model::poisson(square(), Density::constant(1.0)).unwrap()
}

pub fn prpp_geometric() -> Model {
    Model::purely_random(square(), CountDistribution::geometric(0.5).unwrap(), Density::constant(1.0)).unwrap()
}

pub fn hardcore(lambda: f64, r: f64) -> Model {
    Model::conditional(square(), Density::constant(lambda), Condition::Hardcore(r)).unwrap()
}

pub fn bounded(mx: f64, n: usize) -> Model {
    Model::conditional(square(), Density::constant(mx), Condition::Bounded(n)).unwrap()
}

pub fn gibbs() -> Model {
    let g = GibbsPairwise::new(square(), 1.0, Density::constant(0.0), PairPotential::Step { height: 0.5, range: 0.2 })
        .unwrap();
    Model::Gibbs(g)
}

pub fn dpp16() -> Model {
    Model::Dpp(gaussian_grid_kernel(4, 0.8, 0.15).unwrap())
}

/// The six families of the GNZ suite.
pub fn gnz_families() -> Vec<(&'static str, Model)> {
    vec![
        ("poisson", poisson()),
        ("prpp_geometric", prpp_geometric()),
        ("hardcore", hardcore(1.0, 0.1)),
        ("bounded", bounded(1.0, 3)),
        ("gibbs", gibbs()),
        ("dpp16", dpp16()),
    ]
}
