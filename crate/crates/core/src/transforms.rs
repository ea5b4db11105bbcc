//! Restriction, superposition, thinning and rescaling, on configurations and
//! on model descriptions.

use rand::Rng;

use crate::geometry::{Configuration, Density, Point, Space};
use crate::models::{Draw, Model};
use crate::{Error, Result};

/// One operation of a transform pipeline.
#[derive(Clone, Debug)]
pub enum Transform {
    /// Reduction to a region `Λ`.
    Restrict(Space),
    /// Independent superposition with further models.
    Superpose(Vec<Model>),
    /// Independent thinning with retention probability `β(x)`.
    Thin(Density),
    /// `x ↦ ε^{1/d} x`.
    Rescale(f64),
}

impl Transform {
    pub fn name(&self) -> &'static str {
        match self {
            Transform::Restrict(_) => "restrict",
            Transform::Superpose(_) => "superpose",
            Transform::Thin(_) => "thin",
            Transform::Rescale(_) => "rescale",
        }
    }
}

/// Keeps each point independently with probability `β(x)`; a point of
/// multiplicity `k` keeps a Binomial(k, β(x)) number of copies.
pub fn thin_config<R: Rng + ?Sized>(phi: &Configuration, beta: &Density, rng: &mut R) -> Result<Configuration> {
    let mut out = Configuration::new();
    for (p, m) in phi.entries() {
        let b = beta.at(p);
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!("retention probability {b} not in [0,1]")));
        }
        let kept = (0..*m).filter(|_| rng.random::<f64>() < b).count() as u32;
        out.insert_n(*p, kept);
    }
    Ok(out)
}

/// Maps every point `x ↦ ε^{1/d} x`.
pub fn rescale_config(phi: &Configuration, eps: f64, dim: usize) -> Result<Configuration> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParameter(format!("rescaling needs eps > 0, got {eps}")));
    }
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidParameter(format!("dimension {dim}")));
    }
    let f = eps.powf(1.0 / dim as f64);
    Ok(phi.map(|p| p.scaled(f)))
}

/// Multiset union of configurations from one space.
pub fn superpose_configs(list: &[Configuration]) -> Result<Configuration> {
    let mut kind: Option<bool> = None;
    let mut out = Configuration::new();
    for phi in list {
        for (p, _) in phi.entries() {
            let is_cell = matches!(p, Point::Cell { .. });
            if *kind.get_or_insert(is_cell) != is_cell {
                return Err(Error::SpaceMismatch);
            }
        }
        out = out.union(phi);
    }
    Ok(out)
}

/// Applies a transform to a labelled draw, keeping component labels.
pub fn apply<R: Rng + ?Sized>(t: &Transform, draw: Draw, dim: usize, rng: &mut R) -> Result<Draw> {
    let parts = match t {
        Transform::Restrict(region) => {
            draw.parts.iter().map(|p| p.filter(|x| region.region_contains(x))).collect()
        }
        Transform::Thin(beta) => {
            draw.parts.iter().map(|p| thin_config(p, beta, rng)).collect::<Result<Vec<_>>>()?
        }
        Transform::Rescale(eps) => {
            draw.parts.iter().map(|p| rescale_config(p, *eps, dim)).collect::<Result<Vec<_>>>()?
        }
        Transform::Superpose(models) => {
            let mut parts = draw.parts;
            for m in models {
                parts.extend(m.draw_with(rng)?.parts);
            }
            superpose_configs(&parts)?;
            parts
        }
    };
    Ok(Draw::from_parts(parts))
}

fn not_closed(m: &Model, t: &Transform) -> Error {
    Error::NotClosed(format!("{} under {}", m.family(), t.name()))
}

/// A closed-form model whose law is the law of `t` applied to `m`.
pub fn transform_model(m: &Model, t: &Transform) -> Result<Model> {
    match (m, t) {
        (Model::Transformed { base, transform }, _) => {
            let inner = transform_model(base, transform)?;
            transform_model(&inner, t)
        }
        (_, Transform::Superpose(extra)) => {
            let all_poisson_same_space = extra.iter().all(|e| match (e, m) {
                (Model::Poisson { space: s1, .. }, Model::Poisson { space: s0, .. }) => s1 == s0,
                _ => false,
            });
            if let (Model::Poisson { space, intensity }, true) = (m, all_poisson_same_space) {
                let mut total = intensity.clone();
                for e in extra {
                    if let Model::Poisson { intensity: i2, .. } = e {
                        total = total.plus(i2);
                    }
                }
                return Ok(Model::Poisson { space: space.clone(), intensity: total });
            }
            let mut list = vec![m.clone()];
            list.extend(extra.iter().cloned());
            Ok(Model::Superposition(list))
        }
        (Model::Poisson { space, intensity }, Transform::Restrict(region)) => {
            Ok(Model::Poisson { space: space.clone(), intensity: intensity.restricted_to(region) })
        }
        (Model::Poisson { space, intensity }, Transform::Thin(beta)) => {
            beta_in_unit(beta, space)?;
            Ok(Model::Poisson { space: space.clone(), intensity: intensity.times(beta) })
        }
        (Model::Poisson { space, intensity }, Transform::Rescale(eps)) => Ok(Model::Poisson {
            space: space.rescaled(*eps)?,
            intensity: intensity.rescaled(*eps, space.dim()),
        }),
        (Model::Dpp(k), Transform::Restrict(region)) => Ok(Model::Dpp(k.restricted(region)?)),
        (Model::Dpp(k), Transform::Thin(beta)) => match beta.as_constant() {
            Some(b) => Ok(Model::Dpp(k.scaled(b)?)),
            None => Err(Error::NotClosed("dpp under non-constant thinning".into())),
        },
        (Model::Dpp(k), Transform::Rescale(eps)) => Ok(Model::Dpp(k.rescaled(*eps)?)),
        (Model::Superposition(list), _) => {
            let mapped = list.iter().map(|c| transform_model(c, t)).collect::<Result<Vec<_>>>()?;
            Ok(Model::Superposition(mapped))
        }
        _ => Err(not_closed(m, t)),
    }
}

fn beta_in_unit(beta: &Density, space: &Space) -> Result<()> {
    let q = space.quadrature(space.default_resolution().min(64));
    for p in &q.nodes {
        let b = beta.at(p);
        if !(0.0..=1.0).contains(&b) {
            return Err(Error::InvalidParameter(format!("retention probability {b} not in [0,1]")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{CountDistribution, Kernel};
    use crate::rng::Streams;
    use crate::Grid;
    use nalgebra::DMatrix;

    fn ten_points() -> Configuration {
        (0..10).map(|i| Point::x(i as f64 / 10.0)).collect()
    }

    #[test]
    fn thin_extremes() {
        let phi = ten_points();
        let mut rng = Streams::new(1, "t").rng(0);
        assert_eq!(thin_config(&phi, &Density::constant(1.0), &mut rng).unwrap(), phi);
        assert!(thin_config(&phi, &Density::constant(0.0), &mut rng).unwrap().is_empty());
        assert!(thin_config(&phi, &Density::constant(1.5), &mut rng).is_err());
    }

    #[test]
    fn rescale_examples() {
        let phi = Configuration::from_points([Point::xy(1.0, 1.0)]);
        assert_eq!(rescale_config(&phi, 1.0, 2).unwrap(), phi);
        assert_eq!(rescale_config(&phi, 4.0, 2).unwrap(), Configuration::from_points([Point::xy(2.0, 2.0)]));
    }

    #[test]
    fn superpose_examples() {
        let p = Point::x(0.3);
        let phi = Configuration::from_points([p, Point::x(0.5)]);
        assert_eq!(superpose_configs(&[Configuration::new(), phi.clone()]).unwrap(), phi);
        let pp = superpose_configs(&[Configuration::from_points([p]), Configuration::from_points([p])]).unwrap();
        assert_eq!(pp.multiplicity(&p), 2);
        assert_eq!(superpose_configs(&[phi.clone(), phi.clone(), phi.clone()]).unwrap().len(), 6);
        let g = Grid::new(1, vec![[0.0; 3]], vec![1.0]).unwrap();
        let cell = Configuration::from_points([g.point(0)]);
        assert!(matches!(superpose_configs(&[phi, cell]), Err(Error::SpaceMismatch)));
    }

    #[test]
    fn poisson_closure() {
        let s = Space::unit_box(1);
        let m = Model::poisson(s.clone(), Density::constant(2.0)).unwrap();
        let thinned = transform_model(&m, &Transform::Thin(Density::constant(0.25))).unwrap();
        match thinned {
            Model::Poisson { intensity, .. } => assert_eq!(intensity.as_constant(), Some(0.5)),
            _ => panic!("not Poisson"),
        }
        let other = Model::poisson(s, Density::constant(3.0)).unwrap();
        match transform_model(&m, &Transform::Superpose(vec![other])).unwrap() {
            Model::Poisson { intensity, .. } => assert_eq!(intensity.as_constant(), Some(5.0)),
            _ => panic!("not Poisson"),
        }
    }

    #[test]
    fn dpp_thin_halves_trace() {
        let g = Grid::new(1, vec![[0.0; 3], [1.0, 0.0, 0.0]], vec![1.0, 1.0]).unwrap();
        let k = Kernel::from_real(g, &DMatrix::from_row_slice(2, 2, &[0.4, 0.2, 0.2, 0.4])).unwrap();
        let m = Model::Dpp(k);
        let Model::Dpp(half) = transform_model(&m, &Transform::Thin(Density::constant(0.5))).unwrap() else {
            panic!("not a DPP")
        };
        assert!((half.trace() - 0.4).abs() < 1e-12);
        assert!(matches!(
            transform_model(&m, &Transform::Thin(Density::from_fn(|p| p.coords()[0] * 0.5, 0.5))),
            Err(Error::NotClosed(_))
        ));
    }

    #[test]
    fn prpp_thinning_not_closed() {
        let m = Model::purely_random(
            Space::unit_box(1),
            CountDistribution::geometric(0.5).unwrap(),
            Density::constant(1.0),
        )
        .unwrap();
        assert!(matches!(
            transform_model(&m, &Transform::Thin(Density::constant(0.5))),
            Err(Error::NotClosed(_))
        ));
    }
}
