//! Bound-dominance pairs: each pairs a model with its Poisson or Cox target,
//! a theoretical bound and an empirical KR lower bound.

use serde::{Deserialize, Serialize};

use crate::distances::{cardinality, default_family, kr_lower_bound, TestFunctional};
use crate::geometry::{tv_measures, Configuration, Density, Grid, Point, Space};
use crate::models::kernel::{ginibre_kernel, C64};
use crate::models::{
    Alpha, Condition, CountDistribution, Deterministic, FromFn, GibbsPairwise, Kernel, Model, PairPotential,
    PointProcess,
};
use crate::rng::Streams;
use crate::stein_bounds::{
    bound_bounded, bound_dpp_thin_rescale, bound_gibbs, bound_hardcore, bound_minus1n_dpp, bound_prpp,
    bound_thinned_vs_cox, estimate_p_r, BallVolume, BoundReport,
};
use crate::transforms::{thin_config, transform_model, Transform};
use crate::{Error, Result};

fn d_ratio() -> f64 {
    0.5
}
fn d_one() -> f64 {
    1.0
}
fn d_two() -> f64 {
    2.0
}
fn d_r() -> f64 {
    0.1
}
fn d_three() -> usize {
    3
}
fn d_four() -> usize {
    4
}
fn d_scale() -> f64 {
    0.8
}
fn d_width() -> f64 {
    0.15
}
fn d_beta() -> f64 {
    0.2
}
fn d_rings() -> usize {
    5
}
fn d_height() -> f64 {
    0.5
}
fn d_range() -> f64 {
    0.2
}
fn d_p() -> f64 {
    0.1
}
fn d_points() -> usize {
    5
}

/// One model-vs-target pair with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "pair", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    /// Geometric-count PRPP on the unit square vs Poisson(M(X)).
    PrppPoisson {
        #[serde(default = "d_ratio")]
        ratio: f64,
        #[serde(default = "d_one")]
        mx: f64,
    },
    /// Hardcore Poisson on the unit square vs Poisson(λ).
    HardcorePoisson {
        #[serde(default = "d_one")]
        lambda: f64,
        #[serde(default = "d_r")]
        r: f64,
    },
    /// Bounded Poisson on the unit square vs Poisson(M(X)).
    BoundedPoisson {
        #[serde(default = "d_one")]
        mx: f64,
        #[serde(default = "d_three")]
        n: usize,
    },
    /// `(−1/n)`-DPP with a Gaussian kernel on a 4×4 grid vs Poisson with
    /// the same intensity.
    Minus1nDppPoisson {
        #[serde(default = "d_four")]
        n: usize,
        #[serde(default = "d_scale")]
        scale: f64,
        #[serde(default = "d_width")]
        width: f64,
    },
    /// Ginibre DPP on a polar grid, thinned by `β` and rescaled by `β`, vs
    /// Poisson with the same intensity.
    GinibreThinRescale {
        #[serde(default = "d_beta")]
        beta: f64,
        #[serde(default = "d_two")]
        radius: f64,
        #[serde(default = "d_rings")]
        rings: usize,
        #[serde(default = "d_one")]
        gamma: f64,
    },
    /// Pairwise Gibbs with a step potential on `[0,1]` vs Poisson(1).
    GibbsPoisson {
        #[serde(default = "d_one")]
        theta: f64,
        #[serde(default = "d_height")]
        height: f64,
        #[serde(default = "d_range")]
        range: f64,
    },
    /// `p`-thinning of a fixed configuration on a grid vs the Cox process
    /// directed by `pφ`.
    ThinnedCox {
        #[serde(default = "d_p")]
        p: f64,
        #[serde(default = "d_points")]
        points: usize,
    },
    /// Poisson(λ₁) vs Poisson(λ₂) on `[0,1]`.
    PoissonPoisson {
        #[serde(default = "d_one")]
        lambda1: f64,
        #[serde(default = "d_two")]
        lambda2: f64,
    },
    /// Bounded Poisson with `N = 0` (the empty process) vs Poisson(M(X)),
    /// where the bound is attained.
    BoundedZero {
        #[serde(default = "d_one")]
        mx: f64,
    },
}

impl PairSpec {
    /// The eight dominance pairs at their default parameters.
    pub fn suite() -> Vec<PairSpec> {
        vec![
            PairSpec::PrppPoisson { ratio: d_ratio(), mx: d_one() },
            PairSpec::HardcorePoisson { lambda: d_one(), r: d_r() },
            PairSpec::BoundedPoisson { mx: d_one(), n: d_three() },
            PairSpec::Minus1nDppPoisson { n: d_four(), scale: d_scale(), width: d_width() },
            PairSpec::GinibreThinRescale { beta: d_beta(), radius: d_two(), rings: d_rings(), gamma: d_one() },
            PairSpec::GibbsPoisson { theta: d_one(), height: d_height(), range: d_range() },
            PairSpec::ThinnedCox { p: d_p(), points: d_points() },
            PairSpec::PoissonPoisson { lambda1: d_one(), lambda2: d_two() },
        ]
    }

    pub fn id(&self) -> String {
        match self {
            PairSpec::PrppPoisson { .. } => "prpp_poisson".into(),
            PairSpec::HardcorePoisson { .. } => "hardcore_poisson".into(),
            PairSpec::BoundedPoisson { .. } => "bounded_poisson".into(),
            PairSpec::Minus1nDppPoisson { .. } => "minus1n_dpp_poisson".into(),
            PairSpec::GinibreThinRescale { .. } => "ginibre_thin_rescale".into(),
            PairSpec::GibbsPoisson { .. } => "gibbs_poisson".into(),
            PairSpec::ThinnedCox { .. } => "thinned_cox".into(),
            PairSpec::PoissonPoisson { .. } => "poisson_poisson".into(),
            PairSpec::BoundedZero { .. } => "bounded_zero".into(),
        }
    }
}

/// Monte-Carlo sizes for a dominance run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DominanceSettings {
    /// Replicas for the KR lower bound.
    pub n_kr: usize,
    /// Replicas for estimated bound ingredients.
    pub n_bound: usize,
}

impl Default for DominanceSettings {
    fn default() -> Self {
        Self { n_kr: 20_000, n_bound: 20_000 }
    }
}

/// A theoretical bound against an empirical KR lower bound.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DominanceRow {
    pub pair_id: String,
    pub bound_id: String,
    pub bound: f64,
    pub bound_stderr: f64,
    pub kr_lower: f64,
    pub kr_stderr: f64,
    pub functional: String,
    /// `bound + 3σ − kr_lower`, with σ the sum of both standard errors.
    pub margin: f64,
    pub pass: bool,
}

impl DominanceRow {
    pub fn new(pair_id: &str, bound: &BoundReport, kr: &crate::distances::EstimateReport) -> Self {
        let sigma = bound.stderr + kr.stderr;
        let margin = bound.value + 3.0 * sigma - kr.value;
        Self {
            pair_id: pair_id.into(),
            bound_id: bound.bound_id.clone(),
            bound: bound.value,
            bound_stderr: bound.stderr,
            kr_lower: kr.value,
            kr_stderr: kr.stderr,
            functional: kr.detail.clone(),
            margin,
            pass: margin >= 0.0,
        }
    }
}

/// Model, target and bound of one pair, before any KR estimate.
pub struct PairSetup {
    pub model: Box<dyn PointProcess>,
    pub target: Box<dyn PointProcess>,
    pub space: Space,
    pub bound: BoundReport,
    pub family: Vec<TestFunctional>,
}

fn poisson(space: &Space, lambda: f64) -> Result<Model> {
    Model::poisson(space.clone(), Density::constant(lambda))
}

/// `K(x,y) = scale · exp(−|x−y|²/width²)` on the `per_axis × per_axis`
/// midpoint grid of the unit square.
pub fn gaussian_grid_kernel(per_axis: usize, scale: f64, width: f64) -> Result<Kernel> {
    let grid = Grid::regular(&[0.0, 0.0], &[1.0, 1.0], per_axis)?;
    Kernel::from_function(grid, |x, y| {
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        C64::new(scale * (-d2 / (width * width)).exp(), 0.0)
    })
}

/// The Poisson process with the first-order intensity of a DPP.
fn dpp_intensity_poisson(k: &Kernel) -> Result<Model> {
    let diag: Vec<f64> = (0..k.len()).map(|i| k.diagonal(i)).collect();
    Model::poisson(k.space().clone(), Density::tabulated(diag))
}

pub fn setup(spec: &PairSpec, settings: &DominanceSettings, streams: &Streams) -> Result<PairSetup> {
    let unit2 = Space::unit_box(2);
    let unit1 = Space::unit_box(1);
    Ok(match spec {
        PairSpec::PrppPoisson { ratio, mx } => {
            let counts = CountDistribution::geometric(*ratio)?;
            let model = Model::purely_random(unit2.clone(), counts.clone(), Density::constant(1.0))?;
            PairSetup {
                model: Box::new(model),
                target: Box::new(poisson(&unit2, *mx)?),
                family: default_family(&unit2),
                space: unit2,
                bound: bound_prpp(&counts, *mx)?,
            }
        }
        PairSpec::HardcorePoisson { lambda, r } => {
            let m = Density::constant(*lambda);
            let model = Model::conditional(unit2.clone(), m.clone(), Condition::Hardcore(*r))?;
            let p_r = estimate_p_r(&m, &unit2, *r, settings.n_bound, &streams.child("p_r"))?;
            PairSetup {
                model: Box::new(model),
                target: Box::new(poisson(&unit2, *lambda)?),
                family: default_family(&unit2),
                bound: bound_hardcore(*lambda, unit2.volume(), *r, 2, p_r, BallVolume::Printed)?,
                space: unit2,
            }
        }
        PairSpec::BoundedPoisson { mx, n } => bounded_setup(&unit2, *mx, *n)?,
        PairSpec::BoundedZero { mx } => {
            let mut s = bounded_setup(&unit2, *mx, 0)?;
            s.family = vec![cardinality()];
            s
        }
        PairSpec::Minus1nDppPoisson { n, scale, width } => {
            if *n == 0 {
                return Err(Error::InvalidParameter("n must be >= 1".into()));
            }
            let k = gaussian_grid_kernel(4, *scale, *width)?.with_alpha(Alpha::MinusOneOver(*n as u32))?;
            let target = dpp_intensity_poisson(&k)?;
            let space = k.space().clone();
            PairSetup {
                bound: bound_minus1n_dpp(&k, *n)?,
                family: default_family(&space),
                model: Box::new(Model::Dpp(k)),
                target: Box::new(target),
                space,
            }
        }
        PairSpec::GinibreThinRescale { beta, radius, rings, gamma } => {
            let disk = Space::disk([0.0, 0.0], *radius)?;
            let base = Model::Dpp(ginibre_kernel(*gamma, 1.0, &disk, *rings)?);
            let thinned = transform_model(&base, &Transform::Thin(Density::constant(*beta)))?;
            let model = transform_model(&thinned, &Transform::Rescale(*beta))?;
            let Model::Dpp(k) = &model else {
                return Err(Error::NotClosed("thinned and rescaled DPP".into()));
            };
            let target = dpp_intensity_poisson(k)?;
            let space = k.space().clone();
            // λ|Λ| is the mean count of the discretized process.
            let bound = bound_dpp_thin_rescale(*beta, k.trace() / space.volume(), space.volume())?;
            PairSetup { family: default_family(&space), model: Box::new(model), target: Box::new(target), space, bound }
        }
        PairSpec::GibbsPoisson { theta, height, range } => {
            let g = GibbsPairwise::new(
                unit1.clone(),
                *theta,
                Density::constant(0.0),
                PairPotential::Step { height: *height, range: *range },
            )?;
            let mx = g.activity().total_mass(&unit1)?;
            let bound = bound_gibbs(mx, *theta, g.epsilon())?;
            PairSetup {
                model: Box::new(Model::Gibbs(g)),
                target: Box::new(Model::poisson(unit1.clone(), Density::constant(1.0))?),
                family: default_family(&unit1),
                space: unit1,
                bound,
            }
        }
        PairSpec::ThinnedCox { p, points } => {
            let grid = Grid::regular(&[0.0, 0.0], &[1.0, 1.0], 4)?;
            let cells: Vec<Point> = grid.points().collect();
            let phi: Configuration = (0..*points).map(|i| cells[(i * 7) % cells.len()]).collect();
            // Density of pφ with respect to the cell weights.
            let dens: Vec<f64> = (0..grid.len())
                .map(|i| p * phi.multiplicity(&grid.point(i)) as f64 / grid.weights()[i])
                .collect();
            let space = Space::Grid(grid);
            let cox = Model::cox_atomic(space.clone(), vec![(1.0, Density::tabulated(dens))])?;
            let beta = Density::constant(*p);
            let bound = bound_thinned_vs_cox(&Deterministic(phi.clone()), &beta, 1, &streams.child("p2"))?;
            let thinned = FromFn(move |rng: &mut crate::StreamRng| thin_config(&phi, &beta, rng));
            PairSetup {
                model: Box::new(thinned),
                target: Box::new(cox),
                family: default_family(&space),
                space,
                bound,
            }
        }
        PairSpec::PoissonPoisson { lambda1, lambda2 } => {
            let (m1, m2) = (Density::constant(*lambda1), Density::constant(*lambda2));
            let value = tv_measures(&m1, &m2, &unit1)?;
            let bound = BoundReport::closed_form(
                "poisson_tv",
                value,
                serde_json::json!({ "lambda1": lambda1, "lambda2": lambda2 }),
            )?;
            PairSetup {
                model: Box::new(Model::poisson(unit1.clone(), m1)?),
                target: Box::new(Model::poisson(unit1.clone(), m2)?),
                family: default_family(&unit1),
                space: unit1,
                bound,
            }
        }
    })
}

fn bounded_setup(space: &Space, mx: f64, n: usize) -> Result<PairSetup> {
    let lambda = mx / space.volume();
    let model = Model::conditional(space.clone(), Density::constant(lambda), Condition::Bounded(n))?;
    Ok(PairSetup {
        model: Box::new(model),
        target: Box::new(poisson(space, lambda)?),
        family: default_family(space),
        space: space.clone(),
        bound: bound_bounded(mx, n, None)?,
    })
}

/// Bound and KR lower bound for one pair.
pub fn run_pair(spec: &PairSpec, settings: &DominanceSettings, streams: &Streams) -> Result<DominanceRow> {
    Ok(run_pair_report(spec, settings, streams)?.0)
}

/// Like [`run_pair`], also returning the full bound report.
pub fn run_pair_report(
    spec: &PairSpec,
    settings: &DominanceSettings,
    streams: &Streams,
) -> Result<(DominanceRow, BoundReport)> {
    let id = spec.id();
    let s = streams.child(&id);
    let setup = setup(spec, settings, &s.child("bound"))?;
    let kr = kr_lower_bound(setup.model.as_ref(), setup.target.as_ref(), &setup.family, settings.n_kr, &s.child("kr"))?;
    Ok((DominanceRow::new(&id, &setup.bound, &kr), setup.bound))
}

pub fn run_suite(specs: &[PairSpec], settings: &DominanceSettings, streams: &Streams) -> Result<Vec<DominanceRow>> {
    specs.iter().map(|p| run_pair(p, settings, streams)).collect()
}
