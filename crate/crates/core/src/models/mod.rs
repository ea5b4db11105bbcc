//! Point-process families and their exact samplers.

pub mod counts;
pub mod kernel;

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

pub use counts::{CountDistribution, CountLaw};
pub use kernel::{ginibre_kernel, ginibre_value, Alpha, Kernel};

use crate::geometry::{Configuration, Density, Point, Space};
use crate::rng::StreamRng;
use crate::transforms::{self, Transform};
use crate::{Error, Result};

/// Default cap on rejection-sampling attempts.
pub const DEFAULT_MAX_ATTEMPTS: u64 = 1_000_000;

/// A realization together with the component each point came from.
///
/// `parts` has one entry per independent component of a superposition and a
/// single entry otherwise; `union` is their multiset sum.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Draw {
    pub parts: Vec<Configuration>,
    pub union: Configuration,
}

impl Draw {
    pub fn single(config: Configuration) -> Self {
        Self { parts: vec![config.clone()], union: config }
    }

    pub fn from_parts(parts: Vec<Configuration>) -> Self {
        let mut union = Configuration::new();
        for p in &parts {
            union = union.union(p);
        }
        Self { parts, union }
    }
}

/// Anything that can produce independent realizations.
pub trait PointProcess: Send + Sync {
    fn draw(&self, rng: &mut StreamRng) -> Result<Draw>;

    fn sample(&self, rng: &mut StreamRng) -> Result<Configuration> {
        Ok(self.draw(rng)?.union)
    }
}

/// Adapts a closure into a [`PointProcess`].
pub struct FromFn<F>(pub F);

impl<F> PointProcess for FromFn<F>
where
    F: Fn(&mut StreamRng) -> Result<Configuration> + Send + Sync,
{
    fn draw(&self, rng: &mut StreamRng) -> Result<Draw> {
        Ok(Draw::single((self.0)(rng)?))
    }
}

/// The almost surely constant process.
pub struct Deterministic(pub Configuration);

impl PointProcess for Deterministic {
    fn draw(&self, _rng: &mut StreamRng) -> Result<Draw> {
        Ok(Draw::single(self.0.clone()))
    }
}

type Predicate = Arc<dyn Fn(&Configuration) -> bool + Send + Sync>;

/// The conditioning set `C` of a conditional Poisson process.
#[derive(Clone)]
pub enum Condition {
    /// All pairwise distances at least `R`.
    Hardcore(f64),
    /// At most `N` points.
    Bounded(usize),
    Custom { name: String, decreasing: bool, predicate: Predicate },
}

impl fmt::Debug for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Condition::Hardcore(r) => write!(f, "Hardcore({r})"),
            Condition::Bounded(n) => write!(f, "Bounded({n})"),
            Condition::Custom { name, decreasing, .. } => {
                write!(f, "Custom({name}, decreasing = {decreasing})")
            }
        }
    }
}

impl Condition {
    pub fn custom<F>(name: &str, decreasing: bool, predicate: F) -> Self
    where
        F: Fn(&Configuration) -> bool + Send + Sync + 'static,
    {
        Condition::Custom { name: name.to_string(), decreasing, predicate: Arc::new(predicate) }
    }

    pub fn always() -> Self {
        Self::custom("always", true, |_| true)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Condition::Hardcore(r) if !(r.is_finite() && *r > 0.0) => {
                Err(Error::InvalidParameter(format!("hardcore radius {r}")))
            }
            _ => Ok(()),
        }
    }

    /// `φ ∈ C`.
    pub fn holds(&self, phi: &Configuration) -> bool {
        match self {
            Condition::Hardcore(r) => {
                let e = phi.entries();
                if e.iter().any(|(_, m)| *m > 1) {
                    return false;
                }
                for i in 0..e.len() {
                    for j in 0..i {
                        if e[i].0.distance(&e[j].0) < *r {
                            return false;
                        }
                    }
                }
                true
            }
            Condition::Bounded(n) => phi.len() <= *n,
            Condition::Custom { predicate, .. } => predicate(phi),
        }
    }

    /// `φ + x ∈ C`.
    pub fn holds_with(&self, phi: &Configuration, x: &Point) -> bool {
        match self {
            Condition::Hardcore(r) => {
                self.holds(phi) && phi.entries().iter().all(|(y, _)| y != x && y.distance(x) >= *r)
            }
            Condition::Bounded(n) => phi.len() < *n,
            Condition::Custom { predicate, .. } => predicate(&phi.with(*x)),
        }
    }

    /// Whether removing a point can never leave `C`.
    pub fn is_decreasing(&self) -> bool {
        match self {
            Condition::Hardcore(_) | Condition::Bounded(_) => true,
            Condition::Custom { decreasing, .. } => *decreasing,
        }
    }
}

/// Symmetric nonnegative pair potential `Ψ₂`.
#[derive(Clone)]
pub enum PairPotential {
    Zero,
    /// `height · 1{|x − y| < range}`.
    Step { height: f64, range: f64 },
    Function { f: Arc<dyn Fn(&Point, &Point) -> f64 + Send + Sync>, sup: f64 },
}

impl fmt::Debug for PairPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairPotential::Zero => write!(f, "Zero"),
            PairPotential::Step { height, range } => write!(f, "Step({height}, {range})"),
            PairPotential::Function { sup, .. } => write!(f, "Function(sup = {sup})"),
        }
    }
}

impl PairPotential {
    pub fn at(&self, x: &Point, y: &Point) -> f64 {
        match self {
            PairPotential::Zero => 0.0,
            PairPotential::Step { height, range } => {
                if x.distance(y) < *range {
                    *height
                } else {
                    0.0
                }
            }
            PairPotential::Function { f, .. } => f(x, y),
        }
    }

    /// `ε = sup Ψ₂`.
    pub fn sup(&self) -> f64 {
        match self {
            PairPotential::Zero => 0.0,
            PairPotential::Step { height, .. } => *height,
            PairPotential::Function { sup, .. } => *sup,
        }
    }
}

/// Pairwise Gibbs process with Janossy density proportional to
/// `exp(−θ(Σ Ψ₁(x_i) + Σ_{i<j} Ψ₂(x_i, x_j)))`.
#[derive(Clone, Debug)]
pub struct GibbsPairwise {
    pub space: Space,
    pub theta: f64,
    pub psi1: Density,
    pub psi2: PairPotential,
    pub max_attempts: u64,
}

impl GibbsPairwise {
    pub fn new(space: Space, theta: f64, psi1: Density, psi2: PairPotential) -> Result<Self> {
        if !(theta.is_finite() && theta > 0.0) {
            return Err(Error::InvalidParameter(format!("Gibbs temperature {theta}")));
        }
        let eps = psi2.sup();
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidParameter(format!("pair potential bound {eps}")));
        }
        if let PairPotential::Step { height, range } = psi2 {
            if height < 0.0 || range < 0.0 {
                return Err(Error::InvalidParameter("step potential must be nonnegative".into()));
            }
        }
        psi1.validate(&space)?;
        Ok(Self { space, theta, psi1, psi2, max_attempts: DEFAULT_MAX_ATTEMPTS })
    }

    /// `Ψ₂` upper bound `ε`.
    pub fn epsilon(&self) -> f64 {
        self.psi2.sup()
    }

    /// Density `e^{−θΨ₁}` of the reference Poisson process.
    pub fn activity(&self) -> Density {
        let psi1 = self.psi1.clone();
        let theta = self.theta;
        match psi1.as_constant() {
            Some(c) => Density::constant((-theta * c).exp()),
            None => Density::from_fn(move |x| (-theta * psi1.at(x)).exp(), 1.0),
        }
    }

    /// `Σ_{i<j} Ψ₂(x_i, x_j)` with multiplicities.
    pub fn interaction(&self, phi: &Configuration) -> f64 {
        let e = phi.entries();
        let mut u = 0.0;
        for i in 0..e.len() {
            let (x, m) = (&e[i].0, e[i].1 as f64);
            u += 0.5 * m * (m - 1.0) * self.psi2.at(x, x);
            for (y, k) in &e[..i] {
                u += m * *k as f64 * self.psi2.at(x, y);
            }
        }
        u
    }

    /// Total energy `U(φ)`.
    pub fn energy(&self, phi: &Configuration) -> f64 {
        let single: f64 = phi.entries().iter().map(|(x, m)| *m as f64 * self.psi1.at(x)).sum();
        single + self.interaction(phi)
    }
}

/// Tagged description of a point-process law.
#[derive(Clone, Debug)]
pub enum Model {
    Poisson { space: Space, intensity: Density },
    Binomial { space: Space, n: usize, density: Density },
    PurelyRandom { space: Space, counts: CountDistribution, density: Density },
    Conditional { space: Space, intensity: Density, condition: Condition, max_attempts: u64 },
    Gibbs(GibbsPairwise),
    Dpp(Kernel),
    /// Cox process directed by `M_j` with probability `w_j`.
    CoxAtomic { space: Space, atoms: Vec<(f64, Density)> },
    Superposition(Vec<Model>),
    Transformed { base: Box<Model>, transform: Transform },
}

impl Model {
    pub fn poisson(space: Space, intensity: Density) -> Result<Self> {
        intensity.validate(&space)?;
        intensity.total_mass(&space)?;
        Ok(Model::Poisson { space, intensity })
    }

    pub fn binomial(space: Space, n: usize, density: Density) -> Result<Self> {
        check_probability_density(&density, &space)?;
        Ok(Model::Binomial { space, n, density })
    }

    pub fn purely_random(space: Space, counts: CountDistribution, density: Density) -> Result<Self> {
        check_probability_density(&density, &space)?;
        Ok(Model::PurelyRandom { space, counts, density })
    }

    pub fn conditional(space: Space, intensity: Density, condition: Condition) -> Result<Self> {
        intensity.validate(&space)?;
        condition.validate()?;
        Ok(Model::Conditional { space, intensity, condition, max_attempts: DEFAULT_MAX_ATTEMPTS })
    }

    pub fn cox_atomic(space: Space, atoms: Vec<(f64, Density)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidParameter("Cox directing law needs at least one atom".into()));
        }
        let total: f64 = atoms.iter().map(|(w, _)| *w).sum();
        if atoms.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("Cox atom weights sum to {total}")));
        }
        for (_, m) in &atoms {
            m.validate(&space)?;
        }
        Ok(Model::CoxAtomic { space, atoms })
    }

    pub fn transformed(base: Model, transform: Transform) -> Self {
        Model::Transformed { base: Box::new(base), transform }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Model::Poisson { .. } => "poisson",
            Model::Binomial { .. } => "binomial",
            Model::PurelyRandom { .. } => "purely_random",
            Model::Conditional { .. } => "conditional",
            Model::Gibbs(_) => "gibbs",
            Model::Dpp(_) => "dpp",
            Model::CoxAtomic { .. } => "cox_atomic",
            Model::Superposition(_) => "superposition",
            Model::Transformed { .. } => "transformed",
        }
    }

    /// The ground space the realizations live in.
    pub fn space(&self) -> Result<Space> {
        Ok(match self {
            Model::Poisson { space, .. }
            | Model::Binomial { space, .. }
            | Model::PurelyRandom { space, .. }
            | Model::Conditional { space, .. }
            | Model::CoxAtomic { space, .. } => space.clone(),
            Model::Gibbs(g) => g.space.clone(),
            Model::Dpp(k) => k.space().clone(),
            Model::Superposition(list) => match list.first() {
                Some(m) => m.space()?,
                None => return Err(Error::InvalidParameter("empty superposition".into())),
            },
            Model::Transformed { base, transform } => match transform {
                Transform::Rescale(eps) => base.space()?.rescaled(*eps)?,
                _ => base.space()?,
            },
        })
    }

    /// Number of independent components reported in [`Draw::parts`].
    pub fn components(&self) -> usize {
        match self {
            Model::Superposition(list) => list.iter().map(Model::components).sum(),
            Model::Transformed { base, transform: Transform::Superpose(extra) } => {
                base.components() + extra.iter().map(Model::components).sum::<usize>()
            }
            Model::Transformed { base, .. } => base.components(),
            _ => 1,
        }
    }

    pub fn draw_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Draw> {
        Ok(match self {
            Model::Poisson { space, intensity } => Draw::single(sample_poisson(intensity, space, rng)?),
            Model::Binomial { space, n, density } => {
                Draw::single(sample_binomial(*n, density, space, rng)?)
            }
            Model::PurelyRandom { space, counts, density } => {
                Draw::single(sample_purely_random(counts, density, space, rng)?)
            }
            Model::Conditional { space, intensity, condition, max_attempts } => {
                Draw::single(sample_conditional(intensity, condition, space, rng, *max_attempts)?.0)
            }
            Model::Gibbs(g) => Draw::single(sample_gibbs_pairwise(g, rng, g.max_attempts)?.0),
            Model::Dpp(k) => Draw::single(k.sample(rng)),
            Model::CoxAtomic { space, atoms } => {
                let w = WeightedIndex::new(atoms.iter().map(|(w, _)| *w))
                    .map_err(|e| Error::InvalidParameter(format!("Cox atom weights: {e}")))?;
                let j = w.sample(rng);
                Draw::single(sample_poisson(&atoms[j].1, space, rng)?)
            }
            Model::Superposition(list) => {
                let mut parts = Vec::new();
                for m in list {
                    parts.extend(m.draw_with(rng)?.parts);
                }
                Draw::from_parts(parts)
            }
            Model::Transformed { base, transform } => {
                let d = base.draw_with(rng)?;
                transforms::apply(transform, d, base.space()?.dim(), rng)?
            }
        })
    }
}

impl PointProcess for Model {
    fn draw(&self, rng: &mut StreamRng) -> Result<Draw> {
        self.draw_with(rng)
    }
}

fn check_probability_density(q: &Density, space: &Space) -> Result<()> {
    q.validate(space)?;
    let mass = q.total_mass(space)?;
    if (mass - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidParameter(format!("density integrates to {mass}, not 1")));
    }
    Ok(())
}

/// `n` i.i.d. points with density proportional to `m`.
fn place<R: Rng + ?Sized>(n: usize, m: &Density, space: &Space, rng: &mut R) -> Result<Configuration> {
    if n == 0 {
        return Ok(Configuration::new());
    }
    if let Space::Grid(g) = space {
        let w: Vec<f64> = g.points().zip(g.weights()).map(|(p, w)| m.at(&p) * w).collect();
        let idx = WeightedIndex::new(&w)
            .map_err(|e| Error::InvalidParameter(format!("grid intensity: {e}")))?;
        return Ok((0..n).map(|_| g.point(idx.sample(rng))).collect());
    }
    if m.as_constant().is_some() {
        return Ok((0..n).map(|_| space.uniform_point(rng)).collect());
    }
    let sup = m.sup(space);
    if !(sup.is_finite() && sup > 0.0) {
        return Err(Error::InvalidParameter(format!("rejection sampling needs a finite positive sup, got {sup}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut tries: u64 = 0;
    while out.len() < n {
        let p = space.uniform_point(rng);
        let v = m.at(&p);
        if v > sup * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!("density {v} exceeds declared sup {sup}")));
        }
        if rng.random::<f64>() * sup < v {
            out.push(p);
        }
        tries += 1;
        if tries > DEFAULT_MAX_ATTEMPTS * n as u64 {
            return Err(Error::AcceptanceFailure { attempts: tries });
        }
    }
    Ok(Configuration::from_points(out))
}

pub fn sample_poisson<R: Rng + ?Sized>(m: &Density, space: &Space, rng: &mut R) -> Result<Configuration> {
    let mass = m.total_mass(space)?;
    if mass == 0.0 {
        return Ok(Configuration::new());
    }
    let n = Poisson::new(mass)
        .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mass}: {e}")))?
        .sample(rng) as usize;
    place(n, m, space, rng)
}

pub fn sample_binomial<R: Rng + ?Sized>(n: usize, q: &Density, space: &Space, rng: &mut R) -> Result<Configuration> {
    place(n, q, space, rng)
}

pub fn sample_purely_random<R: Rng + ?Sized>(
    counts: &CountDistribution,
    q: &Density,
    space: &Space,
    rng: &mut R,
) -> Result<Configuration> {
    let n = counts.sample(rng);
    place(n, q, space, rng)
}

/// First accepted Poisson draw and the number of attempts it took.
pub fn sample_conditional<R: Rng + ?Sized>(
    m: &Density,
    condition: &Condition,
    space: &Space,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(Configuration, u64)> {
    for attempt in 1..=max_attempts.max(1) {
        let phi = sample_poisson(m, space, rng)?;
        if condition.holds(&phi) {
            return Ok((phi, attempt));
        }
    }
    Err(Error::AcceptanceFailure { attempts: max_attempts })
}

/// Rejection from the Poisson process with intensity `e^{−θΨ₁}`, accepting
/// with probability `e^{−θ Σ_{i<j} Ψ₂}`.
pub fn sample_gibbs_pairwise<R: Rng + ?Sized>(
    model: &GibbsPairwise,
    rng: &mut R,
    max_attempts: u64,
) -> Result<(Configuration, u64)> {
    let activity = model.activity();
    for attempt in 1..=max_attempts.max(1) {
        let phi = sample_poisson(&activity, &model.space, rng)?;
        let accept = (-model.theta * model.interaction(&phi)).exp();
        if rng.random::<f64>() < accept {
            return Ok((phi, attempt));
        }
    }
    Err(Error::AcceptanceFailure { attempts: max_attempts })
}

pub fn sample_discrete_dpp<R: Rng + ?Sized>(kernel: &Kernel, rng: &mut R) -> Result<Configuration> {
    if kernel.alpha() != Alpha::MinusOne {
        return Err(Error::InvalidParameter("sample_discrete_dpp needs alpha = -1".into()));
    }
    Ok(kernel.sample(rng))
}

pub fn sample_alpha_dpp<R: Rng + ?Sized>(kernel: &Kernel, rng: &mut R) -> Result<Configuration> {
    Ok(kernel.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    #[test]
    fn zero_intensity_is_empty() {
        let s = Space::unit_box(2);
        let mut rng = Streams::new(1, "zero").rng(0);
        for _ in 0..50 {
            assert!(sample_poisson(&Density::constant(0.0), &s, &mut rng).unwrap().is_empty());
        }
    }

    #[test]
    fn binomial_cardinality() {
        let s = Space::unit_box(1);
        let mut rng = Streams::new(2, "bin").rng(0);
        assert!(sample_binomial(0, &Density::constant(1.0), &s, &mut rng).unwrap().is_empty());
        for _ in 0..20 {
            assert_eq!(sample_binomial(5, &Density::constant(1.0), &s, &mut rng).unwrap().len(), 5);
        }
    }

    #[test]
    fn hardcore_condition() {
        let c = Condition::Hardcore(0.1);
        let phi = Configuration::from_points([Point::xy(0.0, 0.0), Point::xy(0.5, 0.5)]);
        assert!(c.holds(&phi));
        assert!(!c.holds_with(&phi, &Point::xy(0.05, 0.0)));
        assert!(c.holds_with(&phi, &Point::xy(0.2, 0.0)));
        assert!(!c.holds(&Configuration::from_points([Point::x(0.3), Point::x(0.3)])));
    }

    #[test]
    fn bounded_condition() {
        let c = Condition::Bounded(2);
        let phi = Configuration::from_points([Point::x(0.1), Point::x(0.2)]);
        assert!(c.holds(&phi));
        assert!(!c.holds_with(&phi, &Point::x(0.3)));
    }

    #[test]
    fn gibbs_energy_counts_pairs() {
        let g = GibbsPairwise::new(
            Space::unit_box(1),
            1.0,
            Density::constant(0.0),
            PairPotential::Step { height: 0.5, range: 0.2 },
        )
        .unwrap();
        let phi = Configuration::from_points([Point::x(0.1), Point::x(0.2), Point::x(0.9)]);
        assert!((g.interaction(&phi) - 0.5).abs() < 1e-15);
        let doubled = Configuration::from_points([Point::x(0.5), Point::x(0.5)]);
        assert!((g.interaction(&doubled) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn conditional_accepts_only_valid() {
        let s = Space::unit_box(2);
        let streams = Streams::new(3, "hc");
        for i in 0..200 {
            let (phi, attempts) =
                sample_conditional(&Density::constant(1.0), &Condition::Hardcore(0.1), &s, &mut streams.rng(i), 1000)
                    .unwrap();
            assert!(attempts >= 1);
            assert!(Condition::Hardcore(0.1).holds(&phi));
        }
    }

    #[test]
    fn acceptance_failure_is_typed() {
        let s = Space::unit_box(1);
        let never = Condition::custom("never", false, |_| false);
        let r = sample_conditional(&Density::constant(1.0), &never, &s, &mut Streams::new(4, "n").rng(0), 5);
        assert!(matches!(r, Err(Error::AcceptanceFailure { attempts: 5 })));
    }

    #[test]
    fn draws_are_reproducible() {
        let m = Model::poisson(Space::unit_box(2), Density::constant(5.0)).unwrap();
        let s = Streams::new(9, "rep");
        let a = m.draw(&mut s.rng(4)).unwrap();
        let b = m.draw(&mut s.rng(4)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn nonconstant_density_placement() {
        // m(x) = 2x on [0,1]: mean location 2/3.
        let s = Space::unit_box(1);
        let m = Density::Affine { offset: 0.0, slope: [2.0, 0.0, 0.0] };
        let streams = Streams::new(5, "aff");
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..20_000 {
            let phi = sample_poisson(&m, &s, &mut streams.rng(i)).unwrap();
            for p in phi.iter() {
                sum += p.coords()[0];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        assert!((mean - 2.0 / 3.0).abs() < 0.01, "mean {mean}");
    }
}
