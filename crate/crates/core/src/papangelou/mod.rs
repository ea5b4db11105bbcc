//! Papangelou conditional intensities `c(x, φ)`.
//!
//! Every evaluator returns a density with respect to the reference measure of
//! its space (Lebesgue on boxes and disks, cell weights on grids), except the
//! thinned-configuration evaluator, whose reference measure is atomic and is
//! returned by [`Papangelou::reference`].

mod checks;
mod janossy;

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

pub use checks::{
    check_structural_lemmas, classify_prpp, exhaustive_monotonicity, gnz_check, random_monotonicity,
    reference_quadrature, GnzReport, LemmaSettings, MonotonicityReport, RepulsivenessReport, TestFn,
};
pub use janossy::{alpha_det, alpha_det_bruteforce, janossy_ratio_oracle};

use crate::geometry::{Configuration, Density, Point, Quadrature, Space};
use crate::models::kernel::C64;
use crate::models::{Alpha, Condition, CountDistribution, Draw, GibbsPairwise, Kernel, Model};
use crate::transforms::{transform_model, Transform};
use crate::{Error, Result};

/// A configuration, optionally split into the independent components of a
/// superposition.
#[derive(Clone, Copy, Debug)]
pub enum Labeled<'a> {
    Plain(&'a Configuration),
    Parts { union: &'a Configuration, parts: &'a [Configuration] },
}

impl<'a> Labeled<'a> {
    pub fn union(&self) -> &'a Configuration {
        match self {
            Labeled::Plain(c) => c,
            Labeled::Parts { union, .. } => union,
        }
    }
}

impl<'a> From<&'a Draw> for Labeled<'a> {
    fn from(d: &'a Draw) -> Self {
        if d.parts.len() == 1 {
            Labeled::Plain(&d.union)
        } else {
            Labeled::Parts { union: &d.union, parts: &d.parts }
        }
    }
}

/// A version of the Papangelou intensity.
pub trait Papangelou: Send + Sync {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64;

    fn at(&self, x: &Point, phi: &Configuration) -> f64 {
        self.intensity(x, Labeled::Plain(phi))
    }

    /// Reference measure when it is not the ambient one.
    fn reference(&self) -> Option<Quadrature> {
        None
    }

    fn name(&self) -> String;
}

/// `c(x, φ) = m(x)`.
#[derive(Clone, Debug)]
pub struct PoissonPap {
    pub m: Density,
}

pub fn pap_poisson(m: Density) -> PoissonPap {
    PoissonPap { m }
}

impl Papangelou for PoissonPap {
    fn intensity(&self, x: &Point, _phi: Labeled<'_>) -> f64 {
        self.m.at(x)
    }

    fn name(&self) -> String {
        "poisson".into()
    }
}

/// `c(x, φ) = (n+1) p_{n+1}/p_n q(x)` with `n = |φ|`.
#[derive(Clone, Debug)]
pub struct PrppPap {
    pub counts: CountDistribution,
    pub q: Density,
}

pub fn pap_purely_random(counts: CountDistribution, q: Density) -> PrppPap {
    PrppPap { counts, q }
}

impl PrppPap {
    /// Errors when `|φ| + 1` lies beyond the stored range.
    pub fn checked(&self, x: &Point, phi: &Configuration) -> Result<f64> {
        let n = phi.len();
        if self.counts.prob(n) == 0.0 && n <= self.counts.n_max() {
            return Ok(0.0);
        }
        Ok(self.counts.ratio(n)? * self.q.at(x))
    }
}

impl Papangelou for PrppPap {
    /// Beyond the truncation point the truncated law has `p_{n+1} = 0`, so
    /// the intensity is zero there.
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        self.checked(x, phi.union()).unwrap_or(0.0)
    }

    fn name(&self) -> String {
        "purely_random".into()
    }
}

/// `c(x, φ) = m(x) 1{φ + x ∈ C} 1{φ ∈ C}`.
#[derive(Clone, Debug)]
pub struct ConditionalPap {
    pub m: Density,
    pub condition: Condition,
}

pub fn pap_conditional(m: Density, condition: Condition) -> ConditionalPap {
    ConditionalPap { m, condition }
}

impl Papangelou for ConditionalPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        let phi = phi.union();
        if self.condition.holds_with(phi, x) && self.condition.holds(phi) {
            self.m.at(x)
        } else {
            0.0
        }
    }

    fn name(&self) -> String {
        format!("conditional({:?})", self.condition)
    }
}

/// `c(x, φ) = exp(−θ(Ψ₁(x) + Σ_{y∈φ} Ψ₂(x, y)))`.
#[derive(Clone, Debug)]
pub struct GibbsPap {
    pub model: GibbsPairwise,
}

pub fn pap_gibbs(model: GibbsPairwise) -> GibbsPap {
    GibbsPap { model }
}

impl Papangelou for GibbsPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        let g = &self.model;
        let pair: f64 = phi.union().entries().iter().map(|(y, m)| *m as f64 * g.psi2.at(x, y)).sum();
        (-g.theta * (g.psi1.at(x) + pair)).exp()
    }

    fn name(&self) -> String {
        "gibbs".into()
    }
}

/// Ratio of (α-)determinants of `J = (I + αK)^{-1} K` on grid cells.
#[derive(Clone, Debug)]
pub struct DppPap {
    l: DMatrix<C64>,
    weights: Vec<f64>,
    alpha: Alpha,
}

pub fn pap_dpp(kernel: &Kernel) -> DppPap {
    DppPap { l: kernel.j_matrix(), weights: kernel.grid().weights().to_vec(), alpha: kernel.alpha() }
}

/// Largest configuration handled by the α-determinant path.
pub const ALPHA_DET_MAX: usize = 12;

impl DppPap {
    fn cells(&self, phi: &Configuration) -> Option<Vec<usize>> {
        let mut out = Vec::with_capacity(phi.len());
        for p in phi.iter() {
            match p.cell() {
                Some(i) if i < self.weights.len() => out.push(i),
                _ => return None,
            }
        }
        Some(out)
    }

    fn determinantal(&self, i: usize, s: &[usize]) -> f64 {
        if s.contains(&i) {
            return 0.0;
        }
        let lii = self.l[(i, i)].re;
        if s.is_empty() {
            return lii.max(0.0);
        }
        let k = s.len();
        let a = DMatrix::from_fn(k, k, |r, c| self.l[(s[r], s[c])]);
        let Some(chol) = Cholesky::new(a) else {
            return 0.0;
        };
        let b = DVector::from_fn(k, |r, _| self.l[(s[r], i)]);
        let sol = chol.solve(&b);
        let quad: C64 = (0..k).map(|r| self.l[(i, s[r])] * sol[r]).sum();
        (lii - quad.re).max(0.0)
    }

    fn alpha_ratio(&self, i: usize, s: &[usize]) -> f64 {
        if s.len() + 1 > ALPHA_DET_MAX {
            return f64::NAN;
        }
        let a = self.alpha.value();
        let sub = |idx: &[usize]| DMatrix::from_fn(idx.len(), idx.len(), |r, c| self.l[(idx[r], idx[c])]);
        let den = alpha_det(&sub(s), a).re;
        if den <= 1e-300 {
            return 0.0;
        }
        let mut sx = s.to_vec();
        sx.push(i);
        (alpha_det(&sub(&sx), a).re / den).max(0.0)
    }
}

impl Papangelou for DppPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        let Some(i) = x.cell().filter(|i| *i < self.weights.len()) else {
            return 0.0;
        };
        let Some(s) = self.cells(phi.union()) else {
            return 0.0;
        };
        let v = match self.alpha {
            Alpha::MinusOne => self.determinantal(i, &s),
            Alpha::MinusOneOver(_) => self.alpha_ratio(i, &s),
        };
        v / self.weights[i]
    }

    fn name(&self) -> String {
        format!("dpp({:?})", self.alpha)
    }
}

/// `c_Λ(x, φ) = c(x, φ) 1{x ∈ Λ}`.
pub struct RestrictedPap {
    pub base: Arc<dyn Papangelou>,
    pub region: Space,
}

impl Papangelou for RestrictedPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        if self.region.region_contains(x) {
            self.base.intensity(x, phi)
        } else {
            0.0
        }
    }

    fn name(&self) -> String {
        format!("restrict({})", self.base.name())
    }
}

/// `(1/ε) c(ε^{−1/d} x, ε^{−1/d} φ)`.
pub struct RescaledPap {
    pub base: Arc<dyn Papangelou>,
    pub eps: f64,
    pub dim: usize,
}

impl Papangelou for RescaledPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        let f = self.eps.powf(-1.0 / self.dim as f64);
        let xs = x.scaled(f);
        let v = match phi {
            Labeled::Plain(c) => self.base.at(&xs, &c.map(|p| p.scaled(f))),
            Labeled::Parts { union, parts } => {
                let u = union.map(|p| p.scaled(f));
                let ps: Vec<Configuration> = parts.iter().map(|c| c.map(|p| p.scaled(f))).collect();
                self.base.intensity(&xs, Labeled::Parts { union: &u, parts: &ps })
            }
        };
        v / self.eps
    }

    fn name(&self) -> String {
        format!("rescale({})", self.base.name())
    }
}

/// `Σ_i c_i(x, φ_i)` over the labelled components.
///
/// Without labels every component is evaluated at the whole configuration,
/// which is the unlabelled ersatz of the same sum.
pub struct SuperposedPap {
    /// Evaluator and number of labelled parts it consumes.
    pub components: Vec<(Arc<dyn Papangelou>, usize)>,
}

impl Papangelou for SuperposedPap {
    fn intensity(&self, x: &Point, phi: Labeled<'_>) -> f64 {
        match phi {
            Labeled::Plain(c) => self.components.iter().map(|(e, _)| e.at(x, c)).sum(),
            Labeled::Parts { parts, .. } => {
                let mut offset = 0;
                let mut total = 0.0;
                for (e, k) in &self.components {
                    let mine = &parts[offset..(offset + k).min(parts.len())];
                    offset += k;
                    total += match mine.len() {
                        0 => e.at(x, &Configuration::new()),
                        1 => e.at(x, &mine[0]),
                        _ => {
                            let mut u = Configuration::new();
                            for p in mine {
                                u = u.union(p);
                            }
                            e.intensity(x, Labeled::Parts { union: &u, parts: mine })
                        }
                    };
                }
                total
            }
        }
    }

    fn name(&self) -> String {
        let names: Vec<String> = self.components.iter().map(|(e, _)| e.name()).collect();
        format!("superpose[{}]", names.join(","))
    }
}

/// Intensity of the thinning `p∘φ` of a fixed configuration, with respect to
/// the atomic measure `p(x) φ(dx)`:
/// `c(x, η) = (φ(x) − η(x))⁺ / (φ(x)(1 − p(x)))`.
///
/// For a simple `φ` this is `1{x ∈ φ \ η}/(1 − p(x))`; the multiplicity
/// weighting keeps the identity exact when `φ` has repeated points.
#[derive(Clone, Debug)]
pub struct ThinnedConfigPap {
    phi: Configuration,
    p: Density,
}

pub fn pap_thinned_config(phi: Configuration, p: Density) -> Result<ThinnedConfigPap> {
    for (x, _) in phi.entries() {
        let v = p.at(x);
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidParameter(format!("retention {v} must lie in [0,1)")));
        }
    }
    Ok(ThinnedConfigPap { phi, p })
}

impl Papangelou for ThinnedConfigPap {
    fn intensity(&self, x: &Point, eta: Labeled<'_>) -> f64 {
        let m = self.phi.multiplicity(x);
        if m == 0 {
            return 0.0;
        }
        let left = m.saturating_sub(eta.union().multiplicity(x));
        left as f64 / (m as f64 * (1.0 - self.p.at(x)))
    }

    fn reference(&self) -> Option<Quadrature> {
        let (nodes, weights) =
            self.phi.entries().iter().map(|(x, m)| (*x, self.p.at(x) * *m as f64)).unzip();
        Some(Quadrature { nodes, weights })
    }

    fn name(&self) -> String {
        "thinned_configuration".into()
    }
}

/// Evaluator for the transformed model `t(base)`.
pub fn pap_transform(base: &Model, t: &Transform) -> Result<Arc<dyn Papangelou>> {
    Ok(match t {
        Transform::Restrict(region) => {
            Arc::new(RestrictedPap { base: evaluator(base)?, region: region.clone() })
        }
        Transform::Rescale(eps) => {
            Arc::new(RescaledPap { base: evaluator(base)?, eps: *eps, dim: base.space()?.dim() })
        }
        Transform::Superpose(extra) => {
            let mut components = vec![(evaluator(base)?, base.components())];
            for m in extra {
                components.push((evaluator(m)?, m.components()));
            }
            Arc::new(SuperposedPap { components })
        }
        Transform::Thin(_) => evaluator(&transform_model(base, t)?)?,
    })
}

/// The closed-form evaluator attached to a model.
pub fn evaluator(model: &Model) -> Result<Arc<dyn Papangelou>> {
    Ok(match model {
        Model::Poisson { intensity, .. } => Arc::new(pap_poisson(intensity.clone())),
        Model::PurelyRandom { counts, density, .. } => {
            Arc::new(pap_purely_random(counts.clone(), density.clone()))
        }
        Model::Conditional { intensity, condition, .. } => {
            Arc::new(pap_conditional(intensity.clone(), condition.clone()))
        }
        Model::Gibbs(g) => Arc::new(pap_gibbs(g.clone())),
        Model::Dpp(k) => Arc::new(pap_dpp(k)),
        Model::Superposition(list) => Arc::new(SuperposedPap {
            components: list
                .iter()
                .map(|m| Ok((evaluator(m)?, m.components())))
                .collect::<Result<Vec<_>>>()?,
        }),
        Model::Transformed { base, transform } => pap_transform(base, transform)?,
        Model::Binomial { .. } => {
            return Err(Error::Unsupported("binomial process: p_n = 0 below N".into()))
        }
        Model::CoxAtomic { .. } => {
            return Err(Error::Unsupported("Cox process Papangelou intensity".into()))
        }
    })
}
