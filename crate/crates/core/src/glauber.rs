//! Glauber birth–death semigroup towards a Poisson target, its generator and
//! gradient, and Monte-Carlo checks of the semigroup identities.
//!
//! Only the time marginal `G_t(φ) = e^{−t}∘φ + (1 − e^{−t})∘ζ_M` is
//! simulated; no trajectory is built.

use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::distances::{EstimateKind, EstimateReport, TestFunctional};
use crate::geometry::{Configuration, Density, Point, Quadrature, Space};
use crate::models::{sample_binomial, Model, PointProcess};
use crate::montecarlo::{moments, Estimate};
use crate::report::{CheckRow, ABS_TOL};
use crate::rng::Streams;
use crate::stats::chi_square_gof;
use crate::{Error, Result};

/// Significance of the count-law test; matches a two-sided 3 sigma rule.
pub const CHI_SQUARE_LEVEL: f64 = 0.0027;

/// Draws per outer sample in the nested semigroup estimate.
pub const SEMIGROUP_INNER: usize = 4;

/// Time horizon of the Stein–Dirichlet integral.
pub const STEIN_DIRICHLET_HORIZON: f64 = 20.0;

/// Poisson process `ζ_M` that the dynamics converge to.
#[derive(Clone, Debug)]
pub struct GlauberTarget {
    pub space: Space,
    pub intensity: Density,
    mass: f64,
}

impl GlauberTarget {
    pub fn new(space: Space, intensity: Density) -> Result<Self> {
        intensity.validate(&space)?;
        let mass = intensity.total_mass(&space)?;
        Ok(Self { space, intensity, mass })
    }

    /// `M(X)`.
    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn model(&self) -> Model {
        Model::Poisson { space: self.space.clone(), intensity: self.intensity.clone() }
    }

    /// A draw of `ζ_{cM}`, `c ∈ [0,1]`.
    pub fn sample_scaled<R: Rng + ?Sized>(&self, c: f64, rng: &mut R) -> Result<Configuration> {
        let mean = c * self.mass;
        if mean <= 0.0 {
            return Ok(Configuration::new());
        }
        let n = Poisson::new(mean)
            .map_err(|e| Error::InvalidParameter(format!("Poisson mean {mean}: {e}")))?
            .sample(rng) as usize;
        sample_binomial(n, &self.intensity, &self.space, rng)
    }

    /// Midpoint nodes for `∫ · M(dx)`, weights already multiplied by `m`.
    pub fn quadrature(&self, resolution: usize) -> Quadrature {
        let q = self.space.quadrature(resolution);
        let weights = q.iter().map(|(x, w)| w * self.intensity.at(x)).collect();
        Quadrature { nodes: q.nodes, weights }
    }
}

impl PointProcess for GlauberTarget {
    fn draw(&self, rng: &mut crate::StreamRng) -> Result<crate::models::Draw> {
        Ok(crate::models::Draw::single(self.sample_scaled(1.0, rng)?))
    }
}

/// Keeps each copy of each point with probability `keep`.
fn retain<R: Rng + ?Sized>(phi: &Configuration, keep: f64, rng: &mut R) -> Configuration {
    let mut out = Configuration::new();
    for (p, m) in phi.entries() {
        let k = (0..*m).filter(|_| rng.random::<f64>() < keep).count() as u32;
        out.insert_n(*p, k);
    }
    out
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("time {t} must be finite and >= 0")))
    }
}

/// One draw of `G_t(φ)`.
pub fn sample_g_t<R: Rng + ?Sized>(
    phi: &Configuration,
    t: f64,
    target: &GlauberTarget,
    rng: &mut R,
) -> Result<Configuration> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(phi.clone());
    }
    let kept = retain(phi, (-t).exp(), rng);
    let fresh = target.sample_scaled(-(-t).exp_m1(), rng)?;
    Ok(kept.union(&fresh))
}

fn report(e: Estimate, streams: &Streams) -> EstimateReport {
    EstimateReport {
        value: e.mean,
        stderr: e.stderr,
        n_samples: e.n,
        seed: streams.seed(),
        kind: EstimateKind::Exact,
        detail: streams.label().to_string(),
    }
}

/// `P_t F(φ) = E F(G_t(φ))`.
pub fn apply_pt(
    f: &TestFunctional,
    phi: &Configuration,
    t: f64,
    target: &GlauberTarget,
    n: usize,
    streams: &Streams,
) -> Result<EstimateReport> {
    check_time(t)?;
    if t == 0.0 {
        return Ok(report(Estimate::exact(f.eval(phi)), streams));
    }
    let m = moments(streams, n, 1, |rng, out| {
        out[0] = f.eval(&sample_g_t(phi, t, target, rng)?);
        Ok(())
    })?;
    Ok(report(m[0].estimate(), streams))
}

/// `D_x F(φ) = F(φ + x) − F(φ)`.
pub fn gradient_d(f: &TestFunctional, x: &Point, phi: &Configuration) -> f64 {
    f.eval(&phi.with(*x)) - f.eval(phi)
}

/// `LF(φ) = ∫ D_x F(φ) M(dx) + Σ_{y∈φ} (F(φ∖y) − F(φ))`, the integral by
/// midpoint quadrature at `resolution` nodes per axis.
pub fn generator_l(f: &TestFunctional, phi: &Configuration, target: &GlauberTarget, resolution: usize) -> Result<f64> {
    generator_with(f, phi, &target.quadrature(resolution))
}

fn generator_with(f: &TestFunctional, phi: &Configuration, q: &Quadrature) -> Result<f64> {
    let base = f.eval(phi);
    let mut birth = 0.0;
    for (x, w) in q.iter() {
        if w != 0.0 {
            birth += w * (f.eval(&phi.with(*x)) - base);
        }
    }
    let death: f64 = phi.entries().iter().map(|(y, m)| *m as f64 * (f.eval(&phi.without(y)) - base)).sum();
    let v = birth + death;
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("generator of {} at |φ| = {}", f.id, phi.len())));
    }
    Ok(v)
}

fn glauber_row(check_id: String, lhs: Estimate, rhs: Estimate) -> CheckRow {
    CheckRow::equality("glauber", &check_id, lhs, rhs)
}

/// `P_{t+s}F(φ)` directly against the nested estimate of `P_t(P_s F)(φ)`.
#[allow(clippy::too_many_arguments)]
pub fn verify_semigroup(
    f: &TestFunctional,
    phi: &Configuration,
    t: f64,
    s: f64,
    target: &GlauberTarget,
    n: usize,
    streams: &Streams,
) -> Result<CheckRow> {
    check_time(s)?;
    let direct = apply_pt(f, phi, t + s, target, n, &streams.child("direct"))?;
    let nested = moments(&streams.child("nested"), n, 1, |rng, out| {
        let outer = sample_g_t(phi, t, target, rng)?;
        let mut acc = 0.0;
        for _ in 0..SEMIGROUP_INNER {
            acc += f.eval(&sample_g_t(&outer, s, target, rng)?);
        }
        out[0] = acc / SEMIGROUP_INNER as f64;
        Ok(())
    })?;
    let lhs = Estimate { mean: direct.value, stderr: direct.stderr, n: direct.n_samples };
    Ok(glauber_row(format!("semigroup:{}:t={t}:s={s}", f.id), lhs, nested[0].estimate()))
}

/// `D_x P_t F(φ) = e^{−t} P_t D_x F(φ)`.
///
/// Both sides share each draw of `G_t(φ)`: `G_t(φ + x)` is that draw plus
/// `x` when `x` survives the thinning. The reported error is the standard
/// error of the paired difference.
pub fn verify_commutation(
    f: &TestFunctional,
    x: &Point,
    phi: &Configuration,
    t: f64,
    target: &GlauberTarget,
    n: usize,
    streams: &Streams,
) -> Result<CheckRow> {
    check_time(t)?;
    let decay = (-t).exp();
    let m = moments(streams, n, 3, |rng, out| {
        let g = sample_g_t(phi, t, target, rng)?;
        let survives = t == 0.0 || rng.random::<f64>() < decay;
        let base = f.eval(&g);
        let with_x = f.eval(&g.with(*x));
        out[0] = if survives { with_x - base } else { 0.0 };
        out[1] = decay * (with_x - base);
        out[2] = out[0] - out[1];
        Ok(())
    })?;
    let diff = m[2].estimate();
    let (lhs, rhs) = (m[0].mean(), m[1].mean());
    Ok(CheckRow {
        model_id: "glauber".into(),
        check_id: format!("commutation:{}:t={t}", f.id),
        lhs,
        rhs,
        stderr: diff.stderr,
        pass: diff.mean.abs() <= 3.0 * diff.stderr + ABS_TOL,
    })
}

/// Times at which the ergodic rate is checked.
pub const RATE_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 4.0];
/// Times at which invariance of `ζ_M` is checked.
pub const INVARIANCE_TIMES: [f64; 2] = [0.1, 1.0];

/// Invariance: the count law of `G_t(ζ)` is Poisson(M(X)) (chi-square).
/// Rate: `|P_t F(φ) − E F(ζ)| ≤ e^{−t}(|φ| + M(X))` on [`RATE_TIMES`].
pub fn verify_invariance_and_rate(
    f: &TestFunctional,
    phi: &Configuration,
    target: &GlauberTarget,
    n: usize,
    streams: &Streams,
) -> Result<Vec<CheckRow>> {
    let mut rows = Vec::new();
    let mx = target.mass();
    let pmf = |k: usize| {
        (-mx + k as f64 * mx.ln() - statrs::function::gamma::ln_gamma(k as f64 + 1.0)).exp()
    };
    for t in INVARIANCE_TIMES {
        let s = streams.child(&format!("invariance:{t}"));
        let counts: Vec<usize> = crate::montecarlo::replicate(&s, n, |rng| {
            let z = target.sample_scaled(1.0, rng)?;
            Ok(sample_g_t(&z, t, target, rng)?.len())
        })?;
        let chi = chi_square_gof(&counts, pmf);
        rows.push(CheckRow {
            model_id: "glauber".into(),
            check_id: format!("invariance:t={t}"),
            lhs: chi.p_value,
            rhs: CHI_SQUARE_LEVEL,
            stderr: 0.0,
            pass: chi.passes(CHI_SQUARE_LEVEL),
        });
    }
    let stationary = moments(&streams.child("zeta"), n, 1, |rng, out| {
        out[0] = f.eval(&target.sample_scaled(1.0, rng)?);
        Ok(())
    })?[0]
        .estimate();
    for t in RATE_TIMES {
        let p = apply_pt(f, phi, t, target, n, &streams.child(&format!("rate:{t}")))?;
        let gap = Estimate { mean: (p.value - stationary.mean).abs(), stderr: p.stderr + stationary.stderr, n };
        let bound = Estimate::exact((-t).exp() * (phi.len() as f64 + mx));
        // One-sided: the rate is an inequality.
        let mut row = CheckRow::at_most("glauber", &format!("rate:{}:t={t}", f.id), gap, bound);
        row.stderr = gap.stderr;
        rows.push(row);
    }
    Ok(rows)
}

/// `E[LF(Φ)]` for each functional, which vanishes for every `F` exactly
/// when `Φ` is the target Poisson process. A row fails when the mean is
/// more than three standard errors from zero.
pub fn verify_stationarity(
    process: &dyn PointProcess,
    target: &GlauberTarget,
    family: &[TestFunctional],
    resolution: usize,
    n: usize,
    streams: &Streams,
) -> Result<Vec<CheckRow>> {
    let q = target.quadrature(resolution);
    let m = moments(streams, n, family.len(), |rng, out| {
        let phi = process.sample(rng)?;
        for (o, f) in out.iter_mut().zip(family) {
            *o = generator_with(f, &phi, &q)?;
        }
        Ok(())
    })?;
    Ok(family
        .iter()
        .zip(&m)
        .map(|(f, mo)| glauber_row(format!("stationarity:{}", f.id), mo.estimate(), Estimate::exact(0.0)))
        .collect())
}

/// Gauss–Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 { 1.0 } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let step = pn / dp;
            z -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = 0.5 * (a + b) - 0.5 * (b - a) * z;
        weights[i] = (b - a) / ((1.0 - z * z) * dp * dp);
    }
    (nodes, weights)
}

/// Settings for [`stein_dirichlet`].
#[derive(Clone, Copy, Debug)]
pub struct SteinDirichletSettings {
    pub horizon: f64,
    pub time_nodes: usize,
    pub resolution: usize,
    pub n_samples: usize,
}

impl Default for SteinDirichletSettings {
    fn default() -> Self {
        Self { horizon: STEIN_DIRICHLET_HORIZON, time_nodes: 12, resolution: 16, n_samples: 20_000 }
    }
}

/// `∫_0^T L P_s F(φ) ds` against `E F(ζ) − F(φ)`.
///
/// Every term of `L P_s F` carries `e^{−s}`:
/// `D_x P_s F(φ) = e^{−s} E[D_x F(G_s φ)]` and
/// `P_s F(φ∖y) − P_s F(φ) = −e^{−s} E[D_y F(G_s(φ∖y))]`.
/// With `u = 1 − e^{−s}` the integral becomes `∫_0^{1−e^{−T}} du` of a
/// smooth function, evaluated by Gauss–Legendre. Per node one coupled draw
/// serves all terms. The neglected tail `e^{−T}(|φ| + M(X))` is added to the
/// tolerance.
pub fn stein_dirichlet(
    f: &TestFunctional,
    phi: &Configuration,
    target: &GlauberTarget,
    settings: SteinDirichletSettings,
    streams: &Streams,
) -> Result<CheckRow> {
    let q = target.quadrature(settings.resolution);
    let upper = -(-settings.horizon).exp_m1();
    let (us, ws) = gauss_legendre(settings.time_nodes, 0.0, upper);
    let copies: Vec<Point> = phi.iter().copied().collect();
    let lhs = moments(&streams.child("integral"), settings.n_samples, 1, |rng, out| {
        let mut acc = 0.0;
        for (u, w) in us.iter().zip(&ws) {
            let keep = 1.0 - u;
            let kept: Vec<bool> = copies.iter().map(|_| rng.random::<f64>() < keep).collect();
            let fresh = target.sample_scaled(*u, rng)?;
            let mut g = fresh.clone();
            for (p, k) in copies.iter().zip(&kept) {
                if *k {
                    g.insert(*p);
                }
            }
            let base = f.eval(&g);
            let mut birth = 0.0;
            for (x, wx) in q.iter() {
                if wx != 0.0 {
                    birth += wx * (f.eval(&g.with(*x)) - base);
                }
            }
            let mut death = 0.0;
            for (p, k) in copies.iter().zip(&kept) {
                // A draw of G_s(φ∖y): the same draw without this copy.
                let h = if *k { g.without(p) } else { g.clone() };
                death -= f.eval(&h.with(*p)) - f.eval(&h);
            }
            acc += w * (birth + death);
        }
        out[0] = acc;
        Ok(())
    })?[0]
        .estimate();
    let ez = moments(&streams.child("stationary"), settings.n_samples, 1, |rng, out| {
        out[0] = f.eval(&target.sample_scaled(1.0, rng)?);
        Ok(())
    })?[0]
        .estimate();
    let rhs = Estimate { mean: ez.mean - f.eval(phi), stderr: ez.stderr, n: ez.n };
    let tail = (-settings.horizon).exp() * (phi.len() as f64 + target.mass());
    let stderr = lhs.stderr + rhs.stderr;
    Ok(CheckRow {
        model_id: "glauber".into(),
        check_id: format!("stein_dirichlet:{}:n={}", f.id, phi.len()),
        lhs: lhs.mean,
        rhs: rhs.mean,
        stderr,
        pass: (lhs.mean - rhs.mean).abs() <= 3.0 * stderr + ABS_TOL + tail,
    })
}
