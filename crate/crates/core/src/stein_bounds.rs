//! Upper bounds on the KR distance between a point process and a Poisson
//! (or Cox) target, in closed form or with Monte-Carlo ingredients.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use statrs::function::gamma::gamma;

use crate::distances::{polish_boxes, polish_series, DyadicBox};
use crate::geometry::{Density, Space};
use crate::models::{sample_poisson, Condition, CountDistribution, CountLaw, Kernel, Model, PointProcess};
use crate::montecarlo::{moments, Estimate};
use crate::papangelou::{reference_quadrature, Labeled, Papangelou};
use crate::rng::Streams;
use crate::{Error, Result};

/// A bound with the standard error of any estimated ingredient.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub bound_id: String,
    pub value: f64,
    pub stderr: f64,
    pub components: BTreeMap<String, f64>,
    pub inputs: Value,
    /// SHA-256 of the bound id and the canonical JSON of `inputs`.
    pub inputs_hash: String,
    pub seed: Option<u64>,
}

impl BoundReport {
    fn new(bound_id: &str, value: f64, stderr: f64, inputs: Value) -> Result<Self> {
        if !value.is_finite() || value < 0.0 || !(stderr >= 0.0) {
            return Err(Error::NonFinite(format!("{bound_id}: value {value}, stderr {stderr}")));
        }
        let mut h = Sha256::new();
        h.update(bound_id.as_bytes());
        h.update([0u8]);
        h.update(inputs.to_string().as_bytes());
        let inputs_hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        Ok(Self {
            bound_id: bound_id.into(),
            value,
            stderr,
            components: BTreeMap::new(),
            inputs,
            inputs_hash,
            seed: None,
        })
    }

    /// A bound with no estimated ingredient.
    pub fn closed_form(bound_id: &str, value: f64, inputs: Value) -> Result<Self> {
        Self::new(bound_id, value, 0.0, inputs)
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.components.insert(key.into(), v);
        self
    }

    fn seeded(mut self, streams: &Streams) -> Self {
        self.seed = Some(streams.seed());
        self
    }

    /// `value + k · stderr`, the figure dominance checks compare against.
    pub fn inflated(&self, k: f64) -> f64 {
        self.value + k * self.stderr
    }
}

/// `∫ E|m(x) − c(x, Φ)| ℓ(dx)`, on the evaluator's reference nodes or a
/// midpoint mesh at `resolution`.
pub fn bound_generic(
    m: &Density,
    evaluator: &dyn Papangelou,
    process: &dyn PointProcess,
    space: &Space,
    resolution: Option<usize>,
    n: usize,
    streams: &Streams,
) -> Result<BoundReport> {
    let q = reference_quadrature(evaluator, space, resolution);
    let mx: Vec<f64> = q.nodes.iter().map(|x| m.at(x)).collect();
    let est = moments(streams, n, 1, |rng, out| {
        let d = process.draw(rng)?;
        let lab = Labeled::from(&d);
        for ((x, w), mv) in q.iter().zip(&mx) {
            out[0] += w * (mv - evaluator.intensity(x, lab)).abs();
        }
        Ok(())
    })?[0]
        .estimate();
    let inputs = json!({ "evaluator": evaluator.name(), "nodes": q.len(), "n": n });
    Ok(BoundReport::new("generic", est.mean, est.stderr, inputs)?.with("nodes", q.len() as f64).seeded(streams))
}

/// Extra terms summed past the stored table of a closed-form count law.
const PRPP_EXTRA_TERMS: usize = 64;

fn tail_sum(law: &CountLaw, from: usize, weight_by_k: bool) -> f64 {
    let mut s = 0.0;
    let mut k = from;
    loop {
        let p = law.pmf(k).unwrap_or(0.0);
        let term = if weight_by_k { k as f64 * p } else { p };
        s += term;
        if (term < 1e-300 || term < s * 1e-18) && k > from + 8 {
            return s;
        }
        k += 1;
        if k > from + 100_000 {
            return s;
        }
    }
}

/// `Σ_n |(n+1)p_{n+1} − M(X) p_n|`.
///
/// Tables are summed exactly (with `p_{N_max+1} = 0`). Poisson and
/// geometric laws are summed from their pmf well past the stored range and
/// the remainder is bounded term-wise by `p_k((k+1)r + M(X))` (geometric)
/// or equals `|λ − M(X)| P(N > K)` (Poisson).
pub fn bound_prpp(counts: &CountDistribution, mx: f64) -> Result<BoundReport> {
    if !(mx.is_finite() && mx >= 0.0) {
        return Err(Error::InvalidParameter(format!("M(X) = {mx}")));
    }
    let law = counts.law();
    let closed = matches!(law, CountLaw::Poisson(_) | CountLaw::Geometric(_));
    let p = |k: usize| if closed { law.pmf(k).unwrap_or(0.0) } else { counts.prob(k) };
    let last = if closed { counts.n_max() + PRPP_EXTRA_TERMS } else { counts.n_max() };
    // Closed-form laws use `p_k |(k+1)p_{k+1}/p_k − M(X)|` so that an exact
    // Poisson match cancels without rounding.
    let ratio = |k: usize| match law {
        CountLaw::Poisson(l) => Some(l),
        CountLaw::Geometric(r) => Some((k + 1) as f64 * r),
        _ => None,
    };
    let mut sum = 0.0;
    for k in 0..=last {
        sum += match ratio(k) {
            Some(q) => p(k) * (q - mx).abs(),
            None => ((k + 1) as f64 * p(k + 1) - mx * p(k)).abs(),
        };
    }
    let tail = match law {
        CountLaw::Poisson(l) => (l - mx).abs() * tail_sum(&law, last + 1, false),
        CountLaw::Geometric(r) => {
            r * (tail_sum(&law, last + 1, true) + tail_sum(&law, last + 1, false)) + mx * tail_sum(&law, last + 1, false)
        }
        _ => 0.0,
    };
    let inputs = json!({ "law": format!("{law:?}"), "n_max": counts.n_max(), "mx": mx });
    Ok(BoundReport::new("prpp", sum + tail, 0.0, inputs)?.with("truncated_sum", sum).with("tail_bound", tail))
}

/// `∫ m(x) P(Φ_C + x ∉ C) ℓ(dx)`.
#[allow(clippy::too_many_arguments)]
pub fn bound_conditional_mc(
    m: &Density,
    condition: &Condition,
    process: &dyn PointProcess,
    space: &Space,
    resolution: usize,
    n: usize,
    streams: &Streams,
) -> Result<BoundReport> {
    let q = space.quadrature(resolution);
    let weights: Vec<f64> = q.iter().map(|(x, w)| w * m.at(x)).collect();
    let est = moments(streams, n, 1, |rng, out| {
        let phi = process.sample(rng)?;
        for (x, w) in q.nodes.iter().zip(&weights) {
            if *w != 0.0 && !condition.holds_with(&phi, x) {
                out[0] += w;
            }
        }
        Ok(())
    })?[0]
        .estimate();
    let inputs = json!({ "condition": format!("{condition:?}"), "resolution": resolution, "n": n });
    Ok(BoundReport::new("conditional_mc", est.mean, est.stderr, inputs)?.seeded(streams))
}

/// `p_R`: probability that an unconditioned Poisson draw is `R`-hardcore.
pub fn estimate_p_r(intensity: &Density, space: &Space, r: f64, n: usize, streams: &Streams) -> Result<Estimate> {
    let cond = Condition::Hardcore(r);
    cond.validate()?;
    Ok(moments(streams, n, 1, |rng, out| {
        out[0] = cond.holds(&sample_poisson(intensity, space, rng)?) as u8 as f64;
        Ok(())
    })?[0]
        .estimate())
}

/// Which ball-volume formula the hardcore bound uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BallVolume {
    /// `π^{d/2} R^d / Γ(d/2)`, as printed alongside the hardcore bound.
    #[default]
    Printed,
    /// `π^{d/2} R^d / Γ(d/2 + 1)`.
    Standard,
}

pub fn ball_volume(d: usize, r: f64, convention: BallVolume) -> f64 {
    let half = d as f64 / 2.0;
    let g = match convention {
        BallVolume::Printed => gamma(half),
        BallVolume::Standard => gamma(half + 1.0),
    };
    std::f64::consts::PI.powf(half) * r.powi(d as i32) / g
}

/// `λ² |Λ| V_d(R) / p_R`; the stderr is the delta-method propagation of
/// the error on `p_R`.
pub fn bound_hardcore(
    lambda: f64,
    area: f64,
    r: f64,
    d: usize,
    p_r: Estimate,
    convention: BallVolume,
) -> Result<BoundReport> {
    if !(p_r.mean > 0.0 && p_r.mean <= 1.0) {
        return Err(Error::InvalidParameter(format!("p_R = {} must lie in (0, 1]", p_r.mean)));
    }
    if !(1..=3).contains(&d) || r < 0.0 || lambda < 0.0 || area < 0.0 {
        return Err(Error::InvalidParameter("hardcore bound needs d in 1..=3 and nonnegative λ, |Λ|, R".into()));
    }
    let v = ball_volume(d, r, convention);
    let value = lambda * lambda * area * v / p_r.mean;
    let stderr = value * p_r.stderr / p_r.mean;
    let inputs = json!({ "lambda": lambda, "area": area, "r": r, "d": d, "p_r": p_r.mean, "volume": convention });
    Ok(BoundReport::new("hardcore", value, stderr, inputs)?.with("v_d", v).with("p_r", p_r.mean).with("p_r_stderr", p_r.stderr))
}

/// `e^{−M(X)} M(X)^{N+1} / (N! p_N)`; `p_N` defaults to the Poisson CDF at `N`.
pub fn bound_bounded(mx: f64, n: usize, p_n: Option<f64>) -> Result<BoundReport> {
    if !(mx.is_finite() && mx >= 0.0) {
        return Err(Error::InvalidParameter(format!("M(X) = {mx}")));
    }
    let pois = CountLaw::Poisson(mx);
    let p_n = match p_n {
        Some(p) => p,
        None => (0..=n).map(|k| pois.pmf(k).unwrap_or(0.0)).sum(),
    };
    if !(p_n > 0.0 && p_n <= 1.0 + 1e-15) {
        return Err(Error::InvalidParameter(format!("p_N = {p_n} must lie in (0, 1]")));
    }
    let log_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    let value = if mx == 0.0 { 0.0 } else { (-mx + (n + 1) as f64 * mx.ln() - log_fact).exp() / p_n };
    let inputs = json!({ "mx": mx, "n": n, "p_n": p_n });
    Ok(BoundReport::new("bounded", value, 0.0, inputs)?.with("p_n", p_n))
}

/// `R_n + 2n (max_i ∫ρ_{n,i})²` with `R_n = ∫|Σ_i ρ_{n,i} − m|`.
pub fn bound_superposition(rhos: &[Density], m: &Density, space: &Space, resolution: usize) -> Result<BoundReport> {
    if rhos.is_empty() {
        return Err(Error::InvalidParameter("superposition of zero components".into()));
    }
    let q = space.quadrature(resolution);
    let r_n = q.integrate(|x| (rhos.iter().map(|r| r.at(x)).sum::<f64>() - m.at(x)).abs())?;
    let max_mass = rhos.iter().map(|r| q.integrate(|x| r.at(x))).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let n = rhos.len() as f64;
    let second = 2.0 * n * max_mass * max_mass;
    let inputs = json!({ "components": rhos.len(), "resolution": resolution });
    Ok(BoundReport::new("superposition", r_n + second, 0.0, inputs)?
        .with("r_n", r_n)
        .with("max_component_mass", max_mass))
}

/// i.i.d. corollary: `∫_Λ |h(x/n) − h(0⁺)| dx + (2/n)(∫_Λ h(x/n) dx)²`.
pub fn bound_superposition_iid<F>(h: F, h0: f64, n: usize, region: &Space, resolution: usize) -> Result<BoundReport>
where
    F: Fn(&[f64; 3]) -> f64,
{
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let q = region.quadrature(resolution);
    let scaled = |x: &crate::geometry::Point| {
        let c = x.coords();
        h(&[c[0] / n as f64, c[1] / n as f64, c[2] / n as f64])
    };
    let first = q.integrate(|x| (scaled(x) - h0).abs())?;
    let mass = q.integrate(scaled)?;
    let second = 2.0 / n as f64 * mass * mass;
    let inputs = json!({ "h0": h0, "n": n, "resolution": resolution });
    Ok(BoundReport::new("superposition_iid", first + second, 0.0, inputs)?.with("r_n", first).with("mass", mass))
}

/// `(2/n)(∫K(x,x) dx)²`.
pub fn bound_minus1n_dpp(kernel: &Kernel, n: usize) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let trace = kernel.trace();
    let value = 2.0 / n as f64 * trace * trace;
    Ok(BoundReport::new("minus1n_dpp", value, 0.0, json!({ "trace": trace, "n": n }))?.with("trace", trace))
}

/// `n^{−1/2} ∫ √K(x) dx` for a variance bound `V[c(x, Φ)] ≤ K(x)`.
pub fn bound_thinned_superposition(k_var: &Density, n: usize, space: &Space, resolution: usize) -> Result<BoundReport> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be >= 1".into()));
    }
    let integral = space.quadrature(resolution).integrate(|x| k_var.at(x).max(0.0).sqrt())?;
    let value = integral / (n as f64).sqrt();
    Ok(BoundReport::new("thinned_superposition", value, 0.0, json!({ "n": n, "resolution": resolution }))?
        .with("sqrt_integral", integral))
}

/// `2β/(1−β) · λ|Λ|`.
pub fn bound_dpp_thin_rescale(beta: f64, lambda: f64, area: f64) -> Result<BoundReport> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::InvalidParameter(format!("β = {beta} must lie in (0, 1)")));
    }
    let value = 2.0 * beta / (1.0 - beta) * lambda * area;
    BoundReport::new("dpp_thin_rescale", value, 0.0, json!({ "beta": beta, "lambda": lambda, "area": area }))
}

/// `M(X)² θ ε`.
pub fn bound_gibbs(mx: f64, theta: f64, eps: f64) -> Result<BoundReport> {
    if mx < 0.0 || theta < 0.0 || eps < 0.0 {
        return Err(Error::InvalidParameter("Gibbs bound needs M(X), θ, ε >= 0".into()));
    }
    BoundReport::new("gibbs", mx * mx * theta * eps, 0.0, json!({ "mx": mx, "theta": theta, "eps": eps }))
}

fn sum_p_squared(process: &dyn PointProcess, p: &Density, n: usize, streams: &Streams) -> Result<Estimate> {
    Ok(moments(streams, n, 1, |rng, out| {
        for x in process.sample(rng)?.iter() {
            let v = p.at(x);
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidParameter(format!("retention probability {v} not in [0,1]")));
            }
            out[0] += v * v;
        }
        Ok(())
    })?[0]
        .estimate())
}

/// `2 E[Σ_{x∈Φ} p(x)²]`, the distance from `p∘Φ` to the Cox process
/// directed by `pΦ`.
pub fn bound_thinned_vs_cox(process: &dyn PointProcess, p: &Density, n: usize, streams: &Streams) -> Result<BoundReport> {
    let e = sum_p_squared(process, p, n, streams)?;
    Ok(BoundReport::new("thinned_vs_cox", 2.0 * e.mean, 2.0 * e.stderr, json!({ "n": n }))?
        .with("sum_p_squared", e.mean)
        .seeded(streams))
}

/// `1 − e^{−φ(A)}` averaged over a Poisson process with mean measure `ν`:
/// `1 − exp(−(1 − e^{−1}) ν(A))`.
pub fn poisson_lift(nu_a: f64) -> f64 {
    1.0 - (-(1.0 - (-1.0f64).exp()) * nu_a).exp()
}

/// `2E[Σ p²] + Δ̄_P(pΦ, M)`.
///
/// The second term is the Polish distance between the Cox processes
/// directed by `pΦ` and by the atomic law of `M`. Its functionals
/// `g_k(ν) = E f_k(ζ_ν)` are evaluated in closed form with
/// [`poisson_lift`]; the mixture side is exact and the `pΦ` side is a
/// Monte-Carlo mean.
pub fn bound_kallenberg(
    process: &dyn PointProcess,
    p: &Density,
    cox_target: &Model,
    resolution: usize,
    n: usize,
    streams: &Streams,
) -> Result<BoundReport> {
    let Model::CoxAtomic { space, atoms } = cox_target else {
        return Err(Error::InvalidParameter("bound_kallenberg needs an atomic Cox target".into()));
    };
    let boxes: Vec<DyadicBox> = polish_boxes(space);
    let first = sum_p_squared(process, p, n, &streams.child("p2"))?;
    let mut target_side = vec![0.0; boxes.len()];
    for (w, m) in atoms {
        for (t, b) in target_side.iter_mut().zip(&boxes) {
            *t += w * poisson_lift(b.mass(m, space, resolution)?);
        }
    }
    let thinned_side = moments(&streams.child("lift"), n, boxes.len(), |rng, out| {
        let phi = process.sample(rng)?;
        for (o, b) in out.iter_mut().zip(&boxes) {
            let nu: f64 = phi.iter().filter(|x| b.contains(x)).map(|x| p.at(x)).sum();
            *o = poisson_lift(nu);
        }
        Ok(())
    })?;
    let gaps: Vec<Estimate> = thinned_side
        .iter()
        .zip(&target_side)
        .map(|(m, t)| {
            let e = m.estimate();
            Estimate { mean: e.mean - t, stderr: e.stderr, n: e.n }
        })
        .collect();
    let (polish, polish_se) = polish_series(&gaps);
    let value = 2.0 * first.mean + polish;
    let inputs = json!({ "atoms": atoms.len(), "resolution": resolution, "n": n });
    Ok(BoundReport::new("kallenberg", value, 2.0 * first.stderr + polish_se, inputs)?
        .with("thinning_term", 2.0 * first.mean)
        .with("polish_term", polish)
        .seeded(streams))
}
