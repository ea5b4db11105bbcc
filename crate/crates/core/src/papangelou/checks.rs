//! GNZ identity harness, structural lemma checks and PRPP classification.

use rand::Rng;
use serde::Serialize;

use super::{Labeled, Papangelou};
use crate::geometry::{Configuration, Grid, Point, Quadrature, Space};
use crate::models::{CountDistribution, PointProcess};
use crate::montecarlo::{moments, Estimate};
use crate::report::{CheckRow, ABS_TOL};
use crate::rng::Streams;
use crate::Result;

/// Test function `u(x, φ)` of the GNZ identity.
pub type TestFn<'a> = &'a (dyn Fn(&Point, &Configuration) -> f64 + Sync);

/// Default node count per axis for the right-hand side integral.
pub fn gnz_resolution(space: &Space) -> usize {
    match space.dim() {
        1 => 256,
        2 => 64,
        _ => 16,
    }
}

/// The evaluator's own reference measure, or midpoint nodes on `space`.
pub fn reference_quadrature(e: &dyn Papangelou, space: &Space, resolution: Option<usize>) -> Quadrature {
    e.reference().unwrap_or_else(|| space.quadrature(resolution.unwrap_or_else(|| gnz_resolution(space))))
}

/// Both sides of `E Σ_{x∈Φ} u(x, Φ∖x) = ∫ E[c(x,Φ) u(x,Φ)] ℓ(dx)`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GnzReport {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub pass: bool,
}

impl GnzReport {
    pub fn row(&self, model_id: &str, check_id: &str) -> CheckRow {
        CheckRow::equality(model_id, check_id, self.lhs, self.rhs)
    }
}

/// Estimates both sides of the GNZ identity for each test function from the
/// same draws. The right-hand integral uses the nodes of `reference`.
pub fn gnz_check(
    process: &dyn PointProcess,
    evaluator: &dyn Papangelou,
    reference: &Quadrature,
    us: &[TestFn<'_>],
    n_samples: usize,
    streams: &Streams,
) -> Result<Vec<GnzReport>> {
    let k = us.len();
    let m = moments(streams, n_samples, 2 * k, |rng, out| {
        let draw = process.draw(rng)?;
        let phi = &draw.union;
        for (p, mult) in phi.entries() {
            let rest = phi.without(p);
            for (j, u) in us.iter().enumerate() {
                out[j] += *mult as f64 * u(p, &rest);
            }
        }
        let lab = Labeled::from(&draw);
        for (x, w) in reference.iter() {
            let c = evaluator.intensity(x, lab);
            if c != 0.0 {
                for (j, u) in us.iter().enumerate() {
                    out[k + j] += w * c * u(x, phi);
                }
            }
        }
        Ok(())
    })?;
    Ok((0..k)
        .map(|j| {
            let (lhs, rhs) = (m[j].estimate(), m[k + j].estimate());
            let pass = (lhs.mean - rhs.mean).abs() <= 3.0 * (lhs.stderr + rhs.stderr) + ABS_TOL;
            GnzReport { lhs, rhs, pass }
        })
        .collect())
}

/// Settings for [`check_structural_lemmas`].
#[derive(Clone, Copy, Debug)]
pub struct LemmaSettings {
    pub n_samples: usize,
    /// Coarse nodes per axis where pointwise identities are checked.
    pub resolution: usize,
    /// Enables the two lemmas that assume weak repulsiveness.
    pub weakly_repulsive: bool,
}

impl Default for LemmaSettings {
    fn default() -> Self {
        Self { n_samples: 20_000, resolution: 8, weakly_repulsive: true }
    }
}

fn worst(rows: Vec<CheckRow>) -> Option<CheckRow> {
    rows.into_iter().max_by(|a, b| {
        let slack = |r: &CheckRow| (r.lhs - r.rhs).abs() - 3.0 * r.stderr;
        let key = |r: &CheckRow| (!r.pass, slack(r));
        let (ka, kb) = (key(a), key(b));
        ka.0.cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
    })
}

fn orthant(space: &Space, x: &Point) -> usize {
    let (lo, hi) = space.bounding_box();
    let c = x.coords();
    (0..space.dim()).fold(0, |acc, k| acc | (((c[k] >= 0.5 * (lo[k] + hi[k])) as usize) << k))
}

/// Singleton identity, correlation identity `E c(x,Φ) = ρ(x)`, and for
/// weakly repulsive processes the void-probability and mean-deviation
/// lemmas. `rho`, when known, is the exact first correlation function;
/// otherwise it is estimated as `E c(x, Φ)` from an independent stream and
/// the correlation identity is checked on the `2^d` orthant bins.
pub fn check_structural_lemmas(
    model_id: &str,
    process: &dyn PointProcess,
    evaluator: &dyn Papangelou,
    space: &Space,
    rho: Option<&(dyn Fn(&Point) -> f64 + Sync)>,
    settings: LemmaSettings,
    streams: &Streams,
) -> Result<Vec<CheckRow>> {
    let nodes = reference_quadrature(evaluator, space, Some(settings.resolution));
    let nn = nodes.len();
    let empty = Configuration::new();
    let c0: Vec<f64> = nodes.nodes.iter().map(|x| evaluator.at(x, &empty)).collect();
    let fine = reference_quadrature(evaluator, space, None);
    let c0_integral = fine.integrate(|x| evaluator.at(x, &empty))?;

    let rho_hat: Vec<Estimate> = match rho {
        Some(f) => nodes.nodes.iter().map(|x| Estimate::exact(f(x))).collect(),
        None => moments(&streams.child("rho"), settings.n_samples, nn, |rng, out| {
            let d = process.draw(rng)?;
            let lab = Labeled::from(&d);
            for (j, x) in nodes.nodes.iter().enumerate() {
                out[j] = evaluator.intensity(x, lab);
            }
            Ok(())
        })?
        .iter()
        .map(|m| m.estimate())
        .collect(),
    };
    let bins = 1usize << space.dim();
    // Layout: p0, p1, c(x_j,Φ) for j, |c(x_j,Φ) − ρ_j| for j, then per bin
    // the count Φ(B) and Σ_{x_j∈B} w_j c(x_j, Φ).
    let width = 2 + 2 * nn + 2 * bins;
    let node_bin: Vec<usize> = nodes.nodes.iter().map(|x| orthant(space, x)).collect();
    let m = moments(&streams.child("lemmas"), settings.n_samples, width, |rng, out| {
        let d = process.draw(rng)?;
        let lab = Labeled::from(&d);
        let n = d.union.len();
        out[0] = (n == 0) as u8 as f64;
        out[1] = (n == 1) as u8 as f64;
        for (j, (x, w)) in nodes.iter().enumerate() {
            let c = evaluator.intensity(x, lab);
            out[2 + j] = c;
            out[2 + nn + j] = (c - rho_hat[j].mean).abs();
            out[2 + 2 * nn + 2 * node_bin[j] + 1] += w * c;
        }
        for (p, mult) in d.union.entries() {
            out[2 + 2 * nn + 2 * orthant(space, p)] += *mult as f64;
        }
        Ok(())
    })?;
    let p0 = m[0].estimate();
    let p1 = m[1].estimate();
    let mut rows = vec![CheckRow::equality(
        model_id,
        "singleton",
        p1,
        Estimate { mean: p0.mean * c0_integral, stderr: p0.stderr * c0_integral, n: p0.n },
    )];

    let correlation = match rho {
        Some(_) => worst(
            (0..nn)
                .map(|j| CheckRow::equality(model_id, "correlation", m[2 + j].estimate(), rho_hat[j]))
                .collect(),
        ),
        None => worst(
            (0..bins)
                .map(|b| {
                    let base = 2 + 2 * nn + 2 * b;
                    CheckRow::equality(model_id, "correlation", m[base].estimate(), m[base + 1].estimate())
                })
                .collect(),
        ),
    };
    rows.extend(correlation);

    if settings.weakly_repulsive {
        let void = (0..nn).map(|j| {
            let r = rho_hat[j];
            CheckRow::at_most(
                model_id,
                "void_bound",
                Estimate { mean: (c0[j] - r.mean).abs(), stderr: r.stderr, n: r.n },
                Estimate { mean: (1.0 - p0.mean) * c0[j], stderr: p0.stderr * c0[j], n: p0.n },
            )
        });
        rows.extend(worst(void.collect()));
        let dev = (0..nn).map(|j| {
            let r = rho_hat[j];
            let l = m[2 + nn + j].estimate();
            CheckRow::at_most(
                model_id,
                "mean_deviation",
                Estimate { mean: l.mean, stderr: l.stderr + r.stderr, n: l.n },
                Estimate { mean: 2.0 * (c0[j] - r.mean), stderr: 2.0 * r.stderr, n: r.n },
            )
        });
        rows.extend(worst(dev.collect()));
    }
    Ok(rows)
}

/// Repulsiveness of a purely random process from its count law.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepulsivenessReport {
    pub family: String,
    pub repulsive: bool,
    pub weakly_repulsive: bool,
    /// First `n` violating `(n+1)p²_{n+1} ≥ (n+2)p_n p_{n+2}`.
    pub repulsive_witness: Option<usize>,
    /// First `n` violating `p₀(n+1)p_{n+1} ≤ p_n p₁`.
    pub weak_witness: Option<usize>,
}

const REL_TOL: f64 = 1e-12;

/// Scans every stored `n`.
pub fn classify_prpp(counts: &CountDistribution) -> RepulsivenessReport {
    let p = |n: usize| counts.prob(n);
    let nmax = counts.n_max();
    let mut repulsive_witness = None;
    for n in 0..nmax.saturating_sub(1) {
        let lhs = (n + 1) as f64 * p(n + 1) * p(n + 1);
        let rhs = (n + 2) as f64 * p(n) * p(n + 2);
        if lhs < rhs * (1.0 - REL_TOL) {
            repulsive_witness = Some(n);
            break;
        }
    }
    let mut weak_witness = None;
    for n in 0..nmax {
        let lhs = p(0) * (n + 1) as f64 * p(n + 1);
        let rhs = p(n) * p(1);
        if lhs > rhs * (1.0 + REL_TOL) {
            weak_witness = Some(n);
            break;
        }
    }
    RepulsivenessReport {
        family: format!("{:?}", counts.law()),
        repulsive: repulsive_witness.is_none(),
        weakly_repulsive: weak_witness.is_none(),
        repulsive_witness,
        weak_witness,
    }
}

/// Outcome of a monotonicity scan of `c(x, φ + y) ≤ c(x, φ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonotonicityReport {
    /// Number of `(x, φ, y)` triples evaluated.
    pub checked: usize,
    /// Largest `c(x, φ + y) − c(x, φ)` seen (may be negative).
    pub worst_excess: f64,
    /// A triple exceeding the tolerance, as coordinates.
    pub witness: Option<(Point, Configuration, Point)>,
}

impl MonotonicityReport {
    pub fn pass(&self) -> bool {
        self.witness.is_none()
    }

    fn record(&mut self, excess: f64, x: &Point, phi: &Configuration, y: &Point, tol: f64) {
        self.checked += 1;
        if excess > self.worst_excess {
            self.worst_excess = excess;
        }
        if excess > tol && self.witness.is_none() {
            self.witness = Some((*x, phi.clone(), *y));
        }
    }
}

fn subsets(n: usize, max_size: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    f(cur);
    if cur.len() == max_size {
        return;
    }
    for i in start..n {
        cur.push(i);
        subsets(n, max_size, i + 1, cur, f);
        cur.pop();
    }
}

/// Every simple `φ` of at most `max_size` cells, every cell `x` and `y`.
pub fn exhaustive_monotonicity(e: &dyn Papangelou, grid: &Grid, max_size: usize, tol: f64) -> MonotonicityReport {
    let cells: Vec<Point> = grid.points().collect();
    let mut rep = MonotonicityReport { checked: 0, worst_excess: f64::NEG_INFINITY, witness: None };
    subsets(cells.len(), max_size, 0, &mut Vec::new(), &mut |idx| {
        let phi = Configuration::from_points(idx.iter().map(|&i| cells[i]));
        let base: Vec<f64> = cells.iter().map(|x| e.at(x, &phi)).collect();
        for y in &cells {
            let grown = phi.with(*y);
            for (x, c0) in cells.iter().zip(&base) {
                rep.record(e.at(x, &grown) - c0, x, &phi, y, tol);
            }
        }
    });
    rep
}

/// Random `φ` of uniform size in `0..=max_size`, `x` and `y` drawn
/// uniformly from `space`.
pub fn random_monotonicity(
    e: &dyn Papangelou,
    space: &Space,
    max_size: usize,
    trials: usize,
    tol: f64,
    streams: &Streams,
) -> MonotonicityReport {
    let mut rep = MonotonicityReport { checked: 0, worst_excess: f64::NEG_INFINITY, witness: None };
    let mut rng = streams.rng(0);
    for _ in 0..trials {
        let k = rng.random_range(0..=max_size);
        let phi = Configuration::from_points((0..k).map(|_| space.uniform_point(&mut rng)));
        let (x, y) = (space.uniform_point(&mut rng), space.uniform_point(&mut rng));
        rep.record(e.at(&x, &phi.with(y)) - e.at(&x, &phi), &x, &phi, &y, tol);
    }
    rep
}
