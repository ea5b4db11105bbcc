//! Kantorovich–Rubinstein lower and upper estimates, the count-law W1 and the
//! Polish distance.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::geometry::{tv_config, tv_measures, Configuration, Density, Point, Space};
use crate::models::{CountDistribution, Model, PointProcess};
use crate::montecarlo::{moments, Estimate};
use crate::rng::{StreamRng, Streams};
use crate::{Error, Result};

/// A functional of configurations with a certified Lipschitz constant for
/// the total-variation distance.
#[derive(Clone)]
pub struct TestFunctional {
    pub id: String,
    pub lipschitz: f64,
    f: Arc<dyn Fn(&Configuration) -> f64 + Send + Sync>,
}

impl fmt::Debug for TestFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TestFunctional({}, lip = {})", self.id, self.lipschitz)
    }
}

impl TestFunctional {
    pub fn new<F>(id: &str, lipschitz: f64, f: F) -> Self
    where
        F: Fn(&Configuration) -> f64 + Send + Sync + 'static,
    {
        Self { id: id.to_string(), lipschitz, f: Arc::new(f) }
    }

    pub fn eval(&self, phi: &Configuration) -> f64 {
        (self.f)(phi)
    }
}

/// Half-open axis-aligned box; faces on the outer boundary are closed so a
/// dyadic level partitions its parent exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DyadicBox {
    pub lower: [f64; 3],
    pub upper: [f64; 3],
    pub closed: [bool; 3],
    pub dim: usize,
}

impl DyadicBox {
    pub fn contains(&self, p: &Point) -> bool {
        let c = p.coords();
        (0..self.dim).all(|k| {
            c[k] >= self.lower[k] && (c[k] < self.upper[k] || (self.closed[k] && c[k] <= self.upper[k]))
        })
    }

    pub fn count(&self, phi: &Configuration) -> usize {
        phi.count(|p| self.contains(p))
    }

    /// `∫_A m dℓ` by midpoint rule (exact sum on grids).
    pub fn mass(&self, m: &Density, space: &Space, resolution: usize) -> Result<f64> {
        space.quadrature(resolution).integrate(|x| if self.contains(x) { m.at(x) } else { 0.0 })
    }
}

/// The `2^{ld}` boxes of level `l` over the bounding box of `space`, for
/// `l = 0..levels`, in level order.
pub fn dyadic_boxes(space: &Space, levels: usize) -> Vec<DyadicBox> {
    let (lo, hi) = space.bounding_box();
    let d = space.dim();
    let mut out = Vec::new();
    for l in 0..levels {
        let per = 1usize << l;
        let total = per.pow(d as u32);
        for idx in 0..total {
            let mut b = DyadicBox { lower: [0.0; 3], upper: [0.0; 3], closed: [true; 3], dim: d };
            let mut rest = idx;
            for k in 0..d {
                let i = rest % per;
                rest /= per;
                let h = (hi[k] - lo[k]) / per as f64;
                b.lower[k] = lo[k] + i as f64 * h;
                b.upper[k] = if i + 1 == per { hi[k] } else { lo[k] + (i + 1) as f64 * h };
                b.closed[k] = i + 1 == per;
            }
            out.push(b);
        }
    }
    out
}

pub fn cardinality() -> TestFunctional {
    TestFunctional::new("count", 1.0, |phi| phi.len() as f64)
}

pub fn box_count(id: &str, a: DyadicBox) -> TestFunctional {
    TestFunctional::new(id, 1.0, move |phi| a.count(phi) as f64)
}

pub fn saturating_count(id: &str, a: DyadicBox, k: usize) -> TestFunctional {
    TestFunctional::new(id, 1.0, move |phi| a.count(phi).min(k) as f64)
}

/// `1 − e^{−φ(A)}`.
pub fn soft_count(id: &str, a: DyadicBox) -> TestFunctional {
    TestFunctional::new(id, 1.0, move |phi| 1.0 - (-(a.count(phi) as f64)).exp())
}

/// Dyadic box counts over three levels, their truncations at 1, 2 and 4,
/// the cardinality and `1 − e^{−|φ|}`.
pub fn default_family(space: &Space) -> Vec<TestFunctional> {
    let boxes = dyadic_boxes(space, 4);
    let mut out = Vec::new();
    for (i, b) in boxes.iter().enumerate().skip(1) {
        out.push(box_count(&format!("box{i}"), *b));
        for k in [1, 2, 4] {
            out.push(saturating_count(&format!("box{i}_min{k}"), *b, k));
        }
    }
    out.push(cardinality());
    out.push(TestFunctional::new("soft_count", 1.0, |phi| 1.0 - (-(phi.len() as f64)).exp()));
    out
}

/// Largest `|F(φ ± x) − F(φ)|` seen over random insertions and deletions.
pub fn certify_lipschitz(f: &TestFunctional, space: &Space, trials: usize, streams: &Streams) -> Result<f64> {
    let mut worst: f64 = 0.0;
    let mut rng = streams.rng(0);
    for _ in 0..trials {
        let n = rng.random_range(0..8usize);
        let phi: Configuration = (0..n).map(|_| space.uniform_point(&mut rng)).collect();
        let base = f.eval(&phi);
        let x = space.uniform_point(&mut rng);
        worst = worst.max((f.eval(&phi.with(x)) - base).abs());
        if n > 0 {
            let y = *phi.iter().nth(rng.random_range(0..n)).expect("index below len");
            worst = worst.max((f.eval(&phi.without(&y)) - base).abs());
        }
    }
    if worst > f.lipschitz + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "functional {} moved by {worst} under one insertion or deletion",
            f.id
        )));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    LowerBound,
    UpperBound,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateReport {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub kind: EstimateKind,
    /// The functional that realized a lower bound.
    pub detail: String,
}

/// `max_F |E F(Φ_A) − E F(Φ_B)|` over the family.
///
/// With several functionals the first half of the replicas picks the
/// maximizing functional and the second half estimates its gap, so the
/// reported value carries no maximum-over-family selection bias. Both
/// processes are driven by the same random numbers in each replica, which
/// leaves each mean unbiased and makes identical laws give exactly zero.
pub fn kr_lower_bound(
    a: &dyn PointProcess,
    b: &dyn PointProcess,
    family: &[TestFunctional],
    n: usize,
    streams: &Streams,
) -> Result<EstimateReport> {
    if family.is_empty() {
        return Err(Error::InvalidParameter("empty functional family".into()));
    }
    let gaps = |fs: &[&TestFunctional], s: &Streams, count: usize| {
        moments(s, count, fs.len(), |rng, out| {
            // Common random numbers: both draws start from the same state.
            let mut twin = rng.clone();
            let pa = a.sample(rng)?;
            let pb = b.sample(&mut twin)?;
            for (o, f) in out.iter_mut().zip(fs) {
                *o = f.eval(&pa) - f.eval(&pb);
            }
            Ok(())
        })
    };
    let chosen = if family.len() == 1 {
        0
    } else {
        let all: Vec<&TestFunctional> = family.iter().collect();
        let sel = gaps(&all, &streams.child("select"), n / 2)?;
        (0..family.len()).max_by(|&i, &j| sel[i].mean().abs().total_cmp(&sel[j].mean().abs())).unwrap_or(0)
    };
    let (est_streams, count) = if family.len() == 1 {
        (streams.clone(), n)
    } else {
        (streams.child("estimate"), n - n / 2)
    };
    let m = gaps(&[&family[chosen]], &est_streams, count)?;
    let e = m[0].estimate();
    Ok(EstimateReport {
        value: e.mean.abs(),
        stderr: e.stderr,
        n_samples: n,
        seed: streams.seed(),
        kind: EstimateKind::LowerBound,
        detail: family[chosen].id.clone(),
    })
}

/// A sampler of joint draws `(Φ₁, Φ₂)` with the required marginals.
pub type Coupling<'a> = &'a (dyn Fn(&mut StreamRng) -> Result<(Configuration, Configuration)> + Sync);

/// `E Δ_TV(Φ₁, Φ₂)` under a coupling, an upper bound on the KR distance.
pub fn kr_upper_bound_coupled(coupled: Coupling<'_>, n: usize, streams: &Streams) -> Result<EstimateReport> {
    let m = moments(streams, n, 1, |rng, out| {
        let (x, y) = coupled(rng)?;
        out[0] = tv_config(&x, &y);
        Ok(())
    })?;
    let e = m[0].estimate();
    Ok(EstimateReport {
        value: e.mean,
        stderr: e.stderr,
        n_samples: n,
        seed: streams.seed(),
        kind: EstimateKind::UpperBound,
        detail: "coupling".into(),
    })
}

/// `Σ_k |F_p(k) − F_q(k)|`, the exact W1 distance between count laws.
///
/// Laws with a closed-form pmf are summed from the pmf past their stored
/// truncation, so the result does not carry the truncation error.
pub fn w1_counts(p: &CountDistribution, q: &CountDistribution) -> f64 {
    let top = p.n_max().max(q.n_max()) + 64;
    let (mut fp, mut fq) = (0.0, 0.0);
    let mut total = 0.0;
    for k in 0..top {
        fp = untruncated_cdf(p, k, fp);
        fq = untruncated_cdf(q, k, fq);
        total += (fp - fq).abs();
    }
    total
}

fn untruncated_cdf(c: &CountDistribution, k: usize, previous: f64) -> f64 {
    match c.law().pmf(k) {
        Some(v) => previous + v,
        None => c.cdf(k),
    }
}

/// `Ψ(x) = x/(1+x)`.
pub fn psi(x: f64) -> f64 {
    x / (1.0 + x)
}

/// Number of terms kept in the Polish series.
pub const POLISH_TERMS: usize = 32;

/// The first [`POLISH_TERMS`] dyadic boxes in level order.
pub fn polish_boxes(space: &Space) -> Vec<DyadicBox> {
    let mut levels = 1;
    while dyadic_boxes(space, levels).len() < POLISH_TERMS {
        levels += 1;
    }
    let mut b = dyadic_boxes(space, levels);
    b.truncate(POLISH_TERMS);
    b
}

/// Combines per-term gaps `g_k` with standard errors into
/// `Σ_k 2^{−k} Ψ(|g_k|)` and a delta-method standard error.
pub fn polish_series(gaps: &[Estimate]) -> (f64, f64) {
    let mut value = 0.0;
    let mut se = 0.0;
    for (k, g) in gaps.iter().enumerate() {
        let w = 0.5f64.powi(k as i32 + 1);
        let d = g.mean.abs();
        value += w * psi(d);
        se += w * g.stderr / (1.0 + d).powi(2);
    }
    (value, se)
}

/// `Σ_k 2^{−k} Ψ(|E f_k(Φ_A) − E f_k(Φ_B)|)` with `f_k = 1 − e^{−φ(A_k)}`.
pub fn polish_distance(
    a: &dyn PointProcess,
    b: &dyn PointProcess,
    space: &Space,
    n: usize,
    streams: &Streams,
) -> Result<EstimateReport> {
    let boxes = polish_boxes(space);
    let m = moments(streams, n, boxes.len(), |rng, out| {
        let pa = a.sample(rng)?;
        let pb = b.sample(rng)?;
        for (o, bx) in out.iter_mut().zip(&boxes) {
            *o = (-(bx.count(&pb) as f64)).exp() - (-(bx.count(&pa) as f64)).exp();
        }
        Ok(())
    })?;
    let gaps: Vec<Estimate> = m.iter().map(|x| x.estimate()).collect();
    let (value, stderr) = polish_series(&gaps);
    Ok(EstimateReport {
        value,
        stderr,
        n_samples: n,
        seed: streams.seed(),
        kind: EstimateKind::Exact,
        detail: "polish".into(),
    })
}

/// Optimal transport between two atomic directing laws with cost
/// `∫|m_i − m'_j|`, an upper bound on the KR distance between the Cox
/// processes.
pub fn cox_distance_bound(a: &Model, b: &Model) -> Result<f64> {
    let (Model::CoxAtomic { space: sa, atoms: aa }, Model::CoxAtomic { space: sb, atoms: ab }) = (a, b) else {
        return Err(Error::InvalidParameter("cox_distance_bound needs two atomic Cox models".into()));
    };
    if sa != sb {
        return Err(Error::SpaceMismatch);
    }
    for len in [aa.len(), ab.len()] {
        if len > 16 {
            return Err(Error::TooManyAtoms(len));
        }
    }
    let cost: Vec<Vec<f64>> = aa
        .iter()
        .map(|(_, m1)| ab.iter().map(|(_, m2)| tv_measures(m1, m2, sa)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let supply: Vec<f64> = aa.iter().map(|(w, _)| *w).collect();
    let demand: Vec<f64> = ab.iter().map(|(w, _)| *w).collect();
    Ok(transport(&supply, &demand, &cost))
}

/// Min-cost transport by successive shortest paths (Bellman-Ford on the
/// residual graph). Intended for at most a few dozen nodes.
pub fn transport(supply: &[f64], demand: &[f64], cost: &[Vec<f64>]) -> f64 {
    let (n, m) = (supply.len(), demand.len());
    // Nodes: 0 source, 1..=n supplies, n+1..=n+m demands, n+m+1 sink.
    let nodes = n + m + 2;
    let sink = nodes - 1;
    struct Edge {
        to: usize,
        cap: f64,
        cost: f64,
    }
    let mut edges: Vec<Edge> = Vec::new();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); nodes];
    let mut add = |edges: &mut Vec<Edge>, u: usize, v: usize, cap: f64, c: f64| {
        adj[u].push(edges.len());
        edges.push(Edge { to: v, cap, cost: c });
        adj[v].push(edges.len());
        edges.push(Edge { to: u, cap: 0.0, cost: -c });
    };
    for (i, s) in supply.iter().enumerate() {
        add(&mut edges, 0, 1 + i, *s, 0.0);
    }
    for (j, d) in demand.iter().enumerate() {
        add(&mut edges, 1 + n + j, sink, *d, 0.0);
    }
    for i in 0..n {
        for j in 0..m {
            add(&mut edges, 1 + i, 1 + n + j, f64::INFINITY, cost[i][j]);
        }
    }
    let target = supply.iter().sum::<f64>().min(demand.iter().sum());
    let mut flow = 0.0;
    let mut total = 0.0;
    const EPS: f64 = 1e-15;
    for _ in 0..10_000 {
        if target - flow <= EPS {
            break;
        }
        let mut dist = vec![f64::INFINITY; nodes];
        let mut prev: Vec<Option<usize>> = vec![None; nodes];
        dist[0] = 0.0;
        for _ in 0..nodes {
            let mut changed = false;
            for u in 0..nodes {
                if !dist[u].is_finite() {
                    continue;
                }
                for &e in &adj[u] {
                    let ed = &edges[e];
                    if ed.cap > EPS && dist[u] + ed.cost < dist[ed.to] - 1e-15 {
                        dist[ed.to] = dist[u] + ed.cost;
                        prev[ed.to] = Some(e);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut push = target - flow;
        let mut v = sink;
        while let Some(e) = prev[v] {
            push = push.min(edges[e].cap);
            v = edges[e ^ 1].to;
        }
        let mut v = sink;
        while let Some(e) = prev[v] {
            edges[e].cap -= push;
            edges[e ^ 1].cap += push;
            v = edges[e ^ 1].to;
        }
        flow += push;
        total += push * dist[sink];
    }
    total
}
