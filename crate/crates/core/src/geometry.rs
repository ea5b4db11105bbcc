//! Ground spaces, reference measures, finite configurations, intensity
//! densities, quadrature and the total-variation metrics.
//!
//! Points are always stored with three coordinates; unused axes are zero.
//! Disk points are complex numbers `x + iy` stored as `[x, y, 0]`.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::{Error, Result};

/// Default midpoint mesh per axis for `d <= 2`.
pub const DEFAULT_RESOLUTION: usize = 256;
/// Default midpoint mesh per axis for `d = 3`.
pub const DEFAULT_RESOLUTION_3D: usize = 64;

/// A location in the ground space.
///
/// Continuous points compare by exact coordinates; grid cells compare by
/// cell index only (the stored location is carried for convenience).
#[derive(Clone, Copy, Debug)]
pub enum Point {
    Site([f64; 3]),
    Cell { index: u32, at: [f64; 3] },
}

impl Point {
    pub fn site(coords: &[f64]) -> Point {
        let mut c = [0.0; 3];
        c[..coords.len()].copy_from_slice(coords);
        Point::Site(c)
    }

    pub fn x(x: f64) -> Point {
        Point::Site([x, 0.0, 0.0])
    }

    pub fn xy(x: f64, y: f64) -> Point {
        Point::Site([x, y, 0.0])
    }

    pub fn coords(&self) -> [f64; 3] {
        match self {
            Point::Site(c) | Point::Cell { at: c, .. } => *c,
        }
    }

    pub fn cell(&self) -> Option<usize> {
        match self {
            Point::Cell { index, .. } => Some(*index as usize),
            Point::Site(_) => None,
        }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        let (a, b) = (self.coords(), other.coords());
        ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
    }

    /// Multiplies the coordinates by `factor`; a cell keeps its index.
    pub fn scaled(&self, factor: f64) -> Point {
        let c = self.coords();
        let at = [c[0] * factor, c[1] * factor, c[2] * factor];
        match self {
            Point::Site(_) => Point::Site(at),
            Point::Cell { index, .. } => Point::Cell { index: *index, at },
        }
    }

    fn key_cmp(&self, other: &Point) -> Ordering {
        match (self, other) {
            (Point::Site(a), Point::Site(b)) => a[0]
                .total_cmp(&b[0])
                .then(a[1].total_cmp(&b[1]))
                .then(a[2].total_cmp(&b[2])),
            (Point::Cell { index: i, .. }, Point::Cell { index: j, .. }) => i.cmp(j),
            (Point::Site(_), Point::Cell { .. }) => Ordering::Less,
            (Point::Cell { .. }, Point::Site(_)) => Ordering::Greater,
        }
    }
}

impl PartialEq for Point {
    fn eq(&self, other: &Self) -> bool {
        self.key_cmp(other) == Ordering::Equal
    }
}

impl Eq for Point {}

impl PartialOrd for Point {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Point {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key_cmp(other)
    }
}

/// A finite multiset of points, kept sorted so that equality ignores order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Configuration {
    entries: Vec<(Point, u32)>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points<I: IntoIterator<Item = Point>>(points: I) -> Self {
        let mut pts: Vec<Point> = points.into_iter().collect();
        pts.sort();
        let mut entries: Vec<(Point, u32)> = Vec::with_capacity(pts.len());
        for p in pts {
            match entries.last_mut() {
                Some((q, m)) if *q == p => *m += 1,
                _ => entries.push((p, 1)),
            }
        }
        Self { entries }
    }

    /// Builds from `(location, multiplicity)` pairs; zero multiplicities are rejected.
    pub fn from_entries<I: IntoIterator<Item = (Point, u32)>>(entries: I) -> Result<Self> {
        let mut c = Self::new();
        for (p, m) in entries {
            if m == 0 {
                return Err(Error::InvalidParameter("multiplicity must be positive".into()));
            }
            c.insert_n(p, m);
        }
        Ok(c)
    }

    /// Cardinality `|φ|`, counting multiplicities.
    pub fn len(&self) -> usize {
        self.entries.iter().map(|(_, m)| *m as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Number of distinct locations.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(Point, u32)] {
        &self.entries
    }

    /// Every point, repeated according to its multiplicity.
    pub fn iter(&self) -> impl Iterator<Item = &Point> + '_ {
        self.entries.iter().flat_map(|(p, m)| std::iter::repeat_n(p, *m as usize))
    }

    pub fn multiplicity(&self, p: &Point) -> u32 {
        match self.entries.binary_search_by(|(q, _)| q.cmp(p)) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.multiplicity(p) > 0
    }

    pub fn insert(&mut self, p: Point) {
        self.insert_n(p, 1);
    }

    pub fn insert_n(&mut self, p: Point, k: u32) {
        if k == 0 {
            return;
        }
        match self.entries.binary_search_by(|(q, _)| q.cmp(&p)) {
            Ok(i) => self.entries[i].1 += k,
            Err(i) => self.entries.insert(i, (p, k)),
        }
    }

    /// Removes one copy of `p`; returns whether anything was removed.
    pub fn remove_one(&mut self, p: &Point) -> bool {
        match self.entries.binary_search_by(|(q, _)| q.cmp(p)) {
            Ok(i) => {
                if self.entries[i].1 > 1 {
                    self.entries[i].1 -= 1;
                } else {
                    self.entries.remove(i);
                }
                true
            }
            Err(_) => false,
        }
    }

    /// `φ + x`.
    pub fn with(&self, p: Point) -> Self {
        let mut c = self.clone();
        c.insert(p);
        c
    }

    /// `φ \ x` (one copy).
    pub fn without(&self, p: &Point) -> Self {
        let mut c = self.clone();
        c.remove_one(p);
        c
    }

    /// Multiset union (superposition).
    pub fn union(&self, other: &Configuration) -> Self {
        let mut out = Vec::with_capacity(self.entries.len() + other.entries.len());
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((a[i].0, a[i].1 + b[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self { entries: out }
    }

    pub fn count<F: Fn(&Point) -> bool>(&self, pred: F) -> usize {
        self.entries.iter().filter(|(p, _)| pred(p)).map(|(_, m)| *m as usize).sum()
    }

    pub fn filter<F: Fn(&Point) -> bool>(&self, pred: F) -> Self {
        Self { entries: self.entries.iter().copied().filter(|(p, _)| pred(p)).collect() }
    }

    pub fn map<F: Fn(&Point) -> Point>(&self, f: F) -> Self {
        let mut c = Self::new();
        for (p, m) in &self.entries {
            c.insert_n(f(p), *m);
        }
        c
    }
}

impl FromIterator<Point> for Configuration {
    fn from_iter<I: IntoIterator<Item = Point>>(iter: I) -> Self {
        Self::from_points(iter)
    }
}

/// `|a \ b| + |b \ a|` with multiset semantics.
pub fn tv_config(a: &Configuration, b: &Configuration) -> f64 {
    let (ea, eb) = (a.entries(), b.entries());
    let (mut i, mut j) = (0, 0);
    let mut d: u64 = 0;
    while i < ea.len() && j < eb.len() {
        match ea[i].0.cmp(&eb[j].0) {
            Ordering::Less => {
                d += ea[i].1 as u64;
                i += 1;
            }
            Ordering::Greater => {
                d += eb[j].1 as u64;
                j += 1;
            }
            Ordering::Equal => {
                d += ea[i].1.abs_diff(eb[j].1) as u64;
                i += 1;
                j += 1;
            }
        }
    }
    d += ea[i..].iter().map(|(_, m)| *m as u64).sum::<u64>();
    d += eb[j..].iter().map(|(_, m)| *m as u64).sum::<u64>();
    d as f64
}

/// Weighted discrete ground space.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    dim: usize,
    locations: Vec<[f64; 3]>,
    weights: Vec<f64>,
}

impl Grid {
    pub fn new(dim: usize, locations: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidSpace(format!("grid dimension {dim} not in 1..=3")));
        }
        if locations.is_empty() || locations.len() != weights.len() {
            return Err(Error::InvalidSpace("grid needs one positive weight per cell".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidSpace("grid weights must be positive and finite".into()));
        }
        if locations.len() > u32::MAX as usize {
            return Err(Error::InvalidSpace("too many cells".into()));
        }
        Ok(Self { dim, locations, weights })
    }

    /// Cell centres of a regular partition of a box; weights are cell volumes.
    pub fn regular(lower: &[f64], upper: &[f64], per_axis: usize) -> Result<Self> {
        let space = Space::new_box(lower, upper)?;
        if per_axis == 0 {
            return Err(Error::InvalidSpace("per_axis must be positive".into()));
        }
        let q = space.quadrature(per_axis);
        Self::new(lower.len(), q.nodes.iter().map(|p| p.coords()).collect(), q.weights)
    }

    /// Polar partition of a disk: a central disk cell, then `rings - 1`
    /// annuli of equal width split into roughly square sectors. Weights
    /// are the exact cell areas, locations the mid-radius mid-angle points.
    pub fn polar_disk(center: [f64; 2], radius: f64, rings: usize) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) || rings == 0 {
            return Err(Error::InvalidSpace("polar grid needs radius > 0 and rings >= 1".into()));
        }
        let dr = radius / rings as f64;
        let mut locations = vec![[center[0], center[1], 0.0]];
        let mut weights = vec![PI * dr * dr];
        for i in 1..rings {
            let (r0, r1) = (i as f64 * dr, (i + 1) as f64 * dr);
            let sectors = ((2.0 * PI * (i as f64 + 0.5)).round() as usize).max(3);
            let dtheta = 2.0 * PI / sectors as f64;
            let rm = 0.5 * (r0 + r1);
            for k in 0..sectors {
                let th = (k as f64 + 0.5) * dtheta;
                locations.push([center[0] + rm * th.cos(), center[1] + rm * th.sin(), 0.0]);
                weights.push(0.5 * dtheta * (r1 * r1 - r0 * r0));
            }
        }
        Self::new(2, locations, weights)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn location(&self, i: usize) -> [f64; 3] {
        self.locations[i]
    }

    pub fn point(&self, i: usize) -> Point {
        Point::Cell { index: i as u32, at: self.locations[i] }
    }

    pub fn points(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.len()).map(|i| self.point(i))
    }

    fn scaled(&self, coord_factor: f64, weight_factor: f64) -> Self {
        Self {
            dim: self.dim,
            locations: self
                .locations
                .iter()
                .map(|c| [c[0] * coord_factor, c[1] * coord_factor, c[2] * coord_factor])
                .collect(),
            weights: self.weights.iter().map(|w| w * weight_factor).collect(),
        }
    }
}

/// The ground set `X` together with its reference measure `ℓ`.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// Axis-aligned box in `R^d` with Lebesgue measure.
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Disk in `C` with Lebesgue measure.
    Disk { center: [f64; 2], radius: f64 },
    /// Weighted cells.
    Grid(Grid),
}

impl Space {
    pub fn new_box(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.is_empty() || lower.len() > 3 || lower.len() != upper.len() {
            return Err(Error::InvalidSpace("box dimension must be 1, 2 or 3".into()));
        }
        for (l, u) in lower.iter().zip(upper) {
            if !(l.is_finite() && u.is_finite() && l < u) {
                return Err(Error::InvalidSpace(format!("box needs lower < upper, got {l} / {u}")));
            }
        }
        Ok(Space::Box { lower: lower.to_vec(), upper: upper.to_vec() })
    }

    pub fn unit_box(dim: usize) -> Self {
        Space::Box { lower: vec![0.0; dim], upper: vec![1.0; dim] }
    }

    pub fn disk(center: [f64; 2], radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0 && center.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidSpace("disk needs finite centre and radius > 0".into()));
        }
        Ok(Space::Disk { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            Space::Box { lower, .. } => lower.len(),
            Space::Disk { .. } => 2,
            Space::Grid(g) => g.dim,
        }
    }

    /// Total reference mass `ℓ(X)`.
    pub fn volume(&self) -> f64 {
        match self {
            Space::Box { lower, upper } => lower.iter().zip(upper).map(|(l, u)| u - l).product(),
            Space::Disk { radius, .. } => PI * radius * radius,
            Space::Grid(g) => g.weights.iter().sum(),
        }
    }

    pub fn as_grid(&self) -> Option<&Grid> {
        match self {
            Space::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Membership by coordinates (closed sets); grid cells by index.
    pub fn contains(&self, p: &Point) -> bool {
        match self {
            Space::Box { lower, upper } => {
                let c = p.coords();
                lower.iter().zip(upper).enumerate().all(|(k, (l, u))| c[k] >= *l && c[k] <= *u)
            }
            Space::Disk { center, radius } => {
                let c = p.coords();
                (c[0] - center[0]).hypot(c[1] - center[1]) <= *radius
            }
            Space::Grid(g) => p.cell().is_some_and(|i| i < g.len()),
        }
    }

    /// Membership of a location, used when the space acts as a region `Λ`.
    /// Grid regions contain a point when its location matches a cell location.
    pub fn region_contains(&self, p: &Point) -> bool {
        match self {
            Space::Grid(g) => {
                let c = p.coords();
                g.locations.contains(&c)
            }
            _ => self.contains(p),
        }
    }

    /// Lower and upper corners of the bounding box (unused axes are zero).
    pub fn bounding_box(&self) -> ([f64; 3], [f64; 3]) {
        match self {
            Space::Box { lower, upper } => {
                let (mut lo, mut hi) = ([0.0; 3], [0.0; 3]);
                lo[..lower.len()].copy_from_slice(lower);
                hi[..upper.len()].copy_from_slice(upper);
                (lo, hi)
            }
            Space::Disk { center, radius } => (
                [center[0] - radius, center[1] - radius, 0.0],
                [center[0] + radius, center[1] + radius, 0.0],
            ),
            Space::Grid(g) => {
                let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
                for l in &g.locations {
                    for k in 0..3 {
                        lo[k] = lo[k].min(l[k]);
                        hi[k] = hi[k].max(l[k]);
                    }
                }
                for k in g.dim..3 {
                    lo[k] = 0.0;
                    hi[k] = 0.0;
                }
                (lo, hi)
            }
        }
    }

    pub fn default_resolution(&self) -> usize {
        if self.dim() >= 3 {
            DEFAULT_RESOLUTION_3D
        } else {
            DEFAULT_RESOLUTION
        }
    }

    /// Midpoint nodes on a uniform mesh for Box and Disk (Disk uses its
    /// bounding box with an indicator mask); the cells themselves on a Grid.
    pub fn quadrature(&self, resolution: usize) -> Quadrature {
        match self {
            Space::Grid(g) => Quadrature { nodes: g.points().collect(), weights: g.weights.clone() },
            Space::Box { lower, upper } => midpoint_mesh(lower, upper, resolution.max(1), |_| true),
            Space::Disk { center, radius } => {
                let lower = [center[0] - radius, center[1] - radius];
                let upper = [center[0] + radius, center[1] + radius];
                let (c, r) = (*center, *radius);
                midpoint_mesh(&lower, &upper, resolution.max(1), move |p| {
                    (p[0] - c[0]).hypot(p[1] - c[1]) <= r
                })
            }
        }
    }

    /// A point drawn from the normalised reference measure.
    pub fn uniform_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        match self {
            Space::Box { lower, upper } => {
                let mut c = [0.0; 3];
                for k in 0..lower.len() {
                    c[k] = lower[k] + (upper[k] - lower[k]) * rng.random::<f64>();
                }
                Point::Site(c)
            }
            Space::Disk { center, radius } => loop {
                let x = 2.0 * rng.random::<f64>() - 1.0;
                let y = 2.0 * rng.random::<f64>() - 1.0;
                if x * x + y * y <= 1.0 {
                    break Point::xy(center[0] + radius * x, center[1] + radius * y);
                }
            },
            Space::Grid(g) => {
                let total: f64 = g.weights.iter().sum();
                let mut u = rng.random::<f64>() * total;
                for (i, w) in g.weights.iter().enumerate() {
                    if u < *w {
                        return g.point(i);
                    }
                    u -= w;
                }
                g.point(g.len() - 1)
            }
        }
    }

    /// Image of the space under `x ↦ ε^{1/d} x`; grid weights scale by `ε`.
    pub fn rescaled(&self, eps: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParameter(format!("rescaling needs eps > 0, got {eps}")));
        }
        let f = eps.powf(1.0 / self.dim() as f64);
        Ok(match self {
            Space::Box { lower, upper } => Space::Box {
                lower: lower.iter().map(|l| l * f).collect(),
                upper: upper.iter().map(|u| u * f).collect(),
            },
            Space::Disk { center, radius } => {
                Space::Disk { center: [center[0] * f, center[1] * f], radius: radius * f }
            }
            Space::Grid(g) => Space::Grid(g.scaled(f, eps)),
        })
    }
}

fn midpoint_mesh<F: Fn(&[f64; 3]) -> bool>(
    lower: &[f64],
    upper: &[f64],
    res: usize,
    keep: F,
) -> Quadrature {
    let d = lower.len();
    let h: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| (u - l) / res as f64).collect();
    let w: f64 = h.iter().product();
    let total = res.pow(d as u32);
    let mut nodes = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        let mut c = [0.0; 3];
        for k in 0..d {
            c[k] = lower[k] + (idx[k] as f64 + 0.5) * h[k];
        }
        if keep(&c) {
            nodes.push(Point::Site(c));
        }
        for k in (0..d).rev() {
            idx[k] += 1;
            if idx[k] < res {
                break;
            }
            idx[k] = 0;
        }
    }
    let weights = vec![w; nodes.len()];
    Quadrature { nodes, weights }
}

/// Nodes and weights of a quadrature rule (or of an atomic measure).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Quadrature {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, f64)> + '_ {
        self.nodes.iter().zip(self.weights.iter().copied())
    }

    pub fn integrate<F: Fn(&Point) -> f64>(&self, f: F) -> Result<f64> {
        let mut s = 0.0;
        for (p, w) in self.iter() {
            let v = f(p);
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("integrand is {v} at {:?}", p.coords())));
            }
            s += w * v;
        }
        Ok(s)
    }
}

/// `∫_X f dℓ` by midpoint rule (Box, Disk) or exact weighted sum (Grid).
pub fn integrate<F: Fn(&Point) -> f64>(f: F, space: &Space, resolution: usize) -> Result<f64> {
    space.quadrature(resolution).integrate(f)
}

/// Nonnegative function on the ground space: an intensity density, a
/// retention probability, or a potential.
#[derive(Clone)]
pub enum Density {
    Constant(f64),
    /// `offset + slope · x`.
    Affine { offset: f64, slope: [f64; 3] },
    /// Values per grid cell index.
    Tabulated(Arc<Vec<f64>>),
    /// Arbitrary function with a known upper bound.
    Function { f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>, sup: f64 },
    /// `1_Λ`.
    Indicator(Arc<Space>),
    Product(Arc<Density>, Arc<Density>),
    Sum(Arc<Vec<Density>>),
    /// `x ↦ inner(ε^{-1/d} x) / ε`.
    Rescaled { inner: Arc<Density>, eps: f64, dim: usize },
}

/// An intensity measure, represented by its density with respect to `ℓ`.
pub type IntensityMeasure = Density;

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Density::Constant(c) => write!(f, "Constant({c})"),
            Density::Affine { offset, slope } => write!(f, "Affine({offset}, {slope:?})"),
            Density::Tabulated(v) => write!(f, "Tabulated({} cells)", v.len()),
            Density::Function { sup, .. } => write!(f, "Function(sup = {sup})"),
            Density::Indicator(s) => write!(f, "Indicator({s:?})"),
            Density::Product(a, b) => write!(f, "({a:?} * {b:?})"),
            Density::Sum(v) => write!(f, "Sum{v:?}"),
            Density::Rescaled { inner, eps, dim } => write!(f, "Rescaled({inner:?}, {eps}, {dim})"),
        }
    }
}

impl Density {
    pub fn constant(c: f64) -> Self {
        Density::Constant(c)
    }

    pub fn tabulated(values: Vec<f64>) -> Self {
        Density::Tabulated(Arc::new(values))
    }

    pub fn from_fn<F: Fn(&Point) -> f64 + Send + Sync + 'static>(f: F, sup: f64) -> Self {
        Density::Function { f: Arc::new(f), sup }
    }

    pub fn at(&self, x: &Point) -> f64 {
        match self {
            Density::Constant(c) => *c,
            Density::Affine { offset, slope } => {
                let c = x.coords();
                offset + slope[0] * c[0] + slope[1] * c[1] + slope[2] * c[2]
            }
            Density::Tabulated(v) => match x.cell() {
                Some(i) if i < v.len() => v[i],
                _ => f64::NAN,
            },
            Density::Function { f, .. } => f(x),
            Density::Indicator(s) => {
                if s.region_contains(x) {
                    1.0
                } else {
                    0.0
                }
            }
            Density::Product(a, b) => a.at(x) * b.at(x),
            Density::Sum(v) => v.iter().map(|d| d.at(x)).sum(),
            Density::Rescaled { inner, eps, dim } => {
                inner.at(&x.scaled(eps.powf(-1.0 / *dim as f64))) / eps
            }
        }
    }

    /// An upper bound for the density on `space`.
    pub fn sup(&self, space: &Space) -> f64 {
        match self {
            Density::Constant(c) => *c,
            Density::Affine { offset, slope } => {
                let (lo, hi) = space.bounding_box();
                offset
                    + (0..3)
                        .map(|k| (slope[k] * lo[k]).max(slope[k] * hi[k]))
                        .sum::<f64>()
            }
            Density::Tabulated(v) => v.iter().copied().fold(0.0, f64::max),
            Density::Function { sup, .. } => *sup,
            Density::Indicator(_) => 1.0,
            Density::Product(a, b) => a.sup(space) * b.sup(space),
            Density::Sum(v) => v.iter().map(|d| d.sup(space)).sum(),
            Density::Rescaled { inner, eps, .. } => match space.rescaled(1.0 / eps) {
                Ok(pre) => inner.sup(&pre) / eps,
                Err(_) => f64::INFINITY,
            },
        }
    }

    /// `Some(c)` when the density is the constant `c` everywhere.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            Density::Constant(c) => Some(*c),
            Density::Affine { offset, slope } if slope.iter().all(|s| *s == 0.0) => Some(*offset),
            Density::Product(a, b) => Some(a.as_constant()? * b.as_constant()?),
            Density::Sum(v) => v.iter().map(|d| d.as_constant()).sum(),
            Density::Rescaled { inner, eps, .. } => inner.as_constant().map(|c| c / eps),
            _ => None,
        }
    }

    /// Total mass `∫ m dℓ`: exact on grids and for constant or affine
    /// densities on boxes and disks, midpoint quadrature otherwise.
    pub fn total_mass(&self, space: &Space) -> Result<f64> {
        let mass = match (self, space) {
            (_, Space::Grid(_)) => integrate(|x| self.at(x), space, 1)?,
            (Density::Constant(c), _) => c * space.volume(),
            (Density::Affine { .. }, Space::Box { lower, upper }) => {
                let mid: Vec<f64> = lower.iter().zip(upper).map(|(l, u)| 0.5 * (l + u)).collect();
                self.at(&Point::site(&mid)) * space.volume()
            }
            (Density::Affine { .. }, Space::Disk { center, .. }) => {
                self.at(&Point::xy(center[0], center[1])) * space.volume()
            }
            (Density::Sum(parts), _) => parts.iter().map(|d| d.total_mass(space)).sum::<Result<f64>>()?,
            (Density::Product(a, b), _) if a.as_constant().is_some() || b.as_constant().is_some() => {
                let (c, rest) = match a.as_constant() {
                    Some(c) => (c, b),
                    None => (b.as_constant().unwrap_or(0.0), a),
                };
                if c == 0.0 {
                    0.0
                } else {
                    c * rest.total_mass(space)?
                }
            }
            (Density::Product(d, ind), Space::Box { .. }) | (Density::Product(ind, d), Space::Box { .. })
                if matches!(**ind, Density::Indicator(ref r) if matches!(**r, Space::Box { .. })) =>
            {
                let Density::Indicator(r) = &**ind else { unreachable!() };
                match box_intersection(space, r) {
                    Some(b) => d.total_mass(&b)?,
                    None => 0.0,
                }
            }
            (Density::Indicator(r), Space::Box { .. }) if matches!(**r, Space::Box { .. }) => {
                box_intersection(space, r).map_or(0.0, |b| b.volume())
            }
            // y = ε^{-1/d} x maps the space onto its 1/ε rescaling with dx = ε dy.
            (Density::Rescaled { inner, eps, .. }, Space::Box { .. } | Space::Disk { .. }) => {
                inner.total_mass(&space.rescaled(1.0 / eps)?)?
            }
            _ => integrate(|x| self.at(x), space, space.default_resolution())?,
        };
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::NonFinite(format!("total mass {mass}")));
        }
        Ok(mass)
    }

    /// Checks finiteness and nonnegativity at the quadrature nodes.
    pub fn validate(&self, space: &Space) -> Result<()> {
        let q = space.quadrature(space.default_resolution().min(64));
        for p in &q.nodes {
            let v = self.at(p);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "density value {v} at {:?} is not a finite nonnegative number",
                    p.coords()
                )));
            }
        }
        Ok(())
    }

    pub fn times(&self, other: &Density) -> Density {
        match (self.as_constant(), other.as_constant()) {
            (Some(a), Some(b)) => Density::Constant(a * b),
            _ => Density::Product(Arc::new(self.clone()), Arc::new(other.clone())),
        }
    }

    pub fn plus(&self, other: &Density) -> Density {
        match (self.as_constant(), other.as_constant()) {
            (Some(a), Some(b)) => Density::Constant(a + b),
            _ => Density::Sum(Arc::new(vec![self.clone(), other.clone()])),
        }
    }

    pub fn restricted_to(&self, region: &Space) -> Density {
        Density::Product(Arc::new(self.clone()), Arc::new(Density::Indicator(Arc::new(region.clone()))))
    }

    pub fn rescaled(&self, eps: f64, dim: usize) -> Density {
        match self.as_constant() {
            Some(c) => Density::Constant(c / eps),
            None => Density::Rescaled { inner: Arc::new(self.clone()), eps, dim },
        }
    }
}

fn box_intersection(a: &Space, b: &Space) -> Option<Space> {
    let (Space::Box { lower: l1, upper: u1 }, Space::Box { lower: l2, upper: u2 }) = (a, b) else {
        return None;
    };
    if l1.len() != l2.len() {
        return None;
    }
    let lower: Vec<f64> = l1.iter().zip(l2).map(|(x, y)| x.max(*y)).collect();
    let upper: Vec<f64> = u1.iter().zip(u2).map(|(x, y)| x.min(*y)).collect();
    Space::new_box(&lower, &upper).ok()
}

/// `∫ |m₁ − m₂| dℓ` at the default quadrature resolution.
pub fn tv_measures(m1: &Density, m2: &Density, space: &Space) -> Result<f64> {
    integrate(|x| (m1.at(x) - m2.at(x)).abs(), space, space.default_resolution())
}
