//! Count distributions `(p_n)` for purely random point processes.

use rand::Rng;
use statrs::function::gamma::ln_gamma;

use crate::{Error, Result};

/// Truncation threshold for infinite-support laws.
pub const TAIL_TOLERANCE: f64 = 1e-12;

/// Closed-form family behind a count table, when there is one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CountLaw {
    Poisson(f64),
    /// `p_n = (1 − r) r^n`.
    Geometric(f64),
    Bernoulli(f64),
    Dirac(usize),
    Table,
}

impl CountLaw {
    /// Untruncated probability mass, for closed-form families.
    pub fn pmf(&self, n: usize) -> Option<f64> {
        match *self {
            CountLaw::Poisson(l) => Some(if l == 0.0 {
                if n == 0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                (-l + n as f64 * l.ln() - ln_gamma(n as f64 + 1.0)).exp()
            }),
            CountLaw::Geometric(r) => Some((1.0 - r) * r.powi(n as i32)),
            CountLaw::Bernoulli(p) => Some(match n {
                0 => 1.0 - p,
                1 => p,
                _ => 0.0,
            }),
            CountLaw::Dirac(k) => Some(if n == k { 1.0 } else { 0.0 }),
            CountLaw::Table => None,
        }
    }

    /// `(n+1) p_{n+1} / p_n` in closed form.
    fn ratio(&self, n: usize) -> Option<f64> {
        match *self {
            CountLaw::Poisson(l) => Some(l),
            CountLaw::Geometric(r) => Some((n + 1) as f64 * r),
            _ => None,
        }
    }
}

/// Probabilities `p_0..=p_{N_max}` summing to one, with the mass removed by
/// truncation recorded separately.
#[derive(Clone, Debug, PartialEq)]
pub struct CountDistribution {
    probs: Vec<f64>,
    tail: f64,
    law: CountLaw,
}

impl CountDistribution {
    pub fn poisson(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("Poisson mean {lambda}")));
        }
        let law = CountLaw::Poisson(lambda);
        let mut probs = Vec::new();
        let mut n = 0usize;
        loop {
            probs.push(law.pmf(n).unwrap_or(0.0));
            // Past the mode, successive ratios are at most lambda/(n+2) < 1,
            // so the remaining tail is bounded by a geometric series.
            if (n as f64) + 2.0 > lambda {
                let next = law.pmf(n + 1).unwrap_or(0.0);
                let q = lambda / (n as f64 + 2.0);
                let bound = next / (1.0 - q);
                if bound < TAIL_TOLERANCE {
                    return Ok(Self::normalized(probs, bound, law));
                }
            }
            n += 1;
        }
    }

    /// `p_n = (1 − r) r^n`; `r = 1/2` gives `p_n = 2^{-(n+1)}`.
    pub fn geometric(ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("geometric ratio {ratio} not in (0,1)")));
        }
        let law = CountLaw::Geometric(ratio);
        let mut probs = Vec::new();
        let mut n = 0;
        loop {
            probs.push((1.0 - ratio) * ratio.powi(n));
            let tail = ratio.powi(n + 1);
            if tail < TAIL_TOLERANCE {
                return Ok(Self::normalized(probs, tail, law));
            }
            n += 1;
        }
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidParameter(format!("Bernoulli parameter {p}")));
        }
        Ok(Self { probs: vec![1.0 - p, p], tail: 0.0, law: CountLaw::Bernoulli(p) })
    }

    pub fn dirac(n: usize) -> Self {
        let mut probs = vec![0.0; n + 1];
        probs[n] = 1.0;
        Self { probs, tail: 0.0, law: CountLaw::Dirac(n) }
    }

    /// An explicit table; the entries must sum to one within `1e-9`.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() || probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidParameter("count probabilities must be finite and >= 0".into()));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!("count probabilities sum to {s}")));
        }
        Ok(Self::normalized(probs, 0.0, CountLaw::Table))
    }

    fn normalized(mut probs: Vec<f64>, tail: f64, law: CountLaw) -> Self {
        let s: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= s);
        Self { probs, tail, law }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `p_n`, zero beyond the stored range.
    pub fn prob(&self, n: usize) -> f64 {
        self.probs.get(n).copied().unwrap_or(0.0)
    }

    pub fn n_max(&self) -> usize {
        self.probs.len() - 1
    }

    /// Mass removed by truncation before renormalisation.
    pub fn tail_mass(&self) -> f64 {
        self.tail
    }

    pub fn law(&self) -> CountLaw {
        self.law
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn cdf(&self, k: usize) -> f64 {
        if k >= self.n_max() {
            1.0
        } else {
            self.probs[..=k].iter().sum::<f64>().min(1.0)
        }
    }

    /// `(n+1) p_{n+1} / p_n`, in closed form for Poisson and geometric laws.
    ///
    /// For exact finite tables `p_{N_max+1} = 0`; for truncated laws an index
    /// reaching past the stored range is an error.
    pub fn ratio(&self, n: usize) -> Result<f64> {
        let exact = self.tail == 0.0 && self.law.ratio(n).is_none();
        if n > self.n_max() || (n == self.n_max() && !exact) {
            return Err(Error::TruncationExceeded { requested: n + 1, n_max: self.n_max() });
        }
        if let Some(r) = self.law.ratio(n) {
            return Ok(r);
        }
        let pn = self.probs[n];
        if pn <= 0.0 {
            return Err(Error::InvalidParameter(format!("p_{n} = 0; ratio undefined")));
        }
        Ok((n + 1) as f64 * self.prob(n + 1) / pn)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let mut u: f64 = rng.random();
        for (n, p) in self.probs.iter().enumerate() {
            if u < *p {
                return n;
            }
            u -= p;
        }
        // Rounding residue: return the last positive entry.
        self.probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}
