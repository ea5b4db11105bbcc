//! Parallel Monte-Carlo replication with thread-count-independent results.
//!
//! Replicas are grouped in fixed-size chunks. Each chunk runs sequentially
//! on one worker with per-replica streams from [`Streams::rng`]; chunk
//! accumulators are then merged in chunk order. The floating-point result
//! is identical for any rayon pool size.

use rayon::prelude::*;
use serde::Serialize;

use crate::rng::{StreamRng, Streams};
use crate::Result;

const CHUNK: usize = 256;

/// Running mean and variance (Welford), mergeable (Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        let w = other.n as f64 / n as f64;
        self.mean += d * w;
        self.m2 += other.m2 + d * d * self.n as f64 * w;
        self.n = n;
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Unbiased sample variance; zero below two observations.
    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).max(0.0)
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }

    pub fn estimate(&self) -> Estimate {
        Estimate { mean: self.mean, stderr: self.stderr(), n: self.n as usize }
    }
}

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Self { mean: value, stderr: 0.0, n: 0 }
    }

    /// Difference of two independent estimates.
    pub fn minus(&self, other: &Estimate) -> Estimate {
        Estimate {
            mean: self.mean - other.mean,
            stderr: self.stderr.hypot(other.stderr),
            n: self.n.min(other.n),
        }
    }
}

/// Runs `f` once per replica and returns the outputs in replica order.
pub fn replicate<T, F>(streams: &Streams, n: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&mut StreamRng) -> Result<T> + Sync,
{
    (0..n as u64).into_par_iter().map(|i| f(&mut streams.rng(i))).collect()
}

/// Accumulates `k` real statistics per replica. `f` fills a zeroed slice of
/// length `k` for each replica.
pub fn moments<F>(streams: &Streams, n: usize, k: usize, f: F) -> Result<Vec<Moments>>
where
    F: Fn(&mut StreamRng, &mut [f64]) -> Result<()> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partial: Vec<Vec<Moments>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![Moments::default(); k];
            let mut buf = vec![0.0; k];
            let end = ((c + 1) * CHUNK).min(n);
            for i in c * CHUNK..end {
                buf.iter_mut().for_each(|b| *b = 0.0);
                let mut rng = streams.rng(i as u64);
                f(&mut rng, &mut buf)?;
                for (a, &b) in acc.iter_mut().zip(&buf) {
                    a.push(b);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut total = vec![Moments::default(); k];
    for chunk in &partial {
        for (t, c) in total.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    Ok(total)
}

/// Single-statistic convenience wrapper around [`moments`].
pub fn mean<F>(streams: &Streams, n: usize, f: F) -> Result<Estimate>
where
    F: Fn(&mut StreamRng) -> Result<f64> + Sync,
{
    let m = moments(streams, n, 1, |rng, out| {
        out[0] = f(rng)?;
        Ok(())
    })?;
    Ok(m[0].estimate())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, -3.0, 7.25, 0.0];
        let mut m = Moments::default();
        xs.iter().for_each(|&x| m.push(x));
        let mean = xs.iter().sum::<f64>() / 6.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 5.0;
        assert!((m.mean() - mean).abs() < 1e-12);
        assert!((m.variance() - var).abs() < 1e-12);
    }

    #[test]
    fn merge_equals_sequential() {
        let xs: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..11].iter().for_each(|&x| a.push(x));
        xs[11..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean() - all.mean()).abs() < 1e-14);
        assert!((a.variance() - all.variance()).abs() < 1e-13);
    }

    #[test]
    fn independent_of_pool_size() {
        let s = Streams::new(11, "pool");
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mean(&s, 3000, |rng| Ok(rng.random::<f64>())).unwrap())
        };
        let one = run(1);
        let four = run(4);
        assert_eq!(one.mean.to_bits(), four.mean.to_bits());
        assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
    }
}
