//! Janossy-ratio oracle and α-determinants.

use nalgebra::DMatrix;

use crate::geometry::{Configuration, Point};
use crate::models::kernel::C64;
use crate::models::Model;
use crate::{Error, Result};

/// Largest configuration the oracle accepts.
pub const ORACLE_MAX_POINTS: usize = 12;

/// `j(φ + x)/j(φ)`, or 0 when `j(φ) = 0`, from explicit Janossy densities.
///
/// Normalising constants that cancel (the Gibbs partition function, the
/// conditional acceptance probability) are set to one.
pub fn janossy_ratio_oracle(model: &Model, x: &Point, phi: &Configuration) -> Result<f64> {
    if phi.len() > ORACLE_MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "oracle handles at most {ORACLE_MAX_POINTS} points, got {}",
            phi.len()
        )));
    }
    let j = |c: &Configuration| -> Result<f64> {
        Ok(match model {
            Model::Poisson { space, intensity } => {
                let mass = intensity.total_mass(space)?;
                (-mass).exp() * c.iter().map(|y| intensity.at(y)).product::<f64>()
            }
            Model::PurelyRandom { counts, density, .. } => {
                let n = c.len();
                let fact: f64 = (1..=n).map(|k| k as f64).product();
                counts.prob(n) * fact * c.iter().map(|y| density.at(y)).product::<f64>()
            }
            Model::Conditional { space, intensity, condition, .. } => {
                if !condition.holds(c) {
                    0.0
                } else {
                    let mass = intensity.total_mass(space)?;
                    (-mass).exp() * c.iter().map(|y| intensity.at(y)).product::<f64>()
                }
            }
            Model::Gibbs(g) => (-g.theta * g.energy(c)).exp(),
            other => {
                return Err(Error::Unsupported(format!("no explicit Janossy density for {}", other.family())))
            }
        })
    };
    let den = j(phi)?;
    if den == 0.0 {
        return Ok(0.0);
    }
    Ok(j(&phi.with(*x))? / den)
}

/// `det_α A = Σ_σ α^{k − ν(σ)} Π_i A_{i σ(i)}`, with `ν(σ)` the number of
/// cycles, by dynamic programming over subsets.
///
/// A permutation factors into cycles, so `det_α A` is a sum over set
/// partitions of products of `α^{|T|−1} · cyc(T)`, where `cyc(T)` sums the
/// cyclic products over the cycles through `T`.
pub fn alpha_det(a: &DMatrix<C64>, alpha: f64) -> C64 {
    let k = a.nrows();
    assert!(k <= 20, "alpha_det: matrix too large");
    if k == 0 {
        return C64::new(1.0, 0.0);
    }
    let full = 1usize << k;
    let zero = C64::new(0.0, 0.0);
    // paths[mask * k + e]: sum of products along paths from min(mask) that
    // visit exactly `mask` and end at `e`.
    let mut paths = vec![zero; full * k];
    for s in 0..k {
        paths[(1 << s) * k + s] = C64::new(1.0, 0.0);
    }
    for mask in 1..full {
        let s = mask.trailing_zeros() as usize;
        for e in 0..k {
            let v = paths[mask * k + e];
            if v == zero {
                continue;
            }
            for n in (s + 1)..k {
                if mask & (1 << n) == 0 {
                    paths[(mask | (1 << n)) * k + n] += v * a[(e, n)];
                }
            }
        }
    }
    let mut cyc = vec![zero; full];
    for (mask, c) in cyc.iter_mut().enumerate().skip(1) {
        let s = mask.trailing_zeros() as usize;
        let size = mask.count_ones() as i32;
        let sum: C64 = (0..k).filter(|e| mask & (1 << e) != 0).map(|e| paths[mask * k + e] * a[(e, s)]).sum();
        *c = sum * alpha.powi(size - 1);
    }
    let mut f = vec![zero; full];
    f[0] = C64::new(1.0, 0.0);
    for mask in 1..full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        // Enumerate subsets `t` of `mask` that contain its lowest element.
        let mut sub = rest;
        let mut acc = zero;
        loop {
            let t = sub | low;
            acc += cyc[t] * f[mask ^ t];
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
        f[mask] = acc;
    }
    f[full - 1]
}

/// Permutation-sum α-determinant for matrices up to 8×8.
pub fn alpha_det_bruteforce(a: &DMatrix<C64>, alpha: f64) -> C64 {
    let k = a.nrows();
    assert!(k <= 8, "brute-force alpha determinant is limited to 8x8");
    let mut perm: Vec<usize> = (0..k).collect();
    let mut total = C64::new(0.0, 0.0);
    permute(&mut perm, 0, &mut |p| {
        let mut seen = vec![false; k];
        let mut cycles = 0;
        for i in 0..k {
            if !seen[i] {
                cycles += 1;
                let mut j = i;
                while !seen[j] {
                    seen[j] = true;
                    j = p[j];
                }
            }
        }
        let prod: C64 = (0..k).map(|i| a[(i, p[i])]).product();
        total += prod * alpha.powi(k as i32 - cycles);
    });
    total
}

fn permute<F: FnMut(&[usize])>(p: &mut Vec<usize>, i: usize, f: &mut F) {
    if i == p.len() {
        f(p);
        return;
    }
    for j in i..p.len() {
        p.swap(i, j);
        permute(p, i + 1, f);
        p.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn real(k: usize, v: &[f64]) -> DMatrix<C64> {
        DMatrix::from_row_slice(k, k, v).map(|x| C64::new(x, 0.0))
    }

    #[test]
    fn alpha_minus_one_is_det() {
        let a = real(3, &[2.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 1.0]);
        let det = a.map(|z| z.re).determinant();
        assert!((alpha_det(&a, -1.0).re - det).abs() < 1e-12);
    }

    #[test]
    fn alpha_one_is_permanent() {
        let a = real(2, &[1.0, 2.0, 3.0, 4.0]);
        assert!((alpha_det(&a, 1.0).re - 10.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn dp_matches_bruteforce(k in 1usize..6, seed in any::<u64>(), alpha in -1.0f64..1.0) {
            let mut s = seed;
            let mut next = || {
                s = crate::rng::mix64(s);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            };
            let a = DMatrix::from_fn(k, k, |_, _| C64::new(next(), next()));
            let x = alpha_det(&a, alpha);
            let y = alpha_det_bruteforce(&a, alpha);
            prop_assert!((x - y).norm() < 1e-10);
        }
    }
}
