//! Chi-square tests on integer-valued samples.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Expected cell count below which neighbouring cells are pooled.
const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

impl ChiSquare {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value >= significance
    }
}

fn p_value(statistic: f64, dof: usize) -> f64 {
    if dof == 0 {
        return 1.0;
    }
    let chi = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    1.0 - chi.cdf(statistic)
}

pub fn histogram(values: &[usize]) -> Vec<usize> {
    let mut h = vec![0usize; values.iter().max().map_or(1, |m| m + 1)];
    for &v in values {
        h[v] += 1;
    }
    h
}

/// Goodness of fit of integer samples to the pmf `pmf`. Cells are pooled
/// left to right until each expected count reaches 5; the right tail is one
/// open cell.
pub fn chi_square_gof<F: Fn(usize) -> f64>(values: &[usize], pmf: F) -> ChiSquare {
    let n = values.len() as f64;
    let h = histogram(values);
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp, mut cum) = (0.0, 0.0, 0.0);
    let mut k = 0usize;
    loop {
        let p = pmf(k);
        obs += *h.get(k).unwrap_or(&0) as f64;
        exp += p * n;
        cum += p;
        k += 1;
        let rest = (1.0 - cum).max(0.0) * n;
        if exp >= MIN_EXPECTED && rest >= MIN_EXPECTED {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        } else if rest < MIN_EXPECTED {
            let tail_obs: f64 = h.iter().skip(k).map(|&c| c as f64).sum();
            cells.push((obs + tail_obs, exp + rest));
            break;
        }
    }
    let statistic = cells.iter().filter(|(_, e)| *e > 0.0).map(|(o, e)| (o - e) * (o - e) / e).sum();
    let dof = cells.len().saturating_sub(1);
    ChiSquare { statistic, dof, p_value: p_value(statistic, dof) }
}

/// Two-sample homogeneity test on integer samples.
pub fn chi_square_two_sample(a: &[usize], b: &[usize]) -> ChiSquare {
    let (ha, hb) = (histogram(a), histogram(b));
    let len = ha.len().max(hb.len());
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let total = na + nb;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut oa, mut ob) = (0.0, 0.0);
    for k in 0..len {
        oa += *ha.get(k).unwrap_or(&0) as f64;
        ob += *hb.get(k).unwrap_or(&0) as f64;
        let pooled = oa + ob;
        if pooled * na.min(nb) / total >= MIN_EXPECTED {
            cells.push((oa, ob));
            oa = 0.0;
            ob = 0.0;
        }
    }
    if oa + ob > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += oa;
                last.1 += ob;
            }
            None => cells.push((oa, ob)),
        }
    }
    let mut statistic = 0.0;
    for (oa, ob) in &cells {
        let pooled = oa + ob;
        let (ea, eb) = (pooled * na / total, pooled * nb / total);
        if ea > 0.0 {
            statistic += (oa - ea).powi(2) / ea;
        }
        if eb > 0.0 {
            statistic += (ob - eb).powi(2) / eb;
        }
    }
    let dof = cells.len().saturating_sub(1);
    ChiSquare { statistic, dof, p_value: p_value(statistic, dof) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_fit_has_high_p() {
        // 100 each of 0..4 against the uniform pmf on 0..4.
        let v: Vec<usize> = (0..500).map(|i| i % 5).collect();
        let r = chi_square_gof(&v, |k| if k < 5 { 0.2 } else { 0.0 });
        assert!(r.statistic < 1e-12);
        assert!(r.p_value > 0.99);
    }

    #[test]
    fn wrong_law_rejected() {
        let v: Vec<usize> = (0..1000).map(|i| if i % 2 == 0 { 0 } else { 3 }).collect();
        let r = chi_square_gof(&v, |k| if k < 5 { 0.2 } else { 0.0 });
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn identical_samples_homogeneous() {
        let v: Vec<usize> = (0..600).map(|i| i % 6).collect();
        let r = chi_square_two_sample(&v, &v);
        assert!(r.statistic < 1e-12);
    }
}
