//! Determinantal kernels on grid spaces and the spectral sampler.
//!
//! A kernel `K` on a grid with weights `w_i` is stored as the Hermitian
//! matrix `M_ij = K(x_i, x_j) √(w_i w_j)`, whose spectrum is the spectrum of
//! the integral operator. Real kernels simply have zero imaginary parts.

use std::f64::consts::PI;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;

use crate::geometry::{Configuration, Grid, Space};
use crate::{Error, Result};

pub type C64 = Complex<f64>;

/// Largest admissible eigenvalue.
pub const SPECTRUM_CAP: f64 = 1.0 - 1e-6;
const SYMMETRY_TOL: f64 = 1e-10;
const NEGATIVE_TOL: f64 = 1e-10;

/// The parameter `α` of an α-determinantal process.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Alpha {
    MinusOne,
    /// `α = −1/n`.
    MinusOneOver(u32),
}

impl Alpha {
    pub fn value(&self) -> f64 {
        match self {
            Alpha::MinusOne => -1.0,
            Alpha::MinusOneOver(n) => -1.0 / *n as f64,
        }
    }

    /// Number of superposed determinantal components.
    pub fn components(&self) -> u32 {
        match self {
            Alpha::MinusOne => 1,
            Alpha::MinusOneOver(n) => *n,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Kernel {
    space: Space,
    matrix: DMatrix<C64>,
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<C64>,
    alpha: Alpha,
    clipped: f64,
}

fn hermitian_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut d: f64 = 0.0;
    for i in 0..n {
        for j in 0..=i {
            d = d.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    d
}

impl Kernel {
    /// From the weighted Hermitian matrix `M`; the spectrum must lie in
    /// `[0, 1 − 1e-6]`.
    pub fn from_weighted(grid: Grid, matrix: DMatrix<C64>, alpha: Alpha) -> Result<Self> {
        if matrix.nrows() != grid.len() || matrix.ncols() != grid.len() {
            return Err(Error::InvalidParameter("kernel matrix size differs from grid size".into()));
        }
        if alpha == Alpha::MinusOneOver(0) {
            return Err(Error::InvalidParameter("alpha = -1/n needs n >= 1".into()));
        }
        if matrix.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("kernel entries".into()));
        }
        let defect = hermitian_defect(&matrix);
        if defect > SYMMETRY_TOL {
            return Err(Error::InvalidParameter(format!("kernel not Hermitian (defect {defect:e})")));
        }
        let eig = matrix.clone().symmetric_eigen();
        let mut eigenvalues: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        for l in eigenvalues.iter_mut() {
            if *l < -NEGATIVE_TOL || *l > SPECTRUM_CAP {
                return Err(Error::SpectrumViolation(format!(
                    "eigenvalue {l} outside [0, {SPECTRUM_CAP}]"
                )));
            }
            *l = l.max(0.0);
        }
        Ok(Self { space: Space::Grid(grid), matrix, eigenvalues, eigenvectors: eig.eigenvectors, alpha, clipped: 0.0 })
    }

    /// From a real weighted matrix.
    pub fn from_real(grid: Grid, matrix: &DMatrix<f64>) -> Result<Self> {
        Self::from_weighted(grid, matrix.map(|x| C64::new(x, 0.0)), Alpha::MinusOne)
    }

    /// Evaluates `K(x_i, x_j)` at cell locations and applies the weights.
    pub fn from_function<F>(grid: Grid, k: F) -> Result<Self>
    where
        F: Fn(&[f64; 3], &[f64; 3]) -> C64,
    {
        let m = weighted_matrix(&grid, k);
        Self::from_weighted(grid, m, Alpha::MinusOne)
    }

    /// Like [`Kernel::from_function`] but projects the spectrum into
    /// `[0, 1 − 1e-6]` instead of rejecting it; the clipped spectral mass is
    /// recorded.
    pub fn from_function_clipped<F>(grid: Grid, k: F) -> Result<Self>
    where
        F: Fn(&[f64; 3], &[f64; 3]) -> C64,
    {
        let m = weighted_matrix(&grid, k);
        if m.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::NonFinite("kernel entries".into()));
        }
        let eig = m.symmetric_eigen();
        let mut clipped = 0.0;
        let lambda: Vec<f64> = eig
            .eigenvalues
            .iter()
            .map(|&l| {
                let c = l.clamp(0.0, SPECTRUM_CAP);
                clipped += (l - c).abs();
                c
            })
            .collect();
        let v = eig.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            lambda.len(),
            lambda.iter().map(|&l| C64::new(l, 0.0)),
        ));
        let mut matrix = &v * d * v.adjoint();
        // Restore exact Hermitian symmetry lost to rounding.
        let n = matrix.nrows();
        for i in 0..n {
            matrix[(i, i)].im = 0.0;
            for j in 0..i {
                let z = 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj());
                matrix[(i, j)] = z;
                matrix[(j, i)] = z.conj();
            }
        }
        Ok(Self { space: Space::Grid(grid), matrix, eigenvalues: lambda, eigenvectors: v, alpha: Alpha::MinusOne, clipped })
    }

    pub fn with_alpha(mut self, alpha: Alpha) -> Result<Self> {
        if alpha == Alpha::MinusOneOver(0) {
            return Err(Error::InvalidParameter("alpha = -1/n needs n >= 1".into()));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn grid(&self) -> &Grid {
        self.space.as_grid().expect("kernel space is a grid")
    }

    pub fn len(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn alpha(&self) -> Alpha {
        self.alpha
    }

    /// The weighted matrix `M`.
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &DMatrix<C64> {
        &self.eigenvectors
    }

    /// `K(x_i, x_j)`.
    pub fn value(&self, i: usize, j: usize) -> C64 {
        let w = self.grid().weights();
        self.matrix[(i, j)] / (w[i] * w[j]).sqrt()
    }

    /// `K(x_i, x_i)`, the intensity at cell `i`.
    pub fn diagonal(&self, i: usize) -> f64 {
        self.matrix[(i, i)].re / self.grid().weights()[i]
    }

    /// `∫ K(x,x) ℓ(dx)`, the expected number of points.
    pub fn trace(&self) -> f64 {
        (0..self.len()).map(|i| self.matrix[(i, i)].re).sum()
    }

    /// Spectral mass removed by clipping.
    pub fn clipped_mass(&self) -> f64 {
        self.clipped
    }

    /// Warning text when clipping removed more than 1% of the trace.
    pub fn clip_warning(&self) -> Option<String> {
        let t = self.trace();
        (self.clipped > 0.01 * t).then(|| {
            format!("spectrum clipping removed {:.4} of trace {:.4}", self.clipped, t)
        })
    }

    /// `βK`.
    pub fn scaled(&self, beta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("kernel scaling {beta} not in [0,1]")));
        }
        let mut k = self.clone();
        k.matrix *= C64::new(beta, 0.0);
        k.eigenvalues.iter_mut().for_each(|l| *l *= beta);
        k.clipped *= beta;
        Ok(k)
    }

    /// `K · 1_{Λ×Λ}` (cells outside `Λ` keep their place but carry no mass).
    pub fn restricted(&self, region: &Space) -> Result<Self> {
        let grid = self.grid().clone();
        let inside: Vec<bool> = grid.points().map(|p| region.region_contains(&p)).collect();
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                if !(inside[i] && inside[j]) {
                    m[(i, j)] = C64::new(0.0, 0.0);
                }
            }
        }
        Self::from_weighted(grid, m, self.alpha)
    }

    /// `K_ε(x,y) = K(ε^{-1/d}x, ε^{-1/d}y)/ε` on the rescaled grid. The
    /// weighted matrix is unchanged; the spectral bound is re-checked.
    pub fn rescaled(&self, eps: f64) -> Result<Self> {
        let space = self.space.rescaled(eps)?;
        let grid = space.as_grid().expect("grid").clone();
        let n = self.len();
        let w_old = self.grid().weights();
        let w_new = grid.weights().to_vec();
        let mut m = DMatrix::from_element(n, n, C64::new(0.0, 0.0));
        for i in 0..n {
            for j in 0..n {
                let k = self.matrix[(i, j)] / (w_old[i] * w_old[j]).sqrt() / eps;
                m[(i, j)] = k * (w_new[i] * w_new[j]).sqrt();
            }
        }
        Self::from_weighted(grid, m, self.alpha)
    }

    /// `J = (I + αK)^{-1} K`, computed spectrally.
    pub fn j_matrix(&self) -> DMatrix<C64> {
        let a = self.alpha.value();
        let v = &self.eigenvectors;
        let d = DMatrix::from_diagonal(&DVector::from_iterator(
            self.eigenvalues.len(),
            self.eigenvalues.iter().map(|&l| C64::new(l / (1.0 + a * l), 0.0)),
        ));
        let mut j = v * d * v.adjoint();
        let n = j.nrows();
        for i in 0..n {
            j[(i, i)].im = 0.0;
            for k in 0..i {
                let z = 0.5 * (j[(i, k)] + j[(k, i)].conj());
                j[(i, k)] = z;
                j[(k, i)] = z.conj();
            }
        }
        j
    }

    /// Exact draw: a determinantal draw for `α = −1`, or the superposition of
    /// `n` independent draws with kernel `K/n` for `α = −1/n`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Configuration {
        let n = self.alpha.components();
        let scale = 1.0 / n as f64;
        let mut out = Configuration::new();
        for _ in 0..n {
            for i in self.sample_dpp_cells(scale, rng) {
                out.insert(self.grid().point(i));
            }
        }
        out
    }

    /// One determinantal draw with kernel `scale·K`, as cell indices.
    pub fn sample_dpp_cells<R: Rng + ?Sized>(&self, scale: f64, rng: &mut R) -> Vec<usize> {
        let mut cols: Vec<DVector<C64>> = Vec::new();
        for (k, &l) in self.eigenvalues.iter().enumerate() {
            if rng.random::<f64>() < (l * scale).clamp(0.0, 1.0) {
                cols.push(self.eigenvectors.column(k).into_owned());
            }
        }
        sample_projection(cols, rng)
    }
}

fn weighted_matrix<F>(grid: &Grid, k: F) -> DMatrix<C64>
where
    F: Fn(&[f64; 3], &[f64; 3]) -> C64,
{
    let n = grid.len();
    let w = grid.weights();
    DMatrix::from_fn(n, n, |i, j| {
        k(&grid.location(i), &grid.location(j)) * (w[i] * w[j]).sqrt()
    })
}

/// Sequential sampling of a projection DPP spanned by orthonormal columns.
fn sample_projection<R: Rng + ?Sized>(mut cols: Vec<DVector<C64>>, rng: &mut R) -> Vec<usize> {
    let mut picked = Vec::with_capacity(cols.len());
    while !cols.is_empty() {
        let n = cols[0].len();
        let weights: Vec<f64> =
            (0..n).map(|j| cols.iter().map(|c| c[j].norm_sqr()).sum::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut j = n - 1;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                j = i;
                break;
            }
            u -= w;
        }
        picked.push(j);
        let (c0, _) = cols
            .iter()
            .enumerate()
            .map(|(c, v)| (c, v[j].norm()))
            .fold((0, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        let pivot = cols.swap_remove(c0);
        for v in cols.iter_mut() {
            let f = v[j] / pivot[j];
            v.axpy(-f, &pivot, C64::new(1.0, 0.0));
        }
        // Gram-Schmidt on what is left.
        for a in 0..cols.len() {
            for b in 0..a {
                let proj = cols[b].dotc(&cols[a]);
                let vb = cols[b].clone();
                cols[a].axpy(-proj, &vb, C64::new(1.0, 0.0));
            }
            let norm = cols[a].norm();
            if norm > 0.0 {
                cols[a] /= C64::new(norm, 0.0);
            }
        }
    }
    picked.sort_unstable();
    picked
}

/// `K_{γ,β}(x,y) = (γ/π) e^{−(γ/2β)(|x|²+|y|²)} e^{(γ/β) x ȳ}`.
pub fn ginibre_value(gamma: f64, beta: f64, x: &[f64; 3], y: &[f64; 3]) -> C64 {
    let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
    let modulus = gamma / PI * (-(gamma / (2.0 * beta)) * d2).exp();
    // Im(x ȳ) for x = x0 + i x1, y = y0 + i y1.
    let phase = (gamma / beta) * (x[1] * y[0] - x[0] * y[1]);
    C64::from_polar(modulus, phase)
}

/// The β-Ginibre kernel on a polar grid with `rings` rings over `disk`,
/// spectrum clipped into `[0, 1 − 1e-6]`.
pub fn ginibre_kernel(gamma: f64, beta: f64, disk: &Space, rings: usize) -> Result<Kernel> {
    if !(gamma > 0.0 && gamma.is_finite()) || !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::InvalidParameter(format!("Ginibre needs gamma > 0, 0 < beta <= 1 (got {gamma}, {beta})")));
    }
    let Space::Disk { center, radius } = disk else {
        return Err(Error::InvalidSpace("Ginibre kernel needs a disk".into()));
    };
    let grid = Grid::polar_disk(*center, *radius, rings)?;
    Kernel::from_function_clipped(grid, |x, y| ginibre_value(gamma, beta, x, y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Streams;

    fn line_grid(n: usize, w: f64) -> Grid {
        Grid::new(1, (0..n).map(|i| [i as f64, 0.0, 0.0]).collect(), vec![w; n]).unwrap()
    }

    fn two_cell() -> Kernel {
        let m = DMatrix::from_row_slice(2, 2, &[0.4, 0.2, 0.2, 0.4]);
        Kernel::from_real(line_grid(2, 1.0), &m).unwrap()
    }

    #[test]
    fn j_matrix_two_cells() {
        let j = two_cell().j_matrix();
        assert!((j[(0, 0)].re - 0.875).abs() < 1e-12);
        assert!((j[(0, 1)].re - 0.625).abs() < 1e-12);
        assert!(j[(0, 1)].im.abs() < 1e-15);
    }

    #[test]
    fn rejects_spectrum_at_one() {
        let m = DMatrix::from_row_slice(1, 1, &[1.0]);
        assert!(matches!(Kernel::from_real(line_grid(1, 1.0), &m), Err(Error::SpectrumViolation(_))));
    }

    #[test]
    fn zero_kernel_is_empty() {
        let k = Kernel::from_real(line_grid(3, 1.0), &DMatrix::zeros(3, 3)).unwrap();
        let mut rng = Streams::new(1, "z").rng(0);
        for _ in 0..100 {
            assert!(k.sample(&mut rng).is_empty());
        }
    }

    #[test]
    fn single_cell_bernoulli() {
        let k = Kernel::from_real(line_grid(1, 1.0), &DMatrix::from_element(1, 1, 0.5)).unwrap();
        let s = Streams::new(2, "one");
        let hits: usize = (0..20_000).map(|i| k.sample(&mut s.rng(i)).len()).sum();
        let p = hits as f64 / 20_000.0;
        assert!((p - 0.5).abs() < 3.0 * (0.25f64 / 20_000.0).sqrt() + 1e-9);
    }

    #[test]
    fn pair_inclusion_is_det() {
        let k = two_cell();
        let s = Streams::new(3, "pair");
        let n = 100_000;
        let both = (0..n).filter(|&i| k.sample(&mut s.rng(i as u64)).len() == 2).count();
        let p = both as f64 / n as f64;
        let se = (0.12f64 * 0.88 / n as f64).sqrt();
        assert!((p - 0.12).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn minus_half_avoidance() {
        // Cell 0 empty under DPP(K/2) has probability 1 − K₀₀/2 = 0.8; two
        // independent components give 0.64.
        let k = two_cell().with_alpha(Alpha::MinusOneOver(2)).unwrap();
        let s = Streams::new(4, "avoid");
        let n = 100_000;
        let c0 = line_grid(2, 1.0).point(0);
        let empty = (0..n).filter(|&i| !k.sample(&mut s.rng(i as u64)).contains(&c0)).count();
        let p = empty as f64 / n as f64;
        let se = (0.64f64 * 0.36 / n as f64).sqrt();
        assert!((p - 0.64).abs() < 3.0 * se, "p = {p}");
    }

    #[test]
    fn expected_count_is_trace_for_every_n() {
        let k0 = two_cell();
        for n in [1u32, 3] {
            let k = k0.clone().with_alpha(if n == 1 { Alpha::MinusOne } else { Alpha::MinusOneOver(n) }).unwrap();
            let s = Streams::new(5, "trace");
            let m = 50_000;
            let total: usize = (0..m).map(|i| k.sample(&mut s.rng(i)).len()).sum();
            let mean = total as f64 / m as f64;
            assert!((mean - 0.8).abs() < 0.02, "n = {n}, mean = {mean}");
        }
    }

    #[test]
    fn ginibre_diagonal_and_trace() {
        let disk = Space::disk([0.0, 0.0], 2.0).unwrap();
        let g = std::f64::consts::PI;
        let x = [0.3, -1.1, 0.0];
        assert!((ginibre_value(g, 1.0, &x, &x).re - 1.0).abs() < 1e-15);
        let k = ginibre_kernel(g, 1.0, &disk, 12).unwrap();
        let expected = disk.volume() * g / PI;
        assert!((k.trace() - expected).abs() < 0.01 * expected, "trace {}", k.trace());
        assert!(k.clip_warning().is_none());
    }

    #[test]
    fn ginibre_small_beta_decorrelates() {
        let x = [0.0, 0.0, 0.0];
        let y = [0.5, 0.0, 0.0];
        let a = ginibre_value(1.0, 1.0, &x, &y).norm();
        let b = ginibre_value(1.0, 0.01, &x, &y).norm();
        assert!(b < 1e-5 * a);
    }

    #[test]
    fn ginibre_is_hermitian() {
        let x = [0.3, 0.7, 0.0];
        let y = [-0.2, 0.4, 0.0];
        let a = ginibre_value(2.0, 0.5, &x, &y);
        let b = ginibre_value(2.0, 0.5, &y, &x);
        assert!((a - b.conj()).norm() < 1e-15);
    }

    #[test]
    fn rescale_keeps_spectrum() {
        let k = two_cell();
        let r = k.rescaled(4.0).unwrap();
        for (a, b) in k.eigenvalues().iter().zip(r.eigenvalues()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((r.value(0, 0).re - 0.1).abs() < 1e-12);
        assert!((r.grid().weights()[0] - 4.0).abs() < 1e-15);
    }
}
