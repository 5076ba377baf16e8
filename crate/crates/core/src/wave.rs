//! Complex states on a grid and the `L^2` pairing.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    grid: GridSpec,
    values: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} amplitudes, got {}",
                grid.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite("wave function amplitude".into()));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: GridSpec) -> Self {
        Self {
            grid,
            values: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    /// Samples `f(x)` at every grid point.
    pub fn from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                f(&x[..grid.dim()])
            })
            .collect();
        Self::new(grid, values)
    }

    /// Coordinate basis vector at flat index `i` (unit amplitude, not unit norm).
    pub fn unit(grid: GridSpec, i: usize) -> Self {
        let mut psi = Self::zeros(grid);
        psi.values[i] = Complex64::new(1.0, 0.0);
        psi
    }

    /// Lattice plane wave `exp(i xi_k . x)` for FFT-ordered flat momentum index `k`.
    pub fn plane_wave(grid: GridSpec, k: usize) -> Self {
        let xi = grid.momentum(k);
        let values = (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                let phase: f64 = (0..grid.dim()).map(|a| x[a] * xi[a]).sum();
                Complex64::from_polar(1.0, phase)
            })
            .collect();
        Self { grid, values }
    }

    /// Normalized Gaussian packet `exp(-|x-c|^2 / (4 sigma^2) + i k.x)`, so `|psi|^2`
    /// has per-axis standard deviation `sigma`.
    pub fn gaussian(grid: GridSpec, center: &[f64], momentum: &[f64], sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("packet width must be positive, got {sigma}")));
        }
        let dim = grid.dim();
        if center.len() < dim || momentum.len() < dim {
            return Err(Error::InvalidArgument("packet center/momentum shorter than dim".into()));
        }
        let psi = Self::from_fn(grid, |x| {
            let mut r2 = 0.0;
            let mut phase = 0.0;
            for a in 0..dim {
                let d = x[a] - center[a];
                r2 += d * d;
                phase += momentum[a] * x[a];
            }
            Complex64::from_polar((-r2 / (4.0 * sigma * sigma)).exp(), phase)
        })?;
        psi.normalized()
    }

    /// Random state whose Fourier support is confined to `|xi| <= cutoff`, seeded.
    pub fn random_band_limited(grid: GridSpec, cutoff: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut values: Vec<Complex64> = (0..grid.len())
            .map(|k| {
                let re: f64 = rng.random_range(-1.0..1.0);
                let im: f64 = rng.random_range(-1.0..1.0);
                if grid.momentum_sq(k).sqrt() <= cutoff {
                    Complex64::new(re, im)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        fft::inverse(&grid, &mut values);
        let psi = Self { grid, values };
        match psi.normalized() {
            Ok(p) => p,
            Err(_) => psi,
        }
    }

    /// Random state with independent uniform amplitudes, seeded.
    pub fn random(grid: GridSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `sum conj(self) other h^n`.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_volume()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) {
            return Err(Error::InvalidArgument("cannot normalize a zero state".into()));
        }
        Ok(self.scale(Complex64::new(1.0 / n, 0.0)))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn axpy(&self, a: Complex64, other: &WaveFunction) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(x, y)| x + a * y)
                .collect(),
        })
    }

    /// Fraction of `|psi|^2` in the outer 10% shell of the box.
    pub fn boundary_mass(&self) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let shell: f64 = self
            .values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_boundary_shell(*i))
            .map(|(_, v)| v.norm_sqr())
            .sum();
        shell / total
    }

    /// Smallest grid radius `r` with at most `tail` of `|psi|^2` at radii `>= r`, relative to the norm.
    pub fn tail_radius(&self, tail: f64) -> f64 {
        let total: f64 = self.values.iter().map(|v| v.norm_sqr()).sum();
        let mut by_radius: Vec<(f64, f64)> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| (self.grid.radius(i), v.norm_sqr()))
            .collect();
        by_radius.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut acc = 0.0;
        for (r, w) in by_radius {
            acc += w;
            if acc > tail * total {
                return r;
            }
        }
        0.0
    }

    /// Expectation of each coordinate, `<psi, x_a psi> / <psi, psi>`.
    pub fn centroid(&self) -> Vec<f64> {
        let dim = self.grid.dim();
        let mut acc = vec![0.0; dim];
        let mut total = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            let w = v.norm_sqr();
            let x = self.grid.position(i);
            for a in 0..dim {
                acc[a] += w * x[a];
            }
            total += w;
        }
        acc.iter().map(|a| a / total).collect()
    }

    /// Momentum-space norm `(sum |F psi|^2 h^n / N^n)^{1/2}`, which equals `norm()` by Parseval.
    pub fn momentum_norm(&self) -> f64 {
        let mut data = self.values.clone();
        fft::forward(&self.grid, &mut data);
        let s: f64 = data.iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume() / self.grid.len() as f64).sqrt()
    }

    pub fn l2_distance(&self, other: &WaveFunction) -> Result<f64> {
        Ok((self - other)?.norm())
    }
}

impl Add for &WaveFunction {
    type Output = Result<WaveFunction>;
    fn add(self, rhs: &WaveFunction) -> Result<WaveFunction> {
        self.axpy(Complex64::new(1.0, 0.0), rhs)
    }
}

impl Sub for &WaveFunction {
    type Output = Result<WaveFunction>;
    fn sub(self, rhs: &WaveFunction) -> Result<WaveFunction> {
        self.axpy(Complex64::new(-1.0, 0.0), rhs)
    }
}

impl Mul<f64> for &WaveFunction {
    type Output = WaveFunction;
    fn mul(self, rhs: f64) -> WaveFunction {
        self.scale(Complex64::new(rhs, 0.0))
    }
}

/// Pointwise product `w(x) psi(x)`.
pub fn position_multiply(psi: &WaveFunction, w: impl Fn(&[f64]) -> f64) -> Result<WaveFunction> {
    let grid = *psi.grid();
    let values: Vec<Complex64> = psi
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = grid.position(i);
            v * w(&x[..grid.dim()])
        })
        .collect();
    WaveFunction::new(grid, values)
}

/// Pointwise product with a sampled real field.
pub fn multiply_field(psi: &WaveFunction, field: &[f64]) -> Result<WaveFunction> {
    if field.len() != psi.grid().len() {
        return Err(Error::GridMismatch);
    }
    let values = psi.values().iter().zip(field).map(|(v, w)| v * w).collect();
    WaveFunction::new(*psi.grid(), values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1() -> GridSpec {
        GridSpec::new(1, 64, 8.0).unwrap()
    }

    #[test]
    fn zero_weight_gives_zero_state() {
        let psi = WaveFunction::random(grid1(), 1);
        let out = position_multiply(&psi, |_| 0.0).unwrap();
        assert_eq!(out.norm(), 0.0);
    }

    #[test]
    fn indicator_is_idempotent() {
        let g = grid1();
        let psi = WaveFunction::random(g, 2);
        let ind = |x: &[f64]| if x[0].abs() <= g.half_width() / 2.0 { 1.0 } else { 0.0 };
        let once = position_multiply(&psi, ind).unwrap();
        let twice = position_multiply(&once, ind).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bracket_weight_leaves_origin_spike() {
        let g = grid1();
        let origin = g.n_points() / 2;
        assert_eq!(g.coordinate_1d(origin), 0.0);
        let spike = WaveFunction::unit(g, origin);
        let out = position_multiply(&spike, |x| 1.0 / (1.0 + x[0] * x[0])).unwrap();
        assert_eq!(out.values()[origin], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn inner_basics() {
        let g = grid1();
        let psi = WaveFunction::random(g, 3);
        let ip = psi.inner(&psi).unwrap();
        assert!(ip.im.abs() < 1e-14 * ip.re && ip.re >= 0.0);

        let a = WaveFunction::plane_wave(g, 3);
        let b = WaveFunction::plane_wave(g, 60);
        assert!(a.inner(&b).unwrap().norm() < 1e-12);

        let c = 1.0 / (2.0 * g.half_width()).sqrt();
        let flat = WaveFunction::from_fn(g, |_| Complex64::new(c, 0.0)).unwrap();
        assert!((flat.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = WaveFunction::zeros(grid1());
        let b = WaveFunction::zeros(GridSpec::new(1, 32, 8.0).unwrap());
        assert_eq!(a.inner(&b), Err(Error::GridMismatch));
    }

    #[test]
    fn rejects_nan() {
        let g = grid1();
        let mut v = vec![Complex64::new(0.0, 0.0); g.len()];
        v[5] = Complex64::new(f64::NAN, 0.0);
        assert!(WaveFunction::new(g, v).is_err());
    }

    #[test]
    fn gaussian_centroid() {
        let g = GridSpec::new(1, 256, 20.0).unwrap();
        let psi = WaveFunction::gaussian(g, &[1.5], &[0.7], 1.0).unwrap();
        assert!((psi.norm() - 1.0).abs() < 1e-12);
        assert!((psi.centroid()[0] - 1.5).abs() < 1e-10);
        assert!(psi.boundary_mass() < 1e-30);
    }
}
