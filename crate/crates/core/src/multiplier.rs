//! Fourier multipliers `F^* m(xi) F`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::grid::GridSpec;
use crate::operator::StateOperator;
use crate::wave::WaveFunction;

/// A multiplier sampled on the momentum lattice, stored in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct Multiplier {
    grid: GridSpec,
    table: Vec<Complex64>,
}

impl Multiplier {
    /// Samples a real multiplier `m(xi)`; rejects non-finite values.
    pub fn from_fn(grid: GridSpec, m: impl Fn(&[f64]) -> f64) -> Result<Self> {
        Self::from_complex_fn(grid, |xi| Complex64::new(m(xi), 0.0))
    }

    pub fn from_complex_fn(grid: GridSpec, m: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let table: Vec<Complex64> = (0..grid.len())
            .map(|k| {
                let xi = grid.momentum(k);
                m(&xi[..grid.dim()])
            })
            .collect();
        Self::from_table(grid, table)
    }

    pub fn from_table(grid: GridSpec, table: Vec<Complex64>) -> Result<Self> {
        if table.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = table.iter().position(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::NonFinite(format!(
                "multiplier value at momentum {:?}",
                &grid.momentum(k)[..grid.dim()]
            )));
        }
        Ok(Self { grid, table })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn table(&self) -> &[Complex64] {
        &self.table
    }

    /// Pointwise product of two multipliers.
    pub fn compose(&self, other: &Multiplier) -> Result<Multiplier> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let table = self.table.iter().zip(&other.table).map(|(a, b)| a * b).collect();
        Ok(Multiplier {
            grid: self.grid,
            table,
        })
    }

    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let mut data = psi.values().to_vec();
        fft::forward(&self.grid, &mut data);
        for (v, m) in data.iter_mut().zip(&self.table) {
            *v *= m;
        }
        fft::inverse(&self.grid, &mut data);
        WaveFunction::new(self.grid, data)
    }

    /// Position-space convolution kernel `F^{-1} m`, indexed by flat offset.
    pub fn kernel(&self) -> Vec<Complex64> {
        let mut data = self.table.clone();
        fft::inverse(&self.grid, &mut data);
        data
    }
}

impl StateOperator for Multiplier {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        Multiplier::apply(self, psi)
    }
}

/// Applies the real multiplier `m(xi)` to `psi`.
pub fn apply_multiplier(psi: &WaveFunction, m: impl Fn(&[f64]) -> f64) -> Result<WaveFunction> {
    Multiplier::from_fn(*psi.grid(), m)?.apply(psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbol::FractionalSymbol;

    #[test]
    fn identity_multiplier() {
        let g = GridSpec::new(2, 16, 3.0).unwrap();
        let psi = WaveFunction::random(g, 7);
        let out = apply_multiplier(&psi, |_| 1.0).unwrap();
        assert!(out.l2_distance(&psi).unwrap() <= 1e-13 * psi.norm());
    }

    #[test]
    fn relativistic_symbol_on_plane_wave() {
        let g = GridSpec::new(1, 32, 5.0).unwrap();
        let sym = FractionalSymbol::new(0.5).unwrap();
        let k = 3;
        let xi0 = g.momentum_1d(k);
        let psi = WaveFunction::plane_wave(g, k);
        let out = apply_multiplier(&psi, |xi| sym.value(xi[0] * xi[0])).unwrap();
        let expect = (xi0 * xi0 + 1.0).sqrt() - 1.0;
        let diff = out.axpy(Complex64::new(-expect, 0.0), &psi).unwrap();
        assert!(diff.norm() < 1e-12 * psi.norm());
    }

    #[test]
    fn laplacian_of_gaussian() {
        // -d^2/dx^2 exp(-x^2/(4s^2)) = (1/(2 s^2) - x^2/(4 s^4)) exp(-x^2/(4 s^2))
        let g = GridSpec::new(1, 256, 20.0).unwrap();
        let s = 1.2;
        let psi = WaveFunction::from_fn(g, |x| Complex64::new((-x[0] * x[0] / (4.0 * s * s)).exp(), 0.0)).unwrap();
        let out = apply_multiplier(&psi, |xi| xi[0] * xi[0]).unwrap();
        let exact = WaveFunction::from_fn(g, |x| {
            let u = x[0];
            let e = (-u * u / (4.0 * s * s)).exp();
            Complex64::new((1.0 / (2.0 * s * s) - u * u / (4.0 * s.powi(4))) * e, 0.0)
        })
        .unwrap();
        for (a, b) in out.values().iter().zip(exact.values()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn rejects_non_finite() {
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let r = Multiplier::from_fn(g, |xi| 1.0 / xi[0]);
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }
}
