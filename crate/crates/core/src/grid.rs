//! Uniform periodic grids on the box `[-L, L)^n`.
//!
//! Position coordinates are affine (`x_j = -L + j h`), not periodic angles.
//! Momentum values are exposed in physical units `xi = pi q / L` where the
//! signed mode number `q` runs over `(-N/2, N/2]`: the Nyquist mode carries
//! the positive frequency. Storage order for both spaces is row-major with
//! the last axis fastest, and momentum arrays follow the FFT ordering.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Fraction of the half width beyond which a point belongs to the boundary shell.
pub const BOUNDARY_SHELL: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n_points: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(dim: usize, n_points: usize, half_width: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dim must be 1, 2 or 3, got {dim}")));
        }
        if n_points < 8 || !n_points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "n_points must be a power of two >= 8, got {n_points}"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half_width must be positive and finite, got {half_width}"
            )));
        }
        Ok(Self {
            dim,
            n_points,
            half_width,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    /// Total number of grid points, `N^n`.
    pub fn len(&self) -> usize {
        self.n_points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^n` used by inner products.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Momentum spacing `pi / L`.
    pub fn momentum_step(&self) -> f64 {
        PI / self.half_width
    }

    /// Largest representable momentum magnitude per axis (the Nyquist value `pi / h`).
    pub fn max_momentum(&self) -> f64 {
        PI / self.spacing()
    }

    /// Coordinate of index `j` along one axis.
    pub fn coordinate_1d(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.spacing()
    }

    /// Signed mode number for FFT-ordered index `k`; Nyquist is positive.
    pub fn mode_number(&self, k: usize) -> i64 {
        let n = self.n_points as i64;
        let k = k as i64;
        if k <= n / 2 {
            k
        } else {
            k - n
        }
    }

    /// Momentum of FFT-ordered index `k` along one axis.
    pub fn momentum_1d(&self, k: usize) -> f64 {
        self.mode_number(k) as f64 * self.momentum_step()
    }

    /// Per-axis indices of a flat index.
    pub fn unflatten(&self, flat: usize) -> [usize; 3] {
        let n = self.n_points;
        let mut out = [0usize; 3];
        let mut rem = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rem % n;
            rem /= n;
        }
        out
    }

    pub fn flatten(&self, idx: &[usize]) -> usize {
        idx.iter()
            .take(self.dim)
            .fold(0usize, |acc, &i| acc * self.n_points + i)
    }

    /// Position of flat index; entries beyond `dim` are zero.
    pub fn position(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = self.coordinate_1d(idx[axis]);
        }
        x
    }

    /// Momentum of FFT-ordered flat index; entries beyond `dim` are zero.
    pub fn momentum(&self, flat: usize) -> [f64; 3] {
        let idx = self.unflatten(flat);
        let mut xi = [0.0; 3];
        for axis in 0..self.dim {
            xi[axis] = self.momentum_1d(idx[axis]);
        }
        xi
    }

    pub fn radius(&self, flat: usize) -> f64 {
        norm3(&self.position(flat))
    }

    pub fn momentum_sq(&self, flat: usize) -> f64 {
        let xi = self.momentum(flat);
        xi.iter().map(|v| v * v).sum()
    }

    /// Whether the point lies in the outer shell `max_i |x_i| >= 0.9 L`.
    pub fn in_boundary_shell(&self, flat: usize) -> bool {
        let x = self.position(flat);
        x[..self.dim]
            .iter()
            .any(|c| c.abs() >= BOUNDARY_SHELL * self.half_width)
    }

    /// Momentum lattice along one axis in physical (ascending) order.
    pub fn momentum_lattice(&self) -> Vec<f64> {
        let mut xs: Vec<f64> = (0..self.n_points).map(|k| self.momentum_1d(k)).collect();
        xs.sort_by(f64::total_cmp);
        xs
    }

    /// Coordinates along one axis in ascending order.
    pub fn coordinates(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.coordinate_1d(j)).collect()
    }

    /// Applies the parity map `x -> -x` to a flat index (periodically, so `-L` is fixed).
    pub fn parity_index(&self, flat: usize) -> usize {
        let idx = self.unflatten(flat);
        let n = self.n_points;
        let mut out = [0usize; 3];
        for axis in 0..self.dim {
            out[axis] = (n - idx[axis]) % n;
        }
        self.flatten(&out[..self.dim])
    }
}

pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

/// Japanese bracket `<x> = sqrt(1 + |x|^2)`.
pub fn japanese(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}
