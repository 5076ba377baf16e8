//! Dense matrix helpers for grid operators.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::multiplier::Multiplier;
use crate::wave::WaveFunction;

pub type CMatrix = DMatrix<Complex64>;

/// Largest state-space dimension for which dense matrices may be built.
pub const DENSE_CAP: usize = 4096;

pub fn check_dense_cap(grid: &GridSpec) -> Result<()> {
    if grid.len() > DENSE_CAP {
        return Err(Error::SizeCap {
            size: grid.len(),
            cap: DENSE_CAP,
        });
    }
    Ok(())
}

fn offset_index(grid: &GridSpec, i: usize, j: usize) -> usize {
    let n = grid.n_points();
    let a = grid.unflatten(i);
    let b = grid.unflatten(j);
    let mut d = [0usize; 3];
    for axis in 0..grid.dim() {
        d[axis] = (a[axis] + n - b[axis]) % n;
    }
    grid.flatten(&d[..grid.dim()])
}

/// Dense matrix of a Fourier multiplier: a (block-)circulant built from its kernel.
pub fn multiplier_matrix(m: &Multiplier) -> Result<CMatrix> {
    let grid = *m.grid();
    check_dense_cap(&grid)?;
    let kernel = m.kernel();
    let n = grid.len();
    if grid.dim() == 1 {
        return Ok(CMatrix::from_fn(n, n, |i, j| kernel[(i + n - j) % n]));
    }
    Ok(CMatrix::from_fn(n, n, |i, j| kernel[offset_index(&grid, i, j)]))
}

pub fn diagonal_matrix(field: &[f64]) -> CMatrix {
    let n = field.len();
    let mut m = CMatrix::zeros(n, n);
    for (i, v) in field.iter().enumerate() {
        m[(i, i)] = Complex64::new(*v, 0.0);
    }
    m
}

/// Max entry of `|M - M^dagger|`.
pub fn hermitian_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `(M + M^dagger) / 2`.
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * Complex64::new(0.5, 0.0)
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn to_vector(psi: &WaveFunction) -> DVector<Complex64> {
    DVector::from_column_slice(psi.values())
}

pub fn apply_matrix(m: &CMatrix, psi: &WaveFunction) -> Result<WaveFunction> {
    if m.ncols() != psi.values().len() {
        return Err(Error::GridMismatch);
    }
    let out = m * to_vector(psi);
    WaveFunction::new(*psi.grid(), out.as_slice().to_vec())
}

/// Eigenpairs of a Hermitian matrix, ascending. Uses the real symmetric solver when the
/// imaginary parts vanish.
pub fn hermitian_eigen(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    let max_imag = m.iter().fold(0.0f64, |acc, v| acc.max(v.im.abs()));
    let (values, vectors): (Vec<f64>, CMatrix) = if max_imag == 0.0 {
        let real = m.map(|v| v.re);
        let real = (&real + real.transpose()) * 0.5;
        let eig = SymmetricEigen::try_new(real, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("real symmetric QR did not converge".into()))?;
        (
            eig.eigenvalues.iter().copied().collect(),
            eig.eigenvectors.map(|v| Complex64::new(v, 0.0)),
        )
    } else {
        let herm = hermitize(m);
        let eig = SymmetricEigen::try_new(herm, f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigensolver("Hermitian QR did not converge".into()))?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let sorted_values = order.iter().map(|&i| values[i]).collect();
    let sorted_vectors = CMatrix::from_fn(n, n, |r, c| vectors[(r, order[c])]);
    Ok((sorted_values, sorted_vectors))
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> Result<f64> {
    let gram = m.adjoint() * m;
    let (values, _) = hermitian_eigen(&gram)?;
    Ok(values.last().copied().unwrap_or(0.0).max(0.0).sqrt())
}

/// Max over columns of `|<v_i, v_j> - delta_ij|`.
pub fn orthonormality_defect(v: &CMatrix) -> f64 {
    let gram = v.adjoint() * v;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    worst
}
