//! Conjugate operators, commutators `i[H, A]` and localized Mourre bounds on dense grids.

use std::io::Write;

use num_complex::Complex64;

use crate::calculus::SmoothCutoff;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamiltonian::{HamiltonianHandle, SpectralDecomposition};
use crate::linalg::{
    apply_matrix, check_dense_cap, diagonal_matrix, hermitian_defect, hermitian_eigen, hermitize,
    multiplier_matrix, CMatrix,
};
use crate::multiplier::Multiplier;
use crate::potentials::PotentialSpec;
use crate::symbol::FractionalSymbol;
use crate::wave::WaveFunction;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugateKind {
    /// `(1/(2 rho)) sum_j (<D>^{2rho-2} D_j x_j + x_j D_j <D>^{2rho-2})`.
    ARho,
    /// `(1/(2 rho)) (D.x + x.D)`.
    Dilation,
}

#[derive(Debug, Clone)]
pub struct ConjugateOperator {
    pub kind: ConjugateKind,
    pub rho: f64,
    pub grid: GridSpec,
    pub dense: CMatrix,
    /// Hermiticity defect of the assembled matrix before symmetrization.
    pub raw_defect: f64,
}

fn momentum_factor(kind: ConjugateKind, rho: f64, xi: &[f64], j: usize) -> f64 {
    match kind {
        ConjugateKind::ARho => {
            let s: f64 = xi.iter().map(|v| v * v).sum();
            (1.0 + s).powf(rho - 1.0) * xi[j]
        }
        ConjugateKind::Dilation => xi[j],
    }
}

pub fn build_conjugate(grid: &GridSpec, rho: f64, kind: ConjugateKind) -> Result<ConjugateOperator> {
    check_dense_cap(grid)?;
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::InvalidRho(rho));
    }
    let n = grid.len();
    let mut raw = CMatrix::zeros(n, n);
    for j in 0..grid.dim() {
        let m = multiplier_matrix(&Multiplier::from_fn(*grid, |xi| momentum_factor(kind, rho, xi, j))?)?;
        let x: Vec<f64> = (0..n).map(|i| grid.position(i)[j]).collect();
        let mx = scale_columns(&m, &x);
        let xm = scale_rows(&m, &x);
        raw += mx + xm;
    }
    raw *= Complex64::new(1.0 / (2.0 * rho), 0.0);
    let raw_defect = hermitian_defect(&raw);
    Ok(ConjugateOperator {
        kind,
        rho,
        grid: *grid,
        dense: hermitize(&raw),
        raw_defect,
    })
}

/// `M diag(d)`.
fn scale_columns(m: &CMatrix, d: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (j, v) in d.iter().enumerate() {
        out.column_mut(j).scale_mut(*v);
    }
    out
}

/// `diag(d) M`.
fn scale_rows(m: &CMatrix, d: &[f64]) -> CMatrix {
    let mut out = m.clone();
    for (i, v) in d.iter().enumerate() {
        out.row_mut(i).scale_mut(*v);
    }
    out
}

#[derive(Debug, Clone)]
pub struct Commutator {
    /// `i[H, A]`, re-Hermitized.
    pub matrix: CMatrix,
    /// Max entry of `|C - C^dagger|` before re-Hermitization.
    pub raw_defect: f64,
}

pub fn commutator_iha(h: &CMatrix, a: &CMatrix) -> Result<Commutator> {
    if h.shape() != a.shape() || h.nrows() != h.ncols() {
        return Err(Error::GridMismatch);
    }
    let c = (h * a - a * h) * Complex64::new(0.0, 1.0);
    let raw_defect = hermitian_defect(&c);
    Ok(Commutator {
        matrix: hermitize(&c),
        raw_defect,
    })
}

/// Free commutator multiplier: `i[Psi(|D|^2), A]` as a function of `|xi|^2`.
pub fn free_commutator_symbol(kind: ConjugateKind, symbol: &FractionalSymbol, s: f64) -> f64 {
    let rho = symbol.rho();
    match kind {
        ConjugateKind::ARho => 2.0 * (1.0 + s).powf(2.0 * rho - 2.0) * s,
        ConjugateKind::Dilation => 2.0 / rho * symbol.derivative(s) * s,
    }
}

/// `c = 2 lambda1 / (1 + lambda2)^{(1 - rho)/rho}`.
pub fn mourre_constant(rho: f64, lambda1: f64, lambda2: f64) -> f64 {
    2.0 * lambda1 / (1.0 + lambda2).powf((1.0 - rho) / rho)
}

/// Per-mode free value `2 (1+lambda)^{2(rho-1)/rho} ((1+lambda)^{1/rho} - 1)`.
pub fn free_mode_value(rho: f64, lambda: f64) -> f64 {
    2.0 * (1.0 + lambda).powf(2.0 * (rho - 1.0) / rho) * ((1.0 + lambda).powf(1.0 / rho) - 1.0)
}

/// Commutator used for the localized bound: the exact free multiplier plus the dense `i[V, A]`.
///
/// The coordinate matrix is not periodic, so the fully dense `i[H, A]` has vanishing
/// expectation in every eigenvector of the finite matrix and cannot localize in energy.
pub fn regularized_commutator(h: &HamiltonianHandle, a: &ConjugateOperator) -> Result<CMatrix> {
    if *h.grid() != a.grid {
        return Err(Error::GridMismatch);
    }
    let symbol = *h.symbol();
    let free = Multiplier::from_fn(a.grid, |xi| {
        free_commutator_symbol(a.kind, &symbol, xi.iter().map(|v| v * v).sum())
    })?;
    let mut c = multiplier_matrix(&free)?;
    if !h.is_free() {
        let v = diagonal_matrix(h.potential());
        c += commutator_iha(&v, &a.dense)?.matrix;
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MourreRow {
    pub mode: usize,
    pub lambda: f64,
    pub quadratic_form: f64,
    pub bound: f64,
}

#[derive(Debug, Clone)]
pub struct MourreReport {
    pub rho: f64,
    pub window: (f64, f64),
    pub c_theory: f64,
    /// `lambda1 / (1 + lambda2)^{(1-rho)/rho}`.
    pub localized_bound: f64,
    pub sub_window: (f64, f64),
    /// Point-spectrum candidates in the window, excluded from the sub-window.
    pub excluded: Vec<f64>,
    pub rows: Vec<MourreRow>,
    /// Minimum of `<psi, M psi> / <psi, g(H)^2 psi>` over the sub-window spectral subspace.
    pub projected_minimum: f64,
    /// `g(H) i[H, A] g(H)`.
    pub localized: CMatrix,
    /// Eigenvalues of `M - c_theory g(H)^2`.
    pub remainder_eigenvalues: Vec<f64>,
}

impl MourreReport {
    pub fn margin(&self) -> f64 {
        self.projected_minimum - self.localized_bound
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.projected_minimum >= self.localized_bound - tol
    }

    pub fn summary(&self) -> String {
        format!(
            "c_theory={:.6} observed_min={:.6} margin={:.6}",
            self.c_theory,
            self.projected_minimum,
            self.margin()
        )
    }

    /// Rows `mode,lambda,quadratic_form,bound`, followed by a `# summary` line.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "mode,lambda,quadratic_form,bound")?;
        for r in &self.rows {
            writeln!(out, "{},{:e},{:e},{:e}", r.mode, r.lambda, r.quadratic_form, r.bound)?;
        }
        writeln!(out, "# {}", self.summary())?;
        Ok(())
    }
}

/// Largest open sub-interval of `(lo, hi)` at distance greater than `gap` from every point.
fn largest_free_interval(lo: f64, hi: f64, points: &[f64], gap: f64) -> Option<(f64, f64)> {
    let mut cuts: Vec<f64> = points.iter().copied().filter(|p| *p > lo - gap && *p < hi + gap).collect();
    cuts.sort_by(f64::total_cmp);
    let mut edges = vec![(lo, lo)];
    edges.extend(cuts.iter().map(|p| (p - gap, p + gap)));
    edges.push((hi, hi));
    edges
        .windows(2)
        .map(|w| (w[0].1.max(lo), w[1].0.min(hi)))
        .filter(|(a, b)| b > a)
        .max_by(|x, y| (x.1 - x.0).total_cmp(&(y.1 - y.0)))
}

/// Localized Mourre check on `(lambda1, lambda2)` with energy cutoff `g`.
///
/// `point_spectrum` lists the eigenvalues treated as bound states; the sub-window keeps away
/// from them by twice the decomposition residual.
pub fn mourre_lower_bound(
    h: &HamiltonianHandle,
    a: &ConjugateOperator,
    window: (f64, f64),
    g: &SmoothCutoff,
    decomp: &SpectralDecomposition,
    point_spectrum: &[f64],
) -> Result<MourreReport> {
    let (l1, l2) = window;
    if !(0.0 < l1 && l1 < l2) {
        return Err(Error::InvalidArgument(format!("need 0 < lambda1 < lambda2, got ({l1}, {l2})")));
    }
    let (ga, gb) = g.support();
    if ga < l1 || gb > l2 {
        return Err(Error::Precondition(format!(
            "supp g = ({ga}, {gb}) leaks outside ({l1}, {l2})"
        )));
    }
    let rho = h.symbol().rho();
    let c_theory = mourre_constant(rho, l1, l2);
    let localized_bound = 0.5 * c_theory;
    let gap = 2.0 * decomp.residual();
    let excluded: Vec<f64> = point_spectrum.iter().copied().filter(|p| *p > ga && *p < gb).collect();
    let sub_window = largest_free_interval(ga, gb, &excluded, gap)
        .ok_or_else(|| Error::Precondition("no eigenvalue-free sub-window".into()))?;
    let modes: Vec<usize> = decomp
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l > sub_window.0 && **l < sub_window.1 && g.eval(**l) > 0.0)
        .map(|(j, _)| j)
        .collect();
    if modes.is_empty() {
        return Err(Error::Precondition(format!(
            "window ({}, {}) contains no spectrum",
            sub_window.0, sub_window.1
        )));
    }
    let c = regularized_commutator(h, a)?;
    let u = decomp.eigenvectors();
    let sub = CMatrix::from_fn(u.nrows(), modes.len(), |r, k| u[(r, modes[k])]);
    let projected = sub.adjoint() * &c * &sub;
    let (proj_values, _) = hermitian_eigen(&hermitize(&projected))?;
    let projected_minimum = proj_values[0];
    let rows = modes
        .iter()
        .enumerate()
        .map(|(k, &j)| MourreRow {
            mode: j,
            lambda: decomp.eigenvalues()[j],
            quadratic_form: projected[(k, k)].re,
            bound: localized_bound,
        })
        .collect();
    let weights: Vec<f64> = decomp.eigenvalues().iter().map(|&l| g.eval(l)).collect();
    let gm = decomp.function_matrix(&weights);
    let localized = hermitize(&(&gm * &c * &gm));
    let g2 = &gm * &gm;
    let remainder = &localized - g2 * Complex64::new(c_theory, 0.0);
    let (remainder_eigenvalues, _) = hermitian_eigen(&hermitize(&remainder))?;
    Ok(MourreReport {
        rho,
        window,
        c_theory,
        localized_bound,
        sub_window,
        excluded,
        rows,
        projected_minimum,
        localized,
        remainder_eigenvalues,
    })
}

/// Interior Gaussian packets used for operator-level residuals.
pub fn interior_packets(grid: GridSpec) -> Vec<WaveFunction> {
    let l = grid.half_width();
    let mut out = Vec::new();
    for &c in &[-0.15 * l, 0.0, 0.15 * l] {
        for &sigma in &[0.04 * l, 0.06 * l] {
            for &k in &[-1.0, 0.0, 1.0] {
                let mut center = vec![0.0; grid.dim()];
                let mut momentum = vec![0.0; grid.dim()];
                center[0] = c;
                momentum[0] = k;
                if let Ok(p) = WaveFunction::gaussian(grid, &center, &momentum, sigma) {
                    if p.boundary_mass() < 1e-10 {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct FreeIdentityCheck {
    /// `max |<psi, C psi> - <psi, M psi>| / <psi, M psi>` over interior packets.
    pub max_relative: f64,
    pub packets: usize,
}

/// Quadratic forms of the dense free `i[Psi(|D|^2), A]` against the analytic multiplier.
pub fn free_identity_check(grid: GridSpec, rho: f64, kind: ConjugateKind) -> Result<FreeIdentityCheck> {
    let symbol = FractionalSymbol::new(rho)?;
    let h = HamiltonianHandle::free(grid, symbol);
    let a = build_conjugate(&grid, rho, kind)?;
    let c = commutator_iha(h.dense()?, &a.dense)?.matrix;
    let free = Multiplier::from_fn(grid, |xi| free_commutator_symbol(kind, &symbol, xi.iter().map(|v| v * v).sum()))?;
    let packets = interior_packets(grid);
    if packets.is_empty() {
        return Err(Error::Precondition("grid too small for interior packets".into()));
    }
    let mut max_relative = 0.0f64;
    for p in &packets {
        let dense = p.inner(&apply_matrix(&c, p)?)?.re;
        let exact = p.inner(&free.apply(p)?)?.re;
        max_relative = max_relative.max((dense - exact).abs() / exact.abs());
    }
    Ok(FreeIdentityCheck {
        max_relative,
        packets: packets.len(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DilationCheck {
    /// `max ||(i[H, A] - RHS) psi|| / ||psi||` over interior packets.
    pub residual: f64,
    /// Minimum over lattice modes of `(2/rho) Psi'(s) s - 2 Psi(s)`.
    pub scalar_margin: f64,
    pub packets: usize,
}

impl DilationCheck {
    pub fn scalar_inequality_holds(&self) -> bool {
        self.scalar_margin >= -1e-12
    }
}

/// Compares the dense `i[H, A]` for the dilation generator with
/// `(2/rho) Psi'(|D|^2)|D|^2 - (1/rho) x.grad V_long`.
pub fn dilation_commutator_check(h: &HamiltonianHandle, spec: &PotentialSpec) -> Result<DilationCheck> {
    if spec.sing.is_some() || spec.short.is_some() || spec.custom.is_some() {
        return Err(Error::Precondition(
            "dilation identity requires a purely long-range potential".into(),
        ));
    }
    let grid = *h.grid();
    let symbol = *h.symbol();
    let rho = symbol.rho();
    let a = build_conjugate(&grid, rho, ConjugateKind::Dilation)?;
    let c = commutator_iha(h.dense()?, &a.dense)?.matrix;
    let free = Multiplier::from_fn(grid, |xi| {
        free_commutator_symbol(ConjugateKind::Dilation, &symbol, xi.iter().map(|v| v * v).sum())
    })?;
    let virial: Vec<f64> = spec.long_range_virial(&grid).iter().map(|v| -v / rho).collect();
    let rhs = multiplier_matrix(&free)? + diagonal_matrix(&virial);
    let diff = c - rhs;
    let packets = interior_packets(grid);
    let mut residual = 0.0f64;
    for p in &packets {
        residual = residual.max(apply_matrix(&diff, p)?.norm() / p.norm());
    }
    let scalar_margin = (0..grid.len())
        .map(|k| {
            let s = grid.momentum_sq(k);
            2.0 / rho * symbol.derivative(s) * s - 2.0 * symbol.value(s)
        })
        .fold(f64::INFINITY, f64::min);
    Ok(DilationCheck {
        residual,
        scalar_margin,
        packets: packets.len(),
    })
}
