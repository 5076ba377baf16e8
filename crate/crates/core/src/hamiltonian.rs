//! `H = Psi_rho(|D|^2) + V` on a periodic grid: matrix-free action, dense assembly,
//! diagonalization, and the relative-bound and point-spectrum probes.

use std::io::{Read, Write};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{
    self, apply_matrix, check_dense_cap, diagonal_matrix, hermitian_defect, hermitian_eigen,
    multiplier_matrix, orthonormality_defect, spectral_norm, CMatrix,
};
use crate::multiplier::Multiplier;
use crate::operator::StateOperator;
use crate::potentials::{admissibility_check, sample_potential, PotentialSpec, SingularPart, Verdict};
use crate::symbol::FractionalSymbol;
use crate::wave::{multiply_field, WaveFunction};

#[derive(Debug)]
pub struct HamiltonianHandle {
    grid: GridSpec,
    symbol: FractionalSymbol,
    potential: Vec<f64>,
    kinetic: Multiplier,
    dense: OnceLock<CMatrix>,
}

impl Clone for HamiltonianHandle {
    fn clone(&self) -> Self {
        Self {
            grid: self.grid,
            symbol: self.symbol,
            potential: self.potential.clone(),
            kinetic: self.kinetic.clone(),
            dense: OnceLock::new(),
        }
    }
}

/// Kinetic table `Psi_rho(|xi_k|^2)` in FFT order.
pub fn kinetic_multiplier(grid: GridSpec, symbol: &FractionalSymbol) -> Multiplier {
    Multiplier::from_fn(grid, |xi| symbol.value(xi.iter().map(|v| v * v).sum()))
        .expect("symbol is finite on the lattice")
}

impl HamiltonianHandle {
    pub fn new(grid: GridSpec, symbol: FractionalSymbol, spec: &PotentialSpec) -> Result<Self> {
        let potential = sample_potential(spec, &grid)?;
        Self::from_field(grid, symbol, potential)
    }

    pub fn free(grid: GridSpec, symbol: FractionalSymbol) -> Self {
        Self::from_field(grid, symbol, vec![0.0; grid.len()]).expect("zero field is valid")
    }

    pub fn from_field(grid: GridSpec, symbol: FractionalSymbol, potential: Vec<f64>) -> Result<Self> {
        if potential.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential field".into()));
        }
        Ok(Self {
            grid,
            symbol,
            potential,
            kinetic: kinetic_multiplier(grid, &symbol),
            dense: OnceLock::new(),
        })
    }

    /// Same potential with the kinetic table replaced by zeros.
    pub fn potential_only(&self) -> Self {
        let zero = Multiplier::from_fn(self.grid, |_| 0.0).expect("zero table");
        Self {
            kinetic: zero,
            dense: OnceLock::new(),
            ..self.clone()
        }
    }

    /// Adds `c` to the potential (so `H -> H + c I`).
    pub fn shifted(&self, c: f64) -> Self {
        let potential = self.potential.iter().map(|v| v + c).collect();
        Self {
            potential,
            dense: OnceLock::new(),
            ..self.clone()
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn symbol(&self) -> &FractionalSymbol {
        &self.symbol
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kinetic(&self) -> &Multiplier {
        &self.kinetic
    }

    pub fn is_free(&self) -> bool {
        self.potential.iter().all(|&v| v == 0.0)
    }

    /// Top of the kinetic band, `max_k Psi(|xi_k|^2)`.
    pub fn kinetic_band_top(&self) -> f64 {
        self.kinetic.table().iter().fold(0.0f64, |acc, v| acc.max(v.re))
    }

    pub fn potential_range(&self) -> (f64, f64) {
        self.potential
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let kin = self.kinetic.apply(psi)?;
        let pot = multiply_field(psi, &self.potential)?;
        &kin + &pot
    }

    /// Dense matrix, cached on first use.
    pub fn dense(&self) -> Result<&CMatrix> {
        if let Some(m) = self.dense.get() {
            return Ok(m);
        }
        let m = assemble_dense(self)?;
        Ok(self.dense.get_or_init(|| m))
    }
}

impl StateOperator for HamiltonianHandle {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        HamiltonianHandle::apply(self, psi)
    }
}

/// Kinetic circulant plus the diagonal potential.
pub fn assemble_dense(h: &HamiltonianHandle) -> Result<CMatrix> {
    check_dense_cap(&h.grid)?;
    let mut m = multiplier_matrix(&h.kinetic)?;
    for (i, v) in h.potential.iter().enumerate() {
        m[(i, i)] += Complex64::new(*v, 0.0);
    }
    Ok(m)
}

#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    grid: GridSpec,
    eigenvalues: Vec<f64>,
    /// Orthonormal (Euclidean) eigenvector columns.
    eigenvectors: CMatrix,
    residual: f64,
    orthonormality_defect: f64,
}

impl SpectralDecomposition {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn orthonormality_defect(&self) -> f64 {
        self.orthonormality_defect
    }

    /// `max |lambda|`.
    pub fn operator_norm(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
    }

    /// Eigenvector `j` as an `L^2`-normalized state.
    pub fn eigenstate(&self, j: usize) -> WaveFunction {
        let scale = 1.0 / self.grid.cell_volume().sqrt();
        let values = self.eigenvectors.column(j).iter().map(|v| v * scale).collect();
        WaveFunction::new(self.grid, values).expect("eigenvectors are finite")
    }

    /// `U diag(w) U^dagger psi`.
    pub fn apply_function_weights(&self, weights: &[f64], psi: &WaveFunction) -> Result<WaveFunction> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self.eigenvectors.adjoint() * linalg::to_vector(psi);
        let scaled = nalgebra::DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(weights).map(|(c, w)| c * *w),
        );
        let out = &self.eigenvectors * scaled;
        WaveFunction::new(self.grid, out.as_slice().to_vec())
    }

    /// `U diag(w) U^dagger` for complex weights.
    pub fn apply_complex_weights(&self, weights: &[Complex64], psi: &WaveFunction) -> Result<WaveFunction> {
        if *psi.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let coeffs = self.eigenvectors.adjoint() * linalg::to_vector(psi);
        let scaled = nalgebra::DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(weights).map(|(c, w)| c * w),
        );
        let out = &self.eigenvectors * scaled;
        WaveFunction::new(self.grid, out.as_slice().to_vec())
    }

    /// Dense `U diag(w) U^dagger`.
    pub fn function_matrix(&self, weights: &[f64]) -> CMatrix {
        let mut scaled = self.eigenvectors.clone();
        for (j, w) in weights.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*w);
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Tolerance for accepting a dense matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// Full eigendecomposition of a dense Hermitian grid matrix.
pub fn diagonalize(grid: &GridSpec, dense: &CMatrix) -> Result<SpectralDecomposition> {
    if dense.nrows() != grid.len() || dense.ncols() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let scale = dense.iter().fold(1.0f64, |acc, v| acc.max(v.norm()));
    let defect = hermitian_defect(dense);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian(defect));
    }
    let (eigenvalues, eigenvectors) = hermitian_eigen(dense)?;
    let norm = eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let hv = dense * &eigenvectors;
    let mut residual = 0.0f64;
    for (j, lambda) in eigenvalues.iter().enumerate() {
        let r = (hv.column(j) - eigenvectors.column(j) * Complex64::new(*lambda, 0.0)).norm();
        residual = residual.max(r);
    }
    let tolerance = 1e-9 * norm.max(1.0);
    if residual > tolerance {
        return Err(Error::Residual { residual, tolerance });
    }
    let orthonormality_defect = orthonormality_defect(&eigenvectors);
    if orthonormality_defect > 1e-10 {
        return Err(Error::Eigensolver(format!(
            "orthonormality defect {orthonormality_defect:e}"
        )));
    }
    Ok(SpectralDecomposition {
        grid: *grid,
        eigenvalues,
        eigenvectors,
        residual,
        orthonormality_defect,
    })
}

impl HamiltonianHandle {
    pub fn diagonalize(&self) -> Result<SpectralDecomposition> {
        diagonalize(&self.grid, self.dense()?)
    }
}

/// Magic header of the dense matrix export.
pub const MATRIX_MAGIC: &[u8; 8] = b"VBHMAT01";

/// Writes `MATRIX_MAGIC` followed by row-major little-endian `(re, im)` pairs.
pub fn write_dense_matrix(m: &CMatrix, out: &mut impl Write) -> Result<()> {
    out.write_all(MATRIX_MAGIC)?;
    let mut buf = Vec::with_capacity(m.nrows() * m.ncols() * 16);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)];
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads a square matrix written by [`write_dense_matrix`]; the order is inferred from the length.
pub fn read_dense_matrix(input: &mut impl Read) -> Result<CMatrix> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..8] != MATRIX_MAGIC {
        return Err(Error::Format("missing VBHMAT01 header".into()));
    }
    let body = &bytes[8..];
    if body.len() % 16 != 0 {
        return Err(Error::Format("payload is not a whole number of complex entries".into()));
    }
    let count = body.len() / 16;
    let n = (count as f64).sqrt().round() as usize;
    if n * n != count {
        return Err(Error::Format(format!("{count} entries do not form a square matrix")));
    }
    let entry = |k: usize| {
        let re = f64::from_le_bytes(body[16 * k..16 * k + 8].try_into().unwrap());
        let im = f64::from_le_bytes(body[16 * k + 8..16 * k + 16].try_into().unwrap());
        Complex64::new(re, im)
    };
    Ok(CMatrix::from_fn(n, n, |i, j| entry(i * n + j)))
}

/// One point of the relative-bound curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeBoundPoint {
    pub delta: f64,
    /// Empirical `max_phi (||V phi|| - C ||phi||)_+ / ||Psi phi||` over the probe family.
    pub epsilon_eff: f64,
    /// `|| V (1 + delta Psi)^{-1} ||`, the low-frequency constant.
    pub c_eff: f64,
    /// `delta || V (1 + delta Psi)^{-1} ||`, the high-frequency factor bounding `epsilon_eff`.
    pub epsilon_bound: f64,
}

/// Gaussians of several widths and momenta plus 20 seeded random band-limited states.
pub fn relative_bound_probe_family(grid: GridSpec) -> Vec<WaveFunction> {
    let mut out = Vec::new();
    let center = vec![0.0; grid.dim()];
    for &sigma in &[0.25, 0.5, 1.0, 2.0] {
        for &k in &[0.0, 2.0, 5.0] {
            let mut momentum = vec![0.0; grid.dim()];
            momentum[0] = k;
            if let Ok(psi) = WaveFunction::gaussian(grid, &center, &momentum, sigma) {
                out.push(psi);
            }
        }
    }
    let cutoff = 0.5 * grid.max_momentum();
    for seed in 0..20u64 {
        out.push(WaveFunction::random_band_limited(grid, cutoff, 0x5eed_0000 + seed));
    }
    out
}

/// Empirical `(epsilon, C)` pairs in `||V phi|| <= epsilon ||Psi phi|| + C ||phi||`, using the
/// frequency split `phi = (1 + delta Psi)^{-1} phi + delta Psi (1 + delta Psi)^{-1} phi`.
pub fn relative_bound_probe(
    h: &HamiltonianHandle,
    sing: &SingularPart,
    deltas: &[f64],
) -> Result<Vec<RelativeBoundPoint>> {
    let grid = *h.grid();
    if let Verdict::Rejected(reason) = admissibility_check(sing, h.symbol().rho(), grid.dim()) {
        return Err(Error::Precondition(format!("inadmissible singular part: {reason}")));
    }
    let field = PotentialSpec::zero().with_sing(*sing).sample_singular(&grid)?;
    relative_bound_curve(h, &field, deltas, &relative_bound_probe_family(grid))
}

/// Same as [`relative_bound_probe`] for an arbitrary field and probe family.
pub fn relative_bound_curve(
    h: &HamiltonianHandle,
    field: &[f64],
    deltas: &[f64],
    family: &[WaveFunction],
) -> Result<Vec<RelativeBoundPoint>> {
    let grid = *h.grid();
    check_dense_cap(&grid)?;
    if field.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let v = diagonal_matrix(field);
    let kinetic = h.kinetic();
    let mut stats = Vec::with_capacity(family.len());
    for phi in family {
        let v_phi = multiply_field(phi, field)?.norm();
        let psi_phi = kinetic.apply(phi)?.norm();
        stats.push((v_phi, phi.norm(), psi_phi));
    }
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        if !(delta > 0.0) {
            return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
        }
        let low_table: Vec<Complex64> = kinetic
            .table()
            .iter()
            .map(|k| Complex64::new(1.0 / (1.0 + delta * k.re), 0.0))
            .collect();
        let low = Multiplier::from_table(grid, low_table)?;
        let c_eff = spectral_norm(&(&v * multiplier_matrix(&low)?))?;
        let epsilon_bound = delta * c_eff;
        let mut epsilon_eff = 0.0f64;
        // Clamped at zero: a probe below the low-frequency bound needs no high-frequency share.
        for &(v_phi, phi_norm, psi_phi) in &stats {
            if psi_phi > 0.0 {
                epsilon_eff = epsilon_eff.max((v_phi - c_eff * phi_norm) / psi_phi);
            }
        }
        out.push(RelativeBoundPoint {
            delta,
            epsilon_eff,
            c_eff,
            epsilon_bound,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointSpectrumReport {
    pub window: (f64, f64),
    /// Strictly negative eigenvalues (below `-tol`) in the window, coarse and fine.
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
    /// Gaps between consecutive fine eigenvalues.
    pub gaps: Vec<f64>,
    /// Relative drift `|fine - coarse| / |fine|` for index-matched eigenvalues.
    pub drift: Vec<f64>,
    /// Nonnegative eigenvalues in the window with localized eigenvectors (fine grid).
    pub embedded_candidates: Vec<f64>,
    /// Window reaches into the upper half of the coarse kinetic band.
    pub band_edge_flag: bool,
    pub count_mismatch: bool,
}

impl PointSpectrumReport {
    pub fn count(&self) -> usize {
        self.fine.len()
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().fold(0.0f64, |a, b| a.max(*b))
    }
}

/// Eigenvectors with less than this fraction of mass in the boundary shell count as localized.
pub const LOCALIZED_SHELL_MASS: f64 = 1e-6;

/// Eigenvalues whose eigenvectors are localized or that lie below `-tol`.
pub fn point_spectrum_candidates(decomp: &SpectralDecomposition) -> Vec<f64> {
    let tol = 1e-8 * decomp.operator_norm();
    decomp
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(j, lambda)| {
            **lambda < -tol || decomp.eigenstate(*j).boundary_mass() < LOCALIZED_SHELL_MASS
        })
        .map(|(_, l)| *l)
        .collect()
}

pub fn point_spectrum_report(
    coarse: (&HamiltonianHandle, &SpectralDecomposition),
    fine: (&HamiltonianHandle, &SpectralDecomposition),
    window: (f64, f64),
) -> Result<PointSpectrumReport> {
    let (lo, hi) = window;
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty window ({lo}, {hi})")));
    }
    let negatives = |d: &SpectralDecomposition| -> Vec<f64> {
        let tol = 1e-8 * d.operator_norm();
        d.eigenvalues()
            .iter()
            .copied()
            .filter(|&l| l < -tol && l >= lo && l <= hi)
            .collect()
    };
    let c = negatives(coarse.1);
    let f = negatives(fine.1);
    let gaps = f.windows(2).map(|w| w[1] - w[0]).collect();
    let drift = c
        .iter()
        .zip(&f)
        .map(|(a, b)| (b - a).abs() / b.abs())
        .collect();
    let tol = 1e-8 * fine.1.operator_norm();
    let embedded_candidates = fine
        .1
        .eigenvalues()
        .iter()
        .enumerate()
        .filter(|(_, l)| **l >= -tol && **l >= lo && **l <= hi)
        .filter(|(j, _)| fine.1.eigenstate(*j).boundary_mass() < LOCALIZED_SHELL_MASS)
        .map(|(_, l)| *l)
        .collect();
    Ok(PointSpectrumReport {
        window,
        count_mismatch: c.len() != f.len(),
        coarse: c,
        fine: f,
        gaps,
        drift,
        embedded_candidates,
        band_edge_flag: hi > 0.5 * coarse.0.kinetic_band_top(),
    })
}

/// Applies the dense matrix of `h` to `psi`.
pub fn apply_dense(h: &HamiltonianHandle, psi: &WaveFunction) -> Result<WaveFunction> {
    apply_matrix(h.dense()?, psi)
}
