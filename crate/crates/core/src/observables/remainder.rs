use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{check_dense_cap, multiplier_matrix, spectral_norm, CMatrix};
use crate::multiplier::Multiplier;
use crate::symbol::FractionalSymbol;

/// Norms below this are treated as exact zeros and make the slope fit unreliable.
pub const REMAINDER_FLOOR: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct RemainderFit {
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    /// Least-squares slope of `log norm` against `log t`; `None` when a norm hit the floor.
    pub slope: Option<f64>,
}

impl RemainderFit {
    pub fn at_floor(&self) -> bool {
        self.norms.iter().all(|&n| n < REMAINDER_FLOOR)
    }
}

fn commutator_with_diagonal(m: &CMatrix, d: &[f64]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (d[j] - d[i]))
}

/// Norm of `[Psi(|D|^2), chi(|x|/(2t))] - [|D|^2, chi(|x|/(2t))] Psi'(|D|^2)` restricted to
/// grid points outside the boundary shell, for each `t`, with a log-log slope fit.
pub fn commutator_remainder_decay(
    grid: &GridSpec,
    chi: impl Fn(f64) -> f64,
    rho: f64,
    times: &[f64],
) -> Result<RemainderFit> {
    check_dense_cap(grid)?;
    if times.len() < 5 {
        return Err(Error::InvalidArgument(format!("need at least 5 times, got {}", times.len())));
    }
    if times.iter().any(|t| !(*t > 0.0)) || times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument("times must be positive and increasing".into()));
    }
    let symbol = FractionalSymbol::new(rho)?;
    let sq = |xi: &[f64]| xi.iter().map(|v| v * v).sum::<f64>();
    let kinetic = multiplier_matrix(&Multiplier::from_fn(*grid, |xi| symbol.value(sq(xi)))?)?;
    let laplace = multiplier_matrix(&Multiplier::from_fn(*grid, sq)?)?;
    let slope_op = multiplier_matrix(&Multiplier::from_fn(*grid, |xi| symbol.derivative(sq(xi)))?)?;
    let interior: Vec<usize> = (0..grid.len()).filter(|&i| !grid.in_boundary_shell(i)).collect();
    let mut norms = Vec::with_capacity(times.len());
    for &t in times {
        let field: Vec<f64> = (0..grid.len()).map(|i| chi(grid.radius(i) / (2.0 * t))).collect();
        let r = commutator_with_diagonal(&kinetic, &field) - commutator_with_diagonal(&laplace, &field) * &slope_op;
        let sub = CMatrix::from_fn(interior.len(), interior.len(), |a, b| r[(interior[a], interior[b])]);
        norms.push(spectral_norm(&sub)?);
    }
    let slope = if norms.iter().any(|&n| n < REMAINDER_FLOOR) {
        None
    } else {
        let xs: Vec<f64> = times.iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = norms.iter().map(|n| n.ln()).collect();
        let n = xs.len() as f64;
        let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        Some(sxy / sxx)
    };
    Ok(RemainderFit {
        times: times.to_vec(),
        norms,
        slope,
    })
}
