//! Propagation observables: radial velocity windows, the flux deviation
//! `Psi'(|D|^2) D - x/(2t)`, the convex localizer `R`, and dt/t velocity-bound integrals.

mod heisenberg;
mod integrals;
mod remainder;
mod rfunction;

pub use heisenberg::{heisenberg_probe, window_observable, HeisenbergSample};
pub use integrals::{
    group_speed_range, lattice_speed_bound, log_schedule, maximal_bound_integral, middle_bound_integral,
    minimal_bound_integral, velocity_probe_family, Dynamics, ExperimentReport, ReportRow, Schedule, VelocityExperiment,
    PROBE_MOMENTA, PROBE_WIDTHS,
};
pub use remainder::{commutator_remainder_decay, RemainderFit, REMAINDER_FLOOR};
pub use rfunction::RFunction;

use crate::calculus::smooth_step;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::multiplier::apply_multiplier;
use crate::symbol::FractionalSymbol;
use crate::wave::{position_multiply, WaveFunction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Indicator of `theta_low <= |x|/(2t) < theta_high`.
    Sharp,
    /// Equal to 1 on the window and decaying to 0 over `width` on each side.
    Smooth { width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityWindow {
    theta_low: f64,
    theta_high: f64,
    smoothing: Smoothing,
}

impl VelocityWindow {
    /// `theta_high` may be infinite.
    pub fn new(theta_low: f64, theta_high: f64, smoothing: Smoothing) -> Result<Self> {
        if !(theta_low >= 0.0 && theta_low < theta_high) || theta_high.is_nan() {
            return Err(Error::InvalidArgument(format!(
                "velocity window needs 0 <= low < high, got [{theta_low}, {theta_high}]"
            )));
        }
        if let Smoothing::Smooth { width } = smoothing {
            if !(width > 0.0 && width.is_finite()) {
                return Err(Error::InvalidArgument(format!("transition width must be positive, got {width}")));
            }
        }
        Ok(Self {
            theta_low,
            theta_high,
            smoothing,
        })
    }

    pub fn sharp(theta_low: f64, theta_high: f64) -> Result<Self> {
        Self::new(theta_low, theta_high, Smoothing::Sharp)
    }

    /// The empty window `[0, 0)`.
    pub(crate) fn empty() -> Self {
        Self {
            theta_low: 0.0,
            theta_high: 0.0,
            smoothing: Smoothing::Sharp,
        }
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.theta_low, self.theta_high)
    }

    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    /// Weight at speed `s = |x|/(2t)`.
    pub fn weight(&self, s: f64) -> f64 {
        let (lo, hi) = (self.theta_low, self.theta_high);
        match self.smoothing {
            Smoothing::Sharp => {
                if s >= lo && s < hi {
                    1.0
                } else {
                    0.0
                }
            }
            Smoothing::Smooth { width } => {
                let lower = if lo == 0.0 { 1.0 } else { smooth_step((s - lo + width) / width) };
                let upper = if hi.is_infinite() { 1.0 } else { smooth_step((hi + width - s) / width) };
                lower * upper
            }
        }
    }
}

/// Weight field `F(|x|/(2t) in window)` on the grid.
pub fn radial_cutoff(grid: &GridSpec, t: f64, window: &VelocityWindow) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok((0..grid.len()).map(|i| window.weight(grid.radius(i) / (2.0 * t))).collect())
}

/// Components `Psi'(|D|^2) D_j psi - (x_j / (2t)) psi`.
pub fn flux_deviation(psi: &WaveFunction, symbol: &FractionalSymbol, t: f64) -> Result<Vec<WaveFunction>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("t must be positive, got {t}")));
    }
    let dim = psi.grid().dim();
    (0..dim)
        .map(|j| {
            let velocity = apply_multiplier(psi, |xi| symbol.derivative(xi.iter().map(|v| v * v).sum()) * xi[j])?;
            let position = position_multiply(psi, |x| x[j] / (2.0 * t))?;
            &velocity - &position
        })
        .collect()
}
