use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::operator::StateOperator;
use crate::propagator::EvolutionTrace;
use crate::wave::multiply_field;

use super::{radial_cutoff, VelocityWindow};

/// Largest recording step accepted for central differences.
pub const MAX_PROBE_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeisenbergSample {
    pub t: f64,
    pub expectation: f64,
    pub derivative: f64,
}

/// Central-difference derivative of `<psi(t), P(t) psi(t)>` at the interior recorded times.
pub fn heisenberg_probe<P>(
    trace: &EvolutionTrace,
    observable: impl Fn(f64) -> Result<P>,
) -> Result<Vec<HeisenbergSample>>
where
    P: StateOperator,
{
    if !trace.is_valid() {
        return Err(Error::Precondition("trace exceeds the boundary-mass budget".into()));
    }
    let times = &trace.times;
    if times.len() < 3 {
        return Err(Error::Precondition("need at least 3 recorded times".into()));
    }
    if let Some(w) = times.windows(2).find(|w| !(w[1] > w[0] && w[1] - w[0] <= MAX_PROBE_STEP + 1e-12)) {
        return Err(Error::Precondition(format!(
            "recording step {} exceeds {MAX_PROBE_STEP}",
            w[1] - w[0]
        )));
    }
    let values: Vec<f64> = times
        .iter()
        .zip(&trace.states)
        .map(|(&t, psi)| Ok(psi.inner(&observable(t)?.apply(psi)?)?.re))
        .collect::<Result<_>>()?;
    Ok((1..times.len() - 1)
        .map(|k| HeisenbergSample {
            t: times[k],
            expectation: values[k],
            derivative: (values[k + 1] - values[k - 1]) / (times[k + 1] - times[k - 1]),
        })
        .collect())
}

/// `P(t) = F(|x|/(2t) in window)` as a multiplication operator.
pub fn window_observable(grid: GridSpec, window: VelocityWindow) -> impl Fn(f64) -> Result<Box<dyn StateOperator>> {
    move |t| {
        let field = radial_cutoff(&grid, t, &window)?;
        let op = move |psi: &crate::wave::WaveFunction| multiply_field(psi, &field);
        Ok(Box::new(op) as Box<dyn StateOperator>)
    }
}

impl<'a> StateOperator for Box<dyn StateOperator + 'a> {
    fn apply(&self, psi: &crate::wave::WaveFunction) -> Result<crate::wave::WaveFunction> {
        (**self).apply(psi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::HamiltonianHandle;
    use crate::operator::Identity;
    use crate::propagator::{evolve_dense_trace, evolve_free_trace};
    use crate::symbol::FractionalSymbol;
    use crate::wave::WaveFunction;

    #[test]
    fn identity_and_energy_are_conserved() {
        let g = GridSpec::new(1, 64, 12.0).unwrap();
        let h = HamiltonianHandle::free(g, FractionalSymbol::new(0.5).unwrap());
        let d = h.diagonalize().unwrap();
        let psi = WaveFunction::gaussian(g, &[0.0], &[0.5], 1.0).unwrap();
        let times: Vec<f64> = (0..=20).map(|k| 0.05 * k as f64).collect();
        let trace = evolve_dense_trace(&h, &d, &psi, &times).unwrap();
        for s in heisenberg_probe(&trace, |_| Ok(Identity)).unwrap() {
            assert!(s.derivative.abs() < 1e-10);
        }
        for s in heisenberg_probe(&trace, |_| Ok(h.clone())).unwrap() {
            assert!(s.derivative.abs() < 1e-8);
        }
    }

    #[test]
    fn coarse_recording_rejected() {
        let g = GridSpec::new(1, 64, 12.0).unwrap();
        let h = HamiltonianHandle::free(g, FractionalSymbol::new(0.5).unwrap());
        let psi = WaveFunction::gaussian(g, &[0.0], &[0.5], 1.0).unwrap();
        let trace = evolve_free_trace(&h, &psi, &[0.0, 0.5, 1.0]).unwrap();
        assert!(heisenberg_probe(&trace, |_| Ok(Identity)).is_err());
    }
}
