use crate::error::Result;
use crate::wave::WaveFunction;

/// A linear operator acting on states of a fixed grid.
pub trait StateOperator: Sync {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction>;
}

impl<F> StateOperator for F
where
    F: Fn(&WaveFunction) -> Result<WaveFunction> + Sync,
{
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        self(psi)
    }
}

/// The identity operator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl StateOperator for Identity {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        Ok(psi.clone())
    }
}
