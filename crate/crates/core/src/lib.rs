//! Fractional Schrödinger operators `Psi_rho(|D|^2) + V` on periodic grids: spectral tools,
//! propagation, commutator estimates and velocity-bound observables.

pub mod calculus;
pub mod error;
pub mod fft;
pub mod grid;
pub mod hamiltonian;
pub mod linalg;
pub mod mourre;
pub mod multiplier;
pub mod observables;
pub mod operator;
pub mod potentials;
pub mod propagator;
pub mod symbol;
pub mod wave;

pub use calculus::{make_bump, ChebyshevFunction, DenseFunction, SmoothCutoff};
pub use error::{Error, Result};
pub use grid::GridSpec;
pub use hamiltonian::{HamiltonianHandle, SpectralDecomposition};
pub use multiplier::Multiplier;
pub use operator::StateOperator;
pub use potentials::{PotentialSpec, SingularPart, Verdict};
pub use symbol::FractionalSymbol;
pub use wave::WaveFunction;
