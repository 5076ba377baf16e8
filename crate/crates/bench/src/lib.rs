//! Shared fixtures for the kernel benchmarks.

use velobound_core::potentials::{ShortPart, ShortProfile};
use velobound_core::{FractionalSymbol, GridSpec, HamiltonianHandle, PotentialSpec, WaveFunction};

/// Square-root symbol on a 1D box with an attractive short-range well.
pub fn well(n_points: usize, half_width: f64) -> HamiltonianHandle {
    let grid = GridSpec::new(1, n_points, half_width).expect("bench grid");
    let symbol = FractionalSymbol::new(0.5).expect("bench symbol");
    let spec = PotentialSpec::zero().with_short(ShortPart {
        amplitude: -2.0,
        gamma_short: 2.0,
        profile: ShortProfile::PowerLaw,
    });
    HamiltonianHandle::new(grid, symbol, &spec).expect("bench hamiltonian")
}

/// Unit Gaussian packet moving right from the left half of the box.
pub fn packet(grid: GridSpec) -> WaveFunction {
    let x0 = -grid.half_width() / 4.0;
    WaveFunction::gaussian(grid, &[x0], &[1.0], 1.5).expect("bench packet")
}
