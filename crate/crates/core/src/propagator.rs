//! Time evolution `e^{-itH}`: Strang split-step, the dense spectral oracle and the exact free
//! multiplier, with recorded traces.

use std::io::Write;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::hamiltonian::{HamiltonianHandle, SpectralDecomposition};
use crate::wave::WaveFunction;

/// Boundary-mass budget for a valid trace.
pub const BOUNDARY_BUDGET: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TraceMethod {
    SplitStep { dt: f64 },
    DenseExact,
    FreeExact,
}

#[derive(Debug, Clone)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub states: Vec<WaveFunction>,
    pub boundary_mass: Vec<f64>,
    pub energies: Vec<f64>,
    pub method: TraceMethod,
}

impl EvolutionTrace {
    /// All recorded boundary masses are within [`BOUNDARY_BUDGET`].
    pub fn is_valid(&self) -> bool {
        self.boundary_mass.iter().all(|&m| m <= BOUNDARY_BUDGET)
    }

    /// First recorded time whose boundary mass exceeds the budget.
    pub fn first_violation(&self) -> Option<(f64, f64)> {
        self.times
            .iter()
            .zip(&self.boundary_mass)
            .find(|(_, &m)| m > BOUNDARY_BUDGET)
            .map(|(t, m)| (*t, *m))
    }

    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.states.first().map(|s| s.norm()).unwrap_or(0.0);
        self.states.iter().fold(0.0f64, |acc, s| acc.max((s.norm() - n0).abs()))
    }

    pub fn centroids(&self) -> Vec<Vec<f64>> {
        self.states.iter().map(|s| s.centroid()).collect()
    }

    /// Least-squares slope of the centroid over the recorded times.
    pub fn centroid_velocity(&self) -> Result<Vec<f64>> {
        centroid_velocity(self)
    }

    /// Columns `t, norm, boundary_mass, x_1..x_n, energy`.
    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        let dim = self.states.first().map(|s| s.grid().dim()).unwrap_or(1);
        let mut header = String::from("t,norm,boundary_mass");
        for j in 0..dim {
            header.push_str(&format!(",x{}", j + 1));
        }
        header.push_str(",energy");
        writeln!(out, "{header}")?;
        for (k, s) in self.states.iter().enumerate() {
            let c = s.centroid();
            let mut line = format!("{:e},{:e},{:e}", self.times[k], s.norm(), self.boundary_mass[k]);
            for v in &c {
                line.push_str(&format!(",{v:e}"));
            }
            line.push_str(&format!(",{:e}", self.energies[k]));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

pub fn centroid_velocity(trace: &EvolutionTrace) -> Result<Vec<f64>> {
    if !trace.is_valid() {
        return Err(Error::Precondition("trace exceeds the boundary-mass budget".into()));
    }
    let n = trace.times.len();
    if n < 4 {
        return Err(Error::Precondition(format!("need at least 4 recorded times, got {n}")));
    }
    let mean_t = trace.times.iter().sum::<f64>() / n as f64;
    let stt: f64 = trace.times.iter().map(|t| (t - mean_t).powi(2)).sum();
    if !(stt > 0.0) {
        return Err(Error::Precondition("degenerate time sampling".into()));
    }
    let dim = trace.states[0].grid().dim();
    let cs = trace.centroids();
    Ok((0..dim)
        .map(|j| {
            let mean_x = cs.iter().map(|c| c[j]).sum::<f64>() / n as f64;
            trace
                .times
                .iter()
                .zip(&cs)
                .map(|(t, c)| (t - mean_t) * (c[j] - mean_x))
                .sum::<f64>()
                / stt
        })
        .collect())
}

fn phase_table(values: impl Iterator<Item = f64>, tau: f64) -> Vec<Complex64> {
    values.map(|v| Complex64::from_polar(1.0, -tau * v)).collect()
}

/// Strang stepper with precomputed phase tables for a fixed step `tau`.
struct Strang<'a> {
    h: &'a HamiltonianHandle,
    kinetic: Vec<Complex64>,
    half_potential: Vec<Complex64>,
}

impl<'a> Strang<'a> {
    fn new(h: &'a HamiltonianHandle, tau: f64) -> Self {
        Self {
            h,
            kinetic: phase_table(h.kinetic().table().iter().map(|v| v.re), tau),
            half_potential: phase_table(h.potential().iter().copied(), 0.5 * tau),
        }
    }

    /// `steps` applications of `e^{-i tau V/2} e^{-i tau Psi} e^{-i tau V/2}`.
    fn run(&self, data: &mut [Complex64], steps: usize) {
        let grid = self.h.grid();
        for _ in 0..steps {
            mul(data, &self.half_potential);
            fft::forward(grid, data);
            mul(data, &self.kinetic);
            fft::inverse(grid, data);
            mul(data, &self.half_potential);
        }
    }
}

fn mul(data: &mut [Complex64], table: &[Complex64]) {
    for (v, p) in data.iter_mut().zip(table) {
        *v *= p;
    }
}

fn substeps(span: f64, dt: f64) -> (usize, f64) {
    let steps = ((span.abs() / dt) - 1e-9).ceil().max(1.0) as usize;
    (steps, span / steps as f64)
}

/// `e^{-itH} psi` by split-step with steps of size at most `dt`; `t` may be negative.
pub fn split_step(h: &HamiltonianHandle, psi: &WaveFunction, t: f64, dt: f64) -> Result<WaveFunction> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if *psi.grid() != *h.grid() {
        return Err(Error::GridMismatch);
    }
    if t == 0.0 {
        return Ok(psi.clone());
    }
    let (steps, tau) = substeps(t, dt);
    let mut data = psi.values().to_vec();
    Strang::new(h, tau).run(&mut data, steps);
    let out = WaveFunction::new(*h.grid(), data)
        .map_err(|_| Error::NonFinite("split-step state".into()))?;
    Ok(out)
}

fn energy(h: &HamiltonianHandle, psi: &WaveFunction) -> Result<f64> {
    Ok(psi.inner(&h.apply(psi)?)?.re)
}

fn check_record_times(record_times: &[f64], t_final: f64) -> Result<()> {
    if record_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("record times must be ascending".into()));
    }
    if record_times.iter().any(|&t| !(t >= 0.0 && t <= t_final)) {
        return Err(Error::InvalidArgument(format!("record times must lie in [0, {t_final}]")));
    }
    Ok(())
}

/// Split-step evolution to `t_final` recording at `record_times`. Between records the step is
/// the largest uniform step not exceeding `dt`.
pub fn evolve_split_step(
    h: &HamiltonianHandle,
    psi0: &WaveFunction,
    t_final: f64,
    dt: f64,
    record_times: &[f64],
) -> Result<EvolutionTrace> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    check_record_times(record_times, t_final)?;
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        states: Vec::new(),
        boundary_mass: Vec::new(),
        energies: Vec::new(),
        method: TraceMethod::SplitStep { dt },
    };
    let mut t = 0.0;
    let mut psi = psi0.clone();
    for &target in record_times {
        psi = split_step(h, &psi, target - t, dt)?;
        t = target;
        trace.boundary_mass.push(psi.boundary_mass());
        trace.energies.push(energy(h, &psi)?);
        trace.times.push(t);
        trace.states.push(psi.clone());
    }
    Ok(trace)
}

/// `sum_j e^{-i lambda_j t} <v_j, psi0> v_j`.
pub fn evolve_exact(decomp: &SpectralDecomposition, psi0: &WaveFunction, t: f64) -> Result<WaveFunction> {
    let tolerance = 1e-9 * decomp.operator_norm().max(1.0);
    if decomp.residual() > tolerance {
        return Err(Error::Residual {
            residual: decomp.residual(),
            tolerance,
        });
    }
    let phases: Vec<Complex64> = decomp
        .eigenvalues()
        .iter()
        .map(|l| Complex64::from_polar(1.0, -l * t))
        .collect();
    decomp.apply_complex_weights(&phases, psi0)
}

pub fn evolve_dense_trace(
    h: &HamiltonianHandle,
    decomp: &SpectralDecomposition,
    psi0: &WaveFunction,
    record_times: &[f64],
) -> Result<EvolutionTrace> {
    let t_final = record_times.last().copied().unwrap_or(0.0);
    check_record_times(record_times, t_final)?;
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        states: Vec::new(),
        boundary_mass: Vec::new(),
        energies: Vec::new(),
        method: TraceMethod::DenseExact,
    };
    for &t in record_times {
        let psi = evolve_exact(decomp, psi0, t)?;
        trace.boundary_mass.push(psi.boundary_mass());
        trace.energies.push(energy(h, &psi)?);
        trace.times.push(t);
        trace.states.push(psi);
    }
    Ok(trace)
}

/// `e^{-it Psi(|D|^2)} psi` as a single multiplier; requires `V = 0`.
pub fn evolve_free(h: &HamiltonianHandle, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
    if !h.is_free() {
        return Err(Error::Precondition("exact free evolution requires V = 0".into()));
    }
    if *psi.grid() != *h.grid() {
        return Err(Error::GridMismatch);
    }
    let mut data = psi.values().to_vec();
    fft::forward(h.grid(), &mut data);
    for (v, k) in data.iter_mut().zip(h.kinetic().table()) {
        *v *= Complex64::from_polar(1.0, -t * k.re);
    }
    fft::inverse(h.grid(), &mut data);
    WaveFunction::new(*h.grid(), data)
}

pub fn evolve_free_trace(h: &HamiltonianHandle, psi0: &WaveFunction, record_times: &[f64]) -> Result<EvolutionTrace> {
    let t_final = record_times.last().copied().unwrap_or(0.0);
    check_record_times(record_times, t_final)?;
    let mut trace = EvolutionTrace {
        times: Vec::new(),
        states: Vec::new(),
        boundary_mass: Vec::new(),
        energies: Vec::new(),
        method: TraceMethod::FreeExact,
    };
    for &t in record_times {
        let psi = evolve_free(h, psi0, t)?;
        trace.boundary_mass.push(psi.boundary_mass());
        trace.energies.push(energy(h, &psi)?);
        trace.times.push(t);
        trace.states.push(psi);
    }
    Ok(trace)
}

/// Any of the three propagators behind one interface.
#[derive(Debug, Clone, Copy)]
pub enum Propagator<'a> {
    SplitStep { h: &'a HamiltonianHandle, dt: f64 },
    Dense { decomp: &'a SpectralDecomposition },
    Free { h: &'a HamiltonianHandle },
}

impl Propagator<'_> {
    pub fn evolve(&self, psi: &WaveFunction, t: f64) -> Result<WaveFunction> {
        match *self {
            Propagator::SplitStep { h, dt } => split_step(h, psi, t, dt),
            Propagator::Dense { decomp } => evolve_exact(decomp, psi, t),
            Propagator::Free { h } => evolve_free(h, psi, t),
        }
    }

    /// States at ascending `times`, advancing incrementally where the method allows.
    pub fn sample(&self, psi: &WaveFunction, times: &[f64]) -> Result<Vec<WaveFunction>> {
        if times.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument("sample times must be ascending".into()));
        }
        match *self {
            Propagator::SplitStep { .. } => {
                let mut out = Vec::with_capacity(times.len());
                let (mut t, mut cur) = (0.0, psi.clone());
                for &target in times {
                    cur = self.evolve(&cur, target - t)?;
                    t = target;
                    out.push(cur.clone());
                }
                Ok(out)
            }
            _ => times.iter().map(|&t| self.evolve(psi, t)).collect(),
        }
    }
}
