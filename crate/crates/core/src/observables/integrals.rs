use std::io::Write;
use std::sync::Arc;

use crate::calculus::{check_spectrum_avoidance, f_of_free, f_of_h_dense, spectral_bounds, ChebyshevFunction, SmoothCutoff};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::hamiltonian::{point_spectrum_candidates, HamiltonianHandle, SpectralDecomposition};
use crate::operator::StateOperator;
use crate::propagator::{Propagator, BOUNDARY_BUDGET};
use crate::symbol::FractionalSymbol;
use crate::wave::{multiply_field, WaveFunction};

use super::{flux_deviation, radial_cutoff, VelocityWindow};

/// Log-spaced times `10^{k/per_decade}` in `[t0, t1]`, merged with `extra` and both ends.
pub fn log_schedule(t0: f64, t1: f64, per_decade: usize, extra: &[f64]) -> Result<Vec<f64>> {
    if !(t0 > 0.0 && t1 > t0 && per_decade > 0) {
        return Err(Error::InvalidArgument(format!(
            "log schedule needs 0 < t0 < t1 and per_decade > 0, got ({t0}, {t1}, {per_decade})"
        )));
    }
    let mut times = vec![t0, t1];
    let (k0, k1) = (
        (t0.log10() * per_decade as f64).ceil() as i64,
        (t1.log10() * per_decade as f64).floor() as i64,
    );
    for k in k0..=k1 {
        times.push(10f64.powf(k as f64 / per_decade as f64));
    }
    times.extend(extra.iter().copied().filter(|t| *t >= t0 && *t <= t1));
    times.sort_by(f64::total_cmp);
    times.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    Ok(times)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    pub start: f64,
    pub horizon: f64,
    pub per_decade: usize,
    pub checkpoints: Vec<f64>,
}

impl Schedule {
    /// `[1, horizon]` at 16 points per decade.
    pub fn new(horizon: f64) -> Self {
        Self {
            start: 1.0,
            horizon,
            per_decade: 16,
            checkpoints: Vec::new(),
        }
    }

    /// Integrates to `2T` with `T` as a checkpoint, for plateau ratios.
    pub fn doubling(t: f64) -> Self {
        Self {
            checkpoints: vec![t],
            ..Self::new(2.0 * t)
        }
    }

    pub fn times(&self) -> Result<Vec<f64>> {
        log_schedule(self.start, self.horizon, self.per_decade, &self.checkpoints)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportRow {
    pub t: f64,
    pub integrand: f64,
    pub cumulative: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExperimentReport {
    pub metadata: Vec<(String, String)>,
    pub rows: Vec<ReportRow>,
    /// Set when the run stopped early on a boundary-mass violation.
    pub truncated: Option<String>,
}

pub const REPORT_MAGIC: &str = "# velobound v1";
pub const REPORT_HEADER: &str = "t,integrand,cumulative,boundary_mass";

impl ExperimentReport {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn push_meta(&mut self, key: &str, value: impl ToString) {
        self.metadata.push((key.to_string(), value.to_string()));
    }

    pub fn final_value(&self) -> f64 {
        self.rows.last().map(|r| r.cumulative).unwrap_or(0.0)
    }

    pub fn max_boundary_mass(&self) -> f64 {
        self.rows.iter().fold(0.0f64, |a, r| a.max(r.boundary_mass))
    }

    /// Cumulative integral at a scheduled time.
    pub fn cumulative_at(&self, t: f64) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| (r.t - t).abs() <= 1e-12 * t.abs().max(1.0))
            .map(|r| r.cumulative)
    }

    /// `I(2T)/I(T) - 1`.
    pub fn plateau_excess(&self, t: f64) -> Option<f64> {
        let a = self.cumulative_at(t)?;
        let b = self.cumulative_at(2.0 * t)?;
        Some(b / a - 1.0)
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.iter().all(|r| r.integrand >= 0.0) && self.rows.windows(2).all(|w| w[1].cumulative >= w[0].cumulative)
    }

    pub fn write_csv(&self, out: &mut impl Write) -> Result<()> {
        writeln!(out, "{REPORT_MAGIC}")?;
        for (k, v) in &self.metadata {
            writeln!(out, "# {k}={v}")?;
        }
        if let Some(reason) = &self.truncated {
            writeln!(out, "# truncated={reason}")?;
        }
        writeln!(out, "{REPORT_HEADER}")?;
        for r in &self.rows {
            writeln!(out, "{:e},{:e},{:e},{:e}", r.t, r.integrand, r.cumulative, r.boundary_mass)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("report CSV is ASCII")
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(REPORT_MAGIC) {
            return Err(Error::Format(format!("first line must be '{REPORT_MAGIC}'")));
        }
        let mut report = ExperimentReport::default();
        let mut header_seen = false;
        for (n, line) in lines.enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if !header_seen {
                if let Some(meta) = line.strip_prefix("# ") {
                    let (k, v) = meta
                        .split_once('=')
                        .ok_or_else(|| Error::Format(format!("line {}: metadata without '='", n + 2)))?;
                    if k == "truncated" {
                        report.truncated = Some(v.to_string());
                    } else {
                        report.metadata.push((k.to_string(), v.to_string()));
                    }
                    continue;
                }
                if line != REPORT_HEADER {
                    return Err(Error::Format(format!("line {}: expected header '{REPORT_HEADER}'", n + 2)));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<f64> = line
                .split(',')
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(format!("line {}: {e}", n + 2)))?;
            if fields.len() != 4 {
                return Err(Error::Format(format!("line {}: expected 4 columns, got {}", n + 2, fields.len())));
            }
            report.rows.push(ReportRow {
                t: fields[0],
                integrand: fields[1],
                cumulative: fields[2],
                boundary_mass: fields[3],
            });
        }
        if !header_seen {
            return Err(Error::Format("missing column header".into()));
        }
        Ok(report)
    }
}

/// How `f(H)` and `e^{-itH}` are realized.
#[derive(Debug, Clone)]
pub enum Dynamics {
    /// `V = 0`: both are exact Fourier multipliers.
    Free,
    /// Dense spectral oracle.
    Dense(Arc<SpectralDecomposition>),
    /// Split-step evolution with a Chebyshev filter.
    SplitStep { dt: f64, degree: usize },
}

impl Dynamics {
    fn label(&self) -> String {
        match self {
            Dynamics::Free => "free_exact".into(),
            Dynamics::Dense(_) => "dense_exact".into(),
            Dynamics::SplitStep { dt, degree } => format!("split_step(dt={dt};degree={degree})"),
        }
    }
}

/// Continuous range of group speeds `2|xi| Psi'(|xi|^2)` over energies in `[a, b]`, `a >= 0`.
pub fn group_speed_range(symbol: &FractionalSymbol, support: (f64, f64)) -> (f64, f64) {
    let (a, b) = (support.0.max(0.0), support.1.max(0.0));
    let samples = 2001;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for k in 0..samples {
        let lambda = a + (b - a) * k as f64 / (samples - 1) as f64;
        let v = symbol.group_speed(symbol.momentum_at_energy(lambda));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

/// `C_f`: the largest lattice group speed among modes with `Psi(|xi_k|^2)` in `supp f`.
pub fn lattice_speed_bound(h: &HamiltonianHandle, f: &SmoothCutoff) -> f64 {
    let (a, b) = f.support();
    let grid = h.grid();
    let symbol = h.symbol();
    (0..grid.len())
        .filter_map(|k| {
            let s = grid.momentum_sq(k);
            let e = symbol.value(s);
            (e > a && e < b).then(|| symbol.group_speed(s.sqrt()))
        })
        .fold(0.0, f64::max)
}

/// Origin-centered Gaussians, one per `(width, momentum)` pair, momentum along the first axis.
pub fn velocity_probe_family(grid: GridSpec, widths: &[f64], momenta: &[f64]) -> Result<Vec<WaveFunction>> {
    let center = vec![0.0; grid.dim()];
    let mut out = Vec::with_capacity(widths.len() * momenta.len());
    for &sigma in widths {
        for &k in momenta {
            let mut momentum = vec![0.0; grid.dim()];
            momentum[0] = k;
            out.push(WaveFunction::gaussian(grid, &center, &momentum, sigma)?);
        }
    }
    Ok(out)
}

/// Widths of the default velocity probe family.
pub const PROBE_WIDTHS: [f64; 5] = [1.0, 1.5, 2.0, 3.0, 4.0];
/// Momenta of the default velocity probe family.
pub const PROBE_MOMENTA: [f64; 3] = [0.5, 1.0, 1.5];

pub struct VelocityExperiment<'a> {
    h: &'a HamiltonianHandle,
    f: SmoothCutoff,
    dynamics: Dynamics,
    schedule: Schedule,
    label: String,
    filter: Box<dyn StateOperator + 'a>,
}

impl<'a> VelocityExperiment<'a> {
    /// Builds `f(H)` for the chosen dynamics and checks `supp f` against the computed point
    /// spectrum when a decomposition is available.
    pub fn new(h: &'a HamiltonianHandle, f: SmoothCutoff, dynamics: Dynamics, schedule: Schedule) -> Result<Self> {
        schedule.times()?;
        let filter: Box<dyn StateOperator + 'a> = match &dynamics {
            Dynamics::Free => Box::new(f_of_free(h, |x| f.eval(x))?),
            Dynamics::Dense(decomp) => {
                if decomp.grid() != h.grid() {
                    return Err(Error::GridMismatch);
                }
                check_spectrum_avoidance(&point_spectrum_candidates(decomp), &f)?;
                Box::new(f_of_h_dense(decomp.clone(), &f))
            }
            Dynamics::SplitStep { dt, degree } => {
                if !(*dt > 0.0) {
                    return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
                }
                Box::new(ChebyshevFunction::from_cutoff(h, &f, *degree, spectral_bounds(h)?)?)
            }
        };
        Ok(Self {
            h,
            f,
            dynamics,
            schedule,
            label: "unnamed".into(),
            filter,
        })
    }

    /// Potential identifier recorded in report metadata.
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// `f(H) phi`.
    pub fn filtered(&self, phi: &WaveFunction) -> Result<WaveFunction> {
        self.filter.apply(phi)
    }

    pub fn hamiltonian(&self) -> &HamiltonianHandle {
        self.h
    }

    pub fn cutoff(&self) -> &SmoothCutoff {
        &self.f
    }

    pub fn schedule(&self) -> &Schedule {
        &self.schedule
    }

    fn propagator(&self) -> Propagator<'_> {
        match &self.dynamics {
            Dynamics::Free => Propagator::Free { h: self.h },
            Dynamics::Dense(d) => Propagator::Dense { decomp: d },
            Dynamics::SplitStep { dt, .. } => Propagator::SplitStep { h: self.h, dt: *dt },
        }
    }

    fn base_report(&self, kind: &str, window: &VelocityWindow) -> ExperimentReport {
        let g = self.h.grid();
        let (a, a1, b1, b) = self.f.params();
        let (lo, hi) = window.bounds();
        let mut r = ExperimentReport::default();
        r.push_meta("kind", kind);
        r.push_meta("rho", self.h.symbol().rho());
        r.push_meta("potential", &self.label);
        r.push_meta("cutoff", format!("{a};{a1};{b1};{b}"));
        r.push_meta("window", format!("{lo};{hi}"));
        r.push_meta("grid", format!("{};{};{}", g.dim(), g.n_points(), g.half_width()));
        r.push_meta("dynamics", self.dynamics.label());
        r
    }

    /// Trapezoid in `log t` of `integrand(t, f(H) e^{-itH} phi)`.
    fn integrate(
        &self,
        mut report: ExperimentReport,
        phi: &WaveFunction,
        integrand: impl Fn(f64, &WaveFunction) -> Result<f64>,
    ) -> Result<ExperimentReport> {
        if phi.grid() != self.h.grid() {
            return Err(Error::GridMismatch);
        }
        let filtered = self.filter.apply(phi)?;
        let times = self.schedule.times()?;
        let propagator = self.propagator();
        let mut cumulative = 0.0;
        let mut prev: Option<(f64, f64)> = None;
        let mut state = filtered.clone();
        let mut t_state = 0.0;
        for &t in &times {
            state = match &self.dynamics {
                Dynamics::SplitStep { .. } => propagator.evolve(&state, t - t_state)?,
                _ => propagator.evolve(&filtered, t)?,
            };
            t_state = t;
            if !state.is_finite() {
                return Err(Error::NonFinite(format!("state at t = {t}")));
            }
            let mass = state.boundary_mass();
            if mass > BOUNDARY_BUDGET {
                report.truncated = Some(format!("boundary mass {mass:e} at t={t}"));
                break;
            }
            let value = integrand(t, &state)?;
            if let Some((tp, vp)) = prev {
                cumulative += 0.5 * (value + vp) * (t.ln() - tp.ln());
            }
            prev = Some((t, value));
            report.rows.push(ReportRow {
                t,
                integrand: value,
                cumulative,
                boundary_mass: mass,
            });
        }
        Ok(report)
    }

    fn window_mass(&self, window: VelocityWindow) -> impl Fn(f64, &WaveFunction) -> Result<f64> + '_ {
        move |t, psi| {
            let weight = radial_cutoff(self.h.grid(), t, &window)?;
            Ok(multiply_field(psi, &weight)?.norm_sqr())
        }
    }
}

/// `int_1^T ||F(|x|/(2t) < theta0) f(H) e^{-itH} phi||^2 dt/t`.
pub fn minimal_bound_integral(exp: &VelocityExperiment, theta0: f64, phi: &WaveFunction) -> Result<ExperimentReport> {
    let window = if theta0 == 0.0 {
        VelocityWindow::empty()
    } else {
        VelocityWindow::sharp(0.0, theta0)?
    };
    let mut report = exp.base_report("minimal", &window);
    report.push_meta("theta0", theta0);
    exp.integrate(report, phi, exp.window_mass(window))
}

/// Same integral over the window `[theta_big, theta)`; requires `theta_big > C_f`.
pub fn maximal_bound_integral(
    exp: &VelocityExperiment,
    theta_big: f64,
    theta: f64,
    phi: &WaveFunction,
) -> Result<ExperimentReport> {
    let c_f = lattice_speed_bound(exp.hamiltonian(), exp.cutoff());
    if !(theta_big > c_f) {
        return Err(Error::Precondition(format!(
            "Theta = {theta_big} must exceed C_f = {c_f}"
        )));
    }
    if !(theta > theta_big) {
        return Err(Error::Precondition(format!("theta = {theta} must exceed Theta = {theta_big}")));
    }
    let window = VelocityWindow::sharp(theta_big, theta)?;
    let mut report = exp.base_report("maximal", &window);
    report.push_meta("c_f", c_f);
    exp.integrate(report, phi, exp.window_mass(window))
}

/// `int_1^T sum_j ||F(theta1 <= |x|/(2t) < theta2) (Psi'(|D|^2) D_j - x_j/(2t)) f(H) e^{-itH} phi||^2 dt/t`.
pub fn middle_bound_integral(
    exp: &VelocityExperiment,
    theta1: f64,
    theta2: f64,
    phi: &WaveFunction,
) -> Result<ExperimentReport> {
    if !(theta1 > 0.0 && theta2 > theta1) {
        return Err(Error::Precondition(format!(
            "need 0 < theta1 < theta2, got ({theta1}, {theta2})"
        )));
    }
    let window = VelocityWindow::sharp(theta1, theta2)?;
    let report = exp.base_report("middle", &window);
    let symbol = *exp.hamiltonian().symbol();
    let grid = *exp.hamiltonian().grid();
    exp.integrate(report, phi, move |t, psi| {
        let weight = radial_cutoff(&grid, t, &window)?;
        let mut total = 0.0;
        for component in flux_deviation(psi, &symbol, t)? {
            total += multiply_field(&component, &weight)?.norm_sqr();
        }
        Ok(total)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calculus::make_bump;
    use crate::grid::GridSpec;
    use crate::potentials::{PotentialSpec, ShortPart, ShortProfile};
    use num_complex::Complex64;

    #[test]
    fn schedule_contains_checkpoints() {
        let s = Schedule::doubling(50.0).times().unwrap();
        assert_eq!(s[0], 1.0);
        assert_eq!(*s.last().unwrap(), 100.0);
        assert!(s.contains(&50.0));
        assert!(s.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(log_schedule(1.0, 10.0, 16, &[]).unwrap().len(), 17);
    }

    #[test]
    fn csv_roundtrip() {
        let mut r = ExperimentReport::default();
        r.push_meta("rho", 0.5);
        r.rows.push(ReportRow {
            t: 1.0,
            integrand: 0.25,
            cumulative: 0.0,
            boundary_mass: 1e-20,
        });
        let text = r.to_csv_string();
        assert!(text.starts_with("# velobound v1\n# rho=0.5\nt,integrand,cumulative,boundary_mass\n"));
        assert_eq!(ExperimentReport::parse_csv(&text).unwrap(), r);
        assert!(ExperimentReport::parse_csv("t,integrand\n").is_err());
    }

    fn free_setup() -> (HamiltonianHandle, SmoothCutoff) {
        let g = GridSpec::new(1, 512, 120.0).unwrap();
        let h = HamiltonianHandle::free(g, FractionalSymbol::new(0.5).unwrap());
        (h, make_bump(0.05, 0.15, 1.0, 1.4).unwrap())
    }

    #[test]
    fn zero_state_and_degenerate_window() {
        let (h, f) = free_setup();
        let exp = VelocityExperiment::new(&h, f, Dynamics::Free, Schedule::new(20.0)).unwrap();
        let zero = WaveFunction::zeros(*h.grid());
        let r = maximal_bound_integral(&exp, 5.0, 10.0, &zero).unwrap();
        assert!(r.rows.iter().all(|row| row.integrand == 0.0));
        let phi = WaveFunction::gaussian(*h.grid(), &[0.0], &[1.0], 3.0).unwrap();
        let r = minimal_bound_integral(&exp, 0.0, &phi).unwrap();
        assert_eq!(r.final_value(), 0.0);
    }

    #[test]
    fn bilinear_scaling() {
        let (h, f) = free_setup();
        let exp = VelocityExperiment::new(&h, f, Dynamics::Free, Schedule::new(20.0)).unwrap();
        let phi = WaveFunction::gaussian(*h.grid(), &[0.0], &[1.0], 3.0).unwrap();
        let a = minimal_bound_integral(&exp, 0.05, &phi).unwrap();
        let b = minimal_bound_integral(&exp, 0.05, &phi.scale(Complex64::new(3.0, 0.0))).unwrap();
        assert!(a.is_monotone());
        assert!((b.final_value() - 9.0 * a.final_value()).abs() <= 1e-12 * b.final_value());
    }

    #[test]
    fn maximal_threshold_enforced() {
        let (h, f) = free_setup();
        let exp = VelocityExperiment::new(&h, f, Dynamics::Free, Schedule::new(10.0)).unwrap();
        let phi = WaveFunction::gaussian(*h.grid(), &[0.0], &[1.0], 3.0).unwrap();
        let c_f = lattice_speed_bound(&h, &f);
        assert!(c_f > 0.0);
        match maximal_bound_integral(&exp, 0.5 * c_f, 2.0 * c_f, &phi) {
            Err(Error::Precondition(msg)) => assert!(msg.contains(&format!("{c_f}"))),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn eigenvector_outside_cutoff_gives_zero() {
        let g = GridSpec::new(1, 128, 16.0).unwrap();
        let spec = PotentialSpec::zero().with_short(ShortPart {
            amplitude: -2.0,
            gamma_short: 2.0,
            profile: ShortProfile::PowerLaw,
        });
        let h = HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &spec).unwrap();
        let d = Arc::new(h.diagonalize().unwrap());
        let f = make_bump(0.6, 0.8, 1.5, 1.8).unwrap();
        let exp = VelocityExperiment::new(&h, f, Dynamics::Dense(d.clone()), Schedule::new(10.0)).unwrap();
        let v = d.eigenstate(0);
        assert!(d.eigenvalues()[0] < 0.0);
        let r = minimal_bound_integral(&exp, 0.1, &v).unwrap();
        assert!(r.final_value() <= 1e-12);
        let r = middle_bound_integral(&exp, 0.1, 0.5, &v).unwrap();
        assert!(r.final_value() <= 1e-12);
        // A cutoff covering the ground state is rejected.
        let bad = make_bump(d.eigenvalues()[0] - 0.1, d.eigenvalues()[0] - 0.05, 1.0, 1.2).unwrap();
        assert!(VelocityExperiment::new(&h, bad, Dynamics::Dense(d), Schedule::new(10.0)).is_err());
    }
}
