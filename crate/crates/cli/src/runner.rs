use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use velobound_core::calculus::{make_bump, SmoothCutoff};
use velobound_core::hamiltonian::{point_spectrum_candidates, point_spectrum_report, relative_bound_probe};
use velobound_core::mourre::{
    build_conjugate, dilation_commutator_check, free_identity_check, mourre_lower_bound, ConjugateKind,
};
use velobound_core::observables::{
    commutator_remainder_decay, group_speed_range, lattice_speed_bound, maximal_bound_integral,
    middle_bound_integral, minimal_bound_integral, velocity_probe_family, Dynamics, ExperimentReport, Schedule,
    VelocityExperiment, PROBE_MOMENTA, PROBE_WIDTHS,
};
use velobound_core::potentials::{admissibility_check, ExponentRange};
use velobound_core::propagator::{evolve_dense_trace, evolve_exact, evolve_free_trace, evolve_split_step, split_step, EvolutionTrace};
use velobound_core::{HamiltonianHandle, PotentialSpec, Verdict, WaveFunction};

use crate::config::{DynamicsChoice, Kind, Validated};
use crate::plot::plot_report;
use crate::CliError;

/// Mass fraction left outside the radius used for the default maximal-window edge.
const MAXIMAL_TAIL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct Assertion {
    pub tag: String,
    pub passed: bool,
    pub detail: String,
}

impl Assertion {
    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!("[{}] {verdict} {}", self.tag, self.detail)
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub assertions: Vec<Assertion>,
    /// Informational lines, such as the Mourre summary.
    pub notes: Vec<String>,
    /// Boundary-mass or non-finite flags raised during the run.
    pub flags: Vec<String>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if !self.flags.is_empty() {
            4
        } else if self.assertions.iter().any(|a| !a.passed) {
            1
        } else {
            0
        }
    }

    /// Notes, flags and PASS/FAIL lines in print order.
    pub fn lines(&self) -> Vec<String> {
        let mut out = self.notes.clone();
        out.extend(self.flags.iter().map(|f| format!("runtime flag: {f}")));
        out.extend(self.assertions.iter().map(Assertion::line));
        out
    }
}

struct Ctx<'a> {
    v: &'a Validated,
    out: RunOutcome,
}

impl Ctx<'_> {
    fn tag(&self) -> String {
        match self.v.config.experiment.criterion {
            Some(id) => format!("AC{id}"),
            None => self.v.kind().name().to_string(),
        }
    }

    fn assert(&mut self, passed: bool, detail: String) {
        let tag = self.tag();
        self.out.assertions.push(Assertion { tag, passed, detail });
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.v.output_dir.join(name);
        std::fs::write(&path, contents)?;
        self.out.files.push(path);
        Ok(())
    }

    fn write_report(&mut self, stem: &str, report: &ExperimentReport) -> Result<(), CliError> {
        let csv = report.to_csv_string();
        self.write(&format!("{stem}.csv"), &csv)?;
        if self.v.wants_svg() {
            self.write(&format!("{stem}.svg"), &plot_report(report))?;
        }
        Ok(())
    }
}

pub fn run(v: &Validated) -> Result<RunOutcome, CliError> {
    std::fs::create_dir_all(&v.output_dir)?;
    let mut ctx = Ctx {
        v,
        out: RunOutcome::default(),
    };
    match v.kind() {
        Kind::Evolve => evolve(&mut ctx)?,
        Kind::Spectrum => spectrum(&mut ctx)?,
        Kind::Mourre => mourre(&mut ctx)?,
        Kind::Minimal | Kind::Maximal | Kind::Middle => velocity(&mut ctx)?,
        Kind::Remainder => remainder(&mut ctx)?,
        Kind::Relbound => relbound(&mut ctx)?,
        Kind::Admissibility => admissibility(&mut ctx)?,
        Kind::Dilation => dilation(&mut ctx)?,
    }
    Ok(ctx.out)
}

fn hamiltonian(v: &Validated) -> Result<HamiltonianHandle, CliError> {
    Ok(HamiltonianHandle::new(v.grid, v.symbol, &v.potential)?)
}

fn potential_label(spec: &PotentialSpec) -> String {
    let mut parts = Vec::new();
    if let Some(s) = &spec.sing {
        parts.push(format!("sing(kappa={};eps={})", s.kappa, s.epsilon));
    }
    if let Some(s) = &spec.short {
        parts.push(format!("short(amp={};gamma={})", s.amplitude, s.gamma_short));
    }
    if let Some(l) = &spec.long {
        parts.push(format!("long(amp={};gamma={})", l.amplitude, l.gamma_long));
    }
    if parts.is_empty() {
        "zero".into()
    } else {
        parts.join("+")
    }
}

fn padded(values: &Option<Vec<f64>>, dim: usize) -> Vec<f64> {
    let mut out = values.clone().unwrap_or_default();
    out.resize(dim, 0.0);
    out
}

fn trace_csv(trace: &EvolutionTrace) -> Result<String, CliError> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("trace CSV is ASCII"))
}

fn evolve(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let t_final = exp.horizon.expect("validated");
    let h = hamiltonian(v)?;
    let needs_decomp = v.dynamics == DynamicsChoice::Dense || exp.convergence || v.config.state.eigen_index.is_some();
    let decomp = if needs_decomp { Some(h.diagonalize()?) } else { None };
    let psi0 = match v.config.state.eigen_index {
        Some(j) => {
            let d = decomp.as_ref().expect("decomposition built for eigen_index");
            if j >= d.eigenvalues().len() {
                return Err(CliError::Validation(format!("state.eigen_index {j} out of range")));
            }
            d.eigenstate(j)
        }
        None => WaveFunction::gaussian(
            v.grid,
            &padded(&v.config.state.center, v.grid.dim()),
            &padded(&v.config.state.momentum, v.grid.dim()),
            v.config.state.width.unwrap_or(1.0),
        )?,
    };
    let times = match &exp.times {
        Some(t) => t.clone(),
        None => (0..=10).map(|k| t_final * k as f64 / 10.0).collect(),
    };
    let trace = match v.dynamics {
        DynamicsChoice::Free => evolve_free_trace(&h, &psi0, &times)?,
        DynamicsChoice::Dense => evolve_dense_trace(&h, decomp.as_ref().expect("dense"), &psi0, &times)?,
        DynamicsChoice::SplitStep { dt } => evolve_split_step(&h, &psi0, t_final, dt, &times)?,
    };
    ctx.write("evolve.csv", &trace_csv(&trace)?)?;
    if trace.states.iter().any(|s| !s.is_finite()) {
        ctx.out.flags.push("non-finite state".into());
    }
    if let Some((t, m)) = trace.first_violation() {
        ctx.out.flags.push(format!("boundary mass {m:e} at t={t}"));
        return Ok(());
    }
    if let Some(expected) = exp.expected_velocity {
        let measured = trace.centroid_velocity()?[0];
        let rel = (measured - expected).abs() / expected.abs();
        let tol = exp.tolerance.unwrap_or(0.02);
        ctx.assert(
            rel <= tol,
            format!("centroid velocity {measured:.6} vs {expected:.6}, relative error {rel:.3e} (tol {tol:e})"),
        );
    }
    if exp.convergence {
        let DynamicsChoice::SplitStep { dt } = v.dynamics else {
            unreachable!("validated")
        };
        let exact = evolve_exact(decomp.as_ref().expect("dense"), &psi0, t_final)?;
        let err = |step: f64| -> Result<f64, CliError> { Ok(split_step(&h, &psi0, t_final, step)?.l2_distance(&exact)?) };
        let (coarse, fine) = (err(dt)?, err(0.5 * dt)?);
        let ratio = coarse / fine;
        let mut csv = String::from("dt,error\n");
        writeln!(csv, "{dt:e},{coarse:e}").unwrap();
        writeln!(csv, "{:e},{fine:e}", 0.5 * dt).unwrap();
        ctx.write("convergence.csv", &csv)?;
        let tol = exp.tolerance.unwrap_or(1e-6);
        let ratio_tol = exp.ratio_tolerance.unwrap_or(0.2);
        ctx.assert(
            coarse <= tol && (ratio - 4.0).abs() <= 4.0 * ratio_tol,
            format!("split-step error {coarse:.3e} at dt={dt} (tol {tol:e}), halving ratio {ratio:.4} (4 +- {}%)", ratio_tol * 100.0),
        );
    }
    Ok(())
}

fn spectrum(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let h = hamiltonian(v)?;
    let d = h.diagonalize()?;
    let mut csv = String::from("index,eigenvalue\n");
    for (j, l) in d.eigenvalues().iter().enumerate() {
        writeln!(csv, "{j},{l:e}").unwrap();
    }
    ctx.write("eigenvalues.csv", &csv)?;
    if let Some(n) = exp.refine_n_points {
        let fine_grid = velobound_core::GridSpec::new(v.grid.dim(), n, v.grid.half_width())?;
        let fine_h = HamiltonianHandle::new(fine_grid, v.symbol, &v.potential)?;
        let fine_d = fine_h.diagonalize()?;
        let lowest = d.eigenvalues()[0].min(fine_d.eigenvalues()[0]);
        let report = point_spectrum_report((&h, &d), (&fine_h, &fine_d), (lowest - 1.0, 0.0))?;
        let mut csv = String::from("index,coarse,fine,drift\n");
        for (j, ((c, f), dr)) in report.coarse.iter().zip(&report.fine).zip(&report.drift).enumerate() {
            writeln!(csv, "{j},{c:e},{f:e},{dr:e}").unwrap();
        }
        ctx.write("point_spectrum.csv", &csv)?;
        let tol = exp.tolerance.unwrap_or(0.05);
        ctx.assert(
            !report.count_mismatch && report.count() > 0 && report.max_drift() <= tol,
            format!(
                "{} negative eigenvalues on both grids (coarse {}), max relative drift {:.3e} (tol {tol:e})",
                report.count(),
                report.coarse.len(),
                report.max_drift()
            ),
        );
    } else if v.potential.is_zero() {
        let tol = exp.tolerance.unwrap_or(1e-10);
        let mut free: Vec<f64> = (0..v.grid.len()).map(|k| v.symbol.value(v.grid.momentum_sq(k))).collect();
        free.sort_by(f64::total_cmp);
        let err = free
            .iter()
            .zip(d.eigenvalues())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        ctx.assert(err <= tol, format!("free spectrum multiset error {err:.3e} (tol {tol:e})"));
    }
    Ok(())
}

fn conjugate_kind(name: Option<&str>) -> ConjugateKind {
    match name {
        Some("dilation") => ConjugateKind::Dilation,
        _ => ConjugateKind::ARho,
    }
}

fn mourre(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let (l1, l2) = (exp.lambda1.expect("validated"), exp.lambda2.expect("validated"));
    let g = match &v.g {
        Some(g) => g.clone(),
        None => {
            let w = l2 - l1;
            make_bump(l1 + 0.05 * w, l1 + 0.2 * w, l2 - 0.2 * w, l2 - 0.05 * w)?
        }
    };
    let h = hamiltonian(v)?;
    let d = h.diagonalize()?;
    let a = build_conjugate(&v.grid, v.symbol.rho(), conjugate_kind(exp.conjugate.as_deref()))?;
    let report = mourre_lower_bound(&h, &a, (l1, l2), &g, &d, &point_spectrum_candidates(&d))?;
    let mut buf = Vec::new();
    report.write_csv(&mut buf)?;
    ctx.write("mourre.csv", &String::from_utf8(buf).expect("ASCII"))?;
    ctx.out.notes.push(report.summary());
    let tol = exp.margin_tolerance.unwrap_or(0.05);
    ctx.assert(
        report.passes(tol),
        format!(
            "projected minimum {:.6} >= {:.6} - {tol} on sub-window ({:.4}, {:.4}), {} excluded",
            report.projected_minimum,
            report.localized_bound,
            report.sub_window.0,
            report.sub_window.1,
            report.excluded.len()
        ),
    );
    Ok(())
}

fn velocity(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let kind = v.kind();
    let t = exp.horizon.expect("validated");
    let f: SmoothCutoff = v.f.clone().expect("validated");
    let h = hamiltonian(v)?;
    let dynamics = match v.dynamics {
        DynamicsChoice::Free => Dynamics::Free,
        DynamicsChoice::Dense => Dynamics::Dense(Arc::new(h.diagonalize()?)),
        DynamicsChoice::SplitStep { dt } => Dynamics::SplitStep { dt, degree: exp.degree },
    };
    let experiment = VelocityExperiment::new(&h, f.clone(), dynamics, Schedule::doubling(t))?
        .with_label(potential_label(&v.potential));
    let state = &v.config.state;
    let widths = state
        .widths
        .clone()
        .or_else(|| state.width.map(|w| vec![w]))
        .unwrap_or_else(|| PROBE_WIDTHS.to_vec());
    let momenta = state
        .momenta
        .clone()
        .or_else(|| state.momentum.as_ref().and_then(|m| m.first().map(|k| vec![*k])))
        .unwrap_or_else(|| PROBE_MOMENTA.to_vec());
    let probes = velocity_probe_family(v.grid, &widths, &momenta)?;
    let (v_min, v_max) = group_speed_range(&v.symbol, f.support());
    let c_f = lattice_speed_bound(&h, &f);
    let reports: Vec<ExperimentReport> = probes
        .par_iter()
        .map(|phi| -> Result<ExperimentReport, CliError> {
            Ok(match kind {
                Kind::Minimal => minimal_bound_integral(&experiment, exp.theta0.unwrap_or(0.1 * v_min), phi)?,
                Kind::Middle => middle_bound_integral(
                    &experiment,
                    exp.theta1.unwrap_or(0.5 * v_min),
                    exp.theta2.unwrap_or(0.5 * v_max),
                    phi,
                )?,
                _ => {
                    let big = match exp.theta_big {
                        Some(b) => b,
                        None => c_f + 0.5 * experiment.filtered(phi)?.tail_radius(MAXIMAL_TAIL),
                    };
                    let mut r = maximal_bound_integral(&experiment, big, exp.theta.unwrap_or(f64::INFINITY), phi)?;
                    r.push_meta("theta_big", big);
                    r
                }
            })
        })
        .collect::<Result<_, _>>()?;
    for (i, (r, (w, k))) in reports
        .iter()
        .zip(widths.iter().flat_map(|w| momenta.iter().map(move |k| (w, k))))
        .enumerate()
    {
        let mut r = r.clone();
        r.push_meta("probe", format!("width={w};momentum={k}"));
        ctx.write_report(&format!("{}_{i:02}", kind.name()), &r)?;
        if let Some(reason) = &r.truncated {
            ctx.out.flags.push(format!("probe {i}: {reason}"));
        }
        if r.rows.iter().any(|row| !row.integrand.is_finite()) {
            ctx.out.flags.push(format!("probe {i}: non-finite integrand"));
        }
    }
    if !ctx.out.flags.is_empty() {
        return Ok(());
    }
    let max_mass = reports.iter().map(ExperimentReport::max_boundary_mass).fold(0.0f64, f64::max);
    match kind {
        Kind::Maximal => {
            if let Some(bound) = exp.absolute_bound {
                let worst = reports.iter().map(ExperimentReport::final_value).fold(0.0f64, f64::max);
                ctx.assert(
                    worst <= bound,
                    format!(
                        "max over {} probes of I({}) = {worst:.3e} <= {bound:e}, C_f = {c_f:.4}, boundary mass {max_mass:.1e}",
                        reports.len(),
                        2.0 * t
                    ),
                );
            }
        }
        _ => {
            if let Some(threshold) = exp.plateau_threshold {
                let worst = reports
                    .iter()
                    .map(|r| r.plateau_excess(t).unwrap_or(f64::INFINITY))
                    .fold(0.0f64, f64::max);
                ctx.assert(
                    worst <= threshold,
                    format!(
                        "{} plateau: max over {} probes of I(2T)/I(T) - 1 = {worst:.3e} <= {threshold} at T={t}, boundary mass {max_mass:.1e}",
                        kind.name(),
                        reports.len()
                    ),
                );
            }
        }
    }
    Ok(())
}

fn remainder(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let chi = v.f.clone().expect("validated");
    let times = exp.times.clone().expect("validated");
    let fit = commutator_remainder_decay(&v.grid, |s| chi.eval(s), v.symbol.rho(), &times)?;
    let mut csv = String::from("t,norm\n");
    for (t, n) in fit.times.iter().zip(&fit.norms) {
        writeln!(csv, "{t:e},{n:e}").unwrap();
    }
    match fit.slope {
        Some(s) => writeln!(csv, "# slope={s:e}").unwrap(),
        None => writeln!(csv, "# slope=none").unwrap(),
    }
    ctx.write("remainder.csv", &csv)?;
    if let Some(max) = exp.max_slope {
        let passed = fit.slope.is_some_and(|s| s <= max);
        let slope = fit.slope.map_or("undefined".to_string(), |s| format!("{s:.4}"));
        ctx.assert(passed, format!("log-log slope {slope} <= {max}"));
    }
    if exp.expect_floor {
        let worst = fit.norms.iter().fold(0.0f64, |a, b| a.max(*b));
        ctx.assert(fit.at_floor(), format!("remainder at numerical floor, max norm {worst:.3e}"));
    }
    Ok(())
}

fn relbound(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let sing = v.potential.sing.expect("validated");
    let h = HamiltonianHandle::free(v.grid, v.symbol);
    let mut deltas = exp.deltas.clone().expect("validated");
    deltas.sort_by(|a, b| b.total_cmp(a));
    let points = relative_bound_probe(&h, &sing, &deltas)?;
    let mut csv = String::from("delta,epsilon_eff,c_eff,epsilon_bound\n");
    for p in &points {
        writeln!(csv, "{:e},{:e},{:e},{:e}", p.delta, p.epsilon_eff, p.c_eff, p.epsilon_bound).unwrap();
    }
    ctx.write("relbound.csv", &csv)?;
    if exp.expect_monotone {
        let eps: Vec<f64> = points.iter().map(|p| p.epsilon_eff).collect();
        let nonincreasing = eps.windows(2).all(|w| w[1] <= w[0]);
        let octaves = (deltas[0] / deltas[deltas.len() - 1]).log2();
        let (first, last) = (eps[0], eps[eps.len() - 1]);
        if sing.kappa == 0.0 {
            let zero = points.iter().all(|p| p.epsilon_eff == 0.0 && p.c_eff == 0.0);
            ctx.assert(zero, format!("V_sing = 0 gives (epsilon, C) = ({first:e}, {:e})", points[0].c_eff));
        } else {
            ctx.assert(
                nonincreasing && last < first,
                format!("epsilon_eff nonincreasing over {octaves:.1} octaves of delta: {first:.4} -> {last:.4}"),
            );
        }
    }
    Ok(())
}

fn range_columns(verdict: &Verdict) -> (String, f64, f64) {
    match verdict {
        Verdict::Admissible(ExponentRange::Two) => ("admissible".into(), 2.0, 2.0),
        Verdict::Admissible(ExponentRange::Open { low, high }) => ("admissible".into(), *low, *high),
        Verdict::Rejected(_) => ("rejected".into(), f64::NAN, f64::NAN),
    }
}

fn admissibility(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let sing = v.potential.sing.expect("validated");
    let verdict = admissibility_check(&sing, v.symbol.rho(), v.grid.dim());
    let (label, low, high) = range_columns(&verdict);
    let mut csv = String::from("rho,dim,epsilon,verdict,low,high\n");
    writeln!(csv, "{},{},{},{label},{low:e},{high:e}", v.symbol.rho(), v.grid.dim(), sing.epsilon).unwrap();
    if let Verdict::Rejected(reason) = &verdict {
        writeln!(csv, "# reason={reason}").unwrap();
    }
    ctx.write("admissibility.csv", &csv)?;
    if let Some(expected) = exp.expected_verdict.as_deref() {
        let mut passed = expected == label;
        if let Some([lo, hi]) = exp.expected_range {
            passed &= lo == low && hi == high;
        }
        let range = match verdict {
            Verdict::Admissible(ExponentRange::Two) => " p = 2".to_string(),
            Verdict::Admissible(_) => format!(" p in ({low}, {high})"),
            Verdict::Rejected(_) => String::new(),
        };
        let wanted = match exp.expected_range {
            Some([lo, hi]) => format!(" [{lo}, {hi}]"),
            None => String::new(),
        };
        ctx.assert(
            passed,
            format!(
                "(rho={}, n={}, eps={}) -> {label}{range}, expected {expected}{wanted}",
                v.symbol.rho(),
                v.grid.dim(),
                sing.epsilon,
            ),
        );
    }
    Ok(())
}

fn dilation(ctx: &mut Ctx) -> Result<(), CliError> {
    let v = ctx.v;
    let exp = &v.config.experiment;
    let tol = exp.tolerance.unwrap_or(1e-6);
    if exp.conjugate.as_deref() == Some("a_rho") {
        let r = free_identity_check(v.grid, v.symbol.rho(), ConjugateKind::ARho)?;
        ctx.write(
            "free_identity.csv",
            &format!("max_relative,packets\n{:e},{}\n", r.max_relative, r.packets),
        )?;
        ctx.assert(
            r.max_relative <= tol,
            format!(
                "free A_rho commutator vs multiplier (rho={}): max relative error {:.3e} over {} packets (tol {tol:e})",
                v.symbol.rho(),
                r.max_relative,
                r.packets
            ),
        );
    } else {
        let h = hamiltonian(v)?;
        let r = dilation_commutator_check(&h, &v.potential)?;
        ctx.write(
            "dilation.csv",
            &format!("residual,scalar_margin,packets\n{:e},{:e},{}\n", r.residual, r.scalar_margin, r.packets),
        )?;
        ctx.assert(
            r.residual <= tol && r.scalar_inequality_holds(),
            format!(
                "dilation identity residual {:.3e} (tol {tol:e}), scalar margin {:.3e}",
                r.residual, r.scalar_margin
            ),
        );
    }
    Ok(())
}

/// CSV files written by a run.
pub fn csv_files(outcome: &RunOutcome) -> Vec<&Path> {
    outcome
        .files
        .iter()
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(PathBuf::as_path)
        .collect()
}
