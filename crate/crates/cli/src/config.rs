use std::path::{Path, PathBuf};

use serde::Deserialize;
use velobound_core::calculus::SmoothCutoff;
use velobound_core::linalg::check_dense_cap;
use velobound_core::observables::group_speed_range;
use velobound_core::potentials::{LongPart, ShortPart, ShortProfile};
use velobound_core::{FractionalSymbol, GridSpec, PotentialSpec, SingularPart};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Evolve,
    Spectrum,
    Mourre,
    Minimal,
    Maximal,
    Middle,
    Remainder,
    Relbound,
    Admissibility,
    Dilation,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::Evolve => "evolve",
            Kind::Spectrum => "spectrum",
            Kind::Mourre => "mourre",
            Kind::Minimal => "minimal",
            Kind::Maximal => "maximal",
            Kind::Middle => "middle",
            Kind::Remainder => "remainder",
            Kind::Relbound => "relbound",
            Kind::Admissibility => "admissibility",
            Kind::Dilation => "dilation",
        }
    }

    pub fn is_velocity(self) -> bool {
        matches!(self, Kind::Minimal | Kind::Maximal | Kind::Middle)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub n_points: usize,
    pub half_width: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolSection {
    pub rho: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSection {
    pub sing_kappa: Option<f64>,
    #[serde(default)]
    pub sing_epsilon: f64,
    #[serde(default = "one_f")]
    pub sing_cutoff_radius: f64,
    #[serde(default = "two_f")]
    pub sing_gamma: f64,
    pub sing_mollify: Option<f64>,
    pub short_amplitude: Option<f64>,
    #[serde(default = "two_f")]
    pub short_gamma: f64,
    /// `power_law` or `compact_bump`.
    pub short_profile: Option<String>,
    pub short_radius: Option<f64>,
    pub long_amplitude: Option<f64>,
    #[serde(default = "half_f")]
    pub long_gamma: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub center: Option<Vec<f64>>,
    pub momentum: Option<Vec<f64>>,
    pub width: Option<f64>,
    pub eigen_index: Option<usize>,
    /// Velocity probe family; defaults to the built-in family.
    pub widths: Option<Vec<f64>>,
    pub momenta: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffSection {
    pub f: Option<[f64; 4]>,
    pub g: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: Kind,
    /// Acceptance criterion id used to tag PASS/FAIL lines.
    pub criterion: Option<u32>,
    /// Horizon `T`: final time for `evolve`, plateau checkpoint for velocity kinds.
    pub horizon: Option<f64>,
    pub dt: Option<f64>,
    /// `free`, `dense` or `split_step`.
    pub dynamics: Option<String>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    pub times: Option<Vec<f64>>,
    pub theta0: Option<f64>,
    pub theta_big: Option<f64>,
    pub theta: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
    pub plateau_threshold: Option<f64>,
    pub absolute_bound: Option<f64>,
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    /// `a_rho` or `dilation`.
    pub conjugate: Option<String>,
    pub margin_tolerance: Option<f64>,
    pub tolerance: Option<f64>,
    pub expected_velocity: Option<f64>,
    #[serde(default)]
    pub convergence: bool,
    pub ratio_tolerance: Option<f64>,
    pub refine_n_points: Option<usize>,
    pub max_slope: Option<f64>,
    #[serde(default)]
    pub expect_floor: bool,
    pub deltas: Option<Vec<f64>>,
    #[serde(default)]
    pub expect_monotone: bool,
    /// `admissible` or `rejected`.
    pub expected_verdict: Option<String>,
    /// `[low, high]`; `[2, 2]` denotes the single exponent 2.
    pub expected_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<String>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: default_dir(),
            formats: default_formats(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub grid: GridSection,
    pub symbol: SymbolSection,
    #[serde(default)]
    pub potential: PotentialSection,
    #[serde(default)]
    pub state: StateSection,
    #[serde(default)]
    pub cutoff: CutoffSection,
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two_f() -> f64 {
    2.0
}
fn half_f() -> f64 {
    0.5
}
fn default_degree() -> usize {
    2000
}
fn default_dir() -> String {
    "out".into()
}
fn default_formats() -> Vec<String> {
    vec!["csv".into()]
}

/// Dynamics selector of a config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DynamicsChoice {
    Free,
    Dense,
    SplitStep { dt: f64 },
}

/// A config that passed validation, with its derived core objects.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ExperimentConfig,
    pub grid: GridSpec,
    pub symbol: FractionalSymbol,
    pub potential: PotentialSpec,
    pub f: Option<SmoothCutoff>,
    pub g: Option<SmoothCutoff>,
    pub dynamics: DynamicsChoice,
    pub output_dir: PathBuf,
}

impl Validated {
    pub fn kind(&self) -> Kind {
        self.config.experiment.kind
    }

    pub fn wants_svg(&self) -> bool {
        self.config.output.formats.iter().any(|f| f == "svg")
    }
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    toml::from_str(text).map_err(|e| CliError::Parse(e.to_string()))
}

pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn cutoff(name: &str, q: Option<[f64; 4]>) -> Result<Option<SmoothCutoff>, CliError> {
    q.map(|[a, b, c, d]| SmoothCutoff::new(a, b, c, d).map_err(|e| invalid(format!("cutoff.{name}: {e}"))))
        .transpose()
}

fn potential_spec(p: &PotentialSection) -> Result<PotentialSpec, CliError> {
    let mut spec = PotentialSpec::zero();
    if let Some(kappa) = p.sing_kappa {
        spec = spec.with_sing(SingularPart {
            kappa,
            epsilon: p.sing_epsilon,
            cutoff_radius: p.sing_cutoff_radius,
            gamma_sing: p.sing_gamma,
            mollify_radius: p.sing_mollify,
        });
    }
    if let Some(amplitude) = p.short_amplitude {
        let profile = match p.short_profile.as_deref().unwrap_or("power_law") {
            "power_law" => ShortProfile::PowerLaw,
            "compact_bump" => ShortProfile::CompactBump {
                radius: p
                    .short_radius
                    .ok_or_else(|| invalid("potential.short_radius is required for compact_bump"))?,
            },
            other => return Err(invalid(format!("potential.short_profile: unknown profile '{other}'"))),
        };
        spec = spec.with_short(ShortPart {
            amplitude,
            gamma_short: p.short_gamma,
            profile,
        });
    }
    if let Some(amplitude) = p.long_amplitude {
        spec = spec.with_long(LongPart {
            amplitude,
            gamma_long: p.long_gamma,
        });
    }
    spec.validate().map_err(|e| invalid(format!("potential: {e}")))?;
    Ok(spec)
}

/// Checks every cross-module precondition before any computation.
pub fn validate(config: ExperimentConfig, base: &Path) -> Result<Validated, CliError> {
    let grid = GridSpec::new(config.grid.dim, config.grid.n_points, config.grid.half_width)
        .map_err(|e| invalid(format!("grid: {e}")))?;
    let symbol = FractionalSymbol::new(config.symbol.rho).map_err(|e| invalid(format!("symbol: {e}")))?;
    let potential = potential_spec(&config.potential)?;
    let f = cutoff("f", config.cutoff.f)?;
    let g = cutoff("g", config.cutoff.g)?;
    for fmt in &config.output.formats {
        if fmt != "csv" && fmt != "svg" {
            return Err(invalid(format!("output.formats: unknown format '{fmt}'")));
        }
    }
    let exp = &config.experiment;
    let kind = exp.kind;
    let dynamics = match exp.dynamics.as_deref() {
        None if potential.is_zero() && kind != Kind::Spectrum => DynamicsChoice::Free,
        None => DynamicsChoice::Dense,
        Some("free") => {
            if !potential.is_zero() {
                return Err(invalid("experiment.dynamics: free dynamics requires V = 0"));
            }
            DynamicsChoice::Free
        }
        Some("dense") => DynamicsChoice::Dense,
        Some("split_step") => {
            let dt = exp.dt.ok_or_else(|| invalid("experiment.dt is required for split_step dynamics"))?;
            if !(dt > 0.0) {
                return Err(invalid(format!("experiment.dt must be positive, got {dt}")));
            }
            DynamicsChoice::SplitStep { dt }
        }
        Some(other) => return Err(invalid(format!("experiment.dynamics: unknown dynamics '{other}'"))),
    };
    let needs_dense = matches!(
        kind,
        Kind::Spectrum | Kind::Mourre | Kind::Remainder | Kind::Relbound | Kind::Dilation
    ) || dynamics == DynamicsChoice::Dense
        || exp.convergence;
    if needs_dense && kind != Kind::Admissibility {
        check_dense_cap(&grid).map_err(|e| invalid(format!("dense cap: {e}")))?;
        if let Some(n) = exp.refine_n_points {
            let fine = GridSpec::new(grid.dim(), n, grid.half_width()).map_err(|e| invalid(format!("refine_n_points: {e}")))?;
            check_dense_cap(&fine).map_err(|e| invalid(format!("dense cap (refined grid): {e}")))?;
        }
    }
    let positive = |name: &str, v: Option<f64>| -> Result<f64, CliError> {
        match v {
            Some(x) if x > 0.0 && x.is_finite() => Ok(x),
            Some(x) => Err(invalid(format!("experiment.{name} must be positive, got {x}"))),
            None => Err(invalid(format!("experiment.{name} is required for kind '{}'", kind.name()))),
        }
    };
    match kind {
        Kind::Evolve => {
            positive("horizon", exp.horizon)?;
            if exp.convergence && !matches!(dynamics, DynamicsChoice::SplitStep { .. }) {
                return Err(invalid("experiment.convergence requires split_step dynamics"));
            }
        }
        Kind::Minimal | Kind::Maximal | Kind::Middle => {
            let t = positive("horizon", exp.horizon)?;
            let f = f.as_ref().ok_or_else(|| invalid("cutoff.f is required for velocity-bound kinds"))?;
            let (_, v_max) = group_speed_range(&symbol, f.support());
            let need = 2.0 * v_max * t;
            if grid.half_width() < need {
                return Err(invalid(format!(
                    "horizon/domain compatibility: half_width {} < 2 * v_max * T = {need}",
                    grid.half_width()
                )));
            }
            if let DynamicsChoice::SplitStep { .. } = dynamics {
                if exp.degree == 0 {
                    return Err(invalid("experiment.degree must be positive"));
                }
            }
        }
        Kind::Mourre => {
            let l1 = positive("lambda1", exp.lambda1)?;
            let l2 = positive("lambda2", exp.lambda2)?;
            if l1 >= l2 {
                return Err(invalid(format!("experiment.lambda1 < lambda2 required, got ({l1}, {l2})")));
            }
            if let Some(g) = &g {
                let (a, b) = g.support();
                if a < l1 || b > l2 {
                    return Err(invalid(format!("cutoff.g support ({a}, {b}) must lie inside ({l1}, {l2})")));
                }
            }
        }
        Kind::Remainder => {
            if f.is_none() {
                return Err(invalid("cutoff.f is required for kind 'remainder'"));
            }
            let times = exp.times.as_ref().ok_or_else(|| invalid("experiment.times is required for kind 'remainder'"))?;
            if times.len() < 2 || times.iter().any(|t| !(*t > 0.0)) {
                return Err(invalid("experiment.times needs at least two positive times"));
            }
        }
        Kind::Relbound => {
            if potential.sing.is_none() {
                return Err(invalid("potential.sing_kappa is required for kind 'relbound'"));
            }
            let deltas = exp.deltas.as_ref().ok_or_else(|| invalid("experiment.deltas is required for kind 'relbound'"))?;
            if deltas.is_empty() || deltas.iter().any(|d| !(*d > 0.0)) {
                return Err(invalid("experiment.deltas must be positive"));
            }
        }
        Kind::Admissibility => {
            if potential.sing.is_none() {
                return Err(invalid("potential.sing_kappa is required for kind 'admissibility'"));
            }
            if let Some(v) = exp.expected_verdict.as_deref() {
                if v != "admissible" && v != "rejected" {
                    return Err(invalid(format!("experiment.expected_verdict: unknown verdict '{v}'")));
                }
            }
        }
        Kind::Dilation => match exp.conjugate.as_deref().unwrap_or("dilation") {
            "dilation" => {
                if potential.sing.is_some() || potential.short.is_some() {
                    return Err(invalid("dilation identity requires a purely long-range potential"));
                }
            }
            "a_rho" => {
                if !potential.is_zero() {
                    return Err(invalid("the A_rho identity check requires V = 0"));
                }
            }
            other => return Err(invalid(format!("experiment.conjugate: unknown operator '{other}'"))),
        },
        Kind::Spectrum => {}
    }
    let dir = PathBuf::from(&config.output.directory);
    let output_dir = if dir.is_absolute() { dir } else { base.join(dir) };
    Ok(Validated {
        config,
        grid,
        symbol,
        potential,
        f,
        g,
        dynamics,
        output_dir,
    })
}
