//! Potential classes `V = V_sing + V_short + V_long` and their admissibility.
//!
//! The singular part `kappa |x|^(-1+eps) F(|x| <= R)` is regularized on the grid by
//! replacing `|x|` with `max(|x|, mollify_radius)`, with the grid spacing as default.

use crate::calculus::smooth_step;
use crate::error::{Error, Result};
use crate::grid::{japanese, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularPart {
    pub kappa: f64,
    /// Softening exponent in `[0, 1)`; zero is the pure Coulomb case.
    pub epsilon: f64,
    pub cutoff_radius: f64,
    pub gamma_sing: f64,
    /// `None` selects the grid spacing.
    pub mollify_radius: Option<f64>,
}

impl SingularPart {
    pub fn coulomb(kappa: f64) -> Self {
        Self {
            kappa,
            epsilon: 0.0,
            cutoff_radius: 1.0,
            gamma_sing: 2.0,
            mollify_radius: None,
        }
    }

    pub fn softened(kappa: f64, epsilon: f64) -> Self {
        Self {
            epsilon,
            ..Self::coulomb(kappa)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShortProfile {
    /// `<x>^(-gamma_short)`.
    PowerLaw,
    /// Smooth compactly supported bump equal to 1 at the origin and 0 beyond `radius`.
    CompactBump { radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortPart {
    pub amplitude: f64,
    pub gamma_short: f64,
    pub profile: ShortProfile,
}

/// `amplitude <x>^(-gamma_long)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LongPart {
    pub amplitude: f64,
    pub gamma_long: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PotentialSpec {
    pub sing: Option<SingularPart>,
    pub short: Option<ShortPart>,
    pub long: Option<LongPart>,
    /// Grid-sampled real field added verbatim.
    pub custom: Option<Vec<f64>>,
}

impl PotentialSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.sing.is_none() && self.short.is_none() && self.long.is_none() && self.custom.is_none()
    }

    pub fn with_short(mut self, part: ShortPart) -> Self {
        self.short = Some(part);
        self
    }

    pub fn with_long(mut self, part: LongPart) -> Self {
        self.long = Some(part);
        self
    }

    pub fn with_sing(mut self, part: SingularPart) -> Self {
        self.sing = Some(part);
        self
    }

    /// Checks the decay thresholds and parameter ranges of every present part.
    /// Growing potentials (non-positive decay exponents) are rejected.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidPotential(m));
        if let Some(s) = &self.sing {
            if !(s.gamma_sing > 1.0) {
                return bad(format!("gamma_sing must exceed 1, got {}", s.gamma_sing));
            }
            if !(0.0..1.0).contains(&s.epsilon) {
                return bad(format!("epsilon must lie in [0, 1), got {}", s.epsilon));
            }
            if !(s.cutoff_radius > 0.0) {
                return bad(format!("cutoff_radius must be positive, got {}", s.cutoff_radius));
            }
            if let Some(m) = s.mollify_radius {
                if !(m >= 0.0 && m.is_finite()) {
                    return bad(format!("mollify_radius must be nonnegative, got {m}"));
                }
            }
            if !s.kappa.is_finite() {
                return bad("kappa must be finite".into());
            }
        }
        if let Some(s) = &self.short {
            if !(s.gamma_short > 1.0) {
                return bad(format!("gamma_short must exceed 1, got {}", s.gamma_short));
            }
            if !s.amplitude.is_finite() {
                return bad("short-range amplitude must be finite".into());
            }
            if let ShortProfile::CompactBump { radius } = s.profile {
                if !(radius > 0.0) {
                    return bad(format!("bump radius must be positive, got {radius}"));
                }
            }
        }
        if let Some(l) = &self.long {
            if !(l.gamma_long > 0.0) {
                return bad(format!(
                    "gamma_long must be positive (growing potentials are not supported), got {}",
                    l.gamma_long
                ));
            }
            if !l.amplitude.is_finite() {
                return bad("long-range amplitude must be finite".into());
            }
        }
        if let Some(c) = &self.custom {
            if c.iter().any(|v| !v.is_finite()) {
                return bad("custom field has non-finite entries".into());
            }
        }
        Ok(())
    }

    pub fn sample_singular(&self, grid: &GridSpec) -> Result<Vec<f64>> {
        match &self.sing {
            None => Ok(vec![0.0; grid.len()]),
            Some(s) => sample_singular_part(s, grid),
        }
    }

    pub fn sample_short(&self, grid: &GridSpec) -> Vec<f64> {
        let Some(s) = &self.short else {
            return vec![0.0; grid.len()];
        };
        (0..grid.len())
            .map(|i| {
                let r = grid.radius(i);
                match s.profile {
                    ShortProfile::PowerLaw => s.amplitude * japanese(r).powf(-s.gamma_short),
                    ShortProfile::CompactBump { radius } => s.amplitude * smooth_step(1.0 - r / radius),
                }
            })
            .collect()
    }

    pub fn sample_long(&self, grid: &GridSpec) -> Vec<f64> {
        let Some(l) = &self.long else {
            return vec![0.0; grid.len()];
        };
        (0..grid.len())
            .map(|i| l.amplitude * japanese(grid.radius(i)).powf(-l.gamma_long))
            .collect()
    }

    /// `x . grad V_long = -a gamma |x|^2 <x>^(-gamma-2)`, evaluated analytically.
    pub fn long_range_virial(&self, grid: &GridSpec) -> Vec<f64> {
        let Some(l) = &self.long else {
            return vec![0.0; grid.len()];
        };
        (0..grid.len())
            .map(|i| {
                let r = grid.radius(i);
                -l.amplitude * l.gamma_long * r * r * japanese(r).powf(-l.gamma_long - 2.0)
            })
            .collect()
    }
}

fn sample_singular_part(s: &SingularPart, grid: &GridSpec) -> Result<Vec<f64>> {
    let h = grid.spacing();
    let mollify = s.mollify_radius.unwrap_or(h);
    if mollify == 0.0 && (0..grid.len()).any(|i| grid.radius(i) == 0.0) {
        return Err(Error::UnmollifiedSingularity);
    }
    let exponent = -1.0 + s.epsilon;
    Ok((0..grid.len())
        .map(|i| {
            let r = grid.radius(i);
            if r <= s.cutoff_radius {
                s.kappa * r.max(mollify).powf(exponent)
            } else {
                0.0
            }
        })
        .collect())
}

/// Pointwise sum of all present parts.
pub fn sample_potential(spec: &PotentialSpec, grid: &GridSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut field = spec.sample_singular(grid)?;
    for (v, s) in field.iter_mut().zip(spec.sample_short(grid)) {
        *v += s;
    }
    for (v, l) in field.iter_mut().zip(spec.sample_long(grid)) {
        *v += l;
    }
    if let Some(c) = &spec.custom {
        if c.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        for (v, c) in field.iter_mut().zip(c) {
            *v += c;
        }
    }
    Ok(field)
}

/// Admissible integrability exponents for the singular part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExponentRange {
    /// Exactly `p = 2`.
    Two,
    /// Open interval `(low, high)`; `high` may be infinite.
    Open { low: f64, high: f64 },
}

impl ExponentRange {
    pub fn contains(&self, p: f64) -> bool {
        match *self {
            ExponentRange::Two => p == 2.0,
            ExponentRange::Open { low, high } => p > low && p < high,
        }
    }

    /// A representative exponent inside the range.
    pub fn representative(&self) -> f64 {
        match *self {
            ExponentRange::Two => 2.0,
            ExponentRange::Open { low, high } if high.is_finite() => 0.5 * (low + high),
            ExponentRange::Open { low, .. } => low + 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Verdict {
    Admissible(ExponentRange),
    Rejected(String),
}

impl Verdict {
    pub fn is_admissible(&self) -> bool {
        matches!(self, Verdict::Admissible(_))
    }
}

/// Decides whether `kappa |x|^(-1+eps) F(|x|<=R)` is an admissible singular part.
///
/// Pure Coulomb (`eps = 0`): `p = 2` for `3/4 < rho <= 1, n = 3`; `p in (n/(2 rho), n)` for
/// `1/2 < rho <= 3/4, n >= 3`; rejected for `rho <= 1/2`. Softened (`eps > 0`): admissible
/// for every `n` when `1 - 2 rho < eps < 1` with `p in (n/(2 rho), n/(1-eps))`. Remaining
/// cases fall back to the general rule: `p = 2` if `n < 4 rho`, otherwise `p > n/(2 rho)`,
/// intersected with local integrability `(1-eps) p < n`.
pub fn admissibility_check(sing: &SingularPart, rho: f64, dim: usize) -> Verdict {
    if !(rho > 0.0 && rho <= 1.0) {
        return Verdict::Rejected(format!("rho = {rho} outside (0, 1]"));
    }
    if !(1..=3).contains(&dim) {
        return Verdict::Rejected(format!("dimension {dim} unsupported"));
    }
    let eps = sing.epsilon;
    if !(0.0..1.0).contains(&eps) {
        return Verdict::Rejected(format!("epsilon = {eps} outside [0, 1)"));
    }
    let n = dim as f64;
    if eps == 0.0 {
        if rho <= 0.5 {
            return Verdict::Rejected("Coulomb singularity is not admitted for rho <= 1/2".into());
        }
        if rho > 0.75 && dim == 3 {
            return Verdict::Admissible(ExponentRange::Two);
        }
        if rho <= 0.75 && dim >= 3 {
            return Verdict::Admissible(ExponentRange::Open {
                low: n / (2.0 * rho),
                high: n,
            });
        }
    } else if eps > 1.0 - 2.0 * rho {
        return Verdict::Admissible(ExponentRange::Open {
            low: n / (2.0 * rho),
            high: n / (1.0 - eps),
        });
    }
    general_rule(eps, rho, n)
}

fn general_rule(eps: f64, rho: f64, n: f64) -> Verdict {
    let alpha = 1.0 - eps;
    if n < 4.0 * rho {
        // For rho <= 1/4 this branch is unreachable: no dimension satisfies n < 4 rho <= 1.
        if 2.0 * alpha < n {
            Verdict::Admissible(ExponentRange::Two)
        } else {
            Verdict::Rejected(format!(
                "|x|^(-{alpha}) is not square integrable near the origin in dimension {n}"
            ))
        }
    } else {
        let low = n / (2.0 * rho);
        let high = if alpha > 0.0 { n / alpha } else { f64::INFINITY };
        if low < high {
            Verdict::Admissible(ExponentRange::Open { low, high })
        } else {
            Verdict::Rejected(format!(
                "no exponent p with {low} < p < {high} (requires epsilon > 1 - 2 rho)"
            ))
        }
    }
}

/// `(sum |<x>^gamma field|^p h^n)^(1/p)`.
pub fn weighted_lp_norm(field: &[f64], gamma: f64, p: f64, grid: &GridSpec) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::InvalidArgument(format!("p must be >= 1, got {p}")));
    }
    if field.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let sum: f64 = field
        .iter()
        .enumerate()
        .map(|(i, v)| (japanese(grid.radius(i)).powf(gamma) * v.abs()).powf(p))
        .sum();
    Ok((sum * grid.cell_volume()).powf(1.0 / p))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(n: usize, l: f64) -> GridSpec {
        GridSpec::new(1, n, l).unwrap()
    }

    #[test]
    fn absent_parts_give_zero() {
        let g = grid1(64, 4.0);
        let v = sample_potential(&PotentialSpec::zero(), &g).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn long_range_value_at_origin() {
        let g = grid1(64, 4.0);
        let spec = PotentialSpec::zero().with_long(LongPart {
            amplitude: 0.7,
            gamma_long: 0.5,
        });
        let v = sample_potential(&spec, &g).unwrap();
        assert_eq!(v[32], 0.7);
    }

    #[test]
    fn coulomb_value_near_half() {
        let g = grid1(256, 4.0);
        let spec = PotentialSpec::zero().with_sing(SingularPart::coulomb(-1.0));
        let v = sample_potential(&spec, &g).unwrap();
        let (i, x) = (0..g.len())
            .map(|i| (i, g.coordinate_1d(i)))
            .min_by(|a, b| (a.1 - 0.5).abs().total_cmp(&(b.1 - 0.5).abs()))
            .unwrap();
        let h = g.spacing();
        assert!((v[i] + 1.0 / x.abs()).abs() < 1e-14);
        // Within one interpolation step of -1/0.5.
        assert!((v[i] + 2.0).abs() <= (1.0 / (0.5 - h) - 2.0));
        // Mollified at the origin.
        assert!((v[128] + 1.0 / h).abs() < 1e-12);
    }

    #[test]
    fn unmollified_singularity_rejected() {
        let g = grid1(64, 4.0);
        let mut part = SingularPart::coulomb(-1.0);
        part.mollify_radius = Some(0.0);
        let spec = PotentialSpec::zero().with_sing(part);
        assert_eq!(sample_potential(&spec, &g), Err(Error::UnmollifiedSingularity));
    }

    #[test]
    fn thresholds_enforced() {
        let mut part = SingularPart::coulomb(1.0);
        part.gamma_sing = 1.0;
        assert!(PotentialSpec::zero().with_sing(part).validate().is_err());
        let growth = PotentialSpec::zero().with_long(LongPart {
            amplitude: 1.0,
            gamma_long: -2.0,
        });
        assert!(growth.validate().is_err());
        let short = PotentialSpec::zero().with_short(ShortPart {
            amplitude: 1.0,
            gamma_short: 0.5,
            profile: ShortProfile::PowerLaw,
        });
        assert!(short.validate().is_err());
    }

    #[test]
    fn compact_bump_profile() {
        let g = grid1(128, 8.0);
        let spec = PotentialSpec::zero().with_short(ShortPart {
            amplitude: -2.0,
            gamma_short: 2.0,
            profile: ShortProfile::CompactBump { radius: 3.0 },
        });
        let v = sample_potential(&spec, &g).unwrap();
        assert_eq!(v[64], -2.0);
        for i in 0..g.len() {
            if g.radius(i) >= 3.0 {
                assert_eq!(v[i], 0.0);
            }
        }
    }

    #[test]
    fn remark_examples() {
        let coulomb = SingularPart::coulomb(1.0);
        assert_eq!(admissibility_check(&coulomb, 0.8, 3), Verdict::Admissible(ExponentRange::Two));
        assert_eq!(
            admissibility_check(&coulomb, 0.6, 3),
            Verdict::Admissible(ExponentRange::Open { low: 2.5, high: 3.0 })
        );
        let soft = SingularPart::softened(1.0, 0.5);
        match admissibility_check(&soft, 0.3, 1) {
            Verdict::Admissible(ExponentRange::Open { low, high }) => {
                assert!((low - 1.0 / 0.6).abs() < 1e-15);
                assert_eq!(high, 2.0);
            }
            v => panic!("unexpected verdict {v:?}"),
        }
        assert!(!admissibility_check(&coulomb, 0.5, 3).is_admissible());
        assert!(!admissibility_check(&coulomb, 0.9, 1).is_admissible());
        assert!(!admissibility_check(&SingularPart::softened(1.0, 0.3), 0.3, 1).is_admissible());
    }

    #[test]
    fn weighted_norm_basics() {
        let g = grid1(64, 4.0);
        assert_eq!(weighted_lp_norm(&vec![0.0; 64], 1.0, 2.0, &g).unwrap(), 0.0);
        let c = -1.7;
        let n = weighted_lp_norm(&vec![c; 64], 0.0, 2.0, &g).unwrap();
        assert!((n - c.abs() * 8f64.sqrt()).abs() < 1e-12);
        assert!(weighted_lp_norm(&vec![0.0; 64], 0.0, 0.5, &g).is_err());
    }
}
