//! Smooth cutoffs and functions of `H`: dense spectral evaluation and Chebyshev expansion.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianHandle, SpectralDecomposition};
use crate::multiplier::Multiplier;
use crate::operator::StateOperator;
use crate::wave::WaveFunction;

fn w(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp()
    } else {
        0.0
    }
}

fn w_prime(u: f64) -> f64 {
    if u > 0.0 {
        (-1.0 / u).exp() / (u * u)
    } else {
        0.0
    }
}

/// `S(u) = w(u) / (w(u) + w(1-u))` with `w(u) = exp(-1/u)` for `u > 0`.
pub fn smooth_step(u: f64) -> f64 {
    if u <= 0.0 {
        0.0
    } else if u >= 1.0 {
        1.0
    } else {
        let a = w(u);
        a / (a + w(1.0 - u))
    }
}

pub fn smooth_step_derivative(u: f64) -> f64 {
    if u <= 0.0 || u >= 1.0 {
        return 0.0;
    }
    let (a, b) = (w(u), w(1.0 - u));
    let denom = a + b;
    (w_prime(u) * b + a * w_prime(1.0 - u)) / (denom * denom)
}

/// Bump equal to 1 on `[a', b']`, 0 outside `(a, b)`, with `S`-profile transitions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothCutoff {
    a: f64,
    a_in: f64,
    b_in: f64,
    b: f64,
}

impl SmoothCutoff {
    pub fn new(a: f64, a_in: f64, b_in: f64, b: f64) -> Result<Self> {
        let finite = [a, a_in, b_in, b].iter().all(|v| v.is_finite());
        if !(finite && a < a_in && a_in <= b_in && b_in < b) {
            return Err(Error::InvalidCutoff(format!(
                "need a < a' <= b' < b, got ({a}, {a_in}, {b_in}, {b})"
            )));
        }
        Ok(Self { a, a_in, b_in, b })
    }

    /// `(a, a', b', b)`.
    pub fn params(&self) -> (f64, f64, f64, f64) {
        (self.a, self.a_in, self.b_in, self.b)
    }

    pub fn support(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn plateau(&self) -> (f64, f64) {
        (self.a_in, self.b_in)
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b {
            return 0.0;
        }
        if x >= self.a_in && x <= self.b_in {
            return 1.0;
        }
        smooth_step((x - self.a) / (self.a_in - self.a)) * smooth_step((self.b - x) / (self.b - self.b_in))
    }

    pub fn derivative(&self, x: f64) -> f64 {
        if x <= self.a || x >= self.b || (x >= self.a_in && x <= self.b_in) {
            return 0.0;
        }
        let (da, db) = (self.a_in - self.a, self.b - self.b_in);
        let (ua, ub) = ((x - self.a) / da, (self.b - x) / db);
        smooth_step_derivative(ua) / da * smooth_step(ub) - smooth_step(ua) * smooth_step_derivative(ub) / db
    }
}

/// `make_bump(a, a', b', b)`.
pub fn make_bump(a: f64, a_in: f64, b_in: f64, b: f64) -> Result<SmoothCutoff> {
    SmoothCutoff::new(a, a_in, b_in, b)
}

/// `f(H) = U f(Lambda) U^dagger` from a dense decomposition.
#[derive(Debug, Clone)]
pub struct DenseFunction {
    decomp: Arc<SpectralDecomposition>,
    weights: Vec<f64>,
}

impl DenseFunction {
    pub fn new(decomp: Arc<SpectralDecomposition>, f: impl Fn(f64) -> f64) -> Self {
        let weights = decomp.eigenvalues().iter().map(|&l| f(l)).collect();
        Self { decomp, weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn decomposition(&self) -> &SpectralDecomposition {
        &self.decomp
    }

    pub fn matrix(&self) -> crate::linalg::CMatrix {
        self.decomp.function_matrix(&self.weights)
    }
}

impl StateOperator for DenseFunction {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        self.decomp.apply_function_weights(&self.weights, psi)
    }
}

pub fn f_of_h_dense(decomp: Arc<SpectralDecomposition>, f: &SmoothCutoff) -> DenseFunction {
    DenseFunction::new(decomp, |x| f.eval(x))
}

/// `f(H)` for `V = 0`, exactly as the multiplier `f(Psi(|xi|^2))`.
pub fn f_of_free(h: &HamiltonianHandle, f: impl Fn(f64) -> f64) -> Result<Multiplier> {
    if !h.is_free() {
        return Err(Error::Precondition("free functional calculus requires V = 0".into()));
    }
    let table = h.kinetic().table().iter().map(|k| Complex64::new(f(k.re), 0.0)).collect();
    Multiplier::from_table(*h.grid(), table)
}

/// Coefficient tail below which the Chebyshev series is truncated.
pub const CHEBYSHEV_TAIL_TOL: f64 = 1e-10;

/// Largest admissible Chebyshev degree.
pub const CHEBYSHEV_MAX_DEGREE: usize = 10_000;

/// Chebyshev coefficients of `f` on `[lo, hi]`, computed from `nodes` Chebyshev points.
pub fn chebyshev_coefficients(f: impl Fn(f64) -> f64, lo: f64, hi: f64, nodes: usize) -> Vec<f64> {
    let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
    let k = nodes;
    // cos(pi m / (2K)) for m in [0, 4K).
    let table: Vec<f64> = (0..4 * k).map(|m| (PI * m as f64 / (2 * k) as f64).cos()).collect();
    let samples: Vec<f64> = (0..k).map(|i| f(mid + half * table[2 * i + 1])).collect();
    let scale = 2.0 / k as f64;
    (0..k)
        .map(|j| {
            let mut acc = 0.0;
            for (i, s) in samples.iter().enumerate() {
                acc += s * table[(j * (2 * i + 1)) % (4 * k)];
            }
            let c = scale * acc;
            if j == 0 {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Truncated Chebyshev expansion of `f(H)` applied through the three-term recurrence.
#[derive(Debug, Clone)]
pub struct ChebyshevFunction {
    h: HamiltonianHandle,
    bounds: (f64, f64),
    coeffs: Vec<f64>,
}

impl ChebyshevFunction {
    /// Expands `f` on `bounds` up to `max_degree`, truncating once the coefficient tail drops
    /// below [`CHEBYSHEV_TAIL_TOL`].
    pub fn new(
        h: &HamiltonianHandle,
        f: impl Fn(f64) -> f64,
        max_degree: usize,
        bounds: (f64, f64),
    ) -> Result<Self> {
        let (lo, hi) = bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("invalid spectral bounds ({lo}, {hi})")));
        }
        if max_degree > CHEBYSHEV_MAX_DEGREE {
            return Err(Error::InvalidArgument(format!(
                "degree {max_degree} exceeds {CHEBYSHEV_MAX_DEGREE}"
            )));
        }
        let pad = (max_degree / 8).max(16);
        let all = chebyshev_coefficients(f, lo, hi, max_degree + 1 + pad);
        // tails[j] = sum_{i >= j} |c_i|
        let mut tails = vec![0.0; all.len() + 1];
        for j in (0..all.len()).rev() {
            tails[j] = tails[j + 1] + all[j].abs();
        }
        match (0..=max_degree).find(|&d| tails[d + 1] < CHEBYSHEV_TAIL_TOL) {
            Some(d) => Ok(Self {
                h: h.clone(),
                bounds,
                coeffs: all[..=d].to_vec(),
            }),
            None => Err(Error::DegreeCap {
                degree: max_degree,
                tail: tails[max_degree + 1],
            }),
        }
    }

    pub fn from_cutoff(h: &HamiltonianHandle, f: &SmoothCutoff, max_degree: usize, bounds: (f64, f64)) -> Result<Self> {
        Self::new(h, |x| f.eval(x), max_degree, bounds)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn bounds(&self) -> (f64, f64) {
        self.bounds
    }

    /// Evaluates the truncated series at a scalar point of `bounds`.
    pub fn eval_scalar(&self, x: f64) -> f64 {
        let (lo, hi) = self.bounds;
        let y = (2.0 * x - hi - lo) / (hi - lo);
        // Clenshaw.
        let (mut b1, mut b2) = (0.0, 0.0);
        for c in self.coeffs.iter().skip(1).rev() {
            let b0 = c + 2.0 * y * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        self.coeffs[0] + y * b1 - b2
    }

    fn scaled_apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        let (lo, hi) = self.bounds;
        let (mid, half) = (0.5 * (hi + lo), 0.5 * (hi - lo));
        let hpsi = self.h.apply(psi)?;
        hpsi.axpy(Complex64::new(-mid, 0.0), psi).map(|v| v.scale(Complex64::new(1.0 / half, 0.0)))
    }
}

impl StateOperator for ChebyshevFunction {
    fn apply(&self, psi: &WaveFunction) -> Result<WaveFunction> {
        let limit = 10.0 * psi.norm();
        let mut prev = psi.clone();
        let mut out = psi.scale(Complex64::new(self.coeffs[0], 0.0));
        if self.coeffs.len() == 1 {
            return Ok(out);
        }
        let mut cur = self.scaled_apply(psi)?;
        out = out.axpy(Complex64::new(self.coeffs[1], 0.0), &cur)?;
        for c in &self.coeffs[2..] {
            let next = self
                .scaled_apply(&cur)?
                .scale(Complex64::new(2.0, 0.0))
                .axpy(Complex64::new(-1.0, 0.0), &prev)?;
            let norm = next.norm();
            if !norm.is_finite() {
                return Err(Error::NonFinite("Chebyshev recurrence".into()));
            }
            if norm > limit {
                return Err(Error::BoundsViolation(norm / psi.norm()));
            }
            out = out.axpy(Complex64::new(*c, 0.0), &next)?;
            prev = cur;
            cur = next;
        }
        Ok(out)
    }
}

fn power_iteration(op: impl Fn(&WaveFunction) -> Result<WaveFunction>, start: WaveFunction, iters: usize) -> Result<f64> {
    let mut v = start.normalized()?;
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = op(&v)?;
        estimate = v.inner(&w)?.re;
        let n = w.norm();
        if n == 0.0 {
            return Ok(0.0);
        }
        v = w.scale(Complex64::new(1.0 / n, 0.0));
    }
    Ok(estimate)
}

/// Number of power iterations per spectral end.
pub const POWER_ITERATIONS: usize = 30;

/// Spectral enclosure for the Chebyshev path: power-iteration estimates of both ends widened by
/// 5% of the span, then clamped to the a priori enclosure `[min V, max Psi + max V]`.
pub fn spectral_bounds(h: &HamiltonianHandle) -> Result<(f64, f64)> {
    let (vmin, vmax) = h.potential_range();
    let ktop = h.kinetic_band_top();
    let c = ktop + vmin.abs().max(vmax.abs());
    let start = WaveFunction::random(*h.grid(), 0xb0b5);
    let top = power_iteration(
        |v| h.apply(v)?.axpy(Complex64::new(-vmin, 0.0), v),
        start.clone(),
        POWER_ITERATIONS,
    )? + vmin;
    let bottom = c - power_iteration(
        |v| v.scale(Complex64::new(c, 0.0)).axpy(Complex64::new(-1.0, 0.0), &h.apply(v)?),
        start,
        POWER_ITERATIONS,
    )?;
    let margin = 0.05 * (top - bottom).abs().max(1e-12);
    let lo = (bottom - margin).max(vmin);
    let hi = (top + margin).min(ktop + vmax);
    Ok((lo, hi))
}

/// Fails unless every eigenvalue lies outside `supp f` or has `f(lambda) <= 1e-12`.
pub fn check_spectrum_avoidance(eigenvalues: &[f64], f: &SmoothCutoff) -> Result<()> {
    let (a, b) = f.support();
    for &lambda in eigenvalues {
        if lambda > a && lambda < b && f.eval(lambda) > 1e-12 {
            return Err(Error::Precondition(format!(
                "eigenvalue {lambda} lies in supp f = ({a}, {b})"
            )));
        }
    }
    Ok(())
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else if n == 1 { x } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let wt = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = wt;
        weights[n - 1 - i] = wt;
    }
    (nodes, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;
    use crate::potentials::{PotentialSpec, ShortPart, ShortProfile};
    use crate::symbol::FractionalSymbol;

    fn well_handle(n: usize, l: f64) -> HamiltonianHandle {
        let g = GridSpec::new(1, n, l).unwrap();
        let spec = PotentialSpec::zero().with_short(ShortPart {
            amplitude: -2.0,
            gamma_short: 2.0,
            profile: ShortProfile::PowerLaw,
        });
        HamiltonianHandle::new(g, FractionalSymbol::new(0.5).unwrap(), &spec).unwrap()
    }

    #[test]
    fn smooth_step_basics() {
        assert_eq!(smooth_step(0.0), 0.0);
        assert_eq!(smooth_step(1.0), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-16);
        for i in 1..100 {
            let u = i as f64 / 100.0;
            assert!((smooth_step(u) + smooth_step(1.0 - u) - 1.0).abs() < 1e-15);
            let fd = (smooth_step(u + 1e-6) - smooth_step(u - 1e-6)) / 2e-6;
            assert!((fd - smooth_step_derivative(u)).abs() < 1e-6);
        }
    }

    #[test]
    fn bump_examples() {
        let f = make_bump(-2.0, -1.0, 1.0, 2.0).unwrap();
        let v = f.eval(-1.5);
        assert!(v > 0.0 && v < 1.0);
        assert_eq!(f.eval(2.0), 0.0);
        for i in 0..400 {
            let x = -2.2 + i as f64 * 0.011;
            assert!((f.eval(x) - f.eval(-x)).abs() <= 1e-15);
        }
        for end in [-2.0, 2.0] {
            let d = (f.eval(end + 1e-5) - f.eval(end - 1e-5)) / 2e-5;
            assert!(d.abs() <= 1e-6);
        }
        assert!(make_bump(0.0, 0.0, 1.0, 2.0).is_err());
        assert!(make_bump(0.0, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn chebyshev_reproduces_cubic() {
        let h = well_handle(64, 6.0);
        let bounds = (-3.0, 30.0);
        let p = |x: f64| 0.5 - 0.1 * x + 0.01 * x * x - 0.0003 * x * x * x;
        let cheb = ChebyshevFunction::new(&h, p, 3, bounds).unwrap();
        assert!(cheb.degree() <= 3);
        for i in 0..=20 {
            let x = -3.0 + 33.0 * i as f64 / 20.0;
            assert!((cheb.eval_scalar(x) - p(x)).abs() < 1e-12);
        }
        // On states: p(H) psi directly.
        let psi = WaveFunction::random(*h.grid(), 1);
        let h1 = h.apply(&psi).unwrap();
        let h2 = h.apply(&h1).unwrap();
        let h3 = h.apply(&h2).unwrap();
        let direct = psi
            .scale(Complex64::new(0.5, 0.0))
            .axpy(Complex64::new(-0.1, 0.0), &h1)
            .unwrap()
            .axpy(Complex64::new(0.01, 0.0), &h2)
            .unwrap()
            .axpy(Complex64::new(-0.0003, 0.0), &h3)
            .unwrap();
        let out = cheb.apply(&psi).unwrap();
        assert!(out.l2_distance(&direct).unwrap() < 1e-12 * direct.norm().max(1.0));
    }

    #[test]
    fn chebyshev_zero_function() {
        let h = well_handle(32, 4.0);
        let cheb = ChebyshevFunction::new(&h, |_| 0.0, 10, (-3.0, 30.0)).unwrap();
        let psi = WaveFunction::random(*h.grid(), 2);
        assert_eq!(cheb.apply(&psi).unwrap().norm(), 0.0);
    }

    #[test]
    fn chebyshev_degree_cap() {
        let h = well_handle(32, 4.0);
        let f = make_bump(1.0, 1.5, 2.0, 2.5).unwrap();
        let r = ChebyshevFunction::from_cutoff(&h, &f, 50, (-3.0, 30.0));
        assert!(matches!(r, Err(Error::DegreeCap { .. })));
    }

    #[test]
    fn chebyshev_detects_bad_bounds() {
        let h = well_handle(64, 6.0);
        let f = make_bump(0.5, 1.0, 2.0, 2.5).unwrap();
        let cheb = ChebyshevFunction::from_cutoff(&h, &f, 2000, (-1.0, 3.0)).unwrap();
        let psi = WaveFunction::random(*h.grid(), 3);
        assert!(matches!(cheb.apply(&psi), Err(Error::BoundsViolation(_))));
    }

    #[test]
    fn bounds_enclose_spectrum() {
        let h = well_handle(128, 8.0);
        let d = h.diagonalize().unwrap();
        let (lo, hi) = spectral_bounds(&h).unwrap();
        let ev = d.eigenvalues();
        assert!(lo <= ev[0] && hi >= *ev.last().unwrap());
    }

    #[test]
    fn dense_function_examples() {
        let h = well_handle(64, 6.0);
        let d = Arc::new(h.diagonalize().unwrap());
        let ev = d.eigenvalues().to_vec();
        let (lo, hi) = (ev[0], *ev.last().unwrap());
        let psi = WaveFunction::random(*h.grid(), 5);
        let one = f_of_h_dense(d.clone(), &make_bump(lo - 2.0, lo - 1.0, hi + 1.0, hi + 2.0).unwrap());
        assert!(one.apply(&psi).unwrap().l2_distance(&psi).unwrap() < 1e-10 * psi.norm());
        let zero = f_of_h_dense(d.clone(), &make_bump(lo - 3.0, lo - 2.5, lo - 2.0, lo - 1.0).unwrap());
        assert!(zero.apply(&psi).unwrap().norm() < 1e-12);
        let f = make_bump(0.5, 1.0, 2.0, 2.5).unwrap();
        let g = make_bump(0.2, 0.4, 2.6, 3.0).unwrap();
        let fh = f_of_h_dense(d.clone(), &f);
        let gh = f_of_h_dense(d.clone(), &g);
        let a = fh.apply(&gh.apply(&psi).unwrap()).unwrap();
        let b = fh.apply(&psi).unwrap();
        assert!(a.l2_distance(&b).unwrap() < 1e-10 * psi.norm());
        assert!(crate::linalg::hermitian_defect(&fh.matrix()) < 1e-11);
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, wts) = gauss_legendre(12);
        let s: f64 = x.iter().zip(&wts).map(|(x, w)| w * x.powi(22)).sum();
        assert!((s - 2.0 / 23.0).abs() < 1e-14);
        let s: f64 = wts.iter().sum();
        assert!((s - 2.0).abs() < 1e-14);
    }
}
