use crate::calculus::{gauss_legendre, smooth_step, smooth_step_derivative};
use crate::error::{Error, Result};

/// Convex radial localizer `R(x) = r(|x|^2)` with `r = theta^2/4` below `theta^2/4`,
/// `r = s/2` above `theta^2`, and `r'(s) = S((s - m)/w)/2` in between.
#[derive(Debug, Clone)]
pub struct RFunction {
    theta: f64,
    shift: f64,
    width: f64,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

const PANELS: usize = 8;

impl RFunction {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("theta must be positive, got {theta}")));
        }
        let t2 = theta * theta;
        let (nodes, weights) = gauss_legendre(20);
        let mut r = Self {
            theta,
            shift: 0.0,
            width: 3.0 * t2 / 8.0,
            nodes,
            weights,
        };
        let (mut lo, mut hi) = (0.25 * t2, 0.625 * t2);
        while hi - lo > 1e-12 * t2.max(1.0) {
            let mid = 0.5 * (lo + hi);
            r.shift = mid;
            if r.r(t2) > 0.5 * t2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        r.shift = 0.5 * (lo + hi);
        Ok(r)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Transition shift `m`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Transition width `w`.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// `int_0^u S` for `u in [0, 1]`, composite Gauss-Legendre.
    fn step_integral(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let panel = u / PANELS as f64;
        let mut acc = 0.0;
        for p in 0..PANELS {
            let a = p as f64 * panel;
            for (x, wt) in self.nodes.iter().zip(&self.weights) {
                acc += wt * smooth_step(a + 0.5 * panel * (x + 1.0));
            }
        }
        0.5 * panel * acc
    }

    pub fn r(&self, s: f64) -> f64 {
        let base = 0.25 * self.theta * self.theta;
        let u = (s - self.shift) / self.width;
        if u <= 0.0 {
            return base;
        }
        let integral = if u <= 1.0 {
            self.step_integral(u)
        } else {
            self.step_integral(1.0) + (u - 1.0)
        };
        base + 0.5 * self.width * integral
    }

    pub fn r_prime(&self, s: f64) -> f64 {
        0.5 * smooth_step((s - self.shift) / self.width)
    }

    pub fn r_second(&self, s: f64) -> f64 {
        0.5 * smooth_step_derivative((s - self.shift) / self.width) / self.width
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.r(x.iter().map(|v| v * v).sum())
    }

    /// `grad R = 2 r'(|x|^2) x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let c = 2.0 * self.r_prime(x.iter().map(|v| v * v).sum());
        x.iter().map(|v| c * v).collect()
    }

    /// `Hess R = 2 r' I + 4 r'' x x^T`.
    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let s: f64 = x.iter().map(|v| v * v).sum();
        let (a, b) = (2.0 * self.r_prime(s), 4.0 * self.r_second(s));
        (0..x.len())
            .map(|i| {
                (0..x.len())
                    .map(|j| b * x[i] * x[j] + if i == j { a } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}
