//! The fractional kinetic symbol `Psi_rho(s) = (s + 1)^rho - 1`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalSymbol {
    rho: f64,
}

impl FractionalSymbol {
    pub fn new(rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return Err(Error::InvalidRho(rho));
        }
        Ok(Self { rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// Evaluates `Psi`, `Psi'` or `Psi''` at `s >= 0`.
    pub fn eval(&self, s: f64, order: u8) -> Result<f64> {
        if !(s >= 0.0) {
            return Err(Error::NegativeSymbolArgument(s));
        }
        match order {
            0 => Ok(self.value(s)),
            1 => Ok(self.derivative(s)),
            2 => Ok(self.second_derivative(s)),
            _ => Err(Error::InvalidArgument(format!("symbol derivative order {order} not in 0..=2"))),
        }
    }

    /// `Psi(s)`; callers guarantee `s >= 0`. Computed as `expm1(rho ln1p(s))` to
    /// avoid cancellation near the origin; `rho = 1` is exact.
    pub fn value(&self, s: f64) -> f64 {
        if self.rho == 1.0 {
            s
        } else {
            (self.rho * s.ln_1p()).exp_m1()
        }
    }

    /// `Psi'(s) = rho (s+1)^(rho-1)`.
    pub fn derivative(&self, s: f64) -> f64 {
        if self.rho == 1.0 {
            1.0
        } else {
            self.rho * ((self.rho - 1.0) * s.ln_1p()).exp()
        }
    }

    /// `Psi''(s) = rho (rho-1) (s+1)^(rho-2)`.
    pub fn second_derivative(&self, s: f64) -> f64 {
        if self.rho == 1.0 {
            0.0
        } else {
            self.rho * (self.rho - 1.0) * ((self.rho - 2.0) * s.ln_1p()).exp()
        }
    }

    /// Group speed `2 |xi| Psi'(|xi|^2)` of a packet at momentum magnitude `|xi|`.
    pub fn group_speed(&self, xi_abs: f64) -> f64 {
        2.0 * xi_abs * self.derivative(xi_abs * xi_abs)
    }

    /// Momentum magnitude with kinetic energy `lambda`, `|xi|^2 = (1+lambda)^(1/rho) - 1`.
    pub fn momentum_at_energy(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        ((lambda.ln_1p() / self.rho).exp_m1()).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_values() {
        let one = FractionalSymbol::new(1.0).unwrap();
        assert_eq!(one.eval(3.0, 0).unwrap(), 3.0);
        let half = FractionalSymbol::new(0.5).unwrap();
        assert!((half.eval(3.0, 0).unwrap() - 1.0).abs() < 1e-15);
        let three_q = FractionalSymbol::new(0.75).unwrap();
        // 0.75 * 2^(-1/4)
        assert!((three_q.eval(1.0, 1).unwrap() - 0.630_667_5).abs() < 1e-4);
        assert!((three_q.eval(1.0, 1).unwrap() - 0.75 * 2f64.powf(-0.25)).abs() < 1e-15);
    }

    #[test]
    fn second_derivative_matches_finite_difference() {
        let sym = FractionalSymbol::new(0.3).unwrap();
        for &s in &[0.5, 2.0, 10.0] {
            let h = 1e-5;
            let fd = (sym.derivative(s + h) - sym.derivative(s - h)) / (2.0 * h);
            assert!((fd - sym.second_derivative(s)).abs() < 1e-8);
            let fd1 = (sym.value(s + h) - sym.value(s - h)) / (2.0 * h);
            assert!((fd1 - sym.derivative(s)).abs() < 1e-8);
        }
    }

    #[test]
    fn domain_errors() {
        let sym = FractionalSymbol::new(0.5).unwrap();
        assert_eq!(sym.eval(-1.0, 0), Err(Error::NegativeSymbolArgument(-1.0)));
        assert!(sym.eval(1.0, 3).is_err());
        assert!(FractionalSymbol::new(0.0).is_err());
        assert!(FractionalSymbol::new(1.5).is_err());
    }

    #[test]
    fn zero_and_monotone() {
        let sym = FractionalSymbol::new(0.25).unwrap();
        assert_eq!(sym.value(0.0), 0.0);
        let mut prev = 0.0;
        for i in 1..200 {
            let v = sym.value(i as f64 * 0.37);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn energy_momentum_inverse() {
        let sym = FractionalSymbol::new(0.5).unwrap();
        let xi = 1.3;
        let lambda = sym.value(xi * xi);
        assert!((sym.momentum_at_energy(lambda) - xi).abs() < 1e-13);
        // rho = 1/2, xi = 1: group speed sqrt(2)/2.
        assert!((sym.group_speed(1.0) - 0.5f64.sqrt()).abs() < 1e-15);
    }
}
