//! Cotangent conjugacy `xi(s) = gamma cot(pi s) + 2a` between the doubling
//! map on the circle and `y -> y/2 + a - (gamma^2/2)/(y - 2a)` on the line.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::maps1d::Map1D;
use crate::measures::{density_eval, DensitySpec};

/// Distance from 0 and 1 below which `xi` is not evaluated.
pub const ENDPOINT_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CotangentConjugacy {
    gamma: f64,
    a: f64,
}

impl CotangentConjugacy {
    pub fn new(gamma: f64, a: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) || !a.is_finite() {
            return Err(invalid("gamma must be positive and a finite"));
        }
        Ok(CotangentConjugacy { gamma, a })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// The map this conjugacy linearizes.
    pub fn boole_map(&self) -> Map1D {
        Map1D::SpecialBoole {
            alpha: 0.5,
            a: self.a,
            b: 2.0 * self.a,
            beta: 0.5 * self.gamma * self.gamma,
        }
    }

    /// Its invariant Cauchy density.
    pub fn cauchy(&self) -> DensitySpec {
        DensitySpec::Cauchy {
            center: 2.0 * self.a,
            gamma: self.gamma,
        }
    }

    fn check(&self, s: f64) -> Result<()> {
        if !(s > ENDPOINT_GAP && s < 1.0 - ENDPOINT_GAP) {
            return Err(Error::Domain { map: "xi", x: s });
        }
        Ok(())
    }

    pub fn xi(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let (sin, cos) = (PI * s).sin_cos();
        Ok(self.gamma * cos / sin + 2.0 * self.a)
    }

    /// `-gamma pi / sin^2(pi s)`
    pub fn xi_derivative(&self, s: f64) -> Result<f64> {
        self.check(s)?;
        let sin = (PI * s).sin();
        Ok(-self.gamma * PI / (sin * sin))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConjugacyReport {
    pub max_residual: f64,
    pub argmax_s: f64,
    pub grid_size: usize,
}

/// Cell midpoints `(i + 1/2)/n`; for even `n` they stay `1/(2n)` away from
/// 0, 1/2 and 1.
pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect()
}

fn doubling(s: f64) -> f64 {
    let t = 2.0 * s;
    t - t.floor()
}

fn report(grid: &[f64], mut f: impl FnMut(f64) -> Result<f64>) -> Result<ConjugacyReport> {
    if grid.is_empty() {
        return Err(invalid("grid must be nonempty"));
    }
    let mut out = ConjugacyReport {
        max_residual: 0.0,
        argmax_s: grid[0],
        grid_size: grid.len(),
    };
    for &s in grid {
        let r = f(s)?;
        if r > out.max_residual || r.is_nan() {
            out.max_residual = r;
            out.argmax_s = s;
        }
    }
    Ok(out)
}

/// `max_s |phi(xi(s)) - xi(2s mod 1)| / (1 + |xi(2s mod 1)|)`.
pub fn check_commutation(c: &CotangentConjugacy, map: &Map1D, grid: &[f64]) -> Result<ConjugacyReport> {
    report(grid, |s| {
        let target = c.xi(doubling(s))?;
        let image = map.eval(c.xi(s)?)?;
        Ok((image - target).abs() / (1.0 + target.abs()))
    })
}

/// `max_s |rho(xi(s)) |xi'(s)| - 1|`: the pullback of `rho` under `xi` should
/// be the uniform density on the circle.
pub fn pushforward_density_check(c: &CotangentConjugacy, rho: &DensitySpec, grid: &[f64]) -> Result<ConjugacyReport> {
    report(grid, |s| {
        let v = density_eval(rho, c.xi(s)?)? * c.xi_derivative(s)?.abs();
        Ok((v - 1.0).abs())
    })
}

/// Relative gaps `|phi^k(xi(s0)) - xi(2^k s0 mod 1)| / (1 + |xi(2^k s0)|)`
/// for `k = 0..=n`.
pub fn orbit_transport(c: &CotangentConjugacy, map: &Map1D, s0: f64, n: usize) -> Result<Vec<f64>> {
    let mut x = c.xi(s0)?;
    let mut s = s0;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let target = c.xi(s)?;
        out.push((x - target).abs() / (1.0 + target.abs()));
        if k < n {
            x = map.eval(x)?;
            s = doubling(s);
        }
    }
    Ok(out)
}
