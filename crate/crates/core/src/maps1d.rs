//! One-dimensional maps: the generalized Boole family and the interval maps
//! (baker, doubling, Gauss) used for measure generating functions.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::poly::{is_real_root, Poly};

/// Relative radius around each pole inside which evaluation is refused.
pub const POLE_RADIUS: f64 = 1e-12;

/// Number of Gauss-map branches `y = 1/(k + x)` kept when inverting.
pub const GAUSS_MAX_BRANCHES: usize = 64;

/// Newton steps allowed when polishing a preimage.
const POLISH_STEPS: usize = 20;

fn pole_radius(b: f64) -> f64 {
    POLE_RADIUS * (1.0 + b.abs())
}

/// `y -> alpha y + a - sum_j beta_j / (y - b_j)`, an `(N+1)`-to-one map of the
/// real line.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleMap1D {
    alpha: f64,
    a: f64,
    betas: Vec<f64>,
    bs: Vec<f64>,
}

impl BooleMap1D {
    pub fn new(alpha: f64, a: f64, betas: Vec<f64>, bs: Vec<f64>) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha must be positive and finite"));
        }
        if !a.is_finite() {
            return Err(invalid("a must be finite"));
        }
        if betas.is_empty() {
            return Err(invalid("at least one pole is required"));
        }
        if betas.len() != bs.len() {
            return Err(invalid("betas and bs must have the same length"));
        }
        if betas.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(invalid("every beta must be positive and finite"));
        }
        if bs.iter().any(|b| !b.is_finite()) {
            return Err(invalid("pole locations must be finite"));
        }
        if bs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("pole locations must be strictly increasing"));
        }
        Ok(BooleMap1D { alpha, a, betas, bs })
    }

    /// `y -> y - 1/y`
    pub fn classical() -> Self {
        BooleMap1D {
            alpha: 1.0,
            a: 0.0,
            betas: vec![1.0],
            bs: vec![0.0],
        }
    }

    /// Single-pole map `y -> alpha y + a - beta/(y - b)`.
    pub fn single(alpha: f64, a: f64, beta: f64, b: f64) -> Result<Self> {
        BooleMap1D::new(alpha, a, vec![beta], vec![b])
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn poles(&self) -> &[f64] {
        &self.bs
    }

    pub fn pole_count(&self) -> usize {
        self.bs.len()
    }

    fn check_pole(&self, y: f64) -> Result<()> {
        for &b in &self.bs {
            if (y - b).abs() < pole_radius(b) {
                return Err(Error::PoleProximity { x: y, pole: b });
            }
        }
        Ok(())
    }

    fn eval_unchecked(&self, y: f64) -> f64 {
        let s: f64 = self
            .betas
            .iter()
            .zip(&self.bs)
            .map(|(beta, b)| beta / (y - b))
            .sum();
        self.alpha * y + self.a - s
    }

    fn derivative_unchecked(&self, y: f64) -> f64 {
        let s: f64 = self
            .betas
            .iter()
            .zip(&self.bs)
            .map(|(beta, b)| {
                let d = y - b;
                beta / (d * d)
            })
            .sum();
        self.alpha + s
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        self.check_pole(y)?;
        Ok(self.eval_unchecked(y))
    }

    /// `alpha + sum_j beta_j/(y - b_j)^2`, always positive.
    pub fn derivative(&self, y: f64) -> Result<f64> {
        self.check_pole(y)?;
        Ok(self.derivative_unchecked(y))
    }

    /// The same rational expression evaluated at a complex point.
    pub fn eval_complex(&self, z: Complex64) -> Complex64 {
        let mut out = z * self.alpha + self.a;
        for (beta, b) in self.betas.iter().zip(&self.bs) {
            out -= Complex64::new(*beta, 0.0) / (z - b);
        }
        out
    }

    /// `(slope y + shift) prod_j (y - b_j) - sum_j beta_j prod_{k != j} (y - b_k)`
    fn cleared_numerator(&self, slope: f64, shift: f64) -> Poly {
        let all = Poly::from_roots(&self.bs);
        let mut p = all.mul_linear(0.0).scale(slope).add(&all.scale(shift));
        for j in 0..self.bs.len() {
            let mut others = Poly::constant(1.0);
            for (k, &b) in self.bs.iter().enumerate() {
                if k != j {
                    others = others.mul_linear(b);
                }
            }
            p = p.add(&others.scale(-self.betas[j]));
        }
        p
    }

    /// Numerator of `phi(y) - x` after clearing the pole denominators; its
    /// roots are the preimages of `x`.
    pub fn preimage_polynomial(&self, x: f64) -> Poly {
        self.cleared_numerator(self.alpha, self.a - x)
    }

    /// Numerator of `phi(w) - w`; its roots are the fixed points.
    pub fn fixed_point_polynomial(&self) -> Poly {
        self.cleared_numerator(self.alpha - 1.0, self.a)
    }

    /// Open monotone interval `j` of the map, `0 <= j <= N`.
    pub fn monotone_interval(&self, j: usize) -> (f64, f64) {
        let lo = if j == 0 { f64::NEG_INFINITY } else { self.bs[j - 1] };
        let hi = if j == self.bs.len() { f64::INFINITY } else { self.bs[j] };
        (lo, hi)
    }

    fn interval_index(&self, y: f64) -> usize {
        self.bs.iter().take_while(|&&b| b < y).count()
    }

    /// All `N+1` real solutions of `phi(y) = x`, one per monotone interval.
    pub fn preimages(&self, x: f64) -> Result<PreimageSet> {
        if !x.is_finite() {
            return Err(invalid("target point must be finite"));
        }
        let n = self.bs.len() + 1;
        let mut guesses: Vec<Option<f64>> = vec![None; n];
        // Eigenvalue roots seed the per-interval solves; a failed eigen solve
        // only costs the seeds.
        if let Ok(roots) = self.preimage_polynomial(x).roots(0) {
            for r in roots.into_iter().filter(|r| is_real_root(*r)) {
                let j = self.interval_index(r.re);
                let (lo, hi) = self.monotone_interval(j);
                if r.re > lo && r.re < hi && guesses[j].is_none() {
                    guesses[j] = Some(r.re);
                }
            }
        }
        let mut branches = Vec::with_capacity(n);
        for (j, guess) in guesses.into_iter().enumerate() {
            let y = self.solve_in_interval(j, x, guess)?;
            let weight = 1.0 / self.derivative_unchecked(y);
            branches.push(Branch { y, weight });
        }
        Ok(PreimageSet { x, branches })
    }

    fn solve_in_interval(&self, j: usize, x: f64, guess: Option<f64>) -> Result<f64> {
        let (left, right) = self.monotone_interval(j);
        let f = |y: f64| self.eval_unchecked(y) - x;
        let mut y = match guess {
            Some(g) => g,
            None => match (left.is_finite(), right.is_finite()) {
                (true, true) => 0.5 * (left + right),
                (false, true) => right - 1.0 - (x - self.a).abs() / self.alpha,
                (true, false) => left + 1.0 + (x - self.a).abs() / self.alpha,
                (false, false) => unreachable!(),
            },
        };
        let fail = |y: f64| Error::RootSolveFailure {
            y,
            residual: f64::INFINITY,
        };

        // bracket: f(lo) < 0 < f(hi)
        let mut lo = y;
        if f(lo) >= 0.0 {
            if left.is_finite() {
                let mut d = y - left;
                loop {
                    d *= 0.25;
                    if d < pole_radius(left) {
                        return Err(fail(y));
                    }
                    lo = left + d;
                    if f(lo) < 0.0 {
                        break;
                    }
                }
            } else {
                let mut step = 1.0 + y.abs();
                loop {
                    lo = y - step;
                    if f(lo) < 0.0 {
                        break;
                    }
                    step *= 2.0;
                    if !step.is_finite() {
                        return Err(fail(y));
                    }
                }
            }
        }
        let mut hi = y;
        if f(hi) <= 0.0 {
            if right.is_finite() {
                let mut d = right - y;
                loop {
                    d *= 0.25;
                    if d < pole_radius(right) {
                        return Err(fail(y));
                    }
                    hi = right - d;
                    if f(hi) > 0.0 {
                        break;
                    }
                }
            } else {
                let mut step = 1.0 + y.abs();
                loop {
                    hi = y + step;
                    if f(hi) > 0.0 {
                        break;
                    }
                    step *= 2.0;
                    if !step.is_finite() {
                        return Err(fail(y));
                    }
                }
            }
        }
        if !(y > lo && y < hi) {
            y = 0.5 * (lo + hi);
        }

        // Newton, falling back to bisection whenever the step leaves the bracket.
        let mut newton_steps = 0;
        for _ in 0..200 {
            let fy = f(y);
            if fy == 0.0 {
                break;
            }
            if fy < 0.0 {
                lo = y;
            } else {
                hi = y;
            }
            let mut next = y - fy / self.derivative_unchecked(y);
            if newton_steps < POLISH_STEPS && next > lo && next < hi {
                newton_steps += 1;
            } else {
                next = 0.5 * (lo + hi);
            }
            let converged = (next - y).abs() <= 2.0 * f64::EPSILON * y.abs().max(1e-300);
            y = next;
            if converged || hi - lo <= 2.0 * f64::EPSILON * y.abs().max(1e-300) {
                break;
            }
        }
        let residual = f(y).abs();
        if residual > 1e-9 * x.abs().max(1.0) {
            return Err(Error::RootSolveFailure { y, residual });
        }
        Ok(y)
    }

    /// All roots of the fixed-point polynomial, split into real roots and
    /// those strictly in the upper half plane.
    pub fn complex_fixed_points(&self) -> Result<ComplexFixedPoints> {
        let poly = self.fixed_point_polynomial();
        if poly.is_zero() {
            return Err(Error::DegenerateEquation);
        }
        let mut roots = poly.roots(POLISH_STEPS)?;
        for z in roots.iter_mut() {
            if is_real_root(*z) {
                *z = Complex64::new(polish_real(&poly, z.re), 0.0);
            }
        }
        roots.sort_by(|a, b| {
            a.re.partial_cmp(&b.re)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.im.partial_cmp(&b.im).unwrap_or(core::cmp::Ordering::Equal))
        });
        let upper = roots.iter().copied().filter(|z| z.im > 1e-10).collect();
        let max_residual = roots
            .iter()
            .map(|&z| (self.eval_complex(z) - z).norm() / (1.0 + z.norm()))
            .fold(0.0, f64::max);
        Ok(ComplexFixedPoints {
            roots,
            upper,
            max_residual,
        })
    }
}

fn polish_real(poly: &Poly, mut y: f64) -> f64 {
    for _ in 0..POLISH_STEPS {
        let (p, dp) = poly.eval_with_derivative(Complex64::new(y, 0.0));
        if p.re == 0.0 || dp.re == 0.0 {
            break;
        }
        let next = y - p.re / dp.re;
        if poly.eval(next).abs() > p.re.abs() {
            break;
        }
        let done = (next - y).abs() <= 4.0 * f64::EPSILON * y.abs().max(1e-300);
        y = next;
        if done {
            break;
        }
    }
    y
}

/// One preimage branch: `phi(y) = x` with weight `|dy/dx| = 1/|phi'(y)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Branch {
    pub y: f64,
    pub weight: f64,
}

/// Real preimages of a point, sorted by `y`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PreimageSet {
    pub x: f64,
    pub branches: Vec<Branch>,
}

impl PreimageSet {
    pub fn weight_sum(&self) -> f64 {
        self.branches.iter().map(|b| b.weight).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexFixedPoints {
    /// Every root of the fixed-point polynomial, real roots with zero
    /// imaginary part.
    pub roots: Vec<Complex64>,
    /// Roots with imaginary part above `1e-10`.
    pub upper: Vec<Complex64>,
    /// Largest `|phi(w) - w| / (1 + |w|)` over `roots`.
    pub max_residual: f64,
}

impl ComplexFixedPoints {
    pub fn real(&self) -> impl Iterator<Item = f64> + '_ {
        self.roots.iter().filter(|z| z.im == 0.0).map(|z| z.re)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Line,
    UnitInterval,
}

/// The map catalog.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(try_from = "repr::MapRepr", into = "repr::MapRepr")
)]
pub enum Map1D {
    GeneralizedBoole(BooleMap1D),
    /// `y -> y - 1/y`
    ClassicalBoole,
    /// `y -> alpha y + a - beta/(y - b)`; `gamma = sqrt(2 beta)`.
    SpecialBoole { alpha: f64, a: f64, b: f64, beta: f64 },
    /// Tent map: `2y` on `[0, 1/2)`, `2(1 - y)` on `[1/2, 1]`.
    Baker,
    /// `y -> {1/y}` on `(0, 1]`.
    Gauss,
    /// `y -> 2y mod 1`
    Doubling,
    Identity,
}

impl Map1D {
    pub fn special_boole(alpha: f64, a: f64, b: f64, beta: f64) -> Result<Self> {
        BooleMap1D::single(alpha, a, beta, b)?;
        Ok(Map1D::SpecialBoole { alpha, a, b, beta })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Map1D::GeneralizedBoole(_) => "generalized_boole",
            Map1D::ClassicalBoole => "classical_boole",
            Map1D::SpecialBoole { .. } => "special_boole",
            Map1D::Baker => "baker",
            Map1D::Gauss => "gauss",
            Map1D::Doubling => "doubling",
            Map1D::Identity => "identity",
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Map1D::GeneralizedBoole(_)
            | Map1D::ClassicalBoole
            | Map1D::SpecialBoole { .. }
            | Map1D::Identity => Domain::Line,
            Map1D::Baker | Map1D::Gauss | Map1D::Doubling => Domain::UnitInterval,
        }
    }

    /// The Boole-family members as a [`BooleMap1D`].
    pub fn to_boole(&self) -> Option<BooleMap1D> {
        match self {
            Map1D::GeneralizedBoole(m) => Some(m.clone()),
            Map1D::ClassicalBoole => Some(BooleMap1D::classical()),
            Map1D::SpecialBoole { alpha, a, b, beta } => BooleMap1D::single(*alpha, *a, *beta, *b).ok(),
            _ => None,
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match self {
            Map1D::SpecialBoole { beta, .. } => Some((2.0 * beta).sqrt()),
            _ => None,
        }
    }

    fn unit_domain(&self, y: f64) -> Result<()> {
        if (0.0..=1.0).contains(&y) {
            Ok(())
        } else {
            Err(Error::Domain { map: self.name(), x: y })
        }
    }

    pub fn eval(&self, y: f64) -> Result<f64> {
        match self {
            Map1D::GeneralizedBoole(m) => m.eval(y),
            Map1D::ClassicalBoole => {
                if y.abs() < POLE_RADIUS {
                    return Err(Error::PoleProximity { x: y, pole: 0.0 });
                }
                Ok(y - 1.0 / y)
            }
            Map1D::SpecialBoole { alpha, a, b, beta } => {
                if (y - b).abs() < pole_radius(*b) {
                    return Err(Error::PoleProximity { x: y, pole: *b });
                }
                Ok(alpha * y + a - beta / (y - b))
            }
            Map1D::Baker => {
                self.unit_domain(y)?;
                Ok(if y < 0.5 { 2.0 * y } else { 2.0 * (1.0 - y) })
            }
            Map1D::Doubling => {
                self.unit_domain(y)?;
                let t = 2.0 * y;
                Ok(t - t.floor())
            }
            Map1D::Gauss => {
                self.unit_domain(y)?;
                if y < POLE_RADIUS {
                    return Err(Error::PoleProximity { x: y, pole: 0.0 });
                }
                let t = 1.0 / y;
                Ok(t - t.floor())
            }
            Map1D::Identity => Ok(y),
        }
    }

    pub fn derivative(&self, y: f64) -> Result<f64> {
        match self {
            Map1D::GeneralizedBoole(m) => m.derivative(y),
            Map1D::ClassicalBoole => {
                if y.abs() < POLE_RADIUS {
                    return Err(Error::PoleProximity { x: y, pole: 0.0 });
                }
                Ok(1.0 + 1.0 / (y * y))
            }
            Map1D::SpecialBoole { alpha, b, beta, .. } => {
                if (y - b).abs() < pole_radius(*b) {
                    return Err(Error::PoleProximity { x: y, pole: *b });
                }
                let d = y - b;
                Ok(alpha + beta / (d * d))
            }
            Map1D::Baker => {
                self.unit_domain(y)?;
                Ok(if y < 0.5 { 2.0 } else { -2.0 })
            }
            Map1D::Doubling => {
                self.unit_domain(y)?;
                Ok(2.0)
            }
            Map1D::Gauss => {
                self.unit_domain(y)?;
                if y < POLE_RADIUS {
                    return Err(Error::PoleProximity { x: y, pole: 0.0 });
                }
                Ok(-1.0 / (y * y))
            }
            Map1D::Identity => Ok(1.0),
        }
    }

    /// Real preimages of `x` with their weights. Gauss-map branches are
    /// truncated to the first [`GAUSS_MAX_BRANCHES`].
    pub fn preimages(&self, x: f64) -> Result<PreimageSet> {
        if let Some(m) = self.to_boole() {
            return m.preimages(x);
        }
        let mut branches = match self {
            Map1D::Doubling => {
                self.unit_domain(x)?;
                vec![
                    Branch { y: 0.5 * x, weight: 0.5 },
                    Branch { y: 0.5 * (x + 1.0), weight: 0.5 },
                ]
            }
            Map1D::Baker => {
                self.unit_domain(x)?;
                vec![
                    Branch { y: 0.5 * x, weight: 0.5 },
                    Branch { y: 1.0 - 0.5 * x, weight: 0.5 },
                ]
            }
            Map1D::Gauss => {
                self.unit_domain(x)?;
                (1..=GAUSS_MAX_BRANCHES)
                    .map(|k| {
                        let d = k as f64 + x;
                        Branch { y: 1.0 / d, weight: 1.0 / (d * d) }
                    })
                    .collect()
            }
            Map1D::Identity => vec![Branch { y: x, weight: 1.0 }],
            _ => unreachable!("Boole maps handled above"),
        };
        branches.sort_by(|a, b| a.y.partial_cmp(&b.y).unwrap_or(core::cmp::Ordering::Equal));
        Ok(PreimageSet { x, branches })
    }

    /// Preimage of `[lo, hi]` as disjoint intervals sorted by left endpoint.
    pub fn interval_preimage(&self, lo: f64, hi: f64) -> Result<Vec<(f64, f64)>> {
        if !(lo < hi) {
            return Err(invalid("interval must satisfy lo < hi"));
        }
        match self {
            Map1D::Doubling | Map1D::Baker | Map1D::Gauss => {
                self.unit_domain(lo)?;
                self.unit_domain(hi)?;
            }
            _ => return Err(Error::UnsupportedMap(self.name())),
        }
        let mut out = match self {
            Map1D::Doubling => vec![(0.5 * lo, 0.5 * hi), (0.5 * (lo + 1.0), 0.5 * (hi + 1.0))],
            Map1D::Baker => vec![(0.5 * lo, 0.5 * hi), (1.0 - 0.5 * hi, 1.0 - 0.5 * lo)],
            Map1D::Gauss => (1..=GAUSS_MAX_BRANCHES)
                .map(|k| (1.0 / (k as f64 + hi), 1.0 / (k as f64 + lo)))
                .collect(),
            _ => unreachable!(),
        };
        out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
        Ok(out)
    }
}

#[cfg(feature = "serde")]
mod repr {
    use super::*;
    use alloc::string::{String, ToString};

    #[derive(serde::Serialize, serde::Deserialize)]
    #[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
    pub enum MapRepr {
        GeneralizedBoole { alpha: f64, a: f64, betas: Vec<f64>, bs: Vec<f64> },
        ClassicalBoole {},
        SpecialBoole { alpha: f64, a: f64, b: f64, beta: f64 },
        Baker {},
        Gauss {},
        Doubling {},
        Identity {},
    }

    impl TryFrom<MapRepr> for Map1D {
        type Error = String;

        fn try_from(r: MapRepr) -> core::result::Result<Self, String> {
            let m = match r {
                MapRepr::GeneralizedBoole { alpha, a, betas, bs } => {
                    Map1D::GeneralizedBoole(BooleMap1D::new(alpha, a, betas, bs).map_err(|e| e.to_string())?)
                }
                MapRepr::ClassicalBoole {} => Map1D::ClassicalBoole,
                MapRepr::SpecialBoole { alpha, a, b, beta } => {
                    Map1D::special_boole(alpha, a, b, beta).map_err(|e| e.to_string())?
                }
                MapRepr::Baker {} => Map1D::Baker,
                MapRepr::Gauss {} => Map1D::Gauss,
                MapRepr::Doubling {} => Map1D::Doubling,
                MapRepr::Identity {} => Map1D::Identity,
            };
            Ok(m)
        }
    }

    impl From<Map1D> for MapRepr {
        fn from(m: Map1D) -> Self {
            match m {
                Map1D::GeneralizedBoole(g) => MapRepr::GeneralizedBoole {
                    alpha: g.alpha,
                    a: g.a,
                    betas: g.betas,
                    bs: g.bs,
                },
                Map1D::ClassicalBoole => MapRepr::ClassicalBoole {},
                Map1D::SpecialBoole { alpha, a, b, beta } => MapRepr::SpecialBoole { alpha, a, b, beta },
                Map1D::Baker => MapRepr::Baker {},
                Map1D::Gauss => MapRepr::Gauss {},
                Map1D::Doubling => MapRepr::Doubling {},
                Map1D::Identity => MapRepr::Identity {},
            }
        }
    }
}
