//! Analytic invariant densities, quasi-measures built from upper half-plane
//! fixed points, and the ergodicity classification of Boole maps.

use alloc::vec::Vec;
use core::f64::consts::{LN_2, PI};

use num_complex::Complex64;
#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::maps1d::BooleMap1D;

/// Normalization constant giving the Poisson kernel `v / (pi ((x-u)^2 + v^2))`.
pub const QUASI_K: f64 = -1.0 / PI;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "variant", rename_all = "snake_case", try_from = "repr::DensityRepr")
)]
pub enum DensitySpec {
    /// `gamma / (pi ((x - center)^2 + gamma^2))`
    Cauchy { center: f64, gamma: f64 },
    /// `sqrt(beta (1 - alpha)) / (pi (x^2 (1 - alpha) + beta))`
    SpecialAlphaBeta { alpha: f64, beta: f64 },
    /// `1 / (ln 2 (1 + x))` on `[0, 1]`.
    GaussDensity,
    /// Constant 1.
    LebesgueUnit,
    /// `Im[k / (omega_bar - x)]`
    QuasiMeasure { omega_bar: Complex64, k: Complex64 },
    /// Piecewise-linear interpolation of `values` at sorted `points`, zero
    /// outside.
    Grid { points: Vec<f64>, values: Vec<f64> },
}

impl DensitySpec {
    pub fn cauchy(center: f64, gamma: f64) -> Result<Self> {
        let d = DensitySpec::Cauchy { center, gamma };
        d.validate()?;
        Ok(d)
    }

    pub fn special_alpha_beta(alpha: f64, beta: f64) -> Result<Self> {
        let d = DensitySpec::SpecialAlphaBeta { alpha, beta };
        d.validate()?;
        Ok(d)
    }

    pub fn grid(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let d = DensitySpec::Grid { points, values };
        d.validate()?;
        Ok(d)
    }

    /// Poisson kernel centred at `omega = u + iv`, `v > 0`.
    pub fn poisson(omega: Complex64) -> Self {
        DensitySpec::QuasiMeasure {
            omega_bar: omega,
            k: Complex64::new(QUASI_K, 0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DensitySpec::Cauchy { center, gamma } => {
                if !center.is_finite() || !(*gamma > 0.0 && gamma.is_finite()) {
                    return Err(invalid("cauchy needs finite center and positive gamma"));
                }
            }
            DensitySpec::SpecialAlphaBeta { alpha, beta } => {
                if !(*alpha > 0.0 && *alpha < 1.0) || !(*beta > 0.0 && beta.is_finite()) {
                    return Err(invalid("alpha must lie in (0,1) and beta must be positive"));
                }
            }
            DensitySpec::QuasiMeasure { omega_bar, k } => {
                if !(omega_bar.re.is_finite() && omega_bar.im.is_finite() && k.re.is_finite() && k.im.is_finite()) {
                    return Err(invalid("quasi-measure parameters must be finite"));
                }
            }
            DensitySpec::Grid { points, values } => {
                if points.len() < 2 || points.len() != values.len() {
                    return Err(invalid("grid needs at least two points and matching values"));
                }
                if points.windows(2).any(|w| !(w[1] > w[0])) || points.iter().any(|p| !p.is_finite()) {
                    return Err(invalid("grid points must be finite and strictly increasing"));
                }
                if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(invalid("grid values must be finite and nonnegative"));
                }
            }
            DensitySpec::GaussDensity | DensitySpec::LebesgueUnit => {}
        }
        Ok(())
    }

    /// Trapezoid mass of a grid density, or the total mass of an analytic one.
    pub fn total_mass(&self) -> Result<f64> {
        match self {
            DensitySpec::GaussDensity => density_integral(self, 0.0, 1.0),
            _ => density_integral(self, f64::NEG_INFINITY, f64::INFINITY),
        }
    }
}

/// Pointwise density value.
pub fn density_eval(d: &DensitySpec, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(invalid("evaluation point must be finite"));
    }
    Ok(match d {
        DensitySpec::Cauchy { center, gamma } => {
            let t = x - center;
            gamma / (PI * (t * t + gamma * gamma))
        }
        DensitySpec::SpecialAlphaBeta { alpha, beta } => {
            let c = 1.0 - alpha;
            (beta * c).sqrt() / (PI * (x * x * c + beta))
        }
        DensitySpec::GaussDensity => {
            if !(0.0..=1.0).contains(&x) {
                return Err(Error::Domain { map: "gauss_density", x });
            }
            1.0 / (LN_2 * (1.0 + x))
        }
        DensitySpec::LebesgueUnit => 1.0,
        DensitySpec::QuasiMeasure { omega_bar, k } => {
            let z = omega_bar - x;
            if z.norm() == 0.0 {
                return Err(Error::PoleProximity { x, pole: omega_bar.re });
            }
            (k / z).im
        }
        DensitySpec::Grid { points, values } => grid_eval(points, values, x),
    })
}

fn grid_eval(points: &[f64], values: &[f64], x: f64) -> f64 {
    let n = points.len();
    if x < points[0] || x > points[n - 1] {
        return 0.0;
    }
    let i = points.partition_point(|&p| p <= x).clamp(1, n - 1);
    let (x0, x1) = (points[i - 1], points[i]);
    let t = (x - x0) / (x1 - x0);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Exact integral of the piecewise-linear interpolant over `[lo, hi]`.
fn grid_integral(points: &[f64], values: &[f64], lo: f64, hi: f64) -> f64 {
    let a = lo.max(points[0]);
    let b = hi.min(points[points.len() - 1]);
    if !(a < b) {
        return 0.0;
    }
    let mut total = 0.0;
    for i in 1..points.len() {
        let s = points[i - 1].max(a);
        let e = points[i].min(b);
        if s < e {
            total += 0.5 * (e - s) * (grid_eval(points, values, s) + grid_eval(points, values, e));
        }
    }
    total
}

fn arg_shift(omega: Complex64, x: f64) -> f64 {
    // arg(omega - x): 0 at x = -inf, +-pi at x = +inf
    if x == f64::INFINITY {
        PI.copysign(omega.im)
    } else if x == f64::NEG_INFINITY {
        0.0
    } else {
        (omega - x).arg()
    }
}

/// `mu([lo, hi])` in closed form; endpoints may be infinite where the
/// variant allows it.
pub fn density_integral(d: &DensitySpec, lo: f64, hi: f64) -> Result<f64> {
    if lo.is_nan() || hi.is_nan() || lo > hi {
        return Err(invalid("interval must satisfy lo <= hi"));
    }
    Ok(match d {
        DensitySpec::Cauchy { center, gamma } => {
            (((hi - center) / gamma).atan() - ((lo - center) / gamma).atan()) / PI
        }
        DensitySpec::SpecialAlphaBeta { alpha, beta } => {
            let v = (beta / (1.0 - alpha)).sqrt();
            ((hi / v).atan() - (lo / v).atan()) / PI
        }
        DensitySpec::GaussDensity => {
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::Domain { map: "gauss_density", x: if lo < 0.0 { lo } else { hi } });
            }
            ((1.0 + hi) / (1.0 + lo)).ln() / LN_2
        }
        DensitySpec::LebesgueUnit => hi - lo,
        DensitySpec::QuasiMeasure { omega_bar, k } => {
            if omega_bar.im == 0.0 {
                if k.im == 0.0 {
                    return Ok(0.0);
                }
                return Err(invalid("quasi-measure with real pole and complex k is not integrable"));
            }
            // Im[-k log(omega_bar - x)] between the endpoints; the log never
            // crosses its cut since omega_bar is off the real axis
            let darg = arg_shift(*omega_bar, hi) - arg_shift(*omega_bar, lo);
            let dlog = if k.im == 0.0 {
                0.0
            } else if lo.is_infinite() || hi.is_infinite() {
                return Err(invalid("quasi-measure with complex k diverges on unbounded intervals"));
            } else {
                ((*omega_bar - hi).norm() / (*omega_bar - lo).norm()).ln()
            };
            -(k.re * darg + k.im * dlog)
        }
        DensitySpec::Grid { points, values } => grid_integral(points, values, lo, hi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum ErgodicityClass {
    FiniteErgodic,
    InfiniteErgodicLebesgue,
    TotallyDissipative,
    Degenerate,
}

/// Classification by `(alpha, a)` and, for `alpha != 1`, by the presence of
/// an upper half-plane fixed point.
pub fn classify_ergodicity(map: &BooleMap1D) -> ErgodicityClass {
    if map.alpha() == 1.0 {
        return if map.a() == 0.0 {
            ErgodicityClass::InfiniteErgodicLebesgue
        } else {
            ErgodicityClass::TotallyDissipative
        };
    }
    match map.complex_fixed_points() {
        Ok(fp) if !fp.upper.is_empty() => ErgodicityClass::FiniteErgodic,
        _ => ErgodicityClass::Degenerate,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QuasiMeasureCandidate {
    /// Probability density from a fixed point with positive imaginary part.
    Invariant { fixed_point: Complex64, density: DensitySpec },
    /// Real fixed point; the quasi-measure vanishes identically.
    Degenerate { fixed_point: f64 },
}

/// One candidate per fixed point: a Poisson kernel for each upper half-plane
/// root, a degenerate marker for each real root. Lower half-plane conjugates
/// are skipped.
pub fn quasi_measure_from_fixed_point(map: &BooleMap1D) -> Result<Vec<QuasiMeasureCandidate>> {
    let fp = match map.complex_fixed_points() {
        Ok(fp) => fp,
        Err(Error::DegenerateEquation) => return Ok(Vec::new()),
        Err(e) => return Err(e),
    };
    let mut out = Vec::new();
    for z in &fp.roots {
        if z.im == 0.0 {
            out.push(QuasiMeasureCandidate::Degenerate { fixed_point: z.re });
        } else if fp.upper.contains(z) {
            out.push(QuasiMeasureCandidate::Invariant {
                fixed_point: *z,
                density: DensitySpec::poisson(*z),
            });
        }
    }
    Ok(out)
}

#[cfg(feature = "serde")]
mod repr {
    use super::*;
    use alloc::string::{String, ToString};

    #[derive(serde::Deserialize)]
    #[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
    pub enum DensityRepr {
        Cauchy { center: f64, gamma: f64 },
        SpecialAlphaBeta { alpha: f64, beta: f64 },
        GaussDensity {},
        LebesgueUnit {},
        QuasiMeasure { omega_bar: Complex64, k: Complex64 },
        Grid { points: Vec<f64>, values: Vec<f64> },
    }

    impl TryFrom<DensityRepr> for DensitySpec {
        type Error = String;

        fn try_from(r: DensityRepr) -> core::result::Result<Self, String> {
            let d = match r {
                DensityRepr::Cauchy { center, gamma } => DensitySpec::Cauchy { center, gamma },
                DensityRepr::SpecialAlphaBeta { alpha, beta } => DensitySpec::SpecialAlphaBeta { alpha, beta },
                DensityRepr::GaussDensity {} => DensitySpec::GaussDensity,
                DensityRepr::LebesgueUnit {} => DensitySpec::LebesgueUnit,
                DensityRepr::QuasiMeasure { omega_bar, k } => DensitySpec::QuasiMeasure { omega_bar, k },
                DensityRepr::Grid { points, values } => DensitySpec::Grid { points, values },
            };
            d.validate().map_err(|e| e.to_string())?;
            Ok(d)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate, QuadOptions};
    use alloc::vec;

    #[test]
    fn eval_examples() {
        let c = DensitySpec::cauchy(0.0, 1.0).unwrap();
        assert!((density_eval(&c, 0.0).unwrap() - 1.0 / PI).abs() < 1e-16);
        assert!((density_eval(&DensitySpec::GaussDensity, 0.0).unwrap() - core::f64::consts::LOG2_E).abs() < 1e-15);
        let q = DensitySpec::poisson(Complex64::new(0.0, 1.0));
        assert!((density_eval(&q, 0.0).unwrap() - 1.0 / PI).abs() < 1e-16);
        assert!(density_eval(&DensitySpec::GaussDensity, 1.5).is_err());
    }

    #[test]
    fn integral_examples() {
        let c = DensitySpec::cauchy(0.0, 1.0).unwrap();
        assert!((density_integral(&c, f64::NEG_INFINITY, f64::INFINITY).unwrap() - 1.0).abs() < 1e-15);
        assert!((density_integral(&c, 0.0, f64::INFINITY).unwrap() - 0.5).abs() < 1e-15);
        assert!((density_integral(&DensitySpec::GaussDensity, 0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn poisson_kernel_integral_matches_quadrature() {
        let q = DensitySpec::poisson(Complex64::new(1.5, 0.3));
        let exact = density_integral(&q, -2.0, 4.0).unwrap();
        let num = integrate(|x| density_eval(&q, x).unwrap(), -2.0, 4.0, &QuadOptions::default());
        assert!((exact - num.value).abs() < 1e-12);
        let full = density_integral(&q, f64::NEG_INFINITY, f64::INFINITY).unwrap();
        assert!((full - 1.0).abs() < 1e-15);
    }

    #[test]
    fn complex_k_integral_matches_quadrature() {
        let q = DensitySpec::QuasiMeasure {
            omega_bar: Complex64::new(-0.5, 0.8),
            k: Complex64::new(0.3, -1.2),
        };
        let exact = density_integral(&q, -3.0, 2.0).unwrap();
        let num = integrate(|x| density_eval(&q, x).unwrap(), -3.0, 2.0, &QuadOptions::default());
        assert!((exact - num.value).abs() < 1e-12, "{exact} {}", num.value);
    }

    #[test]
    fn grid_density() {
        let g = DensitySpec::grid(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0]).unwrap();
        assert_eq!(density_eval(&g, 0.5).unwrap(), 1.0);
        assert_eq!(density_eval(&g, 3.0).unwrap(), 0.0);
        assert!((g.total_mass().unwrap() - 2.0).abs() < 1e-15);
        assert!((density_integral(&g, 0.5, 1.5).unwrap() - 1.5).abs() < 1e-15);
        assert!(DensitySpec::grid(vec![0.0, 1.0], vec![-1.0, 1.0]).is_err());
    }

    #[test]
    fn classification_examples() {
        assert_eq!(
            classify_ergodicity(&BooleMap1D::classical()),
            ErgodicityClass::InfiniteErgodicLebesgue
        );
        let m = BooleMap1D::single(1.0, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(classify_ergodicity(&m), ErgodicityClass::TotallyDissipative);
        let m = BooleMap1D::single(0.3, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(classify_ergodicity(&m), ErgodicityClass::FiniteErgodic);
        let m = BooleMap1D::single(2.0, 0.0, 1.0, 0.0).unwrap();
        assert_eq!(classify_ergodicity(&m), ErgodicityClass::Degenerate);
    }

    #[test]
    fn quasi_measure_special_boole() {
        let m = BooleMap1D::single(0.5, 0.0, 0.5, 0.0).unwrap();
        let c = quasi_measure_from_fixed_point(&m).unwrap();
        assert_eq!(c.len(), 1);
        match &c[0] {
            QuasiMeasureCandidate::Invariant { fixed_point, density } => {
                assert!((fixed_point - Complex64::new(0.0, 1.0)).norm() < 1e-14);
                for x in [-3.0, 0.0, 0.4, 10.0] {
                    let want = 1.0 / (PI * (1.0 + x * x));
                    assert!((density_eval(density, x).unwrap() - want).abs() < 1e-15);
                }
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quasi_measure_degenerate_for_shifted_unit_slope() {
        let m = BooleMap1D::single(1.0, 1.0, 1.0, 0.0).unwrap();
        let c = quasi_measure_from_fixed_point(&m).unwrap();
        assert_eq!(c, vec![QuasiMeasureCandidate::Degenerate { fixed_point: 1.0 }]);
    }
}
