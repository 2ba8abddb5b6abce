//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Infinite endpoints are handled by the substitution `x = c + s tan(t)`.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
    /// Center of the tangent substitution used for infinite endpoints.
    pub center: f64,
    /// Scale of the tangent substitution used for infinite endpoints.
    pub scale: f64,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_segments: 4000,
            center: 0.0,
            scale: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Copy)]
struct Segment {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, lo: f64, hi: f64) -> Segment {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let s = f(center - dx) + f(center + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    let value = resk * half;
    let error = ((resk - resg) * half).abs();
    Segment { lo, hi, value, error }
}

/// Integrate `f` over `[lo, hi]`. Either endpoint may be infinite.
pub fn integrate<F: FnMut(f64) -> f64>(f: F, lo: f64, hi: f64, opts: &QuadOptions) -> QuadResult {
    integrate_with_breaks(f, &[lo, hi], opts)
}

/// Integrate over consecutive pieces `[points[i], points[i+1]]`. Breakpoints
/// let the caller isolate discontinuities. `points` must be sorted; the
/// first and last entries may be infinite.
pub fn integrate_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    points: &[f64],
    opts: &QuadOptions,
) -> QuadResult {
    assert!(points.len() >= 2, "need at least two points");
    let infinite = points[0].is_infinite() || points[points.len() - 1].is_infinite();
    if !infinite {
        return adapt(&mut f, points, opts);
    }
    let (c, s) = (opts.center, opts.scale);
    let to_t = |x: f64| -> f64 {
        if x == f64::INFINITY {
            FRAC_PI_2
        } else if x == f64::NEG_INFINITY {
            -FRAC_PI_2
        } else {
            ((x - c) / s).atan()
        }
    };
    let ts: Vec<f64> = points.iter().map(|&x| to_t(x)).collect();
    let mut g = |t: f64| -> f64 {
        let ct = t.cos();
        if ct == 0.0 {
            return 0.0;
        }
        let x = c + s * t.tan();
        f(x) * s / (ct * ct)
    };
    adapt(&mut g, &ts, opts)
}

fn adapt<F: FnMut(f64) -> f64>(f: &mut F, points: &[f64], opts: &QuadOptions) -> QuadResult {
    let mut segs: Vec<Segment> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| kronrod(f, w[0], w[1]))
        .collect();
    loop {
        let value: f64 = segs.iter().map(|s| s.value).sum();
        let error: f64 = segs.iter().map(|s| s.error).sum();
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target || segs.len() >= opts.max_segments || segs.is_empty() {
            return QuadResult { value, error };
        }
        let (worst, _) = segs
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, s)| if s.error > acc.1 { (i, s.error) } else { acc });
        let s = segs.swap_remove(worst);
        let mid = 0.5 * (s.lo + s.hi);
        if mid <= s.lo || mid >= s.hi {
            // interval cannot be split further in floating point
            segs.push(Segment { error: 0.0, ..s });
            continue;
        }
        segs.push(kronrod(f, s.lo, mid));
        segs.push(kronrod(f, mid, s.hi));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{LN_2, PI};

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 2.0, &QuadOptions::default());
        assert!((r.value - 0.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_density_normalizes() {
        let r = integrate(|x| 1.0 / (LN_2 * (1.0 + x)), 0.0, 1.0, &QuadOptions::default());
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn cauchy_over_line() {
        let r = integrate(
            |x| 1.0 / (PI * (1.0 + x * x)),
            f64::NEG_INFINITY,
            f64::INFINITY,
            &QuadOptions::default(),
        );
        assert!((r.value - 1.0).abs() < 1e-12, "{r:?}");
    }

    #[test]
    fn jump_isolated_by_breakpoint() {
        let f = |x: f64| if x < 0.3 { 1.0 } else { 2.0 };
        let r = integrate_with_breaks(f, &[0.0, 0.3, 1.0], &QuadOptions::default());
        assert!((r.value - 1.7).abs() < 1e-14);
    }
}
