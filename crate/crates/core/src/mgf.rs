//! Measure generating functions `sum_k lambda^k mu(phi^{-k} A)` on `[0, 1]`,
//! Schur averages, Abel limits, the Poisson-kernel form for atomic spectral
//! measures, and the tent-map series expansions.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::TAU;

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::maps1d::Map1D;

/// Interval count above which branch enumeration gives up.
pub const MAX_BRANCHES: usize = 1_000_000;

/// Largest truncation index accepted by the enumeration path.
pub const MAX_ENUMERATION_DEPTH: usize = 64;

/// Tail-bound target used to size the Abel truncation.
pub const ABEL_TAIL: f64 = 1e-6;

/// Abel schedule `lambda_m = 1 - 2^-m`, `m = 2..=8`.
pub fn abel_schedule() -> Vec<f64> {
    (2..=8).map(|m| 1.0 - 0.5f64.powi(m)).collect()
}

/// A normalized measure on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "variant", rename_all = "snake_case")
)]
pub enum BaseMeasure {
    LebesgueOn01,
    /// Piecewise-linear density through `(points[i], values[i])`, with
    /// `points` running from 0 to 1.
    DensityOn01 { points: Vec<f64>, values: Vec<f64> },
}

impl BaseMeasure {
    pub fn density(points: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let b = BaseMeasure::DensityOn01 { points, values };
        b.validate()?;
        Ok(b)
    }

    /// The density `2x`.
    pub fn linear_ramp() -> Self {
        BaseMeasure::DensityOn01 {
            points: vec![0.0, 1.0],
            values: vec![0.0, 2.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let BaseMeasure::DensityOn01 { points, values } = self {
            if points.len() < 2 || points.len() != values.len() {
                return Err(invalid("density needs at least two nodes and matching values"));
            }
            if points[0] != 0.0 || points[points.len() - 1] != 1.0 {
                return Err(invalid("density nodes must run from 0 to 1"));
            }
            if points.windows(2).any(|w| !(w[1] > w[0])) {
                return Err(invalid("density nodes must be strictly increasing"));
            }
            if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(invalid("density values must be finite and nonnegative"));
            }
            if (self.measure(&[(0.0, 1.0)]) - 1.0).abs() > 1e-10 {
                return Err(invalid("base measure must have total mass 1"));
            }
        }
        Ok(())
    }

    fn eval(&self, x: f64) -> f64 {
        match self {
            BaseMeasure::LebesgueOn01 => 1.0,
            BaseMeasure::DensityOn01 { points, values } => interp(points, values, x),
        }
    }

    fn interval(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if !(lo < hi) {
            return 0.0;
        }
        match self {
            BaseMeasure::LebesgueOn01 => hi - lo,
            BaseMeasure::DensityOn01 { points, .. } => {
                let mut total = 0.0;
                for w in points.windows(2) {
                    let (s, e) = (w[0].max(lo), w[1].min(hi));
                    if s < e {
                        total += 0.5 * (e - s) * (self.eval(s) + self.eval(e));
                    }
                }
                total
            }
        }
    }

    /// `mu` of a union of disjoint intervals.
    pub fn measure(&self, set: &[(f64, f64)]) -> f64 {
        set.iter().map(|&(lo, hi)| self.interval(lo, hi)).sum()
    }

    /// Nodes as a uniform grid `i/m`, when they are one.
    fn uniform_grid(&self) -> Option<UniformGrid> {
        match self {
            BaseMeasure::LebesgueOn01 => Some(UniformGrid { values: vec![1.0, 1.0] }),
            BaseMeasure::DensityOn01 { points, values } => {
                let m = (points.len() - 1) as f64;
                let uniform = points
                    .iter()
                    .enumerate()
                    .all(|(i, &p)| (p - i as f64 / m).abs() <= 1e-14);
                uniform.then(|| UniformGrid { values: values.clone() })
            }
        }
    }
}

fn interp(points: &[f64], values: &[f64], x: f64) -> f64 {
    let n = points.len();
    if x < points[0] || x > points[n - 1] {
        return 0.0;
    }
    let i = points.partition_point(|&p| p <= x).clamp(1, n - 1);
    let t = (x - points[i - 1]) / (points[i] - points[i - 1]);
    values[i - 1] + t * (values[i] - values[i - 1])
}

/// Piecewise-linear density on the nodes `i/m`. For the doubling and tent
/// maps the transfer operator sends such densities to densities on the same
/// nodes, so it acts exactly on the node values.
#[derive(Debug, Clone)]
struct UniformGrid {
    values: Vec<f64>,
}

impl UniformGrid {
    fn cells(&self) -> usize {
        self.values.len() - 1
    }

    fn eval(&self, x: f64) -> f64 {
        let m = self.cells();
        let t = x * m as f64;
        let i = (t as usize).min(m - 1);
        let f = t - i as f64;
        self.values[i] + f * (self.values[i + 1] - self.values[i])
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = (lo.max(0.0), hi.min(1.0));
        if !(lo < hi) {
            return 0.0;
        }
        let m = self.cells() as f64;
        let first = (lo * m) as usize;
        let last = ((hi * m).ceil() as usize).min(self.cells());
        let mut total = 0.0;
        for i in first..last {
            let (s, e) = ((i as f64 / m).max(lo), ((i + 1) as f64 / m).min(hi));
            if s < e {
                total += 0.5 * (e - s) * (self.eval(s) + self.eval(e));
            }
        }
        total
    }

    fn measure(&self, set: &[(f64, f64)]) -> f64 {
        set.iter().map(|&(lo, hi)| self.integral(lo, hi)).sum()
    }

    fn transfer(&self, map: &Map1D) -> UniformGrid {
        let m = self.cells() as f64;
        let values = (0..=self.cells())
            .map(|i| {
                let x = i as f64 / m;
                match map {
                    Map1D::Doubling => 0.5 * (self.eval(0.5 * x) + self.eval(0.5 * (x + 1.0))),
                    Map1D::Baker => 0.5 * (self.eval(0.5 * x) + self.eval(1.0 - 0.5 * x)),
                    _ => unreachable!("grid transfer is only used for doubling and baker"),
                }
            })
            .collect();
        UniformGrid { values }
    }
}

fn check_set(set: &[(f64, f64)]) -> Result<()> {
    for &(lo, hi) in set {
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || !(lo < hi) {
            return Err(invalid("set intervals must satisfy 0 <= lo < hi <= 1"));
        }
    }
    Ok(())
}

fn check_map(map: &Map1D) -> Result<()> {
    match map {
        Map1D::Doubling | Map1D::Baker | Map1D::Gauss => Ok(()),
        other => Err(Error::UnsupportedMap(other.name())),
    }
}

/// `phi^{-1}` of a union of intervals.
pub fn preimage_set(map: &Map1D, set: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for &(lo, hi) in set {
        out.extend(map.interval_preimage(lo, hi)?);
    }
    out.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(core::cmp::Ordering::Equal));
    Ok(out)
}

/// `mu(phi^{-k} A)` by explicit enumeration of the preimage intervals.
pub fn pullback_measure_enumerated(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], k: usize) -> Result<f64> {
    check_map(map)?;
    check_set(set)?;
    if k > MAX_ENUMERATION_DEPTH {
        return Err(invalid("enumeration depth is limited to 64"));
    }
    let mut cur = set.to_vec();
    for _ in 0..k {
        let branches = match map {
            Map1D::Gauss => crate::maps1d::GAUSS_MAX_BRANCHES,
            _ => 2,
        };
        let count = cur.len().saturating_mul(branches);
        if count > MAX_BRANCHES {
            return Err(Error::BranchExplosion {
                count,
                limit: MAX_BRANCHES,
            });
        }
        cur = preimage_set(map, &cur)?;
    }
    Ok(base.measure(&cur))
}

/// `mu(phi^{-k} A)` for `k = 0..n`.
///
/// Doubling and tent maps with Lebesgue or uniform-grid densities use the
/// exact transfer-operator action `mu(phi^{-k} A) = int_A T^k rho`; other
/// cases enumerate preimage intervals.
pub fn pullback_sequence(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], n: usize) -> Result<Vec<f64>> {
    check_map(map)?;
    check_set(set)?;
    base.validate()?;
    match (map, base.uniform_grid()) {
        (Map1D::Doubling | Map1D::Baker, Some(mut g)) => {
            let mut out = Vec::with_capacity(n);
            for k in 0..n {
                if k > 0 {
                    g = g.transfer(map);
                }
                out.push(g.measure(set));
            }
            Ok(out)
        }
        _ => {
            let mut out = Vec::with_capacity(n);
            let mut cur = set.to_vec();
            for k in 0..n {
                if k > 0 {
                    let count = cur.len().saturating_mul(match map {
                        Map1D::Gauss => crate::maps1d::GAUSS_MAX_BRANCHES,
                        _ => 2,
                    });
                    if count > MAX_BRANCHES {
                        return Err(Error::BranchExplosion {
                            count,
                            limit: MAX_BRANCHES,
                        });
                    }
                    cur = preimage_set(map, &cur)?;
                }
                out.push(base.measure(&cur));
            }
            Ok(out)
        }
    }
}

/// `mu(phi^{-k} A)`.
pub fn pullback_measure(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], k: usize) -> Result<f64> {
    Ok(pullback_sequence(map, base, set, k + 1)?[k])
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Truncated {
    pub value: f64,
    /// Bound on the neglected tail.
    pub tail_bound: f64,
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.abs() < 1.0) {
        return Err(invalid("|lambda| must be below 1"));
    }
    Ok(())
}

/// `|lambda|^n / (1 - |lambda|)`: the measures of preimages never exceed the
/// total mass 1.
pub fn tail_bound(lambda: f64, n: usize) -> f64 {
    lambda.abs().powi(n as i32) / (1.0 - lambda.abs())
}

fn series(seq: &[f64], lambda: f64) -> f64 {
    // Horner keeps the partial sums consistent across n
    seq.iter().rev().fold(0.0, |acc, &m| acc * lambda + m)
}

/// `sum_{k<n} lambda^k mu(phi^{-k} A)`.
pub fn mgf_partial(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], lambda: f64, n: usize) -> Result<Truncated> {
    check_lambda(lambda)?;
    let seq = pullback_sequence(map, base, set, n)?;
    Ok(Truncated {
        value: series(&seq, lambda),
        tail_bound: tail_bound(lambda, n),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Residual {
    pub residual: f64,
    pub bound: f64,
}

impl Residual {
    pub fn within_bound(&self) -> bool {
        self.residual <= self.bound
    }
}

/// `|F(A) - lambda F(phi^{-1} A) - mu(A)|` with both generating functions
/// truncated at `n` terms; `phi^{-1} A` is enumerated independently of the
/// pullback engine. The bound is the truncation error `|lambda|^n` plus
/// rounding slack.
pub fn check_functional_equation(
    map: &Map1D,
    base: &BaseMeasure,
    set: &[(f64, f64)],
    lambda: f64,
    n: usize,
) -> Result<Residual> {
    check_lambda(lambda)?;
    let lhs = mgf_partial(map, base, set, lambda, n)?.value;
    let pre = preimage_set(map, set)?;
    let shifted = mgf_partial(map, base, &pre, lambda, n)?.value;
    let mu = base.measure(set);
    Ok(Residual {
        residual: (lhs - lambda * shifted - mu).abs(),
        bound: lambda.abs().powi(n as i32) + 1e-14 * (1.0 + lhs.abs()),
    })
}

/// Generating function at `lambda = s` of `mu_s = mu - s mu o phi^{-1}`,
/// compared against `mu(A)`. Returns the residual and the tail `|s|^n`.
pub fn modified_measure_identity(
    map: &Map1D,
    base: &BaseMeasure,
    set: &[(f64, f64)],
    s: f64,
    n: usize,
) -> Result<Residual> {
    check_lambda(s)?;
    let seq = pullback_sequence(map, base, set, n + 1)?;
    let modified: Vec<f64> = (0..n).map(|k| seq[k] - s * seq[k + 1]).collect();
    let value = series(&modified, s);
    Ok(Residual {
        residual: (value - base.measure(set)).abs(),
        bound: s.abs().powi(n as i32) + 1e-14,
    })
}

/// `(1/n) sum_{k<n} mu(phi^{-k} A)`.
pub fn schur_average(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let seq = pullback_sequence(map, base, set, n)?;
    Ok(seq.iter().sum::<f64>() / n as f64)
}

/// Residual of `S_n(phi^{-1} A) = ((n+1)/n) S_{n+1}(A) - mu(A)/n`, with the
/// left side computed from the enumerated preimage set.
pub fn schur_identity_residual(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], n: usize) -> Result<f64> {
    let pre = preimage_set(map, set)?;
    let lhs = schur_average(map, base, &pre, n)?;
    let rhs = (n as f64 + 1.0) / n as f64 * schur_average(map, base, set, n + 1)? - base.measure(set) / n as f64;
    Ok((lhs - rhs).abs())
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AbelEstimate {
    /// `(lambda_m, (1 - lambda_m) F(lambda_m))`.
    pub sequence: Vec<(f64, f64)>,
    /// Truncation used at each `lambda_m`.
    pub terms: Vec<usize>,
    /// Richardson extrapolation of the sequence to `lambda = 1`.
    pub limit: f64,
}

/// Repeated Richardson extrapolation for samples at `h, h/2, h/4, ...`
/// of a function smooth in `h`.
pub fn richardson(values: &[f64]) -> f64 {
    let mut table = values.to_vec();
    let mut factor = 1.0;
    for level in 1..table.len() {
        factor *= 2.0;
        for i in (level..table.len()).rev() {
            table[i] = table[i] + (table[i] - table[i - 1]) / (factor - 1.0);
        }
    }
    table.last().copied().unwrap_or(f64::NAN)
}

/// Terms needed for the tail bound at `lambda` to drop below `tol`.
pub fn terms_for_tail(lambda: f64, tol: f64) -> usize {
    let l = lambda.abs();
    if l == 0.0 {
        return 1;
    }
    let n = ((tol * (1.0 - l)).ln() / l.ln()).ceil();
    (n.max(1.0)) as usize
}

/// `lim_{lambda -> 1} (1 - lambda) F(lambda)` along [`abel_schedule`].
pub fn abel_limit(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)]) -> Result<AbelEstimate> {
    let lambdas = abel_schedule();
    let terms: Vec<usize> = lambdas.iter().map(|&l| terms_for_tail(l, ABEL_TAIL)).collect();
    let n_max = terms.iter().copied().max().unwrap_or(1);
    let seq = pullback_sequence(map, base, set, n_max)?;
    let sequence: Vec<(f64, f64)> = lambdas
        .iter()
        .zip(&terms)
        .map(|(&l, &n)| (l, (1.0 - l) * series(&seq[..n], l)))
        .collect();
    let limit = richardson(&sequence.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(AbelEstimate { sequence, terms, limit })
}

/// Atomic spectral measure: `(s, mass)` with `s` in `[0, 2 pi]`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StieltjesAtoms {
    pub atoms: Vec<(f64, f64)>,
}

impl StieltjesAtoms {
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms
            .iter()
            .any(|&(s, m)| !(0.0..=TAU).contains(&s) || !(m >= 0.0 && m.is_finite()))
        {
            return Err(invalid("atoms need s in [0, 2pi] and nonnegative mass"));
        }
        Ok(StieltjesAtoms { atoms })
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }
}

/// `sum_atoms mass (1 - lambda^2) / (1 - 2 lambda cos s + lambda^2)`.
pub fn poisson_mgf(atoms: &StieltjesAtoms, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(atoms
        .atoms
        .iter()
        .map(|&(s, m)| m * (1.0 - lambda * lambda) / (1.0 - 2.0 * lambda * s.cos() + lambda * lambda))
        .sum())
}

/// Abel limit of [`poisson_mgf`] along [`abel_schedule`].
pub fn poisson_abel_limit(atoms: &StieltjesAtoms) -> Result<AbelEstimate> {
    let lambdas = abel_schedule();
    let sequence = lambdas
        .iter()
        .map(|&l| Ok((l, (1.0 - l) * poisson_mgf(atoms, l)?)))
        .collect::<Result<Vec<_>>>()?;
    let limit = richardson(&sequence.iter().map(|p| p.1).collect::<Vec<_>>());
    Ok(AbelEstimate {
        terms: vec![0; sequence.len()],
        sequence,
        limit,
    })
}

fn tent(x: f64) -> f64 {
    if x < 0.5 {
        2.0 * x
    } else {
        2.0 * (1.0 - x)
    }
}

fn check_unit(x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Domain { map: "baker", x });
    }
    Ok(())
}

/// `(sum_n s^n phi^n(x), sum_n s^n phi^n(x)^2)` over the tent-map orbit.
pub fn baker_sums(x: f64, s: f64, n_terms: usize) -> Result<(f64, f64)> {
    check_unit(x)?;
    check_lambda(s)?;
    let (mut lin, mut quad, mut w, mut y) = (0.0, 0.0, 1.0, x);
    for _ in 0..n_terms {
        lin += w * y;
        quad += w * y * y;
        w *= s;
        y = tent(y);
    }
    Ok((lin, quad))
}

/// `(2 - 4s) sum s^n phi^n(x) + (4s - 1) sum s^n phi^n(x)^2`.
pub fn baker_expansion(x: f64, s: f64, n_terms: usize) -> Result<Truncated> {
    let (lin, quad) = baker_sums(x, s, n_terms)?;
    let c1 = 2.0 - 4.0 * s;
    let c2 = 4.0 * s - 1.0;
    Ok(Truncated {
        value: c1 * lin + c2 * quad,
        tail_bound: (c1.abs() + c2.abs()) * tail_bound(s, n_terms),
    })
}

/// `sum_{n < n_terms} 2^-n phi^n(x)`.
pub fn takagi_sum(x: f64, n_terms: usize) -> Result<Truncated> {
    let (lin, _) = baker_sums(x, 0.5, n_terms)?;
    Ok(Truncated {
        value: lin,
        tail_bound: tail_bound(0.5, n_terms),
    })
}

/// `2x - x^2`
pub fn baker_target(x: f64) -> f64 {
    2.0 * x - x * x
}

/// True when `x` is `j / 2^e` for some `e <= 20`.
pub fn is_low_dyadic(x: f64) -> bool {
    let y = x * (1u64 << 20) as f64;
    y == y.round()
}

/// Summary of a generating-function run.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MgfRecord {
    pub map: String,
    pub set: Vec<(f64, f64)>,
    pub lambda: f64,
    pub n: usize,
    pub partial_sum: f64,
    pub tail_bound: f64,
    /// Schur averages `S_1, ..., S_n`.
    pub schur: Vec<f64>,
    pub abel_estimates: Vec<(f64, f64)>,
    pub abel_limit: f64,
}

pub fn mgf_record(map: &Map1D, base: &BaseMeasure, set: &[(f64, f64)], lambda: f64, n: usize) -> Result<MgfRecord> {
    check_lambda(lambda)?;
    if n == 0 {
        return Err(invalid("n must be positive"));
    }
    let seq = pullback_sequence(map, base, set, n)?;
    let mut running = 0.0;
    let schur = seq
        .iter()
        .enumerate()
        .map(|(k, m)| {
            running += m;
            running / (k + 1) as f64
        })
        .collect();
    let abel = abel_limit(map, base, set)?;
    Ok(MgfRecord {
        map: String::from(map.name()),
        set: set.to_vec(),
        lambda,
        n,
        partial_sum: series(&seq, lambda),
        tail_bound: tail_bound(lambda, n),
        schur,
        abel_estimates: abel.sequence,
        abel_limit: abel.limit,
    })
}
