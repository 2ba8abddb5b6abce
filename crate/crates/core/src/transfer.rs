//! Frobenius–Perron operator, invariant-density verification and Ulam's
//! method.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::maps1d::{Domain, Map1D, GAUSS_MAX_BRANCHES};
use crate::measures::{density_eval, DensitySpec};

/// Anything that can be evaluated as a density on the real line.
pub trait Density {
    fn density(&self, x: f64) -> Result<f64>;
}

impl Density for DensitySpec {
    fn density(&self, x: f64) -> Result<f64> {
        density_eval(self, x)
    }
}

impl<F: Fn(f64) -> f64> Density for F {
    fn density(&self, x: f64) -> Result<f64> {
        Ok(self(x))
    }
}

/// `(T rho)(x) = sum_j rho(y_j) / |phi'(y_j)|` over the preimages `y_j` of `x`.
///
/// For the Gauss map the branches beyond [`GAUSS_MAX_BRANCHES`] are replaced
/// by the midpoint estimate `w rho(w/2)`, `w = 1/(K + 1/2 + x)`, of the
/// mass they carry.
pub fn apply_fp<D: Density + ?Sized>(map: &Map1D, rho: &D, x: f64) -> Result<f64> {
    let pre = map.preimages(x)?;
    let mut total = 0.0;
    for b in &pre.branches {
        total += rho.density(b.y)? * b.weight.abs();
    }
    if let Map1D::Gauss = map {
        let w = 1.0 / (GAUSS_MAX_BRANCHES as f64 + 0.5 + x);
        total += w * rho.density(0.5 * w)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InvarianceReport {
    pub max_abs_residual: f64,
    pub max_rel_residual: f64,
    /// Grid point with the largest relative residual.
    pub worst_x: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compare `T rho` with `rho` on `grid`; passes iff the largest relative
/// residual is at most `tol`.
pub fn verify_invariant_density<D: Density + ?Sized>(
    map: &Map1D,
    rho: &D,
    grid: &[f64],
    tol: f64,
) -> Result<InvarianceReport> {
    if grid.is_empty() {
        return Err(invalid("grid must be nonempty"));
    }
    let mut max_abs: f64 = 0.0;
    let mut max_rel: f64 = 0.0;
    let mut worst_x = grid[0];
    for &x in grid {
        let lhs = apply_fp(map, rho, x)?;
        let r = rho.density(x)?;
        let abs = (lhs - r).abs();
        max_abs = max_abs.max(abs);
        let rel = if r.abs() > 1e-300 { abs / r.abs() } else { abs };
        if rel > max_rel || rel.is_nan() {
            max_rel = rel;
            worst_x = x;
        }
    }
    Ok(InvarianceReport {
        max_abs_residual: max_abs,
        max_rel_residual: max_rel,
        worst_x,
        tol,
        pass: max_rel <= tol,
    })
}

/// `n` equally spaced points covering `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..n)
            .map(|i| lo + (hi - lo) * (i as f64) / ((n - 1) as f64))
            .collect(),
    }
}

/// Cell layout for Ulam's method.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum UlamPartition {
    /// `m` uniform cells on `[-half_width, half_width]` plus the tail cells
    /// `(-inf, -half_width)` (index 0) and `(half_width, inf)` (index `m+1`).
    Line { half_width: f64, m: usize },
    /// `m` uniform cells on `[0, 1]`.
    Unit { m: usize },
}

impl UlamPartition {
    pub fn line(half_width: f64, m: usize) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid("half width must be positive"));
        }
        if m < 2 {
            return Err(invalid("need at least two interior cells"));
        }
        Ok(UlamPartition::Line { half_width, m })
    }

    pub fn unit(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(invalid("need at least two cells"));
        }
        Ok(UlamPartition::Unit { m })
    }

    /// Partition matching the domain of `map`.
    pub fn for_map(map: &Map1D, half_width: f64, m: usize) -> Result<Self> {
        match map.domain() {
            Domain::Line => UlamPartition::line(half_width, m),
            Domain::UnitInterval => UlamPartition::unit(m),
        }
    }

    pub fn interior_cells(&self) -> usize {
        match *self {
            UlamPartition::Line { m, .. } | UlamPartition::Unit { m } => m,
        }
    }

    pub fn len(&self) -> usize {
        match *self {
            UlamPartition::Line { m, .. } => m + 2,
            UlamPartition::Unit { m } => m,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn bounds(&self) -> (f64, f64) {
        match *self {
            UlamPartition::Line { half_width, .. } => (-half_width, half_width),
            UlamPartition::Unit { .. } => (0.0, 1.0),
        }
    }

    pub fn cell_width(&self) -> f64 {
        let (lo, hi) = self.bounds();
        (hi - lo) / self.interior_cells() as f64
    }

    pub fn has_tails(&self) -> bool {
        matches!(self, UlamPartition::Line { .. })
    }

    /// Finite cells as `(index, lo, hi)`.
    pub fn finite_cells(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        let (lo, _) = self.bounds();
        let w = self.cell_width();
        let offset = usize::from(self.has_tails());
        (0..self.interior_cells()).map(move |k| {
            (k + offset, lo + w * k as f64, lo + w * (k + 1) as f64)
        })
    }

    /// Cell containing `x`; points outside a unit partition map to `None`.
    pub fn cell_of(&self, x: f64) -> Option<usize> {
        if x.is_nan() {
            return None;
        }
        let (lo, hi) = self.bounds();
        let m = self.interior_cells();
        match self {
            UlamPartition::Line { .. } => {
                if x < lo {
                    Some(0)
                } else if x > hi {
                    Some(m + 1)
                } else {
                    let k = (((x - lo) / self.cell_width()) as usize).min(m - 1);
                    Some(k + 1)
                }
            }
            UlamPartition::Unit { .. } => {
                if !(lo..=hi).contains(&x) {
                    None
                } else {
                    Some((((x - lo) / self.cell_width()) as usize).min(m - 1))
                }
            }
        }
    }

    /// Stratified sample `s` of `n` in cell `i` with jitter `u` in `[0,1)`.
    /// Tail cells are stratified in `1/x`.
    fn sample(&self, i: usize, s: usize, n: usize, u: f64) -> f64 {
        let y = self.raw_sample(i, s, n, u);
        if self.cell_of(y) == Some(i) {
            return y;
        }
        // rounding put y across a cell edge: bisect towards the cell midpoint
        let (mut inside, mut outside) = (self.raw_sample(i, n / 2, n, 0.5), y);
        for _ in 0..128 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if self.cell_of(mid) == Some(i) {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        inside
    }

    fn raw_sample(&self, i: usize, s: usize, n: usize, u: f64) -> f64 {
        let t = ((s as f64 + u) / n as f64).min(1.0 - f64::EPSILON / 2.0);
        match *self {
            UlamPartition::Line { half_width, m } => {
                if i == 0 || i == m + 1 {
                    // t in (0,1): 1/x runs over (0, 1/half_width)
                    let inv = (1.0 - t) / half_width;
                    let x = if inv > 0.0 { 1.0 / inv } else { f64::MAX }.max(half_width.next_up());
                    if i == 0 {
                        -x
                    } else {
                        x
                    }
                } else {
                    let w = self.cell_width();
                    let lo = -half_width + w * (i - 1) as f64;
                    lo + w * t
                }
            }
            UlamPartition::Unit { .. } => {
                let w = self.cell_width();
                w * i as f64 + w * t
            }
        }
    }
}

/// One row of the Ulam matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamRow {
    /// Sorted `(column, probability)` pairs with positive probability.
    pub entries: Vec<(usize, f64)>,
    /// Samples redrawn because they fell within a pole radius.
    pub resampled: usize,
}

/// Row-stochastic Ulam matrix, stored by sparse rows.
#[derive(Debug, Clone, PartialEq)]
pub struct UlamMatrix {
    pub partition: UlamPartition,
    pub samples_per_cell: usize,
    pub seed: u64,
    pub rows: Vec<UlamRow>,
}

/// Largest fraction of a cell's samples that may land on poles.
const MAX_POLE_FRACTION: f64 = 0.1;

/// Build row `i` with its own RNG stream seeded by `seed ^ i`.
pub fn ulam_row(
    map: &Map1D,
    partition: &UlamPartition,
    i: usize,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamRow> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ i as u64);
    let mut counts = vec![0usize; partition.len()];
    let limit = (MAX_POLE_FRACTION * samples_per_cell as f64) as usize;
    let mut resampled = 0;
    for s in 0..samples_per_cell {
        let mut u: f64 = rng.gen();
        loop {
            let y = partition.sample(i, s, samples_per_cell, u);
            match map.eval(y) {
                Ok(x) => {
                    let j = partition.cell_of(x).ok_or(Error::Domain { map: map.name(), x })?;
                    counts[j] += 1;
                    break;
                }
                Err(Error::PoleProximity { .. }) => {
                    resampled += 1;
                    if resampled > limit {
                        return Err(Error::Sampling {
                            cell: i,
                            hits: resampled,
                            samples: samples_per_cell,
                        });
                    }
                    u = rng.gen();
                }
                Err(e) => return Err(e),
            }
        }
    }
    let n = samples_per_cell as f64;
    let entries = counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(j, &c)| (j, c as f64 / n))
        .collect();
    Ok(UlamRow { entries, resampled })
}

/// Ulam discretization of the map's transfer operator:
/// `P[i][j]` is the fraction of stratified samples of cell `i` whose image
/// lies in cell `j`. Deterministic for a fixed seed.
pub fn ulam_matrix(
    map: &Map1D,
    partition: &UlamPartition,
    samples_per_cell: usize,
    seed: u64,
) -> Result<UlamMatrix> {
    check_samples(samples_per_cell)?;
    let rows = (0..partition.len())
        .map(|i| ulam_row(map, partition, i, samples_per_cell, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(UlamMatrix {
        partition: *partition,
        samples_per_cell,
        seed,
        rows,
    })
}

pub fn check_samples(samples_per_cell: usize) -> Result<()> {
    if samples_per_cell < 100 {
        return Err(invalid("at least 100 samples per cell are required"));
    }
    Ok(())
}

impl UlamMatrix {
    /// A matrix from explicit dense rows; used for testing and import.
    pub fn from_dense(partition: UlamPartition, dense: &[Vec<f64>]) -> Result<Self> {
        if dense.len() != partition.len() || dense.iter().any(|r| r.len() != partition.len()) {
            return Err(invalid("matrix shape does not match the partition"));
        }
        let mut rows = Vec::with_capacity(dense.len());
        for r in dense {
            if r.iter().any(|v| !(*v >= 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                return Err(invalid("rows must be nonnegative and sum to 1"));
            }
            rows.push(UlamRow {
                entries: r.iter().copied().enumerate().filter(|(_, v)| *v > 0.0).collect(),
                resampled: 0,
            });
        }
        Ok(UlamMatrix {
            partition,
            samples_per_cell: 0,
            seed: 0,
            rows,
        })
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i]
            .entries
            .iter()
            .find(|(c, _)| *c == j)
            .map_or(0.0, |(_, v)| *v)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.size();
        self.rows
            .iter()
            .map(|r| {
                let mut d = vec![0.0; n];
                for &(j, v) in &r.entries {
                    d[j] = v;
                }
                d
            })
            .collect()
    }

    pub fn resampled(&self) -> usize {
        self.rows.iter().map(|r| r.resampled).sum()
    }

    /// `x P` for a row vector `x`.
    pub fn left_mul(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.size()];
        for (i, row) in self.rows.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for &(j, v) in &row.entries {
                out[j] += xi * v;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StationaryDensity {
    /// Left fixed vector of `P`, a probability vector over all cells.
    pub mass: Vec<f64>,
    /// Density on each finite cell, normalized to integrate to 1 over them.
    pub density: Vec<f64>,
    /// `(lo, hi)` of each finite cell, aligned with `density`.
    pub cells: Vec<(f64, f64)>,
    /// Mass in the two tail cells (zero for unit partitions).
    pub tail_mass: f64,
    pub iterations: usize,
    pub increment: f64,
    /// A second run from a random start converged elsewhere.
    pub non_unique: bool,
}

pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 100_000;
const POWER_ACCEPT: f64 = 1e-8;

/// Lazy power iteration `x <- x (P + I)/2`, which has the same fixed vectors
/// as `P` but does not oscillate on periodic chains.
fn power_iteration(p: &UlamMatrix, mut x: Vec<f64>) -> Result<(Vec<f64>, usize, f64)> {
    let mut increment = f64::INFINITY;
    for it in 1..=POWER_MAX_ITERATIONS {
        let px = p.left_mul(&x);
        let mut next: Vec<f64> = x.iter().zip(&px).map(|(a, b)| 0.5 * (a + b)).collect();
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|v| *v /= s);
        increment = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if increment <= POWER_TOL {
            return Ok((x, it, increment));
        }
    }
    if increment > POWER_ACCEPT {
        return Err(Error::NonConvergence {
            iterations: POWER_MAX_ITERATIONS,
            increment,
        });
    }
    Ok((x, POWER_MAX_ITERATIONS, increment))
}

/// Stationary vector of `P` from a uniform start. A second run from a
/// seeded random start sets `non_unique` when the two differ by more than
/// `1e-6` in L1.
pub fn stationary_density(p: &UlamMatrix) -> Result<StationaryDensity> {
    let n = p.size();
    let (mass, iterations, increment) = power_iteration(p, vec![1.0 / n as f64; n])?;

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 1e-3).collect();
    let s: f64 = start.iter().sum();
    start.iter_mut().for_each(|v| *v /= s);
    let (other, _, _) = power_iteration(p, start)?;
    let spread: f64 = mass.iter().zip(&other).map(|(a, b)| (a - b).abs()).sum();

    let part = &p.partition;
    let tail_mass = if part.has_tails() {
        mass[0] + mass[n - 1]
    } else {
        0.0
    };
    let finite = 1.0 - tail_mass;
    let mut density = Vec::with_capacity(part.interior_cells());
    let mut cells = Vec::with_capacity(part.interior_cells());
    for (i, lo, hi) in part.finite_cells() {
        density.push(if finite > 0.0 { mass[i] / ((hi - lo) * finite) } else { 0.0 });
        cells.push((lo, hi));
    }
    Ok(StationaryDensity {
        mass,
        density,
        cells,
        tail_mass,
        iterations,
        increment,
        non_unique: spread > 1e-6,
    })
}

impl StationaryDensity {
    /// `sum_cells |rho_cell - avg_cell(f)| * width`, with the cell average of
    /// `f` taken by 4-point Gauss–Legendre quadrature.
    pub fn l1_distance<D: Density + ?Sized>(&self, f: &D) -> Result<f64> {
        const NODES: [f64; 4] = [-0.861_136_311_594_052_6, -0.339_981_043_584_856_3, 0.339_981_043_584_856_3, 0.861_136_311_594_052_6];
        const WEIGHTS: [f64; 4] = [0.347_854_845_137_453_9, 0.652_145_154_862_546_1, 0.652_145_154_862_546_1, 0.347_854_845_137_453_9];
        let mut total = 0.0;
        for (&(lo, hi), &rho) in self.cells.iter().zip(&self.density) {
            let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
            let mut avg = 0.0;
            for (x, w) in NODES.iter().zip(WEIGHTS) {
                avg += 0.5 * w * f.density(c + h * x)?;
            }
            total += (rho - avg).abs() * (hi - lo);
        }
        Ok(total)
    }
}
