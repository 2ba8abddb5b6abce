//! Two-dimensional Boole maps and the coordinate-permuted maps
//! `x_i -> x_i - 1/x_{sigma(i)}` in `n` dimensions.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::maps1d::{BooleMap1D, POLE_RADIUS};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Boole2DMap {
    /// `(x, y) -> (x - 1/x, y - 1/y)`
    Product,
    /// `(x, y) -> (x - 1/y, y - 1/x)`
    Swapped,
}

fn check_nonzero(x: f64) -> Result<()> {
    if x.abs() < POLE_RADIUS {
        return Err(Error::PoleProximity { x, pole: 0.0 });
    }
    Ok(())
}

pub fn eval2d(map: Boole2DMap, (x, y): (f64, f64)) -> Result<(f64, f64)> {
    check_nonzero(x)?;
    check_nonzero(y)?;
    Ok(match map {
        Boole2DMap::Product => (x - 1.0 / x, y - 1.0 / y),
        Boole2DMap::Swapped => (x - 1.0 / y, y - 1.0 / x),
    })
}

/// Jacobian matrix of the forward map at `(x, y)`.
pub fn forward_jacobian(map: Boole2DMap, (x, y): (f64, f64)) -> Result<[[f64; 2]; 2]> {
    check_nonzero(x)?;
    check_nonzero(y)?;
    Ok(match map {
        Boole2DMap::Product => [[1.0 + 1.0 / (x * x), 0.0], [0.0, 1.0 + 1.0 / (y * y)]],
        Boole2DMap::Swapped => [[1.0, 1.0 / (y * y)], [1.0 / (x * x), 1.0]],
    })
}

fn det2(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// The two preimages of `(u, v)` under the swapped map.
///
/// Since `u/v = x/y` on the image, `x` solves `x^2 - u x - u/v = 0` and
/// `y = v x / u`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InverseBranches2D {
    pub u: f64,
    pub v: f64,
    pub plus: (f64, f64),
    pub minus: (f64, f64),
    /// `sqrt(u^2 + 4u/v)`
    pub big_x: f64,
    /// `sqrt(v^2 + 4v/u)`
    pub big_y: f64,
    /// Whether `y_+ = (v + Y)/2`, i.e. the `+` roots of both radicals belong
    /// to the same preimage. Otherwise `y_+ = (v - Y)/2`.
    pub same_sign_pairing: bool,
}

/// Residuals of the algebraic relations among the branches, each against the
/// target shown.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BranchRelations {
    /// `x_+ + x_- = u`
    pub sum_x: f64,
    /// `y_+ + y_- = v`
    pub sum_y: f64,
    /// `x_+ x_- = u/v`
    pub prod_x: f64,
    /// `y_+ y_- = v/u`
    pub prod_y: f64,
    /// `x_+/y_+ = u/v = x_-/y_-`
    pub ratio: f64,
}

impl BranchRelations {
    pub fn max(&self) -> f64 {
        [self.sum_x, self.sum_y, self.prod_x, self.prod_y, self.ratio]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

pub fn inverse_branches_swapped(u: f64, v: f64) -> Result<InverseBranches2D> {
    if !(u.is_finite() && v.is_finite()) {
        return Err(invalid("target must be finite"));
    }
    check_nonzero(u)?;
    check_nonzero(v)?;
    let rx = u * u + 4.0 * u / v;
    let ry = v * v + 4.0 * v / u;
    if rx < 0.0 || ry < 0.0 {
        return Err(Error::OutsideImage { u, v });
    }
    let (big_x, big_y) = (rx.sqrt(), ry.sqrt());
    let xp = 0.5 * (u + big_x);
    let xm = 0.5 * (u - big_x);
    // y = v + 1/x; cancellation-free via y = v x / u
    let r = v / u;
    let yp = r * xp;
    let ym = r * xm;
    Ok(InverseBranches2D {
        u,
        v,
        plus: (xp, yp),
        minus: (xm, ym),
        big_x,
        big_y,
        same_sign_pairing: u / v > 0.0,
    })
}

impl InverseBranches2D {
    pub fn branches(&self) -> [(f64, f64); 2] {
        [self.plus, self.minus]
    }

    /// Largest `|psi(branch) - (u, v)|` relative to `1 + |(u, v)|`.
    pub fn roundtrip_residual(&self) -> Result<f64> {
        let scale = 1.0 + self.u.abs().max(self.v.abs());
        let mut worst: f64 = 0.0;
        for b in self.branches() {
            let (a, c) = eval2d(Boole2DMap::Swapped, b)?;
            worst = worst.max((a - self.u).abs().max((c - self.v).abs()) / scale);
        }
        Ok(worst)
    }

    /// Largest gap between `v + 1/x` and the `(v +- Y)/2` form assigned to
    /// the same branch.
    pub fn pairing_residual(&self) -> f64 {
        let s = if self.same_sign_pairing { 1.0 } else { -1.0 };
        let yp = 0.5 * (self.v + s * self.big_y);
        let ym = 0.5 * (self.v - s * self.big_y);
        let a = (self.v + 1.0 / self.plus.0 - yp).abs();
        let b = (self.v + 1.0 / self.minus.0 - ym).abs();
        a.max(b)
    }

    pub fn relations(&self) -> BranchRelations {
        let (u, v) = (self.u, self.v);
        let ((xp, yp), (xm, ym)) = (self.plus, self.minus);
        let rel = |got: f64, want: f64| (got - want).abs() / (1.0 + want.abs());
        BranchRelations {
            sum_x: rel(xp + xm, u),
            sum_y: rel(yp + ym, v),
            prod_x: rel(xp * xm, u / v),
            prod_y: rel(yp * ym, v / u),
            ratio: rel(xp / yp, u / v).max(rel(xm / ym, u / v)),
        }
    }

    /// Closed-form Jacobians `d(x, y)/d(u, v)` of the `+` and `-` branches.
    pub fn jacobians(&self) -> [[[f64; 2]; 2]; 2] {
        let (u, v, big_x) = (self.u, self.v, self.big_x);
        let dxu = (u + 2.0 / v) / big_x;
        let dxv = -2.0 * u / (v * v * big_x);
        let mut out = [[[0.0; 2]; 2]; 2];
        for (k, eps) in [1.0, -1.0].into_iter().enumerate() {
            let x = 0.5 * (u + eps * big_x);
            let x_u = 0.5 * (1.0 + eps * dxu);
            let x_v = 0.5 * eps * dxv;
            let y_u = v * x_u / u - v * x / (u * u);
            let y_v = x / u + v * x_v / u;
            out[k] = [[x_u, x_v], [y_u, y_v]];
        }
        out
    }
}

/// Central finite-difference Jacobians of the swapped-map branches.
pub fn branch_jacobians_fd(u: f64, v: f64, h: f64) -> Result<[[[f64; 2]; 2]; 2]> {
    let up = inverse_branches_swapped(u + h, v)?;
    let um = inverse_branches_swapped(u - h, v)?;
    let vp = inverse_branches_swapped(u, v + h)?;
    let vm = inverse_branches_swapped(u, v - h)?;
    let mut out = [[[0.0; 2]; 2]; 2];
    for k in 0..2 {
        let (a, b, c, d) = (up.branches()[k], um.branches()[k], vp.branches()[k], vm.branches()[k]);
        out[k] = [
            [(a.0 - b.0) / (2.0 * h), (c.0 - d.0) / (2.0 * h)],
            [(a.1 - b.1) / (2.0 * h), (c.1 - d.1) / (2.0 * h)],
        ];
    }
    Ok(out)
}

/// Preimages of `(u, v)` with their inverse-Jacobian determinants (signed).
pub fn preimages2d(map: Boole2DMap, u: f64, v: f64) -> Result<Vec<((f64, f64), f64)>> {
    match map {
        Boole2DMap::Product => {
            let m = BooleMap1D::classical();
            let px = m.preimages(u)?;
            let py = m.preimages(v)?;
            let mut out = Vec::with_capacity(4);
            for bx in &px.branches {
                for by in &py.branches {
                    out.push(((bx.y, by.y), bx.weight * by.weight));
                }
            }
            Ok(out)
        }
        Boole2DMap::Swapped => {
            let b = inverse_branches_swapped(u, v)?;
            let j = b.jacobians();
            Ok(vec![(b.plus, det2(&j[0])), (b.minus, det2(&j[1]))])
        }
    }
}

/// `sum_branches |det D(branch)(u, v)|`; equal to 1 wherever Lebesgue
/// measure is invariant at `(u, v)`.
pub fn jacobian_sum(map: Boole2DMap, u: f64, v: f64) -> Result<f64> {
    Ok(preimages2d(map, u, v)?.iter().map(|p| p.1.abs()).sum())
}

/// `sum_branches det D(branch)(u, v)` without absolute values.
pub fn jacobian_sum_signed(map: Boole2DMap, u: f64, v: f64) -> Result<f64> {
    Ok(preimages2d(map, u, v)?.iter().map(|p| p.1).sum())
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct JacobianSample {
    pub u: f64,
    pub v: f64,
    pub sum: f64,
    pub signed_sum: f64,
    pub branch_count: usize,
}

pub fn jacobian_sample(map: Boole2DMap, u: f64, v: f64) -> Result<JacobianSample> {
    let pre = preimages2d(map, u, v)?;
    Ok(JacobianSample {
        u,
        v,
        sum: pre.iter().map(|p| p.1.abs()).sum(),
        signed_sum: pre.iter().map(|p| p.1).sum(),
        branch_count: pre.len(),
    })
}

/// `x -> (x_i - 1/x_{sigma(i)})_i` for a permutation `sigma` of `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PermutationBooleMap {
    sigma: Vec<usize>,
    cycles: Vec<Vec<usize>>,
}

impl PermutationBooleMap {
    /// `sigma[i]` is the image of `i` (zero-based).
    pub fn new(sigma: Vec<usize>) -> Result<Self> {
        let n = sigma.len();
        if n == 0 {
            return Err(invalid("permutation must be nonempty"));
        }
        let mut seen = vec![false; n];
        for &s in &sigma {
            if s >= n || seen[s] {
                return Err(invalid("sigma is not a permutation"));
            }
            seen[s] = true;
        }
        let mut visited = vec![false; n];
        let mut cycles = Vec::new();
        for start in 0..n {
            if visited[start] {
                continue;
            }
            let mut cycle = Vec::new();
            let mut i = start;
            while !visited[i] {
                visited[i] = true;
                cycle.push(i);
                i = sigma[i];
            }
            cycles.push(cycle);
        }
        Ok(PermutationBooleMap { sigma, cycles })
    }

    pub fn identity(n: usize) -> Result<Self> {
        PermutationBooleMap::new((0..n).collect())
    }

    /// Permutation with the given disjoint cycles; unlisted indices are fixed.
    pub fn from_cycles(n: usize, cycles: &[&[usize]]) -> Result<Self> {
        let mut sigma: Vec<usize> = (0..n).collect();
        for c in cycles {
            for (k, &i) in c.iter().enumerate() {
                if i >= n {
                    return Err(invalid("cycle index out of range"));
                }
                sigma[i] = c[(k + 1) % c.len()];
            }
        }
        PermutationBooleMap::new(sigma)
    }

    pub fn n(&self) -> usize {
        self.sigma.len()
    }

    pub fn sigma(&self) -> &[usize] {
        &self.sigma
    }

    /// Cycles in the order `i, sigma(i), sigma^2(i), ...`.
    pub fn cycles(&self) -> &[Vec<usize>] {
        &self.cycles
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(invalid("dimension mismatch"));
        }
        x.iter()
            .enumerate()
            .map(|(i, &xi)| {
                let d = x[self.sigma[i]];
                check_nonzero(d)?;
                Ok(xi - 1.0 / d)
            })
            .collect()
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        let n = self.n();
        let mut j = vec![vec![0.0; n]; n];
        for i in 0..n {
            let s = self.sigma[i];
            check_nonzero(x[s])?;
            j[i][i] += 1.0;
            j[i][s] += 1.0 / (x[s] * x[s]);
        }
        Ok(j)
    }
}

/// Determinant by Gaussian elimination with partial pivoting.
pub fn determinant(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut det = 1.0;
    for col in 0..n {
        let p = (col..n)
            .max_by(|&a, &b| m[a][col].abs().partial_cmp(&m[b][col].abs()).unwrap_or(core::cmp::Ordering::Equal))
            .unwrap_or(col);
        if m[p][col] == 0.0 {
            return 0.0;
        }
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        det *= m[col][col];
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    det
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NdPreimages {
    pub points: Vec<Vec<f64>>,
    /// `1/|det D psi|` at each point.
    pub weights: Vec<f64>,
    pub weight_sum: f64,
    /// `sum 1/det D psi` without absolute values.
    pub signed_weight_sum: f64,
    /// False when some cycle admits a continuum of solutions, so the list
    /// is not the full preimage.
    pub certified: bool,
}

/// Real solutions `z` of `z = M(z)` for the Moebius matrix `m`; `None` when
/// `M` is the identity.
fn moebius_fixed_points(m: [[f64; 2]; 2]) -> Option<Vec<f64>> {
    let [[a, b], [c, d]] = m;
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    let tiny = 1e-14 * scale;
    // c z^2 + (d - a) z - b = 0
    let (qa, qb, qc) = (c, d - a, -b);
    if qa.abs() <= tiny && qb.abs() <= tiny && qc.abs() <= tiny {
        return None;
    }
    if qa.abs() <= tiny {
        if qb.abs() <= tiny {
            return Some(Vec::new());
        }
        return Some(vec![-qc / qb]);
    }
    let disc = qb * qb - 4.0 * qa * qc;
    if disc < 0.0 {
        return Some(Vec::new());
    }
    let sq = disc.sqrt();
    // stable quadratic formula
    let q = -0.5 * (qb + sq.copysign(qb));
    let mut roots = if q == 0.0 { vec![0.0] } else { vec![q / qa, qc / q] };
    roots.sort_by(|x, y| x.partial_cmp(y).unwrap_or(core::cmp::Ordering::Equal));
    roots.dedup();
    Some(roots)
}

/// All real preimages of `u`. Along a cycle `i -> sigma(i) -> ...` the
/// equations `x_i = u_i + 1/x_{sigma(i)}` compose to a Moebius fixed-point
/// problem for the cycle's first coordinate, which has at most two real
/// solutions.
pub fn nd_preimages(map: &PermutationBooleMap, u: &[f64]) -> Result<NdPreimages> {
    if u.len() != map.n() || u.iter().any(|x| !x.is_finite()) {
        return Err(invalid("target must be finite with matching dimension"));
    }
    let mut certified = true;
    let mut per_cycle: Vec<Vec<Vec<(usize, f64)>>> = Vec::new();
    for cycle in map.cycles() {
        // M = T_{u_c0} o T_{u_c1} o ... with T_w(z) = w + 1/z
        let mut m = [[1.0, 0.0], [0.0, 1.0]];
        for &i in cycle {
            let t = [[u[i], 1.0], [1.0, 0.0]];
            m = [
                [m[0][0] * t[0][0] + m[0][1] * t[1][0], m[0][0] * t[0][1] + m[0][1] * t[1][1]],
                [m[1][0] * t[0][0] + m[1][1] * t[1][0], m[1][0] * t[0][1] + m[1][1] * t[1][1]],
            ];
        }
        let starts = match moebius_fixed_points(m) {
            Some(r) => r,
            None => {
                certified = false;
                Vec::new()
            }
        };
        let mut sols = Vec::new();
        'start: for z in starts {
            let l = cycle.len();
            let mut vals = vec![0.0; l];
            vals[0] = z;
            // x_{c_{l-1}} = u + 1/x_{c_0}, then backwards
            let mut next = z;
            for k in (1..l).rev() {
                if next.abs() < POLE_RADIUS {
                    continue 'start;
                }
                vals[k] = u[cycle[k]] + 1.0 / next;
                next = vals[k];
            }
            if vals.iter().any(|x| x.abs() < POLE_RADIUS) {
                continue;
            }
            sols.push(cycle.iter().copied().zip(vals).collect());
        }
        per_cycle.push(sols);
    }

    // Cartesian product over cycles
    let mut points: Vec<Vec<f64>> = vec![vec![0.0; map.n()]];
    for sols in &per_cycle {
        let mut next = Vec::with_capacity(points.len() * sols.len());
        for p in &points {
            for s in sols {
                let mut q = p.clone();
                for &(i, x) in s {
                    q[i] = x;
                }
                next.push(q);
            }
        }
        points = next;
    }
    let mut weights = Vec::with_capacity(points.len());
    let mut signed_weight_sum = 0.0;
    for p in &points {
        let d = determinant(map.jacobian(p)?);
        weights.push(1.0 / d.abs());
        signed_weight_sum += 1.0 / d;
    }
    Ok(NdPreimages {
        weight_sum: weights.iter().sum(),
        points,
        weights,
        signed_weight_sum,
        certified,
    })
}
