//! Orbits, Birkhoff averages, empirical densities and time-versus-space
//! comparisons.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cell::Cell;

#[allow(unused_imports)] // inherent float methods exist only with std
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::maps1d::{Domain, Map1D, POLE_RADIUS};
use crate::measures::{classify_ergodicity, density_eval, density_integral, DensitySpec, ErgodicityClass};
use crate::quad::{integrate_with_breaks, QuadOptions};

/// Orbit points beyond this magnitude abort with [`Error::Divergence`].
pub const DIVERGENCE: f64 = 1e300;

/// Number of batches behind the standard-error estimate.
pub const BATCHES: usize = 32;

const WORDS: usize = 32;
const BITS: usize = WORDS * 64;

/// Binary expansion of an orbit point, 2048 bits at a time, refilled from a
/// seeded RNG as bits are shifted out.
#[derive(Debug, Clone)]
struct BitStream {
    words: [u64; WORDS],
    pos: usize,
    rng: ChaCha8Rng,
}

impl BitStream {
    fn new(x0: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut words = [0u64; WORDS];
        for w in words.iter_mut() {
            *w = rng.gen();
        }
        // leading 52 bits from x0, the rest random
        let lead = ((x0 * (1u64 << 52) as f64) as u64).min((1u64 << 52) - 1);
        words[0] = (lead << 12) | (words[0] & 0xfff);
        BitStream { words, pos: 0, rng }
    }

    fn window(&self) -> u64 {
        let (w, o) = (self.pos / 64, self.pos % 64);
        if o == 0 {
            self.words[w]
        } else {
            (self.words[w] << o) | (self.words[w + 1] >> (64 - o))
        }
    }

    fn shift(&mut self) {
        self.pos += 1;
        if self.pos + 128 > BITS {
            let (w, o) = (self.pos / 64, self.pos % 64);
            self.words.copy_within(w.., 0);
            for i in WORDS - w..WORDS {
                self.words[i] = self.rng.gen();
            }
            self.pos = o;
        }
    }
}

fn fraction(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[derive(Debug, Clone)]
enum State {
    Float { map: Map1D, x: f64 },
    Doubling(BitStream),
    /// Tent map: stored bits are complemented while `flip` is set.
    Tent { bits: BitStream, flip: bool },
}

/// Orbit generator. Doubling and tent orbits shift a binary expansion
/// instead of iterating in floating point, which would collapse to 0 within
/// 53 steps.
#[derive(Debug, Clone)]
pub struct Orbit {
    state: State,
    step: u64,
}

impl Orbit {
    pub fn new(map: &Map1D, x0: f64, seed: u64) -> Result<Self> {
        if !x0.is_finite() {
            return Err(invalid("start point must be finite"));
        }
        let state = match map {
            Map1D::Doubling | Map1D::Baker => {
                if !(0.0..=1.0).contains(&x0) {
                    return Err(Error::Domain { map: map.name(), x: x0 });
                }
                let bits = BitStream::new(x0, seed);
                if let Map1D::Doubling = map {
                    State::Doubling(bits)
                } else {
                    State::Tent { bits, flip: false }
                }
            }
            _ => {
                // validate the start point
                match map.eval(x0) {
                    Err(Error::PoleProximity { .. }) => return Err(Error::PoleHit { step: 0 }),
                    Err(e) => return Err(e),
                    Ok(_) => {}
                }
                State::Float { map: map.clone(), x: x0 }
            }
        };
        Ok(Orbit { state, step: 0 })
    }

    pub fn current(&self) -> f64 {
        match &self.state {
            State::Float { x, .. } => *x,
            State::Doubling(b) => fraction(b.window()),
            State::Tent { bits, flip } => {
                let mask = if *flip { u64::MAX } else { 0 };
                fraction(bits.window() ^ mask)
            }
        }
    }

    /// Iterations performed so far.
    pub fn step(&self) -> u64 {
        self.step
    }

    pub fn advance(&mut self) -> Result<()> {
        let next_step = self.step + 1;
        match &mut self.state {
            State::Float { map, x } => {
                let y = match map.eval(*x) {
                    Ok(y) => y,
                    Err(Error::PoleProximity { .. }) => return Err(Error::PoleHit { step: self.step }),
                    Err(e) => return Err(e),
                };
                if !(y.abs() <= DIVERGENCE) {
                    return Err(Error::Divergence { step: next_step });
                }
                if let (Map1D::Gauss, true) = (&*map, y < POLE_RADIUS) {
                    return Err(Error::PoleHit { step: next_step });
                }
                *x = y;
            }
            State::Doubling(b) => b.shift(),
            State::Tent { bits, flip } => {
                let mask = if *flip { u64::MAX } else { 0 };
                let lead = (bits.window() ^ mask) >> 63;
                bits.shift();
                *flip ^= lead == 1;
            }
        }
        self.step = next_step;
        Ok(())
    }
}

/// `x0, phi(x0), ..., phi^{n-1}(x0)`.
pub fn orbit(map: &Map1D, x0: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut o = Orbit::new(map, x0, seed)?;
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        out.push(o.current());
        if k + 1 < n {
            o.advance()?;
        }
    }
    Ok(out)
}

/// Test functions for Birkhoff averages.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(rename_all = "snake_case"))]
pub enum Observable {
    Identity,
    Square,
    Arctan,
    /// `1` when `x > t`
    Above(f64),
    /// `1` when `x < t`
    Below(f64),
    /// `1` on `[lo, hi)`
    Window(f64, f64),
    /// `max(0, 1 - |x - c|/w)`
    Tent(f64, f64),
}

impl Observable {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Observable::Identity => x,
            Observable::Square => x * x,
            Observable::Arctan => x.atan(),
            Observable::Above(t) => f64::from(u8::from(x > t)),
            Observable::Below(t) => f64::from(u8::from(x < t)),
            Observable::Window(lo, hi) => f64::from(u8::from(x >= lo && x < hi)),
            Observable::Tent(c, w) => (1.0 - (x - c).abs() / w).max(0.0),
        }
    }

    /// Jump locations, used as quadrature breakpoints.
    fn jumps(&self) -> Vec<f64> {
        match *self {
            Observable::Above(t) | Observable::Below(t) => vec![t],
            Observable::Window(lo, hi) => vec![lo, hi],
            Observable::Tent(c, w) => vec![c - w, c, c + w],
            _ => Vec::new(),
        }
    }

    /// `x`, `x2`, `arctan`, `above:T`, `below:T`, `window:LO:HI`, `tent:C:W`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        let head = parts.next().unwrap_or("");
        let nums: Vec<f64> = parts
            .map(|p| p.trim().parse::<f64>().map_err(|_| invalid("observable arguments must be numbers")))
            .collect::<Result<_>>()?;
        let obs = match (head, nums.as_slice()) {
            ("x", []) => Observable::Identity,
            ("x2", []) => Observable::Square,
            ("arctan", []) => Observable::Arctan,
            ("above", [t]) => Observable::Above(*t),
            ("below", [t]) => Observable::Below(*t),
            ("window", [lo, hi]) if lo < hi => Observable::Window(*lo, *hi),
            ("tent", [c, w]) if *w > 0.0 => Observable::Tent(*c, *w),
            _ => return Err(invalid("unknown observable")),
        };
        Ok(obs)
    }

    pub fn label(&self) -> String {
        match self {
            Observable::Identity => "x".to_string(),
            Observable::Square => "x2".to_string(),
            Observable::Arctan => "arctan".to_string(),
            Observable::Above(t) => format!("above:{t}"),
            Observable::Below(t) => format!("below:{t}"),
            Observable::Window(lo, hi) => format!("window:{lo}:{hi}"),
            Observable::Tent(c, w) => format!("tent:{c}:{w}"),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Sum {
    s: f64,
    c: f64,
}

impl Sum {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn value(&self) -> f64 {
        self.s + self.c
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    /// Orbit points that fell inside `[lo, hi)`.
    pub in_window: u64,
    pub total: u64,
    /// `count / (in_window * width)`; absent for infinite invariant measures.
    pub normalized: Option<Vec<f64>>,
    pub infinite_measure: bool,
}

impl Histogram {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        Histogram {
            lo,
            hi,
            counts: vec![0; bins],
            in_window: 0,
            total: 0,
            normalized: None,
            infinite_measure: false,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn bin_edges(&self, i: usize) -> (f64, f64) {
        let w = self.bin_width();
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }

    fn push(&mut self, x: f64) {
        self.total += 1;
        if x >= self.lo && x < self.hi {
            let i = (((x - self.lo) / self.bin_width()) as usize).min(self.bins() - 1);
            self.counts[i] += 1;
            self.in_window += 1;
        }
    }

    fn finish(&mut self, infinite: bool) {
        self.infinite_measure = infinite;
        self.normalized = if infinite || self.in_window == 0 {
            None
        } else {
            let scale = 1.0 / (self.in_window as f64 * self.bin_width());
            Some(self.counts.iter().map(|&c| c as f64 * scale).collect())
        };
    }

    /// `sum_bins |h_i - p_i/(P w)| w`, with `p_i` the mass of `rho` in bin
    /// `i` and `P` its mass in the window.
    pub fn l1_distance(&self, rho: &DensitySpec) -> Result<f64> {
        let h = self
            .normalized
            .as_ref()
            .ok_or_else(|| invalid("no normalized histogram for an infinite invariant measure"))?;
        let total = density_integral(rho, self.lo, self.hi)?;
        if !(total > 0.0) {
            return Err(invalid("density has no mass in the window"));
        }
        let w = self.bin_width();
        let mut d = 0.0;
        for (i, &hi) in h.iter().enumerate() {
            let (a, b) = self.bin_edges(i);
            let p = density_integral(rho, a, b)? / (total * w);
            d += (hi - p).abs() * w;
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrbitStats {
    pub map: String,
    pub x0: f64,
    pub n: u64,
    pub observable: String,
    pub running_mean: f64,
    /// Standard error from [`BATCHES`] batch means.
    pub stderr_estimate: f64,
    pub histogram: Option<Histogram>,
}

fn infinite_measure(map: &Map1D) -> bool {
    map.to_boole().is_some_and(|m| {
        matches!(
            classify_ergodicity(&m),
            ErgodicityClass::InfiniteErgodicLebesgue | ErgodicityClass::TotallyDissipative
        )
    })
}

fn run(
    map: &Map1D,
    f: &Observable,
    x0: f64,
    n: u64,
    seed: u64,
    mut hist: Option<Histogram>,
) -> Result<OrbitStats> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let mut orbit = Orbit::new(map, x0, seed)?;
    let batches = (BATCHES as u64).min(n);
    let mut total = Sum::default();
    let mut means = Vec::with_capacity(batches as usize);
    for b in 0..batches {
        let start = n * b / batches;
        let end = n * (b + 1) / batches;
        let mut s = Sum::default();
        for k in start..end {
            let x = orbit.current();
            s.add(f.eval(x));
            if let Some(h) = hist.as_mut() {
                h.push(x);
            }
            if k + 1 < n {
                orbit.advance()?;
            }
        }
        total.add(s.value());
        means.push(s.value() / (end - start) as f64);
    }
    let running_mean = total.value() / n as f64;
    let stderr_estimate = if batches < 2 {
        f64::INFINITY
    } else {
        let m = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (batches - 1) as f64;
        (var / batches as f64).sqrt()
    };
    if let Some(h) = hist.as_mut() {
        h.finish(infinite_measure(map));
    }
    Ok(OrbitStats {
        map: map.name().to_string(),
        x0,
        n,
        observable: f.label(),
        running_mean,
        stderr_estimate,
        histogram: hist,
    })
}

/// `(1/n) sum_{k<n} f(phi^k x0)`.
pub fn birkhoff_average(map: &Map1D, f: &Observable, x0: f64, n: u64, seed: u64) -> Result<OrbitStats> {
    run(map, f, x0, n, seed, None)
}

/// Histogram of `n` orbit points over `[lo, hi)`.
pub fn empirical_density(map: &Map1D, x0: f64, n: u64, window: (f64, f64), bins: usize, seed: u64) -> Result<Histogram> {
    if bins < 10 {
        return Err(invalid("at least 10 bins are required"));
    }
    if !(window.0 < window.1) || !window.0.is_finite() || !window.1.is_finite() {
        return Err(invalid("window must be a finite interval"));
    }
    let stats = run(
        map,
        &Observable::Identity,
        x0,
        n,
        seed,
        Some(Histogram::new(window.0, window.1, bins)),
    )?;
    Ok(stats.histogram.expect("histogram requested"))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TimeSpaceReport {
    pub time_average: f64,
    pub stderr_estimate: f64,
    pub space_average: f64,
    /// `|time - space| / stderr`
    pub z_score: f64,
    pub agree: bool,
    /// `|int f(phi x) rho(x) dx - int f(x) rho(x) dx|`
    pub composition_residual: f64,
}

fn breakpoints(map: &Map1D, f: &Observable) -> Vec<f64> {
    let (lo, hi) = match map.domain() {
        Domain::Line => (f64::NEG_INFINITY, f64::INFINITY),
        Domain::UnitInterval => (0.0, 1.0),
    };
    let mut pts = vec![lo, hi];
    if let Some(m) = map.to_boole() {
        pts.extend_from_slice(m.poles());
    }
    match map {
        Map1D::Doubling | Map1D::Baker => pts.push(0.5),
        Map1D::Gauss => pts.extend((2..=200).map(|k| 1.0 / k as f64)),
        _ => {}
    }
    // jumps of f o phi: preimages of the jumps of f
    for t in f.jumps() {
        if let Ok(pre) = map.preimages(t) {
            pts.extend(pre.branches.iter().map(|b| b.y));
        }
    }
    pts.extend(f.jumps());
    pts.retain(|p| *p >= lo && *p <= hi);
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    pts.dedup();
    pts
}

/// Integral of `g rho` over the map's domain.
fn space_integral(
    map: &Map1D,
    rho: &DensitySpec,
    f: &Observable,
    g: impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    let err: Cell<Option<Error>> = Cell::new(None);
    let mut opts = QuadOptions {
        abs_tol: 1e-11,
        rel_tol: 1e-11,
        ..QuadOptions::default()
    };
    if let DensitySpec::Cauchy { center, gamma } = rho {
        opts.center = *center;
        opts.scale = *gamma;
    }
    let r = integrate_with_breaks(
        |x| {
            let v = g(x).and_then(|gx| Ok(gx * density_eval(rho, x)?));
            match v {
                Ok(v) => v,
                Err(e) => {
                    err.set(Some(e));
                    0.0
                }
            }
        },
        &breakpoints(map, f),
        &opts,
    );
    if let Some(e) = err.take() {
        return Err(e);
    }
    Ok(r.value)
}

/// Time average along one orbit against `int f rho`, plus the invariance
/// residual `|int f(phi x) rho - int f rho|` by quadrature.
pub fn time_vs_space_report(
    map: &Map1D,
    rho: &DensitySpec,
    f: &Observable,
    x0: f64,
    n: u64,
    seed: u64,
) -> Result<TimeSpaceReport> {
    let mass = match map.domain() {
        Domain::UnitInterval => density_integral(rho, 0.0, 1.0)?,
        Domain::Line => density_integral(rho, f64::NEG_INFINITY, f64::INFINITY)?,
    };
    if !(mass.is_finite() && mass > 0.0) {
        return Err(invalid("density must be normalizable on the map's domain"));
    }
    let stats = birkhoff_average(map, f, x0, n, seed)?;
    let space = space_integral(map, rho, f, |x| Ok(f.eval(x)))? / mass;
    let composed = space_integral(map, rho, f, |x| Ok(f.eval(map.eval(x)?)))? / mass;
    let z = (stats.running_mean - space).abs() / stats.stderr_estimate;
    Ok(TimeSpaceReport {
        time_average: stats.running_mean,
        stderr_estimate: stats.stderr_estimate,
        space_average: space,
        z_score: z,
        agree: z <= 3.0,
        composition_residual: (composed - space).abs(),
    })
}
