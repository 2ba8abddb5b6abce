//! `boole` subcommands. Each writes a JSON report
//! `{subcommand, config, results, pass, max_residual?, runtime_ms}` and exits
//! 0 on success, 2 when a verification fails, 1 on usage or IO errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::time::Instant;

use boole_core::boole2d::{branch_jacobians_fd, inverse_branches_swapped, nd_preimages, Boole2DMap, PermutationBooleMap};
use boole_core::conjugacy::{check_commutation, midpoint_grid, pushforward_density_check, CotangentConjugacy};
use boole_core::ergostats::{empirical_density, time_vs_space_report, Observable};
use boole_core::maps1d::{BooleMap1D, Domain, Map1D};
use boole_core::measures::{classify_ergodicity, quasi_measure_from_fixed_point, DensitySpec, QuasiMeasureCandidate};
use boole_core::mgf::{
    abel_limit, baker_expansion, baker_sums, baker_target, check_functional_equation, is_low_dyadic, mgf_record,
    poisson_abel_limit, schur_average, schur_identity_residual, takagi_sum, StieltjesAtoms,
};
use boole_core::transfer::{linspace, stationary_density, verify_invariant_density, UlamPartition};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{usage, CliError, CliResult};
use crate::io;
use crate::parallel;

#[derive(Debug, Parser, Serialize)]
#[command(name = "boole", version, about = "Numerical experiments with Boole-type maps")]
pub struct Cli {
    /// Write the JSON report to this file instead of stdout
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Write the subcommand's tabular artifact to this CSV file
    #[arg(long, global = true)]
    pub csv: Option<PathBuf>,
    /// Worker threads [default: machine parallelism]
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check that a density is a fixed point of the transfer operator on a grid
    VerifyDensity(VerifyDensityArgs),
    /// Complex fixed points of a generalized Boole map
    FixedPoints(MapArgs),
    /// Invariant densities built from upper half-plane fixed points
    QuasiMeasure(QuasiMeasureArgs),
    /// Ergodicity class from the map parameters
    Classify(MapArgs),
    /// Ulam matrix and its stationary density
    Ulam(UlamArgs),
    /// Cotangent conjugacy with the doubling map
    Conjugacy(ConjugacyArgs),
    /// Truncated measure generating function and its functional equation
    Mgf(MgfArgs),
    /// Abel limit of (1-lambda) F(lambda) against the Schur average
    Abel(AbelArgs),
    /// Tent-map series identities
    BakerExpansion(BakerArgs),
    /// Jacobian-sum sweep for the two-dimensional maps
    TwodInvariance(TwodArgs),
    /// Preimages of a coordinate-permuted Boole map
    NdPreimages(NdArgs),
    /// Birkhoff averages along orbits
    Birkhoff(BirkhoffArgs),
    /// Empirical density of an orbit
    Histogram(HistogramArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct MapArgs {
    /// Map as JSON, @file, or a bare name (gauss, doubling, baker, classical_boole)
    #[arg(long)]
    pub map: String,
    /// Residual tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyDensityArgs {
    /// Map as JSON, @file, or a bare name
    #[arg(long)]
    pub map: String,
    /// cauchy:C:G, alpha_beta:A:B, poisson:RE:IM, gauss, lebesgue, JSON or @file
    #[arg(long)]
    pub density: String,
    /// Relative residual tolerance
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Number of grid points
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Grid start [default: center - 50 scale, or 0 on [0,1]]
    #[arg(long, allow_hyphen_values = true)]
    pub lo: Option<f64>,
    /// Grid end [default: center + 50 scale, or 1 on [0,1]]
    #[arg(long, allow_hyphen_values = true)]
    pub hi: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct QuasiMeasureArgs {
    /// Map as JSON or @file
    #[arg(long)]
    pub map: String,
    /// Relative residual tolerance for each candidate density
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Grid points per candidate
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct UlamArgs {
    #[arg(long)]
    pub map: String,
    /// Cells (interior cells on the line)
    #[arg(long, default_value_t = 512)]
    pub m: usize,
    /// Samples per cell
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// Half-width L of the finite window for maps of the line
    #[arg(long, default_value_t = 50.0)]
    pub half_width: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Reference density for an L1 comparison
    #[arg(long)]
    pub density: Option<String>,
    /// L1 tolerance against --density
    #[arg(long, default_value_t = 0.02)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ConjugacyArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub a: f64,
    /// Midpoint grid size
    #[arg(long, default_value_t = 1000)]
    pub grid: usize,
    /// Commutation tolerance
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
    /// Pushforward tolerance
    #[arg(long, default_value_t = 1e-10)]
    pub push_tol: f64,
    /// Map to test instead of the matching one
    #[arg(long)]
    pub map: Option<String>,
    /// Density to test instead of the matching Cauchy density
    #[arg(long)]
    pub density: Option<String>,
}

#[derive(Debug, Args, Serialize)]
pub struct MgfArgs {
    /// doubling, baker or gauss
    #[arg(long, default_value = "doubling")]
    pub map: String,
    /// lebesgue, ramp, JSON grid or @file
    #[arg(long, default_value = "lebesgue")]
    pub base: String,
    /// Intervals lo:hi[,lo:hi...]
    #[arg(long, default_value = "0:0.5")]
    pub set: String,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub lambda: f64,
    /// Terms
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Tolerance for the Schur-average identity
    #[arg(long, default_value_t = 1e-12)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AbelArgs {
    #[arg(long, default_value = "doubling")]
    pub map: String,
    #[arg(long, default_value = "lebesgue")]
    pub base: String,
    #[arg(long, default_value = "0:0.5")]
    pub set: String,
    /// Schur average length for the cross-check
    #[arg(long, default_value_t = 64)]
    pub schur_n: usize,
    /// Allowed gap between the Abel limit and the reference
    #[arg(long, default_value_t = 2e-3)]
    pub tol: f64,
    /// Spectral atoms s:mass[,s:mass...]; replaces the map computation
    #[arg(long)]
    pub atoms: Option<String>,
    /// Reference value instead of the Schur average
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct BakerArgs {
    /// Comma-separated points; random non-dyadic points when absent
    #[arg(long)]
    pub x: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 40)]
    pub terms: usize,
    #[arg(long, default_value_t = 1e-9)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Product,
    Swapped,
}

#[derive(Debug, Args, Serialize)]
pub struct TwodArgs {
    #[arg(long, value_enum, default_value_t = Variant::Swapped)]
    pub variant: Variant,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample (u, v) from [-half, half]^2
    #[arg(long, default_value_t = 10.0)]
    pub half: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    /// Gate on the signed determinant sum instead of the absolute one
    #[arg(long)]
    pub signed: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct NdArgs {
    /// Images sigma(1), ..., sigma(n), 1-based and comma-separated
    #[arg(long)]
    pub sigma: String,
    /// Target point, comma-separated [default: origin]
    #[arg(long, allow_hyphen_values = true)]
    pub u: Option<String>,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct BirkhoffArgs {
    #[arg(long)]
    pub map: String,
    /// x, x2, arctan, above:T, below:T, window:LO:HI, tent:C:W
    #[arg(long, default_value = "x")]
    pub observable: String,
    /// Start point [default: drawn from the seed]
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of independent orbits (seeds seed, seed+1, ...)
    #[arg(long, default_value_t = 1)]
    pub seeds: usize,
    /// Expected average; gates on the mean absolute error
    #[arg(long, allow_hyphen_values = true)]
    pub expect: Option<f64>,
    /// Tolerance for --expect [default: 3 standard errors]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Invariant density for a time-versus-space comparison
    #[arg(long)]
    pub density: Option<String>,
    /// Tolerance on the invariance residual with --density
    #[arg(long, default_value_t = 1e-6)]
    pub residual_tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct HistogramArgs {
    #[arg(long)]
    pub map: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub n: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub lo: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub hi: f64,
    #[arg(long, default_value_t = 200)]
    pub bins: usize,
    /// Reference density for an L1 comparison
    #[arg(long)]
    pub density: Option<String>,
    #[arg(long, default_value_t = 0.05)]
    pub tol: f64,
}

/// What a subcommand hands back to the report writer.
struct Outcome {
    results: Value,
    pass: bool,
    max_residual: Option<f64>,
    /// Parsed inputs added to the echoed config.
    resolved: Vec<(&'static str, Value)>,
}

impl Outcome {
    fn new(results: Value, pass: bool, max_residual: Option<f64>) -> Self {
        Outcome {
            results,
            pass,
            max_residual,
            resolved: Vec::new(),
        }
    }

    fn resolved(mut self, key: &'static str, v: impl Serialize) -> Self {
        self.resolved.push((key, serde_json::to_value(v).unwrap_or(Value::Null)));
        self
    }
}

fn csv_writer(path: &Option<PathBuf>) -> CliResult<Option<BufWriter<File>>> {
    Ok(match path {
        Some(p) => Some(BufWriter::new(File::create(p)?)),
        None => None,
    })
}

fn boole(map: &Map1D) -> CliResult<BooleMap1D> {
    map.to_boole()
        .ok_or_else(|| usage(format!("{} is not a generalized Boole map", map.name())))
}

/// Grid window around the bulk of a density.
fn default_window(map: &Map1D, rho: &DensitySpec) -> (f64, f64) {
    if let Domain::UnitInterval = map.domain() {
        return (0.0, 1.0);
    }
    let (c, s) = match rho {
        DensitySpec::Cauchy { center, gamma } => (*center, *gamma),
        DensitySpec::SpecialAlphaBeta { alpha, beta } => (0.0, (beta / (1.0 - alpha)).sqrt()),
        DensitySpec::QuasiMeasure { omega_bar, .. } => (omega_bar.re, omega_bar.im.abs().max(1e-3)),
        _ => (0.0, 1.0),
    };
    (c - 50.0 * s, c + 50.0 * s)
}

fn verify_density(a: &VerifyDensityArgs) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let rho = io::parse_density(&a.density)?;
    let (dlo, dhi) = default_window(&map, &rho);
    let grid = linspace(a.lo.unwrap_or(dlo), a.hi.unwrap_or(dhi), a.grid);
    let r = verify_invariant_density(&map, &rho, &grid, a.tol)?;
    Ok(Outcome::new(serde_json::to_value(r)?, r.pass, Some(r.max_rel_residual))
        .resolved("map", &map)
        .resolved("density", &rho))
}

fn fixed_points(a: &MapArgs) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let fp = boole(&map)?.complex_fixed_points()?;
    let results = json!({ "roots": fp.roots, "upper": fp.upper });
    Ok(Outcome::new(results, fp.max_residual <= a.tol, Some(fp.max_residual)).resolved("map", &map))
}

fn quasi_measure(a: &QuasiMeasureArgs) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let candidates = quasi_measure_from_fixed_point(&boole(&map)?)?;
    let mut pass = true;
    let mut worst: f64 = 0.0;
    let mut out = Vec::new();
    for c in candidates {
        match c {
            QuasiMeasureCandidate::Invariant { fixed_point, density } => {
                let (lo, hi) = default_window(&map, &density);
                let r = verify_invariant_density(&map, &density, &linspace(lo, hi, a.grid), a.tol)?;
                pass &= r.pass;
                worst = worst.max(r.max_rel_residual);
                out.push(json!({
                    "kind": "invariant",
                    "fixed_point": fixed_point,
                    "density": density,
                    "invariance": r,
                }));
            }
            QuasiMeasureCandidate::Degenerate { fixed_point } => {
                out.push(json!({ "kind": "degenerate", "fixed_point": fixed_point }));
            }
        }
    }
    Ok(Outcome::new(json!({ "candidates": out }), pass, Some(worst)).resolved("map", &map))
}

fn classify(a: &MapArgs) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let class = classify_ergodicity(&boole(&map)?);
    Ok(Outcome::new(json!({ "class": class }), true, None).resolved("map", &map))
}

fn ulam(a: &UlamArgs, csv: &Option<PathBuf>) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let part = UlamPartition::for_map(&map, a.half_width, a.m)?;
    let p = parallel::ulam_matrix_par(&map, &part, a.samples, a.seed)?;
    let st = stationary_density(&p)?;
    if let Some(w) = csv_writer(csv)? {
        io::write_ulam_csv(w, &p)?;
    }
    let reference = a.density.as_deref().map(io::parse_density).transpose()?;
    let l1 = reference.as_ref().map(|d| st.l1_distance(d)).transpose()?;
    let pass = match l1 {
        Some(d) => d <= a.tol,
        None => !st.non_unique,
    };
    let results = json!({
        "summary": io::UlamSummary::new(&p, st.tail_mass),
        "iterations": st.iterations,
        "increment": st.increment,
        "non_unique": st.non_unique,
        "resampled": p.resampled(),
        "l1": l1,
        "cells": st.cells,
        "density": st.density,
    });
    Ok(Outcome::new(results, pass, l1).resolved("map", &map).resolved("density", reference))
}

fn conjugacy(a: &ConjugacyArgs) -> CliResult<Outcome> {
    let c = CotangentConjugacy::new(a.gamma, a.a)?;
    let map = a.map.as_deref().map(io::parse_map).transpose()?.unwrap_or_else(|| c.boole_map());
    let rho = a.density.as_deref().map(io::parse_density).transpose()?.unwrap_or_else(|| c.cauchy());
    let grid = midpoint_grid(a.grid);
    let comm = check_commutation(&c, &map, &grid)?;
    let push = pushforward_density_check(&c, &rho, &grid)?;
    let pass = comm.max_residual <= a.tol && push.max_residual <= a.push_tol;
    let worst = comm.max_residual.max(push.max_residual);
    Ok(Outcome::new(json!({ "commutation": comm, "pushforward": push }), pass, Some(worst))
        .resolved("map", &map)
        .resolved("density", &rho))
}

fn mgf(a: &MgfArgs, csv: &Option<PathBuf>) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let base = io::parse_base(&a.base)?;
    let set = io::parse_set(&a.set)?;
    let record = mgf_record(&map, &base, &set, a.lambda, a.n)?;
    let fe = check_functional_equation(&map, &base, &set, a.lambda, a.n)?;
    let schur = schur_identity_residual(&map, &base, &set, a.n)?;
    if let Some(w) = csv_writer(csv)? {
        io::write_mgf_csv(w, &record)?;
    }
    let pass = fe.within_bound() && schur <= a.tol;
    let results = json!({
        "record": record,
        "functional_equation": fe,
        "schur_identity_residual": schur,
    });
    Ok(Outcome::new(results, pass, Some(fe.residual)).resolved("map", &map))
}

fn abel(a: &AbelArgs, csv: &Option<PathBuf>) -> CliResult<Outcome> {
    let (estimate, reference, results) = if let Some(atoms) = &a.atoms {
        let atoms = StieltjesAtoms::new(io::parse_atoms(atoms)?)?;
        let est = poisson_abel_limit(&atoms)?;
        let results = json!({ "atoms": atoms, "estimate": est });
        (est, a.expect, results)
    } else {
        let map = io::parse_map(&a.map)?;
        let base = io::parse_base(&a.base)?;
        let set = io::parse_set(&a.set)?;
        let est = abel_limit(&map, &base, &set)?;
        let schur = schur_average(&map, &base, &set, a.schur_n)?;
        let results = json!({ "map": map, "set": set, "estimate": est, "schur_average": schur });
        (est, Some(a.expect.unwrap_or(schur)), results)
    };
    if let Some(mut w) = csv_writer(csv)? {
        let mut wr = csv::Writer::from_writer(&mut w);
        wr.write_record(["lambda", "scaled_mgf"])?;
        for p in &estimate.sequence {
            wr.serialize(p)?;
        }
        wr.flush()?;
    }
    let gap = reference.map(|r| (estimate.limit - r).abs());
    let pass = gap.is_none_or(|g| g <= a.tol);
    Ok(Outcome::new(results, pass, gap))
}

fn baker(a: &BakerArgs) -> CliResult<Outcome> {
    let xs = match &a.x {
        Some(list) => io::parse_list(list)?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(a.seed);
            let mut xs = Vec::with_capacity(a.samples);
            while xs.len() < a.samples {
                let x: f64 = rng.gen();
                if !is_low_dyadic(x) {
                    xs.push(x);
                }
            }
            xs
        }
    };
    let mut worst_identity: f64 = 0.0;
    let mut expansion_ok = true;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let target = baker_target(x);
        let quarter = baker_sums(x, 0.25, a.terms)?.0;
        let half = baker_sums(x, 0.5, a.terms)?.1;
        worst_identity = worst_identity.max((quarter - target).abs()).max((half - target).abs());
        let mut expansions = Vec::new();
        for s in [0.25, 0.5] {
            let e = baker_expansion(x, s, a.terms)?;
            let r = (e.value - target).abs();
            expansion_ok &= r <= e.tail_bound + 1e-12;
            expansions.push(json!({ "s": s, "value": e.value, "residual": r, "tail_bound": e.tail_bound }));
        }
        rows.push(json!({
            "x": x,
            "target": target,
            "linear_quarter": quarter,
            "square_half": half,
            "expansions": expansions,
            "takagi": takagi_sum(x, a.terms)?,
        }));
    }
    let pass = worst_identity <= a.tol && expansion_ok;
    Ok(Outcome::new(json!({ "points": rows, "max_identity_residual": worst_identity }), pass, Some(worst_identity)))
}

fn twod(a: &TwodArgs, csv: &Option<PathBuf>) -> CliResult<Outcome> {
    let map = match a.variant {
        Variant::Product => Boole2DMap::Product,
        Variant::Swapped => Boole2DMap::Swapped,
    };
    let samples = parallel::jacobian_sweep(map, a.samples, a.seed, a.half)?;
    if let Some(w) = csv_writer(csv)? {
        io::write_jacobian_csv(w, &samples)?;
    }
    let dev_abs = samples.iter().map(|s| (s.sum - 1.0).abs()).fold(0.0, f64::max);
    let dev_signed = samples.iter().map(|s| (s.signed_sum - 1.0).abs()).fold(0.0, f64::max);
    let mut diagnostics = Value::Null;
    if let Boole2DMap::Swapped = map {
        let (mut roundtrip, mut relations, mut fd, mut pairing): (f64, f64, f64, f64) = (0.0, 0.0, 0.0, 0.0);
        for s in &samples {
            let b = inverse_branches_swapped(s.u, s.v)?;
            roundtrip = roundtrip.max(b.roundtrip_residual()?);
            relations = relations.max(b.relations().max());
            pairing = pairing.max(b.pairing_residual());
            if let Ok(num) = branch_jacobians_fd(s.u, s.v, 1e-6) {
                for (jc, jn) in b.jacobians().iter().zip(&num) {
                    for r in 0..2 {
                        for c in 0..2 {
                            fd = fd.max((jc[r][c] - jn[r][c]).abs() / (1.0 + jc[r][c].abs()));
                        }
                    }
                }
            }
        }
        diagnostics = json!({
            "max_roundtrip_residual": roundtrip,
            "max_relation_residual": relations,
            "max_pairing_residual": pairing,
            "max_fd_jacobian_gap": fd,
        });
    }
    let gate = if a.signed { dev_signed } else { dev_abs };
    let results = json!({
        "samples": samples.len(),
        "max_abs_sum_deviation": dev_abs,
        "max_signed_sum_deviation": dev_signed,
        "diagnostics": diagnostics,
    });
    Ok(Outcome::new(results, gate <= a.tol, Some(gate)))
}

fn nd(a: &NdArgs) -> CliResult<Outcome> {
    let sigma: Vec<usize> = a
        .sigma
        .split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(k) if k >= 1 => Ok(k - 1),
            _ => Err(usage(format!("bad sigma entry {s:?}"))),
        })
        .collect::<CliResult<_>>()?;
    let map = PermutationBooleMap::new(sigma)?;
    let u = match &a.u {
        Some(list) => io::parse_list(list)?,
        None => vec![0.0; map.n()],
    };
    let pre = nd_preimages(&map, &u)?;
    let dev = (pre.weight_sum - 1.0).abs();
    // sums without a certified enumeration are informational
    let pass = !pre.certified || dev <= a.tol;
    let results = json!({ "cycles": map.cycles(), "preimages": pre });
    Ok(Outcome::new(results, pass, Some(dev)))
}

fn birkhoff(a: &BirkhoffArgs) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let f = Observable::parse(&a.observable)?;
    if let Some(d) = &a.density {
        let rho = io::parse_density(d)?;
        let x0 = a.x0.unwrap_or_else(|| parallel::start_point(&map, a.seed));
        let r = time_vs_space_report(&map, &rho, &f, x0, a.n, a.seed)?;
        let pass = r.agree && r.composition_residual <= a.residual_tol;
        return Ok(Outcome::new(serde_json::to_value(&r)?, pass, Some(r.composition_residual))
            .resolved("map", &map)
            .resolved("density", &rho));
    }
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|k| a.seed.wrapping_add(k)).collect();
    let stats = match a.x0 {
        Some(x0) if a.seeds == 1 => vec![boole_core::ergostats::birkhoff_average(&map, &f, x0, a.n, a.seed)?],
        Some(_) => return Err(usage("--x0 requires --seeds 1")),
        None => parallel::birkhoff_ensemble(&map, &f, a.n, &seeds)?,
    };
    let k = stats.len() as f64;
    let mean = stats.iter().map(|s| s.running_mean).sum::<f64>() / k;
    let stderr = (stats.iter().map(|s| s.stderr_estimate.powi(2)).sum::<f64>()).sqrt() / k;
    let (pass, err) = match a.expect {
        Some(e) => {
            let mae = stats.iter().map(|s| (s.running_mean - e).abs()).sum::<f64>() / k;
            let tol = a.tol.unwrap_or(3.0 * stderr * k.sqrt());
            (mae <= tol, Some(mae))
        }
        None => (true, None),
    };
    let results = json!({ "orbits": stats, "mean": mean, "stderr": stderr, "mean_abs_error": err });
    Ok(Outcome::new(results, pass, err).resolved("map", &map))
}

fn histogram(a: &HistogramArgs, csv: &Option<PathBuf>) -> CliResult<Outcome> {
    let map = io::parse_map(&a.map)?;
    let x0 = a.x0.unwrap_or_else(|| parallel::start_point(&map, a.seed));
    let h = empirical_density(&map, x0, a.n, (a.lo, a.hi), a.bins, a.seed)?;
    if let Some(w) = csv_writer(csv)? {
        io::write_histogram_csv(w, &h)?;
    }
    let reference = a.density.as_deref().map(io::parse_density).transpose()?;
    // no comparison against an infinite invariant measure
    let l1 = match (&reference, h.infinite_measure) {
        (Some(d), false) => Some(h.l1_distance(d)?),
        _ => None,
    };
    let pass = l1.is_none_or(|d| d <= a.tol);
    Ok(Outcome::new(json!({ "histogram": h, "l1": l1 }), pass, l1).resolved("map", &map))
}

fn dispatch(cli: &Cli) -> CliResult<Outcome> {
    let csv = &cli.csv;
    let body = || match &cli.command {
        Command::VerifyDensity(a) => verify_density(a),
        Command::FixedPoints(a) => fixed_points(a),
        Command::QuasiMeasure(a) => quasi_measure(a),
        Command::Classify(a) => classify(a),
        Command::Ulam(a) => ulam(a, csv),
        Command::Conjugacy(a) => conjugacy(a),
        Command::Mgf(a) => mgf(a, csv),
        Command::Abel(a) => abel(a, csv),
        Command::BakerExpansion(a) => baker(a),
        Command::TwodInvariance(a) => twod(a, csv),
        Command::NdPreimages(a) => nd(a),
        Command::Birkhoff(a) => birkhoff(a),
        Command::Histogram(a) => histogram(a, csv),
    };
    parallel::with_threads(cli.threads, body)?
}

fn subcommand_name(c: &Command) -> String {
    match serde_json::to_value(c) {
        Ok(Value::Object(m)) => m.keys().next().cloned().unwrap_or_default(),
        _ => String::new(),
    }
}

/// Run a parsed command line and build its report.
pub fn run(cli: &Cli) -> CliResult<io::Report> {
    let start = Instant::now();
    let outcome = dispatch(cli)?;
    let mut config = serde_json::to_value(cli)?;
    if let Value::Object(m) = &mut config {
        for (k, v) in outcome.resolved {
            m.insert(format!("resolved_{k}"), v);
        }
    }
    Ok(io::Report {
        subcommand: subcommand_name(&cli.command),
        config,
        results: outcome.results,
        pass: outcome.pass,
        max_residual: outcome.max_residual,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Parse, run, write the report and return the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            eprintln!("{}", text.lines().next().unwrap_or("usage error"));
            return 1;
        }
    };
    let report = run(&cli).and_then(|r| {
        io::write_json(cli.out.as_deref(), &r)?;
        Ok(r)
    });
    match report {
        Ok(r) if r.pass => 0,
        Ok(_) => 2,
        Err(e) => {
            eprintln!("error: {}", one_line(&e));
            1
        }
    }
}

fn one_line(e: &CliError) -> String {
    e.to_string().lines().next().unwrap_or_default().to_string()
}
