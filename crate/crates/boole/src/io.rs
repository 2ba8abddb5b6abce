//! Argument parsing for maps, densities and sets, plus JSON and CSV writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use boole_core::ergostats::Histogram;
use boole_core::maps1d::Map1D;
use boole_core::measures::DensitySpec;
use boole_core::mgf::{BaseMeasure, MgfRecord};
use boole_core::transfer::{UlamMatrix, UlamPartition};
use boole_core::boole2d::JacobianSample;
use boole_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{usage, CliResult};

/// Inline text, or the contents of a file when prefixed with `@`.
fn inline_or_file(arg: &str) -> CliResult<String> {
    match arg.strip_prefix('@') {
        Some(path) => Ok(fs::read_to_string(path)?),
        None => Ok(arg.to_string()),
    }
}

/// A map as JSON (`{"type": "special_boole", ...}`), `@file`, or one of the
/// bare names `classical_boole`, `baker`, `gauss`, `doubling`, `identity`.
pub fn parse_map(arg: &str) -> CliResult<Map1D> {
    let text = inline_or_file(arg)?;
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| usage(format!("bad map: {e}")));
    }
    match text {
        "classical_boole" | "boole" => Ok(Map1D::ClassicalBoole),
        "baker" | "tent" => Ok(Map1D::Baker),
        "gauss" => Ok(Map1D::Gauss),
        "doubling" => Ok(Map1D::Doubling),
        "identity" => Ok(Map1D::Identity),
        _ => Err(usage(format!("bad map: {text:?}"))),
    }
}

fn numbers(parts: &[&str], what: &str) -> CliResult<Vec<f64>> {
    parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| usage(format!("bad number {p:?} in {what}"))))
        .collect()
}

/// `cauchy:C:G`, `alpha_beta:A:B`, `gauss`, `lebesgue`, `poisson:RE:IM`,
/// JSON, or `@file`.
pub fn parse_density(arg: &str) -> CliResult<DensitySpec> {
    let text = inline_or_file(arg)?;
    let text = text.trim();
    if text.starts_with('{') {
        return serde_json::from_str(text).map_err(|e| usage(format!("bad density: {e}")));
    }
    let parts: Vec<&str> = text.split(':').collect();
    let d = match (parts[0], parts.len()) {
        ("cauchy", 3) => {
            let v = numbers(&parts[1..], "density")?;
            DensitySpec::cauchy(v[0], v[1])?
        }
        ("alpha_beta", 3) => {
            let v = numbers(&parts[1..], "density")?;
            DensitySpec::special_alpha_beta(v[0], v[1])?
        }
        ("poisson", 3) => {
            let v = numbers(&parts[1..], "density")?;
            DensitySpec::poisson(Complex64::new(v[0], v[1]))
        }
        ("gauss", 1) => DensitySpec::GaussDensity,
        ("lebesgue", 1) => DensitySpec::LebesgueUnit,
        _ => return Err(usage(format!("bad density: {text:?}"))),
    };
    d.validate()?;
    Ok(d)
}

/// `lebesgue`, `ramp` (density `2x`), JSON `{"points": [...], "values": [...]}`
/// or `@file`.
pub fn parse_base(arg: &str) -> CliResult<BaseMeasure> {
    #[derive(Deserialize)]
    #[serde(deny_unknown_fields)]
    struct GridJson {
        points: Vec<f64>,
        values: Vec<f64>,
    }
    let text = inline_or_file(arg)?;
    match text.trim() {
        "lebesgue" => Ok(BaseMeasure::LebesgueOn01),
        "ramp" => Ok(BaseMeasure::linear_ramp()),
        t if t.starts_with('{') => {
            let g: GridJson = serde_json::from_str(t).map_err(|e| usage(format!("bad base measure: {e}")))?;
            Ok(BaseMeasure::density(g.points, g.values)?)
        }
        t => Err(usage(format!("bad base measure: {t:?}"))),
    }
}

/// `lo:hi[,lo:hi...]`
pub fn parse_set(arg: &str) -> CliResult<Vec<(f64, f64)>> {
    arg.split(',')
        .map(|iv| {
            let v = numbers(&iv.split(':').collect::<Vec<_>>(), "set")?;
            match v.as_slice() {
                [lo, hi] if lo <= hi => Ok((*lo, *hi)),
                _ => Err(usage(format!("bad interval {iv:?}; expected lo:hi"))),
            }
        })
        .collect()
}

/// Comma-separated numbers.
pub fn parse_list(arg: &str) -> CliResult<Vec<f64>> {
    numbers(&arg.split(',').collect::<Vec<_>>(), "list")
}

/// Pairs `s:mass` separated by commas.
pub fn parse_atoms(arg: &str) -> CliResult<Vec<(f64, f64)>> {
    arg.split(',')
        .map(|p| {
            let v = numbers(&p.split(':').collect::<Vec<_>>(), "atoms")?;
            match v.as_slice() {
                [s, m] => Ok((*s, *m)),
                _ => Err(usage(format!("bad atom {p:?}; expected s:mass"))),
            }
        })
        .collect()
}

/// Machine-readable run report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Report {
    pub subcommand: String,
    pub config: serde_json::Value,
    pub results: serde_json::Value,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    pub runtime_ms: f64,
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n")?,
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
        }
    }
    Ok(())
}

/// Summary written next to an Ulam matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UlamSummary {
    pub m: usize,
    #[serde(rename = "L")]
    pub half_width: Option<f64>,
    pub tail_mass: f64,
    pub seed: u64,
}

impl UlamSummary {
    pub fn new(p: &UlamMatrix, tail_mass: f64) -> Self {
        let (m, half_width) = match p.partition {
            UlamPartition::Line { half_width, m } => (m, Some(half_width)),
            UlamPartition::Unit { m } => (m, None),
        };
        UlamSummary {
            m,
            half_width,
            tail_mass,
            seed: p.seed,
        }
    }
}

/// Dense matrix, one row per line, no header.
pub fn write_ulam_csv<W: Write>(w: W, p: &UlamMatrix) -> CliResult<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in p.to_dense() {
        wr.serialize(row)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_mgf_csv<W: Write>(w: W, r: &MgfRecord) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["lambda", "scaled_mgf"])?;
    for (l, v) in &r.abel_estimates {
        wr.serialize((l, v))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(w: W, h: &Histogram) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["bin_lo", "bin_hi", "count", "normalized"])?;
    for (i, &c) in h.counts.iter().enumerate() {
        let (lo, hi) = h.bin_edges(i);
        let norm = h.normalized.as_ref().map(|n| n[i].to_string()).unwrap_or_default();
        wr.write_record([lo.to_string(), hi.to_string(), c.to_string(), norm])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_jacobian_csv<W: Write>(w: W, samples: &[JacobianSample]) -> CliResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["u", "v", "sum", "branch_count"])?;
    for s in samples {
        wr.serialize((s.u, s.v, s.sum, s.branch_count))?;
    }
    wr.flush()?;
    Ok(())
}
