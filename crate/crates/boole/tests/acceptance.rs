//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::f64::consts::LN_2;
use std::panic;
use std::process::Command;
use std::time::{Duration, Instant};

use boole::parallel::{birkhoff_ensemble, jacobian_sweep, ulam_matrix_par};
use boole_core::boole2d::{branch_jacobians_fd, inverse_branches_swapped, nd_preimages, Boole2DMap, PermutationBooleMap};
use boole_core::conjugacy::{check_commutation, midpoint_grid, pushforward_density_check, CotangentConjugacy};
use boole_core::ergostats::Observable;
use boole_core::maps1d::{BooleMap1D, Map1D};
use boole_core::measures::{density_eval, quasi_measure_from_fixed_point, DensitySpec, QuasiMeasureCandidate};
use boole_core::mgf::{
    abel_limit, baker_expansion, baker_sums, baker_target, check_functional_equation, is_low_dyadic,
    modified_measure_identity, schur_average, schur_identity_residual, BaseMeasure,
};
use boole_core::quad::{integrate, QuadOptions};
use boole_core::transfer::{linspace, stationary_density, verify_invariant_density, UlamPartition};
use boole_core::{Complex64, Error};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

/// Collects sub-checks of one criterion; the criterion passes iff all do.
#[derive(Default)]
struct Checks {
    notes: Vec<String>,
    failed: bool,
}

impl Checks {
    fn check(&mut self, ok: bool, note: String) {
        if !ok {
            self.failed = true;
            self.notes.push(format!("FAILED {note}"));
        } else {
            self.notes.push(note);
        }
    }

    fn info(&mut self, note: String) {
        self.notes.push(format!("info {note}"));
    }

    fn finish(self) -> Outcome {
        let s = self.notes.join("; ");
        if self.failed {
            Err(s)
        } else {
            Ok(s)
        }
    }
}

fn timed(limit: Duration, c: &mut Checks, start: Instant) {
    let t = start.elapsed();
    c.check(t < limit, format!("runtime {:.3}s < {:.3}s", t.as_secs_f64(), limit.as_secs_f64()));
}

fn e(err: Error) -> String {
    format!("error: {err}")
}

fn cauchy_invariance() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    for (a, gamma) in [(0.0, 1.0), (1.0, 2.0), (-0.5, 0.7)] {
        let map = Map1D::special_boole(0.5, a, 2.0 * a, 0.5 * gamma * gamma).map_err(e)?;
        let rho = DensitySpec::cauchy(2.0 * a, gamma).map_err(e)?;
        let grid = linspace(-50.0 * gamma + 2.0 * a, 50.0 * gamma + 2.0 * a, 1000);
        let r = verify_invariant_density(&map, &rho, &grid, 1e-8).map_err(e)?;
        c.check(r.pass, format!("(a={a}, gamma={gamma}) rel {:.2e}", r.max_rel_residual));
    }
    timed(Duration::from_secs(1), &mut c, start);
    c.finish()
}

fn alpha_beta_invariance() -> Outcome {
    let mut c = Checks::default();
    for (alpha, beta) in [(0.3, 1.0), (0.7, 2.0), (0.5, 0.5)] {
        let bm = BooleMap1D::single(alpha, 0.0, beta, 0.0).map_err(e)?;
        let map = Map1D::GeneralizedBoole(bm.clone());
        let rho = DensitySpec::special_alpha_beta(alpha, beta).map_err(e)?;
        let scale = (beta / (1.0 - alpha)).sqrt();
        let grid = linspace(-50.0 * scale, 50.0 * scale, 1000);
        let r = verify_invariant_density(&map, &rho, &grid, 1e-8).map_err(e)?;
        c.check(r.pass, format!("(alpha={alpha}, beta={beta}) rel {:.2e}", r.max_rel_residual));

        let cands = quasi_measure_from_fixed_point(&bm).map_err(e)?;
        let dens: Vec<_> = cands
            .iter()
            .filter_map(|q| match q {
                QuasiMeasureCandidate::Invariant { density, .. } => Some(density),
                _ => None,
            })
            .collect();
        if dens.len() != 1 {
            c.check(false, format!("expected one invariant candidate, got {}", dens.len()));
            continue;
        }
        let mut worst: f64 = 0.0;
        for &x in &grid {
            let want = density_eval(&rho, x).map_err(e)?;
            let got = density_eval(dens[0], x).map_err(e)?;
            worst = worst.max((got - want).abs() / want);
        }
        c.check(worst <= 1e-12, format!("closed form gap {worst:.2e}"));
    }
    c.finish()
}

fn weight_sums() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let maps = [
        ("classical", BooleMap1D::classical()),
        ("N=2 symmetric", BooleMap1D::new(1.0, 0.0, vec![1.0, 1.0], vec![-1.0, 1.0]).map_err(e)?),
    ];
    for (name, m) in maps {
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let x = rng.gen_range(-100.0..100.0);
            let p = m.preimages(x).map_err(e)?;
            worst = worst.max((p.weight_sum() - 1.0).abs());
        }
        c.check(worst <= 1e-10, format!("{name} max |sum - 1| {worst:.2e}"));
    }
    c.finish()
}

fn random_map(rng: &mut ChaCha8Rng, alpha: f64, a: f64) -> BooleMap1D {
    loop {
        let n = rng.gen_range(1..=4);
        let mut bs: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
        bs.sort_by(f64::total_cmp);
        if bs.windows(2).any(|w| w[1] - w[0] < 0.3) {
            continue;
        }
        let betas = (0..n).map(|_| rng.gen_range(0.2..3.0)).collect();
        if let Ok(m) = BooleMap1D::new(alpha, a, betas, bs) {
            return m;
        }
    }
}

fn quadratic_roots(qa: Complex64, qb: Complex64, qc: Complex64) -> [Complex64; 2] {
    let d = (qb * qb - 4.0 * qa * qc).sqrt();
    [(-qb + d) / (2.0 * qa), (-qb - d) / (2.0 * qa)]
}

fn trichotomy() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut bad = [0usize; 3];
    let mut worst: f64 = 0.0;
    for regime in 0..3 {
        for _ in 0..100 {
            let (alpha, a) = match regime {
                0 => {
                    let al = if rng.gen() { rng.gen_range(0.1..0.9) } else { rng.gen_range(1.1..3.0) };
                    (al, rng.gen_range(-2.0..2.0))
                }
                1 => (1.0, if rng.gen() { rng.gen_range(0.2..2.0) } else { rng.gen_range(-2.0..-0.2) }),
                _ => (1.0, 0.0),
            };
            let m = random_map(&mut rng, alpha, a);
            let n = m.pole_count();
            let (count, resid) = match m.complex_fixed_points() {
                Ok(fp) => {
                    let count = if regime == 2 { fp.real().count() } else { fp.roots.len() };
                    (count, fp.max_residual)
                }
                Err(Error::DegenerateEquation) => (0, 0.0),
                Err(err) => return Err(e(err)),
            };
            let want = match regime {
                0 => n + 1,
                1 => n,
                _ => n - 1,
            };
            if count != want {
                bad[regime] += 1;
            }
            worst = worst.max(resid);
        }
    }
    c.check(bad == [0, 0, 0], format!("count mismatches per regime {bad:?}"));
    c.check(worst < 1e-10, format!("max residual {worst:.2e}"));

    // N = 1 against the explicit quadratic (alpha != 1) or linear (alpha = 1) solution
    let mut gap: f64 = 0.0;
    for i in 0..200 {
        let alpha = if i % 4 == 0 { 1.0 } else { rng.gen_range(0.1..3.0) };
        let a = rng.gen_range(0.2..2.0) * if rng.gen() { 1.0 } else { -1.0 };
        let b = rng.gen_range(-3.0..3.0);
        let beta = rng.gen_range(0.2..3.0);
        let m = BooleMap1D::single(alpha, a, beta, b).map_err(e)?;
        let mut got = m.complex_fixed_points().map_err(e)?.roots;
        let mut want: Vec<Complex64> = if alpha == 1.0 {
            vec![Complex64::new((a * b + beta) / a, 0.0)]
        } else {
            let r = quadratic_roots(
                Complex64::new(alpha - 1.0, 0.0),
                Complex64::new(a - (alpha - 1.0) * b, 0.0),
                Complex64::new(-(a * b + beta), 0.0),
            );
            r.to_vec()
        };
        if got.len() != want.len() {
            gap = f64::INFINITY;
            continue;
        }
        let key = |z: &Complex64| (z.re, z.im);
        got.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        want.sort_by(|x, y| key(x).partial_cmp(&key(y)).unwrap());
        for (g, w) in got.iter().zip(&want) {
            gap = gap.max((g - w).norm() / (1.0 + w.norm()));
        }
    }
    c.check(gap <= 1e-12, format!("N=1 closed form gap {gap:.2e}"));
    c.finish()
}

fn conjugacy() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    let grid = midpoint_grid(1000);
    for (gamma, a) in [(1.0, 0.0), (2.0, 1.0), (0.7, -0.5)] {
        let cj = CotangentConjugacy::new(gamma, a).map_err(e)?;
        let comm = check_commutation(&cj, &cj.boole_map(), &grid).map_err(e)?;
        let push = pushforward_density_check(&cj, &cj.cauchy(), &grid).map_err(e)?;
        c.check(comm.max_residual < 1e-9, format!("(gamma={gamma}, a={a}) commutation {:.2e}", comm.max_residual));
        c.check(push.max_residual < 1e-10, format!("pushforward {:.2e}", push.max_residual));
    }
    timed(Duration::from_millis(100), &mut c, start);
    c.finish()
}

const ROUNDING: f64 = 1e-12;

fn baker() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let (mut w1, mut w2): (f64, f64) = (0.0, 0.0);
    let mut within = true;
    let mut worst_ratio: f64 = 0.0;
    let mut n = 0;
    while n < 100 {
        let x: f64 = rng.gen();
        if is_low_dyadic(x) {
            continue;
        }
        n += 1;
        let t = baker_target(x);
        w1 = w1.max((baker_sums(x, 0.25, 40).map_err(e)?.0 - t).abs());
        w2 = w2.max((baker_sums(x, 0.5, 40).map_err(e)?.1 - t).abs());
        for s in [0.25, 0.5] {
            let r = baker_expansion(x, s, 40).map_err(e)?;
            let gap = (r.value - t).abs();
            // rounding slack: the analytic tail at s = 1/4 is far below one ulp
            within &= gap <= r.tail_bound + ROUNDING;
            worst_ratio = worst_ratio.max(gap / (r.tail_bound + ROUNDING));
        }
    }
    c.check(w1 <= 1e-9, format!("linear series at s=1/4 gap {w1:.2e}"));
    c.check(w2 <= 1e-9, format!("quadratic series at s=1/2 gap {w2:.2e}"));
    c.check(within, format!("expansion gap / tail bound <= {worst_ratio:.2e}"));
    c.finish()
}

fn mgf_suite() -> Outcome {
    let mut c = Checks::default();
    // Gauss preimages branch 64-fold, so it only runs at shallow depth
    let maps = [Map1D::Doubling, Map1D::Baker];
    let sets: [&[(f64, f64)]; 3] = [&[(0.0, 0.5)], &[(0.25, 0.6)], &[(0.1, 0.2), (0.7, 0.9)]];
    let lambdas = [0.3, 0.5, 0.7, 0.9];
    let bases = [BaseMeasure::LebesgueOn01, BaseMeasure::linear_ramp()];
    let mut combos = 0;
    let mut ok = true;
    let mut worst: f64 = 0.0;
    'outer: for (i, map) in maps.iter().enumerate() {
        for (j, set) in sets.iter().enumerate() {
            for (k, &lambda) in lambdas.iter().enumerate() {
                let base = &bases[(i + j + k) % 2];
                let r = check_functional_equation(map, base, set, lambda, 50).map_err(e)?;
                ok &= r.within_bound();
                worst = worst.max(r.residual / r.bound);
                combos += 1;
                if combos == 20 {
                    break 'outer;
                }
            }
        }
    }
    c.check(ok && combos == 20, format!("{combos} combos, residual/bound <= {worst:.2e}"));
    let mut gauss_ok = true;
    for &lambda in &lambdas {
        gauss_ok &= check_functional_equation(&Map1D::Gauss, &bases[0], &[(0.25, 0.6)], lambda, 2)
            .map_err(e)?
            .within_bound();
    }
    c.check(gauss_ok, "Gauss at depth 2 within bound".into());

    let ramp = BaseMeasure::linear_ramp();
    let half: &[(f64, f64)] = &[(0.0, 0.5)];
    let mut shift: f64 = 0.0;
    let mut modified: f64 = 0.0;
    for map in &maps {
        for n in [1, 5, 20, 40] {
            shift = shift.max(schur_identity_residual(map, &ramp, half, n).map_err(e)?);
        }
        for s in [0.25, 0.5] {
            modified = modified.max(modified_measure_identity(map, &ramp, half, s, 50).map_err(e)?.residual);
        }
    }
    shift = shift.max(schur_identity_residual(&Map1D::Gauss, &ramp, half, 1).map_err(e)?);
    c.check(shift <= 1e-12, format!("shift identity {shift:.2e}"));
    c.check(modified <= 1e-9, format!("modified-measure identity {modified:.2e}"));

    let abel = abel_limit(&Map1D::Doubling, &ramp, half).map_err(e)?;
    let schur = schur_average(&Map1D::Doubling, &ramp, half, 64).map_err(e)?;
    let gap = (abel.limit - schur).abs();
    c.check(
        gap <= 2e-3,
        format!("Abel {:.6} vs Schur(64) {schur:.6}: gap {gap:.2e} <= 2e-3", abel.limit),
    );
    c.finish()
}

fn gauss_average() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    let q = integrate(|x| x / (1.0 + x), 0.0, 1.0, &QuadOptions::default());
    let target = q.value / LN_2;
    c.check((target - 0.442_695_0).abs() < 1e-7, format!("quadrature target {target:.9}"));
    let seeds: Vec<u64> = (0..10).collect();
    let runs = birkhoff_ensemble(&Map1D::Gauss, &Observable::Identity, 10_000_000, &seeds).map_err(e)?;
    let err = runs.iter().map(|r| (r.running_mean - target).abs()).sum::<f64>() / runs.len() as f64;
    c.check(err < 5e-3, format!("mean |estimate - target| {err:.2e} over {} seeds", runs.len()));
    timed(Duration::from_secs(60), &mut c, start);
    c.finish()
}

fn ulam_gauss() -> Outcome {
    let mut c = Checks::default();
    let start = Instant::now();
    let part = UlamPartition::for_map(&Map1D::Gauss, 0.0, 512).map_err(e)?;
    let p = ulam_matrix_par(&Map1D::Gauss, &part, 10_000, 0).map_err(e)?;
    let st = stationary_density(&p).map_err(e)?;
    let l1 = st.l1_distance(&DensitySpec::GaussDensity).map_err(e)?;
    c.check(l1 < 0.02, format!("L1 {l1:.2e}"));
    timed(Duration::from_secs(30), &mut c, start);
    c.finish()
}

fn jac_gap(a: &[[[f64; 2]; 2]; 2], b: &[[[f64; 2]; 2]; 2]) -> f64 {
    let mut g: f64 = 0.0;
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                g = g.max((a[k][i][j] - b[k][i][j]).abs() / (1.0 + b[k][i][j].abs()));
            }
        }
    }
    g
}

fn twod() -> Outcome {
    let mut c = Checks::default();
    let samples = jacobian_sweep(Boole2DMap::Swapped, 1000, 10, 10.0).map_err(e)?;
    let abs_gap = samples.iter().map(|s| (s.sum - 1.0).abs()).fold(0.0, f64::max);
    let signed_gap = samples.iter().map(|s| (s.signed_sum - 1.0).abs()).fold(0.0, f64::max);
    let (mut fd, mut rt, mut rel): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for s in &samples {
        let br = inverse_branches_swapped(s.u, s.v).map_err(e)?;
        fd = fd.max(jac_gap(&branch_jacobians_fd(s.u, s.v, 1e-6).map_err(e)?, &br.jacobians()));
        rt = rt.max(br.roundtrip_residual().map_err(e)?);
        rel = rel.max(br.relations().max());
    }
    c.check(abs_gap <= 1e-8, format!("max |sum |det| - 1| {abs_gap:.2e}"));
    c.info(format!("max |sum det - 1| {signed_gap:.2e}"));
    c.check(fd <= 1e-5, format!("closed form vs FD {fd:.2e}"));
    c.check(rt < 1e-9, format!("roundtrip {rt:.2e}"));
    c.check(rel <= 1e-10, format!("branch relations {rel:.2e}"));
    c.finish()
}

fn nd() -> Outcome {
    let mut c = Checks::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for n in 2..=4 {
        let maps = [
            ("identity", PermutationBooleMap::identity(n).map_err(e)?),
            ("transposition", PermutationBooleMap::from_cycles(n, &[&[0, 1]]).map_err(e)?),
        ];
        for (name, m) in &maps {
            let mut worst: f64 = 0.0;
            for _ in 0..200 {
                let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
                let p = nd_preimages(m, &u).map_err(e)?;
                worst = worst.max((p.weight_sum - 1.0).abs());
            }
            c.check(worst <= 1e-8, format!("n={n} {name} max |sum - 1| {worst:.2e}"));
        }
        if n >= 3 {
            let m = PermutationBooleMap::from_cycles(n, &[&[0, 1, 2]]).map_err(e)?;
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let p = nd_preimages(&m, &u).map_err(e)?;
            c.info(format!("n={n} 3-cycle sum {:.6} certified {}", p.weight_sum, p.certified));
        }
    }
    c.finish()
}

fn run_cli(args: &[&str]) -> Result<(i32, f64), String> {
    let dir = tempfile::tempdir().map_err(|x| x.to_string())?;
    let out = dir.path().join("report.json");
    let status = Command::new(env!("CARGO_BIN_EXE_boole"))
        .arg("--out")
        .arg(&out)
        .args(args)
        .status()
        .map_err(|x| x.to_string())?;
    let text = std::fs::read_to_string(&out).map_err(|x| x.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&text).map_err(|x| x.to_string())?;
    let r = v["max_residual"].as_f64().ok_or("report has no max_residual")?;
    Ok((status.code().unwrap_or(-1), r))
}

fn negative_controls() -> Outcome {
    let mut c = Checks::default();
    let half = r#"{"type":"special_boole","alpha":0.5,"a":0,"b":0,"beta":0.5}"#;
    let ab = r#"{"type":"generalized_boole","alpha":0.3,"a":0,"betas":[1],"bs":[0]}"#;
    let cases: [(&str, Vec<&str>); 6] = [
        ("widened Cauchy", vec!["verify-density", "--map", half, "--density", "cauchy:0:1.05"]),
        ("shifted Cauchy", vec!["verify-density", "--map", half, "--density", "cauchy:0.1:1"]),
        ("perturbed beta", vec!["verify-density", "--map", ab, "--density", "alpha_beta:0.3:1.3"]),
        ("mismatched conjugacy", vec!["conjugacy", "--gamma", "1", "--a", "0.3", "--map", half]),
        ("wrong pushforward density", vec!["conjugacy", "--gamma", "1", "--density", "cauchy:0:1.1"]),
        ("Ulam vs uniform", vec!["ulam", "--map", "gauss", "--m", "64", "--samples", "1000", "--density", "lebesgue"]),
    ];
    for (name, args) in cases {
        let (code, r) = run_cli(&args)?;
        c.check(code == 2 && r > 1e-2, format!("{name}: exit {code}, residual {r:.2e}"));
    }
    // the same checks through the library entry point
    let code = boole::cli::main_with_args([
        "boole", "--out", "/dev/null", "birkhoff", "--map", "gauss", "--observable", "x", "--n", "100000",
        "--expect", "0.5", "--tol", "1e-3",
    ]);
    c.check(code == 2, format!("perturbed Gauss target: exit {code}"));
    c.finish()
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("Cauchy invariance", cauchy_invariance),
        ("alpha-beta invariance and quasi-measure", alpha_beta_invariance),
        ("preimage weight sums", weight_sums),
        ("fixed-point trichotomy", trichotomy),
        ("cotangent conjugacy", conjugacy),
        ("baker expansions", baker),
        ("generating-function suite", mgf_suite),
        ("Gauss ergodic average", gauss_average),
        ("Ulam density for Gauss", ulam_gauss),
        ("2D swapped-map invariance", twod),
        ("nD permuted maps", nd),
        ("negative controls", negative_controls),
    ];
    let mut failures = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let r = panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let t = start.elapsed().as_secs_f64();
        match r {
            Ok(s) => println!("PASS {:>2} {name} ({t:.2}s): {s}", i + 1),
            Err(s) => {
                failures += 1;
                println!("FAIL {:>2} {name} ({t:.2}s): {s}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
