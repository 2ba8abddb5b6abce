//! Rayon drivers. Every work item owns an RNG stream derived from the master
//! seed and its index, so results do not depend on the thread count.

use boole_core::boole2d::{jacobian_sample, Boole2DMap, JacobianSample};
use boole_core::ergostats::{birkhoff_average, Observable, OrbitStats};
use boole_core::maps1d::{Domain, Map1D};
use boole_core::transfer::{check_samples, ulam_row, UlamMatrix, UlamPartition};
use boole_core::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::CliResult;

/// Run `f` on a pool of `threads` workers (machine parallelism when `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> CliResult<T> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n);
    }
    Ok(b.build()?.install(f))
}

/// Same matrix as [`boole_core::transfer::ulam_matrix`], rows built in
/// parallel.
pub fn ulam_matrix_par(map: &Map1D, partition: &UlamPartition, samples_per_cell: usize, seed: u64) -> Result<UlamMatrix> {
    check_samples(samples_per_cell)?;
    let rows = (0..partition.len())
        .into_par_iter()
        .map(|i| ulam_row(map, partition, i, samples_per_cell, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(UlamMatrix {
        partition: *partition,
        samples_per_cell,
        seed,
        rows,
    })
}

const MAX_REJECTIONS: usize = 10_000;

/// Jacobian sums at `samples` points drawn uniformly from
/// `[-half, half]^2`, redrawing points outside the image.
pub fn jacobian_sweep(map: Boole2DMap, samples: usize, seed: u64, half: f64) -> Result<Vec<JacobianSample>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));
            for _ in 0..MAX_REJECTIONS {
                let u = rng.gen_range(-half..half);
                let v = rng.gen_range(-half..half);
                match jacobian_sample(map, u, v) {
                    Ok(s) => return Ok(s),
                    Err(Error::OutsideImage { .. } | Error::PoleProximity { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::Sampling {
                cell: i,
                hits: MAX_REJECTIONS,
                samples: MAX_REJECTIONS,
            })
        })
        .collect()
}

/// Start point drawn from the seed: uniform on `(0, 1)` for interval maps,
/// on `(-1, 1)` for maps of the line.
pub fn start_point(map: &Map1D, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match map.domain() {
        Domain::UnitInterval => rng.gen_range(f64::EPSILON..1.0),
        Domain::Line => rng.gen_range(-1.0..1.0),
    }
}

/// One Birkhoff average per seed, each from [`start_point`].
pub fn birkhoff_ensemble(map: &Map1D, f: &Observable, n: u64, seeds: &[u64]) -> Result<Vec<OrbitStats>> {
    seeds
        .par_iter()
        .map(|&s| birkhoff_average(map, f, start_point(map, s), n, s))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use boole_core::transfer::ulam_matrix;

    #[test]
    fn parallel_ulam_matches_serial() {
        let part = UlamPartition::line(20.0, 32).unwrap();
        let map = Map1D::special_boole(0.5, 0.0, 0.0, 0.5).unwrap();
        let a = ulam_matrix(&map, &part, 200, 3).unwrap();
        let b = with_threads(Some(3), || ulam_matrix_par(&map, &part, 200, 3)).unwrap().unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sweep_is_thread_independent() {
        let a = with_threads(Some(1), || jacobian_sweep(Boole2DMap::Product, 50, 7, 10.0)).unwrap().unwrap();
        let b = with_threads(Some(4), || jacobian_sweep(Boole2DMap::Product, 50, 7, 10.0)).unwrap().unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|s| (s.sum - 1.0).abs() < 1e-12 && s.branch_count == 4));
    }

    #[test]
    fn ensemble_is_deterministic() {
        let seeds = [1, 2, 3];
        let a = birkhoff_ensemble(&Map1D::Doubling, &Observable::Identity, 1000, &seeds).unwrap();
        let b = birkhoff_ensemble(&Map1D::Doubling, &Observable::Identity, 1000, &seeds).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0].running_mean, a[1].running_mean);
    }
}
