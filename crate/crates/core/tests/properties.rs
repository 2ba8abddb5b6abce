use boole_core::boole2d::{
    branch_jacobians_fd, inverse_branches_swapped, jacobian_sum, jacobian_sum_signed, nd_preimages, Boole2DMap, PermutationBooleMap,
};
use boole_core::conjugacy::{orbit_transport, CotangentConjugacy};
use boole_core::ergostats::{birkhoff_average, empirical_density, Observable};
use boole_core::maps1d::{BooleMap1D, Map1D};
use boole_core::measures::{
    classify_ergodicity, density_eval, density_integral, quasi_measure_from_fixed_point, DensitySpec,
    ErgodicityClass, QuasiMeasureCandidate,
};
use boole_core::mgf::{
    baker_sums, baker_target, check_functional_equation, is_low_dyadic, mgf_partial, pullback_measure,
    schur_identity_residual, BaseMeasure,
};
use boole_core::transfer::{apply_fp, linspace, stationary_density, ulam_matrix, verify_invariant_density, UlamPartition};
use proptest::prelude::*;

/// Random generalized Boole map with poles at least 0.3 apart.
fn boole_map(alpha: impl Strategy<Value = f64>, a: impl Strategy<Value = f64>) -> impl Strategy<Value = BooleMap1D> {
    (alpha, a, 1usize..=3)
        .prop_flat_map(|(alpha, a, n)| {
            (
                Just(alpha),
                Just(a),
                prop::collection::vec(0.1f64..3.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
            )
        })
        .prop_filter("poles too close", |(_, _, _, bs)| {
            bs.iter()
                .enumerate()
                .all(|(i, x)| bs[..i].iter().all(|y| (x - y).abs() > 0.3))
        })
        .prop_map(|(alpha, a, betas, mut bs)| {
            bs.sort_by(f64::total_cmp);
            BooleMap1D::new(alpha, a, betas, bs).unwrap()
        })
}

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        failure_persistence: None,
        ..ProptestConfig::default()
    }
}

fn image_point() -> impl Strategy<Value = (f64, f64)> {
    (-10.0f64..10.0, -10.0f64..10.0).prop_filter("outside image", |&(u, v)| {
        u.abs() > 1e-3 && v.abs() > 1e-3 && u * u + 4.0 * u / v >= 1e-6 && v * v + 4.0 * v / u >= 1e-6
    })
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn one_preimage_per_monotone_branch(m in boole_map(0.2f64..2.0, -3.0f64..3.0), x in -50.0f64..50.0) {
        let pre = m.preimages(x).unwrap();
        prop_assert_eq!(pre.branches.len(), m.pole_count() + 1);
        for (j, b) in pre.branches.iter().enumerate() {
            let (lo, hi) = m.monotone_interval(j);
            prop_assert!(b.y > lo && b.y < hi);
            prop_assert!((m.eval(b.y).unwrap() - x).abs() <= 1e-9 * (1.0 + x.abs()));
        }
    }

    #[test]
    fn weights_sum_to_inverse_slope(m in boole_map(0.2f64..2.0, -3.0f64..3.0), x in -50.0f64..50.0) {
        // sum of roots is (x - a)/alpha + sum b_j, so d/dx of it is 1/alpha
        let w = m.preimages(x).unwrap().weight_sum();
        prop_assert!((w * m.alpha() - 1.0).abs() < 1e-9, "{}", w);
    }

    #[test]
    fn lebesgue_weight_sum_is_one(m in boole_map(Just(1.0), Just(0.0)), x in -100.0f64..100.0) {
        let w = m.preimages(x).unwrap().weight_sum();
        prop_assert!((w - 1.0).abs() < 1e-10);
    }

    #[test]
    fn derivative_matches_finite_difference(m in boole_map(0.2f64..2.0, -3.0f64..3.0), y in -20.0f64..20.0) {
        prop_assume!(m.poles().iter().all(|b| (y - b).abs() > 0.05));
        let h = 1e-6;
        let fd = (m.eval(y + h).unwrap() - m.eval(y - h).unwrap()) / (2.0 * h);
        let d = m.derivative(y).unwrap();
        prop_assert!((fd - d).abs() <= 1e-6 * d.abs().max(1.0), "{} vs {}", fd, d);
    }

    #[test]
    fn fixed_point_counts_and_residuals(
        m in boole_map(prop_oneof![0.1f64..0.95, 1.05f64..3.0, Just(1.0)], prop_oneof![Just(0.0), 0.5f64..3.0]),
    ) {
        let fp = m.complex_fixed_points().unwrap();
        let n = m.pole_count();
        let expected = if m.alpha() != 1.0 { n + 1 } else if m.a() != 0.0 { n } else { n - 1 };
        prop_assert_eq!(fp.roots.len(), expected);
        for r in &fp.roots {
            prop_assert!((m.eval_complex(*r) - r).norm() < 1e-10 * (1.0 + r.norm()));
        }
    }

    #[test]
    fn finite_ergodic_iff_upper_fixed_point(
        m in boole_map(prop_oneof![0.1f64..0.95, 1.05f64..3.0], -3.0f64..3.0),
    ) {
        let fp = m.complex_fixed_points().unwrap();
        let finite = classify_ergodicity(&m) == ErgodicityClass::FiniteErgodic;
        prop_assert_eq!(finite, !fp.upper.is_empty());
    }

    #[test]
    fn quasi_measures_are_invariant_probability_densities(m in boole_map(0.1f64..0.95, -3.0f64..3.0)) {
        for c in quasi_measure_from_fixed_point(&m).unwrap() {
            if let QuasiMeasureCandidate::Invariant { fixed_point, density } = c {
                let total = density_integral(&density, f64::NEG_INFINITY, f64::INFINITY).unwrap();
                prop_assert!((total - 1.0).abs() < 1e-12);
                let grid = linspace(fixed_point.re - 50.0, fixed_point.re + 50.0, 1000);
                for &x in &grid {
                    prop_assert!(density_eval(&density, x).unwrap() >= 0.0);
                }
                let r = verify_invariant_density(&Map1D::GeneralizedBoole(m.clone()), &density, &grid, 1e-8).unwrap();
                prop_assert!(r.pass, "{:?}", r);
            }
        }
    }

    #[test]
    fn closed_form_density_equals_poisson_kernel(alpha in 0.05f64..0.95, beta in 0.1f64..5.0) {
        let m = BooleMap1D::single(alpha, 0.0, beta, 0.0).unwrap();
        let closed = DensitySpec::special_alpha_beta(alpha, beta).unwrap();
        let cands = quasi_measure_from_fixed_point(&m).unwrap();
        let kernel = cands.iter().find_map(|c| match c {
            QuasiMeasureCandidate::Invariant { density, .. } => Some(density.clone()),
            _ => None,
        }).unwrap();
        for x in linspace(-100.0, 100.0, 401) {
            let (p, q) = (density_eval(&closed, x).unwrap(), density_eval(&kernel, x).unwrap());
            prop_assert!((p - q).abs() < 1e-12, "x={} {} vs {}", x, p, q);
        }
    }

    #[test]
    fn transfer_operator_is_linear(c1 in -3.0f64..3.0, c2 in -3.0f64..3.0, x in -20.0f64..20.0) {
        let m = Map1D::special_boole(0.5, 0.3, 0.6, 0.8).unwrap();
        let r1 = |y: f64| (-y * y / 10.0).exp();
        let r2 = |y: f64| 1.0 / (1.0 + y * y);
        let mix = move |y: f64| c1 * r1(y) + c2 * r2(y);
        let lhs = apply_fp(&m, &mix, x).unwrap();
        let rhs = c1 * apply_fp(&m, &r1, x).unwrap() + c2 * apply_fp(&m, &r2, x).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn conjugacy_transports_orbits(s0 in 0.01f64..0.99, gamma in 0.2f64..3.0, a in -2.0f64..2.0) {
        prop_assume!(!is_low_dyadic(s0));
        let c = CotangentConjugacy::new(gamma, a).unwrap();
        // stop where xi is no longer evaluable
        let mut s = s0;
        let mut n = 0;
        while n < 30 {
            s = (2.0 * s) % 1.0;
            if !(1e-6..1.0 - 1e-6).contains(&s) { break; }
            n += 1;
        }
        for gap in orbit_transport(&c, &c.boole_map(), s0, n).unwrap() {
            prop_assert!(gap < 1e-6, "{}", gap);
        }
    }

    #[test]
    fn xi_strictly_decreasing(s in 0.001f64..0.998, gamma in 0.1f64..5.0, a in -5.0f64..5.0) {
        let c = CotangentConjugacy::new(gamma, a).unwrap();
        prop_assert!(c.xi(s + 1e-3).unwrap() < c.xi(s).unwrap());
    }

    #[test]
    fn swapped_branches_roundtrip((u, v) in image_point()) {
        let b = inverse_branches_swapped(u, v).unwrap();
        prop_assert!(b.roundtrip_residual().unwrap() < 1e-9);
    }

    #[test]
    fn swapped_jacobians_match_finite_differences((u, v) in image_point()) {
        let b = inverse_branches_swapped(u, v).unwrap();
        // keep the difference stencil inside the image
        prop_assume!(u * u + 4.0 * u / v > 1e-2 && v * v + 4.0 * v / u > 1e-2);
        let num = branch_jacobians_fd(u, v, 1e-6).unwrap();
        for (jc, jn) in b.jacobians().iter().zip(&num) {
            for r in 0..2 {
                for c in 0..2 {
                    prop_assert!((jc[r][c] - jn[r][c]).abs() <= 1e-5 * (1.0 + jc[r][c].abs()));
                }
            }
        }
    }

    #[test]
    fn swapped_branch_relations((u, v) in image_point()) {
        let r = inverse_branches_swapped(u, v).unwrap().relations();
        prop_assert!(r.max() < 1e-10, "{:?}", r);
    }

    #[test]
    fn swapped_jacobian_sum_is_one((u, v) in image_point()) {
        let s = jacobian_sum(Boole2DMap::Swapped, u, v).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-8, "sum {} at ({}, {})", s, u, v);
    }

    #[test]
    fn swapped_signed_jacobian_sum_is_one((u, v) in image_point()) {
        let s = jacobian_sum_signed(Boole2DMap::Swapped, u, v).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-8, "{}", s);
    }

    #[test]
    fn swapped_branch_products((u, v) in image_point()) {
        let b = inverse_branches_swapped(u, v).unwrap();
        let ((xp, yp), (xm, ym)) = (b.plus, b.minus);
        prop_assert!((xp * xm + u / v).abs() <= 1e-10 * (1.0 + (u / v).abs()));
        prop_assert!((yp * ym + v / u).abs() <= 1e-10 * (1.0 + (v / u).abs()));
    }

    #[test]
    fn product_jacobian_sum_is_one(u in -10.0f64..10.0, v in -10.0f64..10.0) {
        let s = jacobian_sum(Boole2DMap::Product, u, v).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_permutation_weight_sum(n in 2usize..=4, u in prop::collection::vec(-10.0f64..10.0, 4)) {
        let p = nd_preimages(&PermutationBooleMap::identity(n).unwrap(), &u[..n]).unwrap();
        prop_assert!(p.certified);
        prop_assert_eq!(p.points.len(), 1 << n);
        prop_assert!((p.weight_sum - 1.0).abs() < 1e-8);
    }

    #[test]
    fn transposition_weight_sum((u, v) in image_point(), w in -10.0f64..10.0) {
        let map = PermutationBooleMap::from_cycles(3, &[&[0, 1], &[2]]).unwrap();
        let p = nd_preimages(&map, &[u, v, w]).unwrap();
        prop_assert!(p.certified);
        prop_assert!((p.weight_sum - 1.0).abs() < 1e-8, "{}", p.weight_sum);
    }

    #[test]
    fn truncation_consistency(lambda in -0.95f64..0.95, n in 1usize..40, lo in 0.0f64..0.5, len in 0.01f64..0.5) {
        let set = [(lo, lo + len)];
        let base = BaseMeasure::linear_ramp();
        for map in [Map1D::Doubling, Map1D::Baker] {
            let a = mgf_partial(&map, &base, &set, lambda, n).unwrap().value;
            let b = mgf_partial(&map, &base, &set, lambda, n + 1).unwrap().value;
            let term = lambda.powi(n as i32) * pullback_measure(&map, &base, &set, n).unwrap();
            prop_assert!((b - a - term).abs() <= 1e-15 * (1.0 + a.abs()) / (1.0 - lambda.abs()));
        }
    }

    #[test]
    fn functional_equation_within_tail_bound(lambda in -0.95f64..0.95, lo in 0.0f64..0.5, len in 0.01f64..0.5) {
        let set = [(lo, lo + len)];
        for map in [Map1D::Doubling, Map1D::Baker] {
            for base in [BaseMeasure::LebesgueOn01, BaseMeasure::linear_ramp()] {
                let r = check_functional_equation(&map, &base, &set, lambda, 40).unwrap();
                prop_assert!(r.within_bound(), "{:?}", r);
            }
        }
    }

    #[test]
    fn schur_shift_identity(n in 1usize..40, lo in 0.0f64..0.5, len in 0.01f64..0.5) {
        let r = schur_identity_residual(&Map1D::Doubling, &BaseMeasure::linear_ramp(), &[(lo, lo + len)], n).unwrap();
        prop_assert!(r < 1e-12, "{}", r);
    }

    #[test]
    fn tent_series_identities(x in 0.0f64..1.0) {
        prop_assume!(!is_low_dyadic(x));
        let t = baker_target(x);
        prop_assert!((baker_sums(x, 0.25, 40).unwrap().0 - t).abs() < 1e-9);
        prop_assert!((baker_sums(x, 0.5, 40).unwrap().1 - t).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(config(16))]

    #[test]
    fn ulam_rows_are_stochastic(m in 2usize..40, seed in any::<u64>()) {
        for (map, part) in [
            (Map1D::Gauss, UlamPartition::unit(m).unwrap()),
            (Map1D::special_boole(0.5, 0.0, 0.0, 0.5).unwrap(), UlamPartition::line(20.0, m).unwrap()),
        ] {
            let p = ulam_matrix(&map, &part, 100, seed).unwrap();
            for row in &p.rows {
                let s: f64 = row.entries.iter().map(|e| e.1).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_vector_is_fixed(m in 4usize..64, seed in any::<u64>()) {
        let p = ulam_matrix(&Map1D::Gauss, &UlamPartition::unit(m).unwrap(), 200, seed).unwrap();
        let st = stationary_density(&p).unwrap();
        let next = p.left_mul(&st.mass);
        let gap: f64 = next.iter().zip(&st.mass).map(|(a, b)| (a - b).abs()).sum();
        prop_assert!(gap < 1e-10, "{}", gap);
    }

    #[test]
    fn orbits_are_deterministic(x0 in 0.01f64..0.99, seed in any::<u64>()) {
        for map in [Map1D::Doubling, Map1D::Baker, Map1D::Gauss] {
            let a = birkhoff_average(&map, &Observable::Square, x0, 5000, seed);
            let b = birkhoff_average(&map, &Observable::Square, x0, 5000, seed);
            prop_assert_eq!(a, b);
        }
    }

    #[test]
    fn histogram_counts_match_window(x0 in -3.0f64..3.0, lo in -10.0f64..0.0, hi in 0.5f64..10.0) {
        let m = Map1D::special_boole(0.5, 0.0, 0.0, 0.5).unwrap();
        let h = empirical_density(&m, x0, 20_000, (lo, hi), 25, 0).unwrap();
        prop_assert_eq!(h.counts.iter().sum::<u64>(), h.in_window);
        prop_assert_eq!(h.total, 20_000);
    }
}

#[test]
fn stderr_shrinks_like_inverse_sqrt() {
    // the ratio is itself random; average it over independent seeds
    let mut ratios = Vec::new();
    for seed in 0..8 {
        let a = birkhoff_average(&Map1D::Doubling, &Observable::Identity, 0.3, 1 << 18, seed).unwrap();
        let b = birkhoff_average(&Map1D::Doubling, &Observable::Identity, 0.3, 1 << 19, seed).unwrap();
        ratios.push(a.stderr_estimate / b.stderr_estimate);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    assert!((1.2..=1.7).contains(&mean), "{ratios:?}");
}
