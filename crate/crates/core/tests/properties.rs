use std::collections::BTreeMap;

use erm_core::combinatorics::{enumerate_surjection_classes, stirling2};
use erm_core::ermmatrix::{build_a, build_abar, build_b, build_geometric_adjacency, RadiusScale};
use erm_core::exec::Execution;
use erm_core::kernel::{CompactKernel, PeriodicKernel};
use erm_core::num_complex::Complex64;
use erm_core::pointset::{sample_scaled_stream, sample_torus_stream, torus_diff, PointSet, TorusPoint};
use erm_core::spectra::{eigenvalues, empirical_measure, measure_count, Normalization};
use erm_core::theory::{limit_measure, mu_moment, nu_gamma_polynomial, poisson_bound_j, NuGammaSpec};
use num_bigint::BigUint;
use proptest::prelude::*;

const SERIAL: Execution = Execution::Serial;

fn series_kernel(d: usize, raw: &[(i64, i64, f64)]) -> PeriodicKernel {
    let mut coeffs = BTreeMap::new();
    for &(a, b, c) in raw {
        let k = if d == 1 { vec![a] } else { vec![a, b] };
        *coeffs.entry(k).or_insert(Complex64::new(0.0, 0.0)) += Complex64::new(c, 0.0);
    }
    PeriodicKernel::fourier_series(d, coeffs).unwrap()
}

fn coeff_strategy() -> impl Strategy<Value = Vec<(i64, i64, f64)>> {
    prop::collection::vec((-3i64..=3, -3i64..=3, 0.0f64..1.0), 1..6)
}

/// Oracle: forward sum of the Poisson lower tail.
fn tail(gamma: f64, j: u64) -> f64 {
    let mut p = (-gamma).exp();
    let mut lower = 0.0;
    for k in 0..j {
        lower += p;
        p *= gamma / (k + 1) as f64;
    }
    1.0 - lower
}

fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    (0..k).fold(BigUint::from(1u32), |acc, i| acc * (n - i) / (i + 1))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn torus_diff_is_canonical(x in prop::collection::vec(-0.5f64..0.5, 3), y in prop::collection::vec(-0.5f64..0.5, 3)) {
        let a = TorusPoint::new(x).unwrap();
        let b = TorusPoint::new(y).unwrap();
        let d = torus_diff(&a, &b).unwrap();
        prop_assert!(d.coords().iter().all(|c| (-0.5..0.5).contains(c)));
        let again = torus_diff(&d, &TorusPoint::origin(3)).unwrap();
        prop_assert_eq!(again, d);
    }

    #[test]
    fn builders_store_hermitian_matrices(raw in coeff_strategy(), seed in 0u64..1000, n in 2usize..30) {
        // asymmetric real coefficients give a complex hermitian kernel
        let f = series_kernel(2, &raw);
        let pts = sample_torus_stream(n, 2, seed, 0).unwrap();
        let a = build_a(&f, &pts, SERIAL).unwrap();
        for i in 0..n {
            prop_assert_eq!(a.entry(i, i).im, 0.0);
            for j in 0..n {
                prop_assert_eq!(a.entry(i, j), a.entry(j, i).conj());
            }
        }
    }

    #[test]
    fn trace_identities_hold(raw in coeff_strategy(), seed in 0u64..1000, n in 2usize..40) {
        let f = series_kernel(1, &raw);
        let pts = sample_torus_stream(n, 1, seed, 1).unwrap();
        let a = build_a(&f, &pts, SERIAL).unwrap();
        let s = eigenvalues(&a, Normalization::Unit).unwrap();
        let scale = a.frobenius_sq().max(1.0) * n as f64;
        let sum: f64 = s.eigenvalues.iter().sum();
        let sq: f64 = s.eigenvalues.iter().map(|l| l * l).sum();
        prop_assert!((sum - a.trace().re).abs() <= 1e-11 * scale);
        prop_assert!((sq - a.frobenius_sq()).abs() <= 1e-11 * scale);
        prop_assert!(build_abar(&f, &pts, SERIAL).unwrap().trace().norm() <= 1e-12 * scale);
    }

    #[test]
    fn nonnegative_spectrum_gives_positive_matrix(raw in coeff_strategy(), seed in 0u64..1000) {
        // symmetrize so the kernel is real; all coefficients stay >= 0
        let mirrored: Vec<(i64, i64, f64)> = raw.iter().flat_map(|&(a, b, c)| [(a, b, c), (-a, -b, c)]).collect();
        let f = series_kernel(2, &mirrored);
        let pts = sample_torus_stream(40, 2, seed, 2).unwrap();
        let a = build_a(&f, &pts, SERIAL).unwrap();
        let s = eigenvalues(&a, Normalization::Unit).unwrap();
        prop_assert!(s.eigenvalues[0] >= -1e-10 * a.frobenius_sq().sqrt().max(1.0));
    }

    #[test]
    fn pure_mode_vector_is_an_eigenvector(k in -4i64..=4, seed in 0u64..1000, n in 1usize..50) {
        let f = PeriodicKernel::pure_mode(vec![k]).unwrap();
        let pts = sample_torus_stream(n, 1, seed, 3).unwrap();
        let a = build_a(&f, &pts, SERIAL).unwrap();
        let phi: Vec<Complex64> = pts
            .iter()
            .map(|x| Complex64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 * x[0]))
            .collect();
        let image = a.matvec(&phi);
        for (y, p) in image.iter().zip(&phi) {
            prop_assert!((y - p * n as f64).norm() <= 1e-12 * n as f64);
        }
    }

    #[test]
    fn scaled_matrix_is_dominated_by_the_graph(r in 0.05f64..0.5, seed in 0u64..1000, periodic in any::<bool>()) {
        let f = CompactKernel::box_indicator(2, r).unwrap();
        let pts = sample_scaled_stream(60, 2, 2.0, seed, 0).unwrap();
        let b = build_b(&f, &pts, periodic, SERIAL).unwrap();
        let d = build_geometric_adjacency(&pts, 1.0, RadiusScale::ScaledByDelta, SERIAL).unwrap();
        for i in 0..60 {
            for j in 0..60 {
                let bound = if i == j { 1.0 } else { d.entry(i, j).re };
                // the periodic wrap only matters at the seam, where D does not look
                if !periodic {
                    prop_assert!(b.entry(i, j).norm() <= f.sup_norm() * bound);
                }
            }
        }
        let s = eigenvalues(&b, Normalization::Unit).unwrap();
        let rho = s.eigenvalues.iter().fold(0.0f64, |m, l| m.max(l.abs()));
        if !periodic {
            prop_assert!(rho <= f.sup_norm() * (1.0 + d.max_degree() as f64));
        }
    }

    #[test]
    fn windows_are_half_open(seed in 0u64..1000) {
        let f = PeriodicKernel::box_indicator(1, 0.25).unwrap();
        let pts = sample_torus_stream(30, 1, seed, 4).unwrap();
        let s = eigenvalues(&build_a(&f, &pts, SERIAL).unwrap(), Normalization::DividedByN).unwrap();
        let mu = empirical_measure(&s);
        let x = s.normalized()[29];
        prop_assert_eq!(measure_count(&mu, x, x + 1.0).unwrap(), 1.0);
        let below = s.normalized().iter().filter(|v| **v < x).count() as f64;
        prop_assert_eq!(measure_count(&mu, x - 1.0, x).unwrap(), below);
        prop_assert!(measure_count(&mu, x, x).is_err());
    }

    #[test]
    fn poisson_sandwich(n in 1u64..2_000_000, gamma in 0.05f64..20.0) {
        let b = poisson_bound_j(n, gamma).unwrap();
        let nf = n as f64;
        let above = nf * tail(gamma, b.j + 1);
        let at = nf * tail(gamma, b.j);
        // the forward-sum oracle loses relative accuracy in the far tail
        prop_assert!(above <= 1.0 + 1e-9 * nf);
        prop_assert!(b.degenerate || at > 1.0 - 1e-9 * nf);
        prop_assert!((b.n_tail_above - above).abs() <= 1e-9 * nf);
    }

    #[test]
    fn parseval_partial_sums_increase(r in 0.05f64..0.5) {
        let f = PeriodicKernel::box_indicator(1, r).unwrap();
        let mut last = 0.0;
        for k in [1u32, 2, 4, 8, 16, 32] {
            let mu = limit_measure(&f, k, SERIAL).unwrap();
            let captured = mu.moment(2);
            prop_assert!(captured >= last - 1e-15);
            prop_assert!(captured <= f.l2_norm_sq() + 1e-12);
            prop_assert!(mu.tail_bound >= 0.0);
            last = captured;
        }
    }

    #[test]
    fn even_moments_are_monotone_and_order_free(r in 0.05f64..0.5, m in 1u32..4) {
        let f = PeriodicKernel::box_indicator(1, r).unwrap();
        let mut last = 0.0;
        for k in [2u32, 4, 8, 16] {
            let v = mu_moment(&f, 2 * m, k, SERIAL).unwrap().value;
            prop_assert!(v >= last);
            last = v;
        }
        let mu = limit_measure(&f, 16, SERIAL).unwrap();
        let mut rev: Vec<f64> = mu.values().collect();
        rev.reverse();
        let sum: f64 = rev.iter().map(|v| v.powi(2 * m as i32)).sum();
        prop_assert!((sum - mu.moment(2 * m)).abs() <= 1e-14 * sum.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn moment_polynomial_is_nonnegative_and_lipschitz(r in 0.1f64..0.5, m in 2usize..5) {
        let f = CompactKernel::box_indicator(1, r).unwrap();
        let spec = NuGammaSpec { tensor_budget: 200_000, ..NuGammaSpec::default() };
        let poly = nu_gamma_polynomial(&f, m, &spec, Execution::Parallel).unwrap();
        prop_assert!(poly.coefficients.iter().all(|c| c.1 >= 0.0));
        // on [0, 5], the derivative is at most Σ (p-1) c_p 5^{p-2}
        let lip: f64 = poly.coefficients.iter().map(|&(p, c, _)| (p as f64 - 1.0) * c * 5f64.powi(p as i32 - 2).max(1.0)).sum();
        let h = 0.05;
        let mut g = 0.0;
        while g < 4.0 {
            let a = poly.evaluate(g + 1e-9).value;
            let b = poly.evaluate(g + h).value;
            prop_assert!((b - a).abs() <= lip * h + 1e-12);
            g += h;
        }
    }
}

#[test]
fn sampling_is_reproducible() {
    let a = sample_torus_stream(100, 2, 42, 3).unwrap();
    let b = sample_torus_stream(100, 2, 42, 3).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, sample_torus_stream(100, 2, 42, 4).unwrap());
    let c = sample_scaled_stream(100, 2, 1.0, 42, 3).unwrap();
    assert_eq!(c.coords(), a.coords());
}

#[test]
fn box_fractions_match_volume() {
    // chi-square over a 10 x 10 grid of cells at n = 1e5
    let pts: PointSet = sample_torus_stream(100_000, 2, 9, 0).unwrap();
    let mut counts = [0f64; 100];
    for x in pts.iter() {
        let i = ((x[0] + 0.5) * 10.0) as usize;
        let j = ((x[1] + 0.5) * 10.0) as usize;
        counts[i * 10 + j] += 1.0;
    }
    let expected = 1000.0;
    let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
    // 99.9% quantile of chi-square with 99 degrees of freedom
    assert!(chi2 < 148.2, "{chi2}");
}

#[test]
fn surjection_classes_are_canonical_and_counted() {
    for m in 1..=8 {
        for p in 1..=m {
            let classes = enumerate_surjection_classes(m, p).unwrap();
            assert_eq!(BigUint::from(classes.len()), stirling2(m, p));
            for c in &classes {
                assert!(c.is_canonical());
                let mut seen = vec![false; p];
                for &v in &c.representative {
                    seen[v as usize - 1] = true;
                }
                assert!(seen.iter().all(|s| *s));
            }
        }
    }
}

#[test]
fn surjections_decompose_all_maps() {
    // Σ_p p! S(m,p) C(n,p) = n^m
    for m in 1..=7usize {
        for n in 1..=6u64 {
            let total: BigUint = (1..=m)
                .map(|p| {
                    let fact: BigUint = (1..=p as u64).map(BigUint::from).product();
                    fact * stirling2(m, p) * binomial(n, p as u64)
                })
                .sum();
            assert_eq!(total, BigUint::from(n).pow(m as u32));
        }
    }
}

#[test]
fn stirling_recurrence() {
    for m in 2..=12 {
        for p in 1..=m {
            let expected = BigUint::from(p) * stirling2(m - 1, p) + stirling2(m - 1, p - 1);
            assert_eq!(stirling2(m, p), expected, "S({m},{p})");
        }
    }
}

#[test]
fn small_determinant_identities() {
    use erm_core::theory::determinant;
    let f = PeriodicKernel::box_indicator(1, 0.4).unwrap();
    for seed in 0..20 {
        let pts = sample_torus_stream(3, 1, seed, 0).unwrap();
        let abar = build_abar(&f, &pts, SERIAL).unwrap();
        let mut m2 = vec![abar.entry(0, 0), abar.entry(0, 1), abar.entry(1, 0), abar.entry(1, 1)];
        let d2 = determinant(&mut m2, 2);
        assert!((d2.re + abar.entry(0, 1).norm_sqr()).abs() < 1e-15);
        let mut m3: Vec<Complex64> = (0..9).map(|k| abar.entry(k / 3, k % 3)).collect();
        let d3 = determinant(&mut m3, 3);
        let expected = 2.0 * abar.entry(0, 1).re * abar.entry(1, 2).re * abar.entry(2, 0).re;
        assert!((d3.re - expected).abs() < 1e-14);
    }
}
