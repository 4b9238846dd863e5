#![allow(clippy::needless_range_loop)]

mod common;

use common::{frobenius_sq, max_abs_diff, random_channel};
use dispersive_ofdm::analysis::{
    covariances, interference_matrices, interference_matrices_reference, report_from_matrices,
};
use dispersive_ofdm::equalizer::channel_diagonal;
use dispersive_ofdm::{
    analyze, ChannelModel, Complex64, ComplexMatrix, OfdmConfig, Scheme, SignalStats,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// Straightforward textbook construction: explicit Γ, Υ, H₍₋ₘ₎ and DFT
/// matrices, multiplied with plain loops.
fn hand_built_operator(
    n: usize,
    mu: usize,
    cp: bool,
    delay: usize,
    taps: &[f64],
    m: isize,
) -> ComplexMatrix {
    let n0 = n + mu;
    let mut gamma = vec![vec![c(0.0); n]; n0];
    let mut upsilon = vec![vec![c(0.0); n0]; n];
    if cp {
        for r in 0..mu {
            gamma[r][n - mu + r] = c(1.0);
        }
        for r in 0..n {
            gamma[mu + r][r] = c(1.0);
            upsilon[r][mu + r] = c(1.0);
        }
    } else {
        for r in 0..n {
            gamma[r][r] = c(1.0);
            upsilon[r][r] = c(1.0);
        }
        for r in 0..mu {
            upsilon[r][n + r] = c(1.0);
        }
    }
    let h = |b: usize, col: usize| {
        let idx = m * n0 as isize + b as isize - col as isize + delay as isize;
        if idx >= 0 && (idx as usize) < taps.len() {
            c(taps[idx as usize])
        } else {
            c(0.0)
        }
    };
    let matmul = |a: &dyn Fn(usize, usize) -> Complex64,
                  b: &dyn Fn(usize, usize) -> Complex64,
                  r: usize,
                  k: usize,
                  cols: usize| {
        let mut out = vec![vec![c(0.0); cols]; r];
        for i in 0..r {
            for j in 0..cols {
                for t in 0..k {
                    out[i][j] += a(i, t) * b(t, j);
                }
            }
        }
        out
    };
    let w = |k: usize, t: usize| {
        Complex64::from_polar(
            1.0 / (n as f64).sqrt(),
            -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64,
        )
    };
    let wh = |t: usize, k: usize| w(k, t).conj();
    let uh = matmul(&|i, t| upsilon[i][t], &h, n, n0, n0);
    let uhg = matmul(&|i, t| uh[i][t], &|t, j| gamma[t][j], n, n0, n);
    let left = matmul(&w, &|t, j| uhg[t][j], n, n, n);
    let full = matmul(&|i, t| left[i][t], &wh, n, n, n);
    ComplexMatrix::from_fn(n, n, |i, j| full[i][j])
}

#[test]
fn late_echo_operators_match_hand_built_products() {
    let taps = [0.0, 0.0, 0.0, 1.0];
    let cfg = OfdmConfig::new(4, 1, Scheme::Cp, 0).unwrap();
    let im = interference_matrices(&cfg, &ChannelModel::from_real(&taps, 1.0).unwrap());
    let b = hand_built_operator(4, 1, true, 0, &taps, 0);
    assert!(max_abs_diff(&im.b_full, &b) <= 1e-14);
    assert!(frobenius_sq(&im.b_ici1) > 1e-3);
    for (m, a) in &im.a_blocks {
        assert!(
            max_abs_diff(a, &hand_built_operator(4, 1, true, 0, &taps, *m)) <= 1e-14,
            "m={m}"
        );
    }
    let a1 = &im.a_blocks.iter().find(|(m, _)| *m == 1).unwrap().1;
    assert!(frobenius_sq(a1) > 1e-3);
}

#[test]
fn zp_operators_match_hand_built_products() {
    let taps = [
        0.9, -0.4, 0.3, 0.25, -0.1, 0.05, 0.02, 0.3, -0.2, 0.1, 0.07, 0.01, 0.04,
    ];
    let cfg = OfdmConfig::new(5, 2, Scheme::ZpOla, 3).unwrap();
    let im = interference_matrices(&cfg, &ChannelModel::from_real(&taps, 1.0).unwrap());
    assert!(max_abs_diff(&im.b_full, &hand_built_operator(5, 2, false, 3, &taps, 0)) <= 1e-14);
    for (m, a) in &im.a_blocks {
        assert!(
            max_abs_diff(a, &hand_built_operator(5, 2, false, 3, &taps, *m)) <= 1e-14,
            "m={m}"
        );
    }
}

#[test]
fn fft_route_matches_dense_products() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..40 {
        let n = rng.random_range(1..=24);
        let mu = rng.random_range(0..n);
        let n0 = n + mu;
        let delay = rng.random_range(0..n0);
        let order = rng.random_range(0..=4 * n0);
        let scheme = if rng.random::<bool>() {
            Scheme::Cp
        } else {
            Scheme::ZpOla
        };
        let cfg = OfdmConfig::new(n, mu, scheme, delay).unwrap();
        let ch = random_channel(order, 0.3, rng.random());
        let fast = interference_matrices(&cfg, &ch);
        let slow = interference_matrices_reference(&cfg, &ch);
        assert_eq!(fast.a_blocks.len(), slow.a_blocks.len());
        assert_eq!(fast.a_blocks.len(), fast.m_span + 1);
        assert!(max_abs_diff(&fast.b_full, &slow.b_full) <= 1e-12);
        assert!(max_abs_diff(&fast.g_noise, &slow.g_noise) <= 1e-12);
        for ((m1, a1), (m2, a2)) in fast.a_blocks.iter().zip(&slow.a_blocks) {
            assert_eq!(m1, m2);
            assert!(max_abs_diff(a1, a2) <= 1e-12);
        }
    }
}

#[test]
fn desired_and_type1_split() {
    let cfg = OfdmConfig::new(12, 3, Scheme::Cp, 4).unwrap();
    let im = interference_matrices(&cfg, &random_channel(40, 0.3, 1));
    for i in 0..12 {
        assert_eq!(im.b_ici1[(i, i)], c(0.0));
        assert_eq!(im.b_des[(i, i)], im.b_full[(i, i)]);
        for j in 0..12 {
            if i != j {
                assert_eq!(im.b_des[(i, j)], c(0.0));
                assert_eq!(im.b_ici1[(i, j)], im.b_full[(i, j)]);
            }
        }
    }
}

#[test]
fn sufficient_prefix_collapses_to_diagonal_channel() {
    for seed in 0..20u64 {
        let n = 16;
        let mu = 1 + (seed as usize % 6);
        let order = seed as usize % (mu + 1);
        let cfg = OfdmConfig::new(n, mu, Scheme::Cp, 0).unwrap();
        let ch = random_channel(order, 0.5, seed);
        let im = interference_matrices(&cfg, &ch);
        let d = channel_diagonal(&ch, n).unwrap();
        for k in 0..n {
            assert!((im.b_des[(k, k)] - d[k]).norm() <= 1e-12);
        }
        assert!(im.b_ici1.iter().all(|z| z.norm() <= 1e-12));
        assert!(im
            .a_blocks
            .iter()
            .all(|(_, a)| a.iter().all(|z| z.norm() <= 1e-12)));

        let stats = SignalStats::new(1.3, 0.07).unwrap();
        let report = analyze(&cfg, &ch, &stats).unwrap();
        let interference: f64 = (0..n).map(|k| report.interference(k)).sum();
        let signal: f64 = report.p_signal.iter().sum();
        assert!(interference <= 1e-20 * signal, "{interference} vs {signal}");
        for k in 0..n {
            let expected = 1.3 * d[k].norm_sqr() / 0.07;
            assert!(((report.sinr[k] - expected) / expected).abs() <= 1e-10);
        }
    }
}

#[test]
fn noise_covariance_diagonals() {
    for (n, mu) in [(8, 3), (16, 15), (5, 0), (64, 16)] {
        for scheme in [Scheme::Cp, Scheme::ZpOla] {
            let cfg = OfdmConfig::new(n, mu, scheme, 0).unwrap();
            let im = interference_matrices(&cfg, &random_channel(3 * n, 0.2, 5));
            let cov = covariances(&im, &SignalStats::new(1.0, 0.3).unwrap());
            let expected = match scheme {
                Scheme::Cp => 0.3,
                Scheme::ZpOla => 0.3 * (1.0 + mu as f64 / n as f64),
            };
            for k in 0..n {
                let got = cov.c_n[(k, k)];
                assert!(
                    ((got.re - expected) / expected).abs() <= 1e-12,
                    "{scheme:?} N={n} mu={mu}"
                );
                assert!(got.im.abs() <= 1e-13);
            }
        }
    }
}

fn hermitian_error(m: &ComplexMatrix) -> f64 {
    max_abs_diff(m, &m.adjoint())
}

#[test]
fn covariances_are_hermitian_psd_and_match_report() {
    let cfg = OfdmConfig::new(16, 4, Scheme::ZpOla, 7).unwrap();
    let ch = random_channel(70, 0.2, 9);
    let stats = SignalStats::new(2.0, 0.1).unwrap();
    let im = interference_matrices(&cfg, &ch);
    let cov = covariances(&im, &stats);
    let report = report_from_matrices(&im, &stats);
    for m in [&cov.c_s, &cov.c_i, &cov.c_n] {
        assert!(hermitian_error(m) <= 1e-13);
        assert!(m.diagonal().iter().all(|z| z.re >= 0.0));
        // Smallest eigenvalue of the Hermitian part is nonnegative up to round-off.
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        let scale = eig.eigenvalues.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
        assert!(eig.eigenvalues.iter().all(|&e| e >= -1e-12 * scale));
    }
    for k in 0..16 {
        let ci = cov.c_i[(k, k)].re;
        assert!(((report.interference(k) - ci) / ci).abs() <= 1e-10);
        assert!(((report.p_signal[k] - cov.c_s[(k, k)].re) / report.p_signal[k]).abs() <= 1e-12);
        let expected = cov.c_s[(k, k)].re / (ci + cov.c_n[(k, k)].re);
        assert!(((report.sinr[k] - expected) / expected).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn interference_decomposition_is_complete(
        n in 2usize..20,
        mu_frac in 0.0f64..1.0,
        delay_frac in 0.0f64..1.0,
        span in 0.0f64..4.0,
        seed in any::<u64>(),
        zp in any::<bool>(),
    ) {
        let mu = ((n as f64) * mu_frac) as usize % n;
        let n0 = n + mu;
        let delay = ((n0 as f64) * delay_frac) as usize % n0;
        let order = (span * n0 as f64) as usize;
        let scheme = if zp { Scheme::ZpOla } else { Scheme::Cp };
        let cfg = OfdmConfig::new(n, mu, scheme, delay).unwrap();
        let ch = random_channel(order, 0.3, seed);
        let stats = SignalStats::new(1.7, 0.0).unwrap();
        let im = interference_matrices(&cfg, &ch);
        let report = report_from_matrices(&im, &stats);
        let frob = 1.7 * (im.a_blocks.iter().map(|(_, a)| frobenius_sq(a)).sum::<f64>() + frobenius_sq(&im.b_ici1));
        let summed: f64 = (0..n).map(|k| report.interference(k)).sum();
        if frob > 1e-20 {
            prop_assert!(((frob - summed) / frob).abs() <= 1e-12);
        }
    }

    #[test]
    fn diagonal_equalizer_leaves_sinr_unchanged(
        n in 2usize..20,
        span in 0.1f64..4.0,
        seed in any::<u64>(),
    ) {
        let mu = n / 4;
        let cfg = OfdmConfig::new(n, mu, Scheme::Cp, 1).unwrap();
        let ch = random_channel((span * (n + mu) as f64) as usize, 0.3, seed);
        let stats = SignalStats::new(1.0, 0.05).unwrap();
        let im = interference_matrices(&cfg, &ch);
        let base = report_from_matrices(&im, &stats);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
        let coeffs: Vec<Complex64> = (0..n)
            .map(|_| Complex64::from_polar(rng.random_range(0.1..10.0), rng.random_range(-3.0..3.0)))
            .collect();
        let eq = report_from_matrices(&im.equalized(&coeffs), &stats);
        for k in 0..n {
            prop_assert!(((eq.sinr[k] - base.sinr[k]) / base.sinr[k]).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_channel_is_rejected() {
    assert!(ChannelModel::from_real(&[0.0; 5], 1.0).is_err());
}
