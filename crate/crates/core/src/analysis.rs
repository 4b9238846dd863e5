//! Interference operators, covariances and per-tone SINR.
//!
//! Before equalization the received tones are
//!
//! ```text
//! Y[l] = B·X[l] + Σ_{m≠0} A₍ₘ₎·X[l−m] + G·q[l]
//! ```
//!
//! with `A₍ₘ₎ = W·Υ·H₍₋ₘ₎·Γ·Wᴴ`, `B = W·Υ·H₍₀₎·Γ·Wᴴ` and `G = W·Υ`. The
//! diagonal of `B` is the desired gain; its off-diagonal part is ICI from the
//! current block (type 1). Diagonals of `A₍ₘ₎` are ISI and their
//! off-diagonals are ICI from other blocks (type 2).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::model::{
    block_span, channel_blocks, dft_matrix, redundancy_matrices, ChannelModel, ComplexMatrix,
    OfdmConfig, RedundancyMaps,
};

/// Second-order statistics of the white, zero-mean symbols and noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SignalStats {
    sigma2_x: f64,
    sigma2_q: f64,
}

impl SignalStats {
    pub fn new(sigma2_x: f64, sigma2_q: f64) -> Result<Self> {
        if !(sigma2_x.is_finite() && sigma2_x > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "symbol variance must be positive, got {sigma2_x}"
            )));
        }
        if !(sigma2_q.is_finite() && sigma2_q >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise variance must be nonnegative, got {sigma2_q}"
            )));
        }
        Ok(Self { sigma2_x, sigma2_q })
    }

    pub fn sigma2_x(&self) -> f64 {
        self.sigma2_x
    }

    pub fn sigma2_q(&self) -> f64 {
        self.sigma2_q
    }
}

/// The operator set for one (configuration, channel) pair.
#[derive(Clone, Debug)]
pub struct InterferenceMatrices {
    /// `(m, A₍ₘ₎)` for `m ∈ {−1, 1, …, M}`.
    pub a_blocks: Vec<(isize, ComplexMatrix)>,
    /// `B^{des,ICI₁}`.
    pub b_full: ComplexMatrix,
    /// Diagonal part of `b_full`.
    pub b_des: ComplexMatrix,
    /// `b_full − b_des`.
    pub b_ici1: ComplexMatrix,
    /// `G^{noise} = W·Υ`, `N×N₀`.
    pub g_noise: ComplexMatrix,
    pub m_span: usize,
    pub rho: isize,
}

impl InterferenceMatrices {
    fn assemble(
        a_blocks: Vec<(isize, ComplexMatrix)>,
        b_full: ComplexMatrix,
        g_noise: ComplexMatrix,
        m_span: usize,
        rho: isize,
    ) -> Self {
        let n = b_full.nrows();
        let b_des = ComplexMatrix::from_diagonal(&b_full.diagonal());
        let mut b_ici1 = b_full.clone();
        for i in 0..n {
            b_ici1[(i, i)] = Complex64::new(0.0, 0.0);
        }
        Self {
            a_blocks,
            b_full,
            b_des,
            b_ici1,
            g_noise,
            m_span,
            rho,
        }
    }

    pub fn n_subcarriers(&self) -> usize {
        self.b_full.nrows()
    }

    /// Operators seen after a diagonal equalizer `E`: every row `k` scaled
    /// by `coeffs[k]`.
    pub fn equalized(&self, coeffs: &[Complex64]) -> Self {
        assert_eq!(coeffs.len(), self.n_subcarriers());
        let scale = |m: &ComplexMatrix| {
            let mut out = m.clone();
            for (k, &e) in coeffs.iter().enumerate() {
                for v in out.row_mut(k).iter_mut() {
                    *v *= e;
                }
            }
            out
        };
        Self::assemble(
            self.a_blocks.iter().map(|(m, a)| (*m, scale(a))).collect(),
            scale(&self.b_full),
            scale(&self.g_noise),
            self.m_span,
            self.rho,
        )
    }
}

/// Desired, interference and noise covariance matrices.
#[derive(Clone, Debug)]
pub struct Covariances {
    pub c_s: ComplexMatrix,
    pub c_i: ComplexMatrix,
    pub c_n: ComplexMatrix,
}

/// Per-tone power decomposition and SINR.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferenceReport {
    pub p_signal: Vec<f64>,
    pub p_isi: Vec<f64>,
    pub p_ici1: Vec<f64>,
    pub p_ici2: Vec<f64>,
    pub p_noise: Vec<f64>,
    /// Linear SINR; 0 on tones with no desired power, `+∞` when a tone has
    /// desired power but neither interference nor noise.
    pub sinr: Vec<f64>,
    pub m_span: usize,
    pub rho: isize,
}

impl InterferenceReport {
    pub fn n_subcarriers(&self) -> usize {
        self.sinr.len()
    }

    /// `p_isi + p_ici1 + p_ici2` on tone `k`.
    pub fn interference(&self, k: usize) -> f64 {
        self.p_isi[k] + self.p_ici1[k] + self.p_ici2[k]
    }

    pub fn sinr_db(&self) -> Vec<f64> {
        self.sinr.iter().map(|s| 10.0 * s.log10()).collect()
    }
}

/// Applies `X ↦ W·X·Wᴴ` and `X ↦ W·X` with FFTs.
struct UnitaryDft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl UnitaryDft {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }

    /// `W·X` for an `N×c` matrix, in place column by column.
    fn left(&self, x: &mut ComplexMatrix) {
        debug_assert_eq!(x.nrows(), self.n);
        // nalgebra storage is column-major, so each column is contiguous.
        self.forward.process(x.as_mut_slice());
        x.iter_mut().for_each(|v| *v *= self.scale);
    }

    /// `W·X·Wᴴ` for a square `N×N` matrix.
    fn conjugate(&self, mut x: ComplexMatrix) -> ComplexMatrix {
        self.left(&mut x);
        // (P·Wᴴ)ᵀ = conj(W)·Pᵀ, and conj(W) is the scaled inverse DFT.
        let mut t = x.transpose();
        self.inverse.process(t.as_mut_slice());
        t.iter_mut().for_each(|v| *v *= self.scale);
        t.transpose()
    }
}

/// Builds the interference operators.
///
/// The products `Υ·H₍₋ₘ₎·Γ` are assembled directly from the nonzero pattern
/// of the redundancy matrices and conjugated by the DFT with FFTs, which
/// keeps `N = 512` analyses cheap. [`interference_matrices_reference`]
/// forms the same operators with explicit dense products.
pub fn interference_matrices(cfg: &OfdmConfig, ch: &ChannelModel) -> InterferenceMatrices {
    let n = cfg.n_subcarriers();
    let n0 = cfg.block_len() as isize;
    let delay = cfg.sync_delay() as isize;
    let (m_span, rho) = block_span(ch.order(), cfg.block_len());
    let maps = RedundancyMaps::new(cfg);
    let dft = UnitaryDft::new(n);

    let folded = |m: isize| {
        ComplexMatrix::from_fn(n, n, |i, j| {
            let mut acc = Complex64::new(0.0, 0.0);
            for &b in &maps.rx_sources[i] {
                for &c in &maps.tx_positions[j] {
                    acc += ch.tap(m * n0 + b as isize - c as isize + delay);
                }
            }
            acc
        })
    };

    let a_blocks = std::iter::once(-1)
        .chain(1..=m_span as isize)
        .map(|m| (m, dft.conjugate(folded(m))))
        .collect();
    let b_full = dft.conjugate(folded(0));

    let mut g_noise = ComplexMatrix::zeros(n, cfg.block_len());
    for (i, cols) in maps.rx_sources.iter().enumerate() {
        for &c in cols {
            g_noise[(i, c)] = Complex64::new(1.0, 0.0);
        }
    }
    dft.left(&mut g_noise);

    InterferenceMatrices::assemble(a_blocks, b_full, g_noise, m_span, rho)
}

/// Same operators as [`interference_matrices`], formed as literal dense
/// products `W·Υ·H₍₋ₘ₎·Γ·Wᴴ` of the model matrices. `O(N³)` per block.
pub fn interference_matrices_reference(
    cfg: &OfdmConfig,
    ch: &ChannelModel,
) -> InterferenceMatrices {
    let w = dft_matrix(cfg.n_subcarriers());
    let wh = w.adjoint();
    let (gamma, upsilon) = redundancy_matrices(cfg);
    let g_noise = &w * &upsilon;
    let blocks = channel_blocks(cfg, ch);
    let op = |h: &ComplexMatrix| &g_noise * h * &gamma * &wh;
    let a_blocks = blocks
        .iter()
        .filter(|(m, _)| *m != 0)
        .map(|(m, h)| (m, op(h)))
        .collect();
    let b_full = op(blocks.block(0).expect("block 0 always exists"));
    InterferenceMatrices::assemble(a_blocks, b_full, g_noise, blocks.m_span(), blocks.rho())
}

/// Covariance matrices of the desired part, ISI/ICI and noise.
pub fn covariances(im: &InterferenceMatrices, stats: &SignalStats) -> Covariances {
    let sx = stats.sigma2_x();
    let c_s = (&im.b_des * im.b_des.adjoint()) * Complex64::from(sx);
    let mut c_i = &im.b_ici1 * im.b_ici1.adjoint();
    for (_, a) in &im.a_blocks {
        c_i += a * a.adjoint();
    }
    c_i *= Complex64::from(sx);
    let c_n = (&im.g_noise * im.g_noise.adjoint()) * Complex64::from(stats.sigma2_q());
    Covariances { c_s, c_i, c_n }
}

/// Power decomposition computed from an operator set.
pub fn report_from_matrices(im: &InterferenceMatrices, stats: &SignalStats) -> InterferenceReport {
    let n = im.n_subcarriers();
    let sx = stats.sigma2_x();
    let sq = stats.sigma2_q();
    let row_energy =
        |m: &ComplexMatrix, k: usize| m.row(k).iter().map(|z| z.norm_sqr()).sum::<f64>();

    let mut report = InterferenceReport {
        p_signal: vec![0.0; n],
        p_isi: vec![0.0; n],
        p_ici1: vec![0.0; n],
        p_ici2: vec![0.0; n],
        p_noise: vec![0.0; n],
        sinr: vec![0.0; n],
        m_span: im.m_span,
        rho: im.rho,
    };
    for k in 0..n {
        let signal = sx * im.b_des[(k, k)].norm_sqr();
        let ici1 = sx * row_energy(&im.b_ici1, k);
        let (mut isi, mut ici2) = (0.0, 0.0);
        for (_, a) in &im.a_blocks {
            let diag = a[(k, k)].norm_sqr();
            isi += diag;
            ici2 += row_energy(a, k) - diag;
        }
        let noise = sq * row_energy(&im.g_noise, k);
        report.p_signal[k] = signal;
        report.p_isi[k] = sx * isi;
        report.p_ici1[k] = ici1;
        report.p_ici2[k] = sx * ici2.max(0.0);
        report.p_noise[k] = noise;
        let denom = report.interference(k) + noise;
        report.sinr[k] = if signal == 0.0 {
            0.0
        } else if denom == 0.0 {
            f64::INFINITY
        } else {
            signal / denom
        };
    }
    report
}

/// Per-tone SINR and ISI/ICI₁/ICI₂/noise powers before equalization.
pub fn analyze(
    cfg: &OfdmConfig,
    ch: &ChannelModel,
    stats: &SignalStats,
) -> Result<InterferenceReport> {
    if ch.energy() == 0.0 {
        return Err(Error::ZeroChannel);
    }
    Ok(report_from_matrices(&interference_matrices(cfg, ch), stats))
}
