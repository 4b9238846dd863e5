//! Transceiver and channel matrices for block transmission.
//!
//! A block of `N` frequency-domain symbols is mapped to `N₀ = N + μ` time
//! samples by the transmit matrix `T = Γ·Wᴴ` and folded back to `N` tones by
//! the receive front end `W·Υ`. The FIR channel acts on the sample stream;
//! its action on one received frame is split into `N₀×N₀` blocks `H₍₋ₘ₎`,
//! one per transmitted block that can leak into the frame.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense complex matrix. Serialized forms always walk entries row by row.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Redundancy scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Cyclic prefix of `μ` samples, discarded at the receiver.
    Cp,
    /// `μ` trailing zeros; the receiver overlaps-and-adds the tail.
    ZpOla,
}

/// Block size, redundancy, scheme and receiver synchronization delay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct OfdmConfig {
    n_subcarriers: usize,
    redundancy: usize,
    scheme: Scheme,
    sync_delay: usize,
}

impl OfdmConfig {
    pub fn new(
        n_subcarriers: usize,
        redundancy: usize,
        scheme: Scheme,
        sync_delay: usize,
    ) -> Result<Self> {
        if n_subcarriers == 0 {
            return Err(Error::InvalidConfig("N must be positive".into()));
        }
        if redundancy >= n_subcarriers {
            return Err(Error::InvalidConfig(format!(
                "redundancy {redundancy} must be smaller than N = {n_subcarriers}"
            )));
        }
        let n0 = n_subcarriers + redundancy;
        if sync_delay >= n0 {
            return Err(Error::InvalidConfig(format!(
                "sync delay {sync_delay} must lie in 0..{n0}"
            )));
        }
        Ok(Self {
            n_subcarriers,
            redundancy,
            scheme,
            sync_delay,
        })
    }

    pub fn n_subcarriers(&self) -> usize {
        self.n_subcarriers
    }

    pub fn redundancy(&self) -> usize {
        self.redundancy
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn sync_delay(&self) -> usize {
        self.sync_delay
    }

    /// Transmitted block length `N₀ = N + μ`.
    pub fn block_len(&self) -> usize {
        self.n_subcarriers + self.redundancy
    }

    pub fn with_sync_delay(&self, sync_delay: usize) -> Result<Self> {
        Self::new(self.n_subcarriers, self.redundancy, self.scheme, sync_delay)
    }

    pub fn with_redundancy(&self, redundancy: usize) -> Result<Self> {
        Self::new(self.n_subcarriers, redundancy, self.scheme, self.sync_delay)
    }
}

/// Causal FIR channel `h₀ … h_ν`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelModel {
    taps: Vec<Complex64>,
    sampling_rate_hz: f64,
}

impl ChannelModel {
    pub fn new(taps: Vec<Complex64>, sampling_rate_hz: f64) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::InvalidChannel("at least one tap is required".into()));
        }
        if let Some(i) = taps
            .iter()
            .position(|t| !t.re.is_finite() || !t.im.is_finite())
        {
            return Err(Error::InvalidChannel(format!("tap {i} is not finite")));
        }
        if taps.iter().all(|t| t.norm_sqr() == 0.0) {
            return Err(Error::ZeroChannel);
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidChannel(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        Ok(Self {
            taps,
            sampling_rate_hz,
        })
    }

    /// Channel from real taps.
    pub fn from_real(taps: &[f64], sampling_rate_hz: f64) -> Result<Self> {
        Self::new(
            taps.iter().map(|&t| Complex64::new(t, 0.0)).collect(),
            sampling_rate_hz,
        )
    }

    /// Single unit tap.
    pub fn identity(sampling_rate_hz: f64) -> Self {
        Self {
            taps: vec![Complex64::new(1.0, 0.0)],
            sampling_rate_hz,
        }
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    /// Channel order `ν`.
    pub fn order(&self) -> usize {
        self.taps.len() - 1
    }

    /// `‖h‖₂²`.
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t.norm_sqr()).sum()
    }

    pub fn is_real(&self) -> bool {
        self.taps.iter().all(|t| t.im == 0.0)
    }

    /// Tap `h_j`, zero outside `0..=ν`.
    pub fn tap(&self, j: isize) -> Complex64 {
        if j < 0 {
            return Complex64::new(0.0, 0.0);
        }
        self.taps.get(j as usize).copied().unwrap_or_default()
    }
}

/// Number of extra blocks spanned by the channel and the remainder `ρ`.
///
/// Returns `(M, ρ)` with `M = ⌈ν/N₀⌉` and `ν = (M−1)·N₀ + ρ + 1`. A single
/// tap gives `M = 0`, `ρ = N₀ − 1`, which keeps both the identity above and
/// the nonzero-block count `M + [Δ ≥ 1] + [Δ ≤ ρ]`.
pub fn block_span(order: usize, block_len: usize) -> (usize, isize) {
    if order == 0 {
        return (0, block_len as isize - 1);
    }
    let m = order.div_ceil(block_len);
    let rho = order as isize - ((m - 1) * block_len) as isize - 1;
    (m, rho)
}

/// Channel blocks `H₍₋ₘ₎` for `m ∈ {−1, 0, …, M}`.
#[derive(Clone, Debug)]
pub struct ChannelBlockSet {
    blocks: Vec<ComplexMatrix>,
    m_span: usize,
    rho: isize,
}

impl ChannelBlockSet {
    /// `M = ⌈ν/N₀⌉`.
    pub fn m_span(&self) -> usize {
        self.m_span
    }

    /// Remainder `ρ`.
    pub fn rho(&self) -> isize {
        self.rho
    }

    /// Block `H₍₋ₘ₎` acting on the block transmitted `m` periods earlier.
    pub fn block(&self, m: isize) -> Option<&ComplexMatrix> {
        usize::try_from(m + 1).ok().and_then(|i| self.blocks.get(i))
    }

    /// `(m, H₍₋ₘ₎)` pairs in increasing `m`.
    pub fn iter(&self) -> impl Iterator<Item = (isize, &ComplexMatrix)> {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| (i as isize - 1, b))
    }

    pub fn nonzero_count(&self) -> usize {
        self.blocks
            .iter()
            .filter(|b| b.iter().any(|z| z.norm_sqr() != 0.0))
            .count()
    }
}

/// Normalized DFT matrix with entries `exp(−j2πkn/N)/√N`.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    assert!(n >= 1, "DFT size must be positive");
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |k, m| {
        // Reduce k·m mod n first so the phase stays accurate for large n.
        let phase = -2.0 * std::f64::consts::PI * ((k * m) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Sample positions touched by the redundancy insertion and removal.
///
/// `tx_positions[j]` lists the transmitted samples (`0..N₀`) that carry
/// time-domain sample `j` of the IDFT output; `rx_sources[i]` lists the
/// received frame samples summed into receiver input `i`. These are the
/// nonzero patterns of the columns of `Γ` and the rows of `Υ`.
#[derive(Clone, Debug)]
pub(crate) struct RedundancyMaps {
    pub tx_positions: Vec<Vec<usize>>,
    pub rx_sources: Vec<Vec<usize>>,
}

impl RedundancyMaps {
    pub fn new(cfg: &OfdmConfig) -> Self {
        let n = cfg.n_subcarriers;
        let mu = cfg.redundancy;
        match cfg.scheme {
            Scheme::Cp => {
                let tx_positions = (0..n)
                    .map(|j| {
                        let mut pos = Vec::with_capacity(2);
                        if j >= n - mu {
                            pos.push(j - (n - mu));
                        }
                        pos.push(mu + j);
                        pos
                    })
                    .collect();
                let rx_sources = (0..n).map(|i| vec![mu + i]).collect();
                Self {
                    tx_positions,
                    rx_sources,
                }
            }
            Scheme::ZpOla => {
                let tx_positions = (0..n).map(|j| vec![j]).collect();
                let rx_sources = (0..n)
                    .map(|i| if i < mu { vec![i, n + i] } else { vec![i] })
                    .collect();
                Self {
                    tx_positions,
                    rx_sources,
                }
            }
        }
    }
}

/// Redundancy insertion `Γ` (`N₀×N`) and removal `Υ` (`N×N₀`).
pub fn redundancy_matrices(cfg: &OfdmConfig) -> (ComplexMatrix, ComplexMatrix) {
    let n = cfg.n_subcarriers;
    let n0 = cfg.block_len();
    let maps = RedundancyMaps::new(cfg);
    let one = Complex64::new(1.0, 0.0);
    let mut gamma = ComplexMatrix::zeros(n0, n);
    for (j, rows) in maps.tx_positions.iter().enumerate() {
        for &r in rows {
            gamma[(r, j)] = one;
        }
    }
    let mut upsilon = ComplexMatrix::zeros(n, n0);
    for (i, cols) in maps.rx_sources.iter().enumerate() {
        for &c in cols {
            upsilon[(i, c)] = one;
        }
    }
    (gamma, upsilon)
}

/// `T = Γ·Wᴴ`.
pub fn transmit_matrix(cfg: &OfdmConfig) -> ComplexMatrix {
    let (gamma, _) = redundancy_matrices(cfg);
    gamma * dft_matrix(cfg.n_subcarriers).adjoint()
}

/// Receiver without equalizer, `W·Υ`.
pub fn receive_front(cfg: &OfdmConfig) -> ComplexMatrix {
    let (_, upsilon) = redundancy_matrices(cfg);
    dft_matrix(cfg.n_subcarriers) * upsilon
}

/// Builds every channel block `H₍₋ₘ₎`, `m ∈ {−1, …, M}`.
///
/// Entry `(b, c)` of block `m` is `h_{mN₀ + b − c + Δ}`, zero when the index
/// falls outside `0..=ν`.
pub fn channel_blocks(cfg: &OfdmConfig, ch: &ChannelModel) -> ChannelBlockSet {
    let n0 = cfg.block_len();
    let (m_span, rho) = block_span(ch.order(), n0);
    let delay = cfg.sync_delay as isize;
    let blocks = (-1..=m_span as isize)
        .map(|m| {
            ComplexMatrix::from_fn(n0, n0, |b, c| {
                ch.tap(m * n0 as isize + b as isize - c as isize + delay)
            })
        })
        .collect();
    ChannelBlockSet {
        blocks,
        m_span,
        rho,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
        assert_eq!(a.shape(), b.shape());
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn config_rejects_out_of_range() {
        assert!(OfdmConfig::new(0, 0, Scheme::Cp, 0).is_err());
        assert!(OfdmConfig::new(4, 4, Scheme::Cp, 0).is_err());
        assert!(OfdmConfig::new(4, 1, Scheme::Cp, 5).is_err());
        assert!(OfdmConfig::new(4, 1, Scheme::Cp, 4).is_ok());
    }

    #[test]
    fn channel_rejects_degenerate_taps() {
        assert!(ChannelModel::new(vec![], 1.0).is_err());
        assert!(matches!(
            ChannelModel::from_real(&[0.0, 0.0], 1.0),
            Err(Error::ZeroChannel)
        ));
        assert!(ChannelModel::from_real(&[1.0, f64::NAN], 1.0).is_err());
        assert!(ChannelModel::from_real(&[1.0], 0.0).is_err());
    }

    #[test]
    fn dft_small_sizes() {
        let w1 = dft_matrix(1);
        assert_eq!(w1[(0, 0)], c(1.0, 0.0));

        let w2 = dft_matrix(2);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let expect =
            ComplexMatrix::from_row_slice(2, 2, &[c(s, 0.0), c(s, 0.0), c(s, 0.0), c(-s, 0.0)]);
        assert!(max_abs_diff(&w2, &expect) < 1e-15);
    }

    #[test]
    fn dft_is_unitary() {
        for n in 1..=64 {
            let w = dft_matrix(n);
            let prod = &w * w.adjoint();
            let err = max_abs_diff(&prod, &ComplexMatrix::identity(n, n));
            let tol = if n == 8 { 1e-14 } else { 1e-13 };
            assert!(err <= tol, "n={n} err={err}");
        }
    }

    #[test]
    fn cp_redundancy_structure() {
        let cfg = OfdmConfig::new(4, 1, Scheme::Cp, 0).unwrap();
        let (gamma, upsilon) = redundancy_matrices(&cfg);
        assert_eq!(gamma.shape(), (5, 4));
        let row0: Vec<f64> = (0..4).map(|j| gamma[(0, j)].re).collect();
        assert_eq!(row0, vec![0.0, 0.0, 0.0, 1.0]);
        assert_eq!(gamma.rows(1, 4).into_owned(), ComplexMatrix::identity(4, 4));
        let mut expect_u = ComplexMatrix::zeros(4, 5);
        for i in 0..4 {
            expect_u[(i, i + 1)] = c(1.0, 0.0);
        }
        assert_eq!(upsilon, expect_u);
    }

    #[test]
    fn zp_redundancy_structure() {
        let cfg = OfdmConfig::new(4, 1, Scheme::ZpOla, 0).unwrap();
        let (gamma, upsilon) = redundancy_matrices(&cfg);
        let mut expect_g = ComplexMatrix::zeros(5, 4);
        for i in 0..4 {
            expect_g[(i, i)] = c(1.0, 0.0);
        }
        assert_eq!(gamma, expect_g);
        let mut expect_u = ComplexMatrix::zeros(4, 5);
        for i in 0..4 {
            expect_u[(i, i)] = c(1.0, 0.0);
        }
        expect_u[(0, 4)] = c(1.0, 0.0);
        assert_eq!(upsilon, expect_u);
    }

    #[test]
    fn zero_redundancy_is_identity() {
        for scheme in [Scheme::Cp, Scheme::ZpOla] {
            let cfg = OfdmConfig::new(6, 0, scheme, 0).unwrap();
            let (gamma, upsilon) = redundancy_matrices(&cfg);
            assert_eq!(gamma, ComplexMatrix::identity(6, 6));
            assert_eq!(upsilon.transpose(), gamma);
        }
    }

    #[test]
    fn transmit_and_receive_products() {
        let cfg = OfdmConfig::new(2, 0, Scheme::Cp, 0).unwrap();
        assert!(max_abs_diff(&transmit_matrix(&cfg), &dft_matrix(2).adjoint()) < 1e-15);

        let cfg = OfdmConfig::new(4, 1, Scheme::Cp, 0).unwrap();
        let t = transmit_matrix(&cfg);
        for j in 0..4 {
            assert_eq!(t[(0, j)], t[(4, j)]);
        }
        let prod = receive_front(&cfg) * t;
        assert!(max_abs_diff(&prod, &ComplexMatrix::identity(4, 4)) <= 1e-14);
    }

    #[test]
    fn span_and_remainder() {
        assert_eq!(block_span(0, 5), (0, 4));
        assert_eq!(block_span(1, 5), (1, 0));
        assert_eq!(block_span(5, 5), (1, 4));
        assert_eq!(block_span(6, 5), (2, 0));
        assert_eq!(block_span(13, 5), (3, 2));
    }

    #[test]
    fn identity_channel_blocks() {
        let cfg = OfdmConfig::new(4, 2, Scheme::Cp, 0).unwrap();
        let blocks = channel_blocks(&cfg, &ChannelModel::identity(1.0));
        assert_eq!(blocks.m_span(), 0);
        assert_eq!(blocks.rho(), 5);
        assert_eq!(blocks.block(0).unwrap(), &ComplexMatrix::identity(6, 6));
        assert!(blocks.block(-1).unwrap().iter().all(|z| z.norm() == 0.0));
        assert!(blocks.block(1).is_none());
    }

    #[test]
    fn one_block_delay_channel() {
        let cfg = OfdmConfig::new(4, 1, Scheme::ZpOla, 0).unwrap();
        let mut taps = vec![c(0.0, 0.0); 6];
        taps[5] = c(1.0, 0.0);
        let blocks = channel_blocks(&cfg, &ChannelModel::new(taps, 1.0).unwrap());
        assert_eq!(blocks.m_span(), 1);
        assert!(blocks.block(0).unwrap().iter().all(|z| z.norm() == 0.0));
        assert_eq!(blocks.block(1).unwrap(), &ComplexMatrix::identity(5, 5));
    }
}
