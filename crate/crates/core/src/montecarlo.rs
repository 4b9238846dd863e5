//! Time-domain Monte Carlo transmission used as an independent check of
//! [`crate::analysis`].
//!
//! Nothing here touches the channel blocks or interference operators. Random
//! QAM blocks are modulated with an inverse FFT, redundancy is inserted by
//! slicing, the whole sample stream is linearly convolved with the channel
//! taps (FFT convolution) and AWGN is added. Block `l` is received from
//! samples `y[l·N₀ + Δ ..][..N₀]`: with `x` the transmitted stream this
//! frame sample `b` is `Σⱼ hⱼ·x[l·N₀ + Δ + b − j]`, and sample `c` of block
//! `l − m` sits at `x[(l − m)·N₀ + c]`, so the tap coupling them is
//! `h_{mN₀ + b − c + Δ}`, the channel block entry rule.
//!
//! The per-tone gain is estimated by cross-correlating the received tone
//! with the transmitted symbol; whatever is left is interference plus noise.
//!
//! The stream is cut into batches of whole blocks. Every batch is an
//! independent transmission with its own warmup at both edges and its own
//! ChaCha8 substreams (one for symbols, one for noise), so results do not
//! depend on how many threads run the batches.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::analysis::SignalStats;
use crate::error::{Error, Result};
use crate::model::{block_span, ChannelModel, OfdmConfig, Scheme};

/// Minimum measured blocks for a power estimate.
pub const MIN_BLOCKS: usize = 1000;

/// Target stream length of one batch, in samples.
const BATCH_SAMPLES: usize = 1 << 19;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ConstellationKind {
    Qpsk,
    Qam16,
    Qam64,
}

/// Square QAM alphabet with unit average power.
#[derive(Clone, Debug, PartialEq)]
pub struct Constellation {
    points: Vec<Complex64>,
    kind: ConstellationKind,
}

impl Constellation {
    pub fn new(kind: ConstellationKind) -> Self {
        let side: usize = match kind {
            ConstellationKind::Qpsk => 2,
            ConstellationKind::Qam16 => 4,
            ConstellationKind::Qam64 => 8,
        };
        // Levels ±1, ±3, …; mean |s|² = 2(side² − 1)/3.
        let level = |i: usize| (2 * i) as f64 - (side - 1) as f64;
        let norm = (2.0 * ((side * side - 1) as f64) / 3.0).sqrt().recip();
        let points = (0..side * side)
            .map(|i| Complex64::new(level(i % side), level(i / side)) * norm)
            .collect();
        Self { points, kind }
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn kind(&self) -> ConstellationKind {
        self.kind
    }

    pub fn mean_power(&self) -> f64 {
        self.points.iter().map(|p| p.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Measured blocks.
    pub n_blocks: usize,
    pub seed: u64,
    /// Blocks discarded at each edge of a batch; `None` means `M + 2`.
    pub warmup_blocks: Option<usize>,
    pub stats: SignalStats,
    pub constellation: Constellation,
}

impl SimConfig {
    pub fn new(n_blocks: usize, seed: u64, stats: SignalStats) -> Self {
        Self {
            n_blocks,
            seed,
            warmup_blocks: None,
            stats,
            constellation: Constellation::new(ConstellationKind::Qpsk),
        }
    }

    pub fn with_constellation(mut self, kind: ConstellationKind) -> Self {
        self.constellation = Constellation::new(kind);
        self
    }
}

/// Empirical per-tone estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    pub p_signal: Vec<f64>,
    pub p_interference_plus_noise: Vec<f64>,
    pub sinr: Vec<f64>,
    pub b_des_hat: Vec<Complex64>,
    pub n_blocks_used: usize,
}

impl SimResult {
    pub fn sinr_db(&self) -> Vec<f64> {
        self.sinr.iter().map(|s| 10.0 * s.log10()).collect()
    }
}

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    fn merge(&mut self, other: &Self) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

struct Transforms {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scale: f64,
}

impl Transforms {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
            scale: 1.0 / (n as f64).sqrt(),
        }
    }
}

/// Time-domain stream for consecutive symbol blocks: unitary IDFT of each
/// block, then cyclic prefix or zero padding.
fn modulate_stream(cfg: &OfdmConfig, symbols: &[Complex64], dft: &Transforms) -> Vec<Complex64> {
    let n = cfg.n_subcarriers();
    let mu = cfg.redundancy();
    let n0 = cfg.block_len();
    let blocks = symbols.len() / n;
    let mut x = vec![Complex64::default(); blocks * n0];
    let mut time = vec![Complex64::default(); n];
    for (l, block) in symbols.chunks_exact(n).enumerate() {
        time.copy_from_slice(block);
        dft.inverse.process(&mut time);
        let out = &mut x[l * n0..(l + 1) * n0];
        match cfg.scheme() {
            Scheme::Cp => {
                out[..mu].copy_from_slice(&time[n - mu..]);
                out[mu..].copy_from_slice(&time);
            }
            // Trailing μ samples stay zero.
            Scheme::ZpOla => out[..n].copy_from_slice(&time),
        }
        out.iter_mut().for_each(|v| *v *= dft.scale);
    }
    x
}

/// Redundancy removal (or overlap-add) and unitary DFT of one `N₀`-sample
/// frame into `tones`.
fn demodulate_frame(
    cfg: &OfdmConfig,
    frame: &[Complex64],
    tones: &mut [Complex64],
    dft: &Transforms,
) {
    let n = cfg.n_subcarriers();
    let mu = cfg.redundancy();
    match cfg.scheme() {
        Scheme::Cp => tones.copy_from_slice(&frame[mu..]),
        Scheme::ZpOla => {
            tones.copy_from_slice(&frame[..n]);
            for i in 0..mu {
                tones[i] += frame[n + i];
            }
        }
    }
    dft.forward.process(tones);
    tones.iter_mut().for_each(|v| *v *= dft.scale);
}

fn add_noise(y: &mut [Complex64], amp: f64, rng: &mut ChaCha8Rng) {
    if amp > 0.0 {
        for v in y.iter_mut() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *v += Complex64::new(re, im) * amp;
        }
    }
}

/// Sends consecutive symbol blocks (`symbols.len()` a multiple of `N`)
/// through the channel with AWGN of variance `sigma2_q` and returns the
/// pre-equalizer tones `W·Υ·frame` of every block. Blocks before the first
/// and after the last are silent.
pub fn transmit_blocks(
    cfg: &OfdmConfig,
    ch: &ChannelModel,
    symbols: &[Complex64],
    sigma2_q: f64,
    seed: u64,
) -> Result<Vec<Complex64>> {
    let n = cfg.n_subcarriers();
    let n0 = cfg.block_len();
    if symbols.is_empty() || !symbols.len().is_multiple_of(n) {
        return Err(Error::InvalidParameter(format!(
            "{} symbols do not fill whole {n}-tone blocks",
            symbols.len()
        )));
    }
    if sigma2_q.is_nan() || sigma2_q < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "noise variance {sigma2_q} is negative"
        )));
    }
    let dft = Transforms::new(n);
    let blocks = symbols.len() / n;
    let x = modulate_stream(cfg, symbols, &dft);
    let mut y = convolve(&x, ch.taps());
    y.resize(y.len().max((blocks + 1) * n0), Complex64::default());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    add_noise(&mut y, (sigma2_q / 2.0).sqrt(), &mut rng);

    let delay = cfg.sync_delay();
    let mut out = vec![Complex64::default(); symbols.len()];
    for (l, tones) in out.chunks_exact_mut(n).enumerate() {
        demodulate_frame(cfg, &y[l * n0 + delay..l * n0 + delay + n0], tones, &dft);
    }
    Ok(out)
}

struct Simulator<'a> {
    cfg: &'a OfdmConfig,
    ch: &'a ChannelModel,
    sim: &'a SimConfig,
    warmup: usize,
    blocks_per_batch: usize,
    tones: Transforms,
}

impl<'a> Simulator<'a> {
    fn new(cfg: &'a OfdmConfig, ch: &'a ChannelModel, sim: &'a SimConfig) -> Result<Self> {
        if sim.n_blocks < MIN_BLOCKS {
            return Err(Error::TooFewBlocks {
                min: MIN_BLOCKS,
                got: sim.n_blocks,
            });
        }
        let n0 = cfg.block_len();
        let (m_span, _) = block_span(ch.order(), n0);
        let warmup = sim.warmup_blocks.unwrap_or(m_span + 2);
        if warmup >= sim.n_blocks {
            return Err(Error::WarmupTooLong {
                warmup,
                n_blocks: sim.n_blocks,
            });
        }
        // At least 8 warmups' worth of measured blocks per batch.
        let blocks_per_batch = (BATCH_SAMPLES / n0).max(16 * warmup).max(64);
        Ok(Self {
            cfg,
            ch,
            sim,
            warmup,
            blocks_per_batch,
            tones: Transforms::new(cfg.n_subcarriers()),
        })
    }

    fn batches(&self) -> Vec<(u64, usize)> {
        let full = self.sim.n_blocks / self.blocks_per_batch;
        let rest = self.sim.n_blocks % self.blocks_per_batch;
        let mut out: Vec<(u64, usize)> = (0..full as u64)
            .map(|i| (i, self.blocks_per_batch))
            .collect();
        if rest > 0 {
            out.push((full as u64, rest));
        }
        out
    }

    /// Transmits one batch and hands every measured `(X[l], Y[l])` pair to
    /// `visit`. `Y` is the pre-equalizer tone vector `W·Υ·frame`.
    fn run_batch(
        &self,
        batch: u64,
        measured: usize,
        mut visit: impl FnMut(&[Complex64], &[Complex64]),
    ) {
        let n = self.cfg.n_subcarriers();
        let n0 = self.cfg.block_len();
        let delay = self.cfg.sync_delay();
        let total = measured + 2 * self.warmup;
        let amp = self.sim.stats.sigma2_x().sqrt();
        let noise_amp = (self.sim.stats.sigma2_q() / 2.0).sqrt();
        let points = self.sim.constellation.points();

        let mut sym_rng = ChaCha8Rng::seed_from_u64(self.sim.seed);
        sym_rng.set_stream(2 * batch);
        let mut noise_rng = ChaCha8Rng::seed_from_u64(self.sim.seed);
        noise_rng.set_stream(2 * batch + 1);

        let mut symbols = vec![Complex64::default(); total * n];
        for s in symbols.iter_mut() {
            *s = points[sym_rng.random_range(0..points.len())] * amp;
        }

        let x = modulate_stream(self.cfg, &symbols, &self.tones);
        let mut y = convolve(&x, self.ch.taps());
        y.resize(y.len().max((total + 1) * n0), Complex64::default());
        add_noise(&mut y, noise_amp, &mut noise_rng);

        let mut tones = vec![Complex64::default(); n];
        for l in self.warmup..self.warmup + measured {
            demodulate_frame(
                self.cfg,
                &y[l * n0 + delay..l * n0 + delay + n0],
                &mut tones,
                &self.tones,
            );
            visit(&symbols[l * n..(l + 1) * n], &tones);
        }
    }
}

/// Full linear convolution via zero-padded FFTs.
fn convolve(x: &[Complex64], h: &[Complex64]) -> Vec<Complex64> {
    let len = x.len() + h.len() - 1;
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut a = vec![Complex64::default(); size];
    a[..x.len()].copy_from_slice(x);
    let mut b = vec![Complex64::default(); size];
    b[..h.len()].copy_from_slice(h);
    fwd.process(&mut a);
    fwd.process(&mut b);
    let norm = 1.0 / size as f64;
    for (u, v) in a.iter_mut().zip(&b) {
        *u *= v * norm;
    }
    inv.process(&mut a);
    a.truncate(len);
    a
}

/// Simulates the link and estimates per-tone desired power and
/// interference-plus-noise power before equalization.
///
/// Two passes over the same deterministic stream: the first estimates the
/// gain `B̂ₖ = ⟨Yₖ·Xₖ*⟩/σ_X²`, the second averages `|Yₖ − B̂ₖ·Xₖ|²`.
pub fn simulate_stream(cfg: &OfdmConfig, ch: &ChannelModel, sim: &SimConfig) -> Result<SimResult> {
    let engine = Simulator::new(cfg, ch, sim)?;
    let n = cfg.n_subcarriers();
    let batches = engine.batches();

    let cross: Vec<Vec<ComplexSum>> = batches
        .par_iter()
        .map(|&(batch, measured)| {
            let mut acc = vec![ComplexSum::default(); n];
            engine.run_batch(batch, measured, |xs, ys| {
                for ((a, x), y) in acc.iter_mut().zip(xs).zip(ys) {
                    a.add(y * x.conj());
                }
            });
            acc
        })
        .collect();
    let mut total = vec![ComplexSum::default(); n];
    for part in &cross {
        for (t, p) in total.iter_mut().zip(part) {
            t.merge(p);
        }
    }
    let denom = sim.n_blocks as f64 * sim.stats.sigma2_x();
    let b_hat: Vec<Complex64> = total.iter().map(|s| s.value() / denom).collect();

    let residual: Vec<Vec<CompensatedSum>> = batches
        .par_iter()
        .map(|&(batch, measured)| {
            let mut acc = vec![CompensatedSum::default(); n];
            engine.run_batch(batch, measured, |xs, ys| {
                for (k, a) in acc.iter_mut().enumerate() {
                    a.add((ys[k] - b_hat[k] * xs[k]).norm_sqr());
                }
            });
            acc
        })
        .collect();
    let mut res_total = vec![CompensatedSum::default(); n];
    for part in &residual {
        for (t, p) in res_total.iter_mut().zip(part) {
            t.merge(p);
        }
    }

    let p_signal: Vec<f64> = b_hat
        .iter()
        .map(|b| sim.stats.sigma2_x() * b.norm_sqr())
        .collect();
    let p_in: Vec<f64> = res_total
        .iter()
        .map(|s| s.value() / sim.n_blocks as f64)
        .collect();
    let sinr = p_signal
        .iter()
        .zip(&p_in)
        .map(|(&s, &i)| {
            if s == 0.0 {
                0.0
            } else if i == 0.0 {
                f64::INFINITY
            } else {
                s / i
            }
        })
        .collect();
    Ok(SimResult {
        p_signal,
        p_interference_plus_noise: p_in,
        sinr,
        b_des_hat: b_hat,
        n_blocks_used: sim.n_blocks,
    })
}
