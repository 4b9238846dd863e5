//! One-tap frequency-domain equalizers.
//!
//! With enough redundancy the folded channel `Υ·H₍₀₎·Γ` is circulant and the
//! DFT diagonalizes it into `D = diag(√N·W·[h; 0])`. For longer channels
//! [`desired_gain`] uses the diagonal of `B^{des,ICI₁}` instead; this
//! generalization is ours and reduces to `D` when `ν ≤ μ`, `Δ = 0`.

use num_complex::Complex64;

use crate::analysis::interference_matrices;
use crate::error::{Error, Result};
use crate::model::{dft_matrix, ChannelModel, OfdmConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EqualizerKind {
    ZeroForcing,
    Mmse,
    Identity,
}

/// Diagonal of `E`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalEqualizer {
    pub coeffs: Vec<Complex64>,
    pub kind: EqualizerKind,
}

impl DiagonalEqualizer {
    pub fn apply(&self, tones: &mut [Complex64]) {
        for (y, e) in tones.iter_mut().zip(&self.coeffs) {
            *y *= e;
        }
    }
}

/// `√n·W_n·[h; 0]`, the per-tone channel gain under sufficient redundancy.
pub fn channel_diagonal(ch: &ChannelModel, n: usize) -> Result<Vec<Complex64>> {
    if ch.order() >= n {
        return Err(Error::ChannelTooLong {
            order: ch.order(),
            n,
        });
    }
    let w = dft_matrix(n);
    let scale = (n as f64).sqrt();
    Ok((0..n)
        .map(|k| {
            ch.taps()
                .iter()
                .enumerate()
                .map(|(j, h)| w[(k, j)] * h)
                .sum::<Complex64>()
                * scale
        })
        .collect())
}

/// Diagonal of `B^{des,ICI₁}` for any channel length.
pub fn desired_gain(cfg: &OfdmConfig, ch: &ChannelModel) -> Vec<Complex64> {
    interference_matrices(cfg, ch)
        .b_full
        .diagonal()
        .iter()
        .copied()
        .collect()
}

/// ZF `1/dₖ`, MMSE `dₖ*/(|dₖ|² + 1/snr)`, or all ones.
pub fn make_equalizer(kind: EqualizerKind, d: &[Complex64], snr: f64) -> Result<DiagonalEqualizer> {
    let coeffs = match kind {
        EqualizerKind::Identity => vec![Complex64::new(1.0, 0.0); d.len()],
        EqualizerKind::ZeroForcing => {
            if let Some(tone) = d.iter().position(|x| x.norm_sqr() == 0.0) {
                return Err(Error::SpectralNull { tone });
            }
            d.iter().map(|x| x.inv()).collect()
        }
        EqualizerKind::Mmse => {
            if snr.is_nan() || snr <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "MMSE equalizer needs a positive SNR, got {snr}"
                )));
            }
            d.iter()
                .map(|x| x.conj() / (x.norm_sqr() + 1.0 / snr))
                .collect()
        }
    };
    Ok(DiagonalEqualizer { coeffs, kind })
}
