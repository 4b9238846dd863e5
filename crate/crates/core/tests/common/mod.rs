#![allow(dead_code)]

use dispersive_ofdm::{ChannelModel, Complex64, ComplexMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random complex taps with an exponentially decaying envelope that drops
/// to `tail_amp` at the last tap.
pub fn random_channel(order: usize, tail_amp: f64, seed: u64) -> ChannelModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = if order == 0 {
        0.0
    } else {
        -tail_amp.ln() / order as f64
    };
    let taps = (0..=order)
        .map(|j| {
            let env = (-decay * j as f64).exp();
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5) * env
        })
        .collect();
    ChannelModel::new(taps, 1.0).unwrap()
}

pub fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

pub fn frobenius_sq(m: &ComplexMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn db(x: f64) -> f64 {
    10.0 * x.log10()
}
