//! Channel impulse response files, truncation and synthetic channels.
//!
//! CIR files are plain text, one tap per line as `re,im` or `re`. Lines
//! starting with `#` are comments (joined into the description) and an
//! optional `rate_hz=<float>` line carries the sampling rate.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::ChannelModel;

/// Sampling rate assumed when a CIR file carries none (2.208 MHz).
pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 2.208e6;

/// Parsed contents of a CIR file.
#[derive(Clone, Debug, PartialEq)]
pub struct CirFile {
    pub taps: Vec<Complex64>,
    pub sampling_rate_hz: Option<f64>,
    pub description: String,
}

impl CirFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut taps = Vec::new();
        let mut sampling_rate_hz = None;
        let mut description = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                description.push(comment.trim().to_string());
                continue;
            }
            if let Some(rate) = line.strip_prefix("rate_hz=") {
                let rate = parse_float(rate, line_no)?;
                if rate <= 0.0 {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("sampling rate must be positive, got {rate}"),
                    });
                }
                sampling_rate_hz = Some(rate);
                continue;
            }
            let mut fields = line.split(',');
            let re = parse_float(fields.next().unwrap_or(""), line_no)?;
            let im = match fields.next() {
                Some(f) => parse_float(f, line_no)?,
                None => 0.0,
            };
            if fields.next().is_some() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `re` or `re,im`".into(),
                });
            }
            taps.push(Complex64::new(re, im));
        }
        if taps.is_empty() {
            return Err(Error::Parse {
                line: 0,
                msg: "file contains no taps".into(),
            });
        }
        Ok(Self {
            taps,
            sampling_rate_hz,
            description: description.join("\n"),
        })
    }

    /// Text form. Floats use the shortest representation that parses back
    /// to the same bits.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.description.lines() {
            let _ = writeln!(out, "# {line}");
        }
        if let Some(rate) = self.sampling_rate_hz {
            let _ = writeln!(out, "rate_hz={rate:?}");
        }
        for t in &self.taps {
            let _ = writeln!(out, "{:?},{:?}", t.re, t.im);
        }
        out
    }

    pub fn into_channel(self) -> Result<ChannelModel> {
        ChannelModel::new(
            self.taps,
            self.sampling_rate_hz.unwrap_or(DEFAULT_SAMPLING_RATE_HZ),
        )
    }
}

fn parse_float(field: &str, line: usize) -> Result<f64> {
    let value: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{}` as a number", field.trim()),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value `{}`", field.trim()),
        });
    }
    Ok(value)
}

pub fn load_cir(path: impl AsRef<Path>) -> Result<ChannelModel> {
    CirFile::parse(&std::fs::read_to_string(path)?)?.into_channel()
}

pub fn save_cir(path: impl AsRef<Path>, ch: &ChannelModel, description: &str) -> Result<()> {
    let file = CirFile {
        taps: ch.taps().to_vec(),
        sampling_rate_hz: Some(ch.sampling_rate_hz()),
        description: description.to_string(),
    };
    std::fs::write(path, file.render())?;
    Ok(())
}

/// First `max_len` taps and the fraction of energy discarded,
/// `1 − ‖h[..max_len]‖²/‖h‖²`.
pub fn truncate_cir(ch: &ChannelModel, max_len: usize) -> Result<(ChannelModel, f64)> {
    if max_len == 0 {
        return Err(Error::InvalidParameter(
            "truncation length must be positive".into(),
        ));
    }
    if max_len >= ch.taps().len() {
        return Ok((ch.clone(), 0.0));
    }
    let head = &ch.taps()[..max_len];
    let kept: f64 = head.iter().map(|t| t.norm_sqr()).sum();
    let fraction = 1.0 - kept / ch.energy();
    let truncated =
        ChannelModel::new(head.to_vec(), ch.sampling_rate_hz()).map_err(|e| match e {
            Error::ZeroChannel => {
                Error::InvalidParameter(format!("the first {max_len} taps are all zero"))
            }
            other => other,
        })?;
    Ok((truncated, fraction))
}

/// `hⱼ = gⱼ·e^{−decay_rate·j}`, `gⱼ` i.i.d. unit-variance circular complex
/// Gaussian drawn from a ChaCha8 stream seeded with `seed`.
pub fn synth_exponential(nu: usize, decay_rate: f64, seed: u64) -> Result<ChannelModel> {
    if !(decay_rate.is_finite() && decay_rate > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "decay rate must be positive, got {decay_rate}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let taps = (0..=nu)
        .map(|j| {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            Complex64::new(re, im) * (s * (-decay_rate * j as f64).exp())
        })
        .collect();
    ChannelModel::new(taps, DEFAULT_SAMPLING_RATE_HZ)
}

/// Direct path `h₀ = 1` plus an echo of `gain` at `delay` samples.
pub fn synth_two_ray(delay: usize, gain: f64) -> Result<ChannelModel> {
    if gain.is_nan() || gain.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "|gain| must be at most 1, got {gain}"
        )));
    }
    let mut taps = vec![Complex64::default(); delay + 1];
    taps[0] = Complex64::new(1.0, 0.0);
    taps[delay] += Complex64::new(gain, 0.0);
    ChannelModel::new(taps, DEFAULT_SAMPLING_RATE_HZ)
}

/// Rescales the taps from index `split` on so that they hold exactly
/// `fraction` of the total energy.
pub fn with_tail_fraction(ch: &ChannelModel, split: usize, fraction: f64) -> Result<ChannelModel> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail fraction must lie in (0, 1), got {fraction}"
        )));
    }
    let taps = ch.taps();
    if split == 0 || split >= taps.len() {
        return Err(Error::InvalidParameter(format!(
            "split {split} must fall inside the {} taps",
            taps.len()
        )));
    }
    let head: f64 = taps[..split].iter().map(|t| t.norm_sqr()).sum();
    let tail: f64 = taps[split..].iter().map(|t| t.norm_sqr()).sum();
    if head == 0.0 || tail == 0.0 {
        return Err(Error::InvalidParameter(
            "head and tail both need energy".into(),
        ));
    }
    let gain = (fraction * head / ((1.0 - fraction) * tail)).sqrt();
    let scaled = taps
        .iter()
        .enumerate()
        .map(|(j, &t)| if j >= split { t * gain } else { t })
        .collect();
    ChannelModel::new(scaled, ch.sampling_rate_hz())
}
