//! SNR-gap approximation and achievable data rate.

use statrs::function::erf::erfc;

use crate::analysis::InterferenceReport;
use crate::error::{Error, Result};
use crate::model::OfdmConfig;

/// Power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB.
pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of [`q_function`] on `(0, 1)`.
///
/// Starts from Acklam's rational approximation of the normal quantile
/// (relative error below 1.2e−9) and applies one Newton step on `Q`.
pub fn q_inverse(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tail probability must lie in (0, 1), got {q}"
        )));
    }
    // Q⁻¹(q) = −Φ⁻¹(q)
    let x = -normal_quantile_acklam(q);
    let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
    Ok(x + (q_function(x) - q) / density)
}

#[allow(clippy::excessive_precision)]
fn normal_quantile_acklam(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        let r = (-2.0 * q.ln()).sqrt();
        (((((C[0] * r + C[1]) * r + C[2]) * r + C[3]) * r + C[4]) * r + C[5])
            / ((((D[0] * r + D[1]) * r + D[2]) * r + D[3]) * r + 1.0)
    };
    if p < P_LOW {
        tail(p)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail(1.0 - p)
    }
}

/// Uncoded QAM gap `(1/3)·[Q⁻¹(SER/4)]²`, linear scale.
pub fn gamma_m(ser: f64) -> Result<f64> {
    if !(ser > 0.0 && ser < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "symbol error rate must lie in (0, 1), got {ser}"
        )));
    }
    let x = q_inverse(ser / 4.0)?;
    Ok(x * x / 3.0)
}

/// Parameters of the gap approximation and of the rate sum.
#[derive(Clone, Debug, PartialEq)]
pub struct RateParams {
    ser_target: f64,
    design_margin_db: f64,
    coding_gain_db: f64,
    sampling_rate_hz: f64,
    active_tones: Vec<usize>,
}

impl RateParams {
    /// `active_tones` is sorted and deduplicated.
    pub fn new(
        ser_target: f64,
        design_margin_db: f64,
        coding_gain_db: f64,
        sampling_rate_hz: f64,
        mut active_tones: Vec<usize>,
    ) -> Result<Self> {
        if !(ser_target > 0.0 && ser_target < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "SER target must lie in (0, 1), got {ser_target}"
            )));
        }
        if !design_margin_db.is_finite() || !coding_gain_db.is_finite() {
            return Err(Error::InvalidParameter("margins must be finite".into()));
        }
        if !(sampling_rate_hz.is_finite() && sampling_rate_hz > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sampling rate must be positive, got {sampling_rate_hz}"
            )));
        }
        active_tones.sort_unstable();
        active_tones.dedup();
        if active_tones.is_empty() {
            return Err(Error::InvalidParameter("no active tones".into()));
        }
        Ok(Self {
            ser_target,
            design_margin_db,
            coding_gain_db,
            sampling_rate_hz,
            active_tones,
        })
    }

    pub fn ser_target(&self) -> f64 {
        self.ser_target
    }

    pub fn design_margin_db(&self) -> f64 {
        self.design_margin_db
    }

    pub fn coding_gain_db(&self) -> f64 {
        self.coding_gain_db
    }

    pub fn sampling_rate_hz(&self) -> f64 {
        self.sampling_rate_hz
    }

    pub fn active_tones(&self) -> &[usize] {
        &self.active_tones
    }

    pub fn with_sampling_rate(&self, sampling_rate_hz: f64) -> Result<Self> {
        Self::new(
            self.ser_target,
            self.design_margin_db,
            self.coding_gain_db,
            sampling_rate_hz,
            self.active_tones.clone(),
        )
    }
}

/// Total gap `γ_dm − γ_c + Γ_m`, assembled in dB, returned linear.
pub fn snr_gap(p: &RateParams) -> Result<f64> {
    let gm_db = linear_to_db(gamma_m(p.ser_target)?);
    Ok(db_to_linear(p.design_margin_db - p.coding_gain_db + gm_db))
}

/// Bits per symbol on one tone, `log₂(1 + SINR/Γ)`.
pub fn tone_capacity(sinr: f64, gap: f64) -> f64 {
    (sinr / gap).ln_1p() / std::f64::consts::LN_2
}

/// `f_s·(N/N₀)·Σ C(k)` over the active tones, in bit/s.
pub fn achievable_rate(
    report: &InterferenceReport,
    cfg: &OfdmConfig,
    p: &RateParams,
) -> Result<f64> {
    let n = cfg.n_subcarriers();
    if report.n_subcarriers() != n {
        return Err(Error::InvalidParameter(format!(
            "report has {} tones, configuration has {n}",
            report.n_subcarriers()
        )));
    }
    if let Some(&bad) = p.active_tones.iter().find(|&&k| k >= n) {
        return Err(Error::InvalidParameter(format!(
            "active tone {bad} is out of range for N = {n}"
        )));
    }
    let gap = snr_gap(p)?;
    let bits: f64 = p
        .active_tones
        .iter()
        .map(|&k| tone_capacity(report.sinr[k], gap))
        .sum();
    Ok(p.sampling_rate_hz * n as f64 / cfg.block_len() as f64 * bits)
}
