//! JSON run configuration. Every section and key is optional; missing values
//! take the long-loop defaults (2.208 MHz sampling, N = 512, 32-sample CP,
//! tones 7..=256, 6 dB margin, 4.2 dB coding gain, SER 1e-7, 23 dBm/Hz
//! transmit PSD, -140 dBm/Hz noise). Unknown keys are rejected.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dispersive_ofdm::montecarlo::{ConstellationKind, MIN_BLOCKS};
use dispersive_ofdm::teq::{default_delay_grid, AnalysisMode};
use dispersive_ofdm::{OfdmConfig, RateParams, Scheme, SignalStats};
use serde::Deserialize;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub ofdm: OfdmSection,
    pub signal: SignalSection,
    pub rate: RateSection,
    /// CIR file, relative to the config file. `--cir` takes precedence.
    pub cir: Option<PathBuf>,
    /// Truncate the CIR to this many taps before `analyze`/`simulate`.
    pub max_cir_len: Option<usize>,
    pub simulation: SimulationSection,
    pub sweep: SweepSection,
    pub teq: TeqSection,
    pub channel: ChannelSection,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Cp,
    ZpOla,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmSection {
    pub n: usize,
    pub cp_len: usize,
    pub scheme: SchemeName,
    pub sync_delay: usize,
}

impl Default for OfdmSection {
    fn default() -> Self {
        Self {
            n: 512,
            cp_len: 32,
            scheme: SchemeName::Cp,
            sync_delay: 0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalSection {
    pub signal_psd_dbm_hz: f64,
    pub noise_psd_dbm_hz: f64,
    /// Impedance the dBm figures refer to; reported, not modeled.
    pub reference_ohms: f64,
}

impl Default for SignalSection {
    fn default() -> Self {
        Self {
            signal_psd_dbm_hz: 23.0,
            noise_psd_dbm_hz: -140.0,
            reference_ohms: 100.0,
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateSection {
    pub sampling_rate_hz: f64,
    pub ser: f64,
    pub design_margin_db: f64,
    pub coding_gain_db: f64,
    pub first_tone: usize,
    pub last_tone: usize,
}

impl Default for RateSection {
    fn default() -> Self {
        Self {
            sampling_rate_hz: 2.208e6,
            ser: 1e-7,
            design_margin_db: 6.0,
            coding_gain_db: 4.2,
            first_tone: 7,
            last_tone: 256,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ConstellationName {
    Qpsk,
    Qam16,
    Qam64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_blocks: usize,
    pub seed: u64,
    pub constellation: ConstellationName,
    pub warmup_blocks: Option<usize>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        Self {
            n_blocks: 200_000,
            seed: 0,
            constellation: ConstellationName::Qpsk,
            warmup_blocks: None,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum AxisName {
    Teq,
    Cp,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    Conventional,
    Actual,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: AxisName,
    pub teq_lens: Vec<usize>,
    pub cp_lens: Vec<usize>,
    /// TEQ delays searched at every grid point; `None` means `2..=50`.
    pub delays: Option<Vec<usize>>,
    pub modes: Vec<ModeName>,
    pub conventional_max_len: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            axis: AxisName::Teq,
            teq_lens: vec![1, 2, 4, 8, 16, 32],
            cp_lens: (8..=64).step_by(8).collect(),
            delays: None,
            modes: vec![ModeName::Conventional, ModeName::Actual],
            conventional_max_len: 512,
        }
    }
}

impl SweepSection {
    pub fn delay_grid(&self) -> Vec<usize> {
        self.delays.clone().unwrap_or_else(default_delay_grid)
    }

    pub fn analysis_modes(&self) -> Vec<AnalysisMode> {
        self.modes
            .iter()
            .map(|m| match m {
                ModeName::Conventional => AnalysisMode::Conventional {
                    max_len: self.conventional_max_len,
                },
                ModeName::Actual => AnalysisMode::Actual,
            })
            .collect()
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TeqSection {
    pub length: usize,
    /// Fixed delay; `None` searches the sweep delay grid for the best rate.
    pub delay: Option<usize>,
}

impl Default for TeqSection {
    fn default() -> Self {
        Self {
            length: 16,
            delay: None,
        }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSection {
    Exponential {
        nu: usize,
        decay: f64,
        #[serde(default)]
        seed: u64,
        /// Rescale taps from `tail_split` on so they hold `tail_fraction`
        /// of the energy.
        tail_split: Option<usize>,
        tail_fraction: Option<f64>,
    },
    TwoRay {
        delay: usize,
        gain: f64,
    },
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self::Exponential {
            nu: 1500,
            decay: 0.005,
            seed: 0,
            tail_split: None,
            tail_fraction: None,
        }
    }
}

/// Variance of a flat PSD over the sampled band: `10^((P − 30)/10)·f_s`.
pub fn dbm_hz_to_variance(dbm_hz: f64, sampling_rate_hz: f64) -> f64 {
    10f64.powf((dbm_hz - 30.0) / 10.0) * sampling_rate_hz
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Self = serde_json::from_str(&text)
            .with_context(|| format!("parsing config {}", path.display()))?;
        if let Some(cir) = &cfg.cir {
            if cir.is_relative() {
                let base = path.parent().unwrap_or(Path::new(""));
                cfg.cir = Some(base.join(cir));
            }
        }
        Ok(cfg)
    }

    pub fn ofdm_config(&self) -> Result<OfdmConfig> {
        let scheme = match self.ofdm.scheme {
            SchemeName::Cp => Scheme::Cp,
            SchemeName::ZpOla => Scheme::ZpOla,
        };
        Ok(OfdmConfig::new(
            self.ofdm.n,
            self.ofdm.cp_len,
            scheme,
            self.ofdm.sync_delay,
        )?)
    }

    pub fn signal_stats(&self) -> Result<SignalStats> {
        let fs = self.rate.sampling_rate_hz;
        Ok(SignalStats::new(
            dbm_hz_to_variance(self.signal.signal_psd_dbm_hz, fs),
            dbm_hz_to_variance(self.signal.noise_psd_dbm_hz, fs),
        )?)
    }

    pub fn rate_params(&self) -> Result<RateParams> {
        let r = &self.rate;
        ensure!(
            r.first_tone <= r.last_tone,
            "first_tone {} exceeds last_tone {}",
            r.first_tone,
            r.last_tone
        );
        ensure!(
            r.last_tone < self.ofdm.n,
            "last_tone {} is out of range for n = {}",
            r.last_tone,
            self.ofdm.n
        );
        Ok(RateParams::new(
            r.ser,
            r.design_margin_db,
            r.coding_gain_db,
            r.sampling_rate_hz,
            (r.first_tone..=r.last_tone).collect(),
        )?)
    }

    pub fn constellation(&self) -> ConstellationKind {
        match self.simulation.constellation {
            ConstellationName::Qpsk => ConstellationKind::Qpsk,
            ConstellationName::Qam16 => ConstellationKind::Qam16,
            ConstellationName::Qam64 => ConstellationKind::Qam64,
        }
    }

    /// Checks shared by every command that runs an analysis.
    pub fn validate_analysis(&self) -> Result<()> {
        self.ofdm_config()?;
        self.signal_stats()?;
        self.rate_params()?;
        if self.max_cir_len == Some(0) {
            bail!("max_cir_len must be at least 1");
        }
        Ok(())
    }

    pub fn validate_simulation(&self) -> Result<()> {
        self.validate_analysis()?;
        ensure!(
            self.simulation.n_blocks >= MIN_BLOCKS,
            "simulation.n_blocks must be at least {MIN_BLOCKS}, got {}",
            self.simulation.n_blocks
        );
        Ok(())
    }

    pub fn validate_sweep(&self) -> Result<()> {
        self.validate_analysis()?;
        let s = &self.sweep;
        let grid = match s.axis {
            AxisName::Teq => &s.teq_lens,
            AxisName::Cp => &s.cp_lens,
        };
        ensure!(!grid.is_empty(), "sweep grid is empty");
        ensure!(!s.teq_lens.is_empty(), "sweep.teq_lens is empty");
        ensure!(
            s.teq_lens.iter().all(|&t| t >= 1),
            "TEQ lengths must be positive"
        );
        ensure!(!s.modes.is_empty(), "sweep.modes is empty");
        ensure!(!s.delay_grid().is_empty(), "sweep.delays is empty");
        ensure!(
            s.conventional_max_len >= 1,
            "conventional_max_len must be positive"
        );
        if s.axis == AxisName::Cp {
            for &mu in &s.cp_lens {
                ensure!(
                    mu < self.ofdm.n,
                    "CP length {mu} must be below n = {}",
                    self.ofdm.n
                );
            }
        }
        Ok(())
    }

    pub fn validate_teq(&self) -> Result<()> {
        self.validate_analysis()?;
        ensure!(self.teq.length >= 1, "teq.length must be positive");
        if self.teq.delay.is_none() {
            ensure!(!self.sweep.delay_grid().is_empty(), "sweep.delays is empty");
        }
        Ok(())
    }
}
