use std::path::Path;

use anyhow::{anyhow, Context, Result};
use dispersive_ofdm::channels::{
    load_cir, synth_exponential, synth_two_ray, truncate_cir, with_tail_fraction, CirFile,
};
use dispersive_ofdm::montecarlo::{simulate_stream, SimConfig};
use dispersive_ofdm::rate::{achievable_rate, linear_to_db, snr_gap, tone_capacity};
use dispersive_ofdm::teq::{
    convolve_taps, design_mssnr, evaluate_point, shortening_ratio, sweep_rate, AnalysisMode,
    SweepAxis,
};
use dispersive_ofdm::{analyze, ChannelModel, OfdmConfig, RateParams};

use crate::config::{AxisName, ChannelSection, RunConfig};
use crate::output::{Cell, Table};

fn scheme_name(cfg: &OfdmConfig) -> &'static str {
    match cfg.scheme() {
        dispersive_ofdm::Scheme::Cp => "cp",
        dispersive_ofdm::Scheme::ZpOla => "zp-ola",
    }
}

fn mode_name(mode: AnalysisMode) -> &'static str {
    match mode {
        AnalysisMode::Conventional { .. } => "conventional",
        AnalysisMode::Actual => "actual",
    }
}

fn load_channel(run: &RunConfig, cir: Option<&Path>) -> Result<ChannelModel> {
    let path = cir
        .or(run.cir.as_deref())
        .ok_or_else(|| anyhow!("no CIR given: pass --cir or set \"cir\" in the config"))?;
    load_cir(path).with_context(|| format!("loading CIR {}", path.display()))
}

/// Applies `max_cir_len`, returning the analyzed channel and discarded
/// energy fraction.
fn maybe_truncate(run: &RunConfig, ch: ChannelModel) -> Result<(ChannelModel, f64)> {
    match run.max_cir_len {
        Some(len) => Ok(truncate_cir(&ch, len)?),
        None => Ok((ch, 0.0)),
    }
}

fn common_meta(
    table: &mut Table,
    run: &RunConfig,
    cfg: &OfdmConfig,
    ch: &ChannelModel,
) -> Result<()> {
    let stats = run.signal_stats()?;
    table.meta("n", cfg.n_subcarriers());
    table.meta("cp_len", cfg.redundancy());
    table.meta("scheme", scheme_name(cfg));
    table.meta("sync_delay", cfg.sync_delay());
    table.meta("cir_order", ch.order());
    table.meta("sampling_rate_hz", run.rate.sampling_rate_hz);
    table.meta("sigma2_x", stats.sigma2_x());
    table.meta("sigma2_q", stats.sigma2_q());
    table.meta("reference_ohms", run.signal.reference_ohms);
    table.meta("snr_gap_db", linear_to_db(snr_gap(&run.rate_params()?)?));
    Ok(())
}

fn bits_per_tone(sinr: &[f64], rp: &RateParams) -> Result<Vec<f64>> {
    let gap = snr_gap(rp)?;
    let mut bits = vec![0.0; sinr.len()];
    for &k in rp.active_tones() {
        bits[k] = tone_capacity(sinr[k], gap);
    }
    Ok(bits)
}

pub fn analyze_cmd(run: &RunConfig, cir: Option<&Path>) -> Result<Table> {
    run.validate_analysis()?;
    let cfg = run.ofdm_config()?;
    let stats = run.signal_stats()?;
    let rp = run.rate_params()?;
    let full = load_channel(run, cir)?;
    let (ch, discarded) = maybe_truncate(run, full.clone())?;

    let report = analyze(&cfg, &ch, &stats)?;
    let rate = achievable_rate(&report, &cfg, &rp)?;
    let bits = bits_per_tone(&report.sinr, &rp)?;

    let mut table = Table::new(
        "analyze",
        &[
            "tone", "p_signal", "p_isi", "p_ici1", "p_ici2", "p_noise", "sinr_db", "bits",
        ],
    );
    common_meta(&mut table, run, &cfg, &full)?;
    table.meta("analyzed_order", ch.order());
    table.meta("rate_bps", rate);
    table.meta("m_span", report.m_span);
    table.meta("rho", report.rho);
    table.meta("discarded_energy", discarded);
    let sinr_db = report.sinr_db();
    for k in 0..cfg.n_subcarriers() {
        table.push(vec![
            k.into(),
            report.p_signal[k].into(),
            report.p_isi[k].into(),
            report.p_ici1[k].into(),
            report.p_ici2[k].into(),
            report.p_noise[k].into(),
            sinr_db[k].into(),
            bits[k].into(),
        ]);
    }
    Ok(table)
}

pub fn simulate_cmd(run: &RunConfig, cir: Option<&Path>, seed: Option<u64>) -> Result<Table> {
    run.validate_simulation()?;
    let cfg = run.ofdm_config()?;
    let stats = run.signal_stats()?;
    let rp = run.rate_params()?;
    let full = load_channel(run, cir)?;
    let (ch, discarded) = maybe_truncate(run, full.clone())?;

    let seed = seed.unwrap_or(run.simulation.seed);
    let mut sim_cfg = SimConfig::new(run.simulation.n_blocks, seed, stats)
        .with_constellation(run.constellation());
    sim_cfg.warmup_blocks = run.simulation.warmup_blocks;

    let report = analyze(&cfg, &ch, &stats)?;
    let sim = simulate_stream(&cfg, &ch, &sim_cfg)?;
    let analytic_db = report.sinr_db();
    let sim_db = sim.sinr_db();

    let gap = snr_gap(&rp)?;
    let scale = rp.sampling_rate_hz() * cfg.n_subcarriers() as f64 / cfg.block_len() as f64;
    let sim_rate: f64 = rp
        .active_tones()
        .iter()
        .map(|&k| tone_capacity(sim.sinr[k], gap))
        .sum::<f64>()
        * scale;
    let max_delta = rp
        .active_tones()
        .iter()
        .map(|&k| (sim_db[k] - analytic_db[k]).abs())
        .fold(0.0, f64::max);

    let mut table = Table::new(
        "simulate",
        &[
            "tone",
            "sinr_db_analytic",
            "sinr_db_sim",
            "delta_db",
            "p_signal_sim",
            "p_interference_noise_sim",
            "gain_re",
            "gain_im",
        ],
    );
    common_meta(&mut table, run, &cfg, &full)?;
    table.meta("analyzed_order", ch.order());
    table.meta("discarded_energy", discarded);
    table.meta("m_span", report.m_span);
    table.meta("rho", report.rho);
    table.meta("n_blocks", sim.n_blocks_used);
    table.meta("seed", seed);
    table.meta(
        "constellation",
        format!("{:?}", run.constellation()).to_lowercase(),
    );
    table.meta("rate_bps_analytic", achievable_rate(&report, &cfg, &rp)?);
    table.meta("rate_bps_sim", sim_rate);
    table.meta("max_abs_delta_db_active", max_delta);
    for k in 0..cfg.n_subcarriers() {
        table.push(vec![
            k.into(),
            analytic_db[k].into(),
            sim_db[k].into(),
            (sim_db[k] - analytic_db[k]).into(),
            sim.p_signal[k].into(),
            sim.p_interference_plus_noise[k].into(),
            sim.b_des_hat[k].re.into(),
            sim.b_des_hat[k].im.into(),
        ]);
    }
    Ok(table)
}

pub fn sweep_cmd(run: &RunConfig, cir: Option<&Path>) -> Result<Table> {
    run.validate_sweep()?;
    let cfg = run.ofdm_config()?;
    let stats = run.signal_stats()?;
    let rp = run.rate_params()?;
    let ch = load_channel(run, cir)?;
    let s = &run.sweep;
    let axis = match s.axis {
        AxisName::Teq => SweepAxis::TeqLength(s.teq_lens.clone()),
        AxisName::Cp => SweepAxis::Redundancy {
            values: s.cp_lens.clone(),
            teq_lens: s.teq_lens.clone(),
        },
    };
    let delays = s.delay_grid();

    let mut table = Table::new(
        "sweep",
        &[
            "mode",
            "value",
            "cp_len",
            "teq_len",
            "delay",
            "rate_bps",
            "shortening_snr_db",
            "discarded_fraction",
        ],
    );
    common_meta(&mut table, run, &cfg, &ch)?;
    table.meta(
        "axis",
        match s.axis {
            AxisName::Teq => "teq_len",
            AxisName::Cp => "cp_len",
        },
    );
    table.meta("conventional_max_len", s.conventional_max_len);
    for mode in s.analysis_modes() {
        for row in sweep_rate(&ch, &cfg, &stats, &rp, &axis, &delays, mode)? {
            table.push(vec![
                mode_name(mode).into(),
                row.value.into(),
                row.redundancy.into(),
                row.teq_len.into(),
                row.delay.into(),
                row.rate.into(),
                row.shortening_snr_db.into(),
                row.discarded_fraction.into(),
            ]);
        }
    }
    Ok(table)
}

pub fn teq_design_cmd(run: &RunConfig, cir: Option<&Path>) -> Result<Table> {
    run.validate_teq()?;
    let cfg = run.ofdm_config()?;
    let stats = run.signal_stats()?;
    let rp = run.rate_params()?;
    let ch = load_channel(run, cir)?;
    let t = run.teq.length;

    let (design, rate) = match run.teq.delay {
        Some(d) => {
            let cfg = cfg.with_sync_delay(d)?;
            let e = evaluate_point(&ch, &cfg, &stats, &rp, t, AnalysisMode::Actual)?;
            (e.design, e.rate)
        }
        None => {
            let row = sweep_rate(
                &ch,
                &cfg,
                &stats,
                &rp,
                &SweepAxis::TeqLength(vec![t]),
                &run.sweep.delay_grid(),
                AnalysisMode::Actual,
            )?
            .remove(0);
            let design = design_mssnr(&ch, t, cfg.redundancy() + 1, row.delay)?;
            (design, row.rate)
        }
    };
    let oir = convolve_taps(ch.taps(), &design.taps);

    let mut table = Table::new("teq-design", &["index", "re", "im"]);
    common_meta(&mut table, run, &cfg, &ch)?;
    table.meta("teq_len", t);
    table.meta("delay", design.delay);
    table.meta("window_len", design.window_len);
    table.meta("shortening_snr_db", design.shortening_snr_db);
    table.meta(
        "oir_shortening_snr_db",
        linear_to_db(shortening_ratio(&oir, design.window_len, design.delay)),
    );
    table.meta("rate_bps_actual", rate);
    for (i, w) in design.taps.iter().enumerate() {
        table.push(vec![i.into(), Cell::Float(w.re), Cell::Float(w.im)]);
    }
    Ok(table)
}

/// Synthesizes a channel and renders it in the CIR text format.
pub fn gen_channel_cmd(run: &RunConfig, seed: Option<u64>) -> Result<String> {
    let (ch, description) = match &run.channel {
        ChannelSection::Exponential {
            nu,
            decay,
            seed: cfg_seed,
            tail_split,
            tail_fraction,
        } => {
            let seed = seed.unwrap_or(*cfg_seed);
            let mut ch = synth_exponential(*nu, *decay, seed)?;
            let mut description =
                format!("exponential channel nu={nu} decay={decay:?} seed={seed}");
            match (tail_split, tail_fraction) {
                (Some(split), Some(fraction)) => {
                    ch = with_tail_fraction(&ch, *split, *fraction)?;
                    description
                        .push_str(&format!(" tail_split={split} tail_fraction={fraction:?}"));
                }
                (None, None) => {}
                _ => {
                    return Err(anyhow!(
                        "tail_split and tail_fraction must be given together"
                    ))
                }
            }
            (ch, description)
        }
        ChannelSection::TwoRay { delay, gain } => (
            synth_two_ray(*delay, *gain)?,
            format!("two-ray channel delay={delay} gain={gain:?}"),
        ),
    };
    let file = CirFile {
        taps: ch.taps().to_vec(),
        sampling_rate_hz: Some(run.rate.sampling_rate_hz),
        description: format!(
            "dofdm gen-channel v{}\n{description}",
            crate::output::FORMAT_VERSION
        ),
    };
    Ok(file.render())
}
