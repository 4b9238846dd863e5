//! Channel-shortening TEQ design (maximum shortening SNR) and rate sweeps
//! that compare a truncated-channel ("conventional") analysis against the
//! full-channel one.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::analysis::{analyze, SignalStats};
use crate::channels::truncate_cir;
use crate::error::{Error, Result};
use crate::model::{ChannelModel, OfdmConfig};
use crate::rate::{achievable_rate, linear_to_db, RateParams};

/// Default TEQ time-offset grid, `{2, …, 50}`.
pub fn default_delay_grid() -> Vec<usize> {
    (2..=50).collect()
}

const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TeqDesign {
    /// Unit-norm TEQ taps.
    pub taps: Vec<Complex64>,
    pub delay: usize,
    pub window_len: usize,
    pub shortening_snr_db: f64,
}

/// Full linear convolution `h ∗ w`.
pub fn convolve_taps(h: &[Complex64], w: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); h.len() + w.len() - 1];
    for (i, hi) in h.iter().enumerate() {
        for (j, wj) in w.iter().enumerate() {
            out[i + j] += hi * wj;
        }
    }
    out
}

/// Energy of `c` inside `delay..delay + window_len` over the energy outside.
pub fn shortening_ratio(c: &[Complex64], window_len: usize, delay: usize) -> f64 {
    let (mut inside, mut outside) = (0.0, 0.0);
    for (i, v) in c.iter().enumerate() {
        if i >= delay && i < delay + window_len {
            inside += v.norm_sqr();
        } else {
            outside += v.norm_sqr();
        }
    }
    inside / outside
}

/// Gram matrix `Σᵢ rᵢᴴ rᵢ` over the rows `i` of the convolution matrix
/// (`rᵢ[t] = h[i − t]`) selected by `keep`.
fn gram(h: &[Complex64], teq_len: usize, keep: impl Fn(usize) -> bool) -> DMatrix<Complex64> {
    let rows = h.len() + teq_len - 1;
    let tap = |i: usize, t: usize| {
        if i >= t && i - t < h.len() {
            h[i - t]
        } else {
            Complex64::default()
        }
    };
    let mut g = DMatrix::zeros(teq_len, teq_len);
    for i in (0..rows).filter(|&i| keep(i)) {
        for s in 0..teq_len {
            let a = tap(i, s).conj();
            if a == Complex64::default() {
                continue;
            }
            for t in 0..teq_len {
                g[(s, t)] += a * tap(i, t);
            }
        }
    }
    g
}

/// Designs the TEQ maximizing the energy of `h ∗ w` inside the window
/// `delay..delay + window_len` relative to the energy outside it.
///
/// The wall Gram matrix is regularized by `εI`, `ε = 1e−12·trace/T`, and
/// Cholesky-whitened; the dominant eigenvector comes from power iteration.
pub fn design_mssnr(
    ch: &ChannelModel,
    teq_len: usize,
    window_len: usize,
    delay: usize,
) -> Result<TeqDesign> {
    if teq_len == 0 || window_len == 0 {
        return Err(Error::InvalidParameter(
            "TEQ and window lengths must be positive".into(),
        ));
    }
    let oir_len = ch.taps().len() + teq_len - 1;
    // The window may overhang the end of the response, but must start on it.
    if delay >= oir_len {
        return Err(Error::InvalidDelay { delay, oir_len });
    }
    let h = ch.taps();
    let in_window = |i: usize| i >= delay && i < delay + window_len;
    let win = gram(h, teq_len, in_window);
    let mut wall = gram(h, teq_len, |i| !in_window(i));

    let trace = |m: &DMatrix<Complex64>| m.diagonal().iter().map(|z| z.re).sum::<f64>();
    let wall_trace = trace(&wall);
    let reference = if wall_trace > 0.0 {
        wall_trace
    } else {
        trace(&win)
    };
    let eps = 1e-12 * reference / teq_len as f64;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::SingularWall);
    }
    for i in 0..teq_len {
        wall[(i, i)] += Complex64::from(eps);
    }
    let chol = Cholesky::new(wall).ok_or(Error::SingularWall)?;
    let l = chol.l();
    let l_inv = l.clone().try_inverse().ok_or(Error::SingularWall)?;
    let whitened = &l_inv * &win * l_inv.adjoint();

    let (lambda, u) = dominant_eigenpair(&whitened);
    let mut w = l_inv.adjoint() * u;
    let norm = w.norm();
    w /= Complex64::from(norm);
    let mut taps: Vec<Complex64> = w.iter().copied().collect();
    if ch.is_real() {
        // Fix the arbitrary phase, then drop round-off imaginary parts.
        if let Some(pivot) = taps
            .iter()
            .copied()
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
        {
            let phase = pivot.conj() / pivot.norm();
            taps.iter_mut()
                .for_each(|t| *t = Complex64::new((*t * phase).re, 0.0));
        }
    }
    Ok(TeqDesign {
        taps,
        delay,
        window_len,
        shortening_snr_db: linear_to_db(lambda),
    })
}

/// Power iteration on a Hermitian PSD matrix. Starts from its largest
/// column; stops when the Rayleigh quotient moves by less than
/// `POWER_TOL` relative.
fn dominant_eigenpair(c: &DMatrix<Complex64>) -> (f64, DVector<Complex64>) {
    let n = c.nrows();
    let start = (0..n)
        .max_by(|&a, &b| c.column(a).norm().total_cmp(&c.column(b).norm()))
        .unwrap_or(0);
    let mut u: DVector<Complex64> = c.column(start).into_owned();
    if u.norm() == 0.0 {
        u = DVector::from_element(n, Complex64::new(1.0, 0.0));
    }
    let norm = u.norm();
    u /= Complex64::from(norm);
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITER {
        let v = c * &u;
        let next = u.dotc(&v).re;
        let vn = v.norm();
        if vn == 0.0 {
            return (0.0, u);
        }
        u = v / Complex64::from(vn);
        let done = (next - lambda).abs() <= POWER_TOL * next.abs();
        lambda = next;
        if done {
            break;
        }
    }
    (lambda, u)
}

/// What the rate is computed from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisMode {
    /// TEQ designed on the first `max_len` taps and the overall response
    /// truncated to `max_len` taps before analysis, so only two or three
    /// blocks interfere.
    Conventional { max_len: usize },
    /// Full channel everywhere.
    Actual,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SweepAxis {
    /// TEQ lengths at the base configuration's redundancy.
    TeqLength(Vec<usize>),
    /// Redundancies; at each the TEQ length is optimized over `teq_lens`.
    Redundancy {
        values: Vec<usize>,
        teq_lens: Vec<usize>,
    },
}

/// One TEQ evaluated at one (redundancy, TEQ length, delay).
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub design: TeqDesign,
    /// Overall response `h ∗ w` actually seen by the receiver.
    pub oir: ChannelModel,
    /// Response handed to the analysis (truncated in conventional mode).
    pub analyzed: ChannelModel,
    pub discarded_fraction: f64,
    pub rate: f64,
}

/// Designs the TEQ for one grid point and scores it.
pub fn evaluate_point(
    ch: &ChannelModel,
    cfg: &OfdmConfig,
    stats: &SignalStats,
    rate_params: &RateParams,
    teq_len: usize,
    mode: AnalysisMode,
) -> Result<Evaluation> {
    let window_len = cfg.redundancy() + 1;
    let design_ch = match mode {
        AnalysisMode::Conventional { max_len } => truncate_cir(ch, max_len)?.0,
        AnalysisMode::Actual => ch.clone(),
    };
    let design = design_mssnr(&design_ch, teq_len, window_len, cfg.sync_delay())?;
    let oir = ChannelModel::new(
        convolve_taps(ch.taps(), &design.taps),
        ch.sampling_rate_hz(),
    )?;
    let (analyzed, discarded_fraction) = match mode {
        AnalysisMode::Conventional { max_len } => truncate_cir(&oir, max_len)?,
        AnalysisMode::Actual => (oir.clone(), 0.0),
    };
    let report = analyze(cfg, &analyzed, stats)?;
    let rate = achievable_rate(&report, cfg, rate_params)?;
    Ok(Evaluation {
        design,
        oir,
        analyzed,
        discarded_fraction,
        rate,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    /// Swept value (TEQ length or redundancy).
    pub value: usize,
    pub mode: AnalysisMode,
    pub redundancy: usize,
    pub teq_len: usize,
    pub delay: usize,
    pub rate: f64,
    pub shortening_snr_db: f64,
    pub discarded_fraction: f64,
    pub taps: Vec<Complex64>,
}

/// Rate versus TEQ length or redundancy, best TEQ delay (and length, for a
/// redundancy sweep) kept at every grid point. Ties keep the first
/// candidate in grid order.
pub fn sweep_rate(
    ch: &ChannelModel,
    cfg_base: &OfdmConfig,
    stats: &SignalStats,
    rate_params: &RateParams,
    axis: &SweepAxis,
    delays: &[usize],
    mode: AnalysisMode,
) -> Result<Vec<SweepRow>> {
    let points: Vec<(usize, usize, Vec<usize>)> = match axis {
        SweepAxis::TeqLength(lens) => lens
            .iter()
            .map(|&t| (t, cfg_base.redundancy(), vec![t]))
            .collect(),
        SweepAxis::Redundancy { values, teq_lens } => values
            .iter()
            .map(|&mu| (mu, mu, teq_lens.clone()))
            .collect(),
    };
    let design_order = match mode {
        AnalysisMode::Conventional { max_len } => ch.order().min(max_len - 1),
        AnalysisMode::Actual => ch.order(),
    };

    // Flatten every (point, length, delay) candidate so rayon sees one list;
    // collect() keeps grid order.
    let mut jobs = Vec::new();
    for (p, (_, mu, lens)) in points.iter().enumerate() {
        let cfg = cfg_base.with_redundancy(*mu)?;
        for &t in lens {
            for &d in delays {
                let fits = d < design_order + t && d < cfg.block_len();
                if fits {
                    jobs.push((p, cfg.with_sync_delay(d)?, t));
                }
            }
        }
    }
    let evaluated: Vec<(usize, OfdmConfig, usize, Evaluation)> = jobs
        .into_par_iter()
        .map(|(p, cfg, t)| {
            evaluate_point(ch, &cfg, stats, rate_params, t, mode).map(|e| (p, cfg, t, e))
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(points.len());
    for (p, (value, mu, _)) in points.iter().enumerate() {
        let best = evaluated
            .iter()
            .filter(|(q, ..)| *q == p)
            .fold(
                None::<&(usize, OfdmConfig, usize, Evaluation)>,
                |best, cand| match best {
                    Some(b) if b.3.rate >= cand.3.rate => Some(b),
                    _ => Some(cand),
                },
            )
            .ok_or_else(|| {
                Error::InvalidParameter(format!(
                    "no TEQ delay in the grid fits grid point {value} (redundancy {mu})"
                ))
            })?;
        let (_, cfg, t, e) = best;
        rows.push(SweepRow {
            value: *value,
            mode,
            redundancy: *mu,
            teq_len: *t,
            delay: cfg.sync_delay(),
            rate: e.rate,
            shortening_snr_db: e.design.shortening_snr_db,
            discarded_fraction: e.discarded_fraction,
            taps: e.design.taps.clone(),
        });
    }
    Ok(rows)
}
