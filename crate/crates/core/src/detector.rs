//! Two-stage correlation detector and Neyman-Pearson decision rule.
//!
//! The received window `r` is first cross-correlated with the ZC sequence,
//! then the `Q` correlation peaks spaced `N` apart are combined with the
//! code signs. At a single offset the two stages collapse into one inner
//! product with the conjugated interrupt signal, which is what the Monte
//! Carlo path uses.

use num_complex::Complex;
use rand::Rng;
use rustfft::FftPlanner;

use crate::channel::{ChannelParams, Receiver};
use crate::error::{invalid, Result};
use crate::marcum::marcum_p1;
use crate::rng::{run_batches, SimRng};
use crate::scalar::Scalar;
use crate::signal::{
    build_interrupt_signal, interrupt_code, order_for_length, zc_sequence, ComplexSequence, InterruptKind, MSequence,
    ZcParams, INTERRUPT_SAMPLE_RATE_HZ,
};
use crate::stats::RateEstimate;

/// Detector geometry and target false-alarm rate.
#[derive(Debug, Clone)]
pub struct DetectorConfig<T: Scalar> {
    pub n_points: usize,
    pub q_points: usize,
    pub code: MSequence,
    pub zc: ComplexSequence<T>,
    pub alpha: f64,
}

impl<T: Scalar> DetectorConfig<T> {
    pub fn new(code: MSequence, zc: ComplexSequence<T>, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha must be in (0, 1], got {alpha}")));
        }
        if zc.is_empty() || code.is_empty() {
            return Err(invalid("detector needs a nonempty code and ZC sequence"));
        }
        Ok(Self { n_points: zc.len(), q_points: code.len(), code, zc, alpha })
    }

    /// PIS or SIS detector from the preset codes.
    pub fn preset(kind: InterruptKind, n_points: usize, q_points: usize, root: usize, alpha: f64) -> Result<Self> {
        let code = interrupt_code(kind, order_for_length(q_points)?)?;
        let zc = zc_sequence::<T>(ZcParams::new(n_points, root)?)?;
        Self::new(code, zc, alpha)
    }

    /// Samples in one interrupt signal, `N Q`.
    pub fn signal_len(&self) -> usize {
        self.n_points * self.q_points
    }

    pub fn interrupt_signal(&self) -> ComplexSequence<T> {
        build_interrupt_signal(&self.code, &self.zc)
    }

    /// Matched template `t[l] = code[l / N] conj(zc[l % N])`; the decision
    /// statistic at offset 0 is `|sum_l t[l] r[l]|`.
    pub fn template(&self) -> Vec<Complex<T>> {
        let mut t = Vec::with_capacity(self.signal_len());
        for &c in &self.code.values {
            if c >= 0 {
                t.extend(self.zc.samples.iter().map(|z| z.conj()));
            } else {
                t.extend(self.zc.samples.iter().map(|z| -z.conj()));
            }
        }
        t
    }
}

/// Which interference-variance expression feeds the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceModel {
    /// Block-wise conservative bound, `Q` times the single-block value.
    #[default]
    Approximate,
    /// Full sum with per-symbol code indexing at OFDM phase 0.
    Exact,
    /// Full sum averaged over a uniform OFDM phase, the variance seen by
    /// windows with no symbol alignment.
    PhaseAveraged,
}

/// How the accumulator variance maps onto the per-dimension scale of the
/// Rayleigh and Rice laws of `|u|`.
///
/// The accumulator is circular with `E|u_c|^2 = sigma_u^2`, so each real
/// dimension carries `sigma_u^2 / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RiceScale {
    /// Scale `sigma_u^2 / 2`. The threshold meets the false-alarm target
    /// and the miss formula predicts the simulated miss rate.
    #[default]
    Calibrated,
    /// Scale `sigma_u^2`, the closed forms taken at face value. The
    /// realised false-alarm rate is `alpha^2` and the miss formula is
    /// pessimistic by 3 dB against a calibrated detector.
    Stated,
}

impl RiceScale {
    /// Per-dimension variance for accumulator power `sigma_u2`.
    pub fn per_dimension(self, sigma_u2: f64) -> f64 {
        match self {
            Self::Calibrated => 0.5 * sigma_u2,
            Self::Stated => sigma_u2,
        }
    }
}

/// Variances and threshold of the decision statistic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorStats {
    pub sigma_x2: f64,
    /// `E|u_c|^2` under signal absence.
    pub sigma_u2: f64,
    /// Per-dimension variance used by the threshold and the miss formula.
    pub scale2: f64,
    pub threshold: f64,
}

impl DetectorStats {
    pub fn compute<T: Scalar>(
        cfg: &DetectorConfig<T>,
        channel: &ChannelParams,
        model: VarianceModel,
        scale: RiceScale,
    ) -> Result<Self> {
        channel.validate()?;
        let sigma_x2 = match model {
            VarianceModel::Approximate => sigma_x2_approx(cfg, channel.ifft_size, channel.oversample_f)?,
            VarianceModel::Exact => sigma_x2_exact(cfg, channel.ifft_size, channel.oversample_f)?,
            VarianceModel::PhaseAveraged => sigma_x2_phase_averaged(cfg, channel.ifft_size, channel.oversample_f)?,
        };
        let sigma_u2 = channel.rho_x * sigma_x2 + cfg.signal_len() as f64 * channel.sigma_w2;
        let scale2 = scale.per_dimension(sigma_u2);
        let threshold = np_threshold(cfg.alpha, scale2)?;
        Ok(Self { sigma_x2, sigma_u2, scale2, threshold })
    }

    /// Analytic miss probability for this channel.
    pub fn analytic_mdr<T: Scalar>(&self, cfg: &DetectorConfig<T>, channel: &ChannelParams) -> Result<f64> {
        analytic_mdr(channel.rho_i, cfg.n_points, cfg.q_points, self.scale2, self.threshold)
    }
}

/// `y[i] = sum_n conj(zc[n]) r[i + n]` for `i = 0..=len(r) - N`, via one
/// zero-padded FFT.
pub fn correlate_zc<T: Scalar>(r: &ComplexSequence<T>, zc: &ComplexSequence<T>) -> Result<ComplexSequence<T>> {
    let n = zc.len();
    if n == 0 || r.len() < n {
        return Err(invalid(format!("received window ({}) shorter than ZC sequence ({n})", r.len())));
    }
    let out_len = r.len() - n + 1;
    let size = r.len().next_power_of_two();
    let zero = Complex::new(T::zero(), T::zero());
    let mut planner = FftPlanner::<T>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);

    let mut rf = vec![zero; size];
    rf[..r.len()].copy_from_slice(&r.samples);
    let mut zf = vec![zero; size];
    zf[..n].copy_from_slice(&zc.samples);
    fwd.process(&mut rf);
    fwd.process(&mut zf);
    // Circular cross-correlation; indices below len(r) - N + 1 never wrap.
    for (a, b) in rf.iter_mut().zip(&zf) {
        *a = *a * b.conj();
    }
    inv.process(&mut rf);
    let scale = T::one() / T::from_count(size);
    let y = rf[..out_len].iter().map(|v| *v * scale).collect();
    Ok(ComplexSequence::new(y, r.sample_rate_hz))
}

/// `ybar[i] = |sum_q code[q] y[i + N q]|` for every `i` with all `Q` taps
/// inside `y`.
pub fn accumulate_code<T: Scalar>(y: &ComplexSequence<T>, code: &MSequence, n_points: usize) -> Vec<T> {
    let span = n_points * code.len().saturating_sub(1);
    if y.len() <= span {
        return Vec::new();
    }
    (0..y.len() - span)
        .map(|i| {
            let mut acc = Complex::new(T::zero(), T::zero());
            for (q, &c) in code.values.iter().enumerate() {
                let v = y.samples[i + n_points * q];
                acc = if c >= 0 { acc + v } else { acc - v };
            }
            acc.norm()
        })
        .collect()
}

/// Complex accumulator `sum_l t[l] r[offset + l]` for a precomputed template.
pub fn accumulator_at<T: Scalar>(r: &[Complex<T>], offset: usize, template: &[Complex<T>]) -> Complex<f64> {
    let mut re = 0.0;
    let mut im = 0.0;
    for (t, x) in template.iter().zip(&r[offset..offset + template.len()]) {
        let p = *t * *x;
        re += p.re.as_f64();
        im += p.im.as_f64();
    }
    Complex::new(re, im)
}

/// Decision statistic `u` at `offset`.
pub fn decision_statistic<T: Scalar>(r: &ComplexSequence<T>, offset: usize, cfg: &DetectorConfig<T>) -> Result<f64> {
    if offset + cfg.signal_len() > r.len() {
        return Err(invalid(format!(
            "offset {offset} leaves fewer than {} samples in a {}-sample window",
            cfg.signal_len(),
            r.len()
        )));
    }
    Ok(accumulator_at(&r.samples, offset, &cfg.template()).norm())
}

fn symbol_len(ifft_size: usize, oversample_f: f64) -> Result<usize> {
    let p = ChannelParams { ifft_size, oversample_f, ..ChannelParams::default() };
    let l = p.samples_per_symbol()?;
    if ifft_size == 0 || ifft_size > l {
        return Err(invalid(format!("ifft_size {ifft_size} must be in 1..={l}")));
    }
    Ok(l)
}

/// Exact `E|x_c|^2` for unit-power interference whose first OFDM symbol
/// boundary is at sample 0.
pub fn sigma_x2_exact<T: Scalar>(cfg: &DetectorConfig<T>, ifft_size: usize, oversample_f: f64) -> Result<f64> {
    sigma_x2_exact_at(cfg, ifft_size, oversample_f, 0)
}

/// Exact `E|x_c|^2` with the window starting `phase` samples into a symbol.
///
/// Symbols are independent and subcarriers within a symbol are independent
/// with `E|s|^2 = M`, so
/// `E|x_c|^2 = (1/M) sum_sym sum_{k<M} |sum_{l in sym} t[l] e^{j 2 pi k (l + phase) / L}|^2`
/// where `L = F M` and `t` is the matched template. The inner sums are one
/// length-`L` inverse DFT per symbol.
pub fn sigma_x2_exact_at<T: Scalar>(
    cfg: &DetectorConfig<T>,
    ifft_size: usize,
    oversample_f: f64,
    phase: usize,
) -> Result<f64> {
    let l = symbol_len(ifft_size, oversample_f)?;
    let phase = phase % l;
    let template: Vec<Complex<f64>> =
        cfg.template().iter().map(|t| Complex::new(t.re.as_f64(), t.im.as_f64())).collect();
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(l);
    let mut buf = vec![Complex::new(0.0, 0.0); l];
    let mut total = 0.0;
    let mut start = 0usize;
    while start < template.len() {
        let slot0 = if start == 0 { phase } else { 0 };
        let take = (l - slot0).min(template.len() - start);
        buf.fill(Complex::new(0.0, 0.0));
        buf[slot0..slot0 + take].copy_from_slice(&template[start..start + take]);
        ifft.process(&mut buf);
        total += buf[..ifft_size].iter().map(|v| v.norm_sqr()).sum::<f64>();
        start += take;
    }
    Ok(total / ifft_size as f64)
}

/// Exact `E|x_c|^2` averaged over all `L` window phases.
pub fn sigma_x2_phase_averaged<T: Scalar>(cfg: &DetectorConfig<T>, ifft_size: usize, oversample_f: f64) -> Result<f64> {
    let l = symbol_len(ifft_size, oversample_f)?;
    let mut total = 0.0;
    for phase in 0..l {
        total += sigma_x2_exact_at(cfg, ifft_size, oversample_f, phase)?;
    }
    Ok(total / l as f64)
}

/// Conservative `E|x_c|^2`: `Q` times the single-block variance, treating
/// the whole ZC block as lying inside one OFDM symbol.
///
/// Equals `(Q/M) sum_{k<M} |sum_n conj(z[n]) e^{j 2 pi k n / L}|^2`, the
/// factored form of the double sum over `n, n'`, so it is real by
/// construction.
pub fn sigma_x2_approx<T: Scalar>(cfg: &DetectorConfig<T>, ifft_size: usize, oversample_f: f64) -> Result<f64> {
    let l = symbol_len(ifft_size, oversample_f)?;
    let step = std::f64::consts::TAU / l as f64;
    let mut total = 0.0;
    for k in 0..ifft_size {
        let mut acc = Complex::new(0.0, 0.0);
        for (n, z) in cfg.zc.samples.iter().enumerate() {
            // Reduce k n mod L before the float multiply.
            let ph = step * ((k * n) % l) as f64;
            acc += Complex::new(z.re.as_f64(), -z.im.as_f64()) * Complex::from_polar(1.0, ph);
        }
        total += acc.norm_sqr();
    }
    Ok(cfg.q_points as f64 * total / ifft_size as f64)
}

/// `u* = sqrt(-2 s2 ln alpha)`, the level a Rayleigh law with
/// per-dimension variance `s2` exceeds with probability `alpha`.
pub fn np_threshold(alpha: f64, s2: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid(format!("alpha must be in (0, 1], got {alpha}")));
    }
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(invalid(format!("variance must be positive, got {s2}")));
    }
    Ok((-2.0 * s2 * alpha.ln()).sqrt())
}

/// `P_M = 1 - Q1(sqrt(rho_I) N Q / s, u* / s)` for a Rice law with
/// per-dimension variance `s2 = s^2`.
pub fn analytic_mdr(rho_i: f64, n_points: usize, q_points: usize, s2: f64, threshold: f64) -> Result<f64> {
    if !(s2 > 0.0) || rho_i < 0.0 || threshold < 0.0 {
        return Err(invalid("analytic_mdr needs s2 > 0, rho_i >= 0, threshold >= 0"));
    }
    let s = s2.sqrt();
    let a = rho_i.sqrt() * (n_points * q_points) as f64 / s;
    marcum_p1(a, threshold / s)
}

/// Probability that all `d_heard` independent detections miss.
pub fn multi_signal_miss(p_m: f64, d_heard: u32) -> f64 {
    p_m.powi(d_heard as i32)
}

/// Expected false alarms per hour when a fresh window is tested every `Q N`
/// samples.
pub fn false_alarms_per_hour(alpha: f64, n_points: usize, q_points: usize, sample_rate_hz: f64) -> f64 {
    alpha * 3600.0 * sample_rate_hz / (q_points * n_points) as f64
}

/// Where the detector looks for the interrupt signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Search {
    /// Evaluate the statistic at the embedding offset only.
    #[default]
    KnownOffset,
    /// Place the signal at a uniform offset in `0..span` and take the
    /// maximum statistic over all `span` offsets. The single-window
    /// threshold then under-protects against false alarms.
    SlidingMax { span: usize },
}

/// Monte Carlo knobs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionOptions {
    pub variance: VarianceModel,
    pub scale: RiceScale,
    /// Draw the OFDM phase uniformly for signal-present trials too.
    pub random_alignment: bool,
    pub search: Search,
    pub batch_size: u64,
}

impl Default for DetectionOptions {
    fn default() -> Self {
        Self {
            variance: VarianceModel::Approximate,
            scale: RiceScale::Calibrated,
            random_alignment: false,
            search: Search::KnownOffset,
            batch_size: 256,
        }
    }
}

/// Signal present or absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hypothesis {
    Absent,
    Present,
}

/// Empirical miss and false-alarm rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionReport {
    pub mdr_hat: RateEstimate,
    pub far_hat: RateEstimate,
    pub trials: u64,
    pub stats: DetectorStats,
    pub mdr_analytic: f64,
}

/// Per-trial complex accumulators at the decision offset.
///
/// Signal-absent trials draw the OFDM phase uniformly; signal-present
/// trials use phase 0 unless `random_alignment` is set. Trials are batched
/// on independent generator streams, so the output depends only on the
/// seed.
pub fn simulate_accumulators<T: Scalar>(
    cfg: &DetectorConfig<T>,
    channel: &ChannelParams,
    hypothesis: Hypothesis,
    trials: u64,
    rng: &SimRng,
    opts: &DetectionOptions,
) -> Result<Vec<Complex<f64>>> {
    channel.validate()?;
    let span = match opts.search {
        Search::KnownOffset => 1,
        Search::SlidingMax { span } if span >= 1 => span,
        Search::SlidingMax { .. } => return Err(invalid("sliding search span must be at least 1")),
    };
    let template = cfg.template();
    let pis = cfg.interrupt_signal();
    let window = cfg.signal_len() + span - 1;
    let batches = run_batches(rng, trials, opts.batch_size, |g, _first, count| -> Result<Vec<Complex<f64>>> {
        let mut rx = Receiver::<T>::new(channel)?;
        let l = rx.symbol_len();
        let mut buf = vec![Complex::new(T::zero(), T::zero()); window];
        let mut out = Vec::with_capacity(count as usize);
        for _ in 0..count {
            let random_phase = hypothesis == Hypothesis::Absent || opts.random_alignment;
            let phase = if random_phase { g.random_range(0..l) } else { 0 };
            let offset = if span > 1 { g.random_range(0..span) } else { 0 };
            let signal = (hypothesis == Hypothesis::Present).then_some(pis.samples.as_slice());
            rx.receive_into(&mut buf, signal, offset, phase, g)?;
            let acc = if span == 1 {
                accumulator_at(&buf, 0, &template)
            } else {
                (0..span)
                    .map(|o| accumulator_at(&buf, o, &template))
                    .max_by(|a, b| a.norm_sqr().total_cmp(&b.norm_sqr()))
                    .expect("span >= 1")
            };
            out.push(acc);
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(trials as usize);
    for b in batches {
        all.extend(b?);
    }
    Ok(all)
}

/// Decision statistics `u = |accumulator|`.
pub fn simulate_statistics<T: Scalar>(
    cfg: &DetectorConfig<T>,
    channel: &ChannelParams,
    hypothesis: Hypothesis,
    trials: u64,
    rng: &SimRng,
    opts: &DetectionOptions,
) -> Result<Vec<f64>> {
    Ok(simulate_accumulators(cfg, channel, hypothesis, trials, rng, opts)?.iter().map(|a| a.norm()).collect())
}

/// Misses among present statistics and false alarms among absent ones.
pub fn rates_at_threshold(present: &[f64], absent: &[f64], threshold: f64) -> (RateEstimate, RateEstimate) {
    let misses = present.iter().filter(|&&u| u <= threshold).count() as u64;
    let alarms = absent.iter().filter(|&&u| u > threshold).count() as u64;
    (RateEstimate::wilson(misses, present.len() as u64), RateEstimate::wilson(alarms, absent.len() as u64))
}

/// `trials` signal-present and `trials` signal-absent windows, decided
/// against the Neyman-Pearson threshold.
pub fn simulate_detection<T: Scalar>(
    cfg: &DetectorConfig<T>,
    channel: &ChannelParams,
    trials: u64,
    rng: &SimRng,
    opts: &DetectionOptions,
) -> Result<DetectionReport> {
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let stats = DetectorStats::compute(cfg, channel, opts.variance, opts.scale)?;
    let present = simulate_statistics(cfg, channel, Hypothesis::Present, trials, &rng.fork(1), opts)?;
    let absent = simulate_statistics(cfg, channel, Hypothesis::Absent, trials, &rng.fork(0), opts)?;
    let (mdr_hat, far_hat) = rates_at_threshold(&present, &absent, stats.threshold);
    Ok(DetectionReport { mdr_hat, far_hat, trials, stats, mdr_analytic: stats.analytic_mdr(cfg, channel)? })
}

/// Interrupt-signal airtime at the interrupt sample rate.
pub fn signal_duration_s(n_points: usize, q_points: usize) -> f64 {
    (n_points * q_points) as f64 / INTERRUPT_SAMPLE_RATE_HZ
}
