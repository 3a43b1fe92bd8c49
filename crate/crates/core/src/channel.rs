//! Received-waveform synthesis: scaled interrupt signal plus OFDM-style
//! Wi-Fi interference plus circularly-symmetric complex Gaussian noise.

use std::sync::Arc;

use num_complex::Complex;
use rand::Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Result};
use crate::scalar::Scalar;
use crate::signal::{ComplexSequence, INTERRUPT_SAMPLE_RATE_HZ};

/// Receiver noise power over 150 MHz at a -90 dBm/Hz noise floor, in watts.
pub const DEFAULT_NOISE_POWER_W: f64 = 1.5e-4;

/// Default received interrupt-signal power (equal to the noise power).
pub const DEFAULT_INTERRUPT_POWER_W: f64 = 1.5e-4;

/// 150 MHz / 20 MHz.
pub const DEFAULT_OVERSAMPLE: f64 = 7.5;

pub const DEFAULT_IFFT_SIZE: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constellation {
    Qpsk,
    Qam16,
}

impl Constellation {
    /// Draw a unit-average-energy symbol.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(self, rng: &mut R) -> Complex<T> {
        match self {
            Constellation::Qpsk => {
                let bits: u8 = rng.random();
                let a = T::FRAC_1_SQRT_2();
                let re = if bits & 1 == 0 { a } else { -a };
                let im = if bits & 2 == 0 { a } else { -a };
                Complex::new(re, im)
            }
            Constellation::Qam16 => {
                let bits: u8 = rng.random();
                let level = |b: u8| -> T {
                    let v = match b & 3 {
                        0 => -3.0,
                        1 => -1.0,
                        2 => 1.0,
                        _ => 3.0,
                    };
                    T::lit(v / 10f64.sqrt())
                };
                Complex::new(level(bits), level(bits >> 2))
            }
        }
    }
}

/// Powers and Wi-Fi parameters of the received waveform.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelParams {
    /// Average received interrupt-signal power, W.
    pub rho_i: f64,
    /// Average received Wi-Fi interference power, W.
    pub rho_x: f64,
    /// Noise power per sample, W.
    pub sigma_w2: f64,
    /// Oversampling factor of the 150 MHz grid relative to the Wi-Fi rate.
    pub oversample_f: f64,
    /// Wi-Fi IFFT size.
    pub ifft_size: usize,
    pub constellation: Constellation,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            rho_i: DEFAULT_INTERRUPT_POWER_W,
            rho_x: 0.0,
            sigma_w2: DEFAULT_NOISE_POWER_W,
            oversample_f: DEFAULT_OVERSAMPLE,
            ifft_size: DEFAULT_IFFT_SIZE,
            constellation: Constellation::Qpsk,
        }
    }
}

impl ChannelParams {
    /// Default powers with the interference level chosen to hit `sinr_db`.
    pub fn at_sinr_db(sinr_db: f64) -> Result<Self> {
        let base = Self::default();
        let rho_x = rho_x_for_sinr_db(sinr_db, base.rho_i, base.sigma_w2)?;
        Ok(Self { rho_x, ..base })
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("rho_i", self.rho_i), ("rho_x", self.rho_x), ("sigma_w2", self.sigma_w2)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be a finite nonnegative power, got {v}")));
            }
        }
        if self.ifft_size == 0 {
            return Err(invalid("ifft_size must be positive"));
        }
        self.samples_per_symbol().map(|_| ())
    }

    /// `F * M`, which must be a positive integer.
    pub fn samples_per_symbol(&self) -> Result<usize> {
        let fm = self.oversample_f * self.ifft_size as f64;
        let rounded = fm.round();
        if !(rounded >= 1.0) || (fm - rounded).abs() > 1e-9 {
            return Err(invalid(format!("oversample_f * ifft_size = {fm} is not a positive integer")));
        }
        Ok(rounded as usize)
    }
}

/// `10 log10(rho_i / (rho_x + sigma_w2))`.
pub fn sinr_db(params: &ChannelParams) -> f64 {
    10.0 * (params.rho_i / (params.rho_x + params.sigma_w2)).log10()
}

/// Interference power giving the requested SINR.
pub fn rho_x_for_sinr_db(sinr_db: f64, rho_i: f64, sigma_w2: f64) -> Result<f64> {
    let rho_x = rho_i * 10f64.powf(-sinr_db / 10.0) - sigma_w2;
    if rho_x < 0.0 {
        return Err(invalid(format!(
            "SINR {sinr_db} dB is above the noise-limited SNR {} dB",
            10.0 * (rho_i / sigma_w2).log10()
        )));
    }
    Ok(rho_x)
}

/// Reusable OFDM interference generator holding the IFFT plan.
///
/// Each OFDM symbol spans `F*M` samples with
/// `x[l] = (1/M) sum_k s[k] exp(j 2 pi k l / (F M))`, where the `s[k]` are
/// i.i.d. constellation points with `E|s|^2 = M`, so the average sample
/// power is 1. No cyclic prefix.
pub struct WifiInterferer<T: Scalar> {
    ifft: Arc<dyn Fft<T>>,
    symbol_len: usize,
    ifft_size: usize,
    constellation: Constellation,
    buf: Vec<Complex<T>>,
}

impl<T: Scalar> WifiInterferer<T> {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        let l = params.samples_per_symbol()?;
        let m = params.ifft_size;
        if m == 0 || m > l {
            return Err(invalid(format!("ifft_size {m} must be in 1..={l}")));
        }
        Ok(Self {
            ifft: FftPlanner::<T>::new().plan_fft_inverse(l),
            symbol_len: l,
            ifft_size: m,
            constellation: params.constellation,
            buf: vec![Complex::new(T::zero(), T::zero()); l],
        })
    }

    pub fn symbol_len(&self) -> usize {
        self.symbol_len
    }

    /// Fill `out` with unit-power interference whose first sample sits at
    /// `phase` samples into an OFDM symbol.
    pub fn fill<R: Rng + ?Sized>(&mut self, out: &mut [Complex<T>], phase: usize, rng: &mut R) {
        let l = self.symbol_len;
        let m = self.ifft_size;
        let amp = T::from_count(m).sqrt() / T::from_count(m);
        let mut skip = phase % l;
        let mut pos = 0;
        while pos < out.len() {
            for (k, slot) in self.buf.iter_mut().enumerate() {
                *slot = if k < m {
                    self.constellation.sample::<T, R>(rng) * amp
                } else {
                    Complex::new(T::zero(), T::zero())
                };
            }
            self.ifft.process(&mut self.buf);
            let take = (l - skip).min(out.len() - pos);
            out[pos..pos + take].copy_from_slice(&self.buf[skip..skip + take]);
            pos += take;
            skip = 0;
        }
    }
}

/// Unit-power OFDM interference on the 150 MHz grid (see [`WifiInterferer`]),
/// not yet scaled by `sqrt(rho_x)`. `phase` shifts the window start into the
/// first symbol; 0 aligns symbol boundaries with sample 0.
pub fn gen_wifi_interference_at<T: Scalar, R: Rng + ?Sized>(
    n_samples: usize,
    params: &ChannelParams,
    phase: usize,
    rng: &mut R,
) -> Result<ComplexSequence<T>> {
    let mut gen = WifiInterferer::<T>::new(params)?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); n_samples];
    gen.fill(&mut out, phase, rng);
    Ok(ComplexSequence::new(out, INTERRUPT_SAMPLE_RATE_HZ))
}

/// [`gen_wifi_interference_at`] with symbol boundaries aligned to sample 0.
pub fn gen_wifi_interference<T: Scalar, R: Rng + ?Sized>(
    n_samples: usize,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ComplexSequence<T>> {
    gen_wifi_interference_at(n_samples, params, 0, rng)
}

/// i.i.d. CN(0, sigma_w2) samples.
pub fn gen_awgn<T: Scalar, R: Rng + ?Sized>(
    n_samples: usize,
    sigma_w2: f64,
    rng: &mut R,
) -> Result<ComplexSequence<T>> {
    if !(sigma_w2 >= 0.0 && sigma_w2.is_finite()) {
        return Err(invalid(format!("noise variance must be nonnegative, got {sigma_w2}")));
    }
    if sigma_w2 == 0.0 {
        return Ok(ComplexSequence::zeros(n_samples, INTERRUPT_SAMPLE_RATE_HZ));
    }
    let s = T::lit((sigma_w2 / 2.0).sqrt());
    let samples =
        (0..n_samples).map(|_| Complex::new(T::standard_normal(rng) * s, T::standard_normal(rng) * s)).collect();
    Ok(ComplexSequence::new(samples, INTERRUPT_SAMPLE_RATE_HZ))
}

/// `sqrt(rho_i) * pis` placed at `offset` (zero elsewhere) plus
/// `sqrt(rho_x) * interference` plus noise.
pub fn compose_received<T: Scalar, R: Rng + ?Sized>(
    pis: Option<&ComplexSequence<T>>,
    offset: usize,
    n_samples: usize,
    params: &ChannelParams,
    rng: &mut R,
) -> Result<ComplexSequence<T>> {
    compose_received_at(pis, offset, n_samples, params, 0, rng)
}

/// [`compose_received`] with the interference starting at OFDM `phase`.
pub fn compose_received_at<T: Scalar, R: Rng + ?Sized>(
    pis: Option<&ComplexSequence<T>>,
    offset: usize,
    n_samples: usize,
    params: &ChannelParams,
    phase: usize,
    rng: &mut R,
) -> Result<ComplexSequence<T>> {
    let mut rx = Receiver::new(params)?;
    let mut out = vec![Complex::new(T::zero(), T::zero()); n_samples];
    rx.receive_into(&mut out, pis.map(|p| p.samples.as_slice()), offset, phase, rng)?;
    Ok(ComplexSequence::new(out, INTERRUPT_SAMPLE_RATE_HZ))
}

/// Reusable waveform synthesizer for repeated trials.
pub struct Receiver<T: Scalar> {
    params: ChannelParams,
    interferer: WifiInterferer<T>,
    scratch: Vec<Complex<T>>,
}

impl<T: Scalar> Receiver<T> {
    pub fn new(params: &ChannelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { params: *params, interferer: WifiInterferer::new(params)?, scratch: Vec::new() })
    }

    pub fn params(&self) -> &ChannelParams {
        &self.params
    }

    pub fn symbol_len(&self) -> usize {
        self.interferer.symbol_len()
    }

    /// Overwrite `out` with noise, then add interference (at OFDM `phase`)
    /// and the scaled interrupt signal at `offset`. Noise is drawn before
    /// interference, so the draw order is fixed for a given seed.
    pub fn receive_into<R: Rng + ?Sized>(
        &mut self,
        out: &mut [Complex<T>],
        pis: Option<&[Complex<T>]>,
        offset: usize,
        phase: usize,
        rng: &mut R,
    ) -> Result<()> {
        let n_samples = out.len();
        if let Some(p) = pis {
            if offset.checked_add(p.len()).is_none_or(|end| end > n_samples) {
                return Err(invalid(format!(
                    "interrupt signal of {} samples at offset {offset} overflows a {n_samples}-sample window",
                    p.len()
                )));
            }
        }
        let params = self.params;
        if params.sigma_w2 > 0.0 {
            let s = T::lit((params.sigma_w2 / 2.0).sqrt());
            for o in out.iter_mut() {
                *o = Complex::new(T::standard_normal(rng) * s, T::standard_normal(rng) * s);
            }
        } else {
            out.fill(Complex::new(T::zero(), T::zero()));
        }
        if params.rho_x > 0.0 {
            self.scratch.resize(n_samples, Complex::new(T::zero(), T::zero()));
            self.interferer.fill(&mut self.scratch, phase, rng);
            let g = T::lit(params.rho_x.sqrt());
            for (o, xi) in out.iter_mut().zip(&self.scratch) {
                *o = *o + *xi * g;
            }
        }
        if let Some(p) = pis {
            let g = T::lit(params.rho_i.sqrt());
            for (o, pi) in out[offset..offset + p.len()].iter_mut().zip(p) {
                *o = *o + *pi * g;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SimRng;
    use crate::signal::{interrupt_signal, InterruptKind};

    #[test]
    fn sinr_examples() {
        let p = ChannelParams { rho_i: 1e-4, rho_x: 0.0, sigma_w2: 1e-4, ..Default::default() };
        assert!(sinr_db(&p).abs() < 1e-12);
        let p = ChannelParams { rho_i: 2.0, rho_x: 1.0, sigma_w2: 1.0, ..Default::default() };
        assert!(sinr_db(&p).abs() < 1e-12);
        let rho_x = rho_x_for_sinr_db(-28.2, 1.5e-4, 1.5e-4).unwrap();
        assert!((rho_x - (1.5e-4 * 10f64.powf(2.82) - 1.5e-4)).abs() < 1e-15);
        let p = ChannelParams::at_sinr_db(-28.2).unwrap();
        assert!((sinr_db(&p) + 28.2).abs() < 1e-12);
        assert!(rho_x_for_sinr_db(10.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn default_symbol_length_is_480() {
        assert_eq!(ChannelParams::default().samples_per_symbol().unwrap(), 480);
        let bad = ChannelParams { oversample_f: 7.5, ifft_size: 63, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn awgn_zero_variance_is_zero() {
        let mut g = SimRng::new(1).generator();
        let w = gen_awgn::<f64, _>(100, 0.0, &mut g).unwrap();
        assert!(w.samples.iter().all(|s| s.norm() == 0.0));
        assert!(gen_awgn::<f64, _>(10, -1.0, &mut g).is_err());
    }

    #[test]
    fn awgn_variance_and_circularity() {
        let mut g = SimRng::new(2).generator();
        let n = 1_000_000;
        let w = gen_awgn::<f64, _>(n, 1.5e-4, &mut g).unwrap();
        let p = w.mean_power();
        assert!((p / 1.5e-4 - 1.0).abs() < 0.02, "{p}");
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for s in &w.samples {
            sxy += s.re * s.im;
            sxx += s.re * s.re;
            syy += s.im * s.im;
        }
        let corr = sxy / (sxx * syy).sqrt();
        assert!(corr.abs() < 5e-3, "{corr}");
    }

    #[test]
    fn interference_moments() {
        let mut g = SimRng::new(3).generator();
        let n = 1_000_000;
        let x = gen_wifi_interference::<f64, _>(n, &ChannelParams::default(), &mut g).unwrap();
        assert_eq!(x.len(), n);
        let mean: Complex<f64> = x.samples.iter().sum::<Complex<f64>>() / n as f64;
        assert!(mean.norm() < 5e-3, "{mean}");
        let p = x.mean_power();
        assert!((p - 1.0).abs() < 0.02, "{p}");
        // Excess kurtosis of the real part.
        let m2 = x.samples.iter().map(|s| s.re * s.re).sum::<f64>() / n as f64;
        let m4 = x.samples.iter().map(|s| s.re.powi(4)).sum::<f64>() / n as f64;
        let excess = m4 / (m2 * m2) - 3.0;
        assert!(excess.abs() < 0.1, "{excess}");
    }

    #[test]
    fn qam16_interference_has_unit_power() {
        let mut g = SimRng::new(4).generator();
        let p = ChannelParams { constellation: Constellation::Qam16, ..Default::default() };
        let x = gen_wifi_interference::<f64, _>(200_000, &p, &mut g).unwrap();
        assert!((x.mean_power() - 1.0).abs() < 0.03);
    }

    #[test]
    fn interference_occupies_the_wifi_band() {
        let mut g = SimRng::new(5).generator();
        let params = ChannelParams::default();
        let l = params.samples_per_symbol().unwrap();
        let n = 200 * l;
        let x = gen_wifi_interference::<f64, _>(n, &params, &mut g).unwrap();
        let mut spec = x.samples.clone();
        FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut spec);
        // Occupied tones k/(FM), k = 0..M-1; count the band [-1/2, M - 1/2)
        // tone spacings, which is exactly M/(F M) of the digital band.
        let total: f64 = spec.iter().map(|c| c.norm_sqr()).sum();
        let in_band: f64 = spec
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                let f = *i as f64 / n as f64;
                let f = if f >= 0.5 { f - 1.0 } else { f };
                f >= -0.5 / l as f64 && f < (params.ifft_size as f64 - 0.5) / l as f64
            })
            .map(|(_, c)| c.norm_sqr())
            .sum();
        assert!(in_band / total >= 0.99, "{}", in_band / total);
    }

    #[test]
    fn interference_phase_shifts_the_stream() {
        let params = ChannelParams::default();
        let a = gen_wifi_interference_at::<f64, _>(1000, &params, 0, &mut SimRng::new(6).generator()).unwrap();
        let b = gen_wifi_interference_at::<f64, _>(900, &params, 100, &mut SimRng::new(6).generator()).unwrap();
        for i in 0..900 {
            assert!((a.samples[i + 100] - b.samples[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn compose_noiseless_is_scaled_pis() {
        let pis = interrupt_signal::<f64>(InterruptKind::Primary, 64, 7, 1).unwrap();
        let params = ChannelParams { rho_i: 2.5, rho_x: 0.0, sigma_w2: 0.0, ..Default::default() };
        let r = compose_received(Some(&pis), 0, pis.len(), &params, &mut SimRng::new(7).generator()).unwrap();
        for (a, b) in r.samples.iter().zip(&pis.samples) {
            assert_eq!(*a, *b * 2.5f64.sqrt());
        }
        let r = compose_received(Some(&pis), 10, pis.len() + 20, &params, &mut SimRng::new(7).generator()).unwrap();
        assert_eq!(r.samples[0], Complex::new(0.0, 0.0));
        assert_eq!(r.samples[10], pis.samples[0] * 2.5f64.sqrt());
    }

    #[test]
    fn compose_without_pis_is_interference_plus_noise() {
        let params = ChannelParams { rho_x: 1.0, ..Default::default() };
        let r = compose_received::<f64, _>(None, 0, 48_000, &params, &mut SimRng::new(8).generator()).unwrap();
        assert!((r.mean_power() - (1.0 + params.sigma_w2)).abs() < 0.05);
    }

    #[test]
    fn compose_rejects_overflow() {
        let pis = interrupt_signal::<f64>(InterruptKind::Primary, 16, 7, 1).unwrap();
        let params = ChannelParams::default();
        let mut g = SimRng::new(9).generator();
        assert!(compose_received(Some(&pis), 1, pis.len(), &params, &mut g).is_err());
    }

    #[test]
    fn component_powers_add_over_pis_span() {
        let pis = interrupt_signal::<f64>(InterruptKind::Primary, 1024, 127, 1).unwrap();
        let params = ChannelParams { rho_i: 1.5e-4, rho_x: 1.5e-4, sigma_w2: 1.5e-4, ..Default::default() };
        let mut total = 0.0;
        let mut count = 0usize;
        for seed in 0..8 {
            let r =
                compose_received(Some(&pis), 0, pis.len(), &params, &mut SimRng::new(100 + seed).generator()).unwrap();
            total += r.mean_power() * r.len() as f64;
            count += r.len();
        }
        let p = total / count as f64;
        assert!((p / 4.5e-4 - 1.0).abs() < 0.03, "{p}");
    }

    #[test]
    fn generation_is_deterministic() {
        let params = ChannelParams { rho_x: 0.3, ..Default::default() };
        let a = compose_received::<f32, _>(None, 0, 5000, &params, &mut SimRng::new(42).generator()).unwrap();
        let b = compose_received::<f32, _>(None, 0, 5000, &params, &mut SimRng::new(42).generator()).unwrap();
        assert_eq!(a, b);
    }
}
