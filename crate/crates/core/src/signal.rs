//! Interrupt signal construction: Zadoff-Chu sequences, m-sequences, and the
//! Kronecker-structured primary/secondary interrupt signals (PIS/SIS).

use num_complex::Complex;

use crate::error::{invalid, Result};
use crate::scalar::Scalar;

/// Sample rate of the interrupt signals, 150 MHz (the 5.8 GHz ISM band).
pub const INTERRUPT_SAMPLE_RATE_HZ: f64 = 150e6;

/// Complex baseband samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSequence<T> {
    pub samples: Vec<Complex<T>>,
    pub sample_rate_hz: f64,
}

impl<T: Scalar> ComplexSequence<T> {
    pub fn new(samples: Vec<Complex<T>>, sample_rate_hz: f64) -> Self {
        Self { samples, sample_rate_hz }
    }

    pub fn zeros(len: usize, sample_rate_hz: f64) -> Self {
        Self { samples: vec![Complex::new(T::zero(), T::zero()); len], sample_rate_hz }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Mean of |x|^2.
    pub fn mean_power(&self) -> T {
        if self.samples.is_empty() {
            return T::zero();
        }
        let sum = self.samples.iter().fold(T::zero(), |acc, s| acc + s.norm_sqr());
        sum / T::from_count(self.samples.len())
    }
}

/// Zadoff-Chu parameters: length `n_points` and a root coprime to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZcParams {
    pub n_points: usize,
    pub root: usize,
}

impl ZcParams {
    pub fn new(n_points: usize, root: usize) -> Result<Self> {
        let p = Self { n_points, root };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(invalid(format!("ZC length must be >= 2, got {}", self.n_points)));
        }
        if self.root == 0 || gcd(self.root, self.n_points) != 1 {
            return Err(invalid(format!(
                "ZC root {} is not a positive integer coprime to {}",
                self.root, self.n_points
            )));
        }
        Ok(())
    }
}

pub fn gcd(mut a: usize, mut b: usize) -> usize {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Phase index of a ZC sample in units of pi/N, reduced mod 2N.
///
/// Odd N uses `root * n * (n + 1)`, even N uses `root * n^2`.
fn zc_phase_index(n: usize, n_points: usize, root: usize) -> u128 {
    let modulus = 2 * n_points as u128;
    let n = n as u128;
    let quad = if n_points % 2 == 1 { n * (n + 1) } else { n * n };
    (root as u128 % modulus) * (quad % modulus) % modulus
}

/// `exp(-j * pi * k / n)` with `k` already reduced mod 2n.
fn unit_phasor<T: Scalar>(k: u128, n: usize) -> Complex<T> {
    let theta = -std::f64::consts::PI * (k as f64) / (n as f64);
    Complex::new(T::lit(theta.cos()), T::lit(theta.sin()))
}

/// Zadoff-Chu sequence `z[n] = exp(-j pi root n(n+1)/N)` (odd N) or
/// `exp(-j pi root n^2 / N)` (even N), sampled at 150 MHz.
pub fn zc_sequence<T: Scalar>(params: ZcParams) -> Result<ComplexSequence<T>> {
    params.validate()?;
    let ZcParams { n_points, root } = params;
    let samples = (0..n_points).map(|n| unit_phasor(zc_phase_index(n, n_points, root), n_points)).collect();
    Ok(ComplexSequence::new(samples, INTERRUPT_SAMPLE_RATE_HZ))
}

/// One primitive polynomial per LFSR order 3..=10, listed by the exponents
/// of its non-constant terms.
///
/// | order | polynomial                  |
/// |-------|-----------------------------|
/// | 3     | x^3 + x^2 + 1               |
/// | 4     | x^4 + x^3 + 1               |
/// | 5     | x^5 + x^3 + 1               |
/// | 6     | x^6 + x^5 + 1               |
/// | 7     | x^7 + x^6 + 1               |
/// | 8     | x^8 + x^6 + x^5 + x^4 + 1   |
/// | 9     | x^9 + x^5 + 1               |
/// | 10    | x^10 + x^7 + 1              |
pub const PRIMITIVE_POLYNOMIALS: [(u32, &[u32]); 8] = [
    (3, &[3, 2]),
    (4, &[4, 3]),
    (5, &[5, 3]),
    (6, &[6, 5]),
    (7, &[7, 6]),
    (8, &[8, 6, 5, 4]),
    (9, &[9, 5]),
    (10, &[10, 7]),
];

/// Galois tap mask for a polynomial given by its non-constant exponents:
/// bit `e - 1` is set for every exponent `e`.
pub fn tap_mask(exponents: &[u32]) -> u32 {
    exponents.iter().fold(0, |m, &e| m | (1 << (e - 1)))
}

/// Tap mask of the reciprocal polynomial `x^m p(1/x)`.
pub fn reciprocal_tap_mask(order: u32, taps: u32) -> u32 {
    // p(x) = x^m + sum_{bit b set, b < m-1} x^(b+1) + 1
    let mut mask = 1 << (order - 1);
    for b in 0..order - 1 {
        if taps & (1 << b) != 0 {
            let e = b + 1;
            mask |= 1 << (order - e - 1);
        }
    }
    mask
}

/// Built-in primitive tap mask for `order`.
pub fn primitive_taps(order: u32) -> Result<u32> {
    PRIMITIVE_POLYNOMIALS
        .iter()
        .find(|(m, _)| *m == order)
        .map(|(_, e)| tap_mask(e))
        .ok_or_else(|| invalid(format!("no built-in primitive polynomial for order {order} (have 3..=10)")))
}

/// A +/-1 maximum-length sequence of period `2^order - 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MSequence {
    pub values: Vec<i8>,
    pub order: u32,
    pub taps: u32,
}

impl MSequence {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sum of the +/-1 values over one period.
    pub fn balance(&self) -> i64 {
        self.values.iter().map(|&v| v as i64).sum()
    }

    /// Periodic autocorrelation at cyclic shift `shift`.
    pub fn periodic_autocorrelation(&self, shift: usize) -> i64 {
        let q = self.values.len();
        (0..q).map(|i| self.values[i] as i64 * self.values[(i + shift) % q] as i64).sum()
    }
}

/// Galois LFSR bit stream: emits the low bit, shifts right, and toggles the
/// taps when the emitted bit is 1.
pub struct Lfsr {
    state: u32,
    taps: u32,
}

impl Lfsr {
    pub fn new(state: u32, taps: u32) -> Self {
        Self { state, taps }
    }

    pub fn state(&self) -> u32 {
        self.state
    }
}

impl Iterator for Lfsr {
    type Item = u8;

    fn next(&mut self) -> Option<u8> {
        let out = (self.state & 1) as u8;
        self.state >>= 1;
        if out == 1 {
            self.state ^= self.taps;
        }
        Some(out)
    }
}

/// Generate one period of the m-sequence for a tap mask and nonzero seed.
///
/// Bits map 0 -> +1 and 1 -> -1. The taps must describe a primitive
/// polynomial: the register has to return to `seed` after exactly
/// `2^order - 1` steps and not before, otherwise this is an error.
pub fn m_sequence(order: u32, taps: u32, seed: u32) -> Result<MSequence> {
    if !(2..=31).contains(&order) {
        return Err(invalid(format!("LFSR order must be in 2..=31, got {order}")));
    }
    let state_mask = (1u32 << order) - 1;
    let seed = seed & state_mask;
    if seed == 0 {
        return Err(invalid("LFSR seed must be nonzero"));
    }
    if taps & (1 << (order - 1)) == 0 || taps & !state_mask != 0 {
        return Err(invalid(format!("tap mask {taps:#b} is not a degree-{order} polynomial")));
    }
    let period = state_mask as usize;
    let mut lfsr = Lfsr::new(seed, taps);
    let mut values = Vec::with_capacity(period);
    for step in 1..=period {
        let bit = lfsr.next().expect("infinite");
        values.push(if bit == 0 { 1 } else { -1 });
        if lfsr.state() == seed && step < period {
            return Err(invalid(format!(
                "taps {taps:#b} are not primitive for order {order}: period {step} < {period}"
            )));
        }
    }
    if lfsr.state() != seed {
        return Err(invalid(format!("taps {taps:#b} are not primitive for order {order}: state never recurs")));
    }
    let seq = MSequence { values, order, taps };
    if seq.balance() != -1 {
        return Err(invalid(format!("taps {taps:#b} give an unbalanced sequence for order {order}")));
    }
    Ok(seq)
}

/// Which interrupt signal an m-sequence belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterruptKind {
    /// Primary interrupt signal, broadcast by the emergency node.
    Primary,
    /// Secondary interrupt signal, relayed by one-hop neighbours.
    Secondary,
}

/// Preset spreading code: the PIS uses the built-in primitive polynomial,
/// the SIS its reciprocal (the time-reversed m-sequence). Both use seed 1.
pub fn interrupt_code(kind: InterruptKind, order: u32) -> Result<MSequence> {
    let taps = primitive_taps(order)?;
    let taps = match kind {
        InterruptKind::Primary => taps,
        InterruptKind::Secondary => reciprocal_tap_mask(order, taps),
    };
    m_sequence(order, taps, 1)
}

/// LFSR order giving code length `q = 2^order - 1`.
pub fn order_for_length(q: usize) -> Result<u32> {
    let qp1 = q + 1;
    if q < 3 || !qp1.is_power_of_two() {
        return Err(invalid(format!("code length {q} is not 2^m - 1 with m >= 2")));
    }
    Ok(qp1.trailing_zeros())
}

/// Kronecker product `code (x) zc`: element `i` is `code[i / N] * zc[i % N]`.
pub fn build_interrupt_signal<T: Scalar>(code: &MSequence, zc: &ComplexSequence<T>) -> ComplexSequence<T> {
    let mut samples = Vec::with_capacity(code.len() * zc.len());
    for &c in &code.values {
        if c >= 0 {
            samples.extend_from_slice(&zc.samples);
        } else {
            samples.extend(zc.samples.iter().map(|z| -*z));
        }
    }
    ComplexSequence::new(samples, zc.sample_rate_hz)
}

/// Preset PIS or SIS of `q_points` blocks of an `n_points` ZC sequence with
/// the given root.
pub fn interrupt_signal<T: Scalar>(
    kind: InterruptKind,
    n_points: usize,
    q_points: usize,
    root: usize,
) -> Result<ComplexSequence<T>> {
    let code = interrupt_code(kind, order_for_length(q_points)?)?;
    let zc = zc_sequence::<T>(ZcParams::new(n_points, root)?)?;
    Ok(build_interrupt_signal(&code, &zc))
}

/// Half of the sidelobe direct sum: `|sum_{n < N - l} z*[n] z[n + l]|`.
pub fn partial_autocorrelation<T: Scalar>(zc: &ComplexSequence<T>, lag: usize) -> T {
    let z = &zc.samples;
    let n = z.len();
    let mut acc = Complex::new(T::zero(), T::zero());
    for i in 0..n.saturating_sub(lag) {
        acc = acc + z[i].conj() * z[i + lag];
    }
    acc.norm()
}

/// Correlator sidelobes where two adjacent ZC blocks carry opposite code
/// signs: entry `l - 1` is `|y[l]| = 2 |sin(pi M l^2 / N) / sin(pi M l / N)|`
/// for `l = 1..N-1`. Where the denominator vanishes the direct sum
/// `2 |sum_{n < N - l} z*[n] z[n + l]|` is used instead.
pub fn sidelobe_profile<T: Scalar>(n_points: usize, root: usize) -> Vec<T> {
    if n_points < 2 {
        return Vec::new();
    }
    let two_n = 2 * n_points as u128;
    let r = root as u128;
    let mut fallback: Option<ComplexSequence<T>> = None;
    (1..n_points)
        .map(|lag| {
            let l = lag as u128;
            // sin(pi k / N) with k reduced mod 2N keeps the argument small.
            let num_k = (r * ((l * l) % two_n)) % two_n;
            let den_k = (r * l) % two_n;
            if den_k.is_multiple_of(n_points as u128) {
                let zc = fallback.get_or_insert_with(|| {
                    let samples =
                        (0..n_points).map(|n| unit_phasor(zc_phase_index(n, n_points, root), n_points)).collect();
                    ComplexSequence::new(samples, INTERRUPT_SAMPLE_RATE_HZ)
                });
                return T::lit(2.0) * partial_autocorrelation(zc, lag);
            }
            let pi = std::f64::consts::PI;
            let num = (pi * num_k as f64 / n_points as f64).sin();
            let den = (pi * den_k as f64 / n_points as f64).sin();
            T::lit(2.0 * (num / den).abs())
        })
        .collect()
}

/// Exhaustive search for the ZC root minimizing the worst sidelobe, ties
/// broken by the total sidelobe level and then by the smaller root.
pub fn optimal_root(n_points: usize) -> Result<usize> {
    if n_points < 2 {
        return Err(invalid(format!("ZC length must be >= 2, got {n_points}")));
    }
    let mut best: Option<(usize, f64, f64)> = None;
    for root in (1..n_points).filter(|&r| gcd(r, n_points) == 1) {
        let profile = sidelobe_profile::<f64>(n_points, root);
        let max = profile.iter().copied().fold(0.0, f64::max);
        let sum: f64 = profile.iter().sum();
        let better = match best {
            None => true,
            Some((_, bmax, bsum)) => {
                let tol = 1e-9 * bmax.max(1.0);
                if max < bmax - tol {
                    true
                } else if (max - bmax).abs() <= tol {
                    sum < bsum - 1e-9 * bsum.max(1.0)
                } else {
                    false
                }
            }
        };
        if better {
            best = Some((root, max, sum));
        }
    }
    Ok(best.expect("root 1 is always coprime").0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn periodic_autocorr(z: &[Complex<f64>], shift: usize) -> Complex<f64> {
        let n = z.len();
        (0..n).map(|i| z[i].conj() * z[(i + shift) % n]).sum()
    }

    #[test]
    fn zc_first_sample_is_one() {
        for (n, r) in [(2, 1), (7, 3), (64, 5), (1024, 1), (139, 17)] {
            let z = zc_sequence::<f64>(ZcParams::new(n, r).unwrap()).unwrap();
            assert_eq!(z.samples[0], Complex::new(1.0, 0.0));
        }
    }

    #[test]
    fn zc_unit_modulus() {
        let z = zc_sequence::<f64>(ZcParams::new(1024, 1).unwrap()).unwrap();
        assert_eq!(z.len(), 1024);
        assert!(z.samples.iter().all(|s| (s.norm() - 1.0).abs() < 1e-12));
    }

    #[test]
    fn zc_cyclic_shift_orthogonal() {
        let z = zc_sequence::<f64>(ZcParams::new(64, 1).unwrap()).unwrap();
        assert!(periodic_autocorr(&z.samples, 5).norm() < 1e-9);
        assert!((periodic_autocorr(&z.samples, 0).re - 64.0).abs() < 1e-9);
    }

    #[test]
    fn zc_matches_formula_branches() {
        let even = zc_sequence::<f64>(ZcParams::new(16, 3).unwrap()).unwrap();
        let odd = zc_sequence::<f64>(ZcParams::new(15, 2).unwrap()).unwrap();
        for n in 0..16 {
            let e = Complex::from_polar(1.0, -std::f64::consts::PI * 3.0 * (n * n) as f64 / 16.0);
            assert!((even.samples[n] - e).norm() < 1e-12);
        }
        for n in 0..15 {
            let e = Complex::from_polar(1.0, -std::f64::consts::PI * 2.0 * (n * (n + 1)) as f64 / 15.0);
            assert!((odd.samples[n] - e).norm() < 1e-12);
        }
    }

    #[test]
    fn zc_rejects_bad_params() {
        assert!(ZcParams::new(64, 2).is_err());
        assert!(ZcParams::new(64, 0).is_err());
        assert!(ZcParams::new(1, 1).is_err());
        assert!(zc_sequence::<f64>(ZcParams { n_points: 10, root: 5 }).is_err());
    }

    #[test]
    fn m_sequence_lengths() {
        for (order, len) in [(3, 7), (5, 31), (6, 63), (7, 127), (10, 1023)] {
            let s = interrupt_code(InterruptKind::Primary, order).unwrap();
            assert_eq!(s.len(), len);
            assert_eq!(s.balance(), -1);
            assert!(s.values.iter().all(|&v| v == 1 || v == -1));
        }
    }

    #[test]
    fn m_sequence_two_level_autocorrelation() {
        let s = interrupt_code(InterruptKind::Primary, 4).unwrap();
        assert_eq!(s.periodic_autocorrelation(0), 15);
        for shift in 1..15 {
            assert_eq!(s.periodic_autocorrelation(shift), -1, "shift {shift}");
        }
    }

    #[test]
    fn every_table_entry_and_its_reciprocal_is_primitive() {
        for (order, exps) in PRIMITIVE_POLYNOMIALS {
            let taps = tap_mask(exps);
            assert!(m_sequence(order, taps, 1).is_ok(), "order {order}");
            assert!(m_sequence(order, reciprocal_tap_mask(order, taps), 1).is_ok(), "order {order} reciprocal");
        }
    }

    #[test]
    fn reciprocal_of_reciprocal_is_identity() {
        for (order, exps) in PRIMITIVE_POLYNOMIALS {
            let taps = tap_mask(exps);
            assert_eq!(reciprocal_tap_mask(order, reciprocal_tap_mask(order, taps)), taps);
        }
    }

    #[test]
    fn pis_and_sis_codes_differ() {
        for order in 3..=10 {
            let p = interrupt_code(InterruptKind::Primary, order).unwrap();
            let s = interrupt_code(InterruptKind::Secondary, order).unwrap();
            // Not equal under any cyclic shift.
            let q = p.len();
            for shift in 0..q {
                let shifted: Vec<i8> = (0..q).map(|i| p.values[(i + shift) % q]).collect();
                assert_ne!(shifted, s.values, "order {order} shift {shift}");
            }
        }
    }

    #[test]
    fn m_sequence_errors() {
        assert!(m_sequence(4, tap_mask(&[4, 3]), 0).is_err());
        // x^4 + x^2 + 1 = (x^2 + x + 1)^2 is not primitive.
        assert!(m_sequence(4, tap_mask(&[4, 2]), 1).is_err());
        // x^4 + 1 is not primitive either.
        assert!(m_sequence(4, tap_mask(&[4]), 1).is_err());
        assert!(primitive_taps(11).is_err());
    }

    #[test]
    fn m_sequence_repeats_with_its_period() {
        for order in 3..=10 {
            let taps = primitive_taps(order).unwrap();
            let period = (1usize << order) - 1;
            let bits: Vec<u8> = Lfsr::new(1, taps).take(2 * period).collect();
            assert_eq!(bits[..period], bits[period..]);
        }
    }

    #[test]
    fn kronecker_layout() {
        let zc = zc_sequence::<f64>(ZcParams::new(1024, 1).unwrap()).unwrap();
        let code = interrupt_code(InterruptKind::Primary, 6).unwrap();
        let pis = build_interrupt_signal(&code, &zc);
        assert_eq!(pis.len(), 64512);
        assert!((pis.duration_s() - 0.43008e-3).abs() < 1e-12);
        let i = 1024 + 3;
        assert_eq!(pis.samples[i], zc.samples[3] * code.values[1] as f64);
    }

    #[test]
    fn kronecker_with_all_ones_repeats() {
        let zc = zc_sequence::<f64>(ZcParams::new(8, 3).unwrap()).unwrap();
        let code = MSequence { values: vec![1; 5], order: 0, taps: 0 };
        let out = build_interrupt_signal(&code, &zc);
        for q in 0..5 {
            assert_eq!(out.samples[q * 8..(q + 1) * 8], zc.samples[..]);
        }
    }

    #[test]
    fn sidelobe_examples() {
        let p = sidelobe_profile::<f64>(64, 1);
        assert_eq!(p.len(), 63);
        assert!((p[0] - 2.0).abs() < 1e-12);
        assert!(p[7].abs() < 1e-12, "l = 8: {}", p[7]);
        let direct = 2.0 * partial_autocorrelation(&zc_sequence::<f64>(ZcParams::new(64, 1).unwrap()).unwrap(), 8);
        assert!(direct < 1e-9);
        for n in [5, 16, 33] {
            assert!((sidelobe_profile::<f64>(n, 1)[0] - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sidelobe_falls_back_when_denominator_vanishes() {
        // N = 8, root = 2, l = 4: root * l = N, so sin(pi root l / N) = 0.
        let p = sidelobe_profile::<f64>(8, 2);
        let samples = (0..8).map(|n| unit_phasor(zc_phase_index(n, 8, 2), 8)).collect();
        let zc = ComplexSequence::<f64>::new(samples, 1.0);
        assert!((p[3] - 2.0 * partial_autocorrelation(&zc, 4)).abs() < 1e-12);
        assert!(p.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn optimal_root_small_cases() {
        assert_eq!(optimal_root(64).unwrap(), 1);
        // N = 3: roots 1 and 2 give conjugate sequences with equal profiles,
        // so the tie goes to the smaller root.
        let p1 = sidelobe_profile::<f64>(3, 1);
        let p2 = sidelobe_profile::<f64>(3, 2);
        let m1 = p1.iter().copied().fold(0.0, f64::max);
        let m2 = p2.iter().copied().fold(0.0, f64::max);
        let expected = if m2 < m1 - 1e-12 { 2 } else { 1 };
        assert_eq!(optimal_root(3).unwrap(), expected);
        assert!(optimal_root(1).is_err());
    }

    #[test]
    fn order_for_length_roundtrip() {
        assert_eq!(order_for_length(63).unwrap(), 6);
        assert_eq!(order_for_length(7).unwrap(), 3);
        assert!(order_for_length(64).is_err());
        assert!(order_for_length(1).is_err());
    }

    #[test]
    fn f32_sequences_agree_with_f64() {
        let a = zc_sequence::<f32>(ZcParams::new(256, 7).unwrap()).unwrap();
        let b = zc_sequence::<f64>(ZcParams::new(256, 7).unwrap()).unwrap();
        for (x, y) in a.samples.iter().zip(&b.samples) {
            assert!(((x.re as f64) - y.re).abs() < 1e-6 && ((x.im as f64) - y.im).abs() < 1e-6);
        }
    }
}
