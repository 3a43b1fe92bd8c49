use num_complex::Complex;
use proptest::prelude::*;
use umac_core::channel::ChannelParams;
use umac_core::detector::*;
use umac_core::signal::{ComplexSequence, InterruptKind};
use umac_core::SimRng;

fn config(n: usize, q: usize, alpha: f64) -> DetectorConfig<f64> {
    DetectorConfig::preset(InterruptKind::Primary, n, q, 1, alpha).unwrap()
}

fn second_moment(v: &[Complex<f64>]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<Complex<f64>>() / n;
    v.iter().map(|x| (x - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
}

#[test]
fn interference_variance_matches_exact_sum() {
    let c = config(64, 7, 0.1);
    let ch = ChannelParams { rho_i: 0.0, rho_x: 1.0, sigma_w2: 0.0, ..ChannelParams::default() };
    let acc =
        simulate_accumulators(&c, &ch, Hypothesis::Present, 100_000, &SimRng::new(21), &DetectionOptions::default())
            .unwrap();
    let mc = second_moment(&acc);
    let exact = sigma_x2_exact(&c, 64, 7.5).unwrap();
    let approx = sigma_x2_approx(&c, 64, 7.5).unwrap();
    assert!((mc / exact - 1.0).abs() < 0.03, "mc {mc} exact {exact}");
    assert!(mc <= approx * 1.03, "mc {mc} approx {approx}");
}

#[test]
fn random_alignment_variance_matches_phase_average() {
    let c = config(64, 7, 0.1);
    let ch = ChannelParams { rho_i: 0.0, rho_x: 1.0, sigma_w2: 0.0, ..ChannelParams::default() };
    let acc =
        simulate_accumulators(&c, &ch, Hypothesis::Absent, 100_000, &SimRng::new(22), &DetectionOptions::default())
            .unwrap();
    let mc = second_moment(&acc);
    let avg = (0..480).map(|ph| sigma_x2_exact_at(&c, 64, 7.5, ph).unwrap()).sum::<f64>() / 480.0;
    assert!((mc / avg - 1.0).abs() < 0.03, "mc {mc} phase average {avg}");
}

#[test]
fn noise_accumulator_variance() {
    let c = config(64, 7, 0.1);
    let ch = ChannelParams { rho_i: 0.0, rho_x: 0.0, ..ChannelParams::default() };
    let acc =
        simulate_accumulators(&c, &ch, Hypothesis::Absent, 100_000, &SimRng::new(23), &DetectionOptions::default())
            .unwrap();
    let expected = 448.0 * ch.sigma_w2;
    assert!((second_moment(&acc) / expected - 1.0).abs() < 0.03);
}

#[test]
fn exact_below_approx_at_aligned_phase() {
    for (n, q) in [(64, 7), (64, 31), (256, 31), (1024, 31), (1024, 63), (1024, 127)] {
        for kind in [InterruptKind::Primary, InterruptKind::Secondary] {
            let c = DetectorConfig::<f64>::preset(kind, n, q, 1, 0.1).unwrap();
            let e = sigma_x2_exact(&c, 64, 7.5).unwrap();
            let a = sigma_x2_approx(&c, 64, 7.5).unwrap();
            assert!(e <= a, "N={n} Q={q} {kind:?}: exact {e} > approx {a}");
        }
    }
}

#[test]
fn analytic_mdr_monotone() {
    let sigma_w2 = 1.5e-4;
    let rho_x = 0.3;
    for q in [7usize, 31, 63, 127] {
        let c = config(256, q, 1e-4);
        let sx = sigma_x2_approx(&c, 64, 7.5).unwrap();
        let su = rho_x * sx + (256 * q) as f64 * sigma_w2;
        let t = np_threshold(1e-4, su).unwrap();
        let mut prev = 1.0;
        for i in 0..40 {
            let rho_i = 1e-5 * 1.25f64.powi(i);
            let m = analytic_mdr(rho_i, 256, q, su, t).unwrap();
            assert!(m <= prev + 1e-15, "Q={q}: not monotone in rho_i");
            prev = m;
        }
    }
    for rho_i in [1e-4, 3e-4, 1e-3] {
        let mut prev = 1.0;
        for q in [7usize, 15, 31, 63, 127] {
            let c = config(256, q, 1e-4);
            let su = rho_x * sigma_x2_approx(&c, 64, 7.5).unwrap() + (256 * q) as f64 * sigma_w2;
            let m = analytic_mdr(rho_i, 256, q, su, np_threshold(1e-4, su).unwrap()).unwrap();
            assert!(m <= prev + 1e-15, "rho_i={rho_i}: not monotone in Q");
            prev = m;
        }
    }
}

#[test]
fn false_alarm_rate_calibrated() {
    let c = config(64, 7, 0.01);
    let ch = ChannelParams::at_sinr_db(-12.0).unwrap();
    let stats = DetectorStats::compute(&c, &ch, VarianceModel::PhaseAveraged, RiceScale::Calibrated).unwrap();
    let u = simulate_statistics(&c, &ch, Hypothesis::Absent, 100_000, &SimRng::new(24), &DetectionOptions::default())
        .unwrap();
    let (_, far) = rates_at_threshold(&[], &u, stats.threshold);
    assert!((far.rate - 0.01).abs() < 0.002, "{far:?}");
}

#[test]
fn stated_scale_squares_false_alarm_rate() {
    let c = config(64, 7, 0.1);
    let ch = ChannelParams::at_sinr_db(-12.0).unwrap();
    let stats = DetectorStats::compute(&c, &ch, VarianceModel::PhaseAveraged, RiceScale::Stated).unwrap();
    let u = simulate_statistics(&c, &ch, Hypothesis::Absent, 100_000, &SimRng::new(26), &DetectionOptions::default())
        .unwrap();
    let (_, far) = rates_at_threshold(&[], &u, stats.threshold);
    assert!((far.rate - 0.01).abs() < 0.002, "{far:?}");
}

#[test]
fn calibrated_miss_matches_simulation() {
    let c = config(64, 7, 1e-3);
    let ch = ChannelParams::at_sinr_db(-15.0).unwrap();
    let opts = DetectionOptions { variance: VarianceModel::Exact, ..DetectionOptions::default() };
    let rep = simulate_detection(&c, &ch, 40_000, &SimRng::new(25), &opts).unwrap();
    assert!(rep.mdr_hat.rate > 0.01 && rep.mdr_hat.rate < 0.5, "{rep:?}");
    let (lo, hi) = (rep.mdr_hat.ci_lo, rep.mdr_hat.ci_hi);
    let slack = 0.05 * rep.mdr_analytic;
    assert!(lo - slack <= rep.mdr_analytic && rep.mdr_analytic <= hi + slack, "{rep:?}");
}

#[test]
fn stated_miss_is_pessimistic() {
    let c = config(64, 7, 1e-3);
    let ch = ChannelParams::at_sinr_db(-11.0).unwrap();
    let opts = DetectionOptions { scale: RiceScale::Stated, ..DetectionOptions::default() };
    let rep = simulate_detection(&c, &ch, 40_000, &SimRng::new(27), &opts).unwrap();
    assert!(rep.mdr_hat.rate > 0.0, "{rep:?}");
    assert!(rep.mdr_hat.ci_hi < rep.mdr_analytic, "{rep:?}");
}

fn complex_vec(len: usize) -> impl Strategy<Value = Vec<Complex<f64>>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| Complex::new(a, b)), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_correlation_equals_direct(r in complex_vec(100), z in complex_vec(9)) {
        let rs = ComplexSequence::new(r.clone(), 1.0);
        let zs = ComplexSequence::new(z.clone(), 1.0);
        let y = correlate_zc(&rs, &zs).unwrap();
        prop_assert_eq!(y.len(), 92);
        for i in 0..y.len() {
            let d: Complex<f64> = (0..9).map(|n| z[n].conj() * r[i + n]).sum();
            prop_assert!((y.samples[i] - d).norm() <= 1e-9 * d.norm().max(1.0));
        }
    }

    #[test]
    fn two_stage_equals_template(r in complex_vec(16 * 7 + 5)) {
        let c = config(16, 7, 0.1);
        let rs = ComplexSequence::new(r, 1.0);
        let acc = accumulate_code(&correlate_zc(&rs, &c.zc).unwrap(), &c.code, 16);
        prop_assert_eq!(acc.len(), 6);
        for (i, v) in acc.iter().enumerate() {
            let u = decision_statistic(&rs, i, &c).unwrap();
            prop_assert!((u - v).abs() <= 1e-9 * u.max(1.0));
        }
    }

    #[test]
    fn threshold_yields_alpha_under_rayleigh(alpha in 1e-9f64..1.0, s2 in 1e-3f64..1e3) {
        let t = np_threshold(alpha, s2).unwrap();
        prop_assert!(((-t * t / (2.0 * s2)).exp() - alpha).abs() <= 1e-12 * alpha.max(1e-3));
    }
}
