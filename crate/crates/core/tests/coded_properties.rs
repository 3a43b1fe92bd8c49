use proptest::prelude::*;
use umac_core::aloha::{decode_no_sic, generate_timeline, AccessParams, Placement, Timeline};
use umac_core::coded::*;
use umac_core::SimRng;

const T: f64 = 9.5e-3;
const TP: f64 = 24e-6;

fn timeline_strategy() -> impl Strategy<Value = Timeline> {
    // Dense windows so that peeling has work to do.
    (2u32..40, prop::collection::vec(1u32..6, 40), any::<u64>()).prop_map(|(k, degrees, seed)| {
        let mut g = SimRng::new(seed).generator();
        let mut placements: Vec<Placement> = Vec::new();
        for node in 0..k {
            umac_core::aloha::place_replicas(node, degrees[node as usize], 2e-3, TP, &mut g, &mut placements).unwrap();
        }
        Timeline::new(placements, TP, 2e-3, k)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn sic_extends_plain_decoding(t in timeline_strategy()) {
        let sic = sic_decode(&t);
        for (plain, with_sic) in decode_no_sic(&t).into_iter().zip(&sic.decoded) {
            prop_assert!(!plain || *with_sic);
        }
    }

    #[test]
    fn fixpoint_independent_of_order(t in timeline_strategy()) {
        let a = sic_decode_with_order(&t, PeelOrder::EarliestFirst);
        let b = sic_decode_with_order(&t, PeelOrder::LatestFirst);
        prop_assert_eq!(&a.decoded, &b.decoded);
        prop_assert!(a.iterations <= t.nodes);
    }

    #[test]
    fn trace_replays(t in timeline_strategy()) {
        let r = sic_decode(&t);
        prop_assert_eq!(replay_trace(&t, &r.peeling_trace).unwrap(), r.decoded.clone());
        prop_assert_eq!(r.iterations as usize, r.decoded.iter().filter(|&&d| d).count());
    }

    #[test]
    fn parse_accepts_its_own_output(ws in prop::collection::vec(1u32..30, 1..6)) {
        let mut degrees = ws;
        degrees.sort_unstable();
        degrees.dedup();
        let p = 1.0 / degrees.len() as f64;
        let mut weights: Vec<(u32, f64)> = degrees.iter().map(|&d| (d, p)).collect();
        let rest: f64 = weights[1..].iter().map(|w| w.1).sum();
        weights[0].1 = 1.0 - rest;
        let dist = DegreeDistribution::new(weights).unwrap();
        prop_assert_eq!(DegreeDistribution::parse(&dist.to_text()).unwrap(), dist);
    }
}

#[test]
fn sic_no_worse_than_plain_on_regular_laws() {
    let mut g = SimRng::new(61).generator();
    for d in 2..=8 {
        let (mut plain, mut sic) = (0usize, 0usize);
        for _ in 0..2_000 {
            let t = generate_timeline(&AccessParams::new(10, d), &mut g).unwrap();
            plain += decode_no_sic(&t).iter().filter(|&&ok| !ok).count();
            sic += sic_decode(&t).failures();
        }
        assert!(sic <= plain, "d={d}: sic {sic} > plain {plain}");
    }
}

#[test]
fn loss_nondecreasing_in_population() {
    let dist = DegreeDistribution::new(vec![(2, 0.5), (3, 0.28), (8, 0.22)]).unwrap();
    let ks = [20u32, 40, 60, 80, 100];
    let est: Vec<_> = ks
        .iter()
        .map(|&k| simulate_coded_rloss(k, &dist, T, TP, 4_000, &SimRng::new(70 + k as u64)).unwrap())
        .collect();
    for w in est.windows(2) {
        let slack = 3.0 * (w[0].half_width() + w[1].half_width());
        assert!(w[1].r_loss + slack >= w[0].r_loss, "{:?} then {:?}", w[0], w[1]);
    }
    assert!(est[4].r_loss > est[0].r_loss);
}

#[test]
fn regular_three_meets_target_for_small_populations() {
    let dist = DegreeDistribution::regular(3).unwrap();
    for k in [10u32, 20] {
        let est = simulate_coded_rloss(k, &dist, T, TP, 20_000, &SimRng::new(80 + k as u64)).unwrap();
        assert!(est.r_loss < 1e-4, "K={k}: {est:?}");
    }
}

#[test]
fn sweep_reports_largest_passing_population() {
    let dists = [DegreeDistribution::regular(1).unwrap(), DegreeDistribution::regular(3).unwrap()];
    let s = sweep_sustainable_k(&dists, &[2, 40, 5], 5e-2, T, TP, 2_000, &SimRng::new(90)).unwrap();
    assert_eq!(s.points.len(), 6);
    assert_eq!(s.points[0].k, 2);
    assert!(s.max_k[1] >= s.max_k[0]);
    let again = sweep_sustainable_k(&dists, &[2, 40, 5], 5e-2, T, TP, 2_000, &SimRng::new(90)).unwrap();
    assert_eq!(s, again);
}
