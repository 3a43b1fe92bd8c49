//! Unslotted multi-replica ALOHA.
//!
//! Every node sends `d` copies of one packet of length `tp` at random
//! non-overlapping start times in `[0, T - tp]`. A node gets through if any
//! copy overlaps no copy of another node. Intervals are half-open
//! `[s, s + tp)`, so two copies collide iff their starts differ by less
//! than `tp`.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{run_batches, SimRng};
use crate::stats::{pooled_rate, RateEstimate};

/// Access window left after the interrupt phase, seconds.
pub const DEFAULT_HORIZON_S: f64 = 9.5e-3;
/// Warning packet airtime, seconds.
pub const DEFAULT_PACKET_S: f64 = 24e-6;
/// Attempts before the replica sampler gives up.
pub const MAX_PLACEMENT_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccessParams {
    pub horizon_t: f64,
    pub packet_tp: f64,
    pub nodes_k: u32,
    pub degree_d: u32,
}

impl AccessParams {
    pub fn new(nodes_k: u32, degree_d: u32) -> Self {
        Self { horizon_t: DEFAULT_HORIZON_S, packet_tp: DEFAULT_PACKET_S, nodes_k, degree_d }
    }

    pub fn with_timing(mut self, horizon_t: f64, packet_tp: f64) -> Self {
        self.horizon_t = horizon_t;
        self.packet_tp = packet_tp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_timing(self.horizon_t, self.packet_tp)?;
        if self.nodes_k == 0 || self.degree_d == 0 {
            return Err(invalid("need at least one node and one replica"));
        }
        if self.degree_d as f64 * self.packet_tp > self.horizon_t {
            return Err(invalid(format!(
                "{} replicas of {} s do not fit in {} s",
                self.degree_d, self.packet_tp, self.horizon_t
            )));
        }
        Ok(())
    }

    /// `rho = 2 (K - 1) tp / T`.
    pub fn rho(&self) -> f64 {
        2.0 * (self.nodes_k as f64 - 1.0) * self.packet_tp / self.horizon_t
    }

    /// Mean spacing between other nodes' replicas, `T / ((K - 1) d)`.
    pub fn mean_gap(&self) -> f64 {
        self.horizon_t / ((self.nodes_k as f64 - 1.0) * self.degree_d as f64)
    }
}

pub(crate) fn validate_timing(horizon_t: f64, packet_tp: f64) -> Result<()> {
    if !(horizon_t > 0.0 && horizon_t.is_finite()) || !(packet_tp > 0.0 && packet_tp <= horizon_t) {
        return Err(invalid(format!("need 0 < tp <= T, got T = {horizon_t}, tp = {packet_tp}")));
    }
    Ok(())
}

/// Clean-copy probability against one other node, with a flag set when
/// `(d + 1) tp > T` and the feasible region is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CleanProbability {
    pub value: f64,
    pub degenerate: bool,
}

/// `P0 = (T - (d+1) tp)^(d+1) / ((T - d tp)^d (T - tp))`.
pub fn p0(params: &AccessParams) -> CleanProbability {
    let t = params.horizon_t;
    let tp = params.packet_tp;
    let d = params.degree_d as f64;
    let free = t - (d + 1.0) * tp;
    if free < 0.0 || !(t - d * tp > 0.0) {
        return CleanProbability { value: 0.0, degenerate: true };
    }
    // Ratio of per-axis factors avoids overflow for large d.
    let a = free / (t - d * tp);
    let value = a.powf(d) * (free / (t - tp));
    CleanProbability { value, degenerate: false }
}

/// `(1 - P0^(K-1))^d`, treating other nodes' copies as independent.
pub fn analytic_rloss(params: &AccessParams) -> f64 {
    if params.nodes_k <= 1 {
        return 0.0;
    }
    let clean = p0(params).value.powi(params.nodes_k as i32 - 1);
    (-clean).ln_1p().mul_add(params.degree_d as f64, 0.0).exp()
}

/// `(1 - exp(-rho d))^d`.
pub fn poisson_rloss(params: &AccessParams) -> f64 {
    let d = params.degree_d as f64;
    let rho = params.rho();
    if rho == 0.0 {
        return 0.0;
    }
    (-(-rho * d).exp()).ln_1p().mul_add(d, 0.0).exp()
}

/// Continuous optimum `d* = ln 2 / (2 (K - 1)) * T / tp`; infinite for
/// `K = 1`.
pub fn optimal_degree(k: u32, t: f64, tp: f64) -> f64 {
    if k <= 1 {
        return f64::INFINITY;
    }
    std::f64::consts::LN_2 / (2.0 * (k as f64 - 1.0)) * t / tp
}

/// Largest `d` with a nondegenerate geometry, `(d + 1) tp <= T`.
pub fn max_degree(t: f64, tp: f64) -> u32 {
    let mut d = ((t / tp).floor() as u32).saturating_sub(1).max(1);
    while d > 1 && (d as f64 + 1.0) * tp > t {
        d -= 1;
    }
    d
}

/// Better of `floor(d*)` and `ceil(d*)` under [`analytic_rloss`], lower
/// `d` on ties.
pub fn best_integer_degree(k: u32, t: f64, tp: f64) -> u32 {
    let cap = max_degree(t, tp);
    let ds = optimal_degree(k, t, tp);
    if !ds.is_finite() {
        return 1;
    }
    let lo = (ds.floor() as u32).clamp(1, cap);
    let hi = (ds.ceil() as u32).clamp(1, cap);
    let r = |d| analytic_rloss(&AccessParams { horizon_t: t, packet_tp: tp, nodes_k: k, degree_d: d });
    if r(hi) < r(lo) {
        hi
    } else {
        lo
    }
}

/// Global argmin of [`analytic_rloss`] over `1..=d_max`, lower `d` on ties.
pub fn argmin_degree(k: u32, t: f64, tp: f64, d_max: u32) -> u32 {
    let d_max = d_max.min(max_degree(t, tp)).max(1);
    let mut best = (1, f64::INFINITY);
    for d in 1..=d_max {
        let r = analytic_rloss(&AccessParams { horizon_t: t, packet_tp: tp, nodes_k: k, degree_d: d });
        if r < best.1 {
            best = (d, r);
        }
    }
    best.0
}

/// `K* = -(T / tp) ln^2 2 / (2 ln R) + 1`; infinite when `R >= 1`.
pub fn max_sustainable_nodes(r_target: f64, t: f64, tp: f64) -> f64 {
    if r_target >= 1.0 {
        return f64::INFINITY;
    }
    let ln2 = std::f64::consts::LN_2;
    -(t / tp) * ln2 * ln2 / (2.0 * r_target.ln()) + 1.0
}

/// Largest `K` whose loss at [`best_integer_degree`] stays within
/// `r_target`. `None` when unbounded (`r_target >= 1`).
pub fn max_sustainable_nodes_integer(r_target: f64, t: f64, tp: f64) -> Option<u32> {
    if r_target >= 1.0 {
        return None;
    }
    let mut k = 1;
    loop {
        let next = k + 1;
        let d = best_integer_degree(next, t, tp);
        let r = analytic_rloss(&AccessParams { horizon_t: t, packet_tp: tp, nodes_k: next, degree_d: d });
        if r > r_target {
            return Some(k);
        }
        k = next;
    }
}

/// Offered load in packets per packet time, `K d tp / T`.
pub fn effective_g(params: &AccessParams) -> f64 {
    params.nodes_k as f64 * params.degree_d as f64 * params.packet_tp / params.horizon_t
}

/// One replica: the sending node and its start time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    pub node: u32,
    pub start: f64,
}

/// All replicas of one access window.
#[derive(Debug, Clone, PartialEq)]
pub struct Timeline {
    pub placements: Vec<Placement>,
    pub packet_tp: f64,
    pub horizon_t: f64,
    pub nodes: u32,
}

impl Timeline {
    pub fn new(placements: Vec<Placement>, packet_tp: f64, horizon_t: f64, nodes: u32) -> Self {
        Self { placements, packet_tp, horizon_t, nodes }
    }

    /// Replica indices ordered by start time.
    pub fn order_by_start(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.placements.len()).collect();
        idx.sort_by(|&a, &b| self.placements[a].start.total_cmp(&self.placements[b].start).then(a.cmp(&b)));
        idx
    }

    /// True when each node's replicas are pairwise disjoint and all starts
    /// lie in `[0, T - tp]`.
    pub fn is_well_formed(&self) -> bool {
        let last = self.horizon_t - self.packet_tp;
        if self.placements.iter().any(|p| p.start < 0.0 || p.start > last || p.node >= self.nodes) {
            return false;
        }
        let order = self.order_by_start();
        let mut prev: Vec<Option<f64>> = vec![None; self.nodes as usize];
        for i in order {
            let p = self.placements[i];
            if let Some(s) = prev[p.node as usize] {
                if p.start - s < self.packet_tp {
                    return false;
                }
            }
            prev[p.node as usize] = Some(p.start);
        }
        true
    }
}

/// Append `d` uniform, pairwise disjoint starts on `[0, T - tp]` for `node`.
pub fn place_replicas<R: Rng + ?Sized>(
    node: u32,
    d: u32,
    horizon_t: f64,
    packet_tp: f64,
    rng: &mut R,
    out: &mut Vec<Placement>,
) -> Result<()> {
    let span = horizon_t - packet_tp;
    let mut starts = vec![0.0; d as usize];
    for _ in 0..MAX_PLACEMENT_ATTEMPTS {
        for s in starts.iter_mut() {
            *s = rng.random::<f64>() * span;
        }
        starts.sort_by(f64::total_cmp);
        if starts.windows(2).all(|w| w[1] - w[0] >= packet_tp) {
            out.extend(starts.iter().map(|&start| Placement { node, start }));
            return Ok(());
        }
    }
    Err(Error::SamplerExhausted { attempts: MAX_PLACEMENT_ATTEMPTS as usize, what: format!("{d} disjoint replicas") })
}

/// Independent timeline with `d` replicas per node.
pub fn generate_timeline<R: Rng + ?Sized>(params: &AccessParams, rng: &mut R) -> Result<Timeline> {
    params.validate()?;
    let mut placements = Vec::with_capacity((params.nodes_k * params.degree_d) as usize);
    for node in 0..params.nodes_k {
        place_replicas(node, params.degree_d, params.horizon_t, params.packet_tp, rng, &mut placements)?;
    }
    Ok(Timeline::new(placements, params.packet_tp, params.horizon_t, params.nodes_k))
}

/// For each replica, whether it overlaps a replica of another node.
pub fn collided_replicas(timeline: &Timeline) -> Vec<bool> {
    let p = &timeline.placements;
    let order = timeline.order_by_start();
    let tp = timeline.packet_tp;
    let mut hit = vec![false; p.len()];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if p[j].start - p[i].start >= tp {
                break;
            }
            if p[j].node != p[i].node {
                hit[i] = true;
                hit[j] = true;
            }
        }
    }
    hit
}

/// Per-node success without interference cancellation.
pub fn decode_no_sic(timeline: &Timeline) -> Vec<bool> {
    let hit = collided_replicas(timeline);
    let mut ok = vec![false; timeline.nodes as usize];
    for (p, h) in timeline.placements.iter().zip(hit) {
        if !h {
            ok[p.node as usize] = true;
        }
    }
    ok
}

/// Loss rate pooled over all (trial, node) pairs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossEstimate {
    pub r_loss: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub trials: u64,
    pub node_trials: u64,
    pub failures: u64,
    /// Node-trials divided by the observed design effect.
    pub effective_node_trials: f64,
}

impl LossEstimate {
    pub(crate) fn from_rate(r: RateEstimate, trials: u64) -> Self {
        Self {
            r_loss: r.rate,
            ci_lo: r.ci_lo,
            ci_hi: r.ci_hi,
            trials,
            node_trials: r.trials,
            failures: r.events,
            effective_node_trials: r.effective_trials,
        }
    }

    /// Wilson lower bound at normal quantile `z` on the effective sample.
    pub fn lower_bound(&self, z: f64) -> f64 {
        RateEstimate {
            events: self.failures,
            trials: self.node_trials,
            rate: self.r_loss,
            ci_lo: self.ci_lo,
            ci_hi: self.ci_hi,
            effective_trials: self.effective_node_trials,
        }
        .lower_bound(z)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

/// Per-batch failure sums `(sum f, sum f^2)` over trials.
pub(crate) fn reduce_failures(parts: Vec<Result<(u64, u64)>>) -> Result<(u64, u64)> {
    let mut s = (0u64, 0u64);
    for p in parts {
        let (a, b) = p?;
        s.0 += a;
        s.1 += b;
    }
    Ok(s)
}

/// Monte Carlo loss rate without SIC. The interval accounts for the
/// dependence between nodes of one trial.
pub fn simulate_rloss(params: &AccessParams, trials: u64, rng: &SimRng) -> Result<LossEstimate> {
    params.validate()?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let parts = run_batches(rng, trials, 1024, |g, _, count| -> Result<(u64, u64)> {
        let (mut sum, mut sq) = (0u64, 0u64);
        for _ in 0..count {
            let tl = generate_timeline(params, g)?;
            let f = decode_no_sic(&tl).iter().filter(|&&ok| !ok).count() as u64;
            sum += f;
            sq += f * f;
        }
        Ok((sum, sq))
    });
    let (sum, sq) = reduce_failures(parts)?;
    Ok(LossEstimate::from_rate(pooled_rate(sum, sq, trials, params.nodes_k as u64), trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: f64 = DEFAULT_HORIZON_S;
    const TP: f64 = DEFAULT_PACKET_S;

    fn pl(node: u32, start: f64) -> Placement {
        Placement { node, start }
    }

    #[test]
    fn p0_closed_forms() {
        let p = AccessParams::new(2, 1).with_timing(10.0, 1.0);
        assert!((p0(&p).value - 64.0 / 81.0).abs() < 1e-15);
        let p = AccessParams::new(2, 2).with_timing(10.0, 1.0);
        assert!((p0(&p).value - 343.0 / 576.0).abs() < 1e-15);
        let p = AccessParams::new(2, 3).with_timing(1.0, 1e-12);
        assert!((p0(&p).value - 1.0).abs() < 1e-9);
        let p = AccessParams::new(2, 3).with_timing(3.5, 1.0);
        assert!(p0(&p).degenerate);
        assert_eq!(p0(&p).value, 0.0);
    }

    #[test]
    fn single_node_never_lost() {
        for d in [1, 5, 20] {
            let p = AccessParams::new(1, d);
            assert_eq!(analytic_rloss(&p), 0.0);
            assert_eq!(poisson_rloss(&p), 0.0);
        }
    }

    #[test]
    fn optima() {
        assert!((optimal_degree(10, T, TP) - 15.2428).abs() < 1e-3);
        assert!((optimal_degree(20, T, TP) - 7.2203).abs() < 1e-3);
        assert!((optimal_degree(30, T, TP) - 4.7305).abs() < 1e-3);
        assert_eq!(best_integer_degree(10, T, TP), 15);
        assert_eq!(best_integer_degree(20, T, TP), 7);
        assert_eq!(best_integer_degree(30, T, TP), 5);
        assert!((max_sustainable_nodes(1e-4, T, TP) - 11.3242).abs() < 1e-3);
        assert!((max_sustainable_nodes(1e-2, T, TP) - 21.648).abs() < 1e-3);
        assert_eq!(max_sustainable_nodes(1.0, T, TP), f64::INFINITY);
        assert_eq!(max_sustainable_nodes_integer(1e-4, T, TP), Some(11));
        assert_eq!(max_sustainable_nodes_integer(1.0, T, TP), None);
    }

    #[test]
    fn g_arithmetic() {
        assert!((effective_g(&AccessParams::new(1, 1).with_timing(1.0, 1.0)) - 1.0).abs() < 1e-15);
        assert!((effective_g(&AccessParams::new(10, 15)) - 150.0 * 24.0 / 9500.0).abs() < 1e-12);
    }

    #[test]
    fn poisson_tracks_exact() {
        let p = AccessParams::new(30, 5);
        let (a, b) = (analytic_rloss(&p), poisson_rloss(&p));
        assert!((a - b).abs() / a < 0.1, "{a} vs {b}");
    }

    #[test]
    fn figure_scenario_only_b_clean() {
        // Three nodes, four copies each; B's third copy is the only clean one.
        let tp = 1.0;
        let a = [0.0, 3.0, 6.5, 10.0];
        let b = [0.5, 3.5, 8.0, 10.5];
        let c = [1.0, 2.6, 7.0, 11.0];
        let mut v = Vec::new();
        for (node, starts) in [(0, a), (1, b), (2, c)] {
            v.extend(starts.iter().map(|&s| pl(node, s)));
        }
        let tl = Timeline::new(v, tp, 13.0, 3);
        assert!(tl.is_well_formed());
        assert_eq!(decode_no_sic(&tl), vec![false, true, false]);
    }

    #[test]
    fn touching_is_not_collision() {
        let tl = Timeline::new(vec![pl(0, 0.0), pl(1, 1.0)], 1.0, 3.0, 2);
        assert_eq!(decode_no_sic(&tl), vec![true, true]);
        let tl = Timeline::new(vec![pl(0, 0.0), pl(1, 0.999)], 1.0, 3.0, 2);
        assert_eq!(decode_no_sic(&tl), vec![false, false]);
    }

    #[test]
    fn generated_timelines_are_well_formed() {
        let mut g = SimRng::new(4).generator();
        for k in [1, 3, 10] {
            let tl = generate_timeline(&AccessParams::new(k, 15), &mut g).unwrap();
            assert!(tl.is_well_formed());
            assert_eq!(tl.placements.len(), (k * 15) as usize);
        }
        assert!(generate_timeline(&AccessParams::new(2, 5).with_timing(4.0, 1.0), &mut g).is_err());
    }

    #[test]
    fn two_node_small_case() {
        let p = AccessParams::new(2, 1).with_timing(3.0, 1.0);
        let est = simulate_rloss(&p, 40_000, &SimRng::new(8)).unwrap();
        assert!(est.ci_lo <= 0.75 + 0.01 && 0.75 - 0.01 <= est.ci_hi, "{est:?}");
    }
}
