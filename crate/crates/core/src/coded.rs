//! Coded unslotted ALOHA: random replica counts plus SIC peeling.
//!
//! The receiver repeatedly finds a replica that overlaps no replica of an
//! undecoded other node, decodes its node and cancels every replica of
//! that node. Cancellation is perfect.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;

use crate::aloha::{place_replicas, reduce_failures, validate_timing, LossEstimate, Placement, Timeline};
use crate::error::{invalid, Error, Result};
use crate::rng::{run_batches, SimRng};
use crate::stats::pooled_rate;

/// Sum-to-one tolerance for degree distributions.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// Probability law over replica counts, `Lambda(x) = sum_d w_d x^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeDistribution {
    weights: Vec<(u32, f64)>,
    cumulative: Vec<f64>,
}

impl DegreeDistribution {
    pub fn new(mut weights: Vec<(u32, f64)>) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("degree distribution is empty"));
        }
        weights.sort_by_key(|w| w.0);
        if weights.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(invalid("degrees must be distinct"));
        }
        if let Some(&(d, p)) = weights.iter().find(|&&(d, p)| d == 0 || !(p >= 0.0 && p.is_finite())) {
            return Err(invalid(format!("bad term: degree {d}, probability {p}")));
        }
        let total: f64 = weights.iter().map(|w| w.1).sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(invalid(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w.1;
                acc
            })
            .collect();
        Ok(Self { weights, cumulative })
    }

    /// Every node sends exactly `d` replicas.
    pub fn regular(d: u32) -> Result<Self> {
        Self::new(vec![(d, 1.0)])
    }

    /// Parse `degree probability` lines; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut weights = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: i + 1, message };
            let mut it = line.split_whitespace();
            let (Some(d), Some(p), None) = (it.next(), it.next(), it.next()) else {
                return Err(err(format!("expected `degree probability`, got `{line}`")));
            };
            let d: u32 = d.parse().map_err(|e| err(format!("degree `{d}`: {e}")))?;
            let p: f64 = p.parse().map_err(|e| err(format!("probability `{p}`: {e}")))?;
            weights.push((d, p));
        }
        Self::new(weights)
    }

    /// `degree probability` lines, inverse of [`DegreeDistribution::parse`].
    pub fn to_text(&self) -> String {
        self.weights.iter().map(|(d, p)| format!("{d} {p}\n")).collect()
    }

    pub fn weights(&self) -> &[(u32, f64)] {
        &self.weights
    }

    pub fn max_degree(&self) -> u32 {
        self.weights.last().map_or(0, |w| w.0)
    }

    /// `Lambda'(1)`, the mean replica count.
    pub fn mean_degree(&self) -> f64 {
        self.weights.iter().map(|&(d, p)| d as f64 * p).sum()
    }

    /// `Lambda(x)`.
    pub fn polynomial(&self, x: f64) -> f64 {
        self.weights.iter().map(|&(d, p)| p * x.powi(d as i32)).sum()
    }

    pub fn sample_degree<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if self.weights.len() == 1 {
            return self.weights[0].0;
        }
        let u = rng.random::<f64>() * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.weights[i.min(self.weights.len() - 1)].0
    }
}

/// Named preset distributions for `K = 30` comparisons: three irregular
/// laws tuned for slotted systems and two regular ones.
pub fn reference_distributions() -> Vec<(&'static str, DegreeDistribution)> {
    let d = |w: &[(u32, f64)]| DegreeDistribution::new(w.to_vec()).expect("preset sums to one");
    vec![
        ("irregular-4", d(&[(2, 0.5102), (4, 0.4898)])),
        ("irregular-8", d(&[(2, 0.5), (3, 0.28), (8, 0.22)])),
        (
            "irregular-16",
            d(&[
                (2, 0.4977),
                (3, 0.2207),
                (4, 0.0381),
                (5, 0.0756),
                (6, 0.0398),
                (7, 0.0009),
                (8, 0.0088),
                (9, 0.0068),
                (11, 0.0030),
                (14, 0.0429),
                (15, 0.0081),
                (16, 0.0576),
            ]),
        ),
        ("regular-3", d(&[(3, 1.0)])),
        ("regular-4", d(&[(4, 1.0)])),
    ]
}

/// Which clean replica the decoder peels next.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PeelOrder {
    #[default]
    EarliestFirst,
    LatestFirst,
}

/// One decoding step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeelStep {
    pub iteration: u32,
    pub node: u32,
    /// Index into `Timeline::placements` of the clean replica used.
    pub replica: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SicResult {
    /// Indexed by node.
    pub decoded: Vec<bool>,
    /// Number of decoding steps; at most the node count.
    pub iterations: u32,
    pub peeling_trace: Vec<PeelStep>,
}

impl SicResult {
    pub fn decoded_nodes(&self) -> Vec<u32> {
        (0..self.decoded.len() as u32).filter(|&n| self.decoded[n as usize]).collect()
    }

    pub fn failures(&self) -> usize {
        self.decoded.iter().filter(|&&d| !d).count()
    }
}

/// Cross-node overlap lists, built with one sweep over sorted starts.
fn overlap_lists(timeline: &Timeline) -> Vec<Vec<usize>> {
    let p = &timeline.placements;
    let order = timeline.order_by_start();
    let mut adj = vec![Vec::new(); p.len()];
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if p[j].start - p[i].start >= timeline.packet_tp {
                break;
            }
            if p[j].node != p[i].node {
                adj[i].push(j);
                adj[j].push(i);
            }
        }
    }
    adj
}

/// SIC with the default earliest-clean-replica-first order.
pub fn sic_decode(timeline: &Timeline) -> SicResult {
    sic_decode_with_order(timeline, PeelOrder::EarliestFirst)
}

pub fn sic_decode_with_order(timeline: &Timeline, order: PeelOrder) -> SicResult {
    let p = &timeline.placements;
    let adj = overlap_lists(timeline);
    let mut by_node = vec![Vec::new(); timeline.nodes as usize];
    for (i, r) in p.iter().enumerate() {
        by_node[r.node as usize].push(i);
    }
    // Overlaps with replicas of undecoded other nodes.
    let mut live: Vec<usize> = adj.iter().map(Vec::len).collect();
    let key = |i: usize| -> (Reverse<u64>, Reverse<usize>) {
        // Nonnegative starts order like their bit patterns.
        let bits = p[i].start.to_bits();
        match order {
            PeelOrder::EarliestFirst => (Reverse(bits), Reverse(i)),
            PeelOrder::LatestFirst => (Reverse(u64::MAX - bits), Reverse(usize::MAX - i)),
        }
    };
    let mut heap: BinaryHeap<_> = (0..p.len()).filter(|&i| live[i] == 0).map(|i| (key(i), i)).collect();
    let mut decoded = vec![false; timeline.nodes as usize];
    let mut trace = Vec::new();
    while let Some((_, i)) = heap.pop() {
        let node = p[i].node;
        if decoded[node as usize] {
            continue;
        }
        decoded[node as usize] = true;
        trace.push(PeelStep { iteration: trace.len() as u32 + 1, node, replica: i });
        for &r in &by_node[node as usize] {
            for &j in &adj[r] {
                live[j] -= 1;
                if live[j] == 0 && !decoded[p[j].node as usize] {
                    heap.push((key(j), j));
                }
            }
        }
    }
    SicResult { decoded, iterations: trace.len() as u32, peeling_trace: trace }
}

/// Check that every step of `trace` uses a replica that is clean given the
/// nodes decoded before it, and return the decoded set.
pub fn replay_trace(timeline: &Timeline, trace: &[PeelStep]) -> Result<Vec<bool>> {
    let p = &timeline.placements;
    let mut decoded = vec![false; timeline.nodes as usize];
    for step in trace {
        let r = p.get(step.replica).ok_or_else(|| invalid(format!("replica {} out of range", step.replica)))?;
        if r.node != step.node || decoded[r.node as usize] {
            return Err(invalid(format!(
                "step {} decodes node {} twice or via a foreign replica",
                step.iteration, step.node
            )));
        }
        let blocked = p
            .iter()
            .any(|q| q.node != r.node && !decoded[q.node as usize] && (q.start - r.start).abs() < timeline.packet_tp);
        if blocked {
            return Err(invalid(format!("step {}: replica {} is not clean", step.iteration, step.replica)));
        }
        decoded[r.node as usize] = true;
    }
    Ok(decoded)
}

/// Timeline where each node draws its replica count from `dist`.
pub fn generate_coded_timeline<R: Rng + ?Sized>(
    k: u32,
    dist: &DegreeDistribution,
    t: f64,
    tp: f64,
    rng: &mut R,
) -> Result<Timeline> {
    validate_timing(t, tp)?;
    if dist.max_degree() as f64 * tp > t {
        return Err(invalid(format!("degree {} does not fit in the access window", dist.max_degree())));
    }
    let mut placements: Vec<Placement> = Vec::new();
    for node in 0..k {
        let d = dist.sample_degree(rng);
        place_replicas(node, d, t, tp, rng, &mut placements)?;
    }
    Ok(Timeline::new(placements, tp, t, k))
}

/// Monte Carlo per-node loss rate under SIC.
pub fn simulate_coded_rloss(
    k: u32,
    dist: &DegreeDistribution,
    t: f64,
    tp: f64,
    trials: u64,
    rng: &SimRng,
) -> Result<LossEstimate> {
    if k == 0 || trials == 0 {
        return Err(invalid("need at least one node and one trial"));
    }
    let parts = run_batches(rng, trials, 512, |g, _, count| -> Result<(u64, u64)> {
        let (mut sum, mut sq) = (0u64, 0u64);
        for _ in 0..count {
            let tl = generate_coded_timeline(k, dist, t, tp, g)?;
            let f = sic_decode(&tl).failures() as u64;
            sum += f;
            sq += f * f;
        }
        Ok((sum, sq))
    });
    let (sum, sq) = reduce_failures(parts)?;
    Ok(LossEstimate::from_rate(pooled_rate(sum, sq, trials, k as u64), trials))
}

/// One (distribution, K) grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub distribution: usize,
    pub k: u32,
    pub estimate: LossEstimate,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SustainableSweep {
    pub points: Vec<SweepPoint>,
    /// Per distribution, the largest grid `K` below the first grid point
    /// whose estimate exceeds the target.
    pub max_k: Vec<Option<u32>>,
}

/// Loss rate on a `K` grid for each distribution, and the largest `K`
/// meeting `r_target`.
pub fn sweep_sustainable_k(
    dists: &[DegreeDistribution],
    k_grid: &[u32],
    r_target: f64,
    t: f64,
    tp: f64,
    trials: u64,
    rng: &SimRng,
) -> Result<SustainableSweep> {
    let mut out = SustainableSweep::default();
    let mut ks = k_grid.to_vec();
    ks.sort_unstable();
    for (di, dist) in dists.iter().enumerate() {
        let mut best = None;
        let mut failed = false;
        for &k in &ks {
            let stream = rng.fork(((di as u64) << 32) | k as u64);
            let estimate = simulate_coded_rloss(k, dist, t, tp, trials, &stream)?;
            if !failed && estimate.r_loss <= r_target {
                best = Some(k);
            } else {
                failed = true;
            }
            out.points.push(SweepPoint { distribution: di, k, estimate });
        }
        out.max_k.push(best);
    }
    Ok(out)
}
