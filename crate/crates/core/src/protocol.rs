//! Two-hop interrupt protocol on a node graph.
//!
//! Emergency nodes send a primary interrupt; every other node that detects
//! one relays a secondary interrupt; any node detecting either signal keeps
//! quiet for the rest of the window. Detection on each link is a Bernoulli
//! draw with the detector's miss probability.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::rng::{run_batches, SimRng};
use crate::stats::{pooled_rate, RateEstimate};

/// Overall time-to-live of a warning, seconds.
pub const DEFAULT_TTL_S: f64 = 10e-3;
/// Interrupt phase length, seconds.
pub const DEFAULT_INTERRUPT_S: f64 = 0.5e-3;

/// Undirected graph with a designated emergency set.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeGraph {
    /// Sorted neighbour lists.
    adjacency: Vec<Vec<u32>>,
    emergency: Vec<bool>,
}

impl NodeGraph {
    pub fn new(nodes: usize, edges: &[(u32, u32)], emergency: &[u32]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); nodes];
        for &(a, b) in edges {
            if a == b {
                return Err(invalid(format!("self-loop at node {a}")));
            }
            if a as usize >= nodes || b as usize >= nodes {
                return Err(invalid(format!("edge ({a}, {b}) outside {nodes} nodes")));
            }
            adjacency[a as usize].push(b);
            adjacency[b as usize].push(a);
        }
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
        }
        let mut flags = vec![false; nodes];
        for &e in emergency {
            *flags.get_mut(e as usize).ok_or_else(|| invalid(format!("emergency node {e} outside {nodes} nodes")))? =
                true;
        }
        Ok(Self { adjacency, emergency: flags })
    }

    /// Parse an edge list. Each line is `u v`, `nodes <count>` or
    /// `emergency <id>...`; `#` starts a comment. Without a `nodes` line
    /// the count is one past the largest id.
    pub fn parse(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut emergency = Vec::new();
        let mut declared: Option<(usize, usize)> = None;
        let mut max_id: Option<(u32, usize)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let err = |message: String| Error::Parse { line: line_no, message };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tokens: Vec<&str> = line.split_whitespace().collect();
            let id = |s: &str| s.parse::<u32>().map_err(|e| err(format!("node id `{s}`: {e}")));
            match tokens[0] {
                "nodes" => {
                    let [_, n] = tokens[..] else {
                        return Err(err("expected `nodes <count>`".into()));
                    };
                    let n = n.parse::<usize>().map_err(|e| err(format!("node count `{n}`: {e}")))?;
                    declared = Some((n, line_no));
                }
                "emergency" => {
                    if tokens.len() < 2 {
                        return Err(err("expected `emergency <id>...`".into()));
                    }
                    for t in &tokens[1..] {
                        let v = id(t)?;
                        emergency.push(v);
                        max_id = max_id.max(Some((v, line_no)));
                    }
                }
                _ => {
                    let [a, b] = tokens[..] else {
                        return Err(err(format!("expected `u v`, got `{line}`")));
                    };
                    let (a, b) = (id(a)?, id(b)?);
                    if a == b {
                        return Err(err(format!("self-loop at node {a}")));
                    }
                    edges.push((a, b));
                    max_id = max_id.max(Some((a.max(b), line_no)));
                }
            }
        }
        let inferred = max_id.map_or(0, |(m, _)| m as usize + 1);
        let nodes = match (declared, max_id) {
            (Some((n, _)), Some((m, line))) if m as usize >= n => {
                return Err(Error::Parse { line, message: format!("node {m} exceeds declared count {n}") });
            }
            (Some((n, _)), _) => n,
            (None, _) => inferred,
        };
        Self::new(nodes, &edges, &emergency)
    }

    /// Edge list in the format read by [`NodeGraph::parse`].
    pub fn to_text(&self) -> String {
        let mut s = format!("nodes {}\n", self.len());
        let em = self.emergency_nodes();
        if !em.is_empty() {
            s.push_str("emergency");
            for e in em {
                s.push_str(&format!(" {e}"));
            }
            s.push('\n');
        }
        for (a, list) in self.adjacency.iter().enumerate() {
            for &b in list.iter().filter(|&&b| b as usize > a) {
                s.push_str(&format!("{a} {b}\n"));
            }
        }
        s
    }

    /// Emergency node 0, relays 1..=4, and outer nodes 5..=8 where outer
    /// node `5 + i` hears relays `1 + i` and `1 + (i + 1) % 4`.
    pub fn ring_example() -> Self {
        let mut edges: Vec<(u32, u32)> = (1..=4).map(|b| (0, b)).collect();
        for i in 0..4 {
            edges.push((1 + i, 5 + i));
            edges.push((1 + (i + 1) % 4, 5 + i));
        }
        Self::new(9, &edges, &[0]).expect("static graph")
    }

    /// One emergency centre with `leaves` neighbours.
    pub fn star(leaves: u32) -> Self {
        let edges: Vec<(u32, u32)> = (1..=leaves).map(|b| (0, b)).collect();
        Self::new(leaves as usize + 1, &edges, &[0]).expect("static graph")
    }

    /// Nodes uniform in a `width x height` rectangle, linked when within
    /// `radius`; `emergency_count` distinct nodes drawn uniformly.
    pub fn disk<R: Rng + ?Sized>(
        nodes: usize,
        width: f64,
        height: f64,
        radius: f64,
        emergency_count: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if emergency_count > nodes {
            return Err(invalid(format!("{emergency_count} emergency nodes among {nodes}")));
        }
        let pos: Vec<(f64, f64)> =
            (0..nodes).map(|_| (rng.random::<f64>() * width, rng.random::<f64>() * height)).collect();
        let mut edges = Vec::new();
        for a in 0..nodes {
            for b in a + 1..nodes {
                let (dx, dy) = (pos[a].0 - pos[b].0, pos[a].1 - pos[b].1);
                if dx * dx + dy * dy <= radius * radius {
                    edges.push((a as u32, b as u32));
                }
            }
        }
        let em: Vec<u32> = sample(rng, nodes, emergency_count).into_iter().map(|i| i as u32).collect();
        Self::new(nodes, &edges, &em)
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, v: u32) -> &[u32] {
        &self.adjacency[v as usize]
    }

    pub fn is_emergency(&self, v: u32) -> bool {
        self.emergency[v as usize]
    }

    pub fn emergency_nodes(&self) -> Vec<u32> {
        (0..self.len() as u32).filter(|&v| self.is_emergency(v)).collect()
    }

    /// Hop distance from the nearest emergency node; `None` if unreachable.
    pub fn hops_from_emergency(&self) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.len()];
        let mut queue = VecDeque::new();
        for v in self.emergency_nodes() {
            dist[v as usize] = Some(0);
            queue.push_back(v);
        }
        while let Some(v) = queue.pop_front() {
            let d = dist[v as usize].expect("queued nodes have a distance");
            for &u in self.neighbors(v) {
                if dist[u as usize].is_none() {
                    dist[u as usize] = Some(d + 1);
                    queue.push_back(u);
                }
            }
        }
        dist
    }
}

/// Final state of a node after the interrupt phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeStatus {
    Emergency,
    SilencedByPis,
    SilencedBySis,
    /// No interrupt detected, but a false alarm silenced it anyway.
    SilencedByFalseAlarm,
    Unaware,
}

impl NodeStatus {
    pub fn is_silenced(self) -> bool {
        matches!(self, Self::SilencedByPis | Self::SilencedBySis | Self::SilencedByFalseAlarm)
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Emergency => "EMERGENCY",
            Self::SilencedByPis => "SILENCED_BY_PIS",
            Self::SilencedBySis => "SILENCED_BY_SIS",
            Self::SilencedByFalseAlarm => "SILENCED_BY_FALSE_ALARM",
            Self::Unaware => "UNAWARE",
        }
    }
}

impl fmt::Display for NodeStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-link miss probabilities and the per-node false-alarm probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkModel {
    pub p_m_pis: f64,
    pub p_m_sis: f64,
    pub far: f64,
}

impl LinkModel {
    pub fn new(p_m_pis: f64, p_m_sis: f64, far: f64) -> Result<Self> {
        for (name, p) in [("p_m_pis", p_m_pis), ("p_m_sis", p_m_sis), ("far", far)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} = {p} is not a probability")));
            }
        }
        Ok(Self { p_m_pis, p_m_sis, far })
    }
}

/// Uniform draws for one run, fixed before any decision so that runs with
/// different probabilities share randomness.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDraws {
    /// `pis[v][i]`: draw for `v` hearing its `i`-th neighbour's primary signal.
    pub pis: Vec<Vec<f64>>,
    pub sis: Vec<Vec<f64>>,
    pub false_alarm: Vec<f64>,
}

impl LinkDraws {
    pub fn sample<R: Rng + ?Sized>(graph: &NodeGraph, rng: &mut R) -> Self {
        let mut pis = Vec::with_capacity(graph.len());
        let mut sis = Vec::with_capacity(graph.len());
        let mut false_alarm = Vec::with_capacity(graph.len());
        for v in 0..graph.len() as u32 {
            let n = graph.neighbors(v).len();
            pis.push((0..n).map(|_| rng.random::<f64>()).collect());
            sis.push((0..n).map(|_| rng.random::<f64>()).collect());
            false_alarm.push(rng.random::<f64>());
        }
        Self { pis, sis, false_alarm }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolOutcome {
    pub status: Vec<NodeStatus>,
    pub sis_senders: Vec<u32>,
    /// Primary signals detected per node.
    pub pis_detected: Vec<u32>,
    /// Secondary signals detected per node.
    pub sis_detected: Vec<u32>,
    /// Secondary senders within one hop of each node.
    pub sis_audible: Vec<u32>,
    pub interrupt_time: f64,
    pub access_time: f64,
}

impl ProtocolOutcome {
    pub fn silenced(&self) -> Vec<u32> {
        (0..self.status.len() as u32).filter(|&v| self.status[v as usize].is_silenced()).collect()
    }

    /// Nodes that transmit in the access phase.
    pub fn transmitters(&self) -> Vec<u32> {
        (0..self.status.len() as u32).filter(|&v| self.status[v as usize] == NodeStatus::Emergency).collect()
    }

    /// `node,status` lines with a header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("node,status,pis_detected,sis_detected,sis_audible\n");
        for (v, st) in self.status.iter().enumerate() {
            s.push_str(&format!(
                "{v},{st},{},{},{}\n",
                self.pis_detected[v], self.sis_detected[v], self.sis_audible[v]
            ));
        }
        s
    }
}

/// One interrupt round with detections decided by `draws`: a link detects
/// when its draw is below `1 - p_m`. Emergency nodes are busy sending and
/// neither detect nor relay.
pub fn run_interrupt_with(graph: &NodeGraph, links: &LinkModel, draws: &LinkDraws) -> ProtocolOutcome {
    let n = graph.len();
    let mut pis_detected = vec![0u32; n];
    for v in 0..n as u32 {
        if graph.is_emergency(v) {
            continue;
        }
        for (i, &u) in graph.neighbors(v).iter().enumerate() {
            if graph.is_emergency(u) && draws.pis[v as usize][i] < 1.0 - links.p_m_pis {
                pis_detected[v as usize] += 1;
            }
        }
    }
    let sender: Vec<bool> = pis_detected.iter().map(|&c| c > 0).collect();
    let sis_senders: Vec<u32> = (0..n as u32).filter(|&v| sender[v as usize]).collect();

    let mut sis_detected = vec![0u32; n];
    let mut sis_audible = vec![0u32; n];
    let mut status = vec![NodeStatus::Unaware; n];
    for v in 0..n as u32 {
        let vi = v as usize;
        for (i, &u) in graph.neighbors(v).iter().enumerate() {
            if sender[u as usize] {
                sis_audible[vi] += 1;
                if !graph.is_emergency(v) && draws.sis[vi][i] < 1.0 - links.p_m_sis {
                    sis_detected[vi] += 1;
                }
            }
        }
        status[vi] = if graph.is_emergency(v) {
            NodeStatus::Emergency
        } else if pis_detected[vi] > 0 {
            NodeStatus::SilencedByPis
        } else if sis_detected[vi] > 0 {
            NodeStatus::SilencedBySis
        } else if draws.false_alarm[vi] < links.far {
            NodeStatus::SilencedByFalseAlarm
        } else {
            NodeStatus::Unaware
        };
    }
    ProtocolOutcome {
        status,
        sis_senders,
        pis_detected,
        sis_detected,
        sis_audible,
        interrupt_time: DEFAULT_INTERRUPT_S,
        access_time: DEFAULT_TTL_S - DEFAULT_INTERRUPT_S,
    }
}

/// One interrupt round with fresh draws.
pub fn run_interrupt<R: Rng + ?Sized>(graph: &NodeGraph, links: &LinkModel, rng: &mut R) -> ProtocolOutcome {
    let draws = LinkDraws::sample(graph, rng);
    run_interrupt_with(graph, links, &draws)
}

/// Probability that a one-hop or a two-hop neighbour of the emergency set
/// stays unaware.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageRates {
    pub one_hop: RateEstimate,
    pub two_hop: RateEstimate,
}

/// Monte Carlo coverage failures with no false alarms.
pub fn coverage_failure_rate(
    graph: &NodeGraph,
    p_m_pis: f64,
    p_m_sis: f64,
    trials: u64,
    rng: &SimRng,
) -> Result<CoverageRates> {
    let links = LinkModel::new(p_m_pis, p_m_sis, 0.0)?;
    if trials == 0 {
        return Err(invalid("trials must be at least 1"));
    }
    let hops = graph.hops_from_emergency();
    let class = |h: u32| -> Vec<usize> { (0..graph.len()).filter(|&v| hops[v] == Some(h)).collect() };
    let (one, two) = (class(1), class(2));
    let parts = run_batches(rng, trials, 4096, |g, _, count| {
        let mut s = [0u64; 4];
        for _ in 0..count {
            let out = run_interrupt(graph, &links, g);
            let f1 = one.iter().filter(|&&v| !out.status[v].is_silenced()).count() as u64;
            let f2 = two.iter().filter(|&&v| !out.status[v].is_silenced()).count() as u64;
            s[0] += f1;
            s[1] += f1 * f1;
            s[2] += f2;
            s[3] += f2 * f2;
        }
        s
    });
    let mut s = [0u64; 4];
    for p in parts {
        for (a, b) in s.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(CoverageRates {
        one_hop: pooled_rate(s[0], s[1], trials, one.len() as u64),
        two_hop: pooled_rate(s[2], s[3], trials, two.len() as u64),
    })
}

/// Timing budget of one warning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetReport {
    pub pass: bool,
    pub t_interrupt: f64,
    pub t_access: f64,
    pub ttl: f64,
    /// Airtime of the interrupt signal inside the interrupt phase, if given.
    pub signal_duration: Option<f64>,
    /// Interrupt phase left for detection and relaying.
    pub processing: Option<f64>,
    pub slack: f64,
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = |s: f64| s * 1e3;
        write!(f, "interrupt {:.5} ms", ms(self.t_interrupt))?;
        if let (Some(sig), Some(p)) = (self.signal_duration, self.processing) {
            write!(f, " (signal {:.5} ms + processing {:.5} ms)", ms(sig), ms(p))?;
        }
        write!(
            f,
            " + access {:.5} ms vs ttl {:.5} ms: {}",
            ms(self.t_access),
            ms(self.ttl),
            if self.pass { "pass" } else { "FAIL" }
        )
    }
}

// Absorbs rounding in sums like 0.5e-3 + 9.5e-3.
const BUDGET_EPS: f64 = 1e-12;

/// `t_interrupt + t_access <= ttl`.
pub fn budget_check(t_interrupt: f64, t_access: f64, ttl: f64) -> BudgetReport {
    let slack = ttl - (t_interrupt + t_access);
    BudgetReport {
        pass: slack >= -BUDGET_EPS * ttl.abs().max(1e-3) && t_interrupt >= 0.0 && t_access >= 0.0,
        t_interrupt,
        t_access,
        ttl,
        signal_duration: None,
        processing: None,
        slack,
    }
}

/// [`budget_check`] that also requires the interrupt signal to fit inside
/// the interrupt phase.
pub fn budget_check_with_signal(signal_duration: f64, t_interrupt: f64, t_access: f64, ttl: f64) -> BudgetReport {
    let mut r = budget_check(t_interrupt, t_access, ttl);
    let processing = t_interrupt - signal_duration;
    r.pass &= signal_duration >= 0.0 && processing >= -BUDGET_EPS * t_interrupt;
    r.signal_duration = Some(signal_duration);
    r.processing = Some(processing);
    r
}
