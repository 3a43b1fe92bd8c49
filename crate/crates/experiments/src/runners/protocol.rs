//! Interrupt round on the ring example (or a supplied edge list) and on
//! a random disk graph, with coverage statistics and the timing budget.

use umac_core::detector::{signal_duration_s, RiceScale};
use umac_core::protocol::{
    budget_check_with_signal, coverage_failure_rate, run_interrupt, LinkModel, NodeGraph, ProtocolOutcome,
};
use umac_core::SimRng;

use crate::config::{Fig6Config, ProtocolConfig};
use crate::output::{num, Check, CsvTable};
use crate::runners::fig6::analytic_point;
use crate::{Config, Outcome, RunError, RunResult};

pub const OUTCOME_UNITS: &str =
    "node: index; status: final state; pis_detected, sis_detected, sis_audible: signal counts";
pub const COVERAGE_UNITS: &str = "p_m_*: per-link miss probability; *_rate: fraction of one-hop or two-hop nodes \
                                  left unaware; *_ci_*: 95% bounds with design effect; trials: interrupt rounds";
pub const COVERAGE_HEADER: &str =
    "graph,p_m_pis,p_m_sis,one_hop_rate,one_hop_ci_lo,one_hop_ci_hi,two_hop_rate,two_hop_ci_lo,two_hop_ci_hi,trials";

fn outcome_table(name: &str, o: &ProtocolOutcome) -> CsvTable {
    let csv = o.to_csv();
    let mut lines = csv.lines();
    let mut t = CsvTable::new(name, OUTCOME_UNITS, lines.next().unwrap_or_default());
    t.rows = lines.map(String::from).collect();
    t
}

/// Miss probability per link: the configured value, or the stated-scale
/// analytic value at the configured operating point, which bounds the
/// calibrated detector's miss rate from above.
pub fn link_miss(c: &ProtocolConfig) -> RunResult<(f64, f64)> {
    let analytic = || -> RunResult<f64> {
        let f = Fig6Config { n: c.n, alpha: c.alpha, ..Fig6Config::default() };
        analytic_point(&f, c.q, c.sinr_db, RiceScale::Stated)
    };
    let pis = match c.p_m_pis {
        Some(p) => p,
        None => analytic()?,
    };
    let sis = match c.p_m_sis {
        Some(p) => p,
        None => pis,
    };
    Ok((pis, sis))
}

/// Nodes whose hop distance to an emergency node is 1 or 2.
pub fn two_hop_set(g: &NodeGraph) -> Vec<u32> {
    g.hops_from_emergency()
        .iter()
        .enumerate()
        .filter(|(_, h)| matches!(h, Some(1 | 2)))
        .map(|(v, _)| v as u32)
        .collect()
}

pub fn run(cfg: &Config) -> RunResult<Outcome> {
    let c = &cfg.protocol_demo;
    if c.trials == 0 {
        return Err(RunError::config("protocol_demo: trials must be at least 1"));
    }
    let graph = match &c.graph {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| RunError::config(format!("cannot read {}: {e}", p.display())))?;
            NodeGraph::parse(&text).map_err(|e| RunError::config(format!("{}: {e}", p.display())))?
        }
        None => NodeGraph::ring_example(),
    };
    let (p_pis, p_sis) = link_miss(c)?;
    let links = LinkModel::new(p_pis, p_sis, c.far)?;
    let root = SimRng::new(cfg.seed);
    let mut out = Outcome::default();
    out.notes.push(format!("link miss probability: primary {}, secondary {}", num(p_pis), num(p_sis)));

    let perfect = run_interrupt(&graph, &LinkModel::new(0.0, 0.0, 0.0)?, &mut root.fork(0).generator());
    let expected = two_hop_set(&graph);
    out.checks.push(Check::new(
        "perfect detection silences exactly the two-hop neighborhood",
        perfect.silenced() == expected,
        format!("silenced {:?}, expected {:?}", perfect.silenced(), expected),
    ));
    out.tables.push(outcome_table("protocol_graph", &run_interrupt(&graph, &links, &mut root.fork(1).generator())));

    let mut g = root.fork(2).generator();
    let disk =
        NodeGraph::disk(c.disk_nodes, c.disk_width_m, c.disk_height_m, c.disk_range_m, c.disk_emergency, &mut g)?;
    out.tables.push(outcome_table("protocol_disk", &run_interrupt(&disk, &links, &mut g)));

    let trials = cfg.cap_trials(c.trials);
    let mut cov = CsvTable::new("protocol_coverage", COVERAGE_UNITS, COVERAGE_HEADER);
    for (label, gr, stream) in [("graph", &graph, 3u64), ("disk", &disk, 4)] {
        let r = coverage_failure_rate(gr, p_pis, p_sis, trials, &root.fork(stream))?;
        cov.rows.push(format!(
            "{label},{},{},{},{},{},{},{},{},{trials}",
            num(p_pis),
            num(p_sis),
            num(r.one_hop.rate),
            num(r.one_hop.ci_lo),
            num(r.one_hop.ci_hi),
            num(r.two_hop.rate),
            num(r.two_hop.ci_lo),
            num(r.two_hop.ci_hi)
        ));
    }
    out.tables.push(cov);

    let budget = budget_check_with_signal(signal_duration_s(c.n, c.q), c.t_interrupt_s, c.t_access_s, c.ttl_s);
    out.notes.push(format!("budget: {budget}"));
    out.checks.push(Check::new("timing budget", budget.pass, budget.to_string()));
    Ok(out)
}
