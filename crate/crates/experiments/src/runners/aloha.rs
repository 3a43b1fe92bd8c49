//! Multi-replica ALOHA loss over a (K, d) grid: closed form, Poisson
//! approximation and simulation.

use umac_core::aloha::{
    analytic_rloss, max_degree, max_sustainable_nodes, max_sustainable_nodes_integer, optimal_degree, poisson_rloss,
    simulate_rloss, AccessParams,
};
use umac_core::stats::family_z;
use umac_core::SimRng;

use crate::config::{require_nonempty, require_trials, trials_for_relative_ci, AlohaConfig};
use crate::output::{num, Check, CsvTable};
use crate::{Config, Outcome, RunError, RunResult};

pub const UNITS: &str = "k: nodes; d: replicas per node; rloss_*: per-node loss probability; \
                         ci_*: 95% bounds with design effect; trials: access windows (0 = not simulated)";
pub const HEADER: &str = "k,d,rloss_analytic,rloss_poisson,rloss_sim,ci_lo,ci_hi,trials";

/// Reference loss minimizers `(K, d, tolerance)` for the default timing.
pub const REFERENCE_OPTIMA: [(u32, u32, u32); 3] = [(10, 15, 0), (20, 7, 0), (30, 5, 1)];

/// Reference sustainable population at loss 1e-4: integer and continuous.
pub const REFERENCE_SUSTAINABLE: (u32, f64, f64) = (11, 11.32, 0.01);

pub fn validate(c: &AlohaConfig) -> RunResult<()> {
    require_nonempty("aloha_sweep k", &c.k)?;
    require_nonempty("aloha_sweep d", &c.d)?;
    require_trials("aloha_sweep", c.trials)?;
    AccessParams::new(1, 1).with_timing(c.horizon_s, c.packet_s).validate()?;
    let d_max = max_degree(c.horizon_s, c.packet_s);
    if let Some(&d) = c.d.iter().find(|&&d| d == 0 || d > d_max) {
        return Err(RunError::config(format!("aloha_sweep: degree {d} outside 1..={d_max}")));
    }
    if c.k.contains(&0) {
        return Err(RunError::config("aloha_sweep: k must be at least 1"));
    }
    Ok(())
}

pub fn run(cfg: &Config) -> RunResult<Outcome> {
    let c = &cfg.aloha_sweep;
    validate(c)?;
    let root = SimRng::new(cfg.seed);
    let mut table = CsvTable::new("aloha_sweep", UNITS, HEADER);
    let mut out = Outcome::default();
    let default_timing =
        c.horizon_s == umac_core::aloha::DEFAULT_HORIZON_S && c.packet_s == umac_core::aloha::DEFAULT_PACKET_S;
    // Conservativity checks hold jointly: the bounds are family-wise 95%.
    let z = family_z(if c.simulate { c.k.len() * c.d.len() } else { 1 });
    for &k in &c.k {
        let mut best: Option<(u32, f64)> = None;
        let mut sims = Vec::new();
        for &d in &c.d {
            let p = AccessParams::new(k, d).with_timing(c.horizon_s, c.packet_s);
            let (ra, rp) = (analytic_rloss(&p), poisson_rloss(&p));
            if best.is_none_or(|(_, r)| ra < r) {
                best = Some((d, ra));
            }
            let (mut sim, mut lo, mut hi, mut trials) = (f64::NAN, f64::NAN, f64::NAN, 0);
            if c.simulate {
                let node_trials = trials_for_relative_ci(c.r_target, c.rel_ci);
                trials = cfg.cap_trials(c.trials.unwrap_or(node_trials.div_ceil(k as u64)));
                let est = simulate_rloss(&p, trials, &root.fork(((k as u64) << 32) | d as u64))?;
                (sim, lo, hi) = (est.r_loss, est.ci_lo, est.ci_hi);
                sims.push((d, ra, est));
            }
            table.rows.push(format!("{k},{d},{},{},{},{},{},{trials}", num(ra), num(rp), num(sim), num(lo), num(hi)));
        }
        let (d_best, r_best) = best.expect("nonempty degree grid");
        out.notes.push(format!(
            "K={k}: argmin d = {d_best} (analytic {}), continuous optimum {:.3}",
            num(r_best),
            optimal_degree(k, c.horizon_s, c.packet_s)
        ));
        for (d, ra, est) in &sims {
            let lo = est.lower_bound(z);
            out.checks.push(Check::new(
                format!("K={k} d={d} simulation not above closed form"),
                lo <= *ra,
                format!("sim {} (family-wise lower bound {}) vs {}", num(est.r_loss), num(lo), num(*ra)),
            ));
        }
        if let Some((_, _, est)) = sims.iter().find(|(d, _, _)| *d == d_best) {
            out.notes.push(format!("K={k}: simulated loss at argmin {}", num(est.r_loss)));
        }
        if default_timing {
            if let Some(&(_, d_ref, tol)) = REFERENCE_OPTIMA.iter().find(|r| r.0 == k) {
                let covered = c.d.contains(&d_ref.saturating_sub(tol).max(1)) && c.d.contains(&(d_ref + tol));
                if covered {
                    out.checks.push(Check::new(
                        format!("K={k} loss minimizer"),
                        d_best.abs_diff(d_ref) <= tol,
                        format!("argmin {d_best} vs reference {d_ref} +- {tol}"),
                    ));
                }
            }
        }
    }
    let k_cont = max_sustainable_nodes(c.r_target, c.horizon_s, c.packet_s);
    let k_int = max_sustainable_nodes_integer(c.r_target, c.horizon_s, c.packet_s);
    out.notes.push(format!(
        "sustainable nodes at loss {}: continuous {k_cont:.4}, integer {}",
        num(c.r_target),
        k_int.map_or("none".to_string(), |k| k.to_string())
    ));
    if default_timing && c.r_target == 1e-4 {
        let (ki, kc, tol) = REFERENCE_SUSTAINABLE;
        out.checks.push(Check::new(
            "sustainable nodes at loss 1e-4",
            k_int == Some(ki) && (k_cont - kc).abs() <= tol,
            format!("integer {k_int:?}, continuous {k_cont:.4} vs {ki} and {kc} +- {tol}"),
        ));
    }
    out.tables.push(table);
    Ok(out)
}
