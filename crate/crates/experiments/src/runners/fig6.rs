//! Miss rate against SINR: analytic curve per code length plus simulated
//! points where the miss rate is large enough to measure.

use umac_core::channel::ChannelParams;
use umac_core::detector::{
    simulate_detection, DetectionOptions, DetectorConfig, DetectorStats, RiceScale, VarianceModel,
};
use umac_core::signal::InterruptKind;
use umac_core::stats::family_z;
use umac_core::SimRng;

use crate::config::{
    require_nonempty, require_trials, trials_for_relative_ci, Fig6Config, ScaleChoice, VarianceChoice,
};
use crate::output::{num, Check, CsvTable};
use crate::{Config, Outcome, RunError, RunResult};

pub const UNITS: &str = "sinr_db: dB; q, n: points; alpha, mdr_*, far_sim: probability; \
                         mdr_stated: closed form at face value; mdr_calibrated: closed form at half the accumulator power; \
                         mdr_ci_*: 95% Wilson bounds; trials: windows per hypothesis (0 = not simulated)";
pub const HEADER: &str = "sinr_db,q,n,alpha,mdr_stated,mdr_calibrated,mdr_sim,mdr_ci_lo,mdr_ci_hi,far_sim,trials";

fn model(v: VarianceChoice) -> VarianceModel {
    match v {
        VarianceChoice::Approx => VarianceModel::Approximate,
        VarianceChoice::Exact => VarianceModel::Exact,
        VarianceChoice::Averaged => VarianceModel::PhaseAveraged,
    }
}

pub fn scale(s: ScaleChoice) -> RiceScale {
    match s {
        ScaleChoice::Calibrated => RiceScale::Calibrated,
        ScaleChoice::Stated => RiceScale::Stated,
    }
}

/// Analytic miss rate at one (`q`, SINR) point.
pub fn analytic_point(c: &Fig6Config, q: usize, sinr_db: f64, rule: RiceScale) -> RunResult<f64> {
    let det = DetectorConfig::<f64>::preset(InterruptKind::Primary, c.n, q, c.root, c.alpha)?;
    let ch = ChannelParams::at_sinr_db(sinr_db)?;
    Ok(DetectorStats::compute(&det, &ch, model(c.variance), rule)?.analytic_mdr(&det, &ch)?)
}

pub fn validate(c: &Fig6Config) -> RunResult<()> {
    require_nonempty("fig6 q", &c.q)?;
    require_nonempty("fig6 sinr_db", &c.sinr_db)?;
    require_trials("fig6", c.trials)?;
    if c.max_trials == 0 {
        return Err(RunError::config("fig6: max_trials must be at least 1"));
    }
    if !(c.alpha > 0.0 && c.alpha < 1.0) {
        return Err(RunError::config(format!("fig6: alpha must lie in (0, 1), got {}", c.alpha)));
    }
    Ok(())
}

pub fn run(cfg: &Config) -> RunResult<Outcome> {
    let c = &cfg.fig6;
    validate(c)?;
    let root = SimRng::new(cfg.seed);
    let opts =
        DetectionOptions { variance: model(c.variance), scale: scale(c.threshold), ..DetectionOptions::default() };
    let mut table = CsvTable::new("fig6", UNITS, HEADER);
    let mut out = Outcome::default();
    let mut sim_points = Vec::new();
    for (qi, &q) in c.q.iter().enumerate() {
        let det = DetectorConfig::<f64>::preset(InterruptKind::Primary, c.n, q, c.root, c.alpha)?;
        for (si, &sinr) in c.sinr_db.iter().enumerate() {
            let ch = ChannelParams::at_sinr_db(sinr)?;
            let at = |rule| -> RunResult<f64> {
                Ok(DetectorStats::compute(&det, &ch, opts.variance, rule)?.analytic_mdr(&det, &ch)?)
            };
            let (stated, calibrated) = (at(RiceScale::Stated)?, at(RiceScale::Calibrated)?);
            let predicted = if opts.scale == RiceScale::Stated { stated } else { calibrated };
            let (mut sim, mut lo, mut hi, mut far, mut trials) = (f64::NAN, f64::NAN, f64::NAN, f64::NAN, 0);
            if c.simulate && predicted >= c.sim_min_mdr {
                let rule = trials_for_relative_ci(predicted, c.rel_ci).min(c.max_trials);
                trials = cfg.cap_trials(c.trials.unwrap_or(rule));
                let rng = root.fork(((qi as u64) << 32) | si as u64);
                let rep = simulate_detection(&det, &ch, trials, &rng, &opts)?;
                (sim, lo, hi, far) = (rep.mdr_hat.rate, rep.mdr_hat.ci_lo, rep.mdr_hat.ci_hi, rep.far_hat.rate);
                sim_points.push((q, sinr, stated, rep.mdr_hat));
            }
            table.rows.push(format!(
                "{sinr},{q},{},{},{},{},{},{},{},{},{trials}",
                c.n,
                num(c.alpha),
                num(stated),
                num(calibrated),
                num(sim),
                num(lo),
                num(hi),
                num(far)
            ));
        }
    }
    for &(q, sinr) in &c.anchors {
        let mdr = analytic_point(c, q, sinr, RiceScale::Stated)?;
        let calibrated = analytic_point(c, q, sinr, RiceScale::Calibrated)?;
        let limit = c.anchor_mdr * 10f64.powf(c.anchor_decades);
        out.notes.push(format!("miss rate at Q={q}, {sinr} dB: stated {}, calibrated {}", num(mdr), num(calibrated)));
        out.checks.push(Check::new(
            format!("analytic miss rate Q={q} at {sinr} dB"),
            mdr <= limit,
            format!("{} vs limit {}", num(mdr), num(limit)),
        ));
    }
    let z = family_z(sim_points.len());
    for (q, sinr, mdr, est) in sim_points {
        let lo = est.lower_bound(z);
        out.checks.push(Check::new(
            format!("simulated miss rate Q={q} at {sinr} dB not above stated analytic"),
            lo <= mdr,
            format!("sim {} (family-wise lower bound {}) vs analytic {}", num(est.rate), num(lo), num(mdr)),
        ));
    }
    out.tables.push(table);
    Ok(out)
}
