//! TOML configuration: top-level run settings plus one table per
//! experiment. Every field has a default, so an empty file is valid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use umac_core::aloha::{DEFAULT_HORIZON_S, DEFAULT_PACKET_S};
use umac_core::protocol::{DEFAULT_INTERRUPT_S, DEFAULT_TTL_S};
use umac_core::stats::Z95;

use crate::{Experiment, RunError, RunResult, FAST_TRIALS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub out: PathBuf,
    /// Cap every trial count at [`FAST_TRIALS`].
    pub fast: bool,
    pub fig6: Fig6Config,
    pub aloha_sweep: AlohaConfig,
    pub coded_sweep: CodedConfig,
    pub table2: Table2Config,
    pub protocol_demo: ProtocolConfig,
    pub custom: CustomConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 1,
            out: PathBuf::from("out"),
            fast: false,
            fig6: Fig6Config::default(),
            aloha_sweep: AlohaConfig::default(),
            coded_sweep: CodedConfig::default(),
            table2: Table2Config::default(),
            protocol_demo: ProtocolConfig::default(),
            custom: CustomConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> RunResult<Self> {
        toml::from_str(text).map_err(|e| RunError::config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> RunResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunError::config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            RunError::Config(m) => RunError::config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        if let Some(base) = path.parent() {
            cfg.rebase(base);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.coded_sweep.files.iter_mut().for_each(fix);
        self.table2.files.iter_mut().for_each(fix);
        if let Some(g) = self.protocol_demo.graph.as_mut() {
            fix(g);
        }
        if let Some(d) = self.custom.distribution.as_mut() {
            fix(d);
        }
    }

    /// Applies a trial count after the `--fast` cap.
    pub fn cap_trials(&self, trials: u64) -> u64 {
        if self.fast {
            trials.min(FAST_TRIALS)
        } else {
            trials
        }
    }

    /// The run settings and the section for `experiment`, as TOML.
    pub fn section_echo(&self, experiment: Experiment) -> RunResult<String> {
        fn echo<S: Serialize>(cfg: &Config, name: &str, s: &S) -> RunResult<String> {
            let to = |e: toml::ser::Error| RunError::config(e.to_string());
            let mut t = toml::Table::new();
            t.insert("seed".into(), toml::Value::try_from(cfg.seed).map_err(to)?);
            t.insert("out".into(), toml::Value::try_from(&cfg.out).map_err(to)?);
            t.insert("fast".into(), toml::Value::Boolean(cfg.fast));
            t.insert(name.into(), toml::Value::try_from(s).map_err(to)?);
            toml::to_string(&t).map_err(to)
        }
        let name = experiment.name();
        match experiment {
            Experiment::Fig6 => echo(self, name, &self.fig6),
            Experiment::AlohaSweep => echo(self, name, &self.aloha_sweep),
            Experiment::CodedSweep => echo(self, name, &self.coded_sweep),
            Experiment::Table2 => echo(self, name, &self.table2),
            Experiment::ProtocolDemo => echo(self, name, &self.protocol_demo),
            Experiment::Custom => echo(self, name, &self.custom),
        }
    }
}

/// Smallest trial count whose 95% interval half-width is `rel` times a
/// true rate `p`, by the normal approximation.
pub fn trials_for_relative_ci(p: f64, rel: f64) -> u64 {
    if !(p > 0.0 && p < 1.0 && rel > 0.0) {
        return 1;
    }
    (Z95 * Z95 * (1.0 - p) / (rel * rel * p)).ceil() as u64
}

pub(crate) fn require_nonempty<T>(what: &str, v: &[T]) -> RunResult<()> {
    if v.is_empty() {
        return Err(RunError::config(format!("{what} grid is empty")));
    }
    Ok(())
}

pub(crate) fn require_trials(what: &str, t: Option<u64>) -> RunResult<()> {
    if t == Some(0) {
        return Err(RunError::config(format!("{what}: trials must be at least 1")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum VarianceChoice {
    #[default]
    Approx,
    Exact,
    /// Exact form averaged over the OFDM phase.
    Averaged,
}

/// Threshold rule of the simulated detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ScaleChoice {
    /// False-alarm rate equals `alpha`.
    #[default]
    Calibrated,
    /// Closed forms at face value; false-alarm rate `alpha^2`.
    Stated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Fig6Config {
    /// ZC length.
    pub n: usize,
    /// Code lengths, one curve each.
    pub q: Vec<usize>,
    pub root: usize,
    pub alpha: f64,
    pub sinr_db: Vec<f64>,
    pub variance: VarianceChoice,
    pub threshold: ScaleChoice,
    pub simulate: bool,
    /// Points whose predicted miss rate is below this are not simulated.
    pub sim_min_mdr: f64,
    /// Fixed trials per hypothesis; unset means enough for `rel_ci`.
    pub trials: Option<u64>,
    pub max_trials: u64,
    pub rel_ci: f64,
    /// `[q, sinr_db]` points whose stated-scale miss rate must not exceed
    /// `anchor_mdr` by more than `anchor_decades` under `--check`.
    pub anchors: Vec<(usize, f64)>,
    pub anchor_mdr: f64,
    pub anchor_decades: f64,
}

impl Default for Fig6Config {
    fn default() -> Self {
        Self {
            n: 1024,
            q: vec![31, 63, 127],
            root: 1,
            alpha: 1e-7,
            sinr_db: (0..=16).map(|i| -36.0 + i as f64).collect(),
            variance: VarianceChoice::Approx,
            threshold: ScaleChoice::Calibrated,
            simulate: true,
            sim_min_mdr: 1e-2,
            trials: None,
            max_trials: 4_000,
            rel_ci: 0.2,
            anchors: vec![(31, -25.4), (63, -28.2), (127, -31.6)],
            anchor_mdr: 1e-6,
            anchor_decades: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlohaConfig {
    pub k: Vec<u32>,
    pub d: Vec<u32>,
    /// Access window, s.
    pub horizon_s: f64,
    /// Packet airtime, s.
    pub packet_s: f64,
    /// Loss target for the sustainable-population figure.
    pub r_target: f64,
    pub simulate: bool,
    /// Fixed trials per point; unset means enough node-trials for
    /// `rel_ci` at `r_target`.
    pub trials: Option<u64>,
    pub rel_ci: f64,
}

impl Default for AlohaConfig {
    fn default() -> Self {
        Self {
            k: vec![10, 20, 30],
            d: (1..=30).collect(),
            horizon_s: DEFAULT_HORIZON_S,
            packet_s: DEFAULT_PACKET_S,
            r_target: 1e-4,
            simulate: true,
            trials: None,
            rel_ci: 0.2,
        }
    }
}

/// Coded sweep settings. The coded sweep and the table share the shape
/// but not the defaults, hence two types.
macro_rules! coded_config {
    ($name:ident, $defaults:expr) => {
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        #[serde(default, deny_unknown_fields)]
        pub struct $name {
            pub k: Vec<u32>,
            /// Preset names or `regular-<d>`.
            pub distributions: Vec<String>,
            /// Extra degree-probability files, identified by file stem.
            pub files: Vec<PathBuf>,
            pub horizon_s: f64,
            pub packet_s: f64,
            pub r_target: f64,
            /// Fixed trials per point; unset means enough node-trials for
            /// `rel_ci` at `design_rate`.
            pub trials: Option<u64>,
            pub design_rate: f64,
            pub rel_ci: f64,
        }

        impl Default for $name {
            fn default() -> Self {
                let (k, distributions, design_rate): (Vec<u32>, Vec<String>, f64) = $defaults;
                Self {
                    k,
                    distributions,
                    files: Vec::new(),
                    horizon_s: DEFAULT_HORIZON_S,
                    packet_s: DEFAULT_PACKET_S,
                    r_target: 1e-4,
                    trials: None,
                    design_rate,
                    rel_ci: 0.2,
                }
            }
        }
    };
}

coded_config!(CodedConfig, {
    let mut ids: Vec<String> = (1..=8).map(|d| format!("regular-{d}")).collect();
    ids.extend(["irregular-4", "irregular-8", "irregular-16"].map(String::from));
    (vec![10, 20, 30], ids, 1e-4)
});

coded_config!(Table2Config, {
    let ids = umac_core::coded::reference_distributions().iter().map(|(n, _)| n.to_string()).collect();
    (vec![30], ids, 2e-5)
});

impl From<Table2Config> for CodedConfig {
    fn from(t: Table2Config) -> Self {
        let Table2Config { k, distributions, files, horizon_s, packet_s, r_target, trials, design_rate, rel_ci } = t;
        Self { k, distributions, files, horizon_s, packet_s, r_target, trials, design_rate, rel_ci }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    /// Edge-list file replacing the built-in ring example.
    pub graph: Option<PathBuf>,
    /// Per-link miss probabilities; unset means the analytic detector
    /// value at (`n`, `q`, `alpha`, `sinr_db`).
    pub p_m_pis: Option<f64>,
    pub p_m_sis: Option<f64>,
    pub n: usize,
    pub q: usize,
    pub alpha: f64,
    pub sinr_db: f64,
    /// Per-node false-alarm probability in the outcome demo.
    pub far: f64,
    pub disk_nodes: usize,
    pub disk_width_m: f64,
    pub disk_height_m: f64,
    pub disk_range_m: f64,
    pub disk_emergency: usize,
    pub trials: u64,
    pub t_interrupt_s: f64,
    pub t_access_s: f64,
    pub ttl_s: f64,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            graph: None,
            p_m_pis: None,
            p_m_sis: None,
            n: 1024,
            q: 63,
            alpha: 1e-7,
            sinr_db: -28.2,
            far: 0.0,
            disk_nodes: 60,
            disk_width_m: 1000.0,
            disk_height_m: 200.0,
            disk_range_m: 150.0,
            disk_emergency: 2,
            trials: 100_000,
            t_interrupt_s: DEFAULT_INTERRUPT_S,
            t_access_s: DEFAULT_HORIZON_S,
            ttl_s: DEFAULT_TTL_S,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CustomConfig {
    /// Degree-probability file; required.
    pub distribution: Option<PathBuf>,
    pub k: Vec<u32>,
    pub horizon_s: f64,
    pub packet_s: f64,
    pub r_target: f64,
    pub trials: Option<u64>,
    pub design_rate: f64,
    pub rel_ci: f64,
}

impl Default for CustomConfig {
    fn default() -> Self {
        let c = CodedConfig::default();
        Self {
            distribution: None,
            k: vec![30],
            horizon_s: c.horizon_s,
            packet_s: c.packet_s,
            r_target: c.r_target,
            trials: None,
            design_rate: c.design_rate,
            rel_ci: c.rel_ci,
        }
    }
}
