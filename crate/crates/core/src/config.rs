//! Scenario configuration, read from and written to TOML.
//!
//! ```toml
//! [scenario]
//! id = "consensus-open"
//! scale = "desk"
//! horizon = 1000
//! seed = 1
//! reps = 5
//!
//! [graph]
//! n0 = 50
//! edge_prob = 0.1
//!
//! [churn]
//! kind = "bernoulli-schedule"
//! phases = [{ until = 250, join = 0.01, leave = 0.01 }, { join = 0.05, leave = 0.05 }]
//! attachment = { kind = "bernoulli", p = 0.1 }
//!
//! [costs]
//! family = "consensus-avg"
//! signal_lo = 0.0
//! signal_hi = 5.0
//! sigma = 0.2
//!
//! [admm]
//! alpha = 0.99
//! rho = 0.5
//! init = "local-optimum"
//! x0_range = [0.0, 500.0]
//!
//! [run]
//! burn_in = 0.5
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::admm::{AdmmParams, InitVariant};
use crate::churn::{Attachment, ChurnProcess};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Paper,
    #[default]
    Desk,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "full" => Ok(Scale::Paper),
            "desk" => Ok(Scale::Desk),
            other => Err(Error::InvalidConfig(format!("unknown scale '{other}' (expected paper or desk)"))),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Paper => "paper",
            Scale::Desk => "desk",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub id: String,
    #[serde(default)]
    pub scale: Scale,
    /// Number of ticks after the initial state.
    pub horizon: u64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub reps: usize,
}

fn default_seed() -> u64 {
    1
}

fn default_reps() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphSection {
    pub n0: usize,
    /// Erdos-Renyi edge probability of the initial graph.
    pub edge_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChurnSection {
    #[serde(flatten)]
    pub process: ChurnProcess,
    #[serde(default)]
    pub attachment: Attachment,
    #[serde(default = "default_min_agents")]
    pub min_agents: usize,
}

fn default_min_agents() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostFamily {
    ConsensusAvg,
    ConsensusMax,
    ConsensusMedian,
    Logistic,
}

impl CostFamily {
    pub fn is_consensus(self) -> bool {
        !matches!(self, CostFamily::Logistic)
    }
}

/// Signal keys apply to consensus families, data keys to `logistic`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostsSection {
    pub family: CostFamily,
    #[serde(default)]
    pub signal_lo: f64,
    #[serde(default = "default_signal_hi")]
    pub signal_hi: f64,
    /// Largest per-tick signal step.
    #[serde(default)]
    pub sigma: f64,
    /// Bound on how far a newcomer's signal lies from the rest; defaults to
    /// the signal span.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega: Option<f64>,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_dim")]
    pub dim: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_separation")]
    pub separation: f64,
    #[serde(default = "default_heterogeneity")]
    pub heterogeneity: f64,
}

fn default_signal_hi() -> f64 {
    5.0
}
fn default_samples() -> usize {
    20
}
fn default_dim() -> usize {
    5
}
fn default_ridge() -> f64 {
    0.05
}
fn default_separation() -> f64 {
    1.0
}
fn default_heterogeneity() -> f64 {
    0.5
}

impl CostsSection {
    pub fn consensus(family: CostFamily, lo: f64, hi: f64, sigma: f64) -> Self {
        Self {
            family,
            signal_lo: lo,
            signal_hi: hi,
            sigma,
            omega: None,
            samples: default_samples(),
            dim: default_dim(),
            ridge: default_ridge(),
            separation: default_separation(),
            heterogeneity: default_heterogeneity(),
        }
    }

    pub fn logistic() -> Self {
        Self { family: CostFamily::Logistic, ..Self::consensus(CostFamily::Logistic, 0.0, default_signal_hi(), 0.0) }
    }

    pub fn omega(&self) -> f64 {
        self.omega.unwrap_or(self.signal_hi - self.signal_lo)
    }

    pub fn dim(&self) -> usize {
        if self.family.is_consensus() {
            1
        } else {
            self.dim
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmSection {
    #[serde(flatten)]
    pub params: AdmmParams,
    /// Initial edge states drawn uniformly from this range; when absent the
    /// initial edges follow `init` like any new edge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0_range: Option<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// Fraction of the trace excluded from summaries.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    /// Churn rates to sweep; each value replaces the process's rate.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambda_sweep: Vec<f64>,
    /// Network sizes to sweep; each value replaces `graph.n0`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub size_sweep: Vec<usize>,
    /// Initializations to sweep; each value replaces `admm.init`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub init_sweep: Vec<InitVariant>,
}

fn default_burn_in() -> f64 {
    0.5
}

impl Default for RunSection {
    fn default() -> Self {
        Self { burn_in: default_burn_in(), lambda_sweep: Vec::new(), size_sweep: Vec::new(), init_sweep: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioSection,
    pub graph: GraphSection,
    #[serde(default = "no_churn")]
    pub churn: ChurnSection,
    pub costs: CostsSection,
    pub admm: AdmmSection,
    #[serde(default)]
    pub run: RunSection,
}

fn no_churn() -> ChurnSection {
    ChurnSection { process: ChurnProcess::None, attachment: Attachment::default(), min_agents: default_min_agents() }
}

/// One point of a sweep: a label such as `lambda=10` and the resolved config.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub label: String,
    pub config: ScenarioConfig,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml()?).map_err(|source| Error::Io { path: path.to_path_buf(), source })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.scenario.reps == 0 {
            return bad("scenario.reps must be at least 1".into());
        }
        if self.graph.n0 == 0 {
            return bad("graph.n0 must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.graph.edge_prob) {
            return bad(format!("graph.edge_prob must lie in [0, 1] (got {})", self.graph.edge_prob));
        }
        self.churn.process.validate()?;
        if let Attachment::Bernoulli { p } = self.churn.attachment {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("churn.attachment.p must lie in [0, 1] (got {p})"));
            }
        }
        if self.churn.min_agents == 0 {
            return bad("churn.min_agents must be at least 1".into());
        }
        let c = &self.costs;
        if c.family.is_consensus() {
            if !(c.signal_lo.is_finite() && c.signal_hi.is_finite() && c.signal_lo <= c.signal_hi) {
                return bad(format!("costs signal range [{}, {}] is invalid", c.signal_lo, c.signal_hi));
            }
            if !(c.sigma >= 0.0 && c.sigma.is_finite()) || c.omega.is_some_and(|w| !(w >= 0.0 && w.is_finite())) {
                return bad("costs.sigma and costs.omega must be finite and nonnegative".into());
            }
        } else {
            if c.samples == 0 || c.dim == 0 {
                return bad("costs.samples and costs.dim must be at least 1".into());
            }
            if !(c.ridge > 0.0 && c.ridge.is_finite()) {
                return bad(format!("costs.ridge must be positive (got {})", c.ridge));
            }
            if !(c.separation.is_finite() && c.heterogeneity.is_finite() && c.heterogeneity >= 0.0) {
                return bad("costs.separation and costs.heterogeneity must be finite".into());
            }
        }
        self.admm.params.validate()?;
        if let Some([lo, hi]) = self.admm.x0_range {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(format!("admm.x0_range [{lo}, {hi}] is invalid"));
            }
        }
        if !(0.0..1.0).contains(&self.run.burn_in) {
            return bad(format!("run.burn_in must lie in [0, 1) (got {})", self.run.burn_in));
        }
        if !self.run.lambda_sweep.is_empty() {
            if matches!(self.churn.process, ChurnProcess::None | ChurnProcess::BernoulliSchedule { .. }) {
                return bad("run.lambda_sweep needs a Poisson, decaying or replacement churn process".into());
            }
            if self.run.lambda_sweep.iter().any(|l| !(*l >= 0.0 && l.is_finite())) {
                return bad("run.lambda_sweep values must be finite and nonnegative".into());
            }
        }
        if self.run.size_sweep.contains(&0) {
            return bad("run.size_sweep values must be at least 1".into());
        }
        Ok(())
    }

    /// Expands the sweeps into concrete configs, one per combination, in the
    /// order sizes, rates, initializations. Without sweeps the config itself
    /// is the single variant.
    pub fn variants(&self) -> Result<Vec<Variant>> {
        let mut base = self.clone();
        base.run.lambda_sweep.clear();
        base.run.size_sweep.clear();
        base.run.init_sweep.clear();
        let mut out = vec![Variant { label: String::new(), config: base }];

        if !self.run.size_sweep.is_empty() {
            out = out
                .into_iter()
                .flat_map(|v| {
                    self.run.size_sweep.iter().map(move |&n| {
                        let mut c = v.config.clone();
                        c.graph.n0 = n;
                        Variant { label: join_label(&v.label, format!("n={n}")), config: c }
                    })
                })
                .collect();
        }
        if !self.run.lambda_sweep.is_empty() {
            let mut next = Vec::new();
            for v in out {
                for &lambda in &self.run.lambda_sweep {
                    let mut c = v.config.clone();
                    c.churn.process = with_rate(&c.churn.process, lambda)?;
                    next.push(Variant { label: join_label(&v.label, format!("lambda={lambda}")), config: c });
                }
            }
            out = next;
        }
        if !self.run.init_sweep.is_empty() {
            out = out
                .into_iter()
                .flat_map(|v| {
                    self.run.init_sweep.iter().map(move |&init| {
                        let mut c = v.config.clone();
                        c.admm.params.init = init;
                        Variant { label: join_label(&v.label, format!("init={}", init_name(init))), config: c }
                    })
                })
                .collect();
        }
        Ok(out)
    }

    pub fn admm_params(&self) -> AdmmParams {
        self.admm.params
    }
}

pub fn init_name(init: InitVariant) -> &'static str {
    match init {
        InitVariant::LocalOptimum => "local-optimum",
        InitVariant::Zero => "zero",
        InitVariant::NeighborAverage => "neighbor-average",
    }
}

fn join_label(prefix: &str, part: String) -> String {
    if prefix.is_empty() {
        part
    } else {
        format!("{prefix},{part}")
    }
}

fn with_rate(process: &ChurnProcess, lambda: f64) -> Result<ChurnProcess> {
    Ok(match process {
        ChurnProcess::Poisson { .. } => ChurnProcess::constant_poisson(lambda),
        ChurnProcess::DecayingPoisson { delta, divisor, .. } => {
            ChurnProcess::DecayingPoisson { lambda, delta: *delta, divisor: *divisor }
        }
        ChurnProcess::Replacement { .. } => ChurnProcess::Replacement { lambda },
        _ => return Err(Error::InvalidConfig("rate sweep does not apply to this churn process".into())),
    })
}
