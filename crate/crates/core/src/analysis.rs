//! Metrics, bound calculators and trace statistics.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::admm::AgentCosts;
use crate::error::{Error, Result};
use crate::graph::AgentId;
use crate::oracles::{EdgeStates, SolutionSet};

/// Inputs of the linear-rate bounds. `b` bounds the per-tick drift of the
/// invariant set and `h` the contribution of arriving states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub gamma: f64,
    pub beta: f64,
    pub b: f64,
    pub h: f64,
    pub rho: f64,
    pub sigma: f64,
    pub omega: f64,
}

impl BoundInputs {
    /// `b = rho sigma`, `h = rho omega`.
    pub fn from_rates(gamma: f64, beta: f64, rho: f64, sigma: f64, omega: f64) -> Result<Self> {
        let out = Self { gamma, beta, b: rho * sigma, h: rho * omega, rho, sigma, omega };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(Error::InvalidConfig(format!("gamma must lie in [0, 1) (got {})", self.gamma)));
        }
        if self.gamma >= self.beta {
            return Err(Error::SlowContraction { gamma: self.gamma, beta: self.beta });
        }
        if self.beta > 1.0 {
            return Err(Error::InvalidConfig(format!("beta must not exceed 1 (got {})", self.beta)));
        }
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !(finite_nonneg(self.b) && finite_nonneg(self.h) && finite_nonneg(self.sigma) && finite_nonneg(self.omega)) {
            return Err(Error::InvalidConfig("drift and arrival bounds must be finite and nonnegative".into()));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty rho must be positive (got {})", self.rho)));
        }
        Ok(())
    }

    pub fn theta(&self) -> f64 {
        self.gamma / self.beta
    }

    /// Asymptotic radius `(b + h) / (1 - theta)`.
    pub fn radius(&self) -> f64 {
        (self.b + self.h) / (1.0 - self.theta())
    }

    /// Consensus radius `(R / rho) sqrt(n)`.
    pub fn consensus_bound(&self, n: usize) -> f64 {
        self.radius() / self.rho * (n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub theta: f64,
    pub radius: f64,
    /// `theta^k d0 + (1 - theta^k) / (1 - theta) (b + h)`.
    pub bound: f64,
}

pub fn tracking_bound(inputs: &BoundInputs, k: u64, d0: f64) -> Result<BoundReport> {
    inputs.validate()?;
    let theta = inputs.theta();
    let tk = theta.powf(k as f64);
    Ok(BoundReport {
        theta,
        radius: inputs.radius(),
        bound: tk * d0 + (1.0 - tk) / (1.0 - theta) * (inputs.b + inputs.h),
    })
}

/// `min_{y* in set} |y - 1 (x) y*| / sqrt(p n)`.
pub fn consensus_distance(y: &BTreeMap<AgentId, Vec<f64>>, set: &SolutionSet) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptySet);
    }
    let p = set.dim();
    let n = y.len();
    let mut mean = vec![0.0; p];
    for v in y.values() {
        if v.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: v.len() });
        }
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / n as f64;
        }
    }
    let star = set.nearest(&mean);
    let sq: f64 = y.values().flat_map(|v| v.iter().zip(&star).map(|(a, b)| (a - b) * (a - b))).sum();
    Ok((sq / (p * n) as f64).sqrt())
}

/// `min_{y* in set} d(x, X(y*)) / sqrt(|I|)` where `X(y*)` holds the edge
/// states with `x[i,j] + x[j,i] = 2 rho y*`. Zero when there are no edges.
pub fn tsi_distance(x: &EdgeStates, set: &SolutionSet, rho: f64) -> Result<f64> {
    let p = set.dim();
    let mut sums: Vec<Vec<f64>> = Vec::new();
    for (&(i, j), xij) in x {
        if i > j {
            continue;
        }
        let xji = x.get(&(j, i)).ok_or_else(|| Error::InvalidDelta(format!("missing state for edge ({j},{i})")))?;
        if xij.len() != p || xji.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: xij.len().min(xji.len()) });
        }
        sums.push(xij.iter().zip(xji).map(|(a, b)| a + b).collect());
    }
    if sums.is_empty() {
        return Ok(0.0);
    }
    let anchor: Vec<f64> =
        (0..p).map(|l| sums.iter().map(|s| s[l]).sum::<f64>() / sums.len() as f64 / (2.0 * rho)).collect();
    let star = set.nearest(&anchor);
    // Projecting one edge moves both directions by half the violation.
    let sq: f64 = sums.iter().flat_map(|s| s.iter().zip(&star).map(|(v, y)| (v - 2.0 * rho * y).powi(2) / 2.0)).sum();
    Ok((sq / x.len() as f64 / p as f64).sqrt())
}

/// `|sum_i grad f_i(ybar)|^2` at the network-average output.
pub fn epsilon_metric(costs: &AgentCosts, y: &BTreeMap<AgentId, Vec<f64>>) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::EmptySet);
    }
    let p = costs.dim();
    let mut ybar = vec![0.0; p];
    for v in y.values() {
        for (m, x) in ybar.iter_mut().zip(v) {
            *m += x / y.len() as f64;
        }
    }
    let mut total = vec![0.0; p];
    for (_, model) in costs.iter() {
        for (t, g) in total.iter_mut().zip(model.gradient(&ybar)?) {
            *t += g;
        }
    }
    Ok(total.iter().map(|v| v * v).sum())
}

/// One tick of a trace. Metrics that do not apply to a run are left empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    pub n_k: usize,
    /// Sum of degrees, i.e. the number of ordered edges.
    pub xi_k: usize,
    pub d_cons_norm: f64,
    pub delta_bound: Option<f64>,
    pub d_tsi_norm: f64,
    pub eps_k: Option<f64>,
    pub beta_k: Option<f64>,
    pub arrivals: usize,
    pub departures: usize,
}

pub const TRACE_COLUMNS: [&str; 10] =
    ["k", "n_k", "xi_k", "d_cons_norm", "delta_bound", "d_tsi_norm", "eps_k", "beta_k", "arrivals", "departures"];

pub fn write_trace_csv(path: &Path, records: &[TraceRecord]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    if records.is_empty() {
        w.write_record(TRACE_COLUMNS).map_err(csv_err)?;
    }
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRecord>> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Column {
    DConsNorm,
    DTsiNorm,
    EpsK,
    BetaK,
    NK,
}

impl Column {
    fn get(self, r: &TraceRecord) -> Option<f64> {
        match self {
            Column::DConsNorm => Some(r.d_cons_norm),
            Column::DTsiNorm => Some(r.d_tsi_norm),
            Column::EpsK => r.eps_k,
            Column::BetaK => r.beta_k,
            Column::NK => Some(r.n_k as f64),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub min: f64,
    pub mean: f64,
    pub std: f64,
    pub max: f64,
}

impl Summary {
    /// Sample statistics of `values`; the spread of a single value is zero.
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var =
            if values.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        Ok(Self {
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean,
            std: var.sqrt(),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }

    /// Averages each statistic over runs.
    pub fn average(runs: &[Summary]) -> Result<Self> {
        if runs.is_empty() {
            return Err(Error::EmptyWindow);
        }
        let n = runs.len() as f64;
        Ok(Self {
            min: runs.iter().map(|s| s.min).sum::<f64>() / n,
            mean: runs.iter().map(|s| s.mean).sum::<f64>() / n,
            std: runs.iter().map(|s| s.std).sum::<f64>() / n,
            max: runs.iter().map(|s| s.max).sum::<f64>() / n,
        })
    }
}

/// Statistics of `column` over the records after the first `burn_in`
/// fraction of the trace. Empty cells are skipped.
pub fn summarize_trace(records: &[TraceRecord], column: Column, burn_in: f64) -> Result<Summary> {
    let skip = (records.len() as f64 * burn_in.clamp(0.0, 1.0)).floor() as usize;
    let values: Vec<f64> = records[skip..].iter().filter_map(|r| column.get(r)).collect();
    Summary::of(&values)
}

/// Smallest observed `sqrt(|I_k|) / sqrt(|I_{k-1}|)`; 1 when no tick reports a ratio.
pub fn empirical_departure_bound(records: &[TraceRecord]) -> Result<f64> {
    if records.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(records.iter().filter_map(|r| r.beta_k).fold(1.0, f64::min))
}

/// `sqrt(now / prev)` for label counts, or `None` when `prev` is zero.
pub fn departure_ratio(prev: usize, now: usize) -> Option<f64> {
    (prev > 0).then(|| (now as f64 / prev as f64).sqrt())
}
