//! Arrival/departure processes and the bounded-variation reference signals
//! used by the tracking scenarios.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AgentId, Arrival, ChurnDelta, GraphSnapshot, Transition};

/// Draws per departure before the event is dropped for the tick.
pub const DEPARTURE_RETRIES: usize = 100;

/// Join/leave parameters active up to and including tick `until`
/// (`None` = open-ended). Probabilities for the Bernoulli schedule, Poisson
/// means otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePhase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub until: Option<u64>,
    pub join: f64,
    pub leave: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ChurnProcess {
    /// Closed network.
    #[default]
    None,
    /// At most one join and one leave per tick.
    BernoulliSchedule { phases: Vec<RatePhase> },
    /// `Pois(join)` arrivals and `Pois(leave)` departures per tick.
    Poisson { phases: Vec<RatePhase> },
    /// Both counts `Pois(lambda * delta^(k / divisor))`.
    DecayingPoisson {
        lambda: f64,
        delta: f64,
        #[serde(default = "default_divisor")]
        divisor: f64,
    },
    /// `m ~ Pois(lambda)` agents replaced by `m` newcomers; size stays fixed.
    Replacement { lambda: f64 },
}

fn default_divisor() -> f64 {
    5.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Attachment {
    /// Edge to each surviving agent with probability `p`; one uniform edge is
    /// forced when none is drawn.
    Bernoulli { p: f64 },
    /// `ceil(average degree)` distinct surviving agents, uniformly.
    AverageDegree,
}

impl Default for Attachment {
    fn default() -> Self {
        Attachment::Bernoulli { p: 0.1 }
    }
}

fn active_phase(phases: &[RatePhase], k: u64) -> Option<&RatePhase> {
    phases.iter().find(|p| p.until.is_none_or(|u| k <= u)).or(phases.last())
}

impl ChurnProcess {
    /// Five-phase tracking schedule, with breakpoints scaled by
    /// `time_scale` (1.0 reproduces 1000/2000/3000/3500).
    pub fn tracking_schedule(time_scale: f64) -> Self {
        let at = |k: f64| Some((k * time_scale).round() as u64);
        ChurnProcess::BernoulliSchedule {
            phases: vec![
                RatePhase { until: at(1000.0), join: 0.01, leave: 0.01 },
                RatePhase { until: at(2000.0), join: 0.10, leave: 0.01 },
                RatePhase { until: at(3000.0), join: 0.01, leave: 0.01 },
                RatePhase { until: at(3500.0), join: 0.01, leave: 0.10 },
                RatePhase { until: None, join: 0.05, leave: 0.05 },
            ],
        }
    }

    pub fn constant_poisson(lambda: f64) -> Self {
        ChurnProcess::Poisson { phases: vec![RatePhase { until: None, join: lambda, leave: lambda }] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        match self {
            ChurnProcess::None => Ok(()),
            ChurnProcess::BernoulliSchedule { phases } | ChurnProcess::Poisson { phases } => {
                if phases.is_empty() {
                    return bad("churn schedule has no phases".into());
                }
                let prob = matches!(self, ChurnProcess::BernoulliSchedule { .. });
                for p in phases {
                    let ok = |v: f64| v.is_finite() && v >= 0.0 && (!prob || v <= 1.0);
                    if !ok(p.join) || !ok(p.leave) {
                        return bad(format!("churn phase rates out of range: join {} leave {}", p.join, p.leave));
                    }
                }
                Ok(())
            }
            ChurnProcess::DecayingPoisson { lambda, delta, divisor } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) || !(*delta > 0.0 && *delta < 1.0) || !(*divisor > 0.0) {
                    return bad(format!("decaying churn needs lambda >= 0, delta in (0,1), divisor > 0 (got {lambda}, {delta}, {divisor})"));
                }
                Ok(())
            }
            ChurnProcess::Replacement { lambda } => {
                if !(*lambda >= 0.0 && lambda.is_finite()) {
                    return bad(format!("replacement rate must be >= 0 (got {lambda})"));
                }
                Ok(())
            }
        }
    }

    /// Expected `(arrivals, departures)` at tick `k`.
    pub fn mean_events(&self, k: u64) -> (f64, f64) {
        match self {
            ChurnProcess::None => (0.0, 0.0),
            ChurnProcess::BernoulliSchedule { phases } | ChurnProcess::Poisson { phases } => {
                active_phase(phases, k).map_or((0.0, 0.0), |p| (p.join, p.leave))
            }
            ChurnProcess::DecayingPoisson { lambda, delta, divisor } => {
                let rate = lambda * delta.powf(k as f64 / divisor);
                (rate, rate)
            }
            ChurnProcess::Replacement { lambda } => (*lambda, *lambda),
        }
    }
}

/// Poisson draw by Knuth's multiplication method. Large means are split into
/// chunks of at most 30 so `exp(-mean)` never underflows.
pub fn poisson<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if !(mean > 0.0) {
        return 0;
    }
    let chunks = (mean / 30.0).ceil().max(1.0) as u64;
    let part = mean / chunks as f64;
    let floor = (-part).exp();
    (0..chunks)
        .map(|_| {
            let mut k = 0;
            let mut prod: f64 = rng.gen();
            while prod > floor {
                k += 1;
                prod *= rng.gen::<f64>();
            }
            k
        })
        .sum()
}

/// Samples churn deltas that keep the graph connected.
#[derive(Debug, Clone, PartialEq)]
pub struct ChurnSampler {
    pub process: ChurnProcess,
    pub attachment: Attachment,
    /// Departures never shrink the network below this size.
    pub min_agents: usize,
}

impl ChurnSampler {
    pub fn new(process: ChurnProcess, attachment: Attachment) -> Self {
        Self { process, attachment, min_agents: 1 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, k: u64, g: &GraphSnapshot, rng: &mut R) -> ChurnDelta {
        let (joins, leaves) = match &self.process {
            ChurnProcess::None => (0, 0),
            ChurnProcess::BernoulliSchedule { .. } => {
                let (pj, pl) = self.process.mean_events(k);
                (u64::from(rng.gen_bool(pj.clamp(0.0, 1.0))), u64::from(rng.gen_bool(pl.clamp(0.0, 1.0))))
            }
            ChurnProcess::Poisson { .. } | ChurnProcess::DecayingPoisson { .. } => {
                let (mj, ml) = self.process.mean_events(k);
                (poisson(mj, rng), poisson(ml, rng))
            }
            ChurnProcess::Replacement { lambda } => {
                let m = poisson(*lambda, rng);
                (m, m)
            }
        };
        let departed = self.pick_departures(g, leaves as usize, rng);
        let joins = match self.process {
            ChurnProcess::Replacement { .. } => departed.len(),
            _ => joins as usize,
        };
        let arrived = self.pick_arrivals(g, &departed, joins, rng);
        ChurnDelta { arrived, departed }
    }

    fn pick_departures<R: Rng + ?Sized>(&self, g: &GraphSnapshot, count: usize, rng: &mut R) -> BTreeSet<AgentId> {
        let agents: Vec<AgentId> = g.agents().collect();
        let mut departed = BTreeSet::new();
        'events: for _ in 0..count {
            if agents.len() - departed.len() <= self.min_agents {
                break;
            }
            for _ in 0..DEPARTURE_RETRIES {
                let candidate = agents[rng.gen_range(0..agents.len())];
                if departed.contains(&candidate) {
                    continue;
                }
                departed.insert(candidate);
                if g.departure_keeps_connected(&departed) {
                    continue 'events;
                }
                departed.remove(&candidate);
            }
            break;
        }
        departed
    }

    fn pick_arrivals<R: Rng + ?Sized>(
        &self,
        g: &GraphSnapshot,
        departed: &BTreeSet<AgentId>,
        count: usize,
        rng: &mut R,
    ) -> Vec<Arrival> {
        if count == 0 {
            return Vec::new();
        }
        let residual = g
            .apply_churn(&ChurnDelta { arrived: Vec::new(), departed: departed.clone() })
            .expect("departures were validated");
        let survivors: Vec<AgentId> = residual.agents().collect();
        let mut next_id = residual.next_id().0;
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let id = AgentId(next_id);
            next_id += 1;
            let attach_to = if survivors.is_empty() {
                Vec::new()
            } else {
                match self.attachment {
                    Attachment::Bernoulli { p } => {
                        let mut picked: Vec<AgentId> =
                            survivors.iter().copied().filter(|_| rng.gen_bool(p.clamp(0.0, 1.0))).collect();
                        if picked.is_empty() {
                            picked.push(survivors[rng.gen_range(0..survivors.len())]);
                        }
                        picked
                    }
                    Attachment::AverageDegree => {
                        let c = (residual.average_degree().ceil() as usize).clamp(1, survivors.len());
                        let mut picked: Vec<AgentId> =
                            sample(rng, survivors.len(), c).into_iter().map(|i| survivors[i]).collect();
                        picked.sort();
                        picked
                    }
                }
            };
            out.push(Arrival { id, attach_to });
        }
        // With an empty residual only the first newcomer may stand alone.
        if survivors.is_empty() {
            let first = out[0].id;
            for a in out.iter_mut().skip(1) {
                a.attach_to.push(first);
            }
        }
        out
    }
}

/// Per-agent scalar signals confined to `[lo, hi]` with steps of at most `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalModel {
    lo: f64,
    hi: f64,
    sigma: f64,
    values: BTreeMap<AgentId, f64>,
}

impl SignalModel {
    pub fn new(lo: f64, hi: f64, sigma: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo <= hi && sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "signal model needs lo <= hi and sigma >= 0 (got [{lo}, {hi}], {sigma})"
            )));
        }
        Ok(Self { lo, hi, sigma, values: BTreeMap::new() })
    }

    pub fn with_values(mut self, values: BTreeMap<AgentId, f64>) -> Self {
        self.values = values;
        self
    }

    /// Samples every agent of `g` uniformly in `[lo, hi]`.
    pub fn initialize<R: Rng + ?Sized>(&mut self, g: &GraphSnapshot, rng: &mut R) {
        self.values = g.agents().map(|a| (a, self.draw(rng))).collect();
    }

    pub fn span(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn value(&self, agent: AgentId) -> Option<f64> {
        self.values.get(&agent).copied()
    }

    pub fn values(&self) -> &BTreeMap<AgentId, f64> {
        &self.values
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    /// Remaining agents take a clamped uniform step, newcomers draw a fresh
    /// value, departed agents are dropped.
    pub fn step<R: Rng + ?Sized>(&self, transition: &Transition, rng: &mut R) -> SignalModel {
        let mut values = BTreeMap::new();
        for &a in &transition.remaining {
            let old = self.values.get(&a).copied().unwrap_or_else(|| self.draw(rng));
            let step = if self.sigma > 0.0 { rng.gen_range(-self.sigma..=self.sigma) } else { 0.0 };
            values.insert(a, (old + step).clamp(self.lo, self.hi));
        }
        for &a in &transition.arrived {
            values.insert(a, self.draw(rng));
        }
        SignalModel { values, ..self.clone() }
    }
}
