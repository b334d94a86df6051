//! Open ADMM: per-edge dual states, agent output updates, and state
//! initialization for agents and edges that appear between ticks.
//!
//! Every ordered pair `(i, j)` of neighbors carries a state `x[i,j]` owned by
//! `i`. Edges present at both ticks take the relaxed Peaceman-Rachford update
//!
//! ```text
//! x[i,j] <- (1 - alpha) x[i,j] - alpha x[j,i] + 2 rho alpha y[j]
//! ```
//!
//! using last tick's values; new edges are initialized by the owning agent.
//! Each agent then outputs `y[i] = prox_{f_i}^{1/(rho eta_i)}(sum_j x[i,j] / (rho eta_i))`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::costs::CostModel;
use crate::error::{Error, Result};
use crate::graph::{AgentId, GraphSnapshot, Transition};

/// How an agent initializes the state of a new edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InitVariant {
    /// `rho * y_i*`, the scaled local minimizer.
    #[default]
    LocalOptimum,
    Zero,
    /// Mean of last tick's outputs over neighbors that were already in the
    /// network; falls back to [`InitVariant::LocalOptimum`] when there are none.
    NeighborAverage,
}

/// Which edge states feed the median prox aggregate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum MedianAggregate {
    /// States after this tick's update, as for the other costs.
    #[default]
    Current,
    /// Last tick's states where the edge existed.
    Previous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmParams {
    pub alpha: f64,
    pub rho: f64,
    #[serde(default)]
    pub init: InitVariant,
    #[serde(default)]
    pub median_aggregate: MedianAggregate,
}

impl AdmmParams {
    pub fn new(alpha: f64, rho: f64) -> Result<Self> {
        let p = Self { alpha, rho, init: InitVariant::default(), median_aggregate: MedianAggregate::default() };
        p.validate()?;
        Ok(p)
    }

    pub fn with_init(mut self, init: InitVariant) -> Self {
        self.init = init;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!("relaxation alpha must lie in (0, 1) (got {})", self.alpha)));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty rho must be positive (got {})", self.rho)));
        }
        Ok(())
    }
}

/// Per-agent cost models with their local minimizers cached.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AgentCosts {
    models: BTreeMap<AgentId, CostModel>,
    minimizers: BTreeMap<AgentId, Vec<f64>>,
}

impl AgentCosts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_models(models: impl IntoIterator<Item = (AgentId, CostModel)>) -> Result<Self> {
        let mut out = Self::new();
        for (a, m) in models {
            out.insert(a, m)?;
        }
        Ok(out)
    }

    pub fn insert(&mut self, agent: AgentId, model: CostModel) -> Result<()> {
        let start = self.minimizers.get(&agent).cloned();
        let minimizer = model.local_minimizer_from(start.as_deref())?;
        self.minimizers.insert(agent, minimizer);
        self.models.insert(agent, model);
        Ok(())
    }

    pub fn remove(&mut self, agent: AgentId) {
        self.models.remove(&agent);
        self.minimizers.remove(&agent);
    }

    pub fn get(&self, agent: AgentId) -> Option<&CostModel> {
        self.models.get(&agent)
    }

    fn model(&self, agent: AgentId) -> Result<&CostModel> {
        self.models.get(&agent).ok_or_else(|| Error::InvalidDelta(format!("agent {agent} has no cost model")))
    }

    pub fn minimizer(&self, agent: AgentId) -> Option<&[f64]> {
        self.minimizers.get(&agent).map(Vec::as_slice)
    }

    pub fn iter(&self) -> impl Iterator<Item = (AgentId, &CostModel)> {
        self.models.iter().map(|(a, m)| (*a, m))
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.models.values().next().map_or(1, CostModel::dim)
    }
}

/// Edge states and agent outputs at one tick.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NetworkState {
    pub k: u64,
    pub x: BTreeMap<(AgentId, AgentId), Vec<f64>>,
    pub y: BTreeMap<AgentId, Vec<f64>>,
}

impl NetworkState {
    /// Starts from explicit edge states; outputs are computed from them.
    pub fn from_edge_states(
        g: &GraphSnapshot,
        x: BTreeMap<(AgentId, AgentId), Vec<f64>>,
        costs: &AgentCosts,
        params: &AdmmParams,
    ) -> Result<Self> {
        let mut state = NetworkState { k: 0, x, y: BTreeMap::new() };
        state.check_labels(g)?;
        state.y = outputs(&state.x, None, g, costs, params, &BTreeMap::new())?;
        Ok(state)
    }

    /// Starts with every edge initialized by its owner per `params.init`.
    pub fn initialize(g: &GraphSnapshot, costs: &AgentCosts, params: &AdmmParams) -> Result<Self> {
        let empty = NetworkState::default();
        let seeded = init_arriving(&empty, &GraphSnapshot::default(), g, costs, params)?;
        Self::from_edge_states(g, seeded.x, costs, params)
    }

    /// Edge states as a flat vector in ordered-edge, then coordinate, order.
    pub fn stacked_x(&self) -> Vec<f64> {
        self.x.values().flatten().copied().collect()
    }

    pub fn stacked_y(&self) -> Vec<f64> {
        self.y.values().flatten().copied().collect()
    }

    fn check_labels(&self, g: &GraphSnapshot) -> Result<()> {
        if self.x.len() != g.ordered_edge_count() || !g.ordered_edges().all(|e| self.x.contains_key(&e)) {
            return Err(Error::InvalidDelta("edge states do not match the graph".into()));
        }
        Ok(())
    }
}

/// Initializes states of edges present in `g_now` but not in `g_prev`. Each
/// owner `i` writes `x[i,j]` for its new neighbors `j` (all neighbors when `i`
/// itself is new). Existing entries are left in place.
pub fn init_arriving(
    state: &NetworkState,
    g_prev: &GraphSnapshot,
    g_now: &GraphSnapshot,
    costs: &AgentCosts,
    params: &AdmmParams,
) -> Result<NetworkState> {
    let mut next = state.clone();
    for i in g_now.agents() {
        let fresh = Transition::new_neighbors(g_prev, g_now, i);
        if fresh.is_empty() {
            continue;
        }
        let local = || -> Result<Vec<f64>> {
            let m = costs.minimizer(i).ok_or_else(|| Error::InvalidDelta(format!("agent {i} has no cost model")))?;
            Ok(m.iter().map(|v| params.rho * v).collect())
        };
        let value = match params.init {
            InitVariant::LocalOptimum => local()?,
            InitVariant::Zero => vec![0.0; costs.model(i)?.dim()],
            InitVariant::NeighborAverage => {
                let known: Vec<&Vec<f64>> =
                    g_now.neighbors(i).iter().filter(|j| g_prev.contains(**j)).filter_map(|j| state.y.get(j)).collect();
                if known.is_empty() {
                    local()?
                } else {
                    let mut avg = vec![0.0; known[0].len()];
                    for y in &known {
                        for (a, v) in avg.iter_mut().zip(y.iter()) {
                            *a += v;
                        }
                    }
                    avg.iter_mut().for_each(|a| *a /= known.len() as f64);
                    avg
                }
            }
        };
        for j in fresh {
            next.x.insert((i, j), value.clone());
        }
    }
    Ok(next)
}

/// One synchronous tick. Remaining edges take the relaxed update from last
/// tick's states and outputs; new-edge states must already be present (see
/// [`init_arriving`]); states of departed edges are dropped.
pub fn admm_tick(
    state: &NetworkState,
    g_prev: &GraphSnapshot,
    g_now: &GraphSnapshot,
    costs: &AgentCosts,
    params: &AdmmParams,
) -> Result<NetworkState> {
    let (alpha, rho) = (params.alpha, params.rho);
    let mut x = BTreeMap::new();
    for (i, j) in g_now.ordered_edges() {
        let value = if g_prev.has_edge(i, j) {
            let own = edge(&state.x, i, j)?;
            let other = edge(&state.x, j, i)?;
            let yj = state.y.get(&j).ok_or_else(|| Error::InvalidDelta(format!("missing output of agent {j}")))?;
            own.iter()
                .zip(other)
                .zip(yj)
                .map(|((a, b), y)| (1.0 - alpha) * a - alpha * b + 2.0 * rho * alpha * y)
                .collect()
        } else {
            edge(&state.x, i, j)
                .map_err(|_| Error::InvalidDelta(format!("edge ({i},{j}) was not initialized")))?
                .to_vec()
        };
        x.insert((i, j), value);
    }
    let previous = match params.median_aggregate {
        MedianAggregate::Previous => Some(&state.x),
        MedianAggregate::Current => None,
    };
    let y = outputs(&x, previous, g_now, costs, params, &state.y)?;
    Ok(NetworkState { k: state.k + 1, x, y })
}

fn edge(x: &BTreeMap<(AgentId, AgentId), Vec<f64>>, i: AgentId, j: AgentId) -> Result<&[f64]> {
    x.get(&(i, j)).map(Vec::as_slice).ok_or_else(|| Error::InvalidDelta(format!("missing state for edge ({i},{j})")))
}

/// Output update for every agent of `g`. An agent with no neighbors outputs
/// its local minimizer.
fn outputs(
    x: &BTreeMap<(AgentId, AgentId), Vec<f64>>,
    previous: Option<&BTreeMap<(AgentId, AgentId), Vec<f64>>>,
    g: &GraphSnapshot,
    costs: &AgentCosts,
    params: &AdmmParams,
    warm: &BTreeMap<AgentId, Vec<f64>>,
) -> Result<BTreeMap<AgentId, Vec<f64>>> {
    let mut y = BTreeMap::new();
    for i in g.agents() {
        let model = costs.model(i)?;
        let eta = g.degree(i);
        if eta == 0 {
            y.insert(i, costs.minimizer(i).expect("cached with model").to_vec());
            continue;
        }
        let use_previous = previous.filter(|_| matches!(model, CostModel::ConsensusMedian { .. }));
        let w = params.rho * eta as f64;
        let mut v = vec![0.0; model.dim()];
        for &j in g.neighbors(i) {
            let src =
                use_previous.and_then(|p| p.get(&(i, j))).or_else(|| x.get(&(i, j))).expect("edge states checked");
            for (a, b) in v.iter_mut().zip(src) {
                *a += b;
            }
        }
        v.iter_mut().for_each(|a| *a /= w);
        y.insert(i, model.prox_from(&v, w, warm.get(&i).map(Vec::as_slice))?);
    }
    Ok(y)
}
