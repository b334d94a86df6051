//! Scenario runner: churn, signal drift, Open ADMM ticks and per-tick metrics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::admm::{admm_tick, init_arriving, AdmmParams, AgentCosts, NetworkState};
use crate::analysis::{consensus_distance, departure_ratio, epsilon_metric, tsi_distance, BoundInputs, TraceRecord};
use crate::churn::{ChurnProcess, ChurnSampler, SignalModel};
use crate::config::{CostFamily, ScenarioConfig};
use crate::costs::{ClassificationGenerator, CostModel};
use crate::error::Result;
use crate::graph::{random_graph, ChurnDelta, GraphSnapshot, Transition};
use crate::oracles::{centralized_solve_from, CentralizedSolution};

const STREAM_GRAPH: u64 = 0;
const STREAM_STATE: u64 = 1;
const STREAM_CHURN: u64 = 2;
const STREAM_SIGNAL: u64 = 3;
const STREAM_DATA: u64 = 4;
const STREAMS_PER_REP: u64 = 8;

/// Independent generator for one purpose within one repetition.
pub fn rep_rng(seed: u64, rep: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep * STREAMS_PER_REP + stream);
    rng
}

#[derive(Debug, Clone)]
enum CostSource {
    Consensus { family: CostFamily, signals: SignalModel },
    Logistic(ClassificationGenerator),
}

/// One repetition of a scenario, advanced tick by tick.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: AdmmParams,
    sampler: ChurnSampler,
    source: CostSource,
    bound: Option<BoundInputs>,
    graph: GraphSnapshot,
    state: NetworkState,
    costs: AgentCosts,
    solution: CentralizedSolution,
    last_delta: ChurnDelta,
    last_record: TraceRecord,
    rng_churn: ChaCha8Rng,
    rng_signal: ChaCha8Rng,
    rng_data: ChaCha8Rng,
}

fn consensus_model(family: CostFamily, u: f64) -> CostModel {
    match family {
        CostFamily::ConsensusAvg => CostModel::ConsensusAvg { u },
        CostFamily::ConsensusMax => CostModel::ConsensusMax { u },
        CostFamily::ConsensusMedian => CostModel::ConsensusMedian { u },
        CostFamily::Logistic => unreachable!("logistic costs come from the data generator"),
    }
}

impl Simulation {
    pub fn new(config: &ScenarioConfig, rep: u64) -> Result<Self> {
        config.validate()?;
        let seed = config.scenario.seed;
        let mut rng_graph = rep_rng(seed, rep, STREAM_GRAPH);
        let mut rng_state = rep_rng(seed, rep, STREAM_STATE);
        let mut rng_signal = rep_rng(seed, rep, STREAM_SIGNAL);
        let mut rng_data = rep_rng(seed, rep, STREAM_DATA);
        let params = config.admm_params();
        let graph = random_graph(config.graph.n0, config.graph.edge_prob, &mut rng_graph);

        let c = &config.costs;
        let (source, costs, bound) = if c.family.is_consensus() {
            let mut signals = SignalModel::new(c.signal_lo, c.signal_hi, c.sigma)?;
            signals.initialize(&graph, &mut rng_signal);
            let costs =
                AgentCosts::from_models(signals.values().iter().map(|(a, u)| (*a, consensus_model(c.family, *u))))?;
            let omega = if config.churn.process == ChurnProcess::None { 0.0 } else { c.omega() };
            let bound = BoundInputs::from_rates(0.0, 1.0, params.rho, c.sigma, omega)?;
            (CostSource::Consensus { family: c.family, signals }, costs, Some(bound))
        } else {
            let generator =
                ClassificationGenerator::new(c.samples, c.dim, c.separation, c.heterogeneity, c.ridge, &mut rng_data)?;
            let mut costs = AgentCosts::new();
            for a in graph.agents() {
                costs.insert(a, generator.sample_agent(&mut rng_data)?)?;
            }
            (CostSource::Logistic(generator), costs, None)
        };

        let state = match config.admm.x0_range {
            Some([lo, hi]) => {
                let dim = costs.dim();
                let x = graph
                    .ordered_edges()
                    .map(|e| (e, (0..dim).map(|_| if lo == hi { lo } else { rng_state.gen_range(lo..=hi) }).collect()))
                    .collect();
                NetworkState::from_edge_states(&graph, x, &costs, &params)?
            }
            None => NetworkState::initialize(&graph, &costs, &params)?,
        };
        let solution = centralized_solve_from(&costs, None)?;
        let mut sim = Self {
            params,
            sampler: ChurnSampler {
                process: config.churn.process.clone(),
                attachment: config.churn.attachment,
                min_agents: config.churn.min_agents,
            },
            source,
            bound,
            graph,
            state,
            costs,
            solution,
            last_delta: ChurnDelta::default(),
            last_record: TraceRecord {
                k: 0,
                n_k: 0,
                xi_k: 0,
                d_cons_norm: 0.0,
                delta_bound: None,
                d_tsi_norm: 0.0,
                eps_k: None,
                beta_k: None,
                arrivals: 0,
                departures: 0,
            },
            rng_churn: rep_rng(seed, rep, STREAM_CHURN),
            rng_signal,
            rng_data,
        };
        sim.last_record = sim.measure(None)?;
        Ok(sim)
    }

    pub fn k(&self) -> u64 {
        self.state.k
    }

    pub fn graph(&self) -> &GraphSnapshot {
        &self.graph
    }

    pub fn state(&self) -> &NetworkState {
        &self.state
    }

    pub fn costs(&self) -> &AgentCosts {
        &self.costs
    }

    pub fn params(&self) -> &AdmmParams {
        &self.params
    }

    pub fn solution(&self) -> &CentralizedSolution {
        &self.solution
    }

    pub fn signals(&self) -> Option<&SignalModel> {
        match &self.source {
            CostSource::Consensus { signals, .. } => Some(signals),
            CostSource::Logistic(_) => None,
        }
    }

    pub fn last_delta(&self) -> &ChurnDelta {
        &self.last_delta
    }

    pub fn record(&self) -> &TraceRecord {
        &self.last_record
    }

    /// Advances one tick: sample churn, update the graph, step signals and
    /// costs, initialize new edges, run the tick, record metrics.
    pub fn step(&mut self) -> Result<&TraceRecord> {
        let k = self.state.k + 1;
        let delta = self.sampler.sample(k, &self.graph, &mut self.rng_churn);
        let g_now = self.graph.apply_churn(&delta)?;
        let transition = Transition::between(&self.graph, &g_now);

        for a in &transition.departed {
            self.costs.remove(*a);
        }
        let mut costs_changed = !delta.is_empty();
        match &mut self.source {
            CostSource::Consensus { family, signals } => {
                let next = signals.step(&transition, &mut self.rng_signal);
                for (a, u) in next.values() {
                    if signals.value(*a) != Some(*u) || self.costs.get(*a).is_none() {
                        self.costs.insert(*a, consensus_model(*family, *u))?;
                        costs_changed = true;
                    }
                }
                *signals = next;
            }
            CostSource::Logistic(generator) => {
                for a in &transition.arrived {
                    self.costs.insert(*a, generator.sample_agent(&mut self.rng_data)?)?;
                }
            }
        }

        let seeded = init_arriving(&self.state, &self.graph, &g_now, &self.costs, &self.params)?;
        let next = admm_tick(&seeded, &self.graph, &g_now, &self.costs, &self.params)?;
        if costs_changed {
            self.solution = centralized_solve_from(&self.costs, Some(&self.solution.y_star))?;
        }
        let prev_labels = self.graph.ordered_edge_count() * self.costs.dim();
        self.graph = g_now;
        self.state = next;
        self.last_delta = delta;
        self.last_record = self.measure(Some(prev_labels))?;
        Ok(&self.last_record)
    }

    fn measure(&self, prev_labels: Option<usize>) -> Result<TraceRecord> {
        let n = self.graph.n_agents();
        let xi = self.graph.ordered_edge_count();
        let eps = if self.costs.iter().all(|(_, m)| m.is_smooth()) {
            Some(epsilon_metric(&self.costs, &self.state.y)?)
        } else {
            None
        };
        Ok(TraceRecord {
            k: self.state.k,
            n_k: n,
            xi_k: xi,
            d_cons_norm: consensus_distance(&self.state.y, &self.solution.set)?,
            delta_bound: self.bound.map(|b| b.consensus_bound(n)),
            d_tsi_norm: tsi_distance(&self.state.x, &self.solution.set, self.params.rho)?,
            eps_k: eps,
            beta_k: prev_labels.and_then(|p| departure_ratio(p, xi * self.costs.dim())),
            arrivals: self.last_delta.arrived.len(),
            departures: self.last_delta.departed.len(),
        })
    }
}

/// Runs one repetition for the configured horizon; the trace starts with the
/// initial state at tick 0.
pub fn run_scenario(config: &ScenarioConfig, rep: u64) -> Result<Vec<TraceRecord>> {
    run_scenario_with(config, rep, |_| {})
}

/// As [`run_scenario`], calling `observe` after the initial state and after
/// every tick.
pub fn run_scenario_with(
    config: &ScenarioConfig,
    rep: u64,
    mut observe: impl FnMut(&Simulation),
) -> Result<Vec<TraceRecord>> {
    let mut sim = Simulation::new(config, rep)?;
    let mut out = Vec::with_capacity(config.scenario.horizon as usize + 1);
    observe(&sim);
    out.push(sim.record().clone());
    for _ in 0..config.scenario.horizon {
        out.push(sim.step()?.clone());
        observe(&sim);
    }
    Ok(out)
}
