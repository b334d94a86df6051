//! Built-in scenarios and the Monte Carlo runner.
//!
//! Every scenario exists at two scales. `paper` uses the full sizes and
//! horizons; `desk` shrinks agent counts, horizons and repetitions while
//! keeping every rate and probability, and moves schedule breakpoints in
//! proportion to the horizon.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::admm::{AdmmParams, InitVariant};
use crate::analysis::{empirical_departure_bound, summarize_trace, write_trace_csv, Column, Summary, TraceRecord};
use crate::churn::{Attachment, ChurnProcess, RatePhase};
use crate::config::{
    AdmmSection, ChurnSection, CostFamily, CostsSection, GraphSection, RunSection, Scale, ScenarioConfig,
    ScenarioSection,
};
use crate::error::{Error, Result};
use crate::simulation::run_scenario;

pub const SCENARIO_IDS: [&str; 7] = [
    "consensus-open",
    "consensus-closed",
    "learning-modes",
    "learning-lambda-sweep",
    "learning-decay",
    "learning-replacement",
    "learning-init-sweep",
];

/// Edge probability of every initial graph and of consensus arrivals.
const EDGE_PROB: f64 = 0.1;
/// Penalty and relaxation of the learning scenarios.
const LEARNING_RHO: f64 = 1.0;
const LEARNING_ALPHA: f64 = 0.9;

pub fn scenario_description(id: &str) -> Option<&'static str> {
    Some(match id {
        "consensus-open" => "average tracking under a five-phase join/leave schedule with drifting signals",
        "consensus-closed" => "fixed network with static signals; exact convergence",
        "learning-modes" => "logistic regression under Poisson churn switching between three rate modes",
        "learning-lambda-sweep" => "logistic regression under Poisson churn, one run per rate",
        "learning-decay" => "logistic regression under geometrically decaying Poisson churn",
        "learning-replacement" => "logistic regression with fixed size and Poisson replacements, one run per size",
        "learning-init-sweep" => "logistic regression under Poisson churn, one run per new-edge initialization",
        _ => return None,
    })
}

fn scenario(id: &str, scale: Scale, horizon: u64, reps: usize) -> ScenarioSection {
    ScenarioSection { id: id.into(), scale, horizon, seed: 1, reps }
}

fn learning(id: &str, scale: Scale, n0: usize, horizon: u64, reps: usize, process: ChurnProcess) -> ScenarioConfig {
    ScenarioConfig {
        scenario: scenario(id, scale, horizon, reps),
        graph: GraphSection { n0, edge_prob: EDGE_PROB },
        churn: ChurnSection { process, attachment: Attachment::AverageDegree, min_agents: 1 },
        costs: CostsSection::logistic(),
        admm: AdmmSection {
            params: AdmmParams::new(LEARNING_ALPHA, LEARNING_RHO).expect("valid constants"),
            x0_range: None,
        },
        run: RunSection::default(),
    }
}

/// A built-in scenario at the requested scale.
pub fn builtin_scenario(id: &str, scale: Scale) -> Result<ScenarioConfig> {
    let paper = scale == Scale::Paper;
    let pick = |p: usize, d: usize| if paper { p } else { d };
    let pick_h = |p: u64, d: u64| if paper { p } else { d };
    let reps = pick(10, 5);
    let consensus_admm =
        AdmmSection { params: AdmmParams::new(0.99, 0.5).expect("valid constants"), x0_range: Some([0.0, 500.0]) };

    Ok(match id {
        "consensus-open" => {
            let horizon = pick_h(4000, 1000);
            ScenarioConfig {
                scenario: scenario(id, scale, horizon, pick(1, 5)),
                graph: GraphSection { n0: pick(200, 50), edge_prob: EDGE_PROB },
                churn: ChurnSection {
                    process: ChurnProcess::tracking_schedule(horizon as f64 / 4000.0),
                    attachment: Attachment::Bernoulli { p: EDGE_PROB },
                    min_agents: 1,
                },
                costs: CostsSection::consensus(CostFamily::ConsensusAvg, 0.0, 5.0, 0.2),
                admm: consensus_admm,
                run: RunSection::default(),
            }
        }
        "consensus-closed" => ScenarioConfig {
            scenario: scenario(id, scale, 2000, 1),
            graph: GraphSection { n0: pick(200, 20), edge_prob: EDGE_PROB },
            churn: ChurnSection { process: ChurnProcess::None, attachment: Attachment::default(), min_agents: 1 },
            costs: CostsSection::consensus(CostFamily::ConsensusAvg, 0.0, 5.0, 0.0),
            admm: consensus_admm,
            run: RunSection::default(),
        },
        "learning-modes" => {
            let horizon = pick_h(960, 480);
            let at = |k: u64| Some(k * horizon / 960);
            let phases = vec![
                RatePhase { until: at(320), join: 1.0, leave: 1.0 },
                RatePhase { until: at(640), join: 1.0, leave: 0.5 },
                RatePhase { until: None, join: 0.5, leave: 1.0 },
            ];
            learning(id, scale, pick(50, 20), horizon, reps, ChurnProcess::Poisson { phases })
        }
        "learning-lambda-sweep" => {
            let mut c = learning(id, scale, pick(50, 20), pick_h(960, 400), reps, ChurnProcess::constant_poisson(1.0));
            c.run.lambda_sweep = vec![0.1, 1.0, 10.0, 100.0];
            c
        }
        "learning-decay" => learning(
            id,
            scale,
            pick(50, 20),
            1000,
            reps,
            ChurnProcess::DecayingPoisson { lambda: 5.0, delta: 0.9583, divisor: 5.0 },
        ),
        "learning-replacement" => {
            let mut c =
                learning(id, scale, pick(50, 20), pick_h(960, 400), reps, ChurnProcess::Replacement { lambda: 1.0 });
            c.run.size_sweep = if paper { vec![50, 100, 500] } else { vec![20, 50, 100] };
            c
        }
        "learning-init-sweep" => {
            let mut c = learning(id, scale, pick(50, 20), pick_h(960, 400), reps, ChurnProcess::constant_poisson(1.0));
            c.run.init_sweep = vec![InitVariant::LocalOptimum, InitVariant::Zero, InitVariant::NeighborAverage];
            c
        }
        other => return Err(Error::UnknownScenario(other.into())),
    })
}

/// How repetitions are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    Sequential,
    /// Repetitions on the rayon pool; sequential when built without the
    /// `parallel` feature.
    #[default]
    Parallel,
}

/// Runs every repetition of a single (already expanded) config. Results are
/// in repetition order whatever the execution mode.
pub fn run_reps(config: &ScenarioConfig, exec: Execution) -> Result<Vec<Vec<TraceRecord>>> {
    let reps = config.scenario.reps as u64;
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..reps).into_par_iter().map(|r| run_scenario(config, r)).collect()
        }
        _ => (0..reps).map(|r| run_scenario(config, r)).collect(),
    }
}

/// Rep-averaged post-burn-in statistics of one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub label: String,
    pub reps: usize,
    /// `None` when the costs have no gradient.
    pub eps: Option<Summary>,
    pub d_cons: Summary,
    pub d_tsi: Summary,
    pub n_k: Summary,
    /// Mean over repetitions of the last tick's consensus distance.
    pub final_d_cons: f64,
    /// Smallest observed departure ratio over all repetitions.
    pub beta_min: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub id: String,
    pub variants: Vec<VariantSummary>,
    pub traces: Vec<PathBuf>,
    pub summary_path: Option<PathBuf>,
}

pub fn summarize_runs(label: &str, runs: &[Vec<TraceRecord>], burn_in: f64) -> Result<VariantSummary> {
    let per = |col: Column| -> Result<Summary> {
        let stats = runs.iter().map(|r| summarize_trace(r, col, burn_in)).collect::<Result<Vec<_>>>()?;
        Summary::average(&stats)
    };
    let smooth = runs.iter().all(|r| r.iter().all(|rec| rec.eps_k.is_some()));
    let finals: Vec<f64> = runs.iter().filter_map(|r| r.last().map(|x| x.d_cons_norm)).collect();
    if finals.is_empty() {
        return Err(Error::EmptyTrace);
    }
    Ok(VariantSummary {
        label: label.into(),
        reps: runs.len(),
        eps: if smooth { Some(per(Column::EpsK)?) } else { None },
        d_cons: per(Column::DConsNorm)?,
        d_tsi: per(Column::DTsiNorm)?,
        n_k: per(Column::NK)?,
        final_d_cons: finals.iter().sum::<f64>() / finals.len() as f64,
        beta_min: runs
            .iter()
            .map(|r| empirical_departure_bound(r))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(1.0, f64::min),
    })
}

fn file_stem(id: &str, label: &str) -> String {
    if label.is_empty() {
        id.to_string()
    } else {
        format!("{id}_{}", label.replace(',', "_"))
    }
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    variant: &'a str,
    metric: &'a str,
    reps: usize,
    min: f64,
    mean: f64,
    std: f64,
    max: f64,
}

fn write_summary(path: &Path, variants: &[VariantSummary]) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for v in variants {
        let rows =
            [("eps_k", v.eps), ("d_cons_norm", Some(v.d_cons)), ("d_tsi_norm", Some(v.d_tsi)), ("n_k", Some(v.n_k))];
        for (metric, s) in rows {
            let Some(s) = s else { continue };
            w.serialize(SummaryRow {
                variant: &v.label,
                metric,
                reps: v.reps,
                min: s.min,
                mean: s.mean,
                std: s.std,
                max: s.max,
            })
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

/// Expands sweeps, runs every repetition, and summarizes each variant. With
/// `out` set, writes one trace CSV per run plus `<id>_summary.csv`.
pub fn run_and_summarize(config: &ScenarioConfig, out: Option<&Path>, exec: Execution) -> Result<ExperimentReport> {
    config.validate()?;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    }
    let id = &config.scenario.id;
    let mut variants = Vec::new();
    let mut traces = Vec::new();
    for v in config.variants()? {
        let runs = run_reps(&v.config, exec)?;
        if let Some(dir) = out {
            for (r, run) in runs.iter().enumerate() {
                let path = dir.join(format!("{}_rep{r}.csv", file_stem(id, &v.label)));
                write_trace_csv(&path, run)?;
                traces.push(path);
            }
        }
        variants.push(summarize_runs(&v.label, &runs, config.run.burn_in)?);
    }
    let summary_path = match out {
        Some(dir) => {
            let path = dir.join(format!("{id}_summary.csv"));
            write_summary(&path, &variants)?;
            Some(path)
        }
        None => None,
    };
    Ok(ExperimentReport { id: id.clone(), variants, traces, summary_path })
}
