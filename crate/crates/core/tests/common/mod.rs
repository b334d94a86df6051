//! Shared property checks and independent oracles for the integration tests.
//!
//! Every check returns `Err` with a readable message on the first failing
//! case, so the same code drives the `properties` tests and the acceptance
//! runner.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::DVector;
use openadmm::admm::{admm_tick, AdmmParams, AgentCosts, InitVariant, NetworkState};
use openadmm::analysis::{consensus_distance, BoundInputs};
use openadmm::churn::{Attachment, ChurnProcess};
use openadmm::config::{CostFamily, CostsSection, Scale, ScenarioConfig};
use openadmm::costs::{ClassificationGenerator, CostModel};
use openadmm::experiments::builtin_scenario;
use openadmm::graph::{random_graph, AgentId, GraphSnapshot};
use openadmm::labeled_space::{
    open_distance, shadow_distance, AffineEdgeSet, AffinePair, Interval, Label, LabeledBox, LabeledVector, TargetSet,
};
use openadmm::oracles::{
    centralized_solve, compact_tick, tsi_fixed_point, CompactOperatorMatrices, EdgeStates, SolutionSet,
};
use openadmm::simulation::Simulation;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CASES: u32 = 1000;

pub type Check = fn(u32) -> Result<(), String>;

/// Every property, by name.
pub const PROPERTIES: &[(&str, Check)] = &[
    ("labeled_space: symmetry", distance_symmetry),
    ("labeled_space: restriction bound", restriction_bound),
    ("labeled_space: projection optimality", projection_optimality),
    ("labeled_space: projection idempotence", projection_idempotence),
    ("labeled_space: shadow triangle inequality", shadow_triangle),
    ("costs: prox optimality against probes", prox_optimality),
    ("costs: scalar prox firm nonexpansiveness", prox_nonexpansive),
    ("costs: closed form against scalar oracle", closed_form_vs_oracle),
    ("costs: logistic prox inner precision", logistic_inner_precision),
    ("open_admm: label consistency under churn", label_consistency),
    ("open_admm: fixed-point residual monotone", residual_monotone),
    ("open_admm: matches dense form", compact_equivalence),
    ("open_admm: exact convergence on closed networks", closed_exactness),
    ("reference_oracles: invariant-set fixed points", tsi_fixed_points),
    ("reference_oracles: swap matrix is an involution", involution),
    ("reference_oracles: lifted prox weights sum to one", row_sums),
    ("analysis: distance invariant under relabeling", relabel_invariance),
    ("analysis: bound monotone in drift", bound_monotone),
];

/// Deterministic runner with `cases` cases and no regression files.
pub fn runner(cases: u32) -> TestRunner {
    let config = Config { cases, failure_persistence: None, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

pub fn run<S, F>(cases: u32, strategy: S, test: F) -> Result<(), String>
where
    S: Strategy,
    S::Value: std::fmt::Debug,
    F: Fn(S::Value) -> Result<(), TestCaseError>,
{
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

// ---------------------------------------------------------------- oracles

/// Right derivative of a scalar tracking cost, from its subgradient calculus.
fn right_derivative(model: &CostModel, y: f64) -> f64 {
    match *model {
        CostModel::ConsensusAvg { u } => y - u,
        CostModel::ConsensusMax { u } => {
            if y < u {
                f64::NEG_INFINITY
            } else {
                y - u
            }
        }
        CostModel::ConsensusMedian { u } => {
            if y >= u {
                1.0
            } else {
                -1.0
            }
        }
        CostModel::LogisticRidge(_) => unreachable!("scalar costs only"),
    }
}

/// `argmin_y f(y) + (w/2)(y - v)^2` for a scalar cost: bisection for the
/// smallest point where the right derivative of the objective is nonnegative.
pub fn scalar_prox_oracle(model: &CostModel, v: f64, w: f64) -> f64 {
    let u = model.signal().expect("scalar cost");
    let (mut lo, mut hi) = (u.min(v) - 1.0, u.max(v) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if right_derivative(model, mid) + w * (mid - v) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Golden-section minimizer of a convex scalar function on `[lo, hi]`.
pub fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

fn prox_objective(model: &CostModel, v: &[f64], w: f64, y: &[f64]) -> f64 {
    model.value(y) + 0.5 * w * y.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
}

pub fn scalar_model(family: u8, u: f64) -> CostModel {
    match family % 3 {
        0 => CostModel::ConsensusAvg { u },
        1 => CostModel::ConsensusMax { u },
        _ => CostModel::ConsensusMedian { u },
    }
}

/// Log-uniform weight in `[1e-3, 1e3]`.
fn weight() -> impl Strategy<Value = f64> {
    (-3.0..3.0f64).prop_map(|e| 10f64.powf(e))
}

pub fn logistic_model(seed: u64) -> CostModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = rng.gen_range(1..=25);
    let dim = rng.gen_range(1..=5);
    let generator = ClassificationGenerator::new(samples, dim, 1.0, 0.5, rng.gen_range(0.01..0.5), &mut rng).unwrap();
    generator.sample_agent(&mut rng).unwrap()
}

// --------------------------------------------------------------- networks

/// Connected random graph on 2..=8 agents with consensus or logistic costs.
pub struct ClosedNetwork {
    pub graph: GraphSnapshot,
    pub costs: AgentCosts,
    pub params: AdmmParams,
    pub state: NetworkState,
}

pub fn closed_network(seed: u64, family: u8, random_state: bool) -> ClosedNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=8);
    let graph = random_graph(n, rng.gen_range(0.0..1.0), &mut rng);
    let costs = network_costs(&graph, family, &mut rng);
    let params = AdmmParams::new(rng.gen_range(0.05..0.99), rng.gen_range(0.1..3.0)).unwrap();
    let state = if random_state {
        let x = graph
            .ordered_edges()
            .map(|e| (e, (0..costs.dim()).map(|_| rng.gen_range(-10.0..10.0)).collect()))
            .collect();
        NetworkState::from_edge_states(&graph, x, &costs, &params).unwrap()
    } else {
        NetworkState::initialize(&graph, &costs, &params).unwrap()
    };
    ClosedNetwork { graph, costs, params, state }
}

/// Families 0..=2 are avg/max/median with signals in `[-5, 5]`; 3 is logistic.
fn network_costs(g: &GraphSnapshot, family: u8, rng: &mut ChaCha8Rng) -> AgentCosts {
    if family == 3 {
        let dim = rng.gen_range(1..=4);
        let generator = ClassificationGenerator::new(rng.gen_range(2..=15), dim, 1.0, 0.5, 0.1, rng).unwrap();
        AgentCosts::from_models(g.agents().map(|a| (a, generator.sample_agent(rng).unwrap()))).unwrap()
    } else {
        AgentCosts::from_models(g.agents().map(|a| (a, scalar_model(family, rng.gen_range(-5.0..5.0))))).unwrap()
    }
}

pub fn max_abs_diff(a: &EdgeStates, b: &EdgeStates) -> f64 {
    let mut worst = 0.0f64;
    for (k, v) in a {
        match b.get(k) {
            Some(w) => {
                for (p, q) in v.iter().zip(w) {
                    worst = worst.max((p - q).abs());
                }
            }
            None => return f64::INFINITY,
        }
    }
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    worst
}

pub fn max_abs_diff_y(a: &BTreeMap<AgentId, Vec<f64>>, b: &BTreeMap<AgentId, Vec<f64>>) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .map(|(k, v)| {
            b.get(k).map_or(f64::INFINITY, |w| v.iter().zip(w).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max))
        })
        .fold(0.0, f64::max)
}

/// Largest per-component gap between the engine and the dense form over `ticks`.
pub fn compact_gap(net: &ClosedNetwork, ticks: usize) -> f64 {
    let m = CompactOperatorMatrices::new(&net.graph, net.costs.dim(), net.params.rho).unwrap();
    let mut s = net.state.clone();
    let mut x = m.stack_x(&s.x).unwrap();
    let mut y = m.stack_y(&s.y).unwrap();
    let mut worst = 0.0f64;
    for _ in 0..ticks {
        s = admm_tick(&s, &net.graph, &net.graph, &net.costs, &net.params).unwrap();
        (x, y) = compact_tick(&x, &y, &m, &net.costs, net.params.alpha).unwrap();
        worst = worst.max(max_abs_diff(&s.x, &m.unstack_x(&x))).max(max_abs_diff_y(&s.y, &m.unstack_y(&y)));
    }
    worst
}

/// Residual of `(I + P) x = 2 rho P A (1 (x) y*)` in the dense form.
pub fn tsi_system_residual(g: &GraphSnapshot, x: &EdgeStates, y_star: &[f64], rho: f64) -> f64 {
    let m = CompactOperatorMatrices::new(g, y_star.len(), rho).unwrap();
    let xv = m.stack_x(x).unwrap();
    let ys = DVector::from_iterator(m.agent_len(), (0..g.n_agents()).flat_map(|_| y_star.iter().copied()));
    let lhs = &xv + &m.p * &xv;
    let rhs = (&m.p * (&m.a * ys)) * (2.0 * rho);
    (lhs - rhs).abs().max()
}

/// Ticks run on a closed network until the normalized consensus distance
/// falls to `tol`, or `None` within `budget` ticks.
pub fn ticks_to_consensus(net: &ClosedNetwork, tol: f64, budget: usize) -> Option<usize> {
    let set = centralized_solve(&net.costs).unwrap().set;
    let mut s = net.state.clone();
    for k in 1..=budget {
        s = admm_tick(&s, &net.graph, &net.graph, &net.costs, &net.params).unwrap();
        if consensus_distance(&s.y, &set).unwrap() <= tol {
            return Some(k);
        }
    }
    None
}

// ----------------------------------------------------------- labeled space

fn labeled(entries: &BTreeMap<u64, f64>) -> LabeledVector {
    LabeledVector::from_entries(entries.iter().map(|(l, v)| (Label::Agent(*l), *v))).unwrap()
}

fn vector_strategy() -> impl Strategy<Value = BTreeMap<u64, f64>> {
    proptest::collection::btree_map(0u64..10, -50.0..50.0f64, 0..10)
}

/// Intervals with occasional infinite ends.
fn interval_strategy() -> impl Strategy<Value = Interval> {
    (-20.0..20.0f64, 0.0..10.0f64, 0u8..6).prop_map(|(lo, width, kind)| match kind {
        0 => Interval::new(f64::NEG_INFINITY, lo).unwrap(),
        1 => Interval::new(lo, f64::INFINITY).unwrap(),
        2 => Interval::point(lo).unwrap(),
        _ => Interval::new(lo, lo + width).unwrap(),
    })
}

fn box_strategy() -> impl Strategy<Value = TargetSet> {
    proptest::collection::btree_map(0u64..10, interval_strategy(), 1..10)
        .prop_map(|b| TargetSet::from(LabeledBox::new(b.into_iter().map(|(l, i)| (Label::Agent(l), i)))))
}

/// Pairs `(2k, 2k+1)` for a random subset of `k`.
fn affine_strategy() -> impl Strategy<Value = TargetSet> {
    proptest::collection::btree_map(0u64..5, -30.0..30.0f64, 1..5).prop_map(|pairs| {
        TargetSet::from(
            AffineEdgeSet::new(pairs.into_iter().map(|(k, t)| AffinePair {
                a: Label::Agent(2 * k),
                b: Label::Agent(2 * k + 1),
                target: t,
            }))
            .unwrap(),
        )
    })
}

fn set_strategy() -> impl Strategy<Value = TargetSet> {
    prop_oneof![box_strategy(), affine_strategy()]
}

fn distance_symmetry(cases: u32) -> Result<(), String> {
    run(cases, (vector_strategy(), vector_strategy()), |(a, b)| {
        let (x, y) = (labeled(&a), labeled(&b));
        prop_assert_eq!(open_distance(&x, &y), open_distance(&y, &x));
        Ok(())
    })
}

fn restriction_bound(cases: u32) -> Result<(), String> {
    let s = (vector_strategy(), vector_strategy(), proptest::collection::vec(-50.0..50.0f64, 20));
    run(cases, s, |(a, b, fill)| {
        let (x, y) = (labeled(&a), labeled(&b));
        let d = open_distance(&x, &y);
        if a.keys().eq(b.keys()) {
            let full = a.iter().map(|(l, v)| (v - b[l]).powi(2)).sum::<f64>().sqrt();
            prop_assert!((d - full).abs() <= 1e-12, "equal labels: {d} vs {full}");
        } else {
            // Extend both over the union with arbitrary values.
            let union: BTreeSet<u64> = a.keys().chain(b.keys()).copied().collect();
            let mut full = 0.0;
            for (k, l) in union.iter().enumerate() {
                let p = a.get(l).copied().unwrap_or(fill[k % 10]);
                let q = b.get(l).copied().unwrap_or(fill[10 + k % 10]);
                full += (p - q) * (p - q);
            }
            prop_assert!(d <= full.sqrt() + 1e-12, "restriction: {d} > {}", full.sqrt());
        }
        Ok(())
    })
}

/// Random member of a target set over its labels.
fn member(set: &TargetSet, seed: u64) -> LabeledVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = LabeledVector::new();
    match set {
        TargetSet::Box(b) => {
            for (l, iv) in b.iter() {
                let lo = if iv.lo().is_finite() { iv.lo() } else { iv.hi().min(0.0) - 50.0 };
                let hi = if iv.hi().is_finite() { iv.hi() } else { lo.max(0.0) + 50.0 };
                out.set(l.clone(), if lo == hi { lo } else { rng.gen_range(lo..=hi) }).unwrap();
            }
        }
        TargetSet::Affine(a) => {
            for p in a.pairs() {
                let u: f64 = rng.gen_range(-50.0..50.0);
                out.set(p.a.clone(), u).unwrap();
                out.set(p.b.clone(), p.target - u).unwrap();
            }
        }
    }
    out
}

fn projection_optimality(cases: u32) -> Result<(), String> {
    run(cases, (vector_strategy(), set_strategy(), any::<u64>()), |(a, set, seed)| {
        let x = labeled(&a);
        let d = set.distance(&x).map_err(|e| fail(e.to_string()))?;
        let p = set.project(&x).map_err(|e| fail(e.to_string()))?;
        prop_assert!((d - open_distance(&x, &p)).abs() <= 1e-12, "distance {d} vs {}", open_distance(&x, &p));
        for k in 0..20 {
            let m = member(&set, seed.wrapping_add(k));
            prop_assert!(open_distance(&x, &m) >= d - 1e-12, "member closer than the projection");
        }
        Ok(())
    })
}

fn projection_idempotence(cases: u32) -> Result<(), String> {
    run(cases, (vector_strategy(), set_strategy()), |(a, set)| {
        let p = set.project(&labeled(&a)).map_err(|e| fail(e.to_string()))?;
        let q = set.project(&p).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(p, q);
        Ok(())
    })
}

/// Re-targets a set over the same labels.
fn sibling(set: &TargetSet, seed: u64) -> TargetSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match set {
        TargetSet::Box(b) => TargetSet::from(LabeledBox::new(b.iter().map(|(l, _)| {
            let lo: f64 = rng.gen_range(-20.0..20.0);
            let iv = match rng.gen_range(0..4) {
                0 => Interval::new(f64::NEG_INFINITY, lo).unwrap(),
                1 => Interval::new(lo, f64::INFINITY).unwrap(),
                _ => Interval::new(lo, lo + rng.gen_range(0.0..10.0)).unwrap(),
            };
            (l.clone(), iv)
        }))),
        TargetSet::Affine(a) => TargetSet::from(
            AffineEdgeSet::new(
                a.pairs().iter().map(|p| AffinePair { target: rng.gen_range(-30.0..30.0), ..p.clone() }),
            )
            .unwrap(),
        ),
    }
}

fn shadow_triangle(cases: u32) -> Result<(), String> {
    run(cases, (set_strategy(), any::<u64>(), proptest::collection::vec(-60.0..60.0f64, 10)), |(x_set, seed, z)| {
        let y_set = sibling(&x_set, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shadow = shadow_distance(&x_set, &y_set, 100, &mut rng).map_err(|e| fail(e.to_string()))?;
        prop_assert!(shadow.exact, "same-label sets should use the closed form");
        let z = LabeledVector::from_entries(x_set.labels().iter().map(|l| match l {
            Label::Agent(k) => (l.clone(), z[*k as usize]),
            _ => (l.clone(), 0.0),
        }))
        .unwrap();
        let dx = x_set.distance(&z).unwrap();
        let dy = y_set.distance(&z).unwrap();
        prop_assert!(dx <= dy + shadow.value + 1e-9, "{dx} > {dy} + {}", shadow.value);
        Ok(())
    })
}

// ------------------------------------------------------------------ costs

fn prox_optimality(cases: u32) -> Result<(), String> {
    let s = (0u8..4, -20.0..20.0f64, weight(), any::<u64>());
    run(cases, s, |(family, u, w, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let model = if family == 3 { logistic_model(seed) } else { scalar_model(family, u) };
        let v: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-20.0..20.0)).collect();
        let y = model.prox(&v, w).map_err(|e| fail(e.to_string()))?;
        let best = prox_objective(&model, &v, w, &y);
        prop_assert!(best.is_finite(), "prox left the domain");
        for k in 0..1000 {
            let scale = 10f64.powi(k % 6 - 3);
            let z: Vec<f64> = y.iter().map(|c| c + scale * rng.gen_range(-1.0..1.0)).collect();
            let f = prox_objective(&model, &v, w, &z);
            prop_assert!(best <= f + 1e-8, "probe {z:?} beats prox {y:?}: {f} < {best}");
        }
        if family == 1 || family == 2 {
            let (lo, hi) = (u.min(v[0]) - 1.0, u.max(v[0]) + 1.0);
            let phi = |t: f64| prox_objective(&model, &v, w, &[t]);
            for k in 0..=10_000 {
                let t = lo + (hi - lo) * k as f64 / 10_000.0;
                prop_assert!(best <= phi(t) + 1e-8, "grid point {t} beats prox");
            }
            let g = golden_section(phi, lo, hi);
            prop_assert!(best <= phi(g) + 1e-8, "golden-section point {g} beats prox");
        }
        Ok(())
    })
}

fn prox_nonexpansive(cases: u32) -> Result<(), String> {
    let s = (0u8..3, -20.0..20.0f64, weight(), -50.0..50.0f64, -50.0..50.0f64);
    run(cases, s, |(family, u, w, v1, v2)| {
        let model = scalar_model(family, u);
        let p1 = model.prox(&[v1], w).unwrap()[0];
        let p2 = model.prox(&[v2], w).unwrap()[0];
        prop_assert!((p1 - p2).abs() <= (v1 - v2).abs() + 1e-12);
        prop_assert!((p1 - p2).powi(2) <= (p1 - p2) * (v1 - v2) + 1e-9, "not firmly nonexpansive");
        Ok(())
    })
}

/// Worst gap between a closed-form scalar prox and the bisection oracle.
pub fn closed_form_gap(family: u8, u: f64, w: f64, v: f64) -> f64 {
    let model = scalar_model(family, u);
    (model.prox(&[v], w).unwrap()[0] - scalar_prox_oracle(&model, v, w)).abs()
}

pub fn triple_strategy() -> impl Strategy<Value = (f64, f64, f64)> {
    (-100.0..100.0f64, weight(), -100.0..100.0f64)
}

fn closed_form_vs_oracle(cases: u32) -> Result<(), String> {
    run(cases, triple_strategy(), |(u, w, v)| {
        for family in 0..3 {
            let gap = closed_form_gap(family, u, w, v);
            prop_assert!(gap <= 1e-8, "family {family}: gap {gap}");
        }
        Ok(())
    })
}

/// Norm of the gradient of the prox objective at the returned point.
pub fn logistic_prox_residual(seed: u64, w: f64) -> f64 {
    let model = logistic_model(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let v: Vec<f64> = (0..model.dim()).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let y = model.prox(&v, w).unwrap();
    let g = model.gradient(&y).unwrap();
    g.iter().zip(y.iter().zip(&v)).map(|(g, (y, v))| (g + w * (y - v)).powi(2)).sum::<f64>().sqrt()
}

fn logistic_inner_precision(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), (-2.0..2.0f64).prop_map(|e| 10f64.powf(e))), |(seed, w)| {
        let r = logistic_prox_residual(seed, w);
        prop_assert!(r <= 1e-10, "residual {r}");
        Ok(())
    })
}

// -------------------------------------------------------------- open admm

/// Small open consensus scenario with random churn.
fn churn_config(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = builtin_scenario("consensus-open", Scale::Desk).unwrap();
    c.scenario.seed = seed;
    c.scenario.horizon = 15;
    c.scenario.reps = 1;
    c.graph.n0 = rng.gen_range(1..=15);
    c.graph.edge_prob = rng.gen_range(0.0..1.0);
    let lambda = rng.gen_range(0.0..3.0);
    c.churn.process = match rng.gen_range(0..3) {
        0 => ChurnProcess::constant_poisson(lambda),
        1 => ChurnProcess::Replacement { lambda },
        _ => ChurnProcess::tracking_schedule(0.01),
    };
    c.churn.attachment = if rng.gen_bool(0.5) {
        Attachment::AverageDegree
    } else {
        Attachment::Bernoulli { p: rng.gen_range(0.0..1.0) }
    };
    c.costs = CostsSection::consensus(CostFamily::ConsensusAvg, 0.0, 5.0, 0.2);
    c.admm.params.init =
        [InitVariant::LocalOptimum, InitVariant::Zero, InitVariant::NeighborAverage][rng.gen_range(0..3)];
    c
}

fn label_consistency(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let config = churn_config(seed);
        let mut sim = Simulation::new(&config, 0).map_err(|e| fail(e.to_string()))?;
        let mut seen: BTreeSet<AgentId> = sim.graph().agents().collect();
        for _ in 0..config.scenario.horizon {
            sim.step().map_err(|e| fail(e.to_string()))?;
            let g = sim.graph();
            let edges: BTreeSet<_> = g.ordered_edges().collect();
            let labels: BTreeSet<_> = sim.state().x.keys().copied().collect();
            prop_assert_eq!(&labels, &edges);
            let agents: BTreeSet<_> = g.agents().collect();
            let outputs: BTreeSet<_> = sim.state().y.keys().copied().collect();
            prop_assert_eq!(&outputs, &agents);
            prop_assert!(g.is_connected());
            for a in &sim.last_delta().arrived {
                prop_assert!(seen.insert(a.id), "identifier {} reused", a.id);
            }
        }
        Ok(())
    })
}

fn residual_monotone(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let net = closed_network(seed, 0, true);
        let mut prev = net.state.clone();
        let mut last = f64::INFINITY;
        for k in 0..200 {
            let next = admm_tick(&prev, &net.graph, &net.graph, &net.costs, &net.params).unwrap();
            let r = prev.x.iter().map(|(e, v)| (v[0] - next.x[e][0]).powi(2)).sum::<f64>().sqrt();
            prop_assert!(r <= last + 1e-12, "tick {k}: residual rose from {last} to {r}");
            last = r;
            prev = next;
        }
        Ok(())
    })
}

fn compact_equivalence(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0u8..3), |(seed, family)| {
        let gap = compact_gap(&closed_network(seed, family, true), 20);
        prop_assert!(gap <= 1e-12, "gap {gap}");
        Ok(())
    })
}

pub const EXACTNESS_BUDGET: usize = 100_000;

fn closed_exactness(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0u8..3), |(seed, family)| {
        let net = closed_network(seed, family, true);
        prop_assert!(
            ticks_to_consensus(&net, 1e-8, EXACTNESS_BUDGET).is_some(),
            "family {family}: no consensus within {EXACTNESS_BUDGET} ticks"
        );
        Ok(())
    })
}

// ------------------------------------------------------- reference oracles

/// `(system residual, x drift, y drift)` of the invariant-set fixed point
/// under one tick.
pub fn fixed_point_residuals(net: &ClosedNetwork) -> (f64, f64, f64) {
    let sol = centralized_solve(&net.costs).unwrap();
    let rho = net.params.rho;
    let x = tsi_fixed_point(&net.graph, &net.costs, &sol.y_star, rho).unwrap();
    let sys = tsi_system_residual(&net.graph, &x, &sol.y_star, rho);
    let s = NetworkState::from_edge_states(&net.graph, x.clone(), &net.costs, &net.params).unwrap();
    let next = admm_tick(&s, &net.graph, &net.graph, &net.costs, &net.params).unwrap();
    let y_star: BTreeMap<AgentId, Vec<f64>> = net.graph.agents().map(|a| (a, sol.y_star.clone())).collect();
    (sys, max_abs_diff(&x, &next.x), max_abs_diff_y(&y_star, &next.y).max(max_abs_diff_y(&y_star, &s.y)))
}

fn tsi_fixed_points(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), 0u8..4), |(seed, family)| {
        let (sys, dx, dy) = fixed_point_residuals(&closed_network(seed, family, false));
        let tol = if family == 3 { 1e-7 } else { 1e-9 };
        prop_assert!(sys <= 1e-12, "system residual {sys}");
        prop_assert!(dx <= tol && dy <= tol, "family {family}: drift x {dx} y {dy}");
        Ok(())
    })
}

fn random_matrices(seed: u64) -> CompactOperatorMatrices {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=MAX_ORACLE_AGENTS);
    let g = random_graph(n, rng.gen_range(0.0..1.0), &mut rng);
    CompactOperatorMatrices::new(&g, rng.gen_range(1..=3), rng.gen_range(0.01..10.0)).unwrap()
}

const MAX_ORACLE_AGENTS: usize = 12;

fn involution(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let m = random_matrices(seed);
        prop_assert_eq!(m.involution_residual(), 0.0);
        Ok(())
    })
}

fn row_sums(cases: u32) -> Result<(), String> {
    run(cases, any::<u64>(), |seed| {
        let m = random_matrices(seed);
        // Structure is exact: each agent row of D A^T has one entry per
        // neighbor edge, all equal.
        let dat = &m.d * m.a.transpose();
        for k in 0..dat.nrows() {
            let nz: Vec<f64> = dat.row(k).iter().copied().filter(|v| *v != 0.0).collect();
            prop_assert!(nz.windows(2).all(|w| w[0] == w[1]), "unequal weights in row {k}");
        }
        let r = m.row_sum_residual();
        prop_assert!(r <= 1e-14, "row sum residual {r}");
        Ok(())
    })
}

// --------------------------------------------------------------- analysis

fn relabel_invariance(cases: u32) -> Result<(), String> {
    let s = (proptest::collection::vec(-10.0..10.0f64, 1..12), -10.0..10.0f64, any::<u64>());
    run(cases, s, |(ys, star, shift)| {
        let set = SolutionSet::Point(vec![star]);
        let a: BTreeMap<AgentId, Vec<f64>> =
            ys.iter().enumerate().map(|(k, y)| (AgentId(k as u64), vec![*y])).collect();
        let b: BTreeMap<AgentId, Vec<f64>> = ys
            .iter()
            .rev()
            .enumerate()
            .map(|(k, y)| (AgentId((k as u64).wrapping_mul(7).wrapping_add(shift % 1000)), vec![*y]))
            .collect();
        let (da, db) = (consensus_distance(&a, &set).unwrap(), consensus_distance(&b, &set).unwrap());
        prop_assert!((da - db).abs() <= 1e-12);
        Ok(())
    })
}

fn bound_monotone(cases: u32) -> Result<(), String> {
    let s = (0.0..0.9f64, 0.1..5.0f64, 0.0..2.0f64, 0.0..10.0f64, 0.0..1.0f64, 1usize..500);
    run(cases, s, |(gamma, rho, sigma, omega, bump, n)| {
        let base = BoundInputs::from_rates(gamma, 1.0, rho, sigma, omega).unwrap();
        let more = BoundInputs::from_rates(gamma, 1.0, rho, sigma + bump, omega + bump).unwrap();
        prop_assert!(more.radius() >= base.radius());
        prop_assert!(base.consensus_bound(n + 1) >= base.consensus_bound(n));
        Ok(())
    })
}
