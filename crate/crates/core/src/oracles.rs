//! Reference engines used to check the per-agent implementation: the dense
//! matrix form of a closed-network tick, explicit invariant-set members and
//! projections, and a centralized solver.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::admm::{AgentCosts, NetworkState};
use crate::costs::{accelerated_descent, CostModel};
use crate::error::{Error, Result};
use crate::graph::{AgentId, GraphSnapshot};
use crate::labeled_space::{AffineEdgeSet, AffinePair, Interval, Label, LabeledVector};

/// Largest network the dense oracle accepts.
pub const MAX_DENSE_AGENTS: usize = 32;

pub type EdgeStates = BTreeMap<(AgentId, AgentId), Vec<f64>>;

/// Dense operators of one closed-network tick.
///
/// Edge states are stacked by unordered edge `e` (sorted, `i < j`), then side
/// (`(i,j)` before `(j,i)`), then coordinate: index `(2e + side) p + l`.
/// Outputs are stacked by agent, then coordinate.
#[derive(Debug, Clone)]
pub struct CompactOperatorMatrices {
    pub agents: Vec<AgentId>,
    pub edges: Vec<(AgentId, AgentId)>,
    pub dim: usize,
    pub rho: f64,
    /// Lifts outputs to edges: row `(i,j)` copies `y[i]`.
    pub a: DMatrix<f64>,
    /// Block diagonal of `1/(rho eta_i)`; zero for an isolated agent.
    pub d: DMatrix<f64>,
    /// Swaps the two directions of every edge.
    pub p: DMatrix<f64>,
    /// Per edge, the `2 x n` selector with rows `e_i` and `e_j`.
    pub lambda: Vec<DMatrix<f64>>,
    pub pi: DMatrix<f64>,
    /// `pi + I`.
    pub j: DMatrix<f64>,
    degrees: Vec<usize>,
}

impl CompactOperatorMatrices {
    pub fn new(g: &GraphSnapshot, dim: usize, rho: f64) -> Result<Self> {
        let n = g.n_agents();
        if n > MAX_DENSE_AGENTS {
            return Err(Error::InvalidConfig(format!(
                "dense oracle supports at most {MAX_DENSE_AGENTS} agents (got {n})"
            )));
        }
        let agents: Vec<AgentId> = g.agents().collect();
        let pos: BTreeMap<AgentId, usize> = agents.iter().enumerate().map(|(k, a)| (*a, k)).collect();
        let edges: Vec<(AgentId, AgentId)> = g.edges().collect();
        let rows = 2 * edges.len() * dim;
        let cols = n * dim;

        let mut a = DMatrix::zeros(rows, cols);
        let mut p = DMatrix::zeros(rows, rows);
        let mut lambda = Vec::with_capacity(edges.len());
        for (e, &(i, j)) in edges.iter().enumerate() {
            for l in 0..dim {
                let r0 = 2 * e * dim + l;
                let r1 = (2 * e + 1) * dim + l;
                a[(r0, pos[&i] * dim + l)] = 1.0;
                a[(r1, pos[&j] * dim + l)] = 1.0;
                p[(r0, r1)] = 1.0;
                p[(r1, r0)] = 1.0;
            }
            let mut sel = DMatrix::zeros(2, n);
            sel[(0, pos[&i])] = 1.0;
            sel[(1, pos[&j])] = 1.0;
            lambda.push(sel);
        }
        let degrees: Vec<usize> = agents.iter().map(|&i| g.degree(i)).collect();
        let mut d = DMatrix::zeros(cols, cols);
        for (k, &eta) in degrees.iter().enumerate() {
            if eta > 0 {
                for l in 0..dim {
                    d[(k * dim + l, k * dim + l)] = 1.0 / (rho * eta as f64);
                }
            }
        }
        let pi = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let j = &pi + DMatrix::identity(2, 2);
        Ok(Self { agents, edges, dim, rho, a, d, p, lambda, pi, j, degrees })
    }

    pub fn edge_len(&self) -> usize {
        2 * self.edges.len() * self.dim
    }

    pub fn agent_len(&self) -> usize {
        self.agents.len() * self.dim
    }

    pub fn stack_x(&self, x: &EdgeStates) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.edge_len());
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            for (side, key) in [(i, j), (j, i)].into_iter().enumerate() {
                let v = x
                    .get(&key)
                    .ok_or_else(|| Error::InvalidDelta(format!("missing state for edge ({},{})", key.0, key.1)))?;
                if v.len() != self.dim {
                    return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
                }
                for (l, val) in v.iter().enumerate() {
                    out[(2 * e + side) * self.dim + l] = *val;
                }
            }
        }
        Ok(out)
    }

    pub fn stack_y(&self, y: &BTreeMap<AgentId, Vec<f64>>) -> Result<DVector<f64>> {
        let mut out = DVector::zeros(self.agent_len());
        for (k, a) in self.agents.iter().enumerate() {
            let v = y.get(a).ok_or_else(|| Error::InvalidDelta(format!("missing output of agent {a}")))?;
            if v.len() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, got: v.len() });
            }
            for (l, val) in v.iter().enumerate() {
                out[k * self.dim + l] = *val;
            }
        }
        Ok(out)
    }

    pub fn unstack_x(&self, x: &DVector<f64>) -> EdgeStates {
        let mut out = BTreeMap::new();
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            for (side, key) in [(i, j), (j, i)].into_iter().enumerate() {
                let start = (2 * e + side) * self.dim;
                out.insert(key, x.rows(start, self.dim).iter().copied().collect());
            }
        }
        out
    }

    pub fn unstack_y(&self, y: &DVector<f64>) -> BTreeMap<AgentId, Vec<f64>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(k, a)| (*a, y.rows(k * self.dim, self.dim).iter().copied().collect()))
            .collect()
    }

    /// Largest deviation of `P P` from the identity.
    pub fn involution_residual(&self) -> f64 {
        let pp = &self.p * &self.p;
        (pp - DMatrix::identity(self.p.nrows(), self.p.ncols())).abs().max()
    }

    /// Largest deviation from 1 of a row sum of `rho D A^T`, over agents with
    /// at least one neighbor.
    pub fn row_sum_residual(&self) -> f64 {
        let m = (&self.d * self.a.transpose()) * self.rho;
        let mut worst = 0.0f64;
        for (k, &eta) in self.degrees.iter().enumerate() {
            if eta == 0 {
                continue;
            }
            for l in 0..self.dim {
                let s: f64 = m.row(k * self.dim + l).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
        worst
    }
}

/// One tick of the dense form:
/// `x' = [(1 - alpha) I - alpha P] x + 2 alpha rho P A y` and
/// `y' = prox(D A^T x')` blockwise, with each agent's prox weighted by `rho eta_i`.
pub fn compact_tick(
    x: &DVector<f64>,
    y: &DVector<f64>,
    m: &CompactOperatorMatrices,
    costs: &AgentCosts,
    alpha: f64,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if x.len() != m.edge_len() {
        return Err(Error::DimensionMismatch { expected: m.edge_len(), got: x.len() });
    }
    if y.len() != m.agent_len() {
        return Err(Error::DimensionMismatch { expected: m.agent_len(), got: y.len() });
    }
    let rho = m.rho;
    let px = &m.p * x;
    let pay = &m.p * (&m.a * y);
    let x_next = x * (1.0 - alpha) - px * alpha + pay * (2.0 * alpha * rho);
    let v = &m.d * (m.a.transpose() * &x_next);
    let mut y_next = DVector::zeros(m.agent_len());
    for (k, &agent) in m.agents.iter().enumerate() {
        let model = costs.get(agent).ok_or_else(|| Error::InvalidDelta(format!("agent {agent} has no cost model")))?;
        let block: Vec<f64> = if m.degrees[k] == 0 {
            model.local_minimizer()?
        } else {
            let vk: Vec<f64> = v.rows(k * m.dim, m.dim).iter().copied().collect();
            let warm: Vec<f64> = y.rows(k * m.dim, m.dim).iter().copied().collect();
            model.prox_from(&vk, rho * m.degrees[k] as f64, Some(&warm))?
        };
        for (l, val) in block.into_iter().enumerate() {
            y_next[k * m.dim + l] = val;
        }
    }
    Ok((x_next, y_next))
}

/// Minimizers of the network objective `sum_i f_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum SolutionSet {
    Point(Vec<f64>),
    /// Scalar interval, from the median cost with an even number of agents.
    Interval(Interval),
}

impl SolutionSet {
    /// Member of the set closest to `target`.
    pub fn nearest(&self, target: &[f64]) -> Vec<f64> {
        match self {
            SolutionSet::Point(p) => p.clone(),
            SolutionSet::Interval(iv) => vec![iv.clamp(target[0])],
        }
    }

    /// Canonical member: the point, or the lower end of the interval.
    pub fn representative(&self) -> Vec<f64> {
        match self {
            SolutionSet::Point(p) => p.clone(),
            SolutionSet::Interval(iv) => vec![iv.lo()],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SolutionSet::Point(p) => p.len(),
            SolutionSet::Interval(_) => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralizedSolution {
    pub set: SolutionSet,
    /// Canonical minimizer; the lower median when the median set is an interval.
    pub y_star: Vec<f64>,
    pub value: f64,
}

/// Minimizes `sum_i f_i` over a common decision variable. All agents must
/// carry the same kind of cost.
pub fn centralized_solve(costs: &AgentCosts) -> Result<CentralizedSolution> {
    centralized_solve_from(costs, None)
}

/// As [`centralized_solve`], warm-starting the iterative solver at `start`.
pub fn centralized_solve_from(costs: &AgentCosts, start: Option<&[f64]>) -> Result<CentralizedSolution> {
    let models: Vec<&CostModel> = costs.iter().map(|(_, m)| m).collect();
    if models.is_empty() {
        return Err(Error::EmptySet);
    }
    let signals = || -> Result<Vec<f64>> {
        models
            .iter()
            .map(|m| m.signal().ok_or_else(|| Error::InvalidConfig("mixed cost kinds in one network".into())))
            .collect()
    };
    let (set, y_star) = match models[0] {
        CostModel::ConsensusAvg { .. } => {
            let u = signals()?;
            let mean = u.iter().sum::<f64>() / u.len() as f64;
            (SolutionSet::Point(vec![mean]), vec![mean])
        }
        CostModel::ConsensusMax { .. } => {
            let u = signals()?;
            let top = u.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            (SolutionSet::Point(vec![top]), vec![top])
        }
        CostModel::ConsensusMedian { .. } => {
            let mut u = signals()?;
            u.sort_by(f64::total_cmp);
            let n = u.len();
            if n % 2 == 1 {
                (SolutionSet::Point(vec![u[n / 2]]), vec![u[n / 2]])
            } else {
                let lo = u[n / 2 - 1];
                (SolutionSet::Interval(Interval::new(lo, u[n / 2])?), vec![lo])
            }
        }
        CostModel::LogisticRidge(_) => {
            let parts: Vec<_> = models
                .iter()
                .map(|m| match m {
                    CostModel::LogisticRidge(l) => Ok(l),
                    _ => Err(Error::InvalidConfig("mixed cost kinds in one network".into())),
                })
                .collect::<Result<_>>()?;
            let dim = parts[0].gradient(&vec![0.0; models[0].dim()]).len();
            let lip: f64 = parts.iter().map(|l| l.smoothness()).sum();
            let mu: f64 = parts.iter().map(|l| l.ridge()).sum();
            let mut scratch = vec![0.0; dim];
            let y = accelerated_descent(
                |y, g| {
                    g.iter_mut().for_each(|v| *v = 0.0);
                    for l in &parts {
                        l.gradient_into(y, &mut scratch);
                        for (a, b) in g.iter_mut().zip(&scratch) {
                            *a += b;
                        }
                    }
                },
                start.filter(|s| s.len() == dim).map_or_else(|| vec![0.0; dim], <[f64]>::to_vec),
                lip,
                mu,
            )?;
            (SolutionSet::Point(y.clone()), y)
        }
    };
    let value = models.iter().map(|m| m.value(&y_star)).sum();
    Ok(CentralizedSolution { set, y_star, value })
}

/// Member of the invariant set with both directions of every edge equal to
/// `rho y*`. It satisfies the per-edge sum constraint but is a fixed point of
/// a tick only when every agent's own minimizer is `y*`.
pub fn tsi_canonical_member(g: &GraphSnapshot, y_star: &[f64], rho: f64) -> EdgeStates {
    let v: Vec<f64> = y_star.iter().map(|y| rho * y).collect();
    g.ordered_edges().map(|e| (e, v.clone())).collect()
}

/// Subgradients `g_i` of each `f_i` at `y*` with `sum_i g_i = 0`.
pub fn balanced_subgradients(costs: &AgentCosts, y_star: &[f64]) -> Result<BTreeMap<AgentId, Vec<f64>>> {
    let dim = y_star.len();
    let agents: Vec<(AgentId, &CostModel)> = costs.iter().collect();
    let mut out = BTreeMap::new();
    let first = agents.first().ok_or(Error::EmptySet)?.1;
    match first {
        CostModel::ConsensusAvg { .. } => {
            for (a, m) in &agents {
                out.insert(*a, vec![y_star[0] - m.signal().unwrap_or(0.0)]);
            }
        }
        CostModel::ConsensusMax { .. } => {
            let ys = y_star[0];
            let mut others = 0.0;
            let mut ties = Vec::new();
            for (a, m) in &agents {
                let u = m.signal().unwrap_or(0.0);
                if u < ys {
                    out.insert(*a, vec![ys - u]);
                    others += ys - u;
                } else {
                    ties.push(*a);
                }
            }
            if ties.is_empty() {
                return Err(Error::InvalidConfig("max solution is not attained by any agent".into()));
            }
            for a in &ties {
                out.insert(*a, vec![-others / ties.len() as f64]);
            }
        }
        CostModel::ConsensusMedian { .. } => {
            let ys = y_star[0];
            let (mut below, mut above) = (0usize, 0usize);
            let mut ties = Vec::new();
            for (a, m) in &agents {
                let u = m.signal().unwrap_or(0.0);
                if u < ys {
                    below += 1;
                    out.insert(*a, vec![1.0]);
                } else if u > ys {
                    above += 1;
                    out.insert(*a, vec![-1.0]);
                } else {
                    ties.push(*a);
                }
            }
            let share = if ties.is_empty() {
                if below != above {
                    return Err(Error::InvalidConfig("point is not a median".into()));
                }
                0.0
            } else {
                (above as f64 - below as f64) / ties.len() as f64
            };
            if share.abs() > 1.0 {
                return Err(Error::InvalidConfig("point is not a median".into()));
            }
            for a in ties {
                out.insert(a, vec![share]);
            }
        }
        CostModel::LogisticRidge(_) => {
            let mut mean = vec![0.0; dim];
            for (a, m) in &agents {
                let g = m.gradient(y_star)?;
                for (s, v) in mean.iter_mut().zip(&g) {
                    *s += v / agents.len() as f64;
                }
                out.insert(*a, g);
            }
            for g in out.values_mut() {
                for (v, s) in g.iter_mut().zip(&mean) {
                    *v -= s;
                }
            }
        }
    }
    Ok(out)
}

/// Fixed point of a closed-network tick inside the invariant set:
/// `x[i,j] = rho y* + phi_i - phi_j` where `L phi = g` for the graph
/// Laplacian `L` and balanced subgradients `g`. Each agent's prox input then
/// returns `y*`, and the relaxed edge update leaves `x` unchanged.
pub fn tsi_fixed_point(g: &GraphSnapshot, costs: &AgentCosts, y_star: &[f64], rho: f64) -> Result<EdgeStates> {
    let agents: Vec<AgentId> = g.agents().collect();
    let n = agents.len();
    if n > MAX_DENSE_AGENTS {
        return Err(Error::InvalidConfig(format!("dense oracle supports at most {MAX_DENSE_AGENTS} agents (got {n})")));
    }
    let pos: BTreeMap<AgentId, usize> = agents.iter().enumerate().map(|(k, a)| (*a, k)).collect();
    let sub = balanced_subgradients(costs, y_star)?;
    let dim = y_star.len();

    // L + 11^T/n is nonsingular on a connected graph and maps mean-zero
    // right-hand sides to mean-zero solutions of L phi = g.
    let mut lap = DMatrix::from_element(n, n, 1.0 / n as f64);
    for (i, j) in g.edges() {
        let (a, b) = (pos[&i], pos[&j]);
        lap[(a, a)] += 1.0;
        lap[(b, b)] += 1.0;
        lap[(a, b)] -= 1.0;
        lap[(b, a)] -= 1.0;
    }
    let mut rhs = DMatrix::zeros(n, dim);
    for (k, a) in agents.iter().enumerate() {
        let gi = sub.get(a).ok_or_else(|| Error::InvalidDelta(format!("agent {a} has no cost model")))?;
        for l in 0..dim {
            rhs[(k, l)] = gi[l];
        }
    }
    let phi = lap.lu().solve(&rhs).ok_or_else(|| Error::InvalidConfig("graph Laplacian system is singular".into()))?;

    Ok(g.ordered_edges()
        .map(|(i, j)| {
            let v = (0..dim).map(|l| rho * y_star[l] + phi[(pos[&i], l)] - phi[(pos[&j], l)]).collect();
            ((i, j), v)
        })
        .collect())
}

/// Nearest point of `{x : x[i,j] + x[j,i] = 2 rho y*}`: both directions of an
/// edge move by half the constraint violation.
pub fn project_to_tsi(x: &EdgeStates, y_star: &[f64], rho: f64) -> EdgeStates {
    let mut out = x.clone();
    for (&(i, j), xij) in x {
        if i > j {
            continue;
        }
        let Some(xji) = x.get(&(j, i)) else { continue };
        let fwd: Vec<f64> = (0..xij.len()).map(|l| xij[l] - (xij[l] + xji[l] - 2.0 * rho * y_star[l]) / 2.0).collect();
        let bwd: Vec<f64> = (0..xij.len()).map(|l| xji[l] - (xij[l] + xji[l] - 2.0 * rho * y_star[l]) / 2.0).collect();
        out.insert((i, j), fwd);
        out.insert((j, i), bwd);
    }
    out
}

/// The invariant set for `y*` as a labeled affine set over edge-coordinate labels.
pub fn tsi_affine_set(g: &GraphSnapshot, y_star: &[f64], rho: f64) -> Result<AffineEdgeSet> {
    AffineEdgeSet::new(g.edges().flat_map(|(i, j)| {
        y_star.iter().enumerate().map(move |(l, y)| AffinePair {
            a: Label::EdgeCoord(i.0, j.0, l),
            b: Label::EdgeCoord(j.0, i.0, l),
            target: 2.0 * rho * y,
        })
    }))
}

/// Edge states as a labeled vector over edge-coordinate labels.
pub fn edge_states_labeled(x: &EdgeStates) -> Result<LabeledVector> {
    LabeledVector::from_entries(
        x.iter()
            .flat_map(|(&(i, j), v)| v.iter().enumerate().map(move |(l, val)| (Label::EdgeCoord(i.0, j.0, l), *val))),
    )
}

/// Runs `ticks` dense ticks from a network state on a fixed graph.
pub fn compact_run(
    state: &NetworkState,
    g: &GraphSnapshot,
    costs: &AgentCosts,
    alpha: f64,
    rho: f64,
    ticks: usize,
) -> Result<Vec<(EdgeStates, BTreeMap<AgentId, Vec<f64>>)>> {
    let m = CompactOperatorMatrices::new(g, costs.dim(), rho)?;
    let mut x = m.stack_x(&state.x)?;
    let mut y = m.stack_y(&state.y)?;
    let mut out = Vec::with_capacity(ticks);
    for _ in 0..ticks {
        (x, y) = compact_tick(&x, &y, &m, costs, alpha)?;
        out.push((m.unstack_x(&x), m.unstack_y(&y)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::admm::{admm_tick, AdmmParams};
    use crate::labeled_space::TargetSet;

    fn consensus(kind: fn(f64) -> CostModel, u: &[f64]) -> AgentCosts {
        AgentCosts::from_models(u.iter().enumerate().map(|(i, &u)| (AgentId(i as u64), kind(u)))).unwrap()
    }

    fn avg(u: f64) -> CostModel {
        CostModel::ConsensusAvg { u }
    }
    fn max(u: f64) -> CostModel {
        CostModel::ConsensusMax { u }
    }
    fn median(u: f64) -> CostModel {
        CostModel::ConsensusMedian { u }
    }

    fn max_diff(a: &EdgeStates, b: &EdgeStates) -> f64 {
        a.iter().map(|(k, v)| v.iter().zip(&b[k]).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)).fold(0.0, f64::max)
    }

    #[test]
    fn closed_form_solutions() {
        let u = [0.0, 3.0, 6.0];
        assert_eq!(centralized_solve(&consensus(avg, &u)).unwrap().y_star, vec![3.0]);
        assert_eq!(centralized_solve(&consensus(max, &u)).unwrap().y_star, vec![6.0]);
        assert_eq!(centralized_solve(&consensus(median, &u)).unwrap().y_star, vec![3.0]);
        let even = centralized_solve(&consensus(median, &[5.0, 1.0])).unwrap();
        assert_eq!(even.y_star, vec![1.0]);
        assert_eq!(even.set, SolutionSet::Interval(Interval::new(1.0, 5.0).unwrap()));
        assert_eq!(even.set.nearest(&[2.0]), vec![2.0]);
        assert!(centralized_solve(&AgentCosts::new()).is_err());
    }

    #[test]
    fn matrix_invariants() {
        let g = GraphSnapshot::from_edges(
            (0..4).map(AgentId),
            [(AgentId(0), AgentId(1)), (AgentId(1), AgentId(2)), (AgentId(2), AgentId(0)), (AgentId(2), AgentId(3))],
        )
        .unwrap();
        let m = CompactOperatorMatrices::new(&g, 2, 0.7).unwrap();
        assert_eq!(m.involution_residual(), 0.0);
        assert!(m.row_sum_residual() <= 1e-15);
        assert_eq!(m.j, DMatrix::from_element(2, 2, 1.0));
        assert_eq!(m.lambda.len(), 4);
    }

    #[test]
    fn single_edge_matches_engine() {
        let g = GraphSnapshot::path(2);
        let costs = consensus(avg, &[1.0, 4.0]);
        let params = AdmmParams::new(0.7, 0.5).unwrap();
        let s0 = NetworkState::initialize(&g, &costs, &params).unwrap();
        let s1 = admm_tick(&s0, &g, &g, &costs, &params).unwrap();
        let dense = compact_run(&s0, &g, &costs, 0.7, 0.5, 1).unwrap();
        assert!(max_diff(&s1.x, &dense[0].0) <= 1e-14);
        for (a, y) in &s1.y {
            assert!((y[0] - dense[0].1[a][0]).abs() <= 1e-14);
        }
    }

    #[test]
    fn zero_signal_stays_zero() {
        let g = GraphSnapshot::path(3);
        let costs = consensus(avg, &[0.0; 3]);
        let x: EdgeStates = g.ordered_edges().map(|e| (e, vec![0.0])).collect();
        let params = AdmmParams::new(0.5, 1.0).unwrap();
        let s = NetworkState::from_edge_states(&g, x, &costs, &params).unwrap();
        for (x, y) in compact_run(&s, &g, &costs, 0.5, 1.0, 5).unwrap() {
            assert!(x.values().chain(y.values()).all(|v| v[0] == 0.0));
        }
    }

    #[test]
    fn canonical_member_example() {
        let g = GraphSnapshot::path(3);
        let costs = consensus(avg, &[0.0, 3.0, 6.0]);
        let y = centralized_solve(&costs).unwrap().y_star;
        let x = tsi_canonical_member(&g, &y, 0.5);
        assert!(x.values().all(|v| v == &vec![1.5]));
    }

    #[test]
    fn fixed_point_is_stationary() {
        let g = GraphSnapshot::path(4);
        let params = AdmmParams::new(0.9, 0.5).unwrap();
        for kind in [avg as fn(f64) -> CostModel, max, median] {
            for u in [[0.0, 3.0, 6.0, 1.0], [2.0, 2.0, 7.0, -1.0]] {
                let costs = consensus(kind, &u);
                let y = centralized_solve(&costs).unwrap().y_star;
                let x = tsi_fixed_point(&g, &costs, &y, params.rho).unwrap();
                let s = NetworkState::from_edge_states(&g, x.clone(), &costs, &params).unwrap();
                for v in s.y.values() {
                    assert!((v[0] - y[0]).abs() <= 1e-12, "{kind:?} {u:?}");
                }
                let next = admm_tick(&s, &g, &g, &costs, &params).unwrap();
                assert!(max_diff(&x, &next.x) <= 1e-12);
            }
        }
    }

    #[test]
    fn projection_examples() {
        let mut x = EdgeStates::new();
        x.insert((AgentId(0), AgentId(1)), vec![4.0]);
        x.insert((AgentId(1), AgentId(0)), vec![0.0]);
        let p = project_to_tsi(&x, &[2.0], 0.5);
        assert_eq!(p[&(AgentId(0), AgentId(1))], vec![3.0]);
        assert_eq!(p[&(AgentId(1), AgentId(0))], vec![-1.0]);
        assert_eq!(project_to_tsi(&p, &[2.0], 0.5), p);

        let set = TargetSet::from(tsi_affine_set(&GraphSnapshot::path(2), &[2.0], 0.5).unwrap());
        let d = set.distance(&edge_states_labeled(&x).unwrap()).unwrap();
        assert!((d - 2f64.sqrt()).abs() <= 1e-12);
    }
}
