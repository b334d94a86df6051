//! Time-varying undirected graphs over agents that join and leave.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// Agent identifier. Allocated monotonically and never reused within a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentId(pub u64);

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One tick's communication graph. Undirected, no self-loops, and connected
/// whenever built through [`random_graph`] or [`GraphSnapshot::apply_churn`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct GraphSnapshot {
    adjacency: BTreeMap<AgentId, BTreeSet<AgentId>>,
    next_id: u64,
}

impl GraphSnapshot {
    /// Builds a snapshot from explicit agents and edges. Self-loops and edges
    /// to unknown agents are rejected; connectivity is not required here.
    pub fn from_edges(
        agents: impl IntoIterator<Item = AgentId>,
        edges: impl IntoIterator<Item = (AgentId, AgentId)>,
    ) -> Result<Self> {
        let mut adjacency: BTreeMap<AgentId, BTreeSet<AgentId>> =
            agents.into_iter().map(|a| (a, BTreeSet::new())).collect();
        for (i, j) in edges {
            if i == j {
                return Err(Error::InvalidDelta(format!("self-loop on agent {i}")));
            }
            if !adjacency.contains_key(&i) || !adjacency.contains_key(&j) {
                return Err(Error::InvalidDelta(format!("edge ({i},{j}) references an unknown agent")));
            }
            adjacency.get_mut(&i).unwrap().insert(j);
            adjacency.get_mut(&j).unwrap().insert(i);
        }
        let next_id = adjacency.keys().next_back().map_or(0, |a| a.0 + 1);
        Ok(Self { adjacency, next_id })
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Self {
        let ids: Vec<AgentId> = (0..n as u64).map(AgentId).collect();
        let edges: Vec<_> = ids.windows(2).map(|w| (w[0], w[1])).collect();
        Self::from_edges(ids, edges).expect("valid path")
    }

    pub fn n_agents(&self) -> usize {
        self.adjacency.len()
    }

    pub fn agents(&self) -> impl Iterator<Item = AgentId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn contains(&self, agent: AgentId) -> bool {
        self.adjacency.contains_key(&agent)
    }

    pub fn neighbors(&self, agent: AgentId) -> &BTreeSet<AgentId> {
        static EMPTY: BTreeSet<AgentId> = BTreeSet::new();
        self.adjacency.get(&agent).unwrap_or(&EMPTY)
    }

    pub fn degree(&self, agent: AgentId) -> usize {
        self.neighbors(agent).len()
    }

    pub fn has_edge(&self, i: AgentId, j: AgentId) -> bool {
        self.neighbors(i).contains(&j)
    }

    /// Number of ordered pairs, `sum_i degree(i)`.
    pub fn ordered_edge_count(&self) -> usize {
        self.adjacency.values().map(BTreeSet::len).sum()
    }

    pub fn edge_count(&self) -> usize {
        self.ordered_edge_count() / 2
    }

    /// Unordered edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.adjacency.iter().flat_map(|(&i, nbrs)| nbrs.range(i..).map(move |&j| (i, j)))
    }

    /// Ordered pairs `(i, j)` for every edge, in lexicographic order.
    pub fn ordered_edges(&self) -> impl Iterator<Item = (AgentId, AgentId)> + '_ {
        self.adjacency.iter().flat_map(|(&i, nbrs)| nbrs.iter().map(move |&j| (i, j)))
    }

    pub fn average_degree(&self) -> f64 {
        if self.adjacency.is_empty() {
            0.0
        } else {
            self.ordered_edge_count() as f64 / self.n_agents() as f64
        }
    }

    /// Smallest id never handed out for this run.
    pub fn next_id(&self) -> AgentId {
        AgentId(self.next_id)
    }

    pub fn is_connected(&self) -> bool {
        is_connected_without(&self.adjacency, &BTreeSet::new())
    }

    fn components(&self) -> Vec<Vec<AgentId>> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for &start in self.adjacency.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &w in &self.adjacency[&v] {
                    if seen.insert(w) {
                        comp.push(w);
                        queue.push_back(w);
                    }
                }
            }
            out.push(comp);
        }
        out
    }

    fn add_edge(&mut self, i: AgentId, j: AgentId) {
        self.adjacency.entry(i).or_default().insert(j);
        self.adjacency.entry(j).or_default().insert(i);
    }

    /// Whether removing `departing` (and incident edges) keeps the rest connected.
    pub fn departure_keeps_connected(&self, departing: &BTreeSet<AgentId>) -> bool {
        is_connected_without(&self.adjacency, departing)
    }

    /// Applies departures first, then arrivals.
    ///
    /// Fails when the residual graph after departures is disconnected, when an
    /// arrival has no attachment edge, or when the final graph is disconnected.
    pub fn apply_churn(&self, delta: &ChurnDelta) -> Result<GraphSnapshot> {
        for d in &delta.departed {
            if !self.contains(*d) {
                return Err(Error::InvalidDelta(format!("departing agent {d} is not in the network")));
            }
        }
        if !self.departure_keeps_connected(&delta.departed) {
            let culprit = delta.departed.iter().next().map_or(0, |a| a.0);
            return Err(Error::DisconnectingDeparture(culprit));
        }
        let mut next = GraphSnapshot {
            adjacency: self
                .adjacency
                .iter()
                .filter(|(a, _)| !delta.departed.contains(a))
                .map(|(a, nbrs)| (*a, nbrs.difference(&delta.departed).copied().collect()))
                .collect(),
            next_id: self.next_id,
        };
        let residual_empty = next.adjacency.is_empty();
        for arrival in &delta.arrived {
            if arrival.id.0 < next.next_id || next.contains(arrival.id) {
                return Err(Error::InvalidDelta(format!("arriving agent {} reuses an id", arrival.id)));
            }
            next.adjacency.insert(arrival.id, BTreeSet::new());
            next.next_id = arrival.id.0 + 1;
        }
        for arrival in &delta.arrived {
            if arrival.attach_to.is_empty() && !(residual_empty && delta.arrived.len() == 1) {
                return Err(Error::IsolatedArrival(arrival.id.0));
            }
            for &j in &arrival.attach_to {
                if j == arrival.id || !next.contains(j) {
                    return Err(Error::InvalidDelta(format!(
                        "arriving agent {} attaches to unavailable agent {j}",
                        arrival.id
                    )));
                }
                next.add_edge(arrival.id, j);
            }
        }
        if !next.is_connected() {
            return Err(Error::InvalidDelta("arrivals leave the network disconnected".into()));
        }
        Ok(next)
    }
}

fn is_connected_without(adjacency: &BTreeMap<AgentId, BTreeSet<AgentId>>, removed: &BTreeSet<AgentId>) -> bool {
    let Some(start) = adjacency.keys().find(|a| !removed.contains(a)) else {
        return true;
    };
    let mut seen = BTreeSet::from([*start]);
    let mut queue = VecDeque::from([*start]);
    while let Some(v) = queue.pop_front() {
        for w in &adjacency[&v] {
            if !removed.contains(w) && seen.insert(*w) {
                queue.push_back(*w);
            }
        }
    }
    seen.len() + removed.iter().filter(|r| adjacency.contains_key(r)).count() == adjacency.len()
}

/// Erdős-Rényi draw on agents `0..n`, then components are chained by random
/// edges until the graph is connected.
pub fn random_graph<R: Rng + ?Sized>(n: usize, edge_prob: f64, rng: &mut R) -> GraphSnapshot {
    assert!(n >= 1, "random_graph needs at least one agent");
    let p = edge_prob.clamp(0.0, 1.0);
    let ids: Vec<AgentId> = (0..n as u64).map(AgentId).collect();
    let mut g = GraphSnapshot::from_edges(ids.iter().copied(), std::iter::empty()).expect("no edges");
    for a in 0..n {
        for b in (a + 1)..n {
            if rng.gen_bool(p) {
                g.add_edge(ids[a], ids[b]);
            }
        }
    }
    let mut comps = g.components();
    comps.shuffle(rng);
    for pair in comps.windows(2) {
        let i = *pair[0].choose(rng).unwrap();
        let j = *pair[1].choose(rng).unwrap();
        g.add_edge(i, j);
    }
    g
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrival {
    pub id: AgentId,
    pub attach_to: Vec<AgentId>,
}

/// Agents leaving and joining between two ticks.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ChurnDelta {
    pub arrived: Vec<Arrival>,
    pub departed: BTreeSet<AgentId>,
}

impl ChurnDelta {
    pub fn is_empty(&self) -> bool {
        self.arrived.is_empty() && self.departed.is_empty()
    }
}

/// Remaining/arriving/departing sets between two consecutive snapshots.
#[derive(Debug, Clone, Default)]
pub struct Transition {
    pub remaining: BTreeSet<AgentId>,
    pub arrived: BTreeSet<AgentId>,
    pub departed: BTreeSet<AgentId>,
}

impl Transition {
    pub fn between(prev: &GraphSnapshot, next: &GraphSnapshot) -> Self {
        let before: BTreeSet<AgentId> = prev.agents().collect();
        let after: BTreeSet<AgentId> = next.agents().collect();
        Self {
            remaining: before.intersection(&after).copied().collect(),
            arrived: after.difference(&before).copied().collect(),
            departed: before.difference(&after).copied().collect(),
        }
    }

    /// Neighbors of `i` that are edges in both snapshots.
    pub fn remaining_neighbors(prev: &GraphSnapshot, next: &GraphSnapshot, i: AgentId) -> BTreeSet<AgentId> {
        next.neighbors(i).intersection(prev.neighbors(i)).copied().collect()
    }

    /// Neighbors of `i` whose edge is new in `next`.
    pub fn new_neighbors(prev: &GraphSnapshot, next: &GraphSnapshot, i: AgentId) -> BTreeSet<AgentId> {
        next.neighbors(i).difference(prev.neighbors(i)).copied().collect()
    }
}
