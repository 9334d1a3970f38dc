//! Per-slot drivers for the asynchronous tree protocol and the synchronous
//! two-phase baseline.
//!
//! Slot order for the tree protocol:
//!
//! 1. age links, drop expired ones, detach the DODAG below any expired parent edge;
//! 2. attempt generation on every idle edge;
//! 3. run join messaging;
//! 4. if every consumer is a member, deliver over the Steiner subtree,
//!    consume its links and detach below them.
//!
//! The baseline regenerates everything each slot, routes with full
//! knowledge of the live links and then clears the pool.

use std::collections::VecDeque;
use std::fmt;

use rand::Rng;

use crate::dodag::DodagState;
use crate::error::Result;
use crate::resources::{tree_success_probability, EntanglementPool, QuantumParams, SteinerSubtree};
use crate::rng::RandomStream;
use crate::stats::Summary;
use crate::topology::{ConsumerSet, Edge, NodeId, PhysicalTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EngineKind {
    Maer,
    Synchronous,
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EngineKind::Maer => "maer",
            EngineKind::Synchronous => "sync",
        })
    }
}

/// How a delivery is turned into a per-slot rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Accounting {
    /// Record the success probability itself.
    #[default]
    Expected,
    /// Draw success with that probability and record 0 or 1. Links are
    /// consumed whatever the outcome.
    Bernoulli,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EngineOptions {
    pub accounting: Accounting,
    /// Join layers admitted per slot; `None` cascades to a fixed point.
    pub join_hops_per_slot: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSample {
    pub slot: u64,
    pub xi: f64,
    pub ops: usize,
    pub subtree_edges: usize,
}

impl RateSample {
    fn idle(slot: u64) -> Self {
        RateSample { slot, xi: 0.0, ops: 0, subtree_edges: 0 }
    }
}

fn deliver(
    tree: &SteinerSubtree,
    slot: u64,
    params: &QuantumParams,
    options: &EngineOptions,
    rng: &mut RandomStream,
) -> RateSample {
    let prob = tree_success_probability(tree, params);
    let xi = match options.accounting {
        Accounting::Expected => prob,
        Accounting::Bernoulli => {
            if rng.random::<f64>() < prob {
                1.0
            } else {
                0.0
            }
        }
    };
    RateSample { slot, xi, ops: tree.op_count(), subtree_edges: tree.edges().len() }
}

/// Asynchronous tree-routing engine for one fixed request.
#[derive(Debug, Clone)]
pub struct MaerEngine<'t> {
    pool: EntanglementPool<'t>,
    dodag: DodagState,
    consumers: ConsumerSet,
    params: QuantumParams,
    options: EngineOptions,
    slot: u64,
    last_delivery: Option<SteinerSubtree>,
}

impl<'t> MaerEngine<'t> {
    pub fn new(
        topo: &'t PhysicalTopology,
        root: NodeId,
        consumers: ConsumerSet,
        params: QuantumParams,
        options: EngineOptions,
    ) -> Result<Self> {
        params.validate()?;
        Ok(MaerEngine {
            pool: EntanglementPool::new(topo),
            dodag: DodagState::new(topo, root),
            consumers,
            params,
            options,
            slot: 0,
            last_delivery: None,
        })
    }

    pub fn pool(&self) -> &EntanglementPool<'t> {
        &self.pool
    }

    pub fn dodag(&self) -> &DodagState {
        &self.dodag
    }

    /// Subtree used by the most recent step, if it delivered.
    pub fn last_delivery(&self) -> Option<&SteinerSubtree> {
        self.last_delivery.as_ref()
    }

    pub fn step(&mut self, rng: &mut RandomStream) -> Result<RateSample> {
        let topo = self.pool.topology();
        let slot = self.slot;
        self.slot += 1;

        let expired = self.pool.advance_age(&self.params);
        self.dodag.detach_expired(topo, &expired);
        self.pool.attempt_generation(&self.params, rng);
        self.dodag.join_round(&self.pool, slot, self.options.join_hops_per_slot);

        self.last_delivery = self.dodag.steiner_subtree(&self.consumers);
        let Some(tree) = &self.last_delivery else {
            return Ok(RateSample::idle(slot));
        };
        let sample = deliver(tree, slot, &self.params, &self.options, rng);
        let used = tree.edge_ids(topo)?;
        self.pool.consume(&used)?;
        self.dodag.detach_edges(topo, &used);
        Ok(sample)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        self.pool.check_invariants(&self.params)?;
        self.dodag.check_invariants(&self.pool)
    }
}

/// Synchronous two-phase baseline.
#[derive(Debug, Clone)]
pub struct SyncEngine<'t> {
    pool: EntanglementPool<'t>,
    consumers: ConsumerSet,
    params: QuantumParams,
    options: EngineOptions,
    slot: u64,
}

impl<'t> SyncEngine<'t> {
    pub fn new(
        topo: &'t PhysicalTopology,
        consumers: ConsumerSet,
        params: QuantumParams,
        options: EngineOptions,
    ) -> Result<Self> {
        params.validate()?;
        Ok(SyncEngine { pool: EntanglementPool::new(topo), consumers, params, options, slot: 0 })
    }

    pub fn pool(&self) -> &EntanglementPool<'t> {
        &self.pool
    }

    pub fn step(&mut self, rng: &mut RandomStream) -> Result<RateSample> {
        let slot = self.slot;
        self.slot += 1;
        debug_assert!(self.pool.is_empty());
        self.pool.attempt_generation(&self.params, rng);
        let sample = match median_steiner(&self.pool, &self.consumers) {
            Some(tree) => deliver(&tree, slot, &self.params, &self.options, rng),
            None => RateSample::idle(slot),
        };
        self.pool.clear();
        Ok(sample)
    }
}

/// Hop distances over live links only.
fn live_bfs(pool: &EntanglementPool<'_>, src: NodeId, parent: Option<&mut [Option<NodeId>]>) -> Vec<u32> {
    let topo = pool.topology();
    let mut dist = vec![u32::MAX; topo.node_count()];
    let mut parent = parent;
    let mut queue = VecDeque::new();
    dist[src.index()] = 0;
    queue.push_back(src);
    while let Some(u) = queue.pop_front() {
        for &(v, e) in topo.neighbors(u) {
            if dist[v.index()] == u32::MAX && pool.is_live(e) {
                dist[v.index()] = dist[u.index()] + 1;
                if let Some(p) = parent.as_deref_mut() {
                    p[v.index()] = Some(u);
                }
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Global-knowledge Steiner structure on the live graph: pick the node `c`
/// minimising the summed hop distance to all consumers (lowest index on
/// ties), take the union of shortest paths from `c` in its BFS tree and
/// prune non-consumer leaves. Exact for three terminals on unit weights.
pub fn median_steiner(pool: &EntanglementPool<'_>, consumers: &ConsumerSet) -> Option<SteinerSubtree> {
    let topo = pool.topology();
    let dists: Vec<Vec<u32>> = consumers.as_slice().iter().map(|&c| live_bfs(pool, c, None)).collect();
    let first = &dists[0];
    if consumers.as_slice().iter().any(|c| first[c.index()] == u32::MAX) {
        return None;
    }
    let center = topo
        .nodes()
        .filter(|v| first[v.index()] != u32::MAX)
        .min_by_key(|v| (dists.iter().map(|d| u64::from(d[v.index()])).sum::<u64>(), *v))?;

    let mut parent = vec![None; topo.node_count()];
    live_bfs(pool, center, Some(&mut parent));
    let mut edges = Vec::new();
    let mut in_tree = vec![false; topo.node_count()];
    in_tree[center.index()] = true;
    for &c in consumers.as_slice() {
        let mut v = c;
        while !in_tree[v.index()] {
            in_tree[v.index()] = true;
            let p = parent[v.index()].expect("reachable node has a BFS parent");
            edges.push(Edge::new(v, p));
            v = p;
        }
    }
    let edges = prune_non_consumer_leaves(edges, consumers);
    SteinerSubtree::new(edges, consumers.clone()).ok()
}

/// Repeatedly removes leaves that are not consumers.
pub fn prune_non_consumer_leaves(mut edges: Vec<Edge>, consumers: &ConsumerSet) -> Vec<Edge> {
    loop {
        let mut degree = std::collections::BTreeMap::<NodeId, usize>::new();
        for e in &edges {
            *degree.entry(e.a).or_default() += 1;
            *degree.entry(e.b).or_default() += 1;
        }
        let prunable = |v: &NodeId| degree[v] == 1 && !consumers.contains(*v);
        let before = edges.len();
        edges.retain(|e| !prunable(&e.a) && !prunable(&e.b));
        if edges.len() == before {
            return edges;
        }
    }
}

/// Mean per-slot rate of one trial and its slot-level standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub mean: f64,
    pub slot_stderr: f64,
    pub slots: u64,
    pub deliveries: u64,
}

/// Runs `slots` slots from a fresh pool (and DODAG) and averages the rate.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    engine: EngineKind,
    topo: &PhysicalTopology,
    root: NodeId,
    consumers: &ConsumerSet,
    params: &QuantumParams,
    options: &EngineOptions,
    slots: u64,
    rng: &mut RandomStream,
) -> Result<TrialOutcome> {
    if slots == 0 {
        return Err(crate::error::Error::invalid("slots must be >= 1"));
    }
    let mut summary = Summary::default();
    let mut deliveries = 0;
    let mut record = |s: RateSample| {
        summary.push(s.xi);
        if s.subtree_edges > 0 {
            deliveries += 1;
        }
    };
    match engine {
        EngineKind::Maer => {
            let mut eng = MaerEngine::new(topo, root, consumers.clone(), *params, *options)?;
            for _ in 0..slots {
                record(eng.step(rng)?);
            }
        }
        EngineKind::Synchronous => {
            let mut eng = SyncEngine::new(topo, consumers.clone(), *params, *options)?;
            for _ in 0..slots {
                record(eng.step(rng)?);
            }
        }
    }
    Ok(TrialOutcome { mean: summary.mean(), slot_stderr: summary.stderr(), slots, deliveries })
}
