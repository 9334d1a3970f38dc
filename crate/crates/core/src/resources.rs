//! Entanglement-link layer: the live link pool (instant topology), coherence
//! expiry, consumption, and the success probability of a delivery tree.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomStream;
use crate::topology::{ConsumerSet, Edge, EdgeId, NodeId, PhysicalTopology};

/// Coherence time measured in whole slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coherence {
    Slots(u32),
    Infinite,
}

impl Coherence {
    pub fn slots(m: u32) -> Result<Self> {
        if m == 0 {
            return Err(Error::invalid("coherence time must be >= 1 slot"));
        }
        Ok(Coherence::Slots(m))
    }

    /// Numeric value for sorting and CSV; infinite maps to `f64::INFINITY`.
    pub fn as_f64(self) -> f64 {
        match self {
            Coherence::Slots(m) => f64::from(m),
            Coherence::Infinite => f64::INFINITY,
        }
    }

    #[inline]
    fn expired(self, age: u32) -> bool {
        matches!(self, Coherence::Slots(m) if age >= m)
    }
}

impl fmt::Display for Coherence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coherence::Slots(m) => write!(f, "{m}"),
            Coherence::Infinite => f.write_str("inf"),
        }
    }
}

/// How a branching node's fusion is charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FusionMode {
    /// Every repeater operation succeeds with `q`.
    #[default]
    UniformQ,
    /// A branching node of tree degree `b` succeeds with `1/2^b` (linear-optics
    /// fusion); swaps and fan-outs still use `q`.
    OpticalHalfPower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantumParams {
    pub p: f64,
    pub q: f64,
    pub coherence: Coherence,
    pub fusion_mode: FusionMode,
}

impl QuantumParams {
    pub fn new(p: f64, q: f64, coherence: Coherence) -> Result<Self> {
        let params = QuantumParams { p, q, coherence, fusion_mode: FusionMode::UniformQ };
        params.validate()?;
        Ok(params)
    }

    /// Accepts `p = 0` as a degenerate "links never form" setting, which the
    /// tests use; configuration parsing applies the stricter `(0, 1]` range.
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::invalid(format!("p must be a probability, got {}", self.p)));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::invalid(format!("q must be a probability, got {}", self.q)));
        }
        if let Coherence::Slots(0) = self.coherence {
            return Err(Error::invalid("coherence time must be >= 1 slot"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LinkState {
    pub edge: EdgeId,
    /// Slots since creation; 0 during the slot the link was generated.
    pub age: u32,
}

/// Live direct-link entanglement, at most one per physical edge.
#[derive(Debug, Clone)]
pub struct EntanglementPool<'t> {
    topo: &'t PhysicalTopology,
    ages: Vec<Option<u32>>,
    live: usize,
}

impl<'t> EntanglementPool<'t> {
    pub fn new(topo: &'t PhysicalTopology) -> Self {
        EntanglementPool { topo, ages: vec![None; topo.edge_count()], live: 0 }
    }

    pub fn topology(&self) -> &'t PhysicalTopology {
        self.topo
    }

    #[inline]
    pub fn is_live(&self, edge: EdgeId) -> bool {
        self.ages[edge.index()].is_some()
    }

    pub fn age(&self, edge: EdgeId) -> Option<u32> {
        self.ages[edge.index()]
    }

    pub fn live_count(&self) -> usize {
        self.live
    }

    pub fn is_empty(&self) -> bool {
        self.live == 0
    }

    pub fn links(&self) -> impl Iterator<Item = LinkState> + '_ {
        self.ages.iter().enumerate().filter_map(|(i, a)| a.map(|age| LinkState { edge: EdgeId(i as u32), age }))
    }

    /// Tries every idle edge once; live edges keep their link and age.
    pub fn attempt_generation(&mut self, params: &QuantumParams, rng: &mut RandomStream) -> usize {
        let mut created = 0;
        for slot in self.ages.iter_mut().filter(|a| a.is_none()) {
            if rng.random::<f64>() < params.p {
                *slot = Some(0);
                created += 1;
            }
        }
        self.live += created;
        created
    }

    /// Ages every link by one slot and drops those reaching the coherence
    /// time. Returns the expired edges in ascending order.
    pub fn advance_age(&mut self, params: &QuantumParams) -> Vec<EdgeId> {
        let mut expired = Vec::new();
        for (i, slot) in self.ages.iter_mut().enumerate() {
            if let Some(age) = slot {
                *age = age.saturating_add(1);
                if params.coherence.expired(*age) {
                    *slot = None;
                    expired.push(EdgeId(i as u32));
                }
            }
        }
        self.live -= expired.len();
        expired
    }

    /// Removes the listed links. Every edge must be live; otherwise the pool
    /// is left untouched and a precondition violation is reported.
    pub fn consume(&mut self, edges: &[EdgeId]) -> Result<()> {
        for (i, e) in edges.iter().enumerate() {
            if e.index() >= self.ages.len() || !self.is_live(*e) {
                return Err(Error::PreconditionViolation(format!("consuming non-live edge {}", e.0)));
            }
            if edges[..i].contains(e) {
                return Err(Error::PreconditionViolation(format!("edge {} consumed twice", e.0)));
            }
        }
        for e in edges {
            self.ages[e.index()] = None;
        }
        self.live -= edges.len();
        Ok(())
    }

    pub fn clear(&mut self) {
        self.ages.iter_mut().for_each(|a| *a = None);
        self.live = 0;
    }

    /// Scans the pool for violations of its invariants.
    pub fn check_invariants(&self, params: &QuantumParams) -> Result<(), String> {
        if self.ages.len() != self.topo.edge_count() {
            return Err("pool size differs from physical edge count".into());
        }
        let mut live = 0;
        for link in self.links() {
            live += 1;
            if params.coherence.expired(link.age) {
                return Err(format!("edge {} has age {} >= m", link.edge.0, link.age));
            }
        }
        if live != self.live {
            return Err(format!("live counter {} but {} live links", self.live, live));
        }
        Ok(())
    }

    /// Seeds a link directly. Test and tooling support.
    pub fn insert(&mut self, edge: EdgeId, age: u32) {
        if self.ages[edge.index()].replace(age).is_none() {
            self.live += 1;
        }
    }
}

/// Delivery tree for one request: connects all consumers, every leaf is a
/// consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct SteinerSubtree {
    nodes: Vec<NodeId>,
    edges: Vec<Edge>,
    consumers: ConsumerSet,
    degrees: BTreeMap<NodeId, usize>,
    op_count: usize,
}

impl SteinerSubtree {
    /// Validates that `edges` form a tree whose leaves are all consumers and
    /// which contains every consumer, then counts its repeater operations.
    pub fn new(edges: impl IntoIterator<Item = Edge>, consumers: ConsumerSet) -> Result<Self> {
        let mut edges: Vec<Edge> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        let mut degrees = BTreeMap::new();
        for e in &edges {
            *degrees.entry(e.a).or_insert(0) += 1;
            *degrees.entry(e.b).or_insert(0) += 1;
        }
        let nodes: Vec<NodeId> = degrees.keys().copied().collect();
        if edges.is_empty() {
            return Err(Error::invalid("subtree has no edges"));
        }
        if edges.len() + 1 != nodes.len() {
            return Err(Error::invalid("subtree edges contain a cycle or are disconnected"));
        }
        if !is_connected(&nodes, &edges) {
            return Err(Error::invalid("subtree is disconnected"));
        }
        if let Some(c) = consumers.as_slice().iter().find(|c| !degrees.contains_key(c)) {
            return Err(Error::invalid(format!("consumer {c} not spanned")));
        }
        if let Some((v, _)) = degrees.iter().find(|(v, d)| **d == 1 && !consumers.contains(**v)) {
            return Err(Error::invalid(format!("leaf {v} is not a consumer")));
        }
        let op_count = nodes.iter().filter(|v| !(degrees[v] == 1 && consumers.contains(**v))).count();
        Ok(SteinerSubtree { nodes, edges, consumers, degrees, op_count })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn consumers(&self) -> &ConsumerSet {
        &self.consumers
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.degrees.get(&v).copied().unwrap_or(0)
    }

    /// Nodes that perform a swap, fusion or fan-out: every node except
    /// degree-1 consumers.
    pub fn op_count(&self) -> usize {
        self.op_count
    }

    pub fn edge_ids(&self, topo: &PhysicalTopology) -> Result<Vec<EdgeId>> {
        self.edges
            .iter()
            .map(|e| {
                topo.edge_between(e.a, e.b)
                    .ok_or_else(|| Error::PreconditionViolation(format!("edge ({}, {}) not physical", e.a, e.b)))
            })
            .collect()
    }
}

fn is_connected(nodes: &[NodeId], edges: &[Edge]) -> bool {
    let mut parent: BTreeMap<NodeId, NodeId> = nodes.iter().map(|&v| (v, v)).collect();
    fn find(parent: &mut BTreeMap<NodeId, NodeId>, v: NodeId) -> NodeId {
        let p = parent[&v];
        if p == v {
            return v;
        }
        let r = find(parent, p);
        parent.insert(v, r);
        r
    }
    for e in edges {
        let (ra, rb) = (find(&mut parent, e.a), find(&mut parent, e.b));
        parent.insert(ra, rb);
    }
    let root = find(&mut parent, nodes[0]);
    nodes.iter().all(|&v| find(&mut parent, v) == root)
}

/// Probability that every operation in the tree succeeds.
pub fn tree_success_probability(tree: &SteinerSubtree, params: &QuantumParams) -> f64 {
    match params.fusion_mode {
        FusionMode::UniformQ => params.q.powi(tree.op_count() as i32),
        FusionMode::OpticalHalfPower => tree
            .nodes()
            .iter()
            .filter(|&&v| !(tree.degree(v) == 1 && tree.consumers().contains(v)))
            .map(|&v| match tree.degree(v) {
                b if b >= 3 => 0.5f64.powi(b as i32),
                _ => params.q,
            })
            .product(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn e(u: u32, v: u32) -> Edge {
        Edge::new(NodeId(u), NodeId(v))
    }

    fn consumers(ids: &[u32]) -> ConsumerSet {
        ConsumerSet::new(ids.iter().map(|&i| NodeId(i)).collect(), NodeId(u32::MAX)).unwrap()
    }

    fn params(p: f64, q: f64, m: Coherence) -> QuantumParams {
        QuantumParams::new(p, q, m).unwrap()
    }

    #[test]
    fn generation_extremes() {
        let g = PhysicalTopology::grid(4, 4).unwrap();
        let mut pool = EntanglementPool::new(&g);
        let mut rng = seeded(1);
        assert_eq!(pool.attempt_generation(&params(0.0, 1.0, Coherence::Infinite), &mut rng), 0);
        assert!(pool.is_empty());
        assert_eq!(pool.attempt_generation(&params(1.0, 1.0, Coherence::Infinite), &mut rng), g.edge_count());
        // Idempotent once every edge is live.
        assert_eq!(pool.attempt_generation(&params(1.0, 1.0, Coherence::Infinite), &mut rng), 0);
        assert_eq!(pool.live_count(), g.edge_count());
    }

    #[test]
    fn generation_keeps_existing_links() {
        let g = PhysicalTopology::path(4).unwrap();
        let mut pool = EntanglementPool::new(&g);
        pool.insert(EdgeId(1), 2);
        pool.attempt_generation(&params(1.0, 1.0, Coherence::Infinite), &mut seeded(0));
        assert_eq!(pool.age(EdgeId(1)), Some(2));
        assert_eq!(pool.age(EdgeId(0)), Some(0));
    }

    #[test]
    fn generation_mean_matches_binomial() {
        // 180 idle edges at p = 0.5: binomial mean 90, sd ~6.7, so the mean over
        // 1e5 repetitions has standard error ~0.02.
        let g = PhysicalTopology::grid(10, 10).unwrap();
        let prm = params(0.5, 1.0, Coherence::Slots(1));
        let mut rng = seeded(42);
        let reps = 100_000;
        let mut total = 0usize;
        for _ in 0..reps {
            let mut pool = EntanglementPool::new(&g);
            total += pool.attempt_generation(&prm, &mut rng);
        }
        let mean = total as f64 / reps as f64;
        assert!((mean - 90.0).abs() < 1.0, "mean {mean}");
    }

    #[test]
    fn unit_coherence_has_no_carry_over() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let prm = params(1.0, 1.0, Coherence::Slots(1));
        let mut pool = EntanglementPool::new(&g);
        pool.attempt_generation(&prm, &mut seeded(0));
        let expired = pool.advance_age(&prm);
        assert_eq!(expired.len(), g.edge_count());
        assert!(pool.is_empty());
    }

    #[test]
    fn infinite_coherence_never_expires() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let prm = params(1.0, 1.0, Coherence::Infinite);
        let mut pool = EntanglementPool::new(&g);
        pool.attempt_generation(&prm, &mut seeded(0));
        for _ in 0..10_000 {
            assert!(pool.advance_age(&prm).is_empty());
        }
        assert_eq!(pool.live_count(), g.edge_count());
    }

    #[test]
    fn link_expires_after_m_slots() {
        let g = PhysicalTopology::path(2).unwrap();
        let prm = params(1.0, 1.0, Coherence::Slots(3));
        let mut pool = EntanglementPool::new(&g);
        pool.attempt_generation(&prm, &mut seeded(0)); // slot t
        assert!(pool.advance_age(&prm).is_empty()); // t+1
        assert!(pool.advance_age(&prm).is_empty()); // t+2
        assert_eq!(pool.advance_age(&prm), vec![EdgeId(0)]); // t+3
        pool.check_invariants(&prm).unwrap();
    }

    #[test]
    fn consume_semantics() {
        let g = PhysicalTopology::path(4).unwrap();
        let mut pool = EntanglementPool::new(&g);
        pool.insert(EdgeId(0), 0);
        pool.insert(EdgeId(1), 1);
        pool.insert(EdgeId(2), 2);
        pool.consume(&[]).unwrap();
        assert_eq!(pool.live_count(), 3);
        pool.consume(&[EdgeId(0), EdgeId(1)]).unwrap();
        assert_eq!(pool.links().collect::<Vec<_>>(), vec![LinkState { edge: EdgeId(2), age: 2 }]);
        assert!(matches!(pool.consume(&[EdgeId(0)]), Err(Error::PreconditionViolation(_))));
        assert!(matches!(pool.consume(&[EdgeId(2), EdgeId(2)]), Err(Error::PreconditionViolation(_))));
        assert_eq!(pool.live_count(), 1);
    }

    #[test]
    fn path_probability() {
        let tree = SteinerSubtree::new([e(0, 1), e(1, 2), e(2, 3)], consumers(&[0, 3])).unwrap();
        assert_eq!(tree.op_count(), 2);
        let p = tree_success_probability(&tree, &params(1.0, 0.9, Coherence::Infinite));
        assert!((p - 0.81).abs() < 1e-15);
    }

    #[test]
    fn star_is_one_fusion() {
        let tree = SteinerSubtree::new([e(0, 1), e(0, 2), e(0, 3)], consumers(&[1, 2, 3])).unwrap();
        assert_eq!(tree.op_count(), 1);
        assert_eq!(tree_success_probability(&tree, &params(1.0, 0.5, Coherence::Infinite)), 0.5);
        let mut optical = params(1.0, 0.5, Coherence::Infinite);
        optical.fusion_mode = FusionMode::OpticalHalfPower;
        assert_eq!(tree_success_probability(&tree, &optical), 0.125);
    }

    #[test]
    fn internal_consumer_fans_out() {
        let tree = SteinerSubtree::new([e(0, 1), e(1, 2)], consumers(&[0, 1, 2])).unwrap();
        assert_eq!(tree.op_count(), 1);
        assert!((tree_success_probability(&tree, &params(1.0, 0.7, Coherence::Infinite)) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn adjacent_pair_needs_no_operation() {
        let tree = SteinerSubtree::new([e(4, 5)], consumers(&[4, 5])).unwrap();
        assert_eq!(tree.op_count(), 0);
        assert_eq!(tree_success_probability(&tree, &params(1.0, 0.3, Coherence::Infinite)), 1.0);
    }

    #[test]
    fn subtree_validation() {
        // cycle
        assert!(SteinerSubtree::new([e(0, 1), e(1, 2), e(0, 2), e(2, 3)], consumers(&[0, 3])).is_err());
        // disconnected
        assert!(SteinerSubtree::new([e(0, 1), e(2, 3), e(4, 5)], consumers(&[0, 3])).is_err());
        // non-consumer leaf
        assert!(SteinerSubtree::new([e(0, 1), e(1, 2), e(1, 3)], consumers(&[0, 2])).is_err());
        // consumer missing
        assert!(SteinerSubtree::new([e(0, 1)], consumers(&[0, 7])).is_err());
    }
}
