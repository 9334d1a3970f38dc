//! Physical topologies, hop distances and consumer placement.
//!
//! Nodes are dense indices `0..node_count`. Edges are stored once, as
//! `(low, high)` pairs sorted ascending, and an [`EdgeId`] is the position of
//! an edge in that sorted list. Everything above this module (pool, DODAG,
//! engines) addresses links by `EdgeId`.

use std::collections::VecDeque;
use std::fmt;
use std::io::{self, Write};

use rand::seq::index;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Maximum number of Erdős–Rényi draws before giving up on connectivity.
pub const RANDOM_GRAPH_ATTEMPTS: u32 = 1000;

/// Default number of rejection-sampling draws for a consumer set.
pub const SAMPLING_BUDGET: u64 = 1_000_000;

const WINDOW_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeId(pub u32);

impl EdgeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Unordered node pair, normalised so that `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Edge {
    pub a: NodeId,
    pub b: NodeId,
}

impl Edge {
    pub fn new(u: NodeId, v: NodeId) -> Self {
        if u <= v {
            Edge { a: u, b: v }
        } else {
            Edge { a: v, b: u }
        }
    }

    pub fn other(&self, v: NodeId) -> NodeId {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyKind {
    Grid { rows: usize, cols: usize },
    Barbell { clique_size: usize },
    Random { n: usize, prob: f64 },
    Path { nodes: usize },
    Custom,
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TopologyKind::Grid { rows, cols } => write!(f, "grid:{rows},{cols}"),
            TopologyKind::Barbell { clique_size } => write!(f, "barbell:{clique_size}"),
            TopologyKind::Random { n, prob } => write!(f, "random:{n},{prob}"),
            TopologyKind::Path { nodes } => write!(f, "path:{nodes}"),
            TopologyKind::Custom => write!(f, "custom"),
        }
    }
}

/// Static repeater graph. Immutable after construction and always connected.
#[derive(Debug, Clone)]
pub struct PhysicalTopology {
    kind: TopologyKind,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<(NodeId, EdgeId)>>,
}

impl PhysicalTopology {
    /// Builds a topology from an arbitrary edge list. Rejects self-loops,
    /// duplicates, out-of-range endpoints and disconnected graphs.
    pub fn from_edges(node_count: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        let topo = Self::build(TopologyKind::Custom, node_count, edges)?;
        if !topo.is_connected() {
            return Err(Error::invalid("topology is not connected"));
        }
        Ok(topo)
    }

    fn build(kind: TopologyKind, node_count: usize, edges: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        if node_count == 0 || node_count > u32::MAX as usize {
            return Err(Error::invalid(format!("node count {node_count} out of range")));
        }
        let mut list = Vec::new();
        for (u, v) in edges {
            if u == v {
                return Err(Error::invalid(format!("self-loop at node {u}")));
            }
            if u as usize >= node_count || v as usize >= node_count {
                return Err(Error::invalid(format!("edge ({u}, {v}) outside 0..{node_count}")));
            }
            list.push(Edge::new(NodeId(u), NodeId(v)));
        }
        list.sort_unstable();
        if list.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate edge"));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for (i, e) in list.iter().enumerate() {
            let id = EdgeId(i as u32);
            adjacency[e.a.index()].push((e.b, id));
            adjacency[e.b.index()].push((e.a, id));
        }
        for adj in &mut adjacency {
            adj.sort_unstable();
        }
        Ok(PhysicalTopology { kind, edges: list, adjacency })
    }

    /// `rows × cols` lattice with 4-neighbour links; node index `row * cols + col`.
    pub fn grid(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 || cols < 2 {
            return Err(Error::invalid(format!("grid dimensions must be >= 2, got {rows}x{cols}")));
        }
        let id = |r: usize, c: usize| (r * cols + c) as u32;
        let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::build(TopologyKind::Grid { rows, cols }, rows * cols, edges)
    }

    /// Two complete graphs on `clique_size` nodes joined by one bridge between
    /// node `0` and node `clique_size`.
    pub fn barbell(clique_size: usize) -> Result<Self> {
        if clique_size < 2 {
            return Err(Error::invalid(format!("clique size must be >= 2, got {clique_size}")));
        }
        let k = clique_size as u32;
        let mut edges = Vec::new();
        for offset in [0, k] {
            for i in 0..k {
                for j in i + 1..k {
                    edges.push((offset + i, offset + j));
                }
            }
        }
        edges.push((0, k));
        Self::build(TopologyKind::Barbell { clique_size }, 2 * clique_size, edges)
    }

    /// Erdős–Rényi `G(n, prob)`, redrawn from the same stream until connected.
    pub fn random(n: usize, prob: f64, rng: &mut RandomStream) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("random graph needs n >= 2, got {n}")));
        }
        if !(prob > 0.0 && prob <= 1.0) {
            return Err(Error::invalid(format!("edge probability must be in (0, 1], got {prob}")));
        }
        for _ in 0..RANDOM_GRAPH_ATTEMPTS {
            let mut edges = Vec::new();
            for i in 0..n as u32 {
                for j in i + 1..n as u32 {
                    if rng.random::<f64>() < prob {
                        edges.push((i, j));
                    }
                }
            }
            let topo = Self::build(TopologyKind::Random { n, prob }, n, edges)?;
            if topo.is_connected() {
                return Ok(topo);
            }
        }
        Err(Error::GenerationFailed { attempts: RANDOM_GRAPH_ATTEMPTS })
    }

    /// Simple path `0 – 1 – … – nodes-1`.
    pub fn path(nodes: usize) -> Result<Self> {
        if nodes < 2 {
            return Err(Error::invalid(format!("path needs >= 2 nodes, got {nodes}")));
        }
        let edges = (0..nodes as u32 - 1).map(|i| (i, i + 1));
        Self::build(TopologyKind::Path { nodes }, nodes, edges)
    }

    pub fn kind(&self) -> &TopologyKind {
        &self.kind
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> Edge {
        self.edges[id.index()]
    }

    pub fn contains(&self, v: NodeId) -> bool {
        v.index() < self.node_count()
    }

    /// Neighbours of `v` with the connecting edge, ascending by neighbour.
    pub fn neighbors(&self, v: NodeId) -> &[(NodeId, EdgeId)] {
        &self.adjacency[v.index()]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v.index()].len()
    }

    pub fn edge_between(&self, u: NodeId, v: NodeId) -> Option<EdgeId> {
        let adj = self.adjacency.get(u.index())?;
        adj.binary_search_by_key(&v, |&(n, _)| n).ok().map(|i| adj[i].1)
    }

    /// BFS hop counts from `src`; `None` marks unreachable nodes.
    pub fn bfs_distances(&self, src: NodeId) -> Vec<Option<u32>> {
        let mut dist = vec![None; self.node_count()];
        let mut queue = VecDeque::new();
        dist[src.index()] = Some(0);
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            let du = dist[u.index()].unwrap_or_default();
            for &(v, _) in self.neighbors(u) {
                if dist[v.index()].is_none() {
                    dist[v.index()] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn is_connected(&self) -> bool {
        self.bfs_distances(NodeId(0)).iter().all(Option::is_some)
    }

    pub fn hop_distance(&self, u: NodeId, v: NodeId) -> Result<u32> {
        self.check_node(u)?;
        self.check_node(v)?;
        self.bfs_distances(u)[v.index()].ok_or(Error::Unreachable { from: u, to: v })
    }

    /// Mean hop distance over all unordered pairs of `nodes`.
    pub fn group_distance(&self, nodes: &[NodeId]) -> Result<f64> {
        if nodes.len() < 2 {
            return Err(Error::invalid("group distance needs at least two nodes"));
        }
        self.distance_table().group_distance(nodes)
    }

    /// All-pairs hop distances. Requires a connected topology.
    pub fn distance_table(&self) -> DistanceTable {
        let n = self.node_count();
        let mut hops = Vec::with_capacity(n * n);
        for v in self.nodes() {
            hops.extend(self.bfs_distances(v).into_iter().map(|d| d.unwrap_or(u32::MAX)));
        }
        DistanceTable { n, hops }
    }

    /// Minimum-eccentricity node, lowest index on ties.
    pub fn center_node(&self) -> NodeId {
        let table = self.distance_table();
        self.nodes().min_by_key(|&v| (table.eccentricity(v), v)).expect("topologies are never empty")
    }

    /// Debug dump: one `u v` line per edge, ascending.
    pub fn write_edge_list<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in &self.edges {
            writeln!(out, "{} {}", e.a, e.b)?;
        }
        Ok(())
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if self.contains(v) {
            Ok(())
        } else {
            Err(Error::invalid(format!("node {v} not in topology of {} nodes", self.node_count())))
        }
    }
}

/// Dense all-pairs hop matrix; `u32::MAX` marks unreachable pairs.
#[derive(Debug, Clone)]
pub struct DistanceTable {
    n: usize,
    hops: Vec<u32>,
}

impl DistanceTable {
    #[inline]
    pub fn get(&self, u: NodeId, v: NodeId) -> u32 {
        self.hops[u.index() * self.n + v.index()]
    }

    pub fn eccentricity(&self, v: NodeId) -> u32 {
        self.hops[v.index() * self.n..(v.index() + 1) * self.n].iter().copied().max().unwrap_or(0)
    }

    pub fn diameter(&self) -> u32 {
        self.hops.iter().copied().max().unwrap_or(0)
    }

    fn pair_sum(&self, nodes: &[NodeId]) -> Result<u64> {
        let mut sum = 0u64;
        for (i, &u) in nodes.iter().enumerate() {
            for &v in &nodes[i + 1..] {
                match self.get(u, v) {
                    u32::MAX => return Err(Error::Unreachable { from: u, to: v }),
                    d => sum += u64::from(d),
                }
            }
        }
        Ok(sum)
    }

    pub fn group_distance(&self, nodes: &[NodeId]) -> Result<f64> {
        let pairs = nodes.len() * nodes.len().saturating_sub(1) / 2;
        if pairs == 0 {
            return Err(Error::invalid("group distance needs at least two nodes"));
        }
        Ok(self.pair_sum(nodes)? as f64 / pairs as f64)
    }
}

/// Ordered list of distinct end nodes, none of them the DODAG root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsumerSet(Vec<NodeId>);

impl ConsumerSet {
    pub fn new(nodes: Vec<NodeId>, root: NodeId) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::invalid(format!("need at least 2 consumers, got {}", nodes.len())));
        }
        for (i, v) in nodes.iter().enumerate() {
            if *v == root {
                return Err(Error::invalid(format!("consumer {v} is the root")));
            }
            if nodes[..i].contains(v) {
                return Err(Error::invalid(format!("consumer {v} listed twice")));
            }
        }
        Ok(ConsumerSet(nodes))
    }

    pub fn as_slice(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.contains(&v)
    }
}

/// Target placement for consumer rejection sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSpec {
    pub n: usize,
    pub d_star: f64,
    pub delta: f64,
    pub trials: usize,
}

impl SamplingSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid(format!("consumer count must be >= 2, got {}", self.n)));
        }
        if !self.d_star.is_finite() || self.d_star < 1.0 {
            return Err(Error::invalid(format!("d_star must be >= 1, got {}", self.d_star)));
        }
        if !self.delta.is_finite() || self.delta < 0.0 {
            return Err(Error::invalid(format!("delta must be >= 0, got {}", self.delta)));
        }
        if self.trials < 1 {
            return Err(Error::invalid("trials must be >= 1"));
        }
        Ok(())
    }

    pub fn window(&self) -> (f64, f64) {
        (self.d_star - self.delta, self.d_star + self.delta)
    }
}

/// Draws `spec.n` distinct non-root nodes uniformly at random until their
/// group distance falls inside `[d_star - delta, d_star + delta]`.
pub fn sample_consumers(
    table: &DistanceTable,
    spec: &SamplingSpec,
    root: NodeId,
    rng: &mut RandomStream,
) -> Result<ConsumerSet> {
    sample_consumers_with_budget(table, spec, root, rng, SAMPLING_BUDGET)
}

pub fn sample_consumers_with_budget(
    table: &DistanceTable,
    spec: &SamplingSpec,
    root: NodeId,
    rng: &mut RandomStream,
    budget: u64,
) -> Result<ConsumerSet> {
    spec.validate()?;
    let node_count = table.n;
    if spec.n + 1 > node_count {
        return Err(Error::invalid(format!(
            "cannot place {} consumers on {node_count} nodes besides the root",
            spec.n
        )));
    }
    let (lo, hi) = spec.window();
    // Mean pairwise distance of distinct nodes lies in [1, diameter].
    if lo > f64::from(table.diameter()) + WINDOW_EPS || hi < 1.0 - WINDOW_EPS {
        return Err(Error::SamplingExhausted { draws: 0 });
    }
    let pairs = (spec.n * (spec.n - 1) / 2) as f64;
    let (lo_sum, hi_sum) = (lo * pairs - WINDOW_EPS, hi * pairs + WINDOW_EPS);
    let mut nodes = Vec::with_capacity(spec.n);
    for _ in 0..budget {
        nodes.clear();
        nodes.extend(index::sample(rng, node_count - 1, spec.n).into_iter().map(|i| {
            let i = i as u32;
            if i >= root.0 {
                NodeId(i + 1)
            } else {
                NodeId(i)
            }
        }));
        let sum = match table.pair_sum(&nodes) {
            Ok(s) => s as f64,
            Err(_) => continue,
        };
        if sum >= lo_sum && sum <= hi_sum {
            return ConsumerSet::new(nodes, root);
        }
    }
    Err(Error::SamplingExhausted { draws: budget })
}
