//! Root-anchored tree (DODAG) maintained over the live links.
//!
//! Joining models the DIS/DIO/DAO exchange as synchronous rounds: in each
//! round every non-member holding a live link to a member joins under its
//! lowest-rank linked member. Members never reparent. A member leaves, with
//! its whole subtree, when the link to its parent expires or is consumed.

use std::io::{self, Write};

use crate::resources::{EntanglementPool, SteinerSubtree};
use crate::topology::{ConsumerSet, Edge, EdgeId, NodeId, PhysicalTopology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rank(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JoinEvent {
    pub joiner: NodeId,
    pub parent: NodeId,
    pub slot: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DodagState {
    root: NodeId,
    parent: Vec<Option<(NodeId, EdgeId)>>,
    rank: Vec<Option<Rank>>,
    children: Vec<Vec<NodeId>>,
    members: usize,
}

impl DodagState {
    pub fn new(topo: &PhysicalTopology, root: NodeId) -> Self {
        assert!(topo.contains(root), "root {root} outside topology");
        let n = topo.node_count();
        let mut rank = vec![None; n];
        rank[root.index()] = Some(Rank(0));
        DodagState { root, parent: vec![None; n], rank, children: vec![Vec::new(); n], members: 1 }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    #[inline]
    pub fn is_member(&self, v: NodeId) -> bool {
        self.rank[v.index()].is_some()
    }

    pub fn rank(&self, v: NodeId) -> Option<Rank> {
        self.rank[v.index()]
    }

    pub fn parent(&self, v: NodeId) -> Option<NodeId> {
        self.parent[v.index()].map(|(p, _)| p)
    }

    pub fn parent_edge(&self, v: NodeId) -> Option<EdgeId> {
        self.parent[v.index()].map(|(_, e)| e)
    }

    pub fn member_count(&self) -> usize {
        self.members
    }

    pub fn members(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.rank.iter().enumerate().filter(|(_, r)| r.is_some()).map(|(i, _)| NodeId(i as u32))
    }

    /// One slot of join messaging. Joins proceed layer by layer until no
    /// non-member has a live link to a member, or `max_layers` layers have
    /// been admitted. Events are returned in join order.
    pub fn join_round(&mut self, pool: &EntanglementPool<'_>, slot: u64, max_layers: Option<u32>) -> Vec<JoinEvent> {
        let topo = pool.topology();
        let mut events = Vec::new();
        let mut seen = vec![false; topo.node_count()];
        let mut frontier: Vec<NodeId> = Vec::new();
        for u in self.members() {
            self.collect_candidates(topo, pool, u, &mut seen, &mut frontier);
        }
        let mut layers = 0;
        while !frontier.is_empty() && max_layers.is_none_or(|limit| layers < limit) {
            frontier.sort_unstable();
            let joins: Vec<(NodeId, NodeId, EdgeId, Rank)> = frontier
                .iter()
                .filter_map(|&v| {
                    topo.neighbors(v)
                        .iter()
                        .filter(|&&(w, e)| pool.is_live(e) && self.is_member(w))
                        .map(|&(w, e)| (self.rank[w.index()].unwrap_or(Rank(u32::MAX)), w, e))
                        .min()
                        .map(|(r, w, e)| (v, w, e, Rank(r.0 + 1)))
                })
                .collect();
            for &(v, w, e, r) in &joins {
                self.parent[v.index()] = Some((w, e));
                self.rank[v.index()] = Some(r);
                self.children[w.index()].push(v);
                self.members += 1;
                events.push(JoinEvent { joiner: v, parent: w, slot });
            }
            frontier.clear();
            for &(v, ..) in &joins {
                self.collect_candidates(topo, pool, v, &mut seen, &mut frontier);
            }
            layers += 1;
        }
        events
    }

    fn collect_candidates(
        &self,
        topo: &PhysicalTopology,
        pool: &EntanglementPool<'_>,
        u: NodeId,
        seen: &mut [bool],
        out: &mut Vec<NodeId>,
    ) {
        for &(v, e) in topo.neighbors(u) {
            if !seen[v.index()] && !self.is_member(v) && pool.is_live(e) {
                seen[v.index()] = true;
                out.push(v);
            }
        }
    }

    /// Detaches the subtree below every listed edge that is a parent edge.
    /// Returns the removed nodes in ascending order.
    pub fn detach_edges(&mut self, topo: &PhysicalTopology, edges: &[EdgeId]) -> Vec<NodeId> {
        let mut removed = Vec::new();
        for &id in edges {
            let Edge { a, b } = topo.edge(id);
            for (child, parent) in [(a, b), (b, a)] {
                if self.parent[child.index()] == Some((parent, id)) {
                    self.detach_subtree(child, &mut removed);
                }
            }
        }
        removed.sort_unstable();
        removed
    }

    /// Alias for [`detach_edges`](Self::detach_edges) used on decoherence.
    pub fn detach_expired(&mut self, topo: &PhysicalTopology, expired: &[EdgeId]) -> Vec<NodeId> {
        self.detach_edges(topo, expired)
    }

    fn detach_subtree(&mut self, top: NodeId, removed: &mut Vec<NodeId>) {
        if let Some((p, _)) = self.parent[top.index()] {
            self.children[p.index()].retain(|&c| c != top);
        }
        let mut stack = vec![top];
        while let Some(v) = stack.pop() {
            stack.append(&mut self.children[v.index()]);
            self.parent[v.index()] = None;
            self.rank[v.index()] = None;
            self.members -= 1;
            removed.push(v);
        }
    }

    /// Minimal subtree of the parent-edge tree spanning `consumers`, or `None`
    /// if some consumer is not a member. The top of the result is the
    /// deepest node shared by all consumer-to-root paths, which may lie below
    /// the root.
    pub fn steiner_subtree(&self, consumers: &ConsumerSet) -> Option<SteinerSubtree> {
        if !consumers.as_slice().iter().all(|&c| self.is_member(c)) {
            return None;
        }
        let n = self.rank.len();
        let mut in_union = vec![false; n];
        let mut union_children = vec![0u32; n];
        let mut union = Vec::new();
        for &c in consumers.as_slice() {
            let mut v = c;
            while !in_union[v.index()] {
                in_union[v.index()] = true;
                union.push(v);
                match self.parent[v.index()] {
                    Some((p, _)) => {
                        union_children[p.index()] += 1;
                        v = p;
                    }
                    None => break,
                }
            }
        }
        // Strip the consumer-free chain hanging above the branching point.
        let mut top = self.root;
        while !consumers.contains(top) && union_children[top.index()] == 1 {
            in_union[top.index()] = false;
            top = *self.children[top.index()]
                .iter()
                .find(|c| in_union[c.index()])
                .expect("union child recorded in children list");
        }
        let edges = union.iter().filter(|&&v| v != top && in_union[v.index()]).map(|&v| {
            let (p, _) = self.parent[v.index()].expect("non-top union node has a parent");
            Edge::new(v, p)
        });
        Some(SteinerSubtree::new(edges, consumers.clone()).expect("tree paths form a valid Steiner subtree"))
    }

    /// Full-state scan of the tree invariants against the live pool.
    pub fn check_invariants(&self, pool: &EntanglementPool<'_>) -> Result<(), String> {
        let topo = pool.topology();
        if self.rank[self.root.index()] != Some(Rank(0)) || self.parent[self.root.index()].is_some() {
            return Err("root must have rank 0 and no parent".into());
        }
        let mut members = 0;
        for v in topo.nodes() {
            let (rank, parent) = (self.rank[v.index()], self.parent[v.index()]);
            match (rank, parent) {
                (None, None) => {
                    if !self.children[v.index()].is_empty() {
                        return Err(format!("non-member {v} has children"));
                    }
                    continue;
                }
                (Some(_), None) if v == self.root => {}
                (Some(r), Some((p, e))) => {
                    let pr = self.rank[p.index()].ok_or_else(|| format!("{v}'s parent {p} is not a member"))?;
                    if pr >= r {
                        return Err(format!("rank of parent {p} ({}) not below child {v} ({})", pr.0, r.0));
                    }
                    if r.0 != pr.0 + 1 {
                        return Err(format!("rank of {v} is {} but parent rank is {}", r.0, pr.0));
                    }
                    if topo.edge(e) != Edge::new(v, p) {
                        return Err(format!("parent edge of {v} does not join it to {p}"));
                    }
                    if !pool.is_live(e) {
                        return Err(format!("parent edge {v}-{p} has no live link"));
                    }
                    if !self.children[p.index()].contains(&v) {
                        return Err(format!("{v} missing from children of {p}"));
                    }
                }
                _ => return Err(format!("node {v} has inconsistent rank/parent")),
            }
            members += 1;
        }
        if members != self.members {
            return Err(format!("member counter {} but {members} members", self.members));
        }
        Ok(())
    }

    /// Debug table: `node parent rank` per member, ascending by node; the
    /// root's parent is written as `-`.
    pub fn write_table<W: Write>(&self, mut out: W) -> io::Result<()> {
        for v in self.members() {
            let rank = self.rank[v.index()].map_or(0, |r| r.0);
            match self.parent(v) {
                Some(p) => writeln!(out, "{v} {p} {rank}")?,
                None => writeln!(out, "{v} - {rank}")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn link(pool: &mut EntanglementPool<'_>, u: u32, v: u32) {
        let e = pool.topology().edge_between(NodeId(u), NodeId(v)).unwrap();
        pool.insert(e, 0);
    }

    #[test]
    fn init_state() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let a = DodagState::new(&g, NodeId(4));
        assert_eq!(a.members().collect::<Vec<_>>(), vec![NodeId(4)]);
        assert_eq!(a.rank(NodeId(4)), Some(Rank(0)));
        assert_eq!(a.parent(NodeId(4)), None);
        assert_eq!(a, DodagState::new(&g, NodeId(4)));
    }

    #[test]
    fn no_links_no_joins() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1); // not touching the root
        let mut d = DodagState::new(&g, NodeId(4));
        assert!(d.join_round(&pool, 0, None).is_empty());
    }

    #[test]
    fn single_join_under_root() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 4, 5);
        let mut d = DodagState::new(&g, NodeId(4));
        let ev = d.join_round(&pool, 3, None);
        assert_eq!(ev, vec![JoinEvent { joiner: NodeId(5), parent: NodeId(4), slot: 3 }]);
        assert_eq!(d.rank(NodeId(5)), Some(Rank(1)));
    }

    #[test]
    fn prefers_lowest_rank_parent() {
        // Path root(0)-1-2 plus node 3 linked to both 2 (rank 2) and 1 (rank 1).
        let g = PhysicalTopology::from_edges(4, [(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1);
        link(&mut pool, 1, 2);
        let mut d = DodagState::new(&g, NodeId(0));
        d.join_round(&pool, 0, None);
        link(&mut pool, 2, 3);
        link(&mut pool, 1, 3);
        let ev = d.join_round(&pool, 1, None);
        assert_eq!(ev.len(), 1);
        assert_eq!(d.parent(NodeId(3)), Some(NodeId(1)));
        assert_eq!(d.rank(NodeId(3)), Some(Rank(2)));
    }

    #[test]
    fn equal_rank_ties_go_to_lowest_id() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        for (u, v) in [(4, 1), (4, 3), (1, 0), (3, 0)] {
            link(&mut pool, u, v);
        }
        let mut d = DodagState::new(&g, NodeId(4));
        d.join_round(&pool, 0, None);
        assert_eq!(d.parent(NodeId(0)), Some(NodeId(1)));
    }

    #[test]
    fn cascade_and_hop_limit() {
        let g = PhysicalTopology::path(5).unwrap();
        let mut pool = EntanglementPool::new(&g);
        for i in 0..4 {
            link(&mut pool, i, i + 1);
        }
        let mut limited = DodagState::new(&g, NodeId(0));
        assert_eq!(limited.join_round(&pool, 0, Some(1)).len(), 1);
        assert_eq!(limited.join_round(&pool, 1, Some(1)).len(), 1);
        let mut full = DodagState::new(&g, NodeId(0));
        let ev = full.join_round(&pool, 0, None);
        assert_eq!(ev.iter().map(|e| e.joiner.0).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
        assert_eq!(full.rank(NodeId(4)), Some(Rank(4)));
        full.check_invariants(&pool).unwrap();
    }

    #[test]
    fn no_reparenting() {
        let g = PhysicalTopology::from_edges(4, [(0, 1), (1, 2), (0, 2), (2, 3)]).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1);
        link(&mut pool, 1, 2);
        let mut d = DodagState::new(&g, NodeId(0));
        d.join_round(&pool, 0, None);
        assert_eq!(d.rank(NodeId(2)), Some(Rank(2)));
        link(&mut pool, 0, 2);
        assert!(d.join_round(&pool, 1, None).is_empty());
        assert_eq!(d.parent(NodeId(2)), Some(NodeId(1)));
    }

    #[test]
    fn detach_rules() {
        let g = PhysicalTopology::path(5).unwrap();
        let mut pool = EntanglementPool::new(&g);
        for i in 0..4 {
            link(&mut pool, i, i + 1);
        }
        let mut d = DodagState::new(&g, NodeId(0));
        d.join_round(&pool, 0, None);
        let leaf_edge = g.edge_between(NodeId(3), NodeId(4)).unwrap();
        let mut leaf = d.clone();
        assert_eq!(leaf.detach_expired(&g, &[leaf_edge]), vec![NodeId(4)]);

        let root_edge = g.edge_between(NodeId(0), NodeId(1)).unwrap();
        let removed = d.detach_expired(&g, &[root_edge]);
        assert_eq!(removed, vec![NodeId(1), NodeId(2), NodeId(3), NodeId(4)]);
        assert_eq!(d.member_count(), 1);
        pool.consume(&[root_edge]).unwrap();
        d.check_invariants(&pool).unwrap();
    }

    #[test]
    fn detach_non_tree_edge_is_noop() {
        let g = PhysicalTopology::grid(3, 3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 4, 5);
        let mut d = DodagState::new(&g, NodeId(4));
        d.join_round(&pool, 0, None);
        let other = g.edge_between(NodeId(0), NodeId(1)).unwrap();
        assert!(d.detach_expired(&g, &[other]).is_empty());
        assert_eq!(d.member_count(), 2);
    }

    #[test]
    fn subtree_through_root() {
        let g = PhysicalTopology::path(3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1);
        link(&mut pool, 1, 2);
        let mut d = DodagState::new(&g, NodeId(1));
        d.join_round(&pool, 0, None);
        let c = ConsumerSet::new(vec![NodeId(0), NodeId(2)], NodeId(1)).unwrap();
        let t = d.steiner_subtree(&c).unwrap();
        assert_eq!(t.edges().len(), 2);
        assert_eq!(t.op_count(), 1);
    }

    #[test]
    fn subtree_aggregates_below_root() {
        // root 0 - L 1 - {A2 2, B2 3}
        let g = PhysicalTopology::from_edges(4, [(0, 1), (1, 2), (1, 3)]).unwrap();
        let mut pool = EntanglementPool::new(&g);
        for (u, v) in [(0, 1), (1, 2), (1, 3)] {
            link(&mut pool, u, v);
        }
        let mut d = DodagState::new(&g, NodeId(0));
        d.join_round(&pool, 0, None);
        let c = ConsumerSet::new(vec![NodeId(2), NodeId(3)], NodeId(0)).unwrap();
        let t = d.steiner_subtree(&c).unwrap();
        assert_eq!(t.nodes(), &[NodeId(1), NodeId(2), NodeId(3)]);
        assert!(!t.nodes().contains(&NodeId(0)));
    }

    #[test]
    fn subtree_absent_until_all_join() {
        let g = PhysicalTopology::path(3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1);
        let mut d = DodagState::new(&g, NodeId(1));
        d.join_round(&pool, 0, None);
        let c = ConsumerSet::new(vec![NodeId(0), NodeId(2)], NodeId(1)).unwrap();
        assert!(d.steiner_subtree(&c).is_none());
    }

    #[test]
    fn table_dump() {
        let g = PhysicalTopology::path(3).unwrap();
        let mut pool = EntanglementPool::new(&g);
        link(&mut pool, 0, 1);
        let mut d = DodagState::new(&g, NodeId(1));
        d.join_round(&pool, 0, None);
        let mut out = Vec::new();
        d.write_table(&mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "0 1 1\n1 - 0\n");
    }
}
