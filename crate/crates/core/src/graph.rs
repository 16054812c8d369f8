//! Undirected simple graphs with string UIDs, plus the connectivity queries
//! everything else is built on: component decomposition, cut testing, and
//! enumeration of inclusion-minimal vertex separators.
//!
//! All collections are ordered (lexicographic on UIDs) so every query is
//! deterministic and reports are reproducible byte-for-byte.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard cap on graph size. Bitmask-based set operations rely on it, and every
/// algorithm here is exponential desk-scale anyway.
pub const MAX_NODES: usize = 32;

/// Node identifier: an opaque token with total (lexicographic) order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(s: impl Into<String>) -> Self {
        NodeId(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// A set of nodes, always kept ordered.
pub type NodeSet = BTreeSet<NodeId>;

/// Undirected simple graph. Immutable after construction.
///
/// Serializes as `{"nodes": [...], "edges": [[a,b], ...]}`; deserialization
/// revalidates simplicity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    nodes: Vec<NodeId>,               // sorted
    index: BTreeMap<NodeId, usize>,   // uid -> position in `nodes`
    adj: Vec<u64>,                    // adjacency bitmask per node index
    edges: BTreeSet<(NodeId, NodeId)>, // normalized (min, max)
}

/// An inclusion-minimal vertex separator together with one pair of nodes it
/// separates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertexCut {
    pub members: NodeSet,
    pub separated_witness: (NodeId, NodeId),
}

impl Graph {
    /// Build a graph, validating simplicity. Errors name the offending element.
    pub fn new<N, E>(nodes: N, edges: E) -> Result<Self>
    where
        N: IntoIterator<Item = NodeId>,
        E: IntoIterator<Item = (NodeId, NodeId)>,
    {
        let mut sorted: Vec<NodeId> = Vec::new();
        let mut seen = BTreeSet::new();
        for n in nodes {
            if !seen.insert(n.clone()) {
                return Err(Error::GraphParse(format!("duplicate node `{n}`")));
            }
            sorted.push(n);
        }
        sorted.sort();
        if sorted.is_empty() {
            return Err(Error::GraphParse("graph must have at least one node".into()));
        }
        if sorted.len() > MAX_NODES {
            return Err(Error::ResourceLimit {
                what: "node count",
                actual: sorted.len(),
                limit: MAX_NODES,
            });
        }
        let index: BTreeMap<NodeId, usize> = sorted
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut adj = vec![0u64; sorted.len()];
        let mut edge_set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::GraphParse(format!("self-loop at `{a}`")));
            }
            let ia = *index
                .get(&a)
                .ok_or_else(|| Error::GraphParse(format!("edge endpoint `{a}` is not a node")))?;
            let ib = *index
                .get(&b)
                .ok_or_else(|| Error::GraphParse(format!("edge endpoint `{b}` is not a node")))?;
            let key = if a <= b { (a, b) } else { (b, a) };
            if !edge_set.insert(key.clone()) {
                return Err(Error::GraphParse(format!(
                    "duplicate edge `{}`--`{}`",
                    key.0, key.1
                )));
            }
            adj[ia] |= 1 << ib;
            adj[ib] |= 1 << ia;
        }
        Ok(Graph {
            nodes: sorted,
            index,
            adj,
            edges: edge_set,
        })
    }

    /// Parse the JSON form `{"nodes": ["a", ...], "edges": [["a","b"], ...]}`.
    pub fn from_json(json: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Repr {
            nodes: Vec<NodeId>,
            edges: Vec<(NodeId, NodeId)>,
        }
        let repr: Repr =
            serde_json::from_str(json).map_err(|e| Error::GraphParse(e.to_string()))?;
        Graph::new(repr.nodes, repr.edges)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "nodes": self.nodes,
            "edges": self.edges.iter().collect::<Vec<_>>(),
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Nodes in sorted order.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node_set(&self) -> NodeSet {
        self.nodes.iter().cloned().collect()
    }

    pub fn edges(&self) -> &BTreeSet<(NodeId, NodeId)> {
        &self.edges
    }

    pub fn contains(&self, n: &NodeId) -> bool {
        self.index.contains_key(n)
    }

    /// Position of a node in the sorted node table.
    pub fn idx(&self, n: &NodeId) -> Result<usize> {
        self.index
            .get(n)
            .copied()
            .ok_or_else(|| Error::UnknownNode(n.to_string()))
    }

    pub fn node_at(&self, i: usize) -> &NodeId {
        &self.nodes[i]
    }

    /// Adjacency bitmask of node index `i`.
    pub fn adj_mask(&self, i: usize) -> u64 {
        self.adj[i]
    }

    pub fn full_mask(&self) -> u64 {
        if self.nodes.len() == 64 {
            u64::MAX
        } else {
            (1u64 << self.nodes.len()) - 1
        }
    }

    pub fn set_to_mask(&self, s: &NodeSet) -> Result<u64> {
        let mut m = 0u64;
        for n in s {
            m |= 1 << self.idx(n)?;
        }
        Ok(m)
    }

    pub fn mask_to_set(&self, mut m: u64) -> NodeSet {
        let mut out = NodeSet::new();
        while m != 0 {
            let i = m.trailing_zeros() as usize;
            out.insert(self.nodes[i].clone());
            m &= m - 1;
        }
        out
    }

    pub fn are_adjacent(&self, a: &NodeId, b: &NodeId) -> Result<bool> {
        let ia = self.idx(a)?;
        let ib = self.idx(b)?;
        Ok(self.adj[ia] & (1 << ib) != 0)
    }

    /// Neighbors of `v`.
    pub fn neighbors(&self, v: &NodeId) -> Result<NodeSet> {
        let i = self.idx(v)?;
        Ok(self.mask_to_set(self.adj[i]))
    }

    /// Connected components of the subgraph induced by `alive` (a bitmask),
    /// each returned as a bitmask, ordered by lowest set bit.
    fn components_mask(&self, alive: u64) -> Vec<u64> {
        let mut out = Vec::new();
        let mut unseen = alive;
        while unseen != 0 {
            let start = unseen.trailing_zeros() as usize;
            let mut comp = 1u64 << start;
            let mut frontier = comp;
            while frontier != 0 {
                let mut next = 0u64;
                let mut f = frontier;
                while f != 0 {
                    let i = f.trailing_zeros() as usize;
                    next |= self.adj[i] & alive & !comp;
                    f &= f - 1;
                }
                comp |= next;
                frontier = next;
            }
            out.push(comp);
            unseen &= !comp;
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components_mask(self.full_mask()).len() == 1
    }

    /// Partition of `nodes \ s` into connected components, ordered by their
    /// smallest member.
    pub fn components_after_removal(&self, s: &NodeSet) -> Result<Vec<NodeSet>> {
        let removed = self.set_to_mask(s)?;
        let alive = self.full_mask() & !removed;
        Ok(self
            .components_mask(alive)
            .into_iter()
            .map(|m| self.mask_to_set(m))
            .collect())
    }

    /// True iff removing `s` leaves at least two connected components.
    pub fn is_cut(&self, s: &NodeSet) -> Result<bool> {
        let removed = self.set_to_mask(s)?;
        let alive = self.full_mask() & !removed;
        if alive == 0 {
            return Err(Error::NothingLeftToSeparate);
        }
        Ok(self.components_mask(alive).len() >= 2)
    }

    fn is_cut_mask(&self, removed: u64) -> bool {
        let alive = self.full_mask() & !removed;
        alive != 0 && self.components_mask(alive).len() >= 2
    }

    /// All inclusion-minimal vertex separators, each with a separated witness
    /// pair, sorted by member list. Requires a connected graph with n >= 2.
    ///
    /// Generation: seed with separators "close to" each vertex (component
    /// neighborhoods of G \ N[x]), then close under the neighborhood-expansion
    /// step (for S and x in S, take component neighborhoods of G \ (S u N(x))).
    /// The result is every minimal u-v separator; a final filter keeps the
    /// inclusion-minimal ones.
    pub fn enumerate_minimal_cuts(&self) -> Result<Vec<VertexCut>> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        let n = self.nodes.len();
        if n < 2 {
            return Ok(Vec::new());
        }
        let full = self.full_mask();
        let mut seps: BTreeSet<u64> = BTreeSet::new();
        let mut queue: Vec<u64> = Vec::new();

        let push = |m: u64, seps: &mut BTreeSet<u64>, queue: &mut Vec<u64>| {
            if m != 0 && self.is_cut_mask(m) && seps.insert(m) {
                queue.push(m);
            }
        };

        // Seeds: neighborhoods of components of G \ N[x].
        for x in 0..n {
            let closed = self.adj[x] | (1 << x);
            for comp in self.components_mask(full & !closed) {
                let mut nb = 0u64;
                let mut c = comp;
                while c != 0 {
                    let i = c.trailing_zeros() as usize;
                    nb |= self.adj[i];
                    c &= c - 1;
                }
                push(nb & !comp, &mut seps, &mut queue);
            }
        }
        // Expansion to closure.
        while let Some(s) = queue.pop() {
            let mut rest = s;
            while rest != 0 {
                let x = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                let blocked = s | self.adj[x];
                for comp in self.components_mask(full & !blocked & !(1 << x)) {
                    let mut nb = 0u64;
                    let mut c = comp;
                    while c != 0 {
                        let i = c.trailing_zeros() as usize;
                        nb |= self.adj[i];
                        c &= c - 1;
                    }
                    push(nb & !comp, &mut seps, &mut queue);
                }
            }
        }

        // Keep the inclusion-minimal ones.
        let all: Vec<u64> = seps.iter().copied().collect();
        let mut minimal: Vec<u64> = all
            .iter()
            .copied()
            .filter(|&s| !all.iter().any(|&t| t != s && (t & s) == t))
            .collect();
        // Sort by member list (lexicographic on sorted UIDs == numeric order of
        // masks only when names sort like indices; sort via materialized sets).
        minimal.sort_by_key(|&m| {
            self.mask_to_set(m)
                .iter()
                .map(|n| n.0.clone())
                .collect::<Vec<_>>()
        });

        minimal
            .into_iter()
            .map(|m| {
                let comps = self.components_mask(full & !m);
                let a = comps[0].trailing_zeros() as usize;
                let b = comps[1].trailing_zeros() as usize;
                Ok(VertexCut {
                    members: self.mask_to_set(m),
                    separated_witness: (self.nodes[a].clone(), self.nodes[b].clone()),
                })
            })
            .collect()
    }

    /// Vertex connectivity: size of the smallest vertex cut, with the
    /// complete-graph convention n-1.
    pub fn connectivity(&self) -> Result<usize> {
        if !self.is_connected() {
            return Err(Error::Disconnected);
        }
        let cuts = self.enumerate_minimal_cuts()?;
        Ok(cuts
            .iter()
            .map(|c| c.members.len())
            .min()
            .unwrap_or(self.nodes.len().saturating_sub(1)))
    }
}

impl Serialize for Graph {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = ser.serialize_struct("Graph", 2)?;
        s.serialize_field("nodes", &self.nodes)?;
        s.serialize_field("edges", &self.edges.iter().collect::<Vec<_>>())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Graph {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        #[derive(Deserialize)]
        struct Repr {
            nodes: Vec<NodeId>,
            edges: Vec<(NodeId, NodeId)>,
        }
        let repr = Repr::deserialize(de)?;
        Graph::new(repr.nodes, repr.edges).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn set(names: &[&str]) -> NodeSet {
        names.iter().map(|s| NodeId::from(*s)).collect()
    }

    /// Brute-force oracle: every inclusion-minimal separator, by testing all
    /// subsets of size <= n-2 and filtering out those with a cutting proper
    /// subset.
    pub(crate) fn minimal_cuts_oracle(g: &Graph) -> Vec<NodeSet> {
        let n = g.node_count();
        let full = g.full_mask();
        let mut cuts: Vec<u64> = Vec::new();
        for m in 0..(1u64 << n) {
            if (m & full) != m || m.count_ones() as usize > n.saturating_sub(2) {
                continue;
            }
            if g.is_cut_mask(m) {
                cuts.push(m);
            }
        }
        let minimal: Vec<u64> = cuts
            .iter()
            .copied()
            .filter(|&s| !cuts.iter().any(|&t| t != s && (t & s) == t))
            .collect();
        let mut out: Vec<NodeSet> = minimal.into_iter().map(|m| g.mask_to_set(m)).collect();
        out.sort();
        out
    }

    #[test]
    fn neighbors_path3() {
        let g = fixtures::path3();
        assert_eq!(g.neighbors(&"b".into()).unwrap(), set(&["a", "c"]));
    }

    #[test]
    fn neighbors_k43_four_side_sees_whole_three_side() {
        let g = fixtures::k43();
        for v in ["d", "e", "f", "g"] {
            assert_eq!(g.neighbors(&v.into()).unwrap(), set(&["a", "b", "c"]));
        }
    }

    #[test]
    fn neighbors_isolated_singleton() {
        let g = Graph::new([NodeId::from("a")], []).unwrap();
        assert!(g.neighbors(&"a".into()).unwrap().is_empty());
    }

    #[test]
    fn neighbors_unknown_node_is_error() {
        let g = fixtures::path3();
        assert!(matches!(
            g.neighbors(&"zz".into()),
            Err(Error::UnknownNode(_))
        ));
    }

    #[test]
    fn is_cut_examples() {
        let p3 = fixtures::path3();
        assert!(p3.is_cut(&set(&["b"])).unwrap());
        let k43 = fixtures::k43();
        assert!(k43.is_cut(&set(&["a", "b", "c"])).unwrap());
        assert!(k43.is_cut(&set(&["d", "e", "f", "g"])).unwrap());
        // Two nodes of the 3-side do not cut: verified by the component count
        // (c stays adjacent to the whole 4-side).
        assert!(!k43.is_cut(&set(&["a", "b"])).unwrap());
    }

    #[test]
    fn is_cut_whole_node_set_is_error() {
        let p3 = fixtures::path3();
        assert!(matches!(
            p3.is_cut(&set(&["a", "b", "c"])),
            Err(Error::NothingLeftToSeparate)
        ));
    }

    #[test]
    fn enumerate_minimal_cuts_path3() {
        let g = fixtures::path3();
        let cuts = g.enumerate_minimal_cuts().unwrap();
        assert_eq!(cuts.len(), 1);
        assert_eq!(cuts[0].members, set(&["b"]));
        assert_eq!(
            cuts[0].separated_witness,
            (NodeId::from("a"), NodeId::from("c"))
        );
    }

    #[test]
    fn enumerate_minimal_cuts_k43_is_both_sides() {
        let g = fixtures::k43();
        let cuts = g.enumerate_minimal_cuts().unwrap();
        let members: Vec<NodeSet> = cuts.iter().map(|c| c.members.clone()).collect();
        assert_eq!(members, vec![set(&["a", "b", "c"]), set(&["d", "e", "f", "g"])]);
        assert_eq!(members, minimal_cuts_oracle(&g));
    }

    #[test]
    fn complete_graph_has_no_cuts() {
        let g = fixtures::k4();
        assert!(g.enumerate_minimal_cuts().unwrap().is_empty());
    }

    #[test]
    fn enumerate_rejects_disconnected() {
        let g = Graph::new(
            ["a", "b", "c", "d"].map(NodeId::from),
            [(NodeId::from("a"), NodeId::from("b"))],
        )
        .unwrap();
        assert!(matches!(g.enumerate_minimal_cuts(), Err(Error::Disconnected)));
    }

    #[test]
    fn connectivity_values() {
        assert_eq!(fixtures::k43().connectivity().unwrap(), 3);
        assert_eq!(fixtures::path3().connectivity().unwrap(), 1);
        assert_eq!(fixtures::k4().connectivity().unwrap(), 3);
        assert_eq!(fixtures::unknown_graph8().connectivity().unwrap(), 3);
    }

    #[test]
    fn components_after_removal_examples() {
        let p3 = fixtures::path3();
        assert_eq!(
            p3.components_after_removal(&set(&["b"])).unwrap(),
            vec![set(&["a"]), set(&["c"])]
        );
        let k43 = fixtures::k43();
        let comps = k43
            .components_after_removal(&set(&["a", "b", "c"]))
            .unwrap();
        assert_eq!(
            comps,
            vec![set(&["d"]), set(&["e"]), set(&["f"]), set(&["g"])]
        );
        assert_eq!(
            k43.components_after_removal(&NodeSet::new()).unwrap(),
            vec![k43.node_set()]
        );
    }

    #[test]
    fn components_partition_properties() {
        let g = fixtures::unknown_graph8();
        let s = set(&["red", "west"]);
        let comps = g.components_after_removal(&s).unwrap();
        let mut union = NodeSet::new();
        for c in &comps {
            // Internally connected.
            let sub_nodes: Vec<NodeId> = c.iter().cloned().collect();
            let sub_edges: Vec<(NodeId, NodeId)> = g
                .edges()
                .iter()
                .filter(|(a, b)| c.contains(a) && c.contains(b))
                .cloned()
                .collect();
            let sub = Graph::new(sub_nodes, sub_edges).unwrap();
            assert!(sub.is_connected());
            for n in c {
                assert!(union.insert(n.clone()), "components overlap at {n}");
            }
        }
        let mut expect = g.node_set();
        for n in &s {
            expect.remove(n);
        }
        assert_eq!(union, expect);
    }

    #[test]
    fn minimal_cuts_match_oracle_on_corpus() {
        for g in fixtures::corpus_graphs() {
            let got: Vec<NodeSet> = {
                let mut v: Vec<NodeSet> = g
                    .enumerate_minimal_cuts()
                    .unwrap()
                    .iter()
                    .map(|c| c.members.clone())
                    .collect();
                v.sort();
                v
            };
            assert_eq!(got, minimal_cuts_oracle(&g), "graph {:?}", g.nodes());
        }
    }

    #[test]
    fn minimal_cuts_match_oracle_exhaustive_n_le_5() {
        for n in 2..=5usize {
            let names: Vec<NodeId> = (0..n).map(|i| NodeId::new(format!("n{i}"))).collect();
            let pairs: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .collect();
            for mask in 0u32..(1 << pairs.len()) {
                let edges: Vec<(NodeId, NodeId)> = pairs
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &(i, j))| (names[i].clone(), names[j].clone()))
                    .collect();
                let g = Graph::new(names.clone(), edges).unwrap();
                if !g.is_connected() {
                    continue;
                }
                let got: Vec<NodeSet> = {
                    let mut v: Vec<NodeSet> = g
                        .enumerate_minimal_cuts()
                        .unwrap()
                        .iter()
                        .map(|c| c.members.clone())
                        .collect();
                    v.sort();
                    v
                };
                assert_eq!(got, minimal_cuts_oracle(&g), "n={n} mask={mask}");
            }
        }
    }

    #[test]
    fn cuts_satisfy_minimality_directly() {
        for g in fixtures::corpus_graphs() {
            for cut in g.enumerate_minimal_cuts().unwrap() {
                assert!(g.is_cut(&cut.members).unwrap());
                for drop in &cut.members {
                    let mut smaller = cut.members.clone();
                    smaller.remove(drop);
                    if !smaller.is_empty() {
                        assert!(
                            !g.is_cut(&smaller).unwrap(),
                            "dropping {drop} from {:?} still cuts",
                            cut.members
                        );
                    }
                }
                // The witness pair really is separated and outside the cut.
                let (u, v) = &cut.separated_witness;
                assert!(!cut.members.contains(u) && !cut.members.contains(v));
                let comps = g.components_after_removal(&cut.members).unwrap();
                let cu = comps.iter().position(|c| c.contains(u)).unwrap();
                let cv = comps.iter().position(|c| c.contains(v)).unwrap();
                assert_ne!(cu, cv);
            }
        }
    }

    #[test]
    fn connectivity_is_min_cut_size() {
        for g in fixtures::corpus_graphs() {
            let cuts = g.enumerate_minimal_cuts().unwrap();
            let expect = cuts
                .iter()
                .map(|c| c.members.len())
                .min()
                .unwrap_or(g.node_count() - 1);
            assert_eq!(g.connectivity().unwrap(), expect);
        }
    }

    #[test]
    fn json_rejects_bad_input() {
        let dup_node = r#"{"nodes":["a","a"],"edges":[]}"#;
        let err = Graph::from_json(dup_node).unwrap_err().to_string();
        assert!(err.contains("duplicate node `a`"), "{err}");

        let self_loop = r#"{"nodes":["a","b"],"edges":[["a","a"]]}"#;
        let err = Graph::from_json(self_loop).unwrap_err().to_string();
        assert!(err.contains("self-loop at `a`"), "{err}");

        let dup_edge = r#"{"nodes":["a","b"],"edges":[["a","b"],["b","a"]]}"#;
        let err = Graph::from_json(dup_edge).unwrap_err().to_string();
        assert!(err.contains("duplicate edge `a`--`b`"), "{err}");

        let stray = r#"{"nodes":["a","b"],"edges":[["a","q"]]}"#;
        let err = Graph::from_json(stray).unwrap_err().to_string();
        assert!(err.contains("`q` is not a node"), "{err}");
    }

    #[test]
    fn json_round_trips() {
        let g = fixtures::k43();
        let j = serde_json::to_string(&g.to_json()).unwrap();
        let g2 = Graph::from_json(&j).unwrap();
        assert_eq!(g, g2);
    }
}
