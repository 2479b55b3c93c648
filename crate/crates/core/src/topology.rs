//! Network graph, cluster labels and Byzantine membership.
//!
//! Edges are undirected: node `i` receives from `j` exactly when `j`
//! receives from `i`. Every neighborhood includes the node itself and is
//! kept in ascending id order so that downstream tie-breaks are stable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type NodeId = usize;

/// Immutable network description.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    num_nodes: usize,
    // neighborhoods[i] is N_i: sorted, contains i.
    neighborhoods: Vec<Vec<NodeId>>,
    cluster_labels: Vec<String>,
    cluster_of: Vec<usize>,
    byzantine: Vec<bool>,
}

impl Topology {
    /// Builds a topology from unordered edges and one cluster label per node.
    ///
    /// Self-edges are rejected, as are repeated pairs in either orientation.
    pub fn new<I>(num_nodes: usize, edges: I, clusters: &[String], byzantine: &[NodeId]) -> Result<Self>
    where
        I: IntoIterator<Item = (NodeId, NodeId)>,
    {
        if num_nodes == 0 {
            return Err(Error::input("topology needs at least one node"));
        }
        if clusters.len() != num_nodes {
            return Err(Error::input(format!(
                "expected {num_nodes} cluster labels, got {}",
                clusters.len()
            )));
        }
        let mut seen = BTreeSet::new();
        let mut adjacency = vec![BTreeSet::new(); num_nodes];
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::input(format!("edge ({a},{b}) references a node outside 0..{num_nodes}")));
            }
            if a == b {
                return Err(Error::input(format!("self-edge on node {a}")));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::input(format!("duplicate edge ({a},{b})")));
            }
            adjacency[a].insert(b);
            adjacency[b].insert(a);
        }
        let neighborhoods = adjacency
            .into_iter()
            .enumerate()
            .map(|(i, mut set)| {
                set.insert(i);
                set.into_iter().collect()
            })
            .collect();

        let mut label_index: BTreeMap<&str, usize> = BTreeMap::new();
        for label in clusters {
            let next = label_index.len();
            label_index.entry(label.as_str()).or_insert(next);
        }
        let mut cluster_labels = vec![String::new(); label_index.len()];
        for (label, &idx) in &label_index {
            cluster_labels[idx] = (*label).to_string();
        }
        let cluster_of = clusters.iter().map(|c| label_index[c.as_str()]).collect();

        let mut flags = vec![false; num_nodes];
        for &k in byzantine {
            if k >= num_nodes {
                return Err(Error::input(format!("byzantine node {k} out of range")));
            }
            flags[k] = true;
        }
        Ok(Self {
            num_nodes,
            neighborhoods,
            cluster_labels,
            cluster_of,
            byzantine: flags,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// N_i, including `i` itself, ascending.
    pub fn neighbors(&self, i: NodeId) -> Result<&[NodeId]> {
        self.neighborhoods
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::input(format!("node {i} out of range 0..{}", self.num_nodes)))
    }

    pub(crate) fn neighborhood(&self, i: NodeId) -> &[NodeId] {
        &self.neighborhoods[i]
    }

    pub fn is_neighbor(&self, j: NodeId, i: NodeId) -> bool {
        self.neighborhoods
            .get(i)
            .is_some_and(|n| n.binary_search(&j).is_ok())
    }

    /// Number of other nodes adjacent to `i`.
    pub fn degree(&self, i: NodeId) -> usize {
        self.neighborhoods[i].len() - 1
    }

    /// Undirected edges as `(low, high)` pairs in ascending order.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        let mut out = Vec::new();
        for (i, n) in self.neighborhoods.iter().enumerate() {
            out.extend(n.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    pub fn is_byzantine(&self, i: NodeId) -> bool {
        self.byzantine[i]
    }

    pub fn byzantine_nodes(&self) -> Vec<NodeId> {
        (0..self.num_nodes).filter(|&i| self.byzantine[i]).collect()
    }

    pub fn normal_nodes(&self) -> Vec<NodeId> {
        (0..self.num_nodes).filter(|&i| !self.byzantine[i]).collect()
    }

    /// Dense cluster index of node `i`.
    pub fn cluster(&self, i: NodeId) -> usize {
        self.cluster_of[i]
    }

    pub fn cluster_label(&self, i: NodeId) -> &str {
        &self.cluster_labels[self.cluster_of[i]]
    }

    pub fn cluster_labels(&self) -> &[String] {
        &self.cluster_labels
    }

    pub fn node_labels(&self) -> Vec<String> {
        (0..self.num_nodes).map(|i| self.cluster_label(i).to_string()).collect()
    }

    /// Removes the given undirected pairs. Pairs that are not edges are ignored.
    pub fn prune_edges(&self, cut: &BTreeSet<(NodeId, NodeId)>) -> Topology {
        let normalized: BTreeSet<_> = cut.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
        let edges = self.edges().into_iter().filter(|e| !normalized.contains(e));
        Topology::new(self.num_nodes, edges, &self.node_labels(), &self.byzantine_nodes())
            .expect("pruning a valid topology keeps it valid")
    }

    /// Connected components over the nodes accepted by `keep`, each sorted,
    /// ordered by smallest member.
    pub fn components(&self, keep: impl Fn(NodeId) -> bool) -> Vec<Vec<NodeId>> {
        let mut seen = vec![false; self.num_nodes];
        let mut out = Vec::new();
        for start in 0..self.num_nodes {
            if seen[start] || !keep(start) {
                continue;
            }
            let mut comp = Vec::new();
            let mut queue = VecDeque::from([start]);
            seen[start] = true;
            while let Some(x) = queue.pop_front() {
                comp.push(x);
                for &y in &self.neighborhoods[x] {
                    if !seen[y] && keep(y) {
                        seen[y] = true;
                        queue.push_back(y);
                    }
                }
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components(|_| true).len() == 1
    }

    pub fn to_document(&self, ideal_states: Option<&IdealStates>) -> TopologyDocument {
        TopologyDocument {
            nodes: self.num_nodes,
            edges: self.edges().into_iter().map(|(a, b)| [a, b]).collect(),
            clusters: (0..self.num_nodes)
                .map(|i| (i.to_string(), self.cluster_label(i).to_string()))
                .collect(),
            byzantine: self.byzantine_nodes(),
            ideal_states: ideal_states
                .map(|s| {
                    s.iter()
                        .map(|(k, v)| (k.to_string(), v.iter().copied().collect()))
                        .collect()
                })
                .unwrap_or_default(),
        }
    }
}

/// Per-cluster ideal state vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct IdealStates {
    states: BTreeMap<String, DVector<f64>>,
    dimension: usize,
}

impl IdealStates {
    pub fn new(states: BTreeMap<String, DVector<f64>>) -> Result<Self> {
        let dimension = states
            .values()
            .next()
            .map(|v| v.len())
            .ok_or_else(|| Error::input("ideal states must name at least one cluster"))?;
        if dimension == 0 {
            return Err(Error::input("ideal states must have positive dimension"));
        }
        if let Some((k, v)) = states.iter().find(|(_, v)| v.len() != dimension) {
            return Err(Error::input(format!(
                "ideal state for cluster {k} has length {}, expected {dimension}",
                v.len()
            )));
        }
        Ok(Self { states, dimension })
    }

    pub fn from_slices<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [f64])>) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(k, v)| (k.to_string(), DVector::from_column_slice(v)))
                .collect(),
        )
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn get(&self, cluster: &str) -> Option<&DVector<f64>> {
        self.states.get(cluster)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DVector<f64>)> {
        self.states.iter().map(|(k, v)| (k.as_str(), v))
    }

    /// w°_i for every node of `topo`; fails if a normal node's cluster has no state.
    pub fn per_node(&self, topo: &Topology) -> Result<Vec<DVector<f64>>> {
        (0..topo.num_nodes())
            .map(|i| match self.get(topo.cluster_label(i)) {
                Some(v) => Ok(v.clone()),
                None if topo.is_byzantine(i) => Ok(DVector::zeros(self.dimension)),
                None => Err(Error::input(format!(
                    "no ideal state for cluster {} of node {i}",
                    topo.cluster_label(i)
                ))),
            })
            .collect()
    }
}

/// On-disk topology description.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyDocument {
    pub nodes: usize,
    #[serde(default)]
    pub edges: Vec<[NodeId; 2]>,
    /// Node id (as a string key) to cluster label.
    pub clusters: BTreeMap<String, String>,
    #[serde(default)]
    pub byzantine: Vec<NodeId>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub ideal_states: BTreeMap<String, Vec<f64>>,
}

/// Validates a document and builds the topology plus its ideal states (if any).
///
/// Edge lists may name each undirected edge once, or both orientations of
/// every edge. Mixing the two forms is reported as an asymmetric list.
pub fn load_topology(doc: &TopologyDocument) -> Result<(Topology, Option<IdealStates>)> {
    let n = doc.nodes;
    if n == 0 {
        return Err(Error::schema("nodes", "must be positive"));
    }
    let mut ordered = BTreeSet::new();
    for (k, &[a, b]) in doc.edges.iter().enumerate() {
        let loc = format!("edges[{k}]");
        if a >= n || b >= n {
            return Err(Error::schema(loc, format!("node id out of range 0..{n}: [{a},{b}]")));
        }
        if a == b {
            return Err(Error::schema(loc, "self-edges are implicit and may not be listed"));
        }
        if !ordered.insert((a, b)) {
            return Err(Error::schema(loc, format!("duplicate edge [{a},{b}]")));
        }
    }
    let reversed = ordered.iter().filter(|&&(a, b)| ordered.contains(&(b, a))).count();
    if reversed != 0 && reversed != ordered.len() {
        let (a, b) = ordered
            .iter()
            .find(|&&(a, b)| !ordered.contains(&(b, a)))
            .copied()
            .expect("some edge is unpaired");
        return Err(Error::schema(
            "edges",
            format!("asymmetric edge list: [{a},{b}] has no reverse while other edges do"),
        ));
    }
    let edges: Vec<_> = ordered.iter().filter(|&&(a, b)| a < b || !ordered.contains(&(b, a))).copied().collect();

    let mut labels = vec![None; n];
    for (key, label) in &doc.clusters {
        let loc = format!("clusters.{key}");
        let id: usize = key
            .parse()
            .map_err(|_| Error::schema(&loc, "cluster keys must be node ids"))?;
        if id >= n {
            return Err(Error::schema(loc, format!("node id out of range 0..{n}")));
        }
        labels[id] = Some(label.clone());
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::schema("clusters", format!("node {i} has no cluster"))))
        .collect::<Result<Vec<_>>>()?;

    for (k, &b) in doc.byzantine.iter().enumerate() {
        if b >= n {
            return Err(Error::schema(format!("byzantine[{k}]"), format!("node id {b} out of range")));
        }
    }

    let ideal = if doc.ideal_states.is_empty() {
        None
    } else {
        for (i, label) in labels.iter().enumerate() {
            if !doc.byzantine.contains(&i) && !doc.ideal_states.contains_key(label) {
                return Err(Error::schema(
                    format!("clusters.{i}"),
                    format!("unknown cluster reference {label:?}: not in ideal_states"),
                ));
            }
        }
        let states = IdealStates::new(
            doc.ideal_states
                .iter()
                .map(|(k, v)| (k.clone(), DVector::from_column_slice(v)))
                .collect(),
        )
        .map_err(|e| Error::schema("ideal_states", e.to_string()))?;
        Some(states)
    };

    let topo = Topology::new(n, edges, &labels, &doc.byzantine).map_err(|e| Error::schema("edges", e.to_string()))?;
    Ok((topo, ideal))
}

/// Node positions together with an edge set, before clusters are attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub positions: Vec<[f64; 2]>,
    pub edges: Vec<(NodeId, NodeId)>,
}

impl Layout {
    /// Rectangular lattice, row-major ids. With `diagonal`, the eight
    /// surrounding cells are neighbors; otherwise only the four axis-aligned ones.
    pub fn grid(rows: usize, cols: usize, spacing: f64, origin: [f64; 2], diagonal: bool) -> Self {
        let id = |r: usize, c: usize| r * cols + c;
        let mut positions = Vec::with_capacity(rows * cols);
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                positions.push([origin[0] + c as f64 * spacing, origin[1] + r as f64 * spacing]);
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                    if diagonal {
                        if c + 1 < cols {
                            edges.push((id(r, c), id(r + 1, c + 1)));
                        }
                        if c > 0 {
                            edges.push((id(r, c), id(r + 1, c - 1)));
                        }
                    }
                }
            }
        }
        Self { positions, edges }
    }

    /// Uniform points in a `side`-by-`side` square joined when closer than
    /// `radius`. Disconnected draws are rejected and redrawn from the next stream.
    pub fn random_geometric(n: usize, side: f64, radius: f64, seed: u64, max_attempts: usize) -> Result<Self> {
        for attempt in 0..max_attempts as u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(attempt);
            let positions: Vec<[f64; 2]> = (0..n)
                .map(|_| [rng.random::<f64>() * side, rng.random::<f64>() * side])
                .collect();
            let mut edges = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    let dx = positions[a][0] - positions[b][0];
                    let dy = positions[a][1] - positions[b][1];
                    if dx.hypot(dy) < radius {
                        edges.push((a, b));
                    }
                }
            }
            let layout = Self { positions, edges };
            let labels = vec![String::new(); n];
            if Topology::new(n, layout.edges.iter().copied(), &labels, &[])?.is_connected() {
                return Ok(layout);
            }
        }
        Err(Error::input(format!(
            "no connected geometric graph (n={n}, radius={radius}) in {max_attempts} attempts"
        )))
    }

    pub fn num_nodes(&self) -> usize {
        self.positions.len()
    }

    pub fn into_topology(&self, clusters: &[String], byzantine: &[NodeId]) -> Result<Topology> {
        Topology::new(self.num_nodes(), self.edges.iter().copied(), clusters, byzantine)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn line_graph_neighbors() {
        let t = Topology::new(3, [(0, 1), (1, 2)], &labels(&["a", "a", "a"]), &[]).unwrap();
        assert_eq!(t.neighbors(1).unwrap(), &[0, 1, 2]);
        assert_eq!(t.neighbors(0).unwrap(), &[0, 1]);
        assert!(t.neighbors(3).is_err());
    }

    #[test]
    fn isolated_node_is_its_own_neighbor() {
        let t = Topology::new(1, [], &labels(&["a"]), &[]).unwrap();
        assert_eq!(t.neighbors(0).unwrap(), &[0]);
    }

    #[test]
    fn grid_degrees() {
        let layout = Layout::grid(8, 8, 1.0, [0.0, 0.0], false);
        let t = layout.into_topology(&vec!["a".into(); 64], &[]).unwrap();
        let interior = 3 * 8 + 4;
        assert_eq!(t.neighbors(interior).unwrap().len(), 5);
        assert_eq!(t.degree(0), 2);
        assert_eq!(t.degree(3), 3);
        let total: usize = (0..64).map(|i| t.degree(i)).sum();
        assert_eq!(total, 2 * 2 * 8 * 7);

        let diag = Layout::grid(8, 8, 1.0, [0.0, 0.0], true)
            .into_topology(&vec!["a".into(); 64], &[])
            .unwrap();
        assert_eq!(diag.degree(interior), 8);
        assert_eq!(diag.degree(0), 3);
    }

    #[test]
    fn load_minimal_document() {
        let doc: TopologyDocument =
            serde_json::from_str(r#"{"nodes":2,"edges":[[0,1]],"clusters":{"0":"A","1":"A"}}"#).unwrap();
        let (t, ideal) = load_topology(&doc).unwrap();
        assert_eq!(t.neighbors(0).unwrap(), &[0, 1]);
        assert!(ideal.is_none());
    }

    #[test]
    fn load_rejects_bad_documents() {
        let out_of_range: TopologyDocument =
            serde_json::from_str(r#"{"nodes":2,"edges":[[0,99]],"clusters":{"0":"A","1":"A"}}"#).unwrap();
        assert!(matches!(load_topology(&out_of_range), Err(Error::Schema { location, .. }) if location == "edges[0]"));

        let dup: TopologyDocument =
            serde_json::from_str(r#"{"nodes":2,"edges":[[0,1],[0,1]],"clusters":{"0":"A","1":"A"}}"#).unwrap();
        assert!(load_topology(&dup).is_err());

        let asym: TopologyDocument = serde_json::from_str(
            r#"{"nodes":3,"edges":[[0,1],[1,0],[1,2]],"clusters":{"0":"A","1":"A","2":"A"}}"#,
        )
        .unwrap();
        assert!(matches!(load_topology(&asym), Err(Error::Schema { message, .. }) if message.contains("asymmetric")));

        let both: TopologyDocument = serde_json::from_str(
            r#"{"nodes":3,"edges":[[0,1],[1,0],[1,2],[2,1]],"clusters":{"0":"A","1":"A","2":"A"}}"#,
        )
        .unwrap();
        assert_eq!(load_topology(&both).unwrap().0.edges(), vec![(0, 1), (1, 2)]);

        let unknown: TopologyDocument = serde_json::from_str(
            r#"{"nodes":2,"edges":[[0,1]],"clusters":{"0":"A","1":"B"},"ideal_states":{"A":[0.1,0.2]}}"#,
        )
        .unwrap();
        assert!(matches!(load_topology(&unknown), Err(Error::Schema { message, .. }) if message.contains("unknown cluster")));

        let missing: TopologyDocument =
            serde_json::from_str(r#"{"nodes":2,"edges":[],"clusters":{"0":"A"}}"#).unwrap();
        assert!(load_topology(&missing).is_err());
    }

    #[test]
    fn sensing_sized_network_with_one_byzantine() {
        let layout = Layout::grid(6, 6, 1.0, [0.0, 0.0], false);
        let mut clusters = vec!["blue".to_string(); 36];
        for c in clusters.iter_mut().skip(18) {
            *c = "green".into();
        }
        let doc = layout.into_topology(&clusters, &[20]).unwrap().to_document(None);
        let (t, _) = load_topology(&doc).unwrap();
        assert_eq!(t.byzantine_nodes().len(), 1);
        assert_eq!(t.normal_nodes().len(), 35);
    }

    #[test]
    fn prune_cases() {
        let tri = Topology::new(3, [(0, 1), (1, 2), (0, 2)], &labels(&["a", "a", "b"]), &[2]).unwrap();
        assert_eq!(tri.prune_edges(&BTreeSet::new()), tri);
        let path = tri.prune_edges(&BTreeSet::from([(2, 0)]));
        assert_eq!(path.edges(), vec![(0, 1), (1, 2)]);
        assert_eq!(path.cluster_label(2), "b");
        assert!(path.is_byzantine(2));

        let cut: BTreeSet<_> = tri.edges().into_iter().filter(|&(a, b)| a == 2 || b == 2).collect();
        let isolated = tri.prune_edges(&cut);
        assert_eq!(isolated.neighbors(2).unwrap(), &[2]);
        assert_eq!(isolated.num_nodes(), 3);
    }

    #[test]
    fn random_geometric_is_connected_and_reproducible() {
        let a = Layout::random_geometric(30, 1.0, 0.3, 7, 100).unwrap();
        let b = Layout::random_geometric(30, 1.0, 0.3, 7, 100).unwrap();
        assert_eq!(a, b);
        let t = a.into_topology(&vec!["x".into(); 30], &[]).unwrap();
        assert!(t.is_connected());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_topology() -> impl Strategy<Value = Topology> {
            (1usize..12).prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
                let m = pairs.len();
                (Just(n), Just(pairs), proptest::collection::vec(any::<bool>(), m)).prop_map(|(n, pairs, keep)| {
                    let edges = pairs.into_iter().zip(keep).filter(|(_, k)| *k).map(|(e, _)| e);
                    let labels: Vec<String> = (0..n).map(|i| (i % 2).to_string()).collect();
                    Topology::new(n, edges, &labels, &[]).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn neighborhoods_are_reflexive_and_symmetric(t in arb_topology()) {
                for i in 0..t.num_nodes() {
                    let n = t.neighbors(i).unwrap();
                    prop_assert!(n.contains(&i));
                    prop_assert!(n.windows(2).all(|w| w[0] < w[1]));
                    for &j in n {
                        prop_assert!(t.is_neighbor(i, j));
                    }
                }
            }

            #[test]
            fn pruning_keeps_nodes_and_labels(t in arb_topology(), drop_every in 1usize..4) {
                let cut: BTreeSet<_> = t.edges().into_iter().step_by(drop_every).collect();
                let p = t.prune_edges(&cut);
                prop_assert_eq!(p.num_nodes(), t.num_nodes());
                prop_assert_eq!(p.node_labels(), t.node_labels());
                prop_assert_eq!(p.edges().len(), t.edges().len() - cut.len());
            }
        }
    }
}
