//! Undirected simple graphs, simple paths, and node-disjoint path families.
//!
//! Node ids are `0..n`. Searches are deterministic: shortest paths are the
//! lexicographically least among equal-length candidates, and flow-based
//! searches scan neighbors in ascending id order.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::flow::SplitFlow;

pub type NodeId = usize;
pub type NodeSet = BTreeSet<NodeId>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a graph needs at least one node")]
    Empty,
    #[error("node {node} is out of range for a graph on {n} nodes")]
    NodeOutOfRange { node: NodeId, n: usize },
    #[error("self-loop at node {0}")]
    SelfLoop(NodeId),
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("invalid path {path}: {reason}")]
    InvalidPath { path: String, reason: &'static str },
    #[error("invalid path family: {0}")]
    InvalidFamily(String),
    #[error("target {0} is also listed as a source")]
    TargetIsSource(NodeId),
    #[error("endpoints of a uv-path family must differ (got {0} twice)")]
    SameEndpoints(NodeId),
}

/// Undirected simple graph with sorted adjacency lists.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Graph {
    n: usize,
    adj: Vec<Vec<NodeId>>,
}

impl Graph {
    /// Edgeless graph on `n` nodes.
    pub fn new(n: usize) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        Ok(Self {
            n,
            adj: vec![Vec::new(); n],
        })
    }

    pub fn from_edges(
        n: usize,
        edges: impl IntoIterator<Item = (NodeId, NodeId)>,
    ) -> Result<Self, GraphError> {
        let mut g = Self::new(n)?;
        for (u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn cycle(n: usize) -> Result<Self, GraphError> {
        if n < 3 {
            return Err(GraphError::Parse {
                line: 0,
                reason: format!("a cycle needs at least 3 nodes, got {n}"),
            });
        }
        Self::from_edges(n, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
    }

    /// The path graph `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize) -> Result<Self, GraphError> {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    /// Complete bipartite graph with sides `0..a` and `a..a+b`.
    pub fn complete_bipartite(a: usize, b: usize) -> Result<Self, GraphError> {
        Self::from_edges(a + b, (0..a).flat_map(|u| (a..a + b).map(move |v| (u, v))))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn check(&self, node: NodeId) -> Result<(), GraphError> {
        if node < self.n {
            Ok(())
        } else {
            Err(GraphError::NodeOutOfRange { node, n: self.n })
        }
    }

    /// Inserts `uv`; returns whether the edge was new.
    pub fn add_edge(&mut self, u: NodeId, v: NodeId) -> Result<bool, GraphError> {
        self.check(u)?;
        self.check(v)?;
        if u == v {
            return Err(GraphError::SelfLoop(u));
        }
        match self.adj[u].binary_search(&v) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos, u);
                Ok(true)
            }
        }
    }

    /// Deletes `uv`; returns whether it was present.
    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        if u >= self.n || v >= self.n {
            return false;
        }
        match self.adj[u].binary_search(&v) {
            Ok(pos) => {
                self.adj[u].remove(pos);
                let pos = self.adj[v].binary_search(&u).expect("adjacency is symmetric");
                self.adj[v].remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        u < self.n && self.adj[u].binary_search(&v).is_ok()
    }

    /// Neighbors of `u` in ascending order.
    pub fn neighbors(&self, u: NodeId) -> &[NodeId] {
        &self.adj[u]
    }

    pub fn degree(&self, u: NodeId) -> usize {
        self.adj[u].len()
    }

    /// Canonical edge list, each pair as `(low, high)`, sorted.
    pub fn edges(&self) -> Vec<(NodeId, NodeId)> {
        (0..self.n)
            .flat_map(|u| self.adj[u].iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn is_complete(&self) -> bool {
        self.adj.iter().all(|a| a.len() == self.n - 1)
    }

    /// Per-node adjacency bitmasks; only meaningful for `n <= 64`.
    pub fn adjacency_masks(&self) -> Vec<u64> {
        self.adj
            .iter()
            .map(|a| a.iter().fold(0u64, |m, &v| m | (1 << v)))
            .collect()
    }

    /// Parses the text format: first line `n`, then one `u v` edge per line.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, GraphError> {
        let mut graph: Option<Graph> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| GraphError::Parse {
                line: line_no,
                reason,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            match graph.as_mut() {
                None => {
                    if fields.len() != 1 {
                        return Err(err(format!("expected node count, found `{line}`")));
                    }
                    let n = fields[0]
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad node count: {e}")))?;
                    graph = Some(Graph::new(n).map_err(|e| err(e.to_string()))?);
                }
                Some(g) => {
                    if fields.len() != 2 {
                        return Err(err(format!("expected `u v`, found `{line}`")));
                    }
                    let u = fields[0]
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad node id: {e}")))?;
                    let v = fields[1]
                        .parse::<usize>()
                        .map_err(|e| err(format!("bad node id: {e}")))?;
                    g.add_edge(u, v).map_err(|e| err(e.to_string()))?;
                }
            }
        }
        graph.ok_or(GraphError::Empty)
    }

    /// Serializes in the text format accepted by [`Graph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{}\n", self.n);
        for (u, v) in self.edges() {
            out.push_str(&format!("{u} {v}\n"));
        }
        out
    }

    /// Single-token form `n:u-v.u-v...` used inside replay keys.
    pub fn to_compact(&self) -> String {
        let edges: Vec<String> = self.edges().iter().map(|(u, v)| format!("{u}-{v}")).collect();
        format!("{}:{}", self.n, edges.join("."))
    }

    pub fn from_compact(s: &str) -> Result<Self, GraphError> {
        let bad = |reason: String| GraphError::Parse { line: 0, reason };
        let (n, rest) = s
            .split_once(':')
            .ok_or_else(|| bad(format!("missing `:` in `{s}`")))?;
        let n = n.parse::<usize>().map_err(|e| bad(format!("bad node count: {e}")))?;
        let mut g = Graph::new(n)?;
        for pair in rest.split('.').filter(|p| !p.is_empty()) {
            let (u, v) = pair
                .split_once('-')
                .ok_or_else(|| bad(format!("bad edge `{pair}`")))?;
            let u = u.parse().map_err(|e| bad(format!("bad node id: {e}")))?;
            let v = v.parse().map_err(|e| bad(format!("bad node id: {e}")))?;
            g.add_edge(u, v)?;
        }
        Ok(g)
    }
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Graph({})", self.to_compact())
    }
}

impl FromStr for Graph {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Graph::parse(s)
    }
}

/// A nonempty simple path.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Path(Vec<NodeId>);

impl Path {
    /// Validates adjacency and simplicity against `g`.
    pub fn new(g: &Graph, nodes: Vec<NodeId>) -> Result<Self, GraphError> {
        let shown = || nodes.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("-");
        if nodes.is_empty() {
            return Err(GraphError::InvalidPath {
                path: String::new(),
                reason: "empty",
            });
        }
        let mut seen = BTreeSet::new();
        for (i, &x) in nodes.iter().enumerate() {
            g.check(x)?;
            if !seen.insert(x) {
                return Err(GraphError::InvalidPath {
                    path: shown(),
                    reason: "repeated node",
                });
            }
            if i > 0 && !g.has_edge(nodes[i - 1], x) {
                return Err(GraphError::InvalidPath {
                    path: shown(),
                    reason: "missing edge",
                });
            }
        }
        Ok(Self(nodes))
    }

    pub fn single(v: NodeId) -> Self {
        Self(vec![v])
    }

    pub(crate) fn from_vec_unchecked(nodes: Vec<NodeId>) -> Self {
        debug_assert!(!nodes.is_empty());
        Self(nodes)
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.0
    }

    pub fn start(&self) -> NodeId {
        self.0[0]
    }

    pub fn end(&self) -> NodeId {
        *self.0.last().expect("paths are nonempty")
    }

    /// Nodes strictly between the endpoints.
    pub fn internal(&self) -> &[NodeId] {
        if self.0.len() <= 2 {
            &[]
        } else {
            &self.0[1..self.0.len() - 1]
        }
    }

    pub fn edge_count(&self) -> usize {
        self.0.len() - 1
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.0.contains(&v)
    }

    /// True when no internal node lies in `excluded`.
    pub fn excludes(&self, excluded: &NodeSet) -> bool {
        self.internal().iter().all(|x| !excluded.contains(x))
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|x| x.to_string()).collect();
        f.write_str(&parts.join("-"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FamilyKind {
    /// Paths share both endpoints and nothing else.
    BetweenPair,
    /// Paths share only their final node; starts are distinct.
    IntoTarget,
}

/// Node-disjoint path family, validated on construction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PathFamily {
    kind: FamilyKind,
    paths: Vec<Path>,
}

impl PathFamily {
    pub fn between(mut paths: Vec<Path>) -> Result<Self, GraphError> {
        paths.sort();
        if let Some(first) = paths.first() {
            let (u, v) = (first.start(), first.end());
            let mut used = NodeSet::new();
            for p in &paths {
                if p.start() != u || p.end() != v || u == v {
                    return Err(GraphError::InvalidFamily(format!(
                        "path {p} does not run between {u} and {v}"
                    )));
                }
                if p.edge_count() == 1 && !used.insert(usize::MAX) {
                    return Err(GraphError::InvalidFamily("direct edge listed twice".into()));
                }
                for &x in p.internal() {
                    if !used.insert(x) {
                        return Err(GraphError::InvalidFamily(format!(
                            "node {x} shared between paths"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            kind: FamilyKind::BetweenPair,
            paths,
        })
    }

    pub fn into_target(mut paths: Vec<Path>) -> Result<Self, GraphError> {
        paths.sort();
        if let Some(first) = paths.first() {
            let v = first.end();
            let mut used = NodeSet::new();
            for p in &paths {
                if p.end() != v {
                    return Err(GraphError::InvalidFamily(format!("path {p} does not end at {v}")));
                }
                if p.nodes().len() < 2 {
                    return Err(GraphError::InvalidFamily(format!("path {p} has no start")));
                }
                for &x in &p.nodes()[..p.nodes().len() - 1] {
                    if !used.insert(x) {
                        return Err(GraphError::InvalidFamily(format!(
                            "node {x} shared between paths"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            kind: FamilyKind::IntoTarget,
            paths,
        })
    }

    pub fn kind(&self) -> FamilyKind {
        self.kind
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

impl fmt::Display for PathFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.paths.iter().map(Path::to_string).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

pub fn min_degree(g: &Graph) -> usize {
    (0..g.n()).map(|u| g.degree(u)).min().unwrap_or(0)
}

/// Nodes outside `s` adjacent to some member of `s`.
pub fn neighbors_of_set(g: &Graph, s: &NodeSet) -> Result<NodeSet, GraphError> {
    let mut out = NodeSet::new();
    for &u in s {
        g.check(u)?;
        out.extend(g.neighbors(u).iter().filter(|v| !s.contains(v)));
    }
    Ok(out)
}

fn uv_flow(g: &Graph) -> SplitFlow {
    let none = vec![false; g.n()];
    SplitFlow::build(g, &none, &none, 0)
}

/// Maximum number of internally disjoint uv-paths, capped at `limit`.
pub fn local_connectivity(g: &Graph, u: NodeId, v: NodeId, limit: usize) -> usize {
    let mut flow = uv_flow(g);
    flow.net
        .max_flow(SplitFlow::output(u), SplitFlow::input(v), limit)
}

/// Vertex connectivity; `n - 1` for complete graphs.
pub fn vertex_connectivity(g: &Graph) -> usize {
    let n = g.n();
    if g.is_complete() {
        return n - 1;
    }
    let mut best = min_degree(g);
    for u in 0..n {
        for v in u + 1..n {
            if best == 0 {
                return 0;
            }
            if !g.has_edge(u, v) {
                best = best.min(local_connectivity(g, u, v, best));
            }
        }
    }
    best
}

/// True when `g` has more than `k` nodes and no cut smaller than `k`.
pub fn is_k_connected(g: &Graph, k: usize) -> bool {
    g.n() > k && vertex_connectivity(g) >= k
}

/// A minimum vertex cut, or `None` for complete graphs.
pub fn min_vertex_cut(g: &Graph) -> Option<NodeSet> {
    if g.is_complete() {
        return None;
    }
    let n = g.n();
    let mut best: Option<(usize, NodeId, NodeId)> = None;
    for u in 0..n {
        for v in u + 1..n {
            if g.has_edge(u, v) {
                continue;
            }
            let limit = best.map_or(n, |b| b.0);
            let k = local_connectivity(g, u, v, limit);
            if best.is_none_or(|b| k < b.0) {
                best = Some((k, u, v));
            }
        }
    }
    let (_, u, v) = best?;
    let none = vec![false; n];
    let mut flow = SplitFlow::build_with_edge_cap(g, &none, &none, 0, n as u32);
    flow.net
        .max_flow(SplitFlow::output(u), SplitFlow::input(v), usize::MAX);
    let seen = flow.net.reachable(SplitFlow::output(u));
    Some(
        (0..n)
            .filter(|&x| x != u && x != v)
            .filter(|&x| seen[SplitFlow::input(x)] && !seen[SplitFlow::output(x)])
            .collect(),
    )
}

/// `k` internally disjoint uv-paths, or `None` if fewer exist.
pub fn disjoint_uv_paths(
    g: &Graph,
    u: NodeId,
    v: NodeId,
    k: usize,
) -> Result<Option<PathFamily>, GraphError> {
    g.check(u)?;
    g.check(v)?;
    if u == v {
        return Err(GraphError::SameEndpoints(u));
    }
    let mut flow = uv_flow(g);
    let (s, t) = (SplitFlow::output(u), SplitFlow::input(v));
    if flow.net.max_flow(s, t, k) < k {
        return Ok(None);
    }
    let paths = flow
        .node_paths(s, t)
        .into_iter()
        .map(Path::from_vec_unchecked)
        .collect();
    PathFamily::between(paths).map(Some)
}

fn set_paths(
    g: &Graph,
    sources: &NodeSet,
    v: NodeId,
    k: usize,
    excluded: &NodeSet,
) -> Result<Option<PathFamily>, GraphError> {
    g.check(v)?;
    for &s in sources.iter().chain(excluded) {
        g.check(s)?;
    }
    if sources.contains(&v) {
        return Err(GraphError::TargetIsSource(v));
    }
    let n = g.n();
    let mut removed = vec![false; n];
    let mut entry_only = vec![false; n];
    for &x in excluded {
        if x == v {
            continue;
        }
        if sources.contains(&x) {
            entry_only[x] = true;
        } else {
            removed[x] = true;
        }
    }
    let mut flow = SplitFlow::build(g, &removed, &entry_only, 1);
    let root = flow.aux(0);
    for &s in sources {
        flow.net.add_arc(root, SplitFlow::input(s), 1);
    }
    let sink = SplitFlow::input(v);
    if flow.net.max_flow(root, sink, k) < k {
        return Ok(None);
    }
    let paths = flow
        .node_paths(root, sink)
        .into_iter()
        .map(Path::from_vec_unchecked)
        .collect();
    PathFamily::into_target(paths).map(Some)
}

/// `k` node-disjoint paths from distinct members of `sources` to `v`.
pub fn disjoint_set_paths(
    g: &Graph,
    sources: &NodeSet,
    v: NodeId,
    k: usize,
) -> Result<Option<PathFamily>, GraphError> {
    set_paths(g, sources, v, k, &NodeSet::new())
}

/// Like [`disjoint_set_paths`], but no internal node may lie in `excluded`.
/// Excluded sources may still start a path.
pub fn disjoint_set_paths_excluding(
    g: &Graph,
    sources: &NodeSet,
    v: NodeId,
    k: usize,
    excluded: &NodeSet,
) -> Result<Option<PathFamily>, GraphError> {
    set_paths(g, sources, v, k, excluded)
}

/// Lexicographically least shortest uv-path whose internal nodes avoid
/// `excluded`. Endpoints may be excluded; `u == v` yields `[u]`.
pub fn path_excluding(
    g: &Graph,
    u: NodeId,
    v: NodeId,
    excluded: &NodeSet,
) -> Result<Option<Path>, GraphError> {
    g.check(u)?;
    g.check(v)?;
    if u == v {
        return Ok(Some(Path::single(u)));
    }
    let n = g.n();
    let passable = |x: NodeId| x == v || !excluded.contains(&x);
    let mut dist = vec![usize::MAX; n];
    dist[v] = 0;
    let mut queue = VecDeque::from([v]);
    while let Some(x) = queue.pop_front() {
        if !passable(x) || x == u {
            continue;
        }
        for &y in g.neighbors(x) {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                queue.push_back(y);
            }
        }
    }
    if dist[u] == usize::MAX {
        return Ok(None);
    }
    let mut nodes = vec![u];
    let mut x = u;
    while x != v {
        x = g
            .neighbors(x)
            .iter()
            .copied()
            .find(|&y| dist[y] != usize::MAX && dist[y] + 1 == dist[x] && passable(y))
            .expect("BFS layers guarantee a descending neighbor");
        nodes.push(x);
    }
    Ok(Some(Path::from_vec_unchecked(nodes)))
}
