//! Unit-capacity max-flow on node-split graphs.
//!
//! Every graph node `x` becomes an arc `in(x) -> out(x)` of capacity one, so a
//! flow of value `k` decomposes into `k` node-disjoint paths. Augmenting paths
//! are found by breadth-first search over adjacency lists kept in insertion
//! order, which callers fill in ascending node-id order.

use std::collections::VecDeque;

use crate::graph::{Graph, NodeId};

/// Residual network with paired forward/reverse arcs.
#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u32>,
    initial: Vec<u32>,
}

impl FlowNetwork {
    pub(crate) fn new(vertices: usize) -> Self {
        Self {
            adj: vec![Vec::new(); vertices],
            to: Vec::new(),
            cap: Vec::new(),
            initial: Vec::new(),
        }
    }

    pub(crate) fn add_arc(&mut self, from: usize, to: usize, cap: u32) {
        let id = self.to.len();
        self.to.push(to);
        self.cap.push(cap);
        self.initial.push(cap);
        self.adj[from].push(id);
        self.to.push(from);
        self.cap.push(0);
        self.initial.push(0);
        self.adj[to].push(id + 1);
    }

    /// Augments until `limit` units flow or no augmenting path remains.
    pub(crate) fn max_flow(&mut self, source: usize, sink: usize, limit: usize) -> usize {
        let mut total = 0;
        let mut parent = vec![usize::MAX; self.adj.len()];
        while total < limit {
            parent.iter_mut().for_each(|p| *p = usize::MAX);
            let mut queue = VecDeque::from([source]);
            let mut seen = vec![false; self.adj.len()];
            seen[source] = true;
            'bfs: while let Some(x) = queue.pop_front() {
                for &e in &self.adj[x] {
                    let y = self.to[e];
                    if !seen[y] && self.cap[e] > 0 {
                        seen[y] = true;
                        parent[y] = e;
                        if y == sink {
                            break 'bfs;
                        }
                        queue.push_back(y);
                    }
                }
            }
            if !seen[sink] {
                break;
            }
            let mut y = sink;
            while y != source {
                let e = parent[y];
                self.cap[e] -= 1;
                self.cap[e ^ 1] += 1;
                y = self.to[e ^ 1];
            }
            total += 1;
        }
        total
    }

    /// Vertices reachable from `source` in the residual network.
    pub(crate) fn reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[source] = true;
        let mut queue = VecDeque::from([source]);
        while let Some(x) = queue.pop_front() {
            for &e in &self.adj[x] {
                let y = self.to[e];
                if !seen[y] && self.cap[e] > 0 {
                    seen[y] = true;
                    queue.push_back(y);
                }
            }
        }
        seen
    }

    /// Decomposes the current flow into vertex sequences from `source` to `sink`.
    pub(crate) fn flow_paths(&self, source: usize, sink: usize) -> Vec<Vec<usize>> {
        let mut used = vec![0u32; self.to.len()];
        let mut paths = Vec::new();
        loop {
            let mut path = vec![source];
            let mut x = source;
            while x != sink {
                let next = self.adj[x].iter().copied().find(|&e| {
                    e % 2 == 0 && self.initial[e] - self.cap[e] > used[e]
                });
                match next {
                    Some(e) => {
                        used[e] += 1;
                        x = self.to[e];
                        path.push(x);
                    }
                    None => break,
                }
            }
            if x != sink {
                return paths;
            }
            paths.push(path);
        }
    }
}

/// Node-split network over `g`.
///
/// `removed` nodes are absent. `entry_only` nodes cannot be entered from a
/// graph neighbor, so they can only start a path.
pub(crate) struct SplitFlow {
    pub(crate) net: FlowNetwork,
    n: usize,
}

impl SplitFlow {
    pub(crate) fn input(x: NodeId) -> usize {
        2 * x
    }

    pub(crate) fn output(x: NodeId) -> usize {
        2 * x + 1
    }

    pub(crate) fn build(g: &Graph, removed: &[bool], entry_only: &[bool], extra: usize) -> Self {
        Self::build_with_edge_cap(g, removed, entry_only, extra, 1)
    }

    /// As [`SplitFlow::build`], with `edge_cap` on node-to-node arcs. A large
    /// edge capacity makes every minimum cut consist of node arcs.
    pub(crate) fn build_with_edge_cap(
        g: &Graph,
        removed: &[bool],
        entry_only: &[bool],
        extra: usize,
        edge_cap: u32,
    ) -> Self {
        let n = g.n();
        let mut net = FlowNetwork::new(2 * n + extra);
        for x in 0..n {
            if !removed[x] {
                net.add_arc(Self::input(x), Self::output(x), 1);
            }
        }
        for a in 0..n {
            if removed[a] {
                continue;
            }
            for &b in g.neighbors(a) {
                if !removed[b] && !entry_only[b] {
                    net.add_arc(Self::output(a), Self::input(b), edge_cap);
                }
            }
        }
        Self { net, n }
    }

    /// Id of the first auxiliary vertex beyond the split nodes.
    pub(crate) fn aux(&self, i: usize) -> usize {
        2 * self.n + i
    }

    /// Flow paths mapped back to graph node sequences.
    pub(crate) fn node_paths(&self, source: usize, sink: usize) -> Vec<Vec<NodeId>> {
        self.net
            .flow_paths(source, sink)
            .into_iter()
            .map(|vs| {
                let mut nodes: Vec<NodeId> = Vec::new();
                for v in vs {
                    if v >= 2 * self.n {
                        continue;
                    }
                    let x = v / 2;
                    if nodes.last() != Some(&x) {
                        nodes.push(x);
                    }
                }
                nodes
            })
            .collect()
    }
}
