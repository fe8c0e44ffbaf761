//! Brute-force oracles shared by the integration tests.
#![allow(dead_code)]

use lbcast::graph::{Graph, NodeId};
use proptest::prelude::*;

/// The graph whose edge `i` (in `(u, v)`, `u < v` order) is present iff bit
/// `i` of `bits` is set.
pub fn graph_from_bits(n: usize, bits: u64) -> Graph {
    let mut g = Graph::new(n).unwrap();
    let mut i = 0;
    for u in 0..n {
        for v in u + 1..n {
            if bits >> i & 1 == 1 {
                g.add_edge(u, v).unwrap();
            }
            i += 1;
        }
    }
    g
}

pub fn arb_graph(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    (min_n..=max_n, any::<u64>()).prop_map(|(n, bits)| graph_from_bits(n, bits))
}

/// Whether the nodes outside `removed` (a bit mask) form a connected graph.
pub fn connected_without(g: &Graph, removed: u64) -> bool {
    let n = g.n();
    let Some(start) = (0..n).find(|x| removed >> x & 1 == 0) else { return true };
    let mut seen = removed | 1 << start;
    let mut stack = vec![start];
    while let Some(u) = stack.pop() {
        for &v in g.neighbors(u) {
            if seen >> v & 1 == 0 {
                seen |= 1 << v;
                stack.push(v);
            }
        }
    }
    seen.count_ones() as usize == n
}

/// Smallest `S` with `|S| < n - 1` whose removal disconnects `g`, else `n - 1`.
pub fn brute_connectivity(g: &Graph) -> usize {
    let n = g.n();
    let mut best = n.saturating_sub(1);
    for s in 0u64..1 << n {
        let size = s.count_ones() as usize;
        if size < best && size + 1 < n && !connected_without(g, s) {
            best = size;
        }
    }
    best
}

/// Whether `u` and `v` stay connected after removing the nodes in `removed`.
fn joined_without(g: &Graph, u: NodeId, v: NodeId, removed: u64) -> bool {
    let mut seen = removed | 1 << u;
    let mut stack = vec![u];
    while let Some(x) = stack.pop() {
        if x == v {
            return true;
        }
        for &y in g.neighbors(x) {
            if seen >> y & 1 == 0 {
                seen |= 1 << y;
                stack.push(y);
            }
        }
    }
    false
}

/// Smallest vertex set separating non-adjacent `u` and `v`; `usize::MAX`
/// when they are adjacent.
pub fn brute_uv_cut(g: &Graph, u: NodeId, v: NodeId) -> usize {
    if g.has_edge(u, v) {
        return usize::MAX;
    }
    let others = !(1u64 << u | 1 << v) & ((1 << g.n()) - 1);
    let mut best = usize::MAX;
    let mut s = others;
    loop {
        if !joined_without(g, u, v, s) {
            best = best.min(s.count_ones() as usize);
        }
        if s == 0 {
            break;
        }
        s = (s - 1) & others;
    }
    best
}

/// Every simple path from `from` to `to`, as node sequences.
pub fn simple_paths(g: &Graph, from: NodeId, to: NodeId) -> Vec<Vec<NodeId>> {
    fn walk(g: &Graph, path: &mut Vec<NodeId>, to: NodeId, out: &mut Vec<Vec<NodeId>>) {
        let last = *path.last().unwrap();
        if last == to {
            out.push(path.clone());
            return;
        }
        for &y in g.neighbors(last) {
            if !path.contains(&y) {
                path.push(y);
                walk(g, path, to, out);
                path.pop();
            }
        }
    }
    let mut out = Vec::new();
    walk(g, &mut vec![from], to, &mut out);
    out
}
