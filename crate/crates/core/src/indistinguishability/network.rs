use crate::graph::{Graph, NodeId};
use crate::netsim::Network;

use super::{Construction, Part, SplitError, SplitSpec};

/// One node of a split network: a copy of `node`, with `side` set for
/// duplicated parts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Copy {
    pub node: NodeId,
    pub side: Option<u8>,
}

impl std::fmt::Display for Copy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.side {
            Some(s) => write!(f, "{}_{s}", self.node),
            None => write!(f, "{}", self.node),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SplitNetwork {
    graph: Graph,
    spec: SplitSpec,
    copies: Vec<Copy>,
    /// `listeners[c]`: copies that hear copy `c`.
    listeners: Vec<Vec<usize>>,
}

/// Side of a duplicated part `heard` that a copy in `listener` (on
/// `listener_side` when duplicated) listens to.
fn heard_side(construction: Construction, listener: Part, listener_side: Option<u8>, heard: Part) -> u8 {
    use Part::*;
    let flip = |s: u8| 1 - s;
    match (construction, listener_side) {
        (Construction::HybridConnectivity, Some(s)) => match (listener, heard) {
            (A, T) | (T, A) => flip(s),
            _ => s,
        },
        (_, Some(s)) => s,
        (Construction::Degree, None) => match listener {
            F2 => 1,
            _ => 0,
        },
        (Construction::HybridDegree, None) => match listener {
            F2 | R => 1,
            _ => 0,
        },
        (Construction::Connectivity, None) => match (listener, heard) {
            (C3, _) | (C2, B) => 1,
            _ => 0,
        },
        (Construction::HybridConnectivity, None) => match (listener, heard) {
            (C1, _) => 0,
            (C2, A) => 0,
            (C2, _) => 1,
            (C3, T) => 0,
            (C3, _) => 1,
            _ => 0,
        },
    }
}

/// Copies the nodes of `g` as `spec` prescribes and wires who hears whom.
pub fn build_split_network(g: &Graph, spec: &SplitSpec) -> Result<SplitNetwork, SplitError> {
    if spec.assignment.len() != g.n() {
        return Err(SplitError::Invalid("spec was built for another graph".into()));
    }
    spec.check_bounds(g)?;
    let construction = spec.construction();
    let mut copies = Vec::new();
    for x in 0..g.n() {
        if construction.duplicated(spec.part_of(x)) {
            copies.push(Copy { node: x, side: Some(0) });
            copies.push(Copy { node: x, side: Some(1) });
        } else {
            copies.push(Copy { node: x, side: None });
        }
    }
    let mut net = SplitNetwork {
        graph: g.clone(),
        spec: spec.clone(),
        listeners: vec![Vec::new(); copies.len()],
        copies,
    };
    for (c, copy) in net.copies.clone().into_iter().enumerate() {
        for &v in g.neighbors(copy.node) {
            let heard = net.heard_copy(c, v);
            net.listeners[heard].push(c);
        }
    }
    for l in &mut net.listeners {
        l.sort_unstable();
    }
    net.check_hearing()?;
    Ok(net)
}

impl SplitNetwork {
    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn spec(&self) -> &SplitSpec {
        &self.spec
    }

    pub fn copies(&self) -> &[Copy] {
        &self.copies
    }

    pub fn listeners(&self, c: usize) -> &[usize] {
        &self.listeners[c]
    }

    pub fn index_of(&self, node: NodeId, side: Option<u8>) -> Option<usize> {
        self.copies.iter().position(|c| c.node == node && c.side == side)
    }

    /// The copy of `v` that copy `c` hears.
    pub fn heard_copy(&self, c: usize, v: NodeId) -> usize {
        let copy = self.copies[c];
        let construction = self.spec.construction();
        let vp = self.spec.part_of(v);
        let side = construction.duplicated(vp).then(|| {
            heard_side(construction, self.spec.part_of(copy.node), copy.side, vp)
        });
        self.index_of(v, side).expect("every node has its copies")
    }

    /// Input each copy gets in the split run: side `s` copies get `s`, and
    /// single copies get the value of the parts drawn on the zero side.
    pub fn input_of(&self, c: usize) -> u8 {
        use Part::*;
        let copy = self.copies[c];
        match copy.side {
            Some(s) => s,
            None => match self.spec.part_of(copy.node) {
                Z | S | F1 | C1 => 0,
                _ => 1,
            },
        }
    }

    /// Edges as `(from, to, two_way)`, listing each two-way edge once.
    pub fn edges(&self) -> Vec<(usize, usize, bool)> {
        let mut out = Vec::new();
        for (a, ls) in self.listeners.iter().enumerate() {
            for &b in ls {
                let back = self.listeners[b].contains(&a);
                if !back {
                    out.push((a, b, false));
                } else if a < b {
                    out.push((a, b, true));
                }
            }
        }
        out
    }

    /// Each copy of `u` hears exactly one copy of every neighbor of `u` and
    /// nothing else; the two copies of a node never hear each other.
    pub fn check_hearing(&self) -> Result<(), SplitError> {
        let n = self.graph.n();
        for (c, copy) in self.copies.iter().enumerate() {
            let mut heard = vec![0usize; n];
            for (src, ls) in self.listeners.iter().enumerate() {
                if ls.contains(&c) {
                    heard[self.copies[src].node] += 1;
                }
            }
            for (v, &count) in heard.iter().enumerate() {
                let expected = usize::from(self.graph.has_edge(copy.node, v));
                if count != expected {
                    return Err(SplitError::Invalid(format!(
                        "copy {copy} hears {count} copies of node {v}, expected {expected}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Network {
        Network::custom(
            self.copies.iter().map(|c| c.node).collect(),
            self.copies.iter().map(Copy::to_string).collect(),
            self.listeners.clone(),
        )
    }

    /// Graphviz rendering; one-way edges are drawn as arrows.
    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph split {\n");
        for (i, c) in self.copies.iter().enumerate() {
            s.push_str(&format!("  c{i} [label=\"{c} {}\"];\n", self.spec.part_of(c.node)));
        }
        for (a, b, two_way) in self.edges() {
            let attr = if two_way { " [dir=none]" } else { "" };
            s.push_str(&format!("  c{a} -> c{b}{attr};\n"));
        }
        s.push_str("}\n");
        s
    }
}
