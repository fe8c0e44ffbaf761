//! Split-network constructions behind the lower bounds, made executable.
//!
//! A [`SplitSpec`] partitions a graph's nodes into named parts. Building it
//! gives a [`SplitNetwork`] in which some parts are duplicated and some links
//! are one-way, so that every copy of a node hears exactly one copy of each
//! of its neighbors. Running a protocol there and projecting the run onto
//! three executions of the original graph yields scripted faulty behavior
//! that must break agreement or validity in at least one of them.

mod executions;
mod network;

pub use executions::{derive_executions, DemoOutcome, DemoReport, DerivedExecution, ExecutionOutcome};
pub use network::{build_split_network, Copy, SplitNetwork};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use thiserror::Error;

use crate::graph::{min_vertex_cut, neighbors_of_set, Graph, NodeId, NodeSet};
use crate::protocols::RunError;

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid split: {0}")]
    Invalid(String),
    #[error("unknown construction `{0}`")]
    UnknownConstruction(String),
    #[error("{execution}: run of the split network does not project: {detail}")]
    ProjectionMismatch { execution: String, detail: String },
    #[error(transparent)]
    Run(#[from] RunError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Construction {
    Degree,
    Connectivity,
    HybridDegree,
    HybridConnectivity,
}

impl Construction {
    pub const ALL: [Construction; 4] = [
        Construction::Degree,
        Construction::Connectivity,
        Construction::HybridDegree,
        Construction::HybridConnectivity,
    ];

    pub fn is_hybrid(self) -> bool {
        matches!(self, Construction::HybridDegree | Construction::HybridConnectivity)
    }

    fn parts(self) -> &'static [Part] {
        use Part::*;
        match self {
            Construction::Degree => &[Z, F1, F2, W],
            Construction::Connectivity => &[A, B, C1, C2, C3],
            Construction::HybridDegree => &[S, F1, F2, R, T, W],
            Construction::HybridConnectivity => &[A, B, C1, C2, C3, R, T],
        }
    }

    /// Parts with two copies in the split network.
    pub fn duplicated(self, part: Part) -> bool {
        use Part::*;
        match self {
            Construction::Degree => part == W,
            Construction::Connectivity => matches!(part, A | B),
            Construction::HybridDegree => matches!(part, T | W),
            Construction::HybridConnectivity => matches!(part, A | B | R | T),
        }
    }
}

impl fmt::Display for Construction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Construction::Degree => "degree",
            Construction::Connectivity => "connectivity",
            Construction::HybridDegree => "hybrid-degree",
            Construction::HybridConnectivity => "hybrid-connectivity",
        })
    }
}

impl FromStr for Construction {
    type Err = SplitError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Construction::ALL
            .into_iter()
            .find(|c| c.to_string() == s)
            .ok_or_else(|| SplitError::UnknownConstruction(s.to_string()))
    }
}

/// Named node sets of the constructions. `Z` is the low-degree node and `S`
/// the small set with few neighbors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Part {
    Z,
    S,
    F1,
    F2,
    W,
    A,
    B,
    C1,
    C2,
    C3,
    R,
    T,
}

impl fmt::Display for Part {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// A partition of the nodes for one construction, with the fault bounds it
/// is checked against.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitSpec {
    construction: Construction,
    f: usize,
    t: usize,
    assignment: Vec<Part>,
}

impl SplitSpec {
    /// Validates the partition against `g` and the size bounds.
    pub fn new(
        g: &Graph,
        construction: Construction,
        f: usize,
        t: usize,
        parts: &BTreeMap<Part, NodeSet>,
    ) -> Result<Self, SplitError> {
        let bad = |m: String| Err(SplitError::Invalid(m));
        let n = g.n();
        let mut assignment: Vec<Option<Part>> = vec![None; n];
        for (&part, nodes) in parts {
            if !construction.parts().contains(&part) {
                return bad(format!("part {part} does not belong to the {construction} construction"));
            }
            for &x in nodes {
                if x >= n {
                    return bad(format!("node {x} is out of range"));
                }
                if let Some(other) = assignment[x].replace(part) {
                    return bad(format!("node {x} is in both {other} and {part}"));
                }
            }
        }
        let Some(assignment) = assignment.into_iter().collect::<Option<Vec<Part>>>() else {
            return bad("the parts do not cover every node".into());
        };
        let spec = Self {
            construction,
            f,
            t,
            assignment,
        };
        spec.check_bounds(g)?;
        Ok(spec)
    }

    fn check_bounds(&self, g: &Graph) -> Result<(), SplitError> {
        use Part::*;
        let (f, t) = (self.f, self.t);
        let phi = f.saturating_sub(t);
        let size = |p: Part| self.members(p).len();
        let mut errors: Vec<String> = Vec::new();
        let mut need = |ok: bool, msg: &str| {
            if !ok {
                errors.push(msg.to_string());
            }
        };
        match self.construction {
            Construction::Degree => {
                need(f > 0, "f must be positive");
                need(size(Z) == 1, "Z must be a single node");
                need(size(F1) < f, "|F1| must be below f");
                need(size(F2) <= f, "|F2| must be at most f");
                need(size(F2) > 0, "F2 must be nonempty");
                if size(Z) == 1 {
                    let nb = neighbors_of_set(g, &self.members(Z)).expect("ids in range");
                    let fs: NodeSet = self.members(F1).union(&self.members(F2)).copied().collect();
                    need(nb == fs, "F1 and F2 must split the neighbors of Z");
                }
            }
            Construction::HybridDegree => {
                need(t > 0 && t <= f, "0 < t <= f is required");
                need(size(S) > 0 && size(S) <= t, "S must have between 1 and t nodes");
                need(size(F1) <= phi && size(F2) <= phi, "|F1| and |F2| must be at most f - t");
                need(size(R) <= t && size(T) <= t, "|R| and |T| must be at most t");
                need(size(R) > 0, "R must be nonempty");
                let nb = neighbors_of_set(g, &self.members(S)).expect("ids in range");
                let ns: NodeSet = [F1, F2, R, T].iter().flat_map(|&p| self.members(p)).collect();
                need(nb == ns, "F1, F2, R and T must split the neighbors of S");
            }
            Construction::Connectivity | Construction::HybridConnectivity => {
                let (phi, t) = if self.construction == Construction::Connectivity {
                    (f, 0)
                } else {
                    need(t > 0 && t <= f, "0 < t <= f is required");
                    (phi, t)
                };
                need(size(A) > 0 && size(B) > 0, "A and B must be nonempty");
                need(size(C1) <= phi / 2 && size(C2) <= phi / 2, "|C1| and |C2| are bounded by floor(phi/2)");
                need(size(C3) <= phi.div_ceil(2), "|C3| is bounded by ceil(phi/2)");
                need(size(R) <= t && size(T) <= t, "|R| and |T| must be at most t");
                let a = self.members(A);
                let b = self.members(B);
                need(
                    !a.iter().any(|&x| g.neighbors(x).iter().any(|y| b.contains(y))),
                    "no edge may join A and B",
                );
            }
        }
        match errors.is_empty() {
            true => Ok(()),
            false => Err(SplitError::Invalid(errors.join("; "))),
        }
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn part_of(&self, x: NodeId) -> Part {
        self.assignment[x]
    }

    pub fn members(&self, part: Part) -> NodeSet {
        (0..self.assignment.len()).filter(|&x| self.assignment[x] == part).collect()
    }

    /// Deterministic search for a valid partition; `None` when the graph
    /// meets the corresponding bound.
    pub fn find(g: &Graph, construction: Construction, f: usize, t: usize) -> Option<Self> {
        use Part::*;
        let n = g.n();
        let phi = f.saturating_sub(t);
        let fill = |pool: &[NodeId], caps: &[(Part, usize)], rest: Part| {
            let mut parts: BTreeMap<Part, NodeSet> = BTreeMap::new();
            let mut it = pool.iter().copied();
            for &(p, cap) in caps {
                parts.insert(p, it.by_ref().take(cap).collect());
            }
            parts.entry(rest).or_default().extend(it);
            parts
        };
        let candidates: Vec<BTreeMap<Part, NodeSet>> = match construction {
            Construction::Degree => (0..n)
                .filter(|&z| g.degree(z) > 0 && g.degree(z) < 2 * f)
                .map(|z| {
                    let nb = g.neighbors(z).to_vec();
                    let mut parts = fill(&nb, &[(F2, f.min(nb.len()))], F1);
                    parts.insert(Z, [z].into());
                    parts.insert(W, (0..n).filter(|&x| x != z && !nb.contains(&x)).collect());
                    parts
                })
                .collect(),
            Construction::HybridDegree => (1..=t.min(n))
                .flat_map(|k| (0..n).combinations(k))
                .filter_map(|s| {
                    let set: NodeSet = s.iter().copied().collect();
                    let nb: Vec<NodeId> = neighbors_of_set(g, &set).ok()?.into_iter().collect();
                    if nb.is_empty() || nb.len() > 2 * f {
                        return None;
                    }
                    let mut parts = fill(&nb, &[(R, t), (T, t), (F1, phi), (F2, phi)], F2);
                    parts.insert(W, (0..n).filter(|x| !set.contains(x) && !nb.contains(x)).collect());
                    parts.insert(S, set);
                    Some(parts)
                })
                .collect(),
            Construction::Connectivity | Construction::HybridConnectivity => {
                let (phi, t) = match construction {
                    Construction::Connectivity => (f, 0),
                    _ => (phi, t),
                };
                let cut = min_vertex_cut(g)?;
                let cut_vec: Vec<NodeId> = cut.iter().copied().collect();
                let side_a = component_avoiding(g, &cut);
                let mut parts = fill(
                    &cut_vec,
                    &[(C1, phi / 2), (C2, phi / 2), (C3, phi.div_ceil(2)), (R, t), (T, t)],
                    C3,
                );
                parts.insert(B, (0..n).filter(|x| !cut.contains(x) && !side_a.contains(x)).collect());
                parts.insert(A, side_a);
                vec![parts]
            }
        };
        candidates.into_iter().find_map(|mut parts| {
            parts.retain(|p, _| construction.parts().contains(p));
            Self::new(g, construction, f, t, &parts).ok()
        })
    }
}

/// The component of `g - cut` holding its smallest remaining node.
fn component_avoiding(g: &Graph, cut: &NodeSet) -> NodeSet {
    let Some(start) = (0..g.n()).find(|x| !cut.contains(x)) else {
        return NodeSet::new();
    };
    let mut seen: NodeSet = [start].into();
    let mut stack = vec![start];
    while let Some(x) = stack.pop() {
        for &y in g.neighbors(x) {
            if !cut.contains(&y) && seen.insert(y) {
                stack.push(y);
            }
        }
    }
    seen
}

impl fmt::Display for SplitSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} f={} t={}", self.construction, self.f, self.t)?;
        for &p in self.construction.parts() {
            write!(f, " {p}={{{}}}", self.members(p).iter().join(","))?;
        }
        Ok(())
    }
}
