//! Graph conditions for consensus under local broadcast, the hybrid model,
//! and classical point-to-point links.

use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::graph::{
    min_degree, min_vertex_cut, neighbors_of_set, vertex_connectivity, Graph, NodeId, NodeSet,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FeasibilityError {
    #[error("fault bound f={f} must be below the node count {n}")]
    TooManyFaults { f: usize, n: usize },
    #[error("equivocation bound t={t} exceeds fault bound f={f}")]
    EquivocationExceedsFaults { t: usize, f: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    LocalBroadcast,
    Hybrid,
    PointToPoint,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LocalBroadcast => "lb",
            ModelKind::Hybrid => "hybrid",
            ModelKind::PointToPoint => "p2p",
        })
    }
}

/// Fault bounds: `f` Byzantine nodes, of which `t` may equivocate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FaultModel {
    kind: ModelKind,
    f: usize,
    t: usize,
}

impl FaultModel {
    pub fn local_broadcast(f: usize) -> Self {
        Self {
            kind: ModelKind::LocalBroadcast,
            f,
            t: 0,
        }
    }

    pub fn hybrid(f: usize, t: usize) -> Result<Self, FeasibilityError> {
        if t > f {
            return Err(FeasibilityError::EquivocationExceedsFaults { t, f });
        }
        Ok(Self {
            kind: ModelKind::Hybrid,
            f,
            t,
        })
    }

    pub fn point_to_point(f: usize) -> Self {
        Self {
            kind: ModelKind::PointToPoint,
            f,
            t: f,
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn t(&self) -> usize {
        self.t
    }
}

pub fn required_connectivity(fm: &FaultModel) -> usize {
    match fm.kind {
        ModelKind::LocalBroadcast => 3 * fm.f / 2 + 1,
        ModelKind::Hybrid => 3 * (fm.f - fm.t) / 2 + 2 * fm.t + 1,
        ModelKind::PointToPoint => 2 * fm.f + 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Witness {
    LowDegree { node: NodeId, degree: usize },
    Cut(NodeSet),
    /// Complete graphs have no cut; they fail only by being too small.
    TooFewNodes { n: usize },
    SmallNeighborhood { set: NodeSet, neighbors: usize },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: &NodeSet| s.iter().map(|x| x.to_string()).join(",");
        match self {
            Witness::LowDegree { node, degree } => write!(f, "node {node} has degree {degree}"),
            Witness::Cut(cut) => write!(f, "vertex cut {{{}}}", show(cut)),
            Witness::TooFewNodes { n } => write!(f, "complete graph on {n} nodes is too small"),
            Witness::SmallNeighborhood { set, neighbors } => {
                write!(f, "set {{{}}} has {neighbors} neighbors", show(set))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: &'static str,
    pub required: usize,
    pub actual: usize,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityReport {
    pub model: FaultModel,
    pub achievable: bool,
    pub checks: Vec<Check>,
    pub witness: Option<Witness>,
}

impl FeasibilityReport {
    fn assemble(model: FaultModel, parts: Vec<(Check, Option<Witness>)>) -> Self {
        let witness = parts.iter().find(|(c, _)| !c.pass).and_then(|(_, w)| w.clone());
        let checks: Vec<Check> = parts.into_iter().map(|(c, _)| c).collect();
        Self {
            model,
            achievable: checks.iter().all(|c| c.pass),
            checks,
            witness,
        }
    }

    /// One `key=value` line for machine consumption.
    pub fn record(&self) -> String {
        let checks = self
            .checks
            .iter()
            .map(|c| format!("{}:{}/{}", c.name, c.actual, c.required))
            .join(",");
        format!(
            "model={} f={} t={} achievable={} checks={}",
            self.model.kind, self.model.f, self.model.t, self.achievable, checks
        )
    }
}

impl fmt::Display for FeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "model {} with f={} t={}: {}",
            self.model.kind,
            self.model.f,
            self.model.t,
            if self.achievable { "achievable" } else { "not achievable" }
        )?;
        for c in &self.checks {
            writeln!(
                f,
                "  [{}] {}: need {}, have {}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.required,
                c.actual
            )?;
        }
        if let Some(w) = &self.witness {
            writeln!(f, "  witness: {w}")?;
        }
        Ok(())
    }
}

fn guard(g: &Graph, f: usize) -> Result<(), FeasibilityError> {
    if f >= g.n() {
        return Err(FeasibilityError::TooManyFaults { f, n: g.n() });
    }
    Ok(())
}

fn degree_check(g: &Graph, required: usize) -> (Check, Option<Witness>) {
    let actual = min_degree(g);
    let witness = (0..g.n()).find(|&u| g.degree(u) < required).map(|node| Witness::LowDegree {
        node,
        degree: g.degree(node),
    });
    (
        Check {
            name: "min-degree",
            required,
            actual,
            pass: actual >= required,
        },
        witness,
    )
}

fn connectivity_check(g: &Graph, required: usize) -> (Check, Option<Witness>) {
    let actual = vertex_connectivity(g);
    let pass = actual >= required;
    let witness = if pass {
        None
    } else {
        Some(match min_vertex_cut(g) {
            Some(cut) => Witness::Cut(cut),
            None => Witness::TooFewNodes { n: g.n() },
        })
    };
    (
        Check {
            name: "connectivity",
            required,
            actual,
            pass,
        },
        witness,
    )
}

/// Smallest neighborhood over nonempty sets of size at most `t`, with the
/// first set attaining a value below `required` in (size, lexicographic) order.
fn neighborhood_check(g: &Graph, t: usize, required: usize) -> (Check, Option<Witness>) {
    let mut actual = usize::MAX;
    let mut witness = None;
    for size in 1..=t.min(g.n()) {
        for combo in (0..g.n()).combinations(size) {
            let set: NodeSet = combo.into_iter().collect();
            let neighbors = neighbors_of_set(g, &set).expect("ids in range").len();
            actual = actual.min(neighbors);
            if neighbors < required && witness.is_none() {
                witness = Some(Witness::SmallNeighborhood { set, neighbors });
            }
        }
    }
    (
        Check {
            name: "set-neighbors",
            required,
            actual,
            pass: actual >= required,
        },
        witness,
    )
}

pub fn check_local_broadcast(g: &Graph, f: usize) -> Result<FeasibilityReport, FeasibilityError> {
    guard(g, f)?;
    let fm = FaultModel::local_broadcast(f);
    Ok(FeasibilityReport::assemble(
        fm,
        vec![
            degree_check(g, 2 * f),
            connectivity_check(g, required_connectivity(&fm)),
        ],
    ))
}

pub fn check_hybrid(g: &Graph, f: usize, t: usize) -> Result<FeasibilityReport, FeasibilityError> {
    let fm = FaultModel::hybrid(f, t)?;
    guard(g, f)?;
    let local = if t == 0 {
        degree_check(g, 2 * f)
    } else {
        neighborhood_check(g, t, 2 * f + 1)
    };
    Ok(FeasibilityReport::assemble(
        fm,
        vec![local, connectivity_check(g, required_connectivity(&fm))],
    ))
}

pub fn check_point_to_point(g: &Graph, f: usize) -> Result<FeasibilityReport, FeasibilityError> {
    guard(g, f)?;
    let fm = FaultModel::point_to_point(f);
    let size = Check {
        name: "node-count",
        required: 3 * f + 1,
        actual: g.n(),
        pass: g.n() > 3 * f,
    };
    Ok(FeasibilityReport::assemble(
        fm,
        vec![
            (size, Some(Witness::TooFewNodes { n: g.n() })),
            connectivity_check(g, required_connectivity(&fm)),
        ],
    ))
}

/// Dispatches on the model kind.
pub fn check(g: &Graph, fm: &FaultModel) -> Result<FeasibilityReport, FeasibilityError> {
    match fm.kind {
        ModelKind::LocalBroadcast => check_local_broadcast(g, fm.f),
        ModelKind::Hybrid => check_hybrid(g, fm.f, fm.t),
        ModelKind::PointToPoint => check_point_to_point(g, fm.f),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1b() -> Graph {
        Graph::complete_bipartite(4, 4).unwrap()
    }

    #[test]
    fn required_connectivity_values() {
        assert_eq!(required_connectivity(&FaultModel::local_broadcast(1)), 2);
        assert_eq!(required_connectivity(&FaultModel::local_broadcast(2)), 4);
        assert_eq!(required_connectivity(&FaultModel::hybrid(3, 3).unwrap()), 7);
        assert_eq!(required_connectivity(&FaultModel::hybrid(2, 0).unwrap()), 4);
        assert_eq!(required_connectivity(&FaultModel::point_to_point(2)), 5);
    }

    #[test]
    fn local_broadcast_examples() {
        let c5 = Graph::cycle(5).unwrap();
        assert!(check_local_broadcast(&c5, 1).unwrap().achievable);
        assert!(check_local_broadcast(&fig1b(), 2).unwrap().achievable);
        let r = check_local_broadcast(&c5, 2).unwrap();
        assert!(!r.achievable);
        assert!(!r.checks[0].pass);
        assert_eq!(r.witness, Some(Witness::LowDegree { node: 0, degree: 2 }));
        assert!(matches!(
            check_local_broadcast(&c5, 5),
            Err(FeasibilityError::TooManyFaults { .. })
        ));
    }

    #[test]
    fn hybrid_examples() {
        let k7 = Graph::complete(7).unwrap();
        let r = check_hybrid(&k7, 3, 3).unwrap();
        assert!(!r.achievable);
        assert!(!r.checks[1].pass);
        assert_eq!(
            r.witness,
            Some(Witness::SmallNeighborhood {
                set: [0].into(),
                neighbors: 6
            })
        );
        assert!(check_hybrid(&Graph::complete(10).unwrap(), 3, 3).unwrap().achievable);
        assert!(check_hybrid(&k7, 2, 1).unwrap().achievable);
        let c5 = Graph::cycle(5).unwrap();
        assert_eq!(
            check_hybrid(&c5, 1, 0).unwrap().achievable,
            check_local_broadcast(&c5, 1).unwrap().achievable
        );
        let r = check_hybrid(&c5, 1, 1).unwrap();
        assert_eq!(
            r.witness,
            Some(Witness::SmallNeighborhood {
                set: [0].into(),
                neighbors: 2
            })
        );
        assert!(check_hybrid(&c5, 1, 2).is_err());
    }

    #[test]
    fn point_to_point_examples() {
        assert!(check_point_to_point(&Graph::complete(4).unwrap(), 1).unwrap().achievable);
        let r = check_point_to_point(&Graph::cycle(5).unwrap(), 1).unwrap();
        assert!(!r.achievable);
        assert!(matches!(r.witness, Some(Witness::Cut(ref c)) if c.len() == 2));
        assert!(check_point_to_point(&Graph::complete(7).unwrap(), 2).unwrap().achievable);
        let r = check_point_to_point(&Graph::complete(6).unwrap(), 2).unwrap();
        assert_eq!(r.witness, Some(Witness::TooFewNodes { n: 6 }));
    }

    #[test]
    fn record_line() {
        let r = check_local_broadcast(&Graph::cycle(5).unwrap(), 1).unwrap();
        assert_eq!(
            r.record(),
            "model=lb f=1 t=0 achievable=true checks=min-degree:2/2,connectivity:2/2"
        );
    }
}
