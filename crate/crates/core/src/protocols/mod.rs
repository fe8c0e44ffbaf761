//! Consensus protocols as per-node state machines for [`crate::netsim`].
//!
//! - [`phased`]: the candidate-fault-set protocol, for local broadcast
//!   (`t = 0`) and the hybrid model.
//! - [`efficient`]: the three-phase protocol for `2f`-connected graphs.

pub mod efficient;
pub mod flood;
pub mod invariants;
pub mod phased;
pub mod reliable;

use std::collections::BTreeMap;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::graph::{Graph, NodeId, NodeSet};
use crate::message::MAX_ROUTE_NODE;
use crate::netsim::{run_synchronous, Behavior, ExecutionTrace, Network, NodeProtocol, Participant, SimError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("graph has {n} nodes; protocols support at most {max}", max = MAX_ROUTE_NODE + 1)]
    TooManyNodes { n: usize },
    #[error("expected {expected} input bits, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("input bits must be 0 or 1")]
    InputValue,
    #[error("fault bound f={f} must be below the node count {n}")]
    TooManyFaults { f: usize, n: usize },
    #[error("equivocation bound t={t} exceeds fault bound f={f}")]
    EquivocationExceedsFaults { t: usize, f: usize },
    #[error("phase {phase}: no path from {from} to {to} avoids the candidate sets")]
    NoExcludingPath { phase: usize, from: NodeId, to: NodeId },
    #[error("phase {phase}: node {node} found no {needed} disjoint source paths avoiding the candidate sets on a conforming graph")]
    MissingFamily { phase: usize, node: NodeId, needed: usize },
    #[error("fewer than {needed} disjoint paths between {a} and {b}")]
    InsufficientConnectivity { a: NodeId, b: NodeId, needed: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Candidate fault set `F` and candidate equivocator set `T` for one phase.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PhaseConfig {
    pub faulty: NodeSet,
    pub equivocators: NodeSet,
    /// `f - |T|`.
    pub phi: usize,
}

impl PhaseConfig {
    pub fn faulty_mask(&self) -> u64 {
        mask_of(&self.faulty)
    }

    pub fn equivocator_mask(&self) -> u64 {
        mask_of(&self.equivocators)
    }

    pub fn excluded(&self) -> NodeSet {
        self.faulty.union(&self.equivocators).copied().collect()
    }
}

impl fmt::Display for PhaseConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "F={{{}}} T={{{}}}",
            self.faulty.iter().join(","),
            self.equivocators.iter().join(",")
        )
    }
}

pub fn mask_of(set: &NodeSet) -> u64 {
    set.iter().fold(0, |m, &x| m | 1 << x)
}

pub fn set_of(mask: u64) -> NodeSet {
    (0..64).filter(|i| mask >> i & 1 == 1).collect()
}

/// All `(F, T)` with `|T| <= t`, `F` disjoint from `T`, `|F| <= f - |T|`,
/// ordered by `|T|`, then `|F|`, then lexicographically by `T` and `F`.
pub fn enumerate_phases(n: usize, f: usize, t: usize) -> Vec<PhaseConfig> {
    let mut out = Vec::new();
    for tsize in 0..=t.min(n) {
        let phi = f - tsize;
        for fsize in 0..=phi {
            for tset in (0..n).combinations(tsize) {
                let rest: Vec<NodeId> = (0..n).filter(|x| !tset.contains(x)).collect();
                for fset in rest.into_iter().combinations(fsize) {
                    out.push(PhaseConfig {
                        faulty: fset.into_iter().collect(),
                        equivocators: tset.iter().copied().collect(),
                        phi,
                    });
                }
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CaseChoice {
    pub case: u8,
    /// The set whose paths may update the state.
    pub sources: u64,
    /// The set whose members may update.
    pub updaters: u64,
}

/// The four-way choice of which estimated set drives the state update.
pub fn select_case(zero: u64, one: u64, candidate_faulty: u64, phi: usize, f: usize) -> CaseChoice {
    let few_zero_faulty = ((zero & candidate_faulty).count_ones() as usize) <= phi / 2;
    let (case, sources, updaters) = match few_zero_faulty {
        true if one.count_ones() as usize > f => (1, one, zero),
        true => (2, zero, one),
        false if zero.count_ones() as usize > f => (3, zero, one),
        false => (4, one, zero),
    };
    CaseChoice {
        case,
        sources,
        updaters,
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Setup(#[from] ProtocolError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl RunError {
    pub fn partial_trace(&self) -> Option<&ExecutionTrace> {
        match self {
            RunError::Sim(e) => e.partial_trace(),
            RunError::Setup(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Keep every node's per-phase ledger for invariant checks.
    pub keep_tables: bool,
    /// Overrides the protocol's default round budget.
    pub max_rounds: Option<usize>,
    /// Recorded in the trace header.
    pub metadata: Vec<(String, String)>,
}

/// A faulty participant handed to a protocol runner.
pub struct FaultyNode {
    pub behavior: Box<dyn Behavior + Send>,
    pub equivocating: bool,
}

pub type FaultyNodes = BTreeMap<NodeId, FaultyNode>;

pub(crate) fn validate_inputs(n: usize, inputs: &[u8]) -> Result<(), ProtocolError> {
    if inputs.len() != n {
        return Err(ProtocolError::InputCount {
            expected: n,
            got: inputs.len(),
        });
    }
    if inputs.iter().any(|&b| b > 1) {
        return Err(ProtocolError::InputValue);
    }
    Ok(())
}

/// A protocol instance for one graph: builds per-node state machines.
pub trait Protocol: Send + Sync {
    fn graph(&self) -> &Graph;
    fn node(&self, me: NodeId, input: u8) -> Box<dyn NodeProtocol + Send>;
    fn default_budget(&self) -> usize;
}

impl Protocol for std::sync::Arc<phased::PhasedContext> {
    fn graph(&self) -> &Graph {
        phased::PhasedContext::graph(self)
    }

    fn node(&self, me: NodeId, input: u8) -> Box<dyn NodeProtocol + Send> {
        Box::new(phased::PhasedContext::node(self, me, input, false))
    }

    fn default_budget(&self) -> usize {
        phased::PhasedContext::default_budget(self)
    }
}

impl Protocol for std::sync::Arc<efficient::EfficientContext> {
    fn graph(&self) -> &Graph {
        efficient::EfficientContext::graph(self)
    }

    fn node(&self, me: NodeId, input: u8) -> Box<dyn NodeProtocol + Send> {
        Box::new(efficient::EfficientContext::node(self, me, input))
    }

    fn default_budget(&self) -> usize {
        efficient::EfficientContext::default_budget(self)
    }
}

/// Places honest nodes from `make` and the given faulty nodes on `graph`,
/// runs them, and returns the trace with each honest node's final state.
pub(crate) fn run_nodes<P: NodeProtocol>(
    graph: &Graph,
    mut make: impl FnMut(NodeId) -> P,
    mut faulty: FaultyNodes,
    budget: usize,
    metadata: Vec<(String, String)>,
) -> Result<(ExecutionTrace, Vec<Option<P>>), RunError> {
    let mut participants: Vec<Participant<P>> = (0..graph.n())
        .map(|x| match faulty.remove(&x) {
            Some(node) => Participant::Faulty {
                behavior: node.behavior,
                equivocating: node.equivocating,
            },
            None => Participant::Honest(make(x)),
        })
        .collect();
    if let Some((&x, _)) = faulty.iter().next() {
        return Err(ProtocolError::Invalid(format!("faulty node {x} is out of range")).into());
    }
    let trace = run_synchronous(&Network::from_graph(graph), &mut participants, budget, metadata)?;
    let nodes = participants
        .into_iter()
        .map(|p| match p {
            Participant::Honest(node) => Some(node),
            Participant::Faulty { .. } => None,
        })
        .collect();
    Ok((trace, nodes))
}

/// Majority with ties going to 0.
pub fn majority(values: impl IntoIterator<Item = u8>) -> u8 {
    let (mut ones, mut zeros) = (0usize, 0usize);
    for v in values {
        if v == 1 {
            ones += 1;
        } else {
            zeros += 1;
        }
    }
    u8::from(ones > zeros)
}
