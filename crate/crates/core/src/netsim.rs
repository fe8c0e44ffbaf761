//! Deterministic synchronous round engine with local-broadcast delivery.
//!
//! A step at round `r` sees what its neighbors transmitted at round `r - 1`
//! (nothing at round 0), may decide, and emits its round-`r` transmissions.
//! Inboxes are ordered by sender id, keeping each sender's own order.

use std::collections::BTreeMap;
use std::error::Error as StdError;
use std::fmt::{self, Write as _};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rustc_hash::FxHasher;
use thiserror::Error;

use crate::graph::{Graph, NodeId, NodeSet};
use crate::message::Payload;

pub type NodeError = Box<dyn StdError + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Audience {
    Broadcast,
    Targeted(usize),
}

impl fmt::Display for Audience {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Audience::Broadcast => f.write_str("*"),
            Audience::Targeted(x) => write!(f, "@{x}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transmission {
    pub round: usize,
    pub sender: usize,
    pub audience: Audience,
    pub payload: Payload,
    pub receivers: Arc<[usize]>,
}

/// A payload as seen by its receiver.
#[derive(Clone, Copy, Debug)]
pub struct Delivery<'a> {
    pub sender: NodeId,
    pub payload: &'a Payload,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StepOutput {
    pub broadcasts: Vec<Payload>,
    pub decision: Option<u8>,
}

/// Per-node state machine run by non-faulty nodes.
pub trait NodeProtocol {
    fn step(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Result<StepOutput, NodeError>;
}

impl<P: NodeProtocol + ?Sized> NodeProtocol for Box<P> {
    fn step(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
        (**self).step(round, inbox)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outgoing {
    pub audience: Audience,
    pub payload: Payload,
}

impl Outgoing {
    pub fn broadcast(payload: Payload) -> Self {
        Self {
            audience: Audience::Broadcast,
            payload,
        }
    }
}

/// Policy of a faulty node.
pub trait Behavior {
    fn act(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Vec<Outgoing>;
}

pub enum Participant<P> {
    Honest(P),
    Faulty {
        behavior: Box<dyn Behavior + Send>,
        equivocating: bool,
    },
}

impl<P> Participant<P> {
    pub fn is_honest(&self) -> bool {
        matches!(self, Participant::Honest(_))
    }

    pub fn honest(&self) -> Option<&P> {
        match self {
            Participant::Honest(p) => Some(p),
            Participant::Faulty { .. } => None,
        }
    }
}

/// Who hears whom. A plain graph gives symmetric neighbor lists; split
/// networks may have one-way listeners and several copies of one identity.
#[derive(Clone, Debug)]
pub struct Network {
    identities: Vec<NodeId>,
    labels: Vec<String>,
    listeners: Vec<Arc<[usize]>>,
}

impl Network {
    pub fn from_graph(g: &Graph) -> Self {
        Self {
            identities: (0..g.n()).collect(),
            labels: (0..g.n()).map(|i| i.to_string()).collect(),
            listeners: (0..g.n()).map(|u| Arc::from(g.neighbors(u))).collect(),
        }
    }

    /// `listeners[x]` lists the nodes that receive `x`'s broadcasts.
    pub fn custom(
        identities: Vec<NodeId>,
        labels: Vec<String>,
        listeners: Vec<Vec<usize>>,
    ) -> Self {
        assert_eq!(identities.len(), labels.len());
        assert_eq!(identities.len(), listeners.len());
        Self {
            identities,
            labels,
            listeners: listeners
                .into_iter()
                .map(|mut l| {
                    l.sort_unstable();
                    l.dedup();
                    Arc::from(l)
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.identities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.identities.is_empty()
    }

    pub fn identity(&self, x: usize) -> NodeId {
        self.identities[x]
    }

    pub fn label(&self, x: usize) -> &str {
        &self.labels[x]
    }

    pub fn listeners(&self, x: usize) -> &[usize] {
        &self.listeners[x]
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("participant count {got} does not match network size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("round {round}: node {node} sent a targeted message without equivocation rights")]
    NotEquivocating { node: usize, round: usize },
    #[error("round {round}: node {node} targeted {target}, which does not hear it")]
    BadTarget { node: usize, round: usize, target: usize },
    #[error("round {round}: node {node} decided twice")]
    DoubleDecision { node: usize, round: usize },
    #[error("round {round}: node {node} failed: {source}")]
    Node {
        node: usize,
        round: usize,
        source: NodeError,
        trace: Box<ExecutionTrace>,
    },
    #[error("round budget must be positive")]
    ZeroBudget,
}

impl SimError {
    /// The trace up to the failing round, when the failure came from a node.
    pub fn partial_trace(&self) -> Option<&ExecutionTrace> {
        match self {
            SimError::Node { trace, .. } => Some(trace),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decision {
    pub value: u8,
    pub round: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub labels: Vec<String>,
    pub metadata: Vec<(String, String)>,
    pub faulty: NodeSet,
    pub equivocating: NodeSet,
    pub transmissions: Vec<Transmission>,
    pub decisions: BTreeMap<usize, Decision>,
    /// Last round executed.
    pub rounds: usize,
    /// Whether every non-faulty node decided within the budget.
    pub terminated: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TraceError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("node {node} is not in the trace")]
    NodeOutOfRange { node: usize },
    #[error("round {round} is past the last round {last}")]
    RoundOutOfRange { round: usize, last: usize },
}

impl ExecutionTrace {
    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Inbox of `node` at `round`, in delivery order.
    pub fn deliveries_of(&self, node: usize, round: usize) -> Result<Vec<(usize, &Payload)>, TraceError> {
        if node >= self.node_count() {
            return Err(TraceError::NodeOutOfRange { node });
        }
        if round > self.rounds {
            return Err(TraceError::RoundOutOfRange {
                round,
                last: self.rounds,
            });
        }
        if round == 0 {
            return Ok(Vec::new());
        }
        Ok(self
            .round_range(round - 1)
            .iter()
            .filter(|t| t.receivers.contains(&node))
            .map(|t| (t.sender, &t.payload))
            .collect())
    }

    /// Transmissions sent at `round`.
    pub fn round_range(&self, round: usize) -> &[Transmission] {
        let lo = self.transmissions.partition_point(|t| t.round < round);
        let hi = self.transmissions.partition_point(|t| t.round <= round);
        &self.transmissions[lo..hi]
    }

    /// Structural hash over everything the text form records.
    pub fn digest(&self) -> String {
        let mut h = FxHasher::default();
        self.labels.hash(&mut h);
        self.metadata.hash(&mut h);
        self.faulty.hash(&mut h);
        self.equivocating.hash(&mut h);
        for t in &self.transmissions {
            (t.round, t.sender, t.audience, t.payload.digest(), &t.receivers[..]).hash(&mut h);
        }
        for (node, d) in &self.decisions {
            (node, d.value, d.round).hash(&mut h);
        }
        (self.rounds, self.terminated).hash(&mut h);
        format!("{:016x}", h.finish())
    }

    /// Line-oriented text form; [`ExecutionTrace::parse`] inverts it.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, l) in self.labels.iter().enumerate() {
            let _ = writeln!(out, "# node {i} {l}");
        }
        for (k, v) in &self.metadata {
            let _ = writeln!(out, "# meta {k} {v}");
        }
        let ids = |s: &NodeSet| s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "# faulty {}", ids(&self.faulty));
        let _ = writeln!(out, "# equivocating {}", ids(&self.equivocating));
        let _ = writeln!(out, "# rounds {}", self.rounds);
        let _ = writeln!(out, "# terminated {}", self.terminated);
        for t in &self.transmissions {
            let _ = write!(
                out,
                "{} {} {} {}",
                t.round,
                t.sender,
                t.audience,
                hex::encode(t.payload.encode())
            );
            for r in t.receivers.iter() {
                let _ = write!(out, " {r}");
            }
            out.push('\n');
        }
        for (node, d) in &self.decisions {
            let _ = writeln!(out, "DECIDE {node} {} {}", d.value, d.round);
        }
        out
    }

    /// Just the decision block.
    pub fn decide_block(&self) -> String {
        self.decisions
            .iter()
            .map(|(n, d)| format!("DECIDE {n} {} {}\n", d.value, d.round))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, TraceError> {
        let mut trace = ExecutionTrace {
            labels: Vec::new(),
            metadata: Vec::new(),
            faulty: NodeSet::new(),
            equivocating: NodeSet::new(),
            transmissions: Vec::new(),
            decisions: BTreeMap::new(),
            rounds: 0,
            terminated: false,
        };
        for (idx, line) in text.lines().enumerate() {
            let err = |reason: &str| TraceError::Parse {
                line: idx + 1,
                reason: reason.to_string(),
            };
            let num = |s: &str| s.parse::<usize>().map_err(|_| err("bad number"));
            let ids = |s: Option<&str>| -> Result<NodeSet, TraceError> {
                s.unwrap_or("")
                    .split(',')
                    .filter(|x| !x.is_empty())
                    .map(num)
                    .collect()
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("# ") {
                let (key, value) = rest.split_once(' ').unwrap_or((rest, ""));
                match key {
                    "node" => {
                        let (i, label) = value.split_once(' ').ok_or_else(|| err("bad node line"))?;
                        if num(i)? != trace.labels.len() {
                            return Err(err("node lines out of order"));
                        }
                        trace.labels.push(label.to_string());
                    }
                    "meta" => {
                        let (k, v) = value.split_once(' ').unwrap_or((value, ""));
                        trace.metadata.push((k.to_string(), v.to_string()));
                    }
                    "faulty" => trace.faulty = ids(Some(value))?,
                    "equivocating" => trace.equivocating = ids(Some(value))?,
                    "rounds" => trace.rounds = num(value)?,
                    "terminated" => {
                        trace.terminated = value.parse().map_err(|_| err("bad flag"))?
                    }
                    _ => return Err(err("unknown header")),
                }
                continue;
            }
            let fields: Vec<&str> = line.split(' ').collect();
            if fields[0] == "DECIDE" {
                if fields.len() != 4 {
                    return Err(err("bad DECIDE line"));
                }
                let value = match fields[2] {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(err("bad decision bit")),
                };
                trace.decisions.insert(
                    num(fields[1])?,
                    Decision {
                        value,
                        round: num(fields[3])?,
                    },
                );
                continue;
            }
            if fields.len() < 4 {
                return Err(err("short transmission line"));
            }
            let audience = match fields[2] {
                "*" => Audience::Broadcast,
                a => Audience::Targeted(num(a.strip_prefix('@').ok_or_else(|| err("bad audience"))?)?),
            };
            let bytes = hex::decode(fields[3]).map_err(|_| err("bad payload hex"))?;
            let receivers: Vec<usize> = fields[4..].iter().map(|s| num(s)).collect::<Result<_, _>>()?;
            trace.transmissions.push(Transmission {
                round: num(fields[0])?,
                sender: num(fields[1])?,
                audience,
                payload: Payload::from_bytes(&bytes),
                receivers: receivers.into(),
            });
        }
        Ok(trace)
    }
}

/// Runs until every honest participant has decided or `max_rounds` rounds
/// (numbered `0..max_rounds`) have executed.
pub fn run_synchronous<P: NodeProtocol>(
    net: &Network,
    participants: &mut [Participant<P>],
    max_rounds: usize,
    metadata: Vec<(String, String)>,
) -> Result<ExecutionTrace, SimError> {
    let n = net.len();
    if participants.len() != n {
        return Err(SimError::SizeMismatch {
            expected: n,
            got: participants.len(),
        });
    }
    if max_rounds == 0 {
        return Err(SimError::ZeroBudget);
    }
    let mut trace = ExecutionTrace {
        labels: net.labels.clone(),
        metadata,
        faulty: (0..n).filter(|&x| !participants[x].is_honest()).collect(),
        equivocating: (0..n)
            .filter(|&x| matches!(participants[x], Participant::Faulty { equivocating: true, .. }))
            .collect(),
        transmissions: Vec::new(),
        decisions: BTreeMap::new(),
        rounds: 0,
        terminated: false,
    };
    let honest_total = n - trace.faulty.len();
    let mut prev_start = 0;
    let mut inbox_idx: Vec<Vec<usize>> = vec![Vec::new(); n];
    for round in 0..max_rounds {
        trace.rounds = round;
        for l in inbox_idx.iter_mut() {
            l.clear();
        }
        let prev_end = trace.transmissions.len();
        for i in prev_start..prev_end {
            for &r in trace.transmissions[i].receivers.iter() {
                inbox_idx[r].push(i);
            }
        }
        let mut fresh: Vec<Transmission> = Vec::new();
        let mut step_inbox: Vec<Delivery<'_>> = Vec::new();
        for x in 0..n {
            step_inbox.clear();
            step_inbox.extend(inbox_idx[x].iter().map(|&i| {
                let t = &trace.transmissions[i];
                Delivery {
                    sender: net.identities[t.sender],
                    payload: &t.payload,
                }
            }));
            match &mut participants[x] {
                Participant::Honest(p) => {
                    let out = match p.step(round, &step_inbox) {
                        Ok(out) => out,
                        Err(source) => {
                            drop(step_inbox);
                            trace.transmissions.extend(fresh);
                            return Err(SimError::Node {
                                node: x,
                                round,
                                source,
                                trace: Box::new(trace),
                            });
                        }
                    };
                    if let Some(value) = out.decision {
                        if trace.decisions.contains_key(&x) {
                            return Err(SimError::DoubleDecision { node: x, round });
                        }
                        trace.decisions.insert(x, Decision { value, round });
                    }
                    for payload in out.broadcasts {
                        fresh.push(Transmission {
                            round,
                            sender: x,
                            audience: Audience::Broadcast,
                            payload,
                            receivers: net.listeners[x].clone(),
                        });
                    }
                }
                Participant::Faulty {
                    behavior,
                    equivocating,
                } => {
                    for out in behavior.act(round, &step_inbox) {
                        let receivers = match out.audience {
                            Audience::Broadcast => net.listeners[x].clone(),
                            Audience::Targeted(target) => {
                                if !*equivocating {
                                    return Err(SimError::NotEquivocating { node: x, round });
                                }
                                if !net.listeners[x].contains(&target) {
                                    return Err(SimError::BadTarget {
                                        node: x,
                                        round,
                                        target,
                                    });
                                }
                                Arc::from(vec![target])
                            }
                        };
                        fresh.push(Transmission {
                            round,
                            sender: x,
                            audience: out.audience,
                            payload: out.payload,
                            receivers,
                        });
                    }
                }
            }
        }
        drop(step_inbox);
        prev_start = prev_end;
        trace.transmissions.extend(fresh);
        if trace.decisions.len() == honest_total {
            trace.terminated = true;
            break;
        }
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::message::Route;

    struct Trivial(u8);

    impl NodeProtocol for Trivial {
        fn step(&mut self, _: usize, _: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
            Ok(StepOutput {
                broadcasts: vec![],
                decision: Some(self.0),
            })
        }
    }

    /// Broadcasts its input at round 0 and decides its left neighbor's value.
    struct Echo {
        me: NodeId,
        n: usize,
        input: u8,
    }

    impl NodeProtocol for Echo {
        fn step(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
            match round {
                0 => Ok(StepOutput {
                    broadcasts: vec![Payload::bit(self.input, Route::EMPTY)],
                    decision: None,
                }),
                _ => {
                    let left = (self.me + self.n - 1) % self.n;
                    let d = inbox.iter().find(|d| d.sender == left).ok_or("no message from left")?;
                    match d.payload {
                        Payload::Bit { value, .. } => Ok(StepOutput {
                            broadcasts: vec![],
                            decision: Some(*value),
                        }),
                        _ => Err("unexpected payload".into()),
                    }
                }
            }
        }
    }

    struct Targeter;

    impl Behavior for Targeter {
        fn act(&mut self, round: usize, _: &[Delivery<'_>]) -> Vec<Outgoing> {
            if round == 0 {
                vec![Outgoing {
                    audience: Audience::Targeted(3),
                    payload: Payload::bit(0, Route::EMPTY),
                }]
            } else {
                vec![]
            }
        }
    }

    fn c5() -> Network {
        Network::from_graph(&Graph::cycle(5).unwrap())
    }

    #[test]
    fn trivial_protocol_decides_at_round_zero() {
        let mut ps: Vec<_> = (0..5).map(|_| Participant::Honest(Trivial(0))).collect();
        let t = run_synchronous(&c5(), &mut ps, 10, vec![]).unwrap();
        assert_eq!(t.rounds, 0);
        assert!(t.terminated);
        assert!(t.decisions.values().all(|d| d.value == 0 && d.round == 0));
        assert!(t.deliveries_of(0, 0).unwrap().is_empty());
    }

    #[test]
    fn echo_reads_left_neighbor() {
        let inputs = [0u8, 1, 1, 0, 1];
        let mut ps: Vec<_> = (0..5)
            .map(|me| Participant::Honest(Echo { me, n: 5, input: inputs[me] }))
            .collect();
        let t = run_synchronous(&c5(), &mut ps, 10, vec![]).unwrap();
        for v in 0..5 {
            assert_eq!(t.decisions[&v].value, inputs[(v + 4) % 5]);
        }
        let senders: Vec<usize> = t.deliveries_of(0, 1).unwrap().iter().map(|d| d.0).collect();
        assert_eq!(senders, [1, 4]);
        for tr in &t.transmissions {
            assert_eq!(&tr.receivers[..], Graph::cycle(5).unwrap().neighbors(tr.sender));
        }
        assert!(t.deliveries_of(9, 0).is_err());
        assert!(t.deliveries_of(0, 5).is_err());
    }

    #[test]
    fn targeted_delivery_and_gating() {
        let build = |eq: bool| -> Vec<Participant<Trivial>> {
            (0..5)
                .map(|x| {
                    if x == 4 {
                        Participant::Faulty { behavior: Box::new(Targeter), equivocating: eq }
                    } else {
                        Participant::Honest(Trivial(1))
                    }
                })
                .collect()
        };
        let mut ps = build(false);
        assert!(matches!(
            run_synchronous(&c5(), &mut ps, 3, vec![]),
            Err(SimError::NotEquivocating { node: 4, round: 0 })
        ));
        // targets must be neighbors; rerun with a real inbox check
        let mut ps = build(true);
        let net = c5();
        let t = run_synchronous(&net, &mut ps, 3, vec![]).unwrap();
        assert_eq!(t.transmissions.len(), 1);
        assert_eq!(&t.transmissions[0].receivers[..], [3]);
        assert_eq!(t.equivocating, [4].into());
    }

    #[test]
    fn text_round_trip_preserves_digest() {
        let inputs = [0u8, 1, 1, 0, 1];
        let mut ps: Vec<_> = (0..5)
            .map(|me| Participant::Honest(Echo { me, n: 5, input: inputs[me] }))
            .collect();
        let meta = vec![("seed".to_string(), "7".to_string())];
        let t = run_synchronous(&c5(), &mut ps, 10, meta).unwrap();
        let back = ExecutionTrace::parse(&t.to_text()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.digest(), t.digest());
        assert_eq!(back.to_text(), t.to_text());
    }

    #[test]
    fn node_errors_carry_partial_trace() {
        struct Failing;
        impl NodeProtocol for Failing {
            fn step(&mut self, round: usize, _: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
                if round == 2 {
                    Err("boom".into())
                } else {
                    Ok(StepOutput { broadcasts: vec![Payload::bit(1, Route::EMPTY)], decision: None })
                }
            }
        }
        let mut ps: Vec<_> = (0..5).map(|_| Participant::Honest(Failing)).collect();
        let err = run_synchronous(&c5(), &mut ps, 10, vec![]).unwrap_err();
        let partial = err.partial_trace().unwrap();
        assert_eq!(partial.rounds, 2);
        assert_eq!(partial.transmissions.len(), 10);
    }
}
