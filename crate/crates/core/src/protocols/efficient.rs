//! Three-phase protocol for graphs with vertex connectivity at least `2f`.
//!
//! Rounds `0..n` flood inputs, rounds `n..2n` flood what each node heard,
//! and at round `2n` every node identifies faulty nodes from the reports.
//! Nodes that identify exactly `f` faults (type A) wait for a decision
//! flooded by the others (type B) and decide at round `3n`.

use std::fmt;
use std::sync::Arc;

use rustc_hash::FxHashMap;

use crate::graph::{disjoint_uv_paths, Graph, NodeId, NodeSet};
use crate::message::{Payload, ReportBundle, ReportItem, Route, MAX_ROUTE_NODE};
use crate::netsim::{Delivery, ExecutionTrace, NodeError, NodeProtocol, StepOutput};
use crate::packing::pick_disjoint;

use super::flood::{bit_of, FloodLedger};
use super::reliable::disjoint_value;
use super::{majority, run_nodes, set_of, validate_inputs, FaultyNodes, ProtocolError, RunError, RunOptions};

/// When a node on a cached path counts as misbehaving.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum IdentificationRule {
    /// Only a reliably observed flipped value marks a node.
    TamperOnly,
    /// Any reliably observed departure from the expected single forward,
    /// including silence or a late send, marks a node.
    #[default]
    TamperOrOmission,
}

impl fmt::Display for IdentificationRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdentificationRule::TamperOnly => "tamper",
            IdentificationRule::TamperOrOmission => "tamper-or-omission",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeType {
    A,
    B,
}

#[derive(Debug)]
pub struct EfficientContext {
    graph: Graph,
    adjacency: Vec<u64>,
    f: usize,
    rule: IdentificationRule,
    /// `[w][u]`: `2f` internally disjoint routes from `w` to `u`, both ends
    /// included.
    paths: Vec<Vec<Vec<Route>>>,
    empty: Arc<ReportBundle>,
}

impl EfficientContext {
    pub fn new(graph: &Graph, f: usize, rule: IdentificationRule) -> Result<Arc<Self>, ProtocolError> {
        let n = graph.n();
        if n > MAX_ROUTE_NODE + 1 {
            return Err(ProtocolError::TooManyNodes { n });
        }
        if f >= n {
            return Err(ProtocolError::TooManyFaults { f, n });
        }
        let mut paths = vec![vec![Vec::new(); n]; n];
        if f > 0 {
            for w in 0..n {
                for u in 0..n {
                    if u == w {
                        continue;
                    }
                    let family = disjoint_uv_paths(graph, w, u, 2 * f)
                        .expect("ids in range")
                        .ok_or(ProtocolError::InsufficientConnectivity { a: w, b: u, needed: 2 * f })?;
                    paths[w][u] = family
                        .paths()
                        .iter()
                        .map(|p| Route::from_nodes(p.nodes()).expect("small graph"))
                        .collect();
                }
            }
        }
        Ok(Arc::new(Self {
            graph: graph.clone(),
            adjacency: graph.adjacency_masks(),
            f,
            rule,
            paths,
            empty: Arc::new(ReportBundle::new(Vec::new())),
        }))
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn f(&self) -> usize {
        self.f
    }

    pub fn rule(&self) -> IdentificationRule {
        self.rule
    }

    /// The cached disjoint `w`-to-`u` paths as node sequences.
    pub fn paths(&self, w: NodeId, u: NodeId) -> Vec<Vec<NodeId>> {
        self.paths[w][u].iter().map(Route::to_vec).collect()
    }

    /// Last round at which a node may decide.
    pub fn decision_round(&self) -> usize {
        3 * self.n()
    }

    pub fn default_budget(&self) -> usize {
        4 * self.n()
    }

    pub fn node(self: &Arc<Self>, me: NodeId, input: u8) -> EfficientNode {
        EfficientNode {
            ctx: Arc::clone(self),
            me,
            input,
            inputs: FloodLedger::new(me),
            heard: Vec::new(),
            sent: Vec::new(),
            receipts: Vec::new(),
            own_report: None,
            sent_log: None,
            reports: FloodLedger::new(me),
            decisions: FloodLedger::new(me),
            identified: 0,
            node_type: None,
        }
    }
}

pub struct EfficientNode {
    ctx: Arc<EfficientContext>,
    me: NodeId,
    input: u8,
    inputs: FloodLedger<u8>,
    heard: Vec<ReportItem>,
    sent: Vec<ReportItem>,
    receipts: Vec<Option<u8>>,
    own_report: Option<Arc<ReportBundle>>,
    sent_log: Option<ReportBundle>,
    reports: FloodLedger<Arc<ReportBundle>>,
    decisions: FloodLedger<u8>,
    identified: u64,
    node_type: Option<NodeType>,
}

impl EfficientNode {
    pub fn id(&self) -> NodeId {
        self.me
    }

    /// Value reliably received from each node during input flooding.
    pub fn receipts(&self) -> &[Option<u8>] {
        &self.receipts
    }

    pub fn identified(&self) -> NodeSet {
        set_of(self.identified)
    }

    pub fn node_type(&self) -> Option<NodeType> {
        self.node_type
    }

    /// Accepted input-flood `(route, value)` pairs.
    pub fn input_ledger(&self) -> &[(Route, u8)] {
        self.inputs.entries()
    }

    /// Accepted decision-flood `(route, value)` pairs.
    pub fn decision_ledger(&self) -> &[(Route, u8)] {
        self.decisions.entries()
    }

    fn hear(&mut self, round: usize, inbox: &[Delivery<'_>]) {
        for d in inbox {
            if let Some((value, route)) = bit_of(d.payload) {
                self.heard.push(ReportItem {
                    origin: d.sender,
                    round: round - 1,
                    value,
                    route,
                });
            }
        }
    }

    fn log_sent(&mut self, round: usize, out: &[Payload]) {
        for p in out {
            if let Some((value, route)) = bit_of(p) {
                self.sent.push(ReportItem {
                    origin: self.me,
                    round,
                    value,
                    route,
                });
            }
        }
    }

    fn compute_receipts(&mut self) {
        let ctx = &self.ctx;
        let entries = self.inputs.entries();
        self.receipts = (0..ctx.n())
            .map(|u| {
                if u == self.me {
                    Some(self.input)
                } else if ctx.adjacency[self.me] >> u & 1 == 1 {
                    self.inputs.get(Route::from_nodes(&[u]).expect("small graph")).copied()
                } else {
                    disjoint_value(u, entries, ctx.f).map(|(v, _)| v)
                }
            })
            .collect();
    }

    fn identify(&self) -> u64 {
        let ctx = &self.ctx;
        let mut oracle = ViewOracle::new(self);
        let mut marked = 0u64;
        for (w, receipt) in self.receipts.iter().enumerate() {
            let Some(b) = *receipt else { continue };
            for u in 0..ctx.n() {
                if u == w {
                    continue;
                }
                for path in &ctx.paths[w][u] {
                    for i in 0..path.len() {
                        let z = path.get(i);
                        let prefix = path.prefix(i);
                        let deviates = match ctx.rule {
                            IdentificationRule::TamperOrOmission => {
                                matches!(oracle.view(z, prefix), Some(view) if view[..] != [(i, b)])
                            }
                            IdentificationRule::TamperOnly => oracle.reports_sending(z, 1 - b, prefix),
                        };
                        if deviates {
                            marked |= 1 << z;
                            break;
                        }
                    }
                }
            }
        }
        marked
    }

    /// The decision of a type A node.
    fn adopt(&self) -> u8 {
        let faulty = self.identified;
        let flooded = self
            .decisions
            .entries()
            .iter()
            .filter(|(route, _)| route.mask() & faulty == 0)
            .min_by_key(|(route, _)| *route);
        if let Some(&(_, value)) = flooded {
            return value;
        }
        let values = (0..self.ctx.n()).filter(|u| faulty >> u & 1 == 0).filter_map(|u| {
            if u == self.me {
                return Some(self.input);
            }
            self.inputs
                .entries()
                .iter()
                .filter(|(route, _)| route.first() == Some(u) && route.mask() & faulty == 0)
                .min_by_key(|(route, _)| *route)
                .map(|&(_, v)| v)
        });
        majority(values)
    }
}

fn reports_of(p: &Payload) -> Option<(Arc<ReportBundle>, Route)> {
    match p {
        Payload::Reports { bundle, route } => Some((Arc::clone(bundle), *route)),
        _ => None,
    }
}

fn decision_of(p: &Payload) -> Option<(u8, Route)> {
    match p {
        Payload::Decision { value, route } => Some((*value, *route)),
        _ => None,
    }
}

impl NodeProtocol for EfficientNode {
    fn step(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
        let ctx = Arc::clone(&self.ctx);
        let n = ctx.n();
        let adjacency = &ctx.adjacency;
        let mut out = StepOutput::default();
        if round == 0 {
            out.broadcasts.push(Payload::bit(self.input, Route::EMPTY));
            self.log_sent(0, &out.broadcasts);
        } else if round < n {
            self.hear(round, inbox);
            out.broadcasts = self.inputs.receive(adjacency, inbox, true, bit_of);
            if round == 1 {
                for route in self.inputs.substitute_defaults(adjacency, 1) {
                    out.broadcasts.push(Payload::bit(1, route));
                }
            }
            self.log_sent(round, &out.broadcasts);
        } else if round == n {
            self.hear(round, inbox);
            self.inputs.receive(adjacency, inbox, false, bit_of);
            self.compute_receipts();
            let report = Arc::new(ReportBundle::new(std::mem::take(&mut self.heard)));
            self.sent_log = Some(ReportBundle::new(std::mem::take(&mut self.sent)));
            self.own_report = Some(Arc::clone(&report));
            out.broadcasts.push(Payload::Reports {
                bundle: report,
                route: Route::EMPTY,
            });
        } else if round < 2 * n {
            out.broadcasts = self.reports.receive(adjacency, inbox, true, reports_of);
            if round == n + 1 {
                for route in self.reports.substitute_defaults(adjacency, Arc::clone(&ctx.empty)) {
                    out.broadcasts.push(Payload::Reports {
                        bundle: Arc::clone(&ctx.empty),
                        route,
                    });
                }
            }
        } else if round == 2 * n {
            self.reports.receive(adjacency, inbox, false, reports_of);
            self.identified = self.identify();
            if self.identified.count_ones() as usize == ctx.f {
                self.node_type = Some(NodeType::A);
            } else {
                self.node_type = Some(NodeType::B);
                let value = majority(self.receipts.iter().flatten().copied());
                out.decision = Some(value);
                out.broadcasts.push(Payload::Decision {
                    value,
                    route: Route::EMPTY,
                });
            }
        } else if round < 3 * n {
            out.broadcasts = self.decisions.receive(adjacency, inbox, true, decision_of);
        } else if round == 3 * n {
            self.decisions.receive(adjacency, inbox, false, decision_of);
            if self.node_type == Some(NodeType::A) {
                out.decision = Some(self.adopt());
            }
        }
        Ok(out)
    }
}

/// Reliable knowledge of what other nodes transmitted during input
/// flooding, reconstructed from a node's own logs and the flooded reports.
struct ViewOracle<'a> {
    node: &'a EfficientNode,
    /// Per reporter: each distinct bundle it was seen reporting, with the
    /// node masks of the routes that carried it.
    versions: Vec<Vec<(Arc<ReportBundle>, Vec<u64>)>>,
    /// Inclusion-minimal route masks avoiding a node, per
    /// `(reporter, version, avoided node)`.
    minimal: FxHashMap<(NodeId, usize, NodeId), Vec<u64>>,
    views: FxHashMap<(NodeId, Route), Option<Vec<(usize, u8)>>>,
}

impl<'a> ViewOracle<'a> {
    fn new(node: &'a EfficientNode) -> Self {
        let mut versions: Vec<Vec<(Arc<ReportBundle>, Vec<u64>)>> = vec![Vec::new(); node.ctx.n()];
        for (route, bundle) in node.reports.entries() {
            let y = route.first().expect("ledger routes are nonempty");
            let list = &mut versions[y];
            let pos = match list
                .iter()
                .position(|(b, _)| Arc::ptr_eq(b, bundle) || (b.digest() == bundle.digest() && **b == **bundle))
            {
                Some(p) => p,
                None => {
                    list.push((Arc::clone(bundle), Vec::new()));
                    list.len() - 1
                }
            };
            list[pos].1.push(route.mask());
        }
        Self {
            node,
            versions,
            minimal: FxHashMap::default(),
            views: FxHashMap::default(),
        }
    }

    fn minimal_masks(&mut self, y: NodeId, version: usize, avoid: NodeId) -> &[u64] {
        let versions = &self.versions;
        self.minimal.entry((y, version, avoid)).or_insert_with(|| {
            let mut masks: Vec<u64> = versions[y][version]
                .1
                .iter()
                .copied()
                .filter(|m| m >> avoid & 1 == 0)
                .collect();
            masks.sort_by_key(|m| (m.count_ones(), *m));
            masks.dedup();
            let mut keep: Vec<u64> = Vec::new();
            for m in masks {
                if !keep.iter().any(|&k| (k & m) == k) {
                    keep.push(m);
                }
            }
            keep
        })
    }

    /// Every `(round, value)` that `z` sent with `route`, when it can be
    /// established reliably.
    fn view(&mut self, z: NodeId, route: Route) -> Option<Vec<(usize, u8)>> {
        if let Some(v) = self.views.get(&(z, route)) {
            return v.clone();
        }
        let node = self.node;
        let found = if z == node.me {
            Some(node.sent_log.as_ref().expect("logs are sealed").view(z, route).to_vec())
        } else if node.ctx.adjacency[node.me] >> z & 1 == 1 {
            Some(node.own_report.as_ref().expect("logs are sealed").view(z, route).to_vec())
        } else {
            let mut groups: Vec<(Vec<(usize, u8)>, Vec<u64>)> = Vec::new();
            for &y in node.ctx.graph.neighbors(z) {
                for version in 0..self.versions[y].len() {
                    let seen = self.versions[y][version].0.view(z, route).to_vec();
                    let masks = self.minimal_masks(y, version, z).to_vec();
                    match groups.iter_mut().find(|(v, _)| *v == seen) {
                        Some((_, all)) => all.extend(masks),
                        None => groups.push((seen, masks)),
                    }
                }
            }
            groups.sort();
            groups
                .into_iter()
                .find(|(_, masks)| pick_disjoint(masks, node.ctx.f + 1).is_some())
                .map(|(v, _)| v)
        };
        self.views.insert((z, route), found.clone());
        found
    }

    /// Whether `z` reliably sent `value` with `route` in some round.
    fn reports_sending(&mut self, z: NodeId, value: u8, route: Route) -> bool {
        let node = self.node;
        if z == node.me {
            return node.sent_log.as_ref().expect("logs are sealed").contains(z, value, route);
        }
        if node.ctx.adjacency[node.me] >> z & 1 == 1 {
            return node.own_report.as_ref().expect("logs are sealed").contains(z, value, route);
        }
        let mut masks = Vec::new();
        for &y in node.ctx.graph.neighbors(z) {
            for version in 0..self.versions[y].len() {
                if self.versions[y][version].0.contains(z, value, route) {
                    masks.extend_from_slice(self.minimal_masks(y, version, z));
                }
            }
        }
        pick_disjoint(&masks, node.ctx.f + 1).is_some()
    }
}

pub struct EfficientRun {
    pub trace: ExecutionTrace,
    /// Final state of each non-faulty node; `None` for faulty ones.
    pub nodes: Vec<Option<EfficientNode>>,
}

pub fn run_efficient(
    ctx: &Arc<EfficientContext>,
    inputs: &[u8],
    faulty: FaultyNodes,
    opts: RunOptions,
) -> Result<EfficientRun, RunError> {
    validate_inputs(ctx.n(), inputs)?;
    let budget = opts.max_rounds.unwrap_or_else(|| ctx.default_budget());
    let (trace, nodes) = run_nodes(&ctx.graph, |x| ctx.node(x, inputs[x]), faulty, budget, opts.metadata)?;
    Ok(EfficientRun { trace, nodes })
}
