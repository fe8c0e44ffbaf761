//! Candidate-set protocol: one flooding phase per candidate `(F, T)`.
//!
//! With `t = 0` only `T = ∅` phases exist, which is the local-broadcast
//! protocol; the same code runs both.

use std::sync::Arc;

use crate::feasibility::check_hybrid;
use crate::graph::{disjoint_set_paths_excluding, path_excluding, Graph, NodeId};
use crate::message::{Payload, Route, MAX_ROUTE_NODE};
use crate::netsim::{Delivery, NodeError, NodeProtocol, StepOutput};
use crate::packing::pick_disjoint;

use super::flood::{bit_of, FloodLedger};
use super::{
    enumerate_phases, run_nodes, select_case, set_of, validate_inputs, FaultyNodes, PhaseConfig, ProtocolError,
    RunError, RunOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Estimate {
    Own,
    Along(Route),
    Skip,
    Missing,
}

/// Graph data shared by every node of every run with the same `(G, f, t)`.
#[derive(Debug)]
pub struct PhasedContext {
    graph: Graph,
    adjacency: Vec<u64>,
    f: usize,
    t: usize,
    phases: Vec<PhaseConfig>,
    /// `[phase][v][u]`: how `v` reads `u`'s value in that phase.
    estimates: Vec<Vec<Vec<Estimate>>>,
    conforming: bool,
}

impl PhasedContext {
    pub fn new(graph: &Graph, f: usize, t: usize) -> Result<Arc<Self>, ProtocolError> {
        let n = graph.n();
        if n > MAX_ROUTE_NODE + 1 {
            return Err(ProtocolError::TooManyNodes { n });
        }
        if t > f {
            return Err(ProtocolError::EquivocationExceedsFaults { t, f });
        }
        if f >= n {
            return Err(ProtocolError::TooManyFaults { f, n });
        }
        let phases = enumerate_phases(n, f, t);
        let estimates = phases
            .iter()
            .map(|cfg| {
                let excluded = cfg.excluded();
                (0..n)
                    .map(|v| {
                        (0..n)
                            .map(|u| {
                                if cfg.equivocators.contains(&u) {
                                    Estimate::Skip
                                } else if u == v {
                                    Estimate::Own
                                } else {
                                    match path_excluding(graph, u, v, &excluded).expect("ids in range") {
                                        Some(p) => {
                                            let nodes = p.nodes();
                                            Estimate::Along(
                                                Route::from_nodes(&nodes[..nodes.len() - 1])
                                                    .expect("small graph"),
                                            )
                                        }
                                        None => Estimate::Missing,
                                    }
                                }
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let conforming = check_hybrid(graph, f, t).map(|r| r.achievable).unwrap_or(false);
        Ok(Arc::new(Self {
            graph: graph.clone(),
            adjacency: graph.adjacency_masks(),
            f,
            t,
            phases,
            estimates,
            conforming,
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

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn phases(&self) -> &[PhaseConfig] {
        &self.phases
    }

    /// Whether the graph meets the sufficient conditions for `(f, t)`.
    pub fn conforming(&self) -> bool {
        self.conforming
    }

    /// Round at which every node decides.
    pub fn decision_round(&self) -> usize {
        self.n() * self.phases.len()
    }

    pub fn default_budget(&self) -> usize {
        4 * self.n() * self.phases.len()
    }

    pub fn node(self: &Arc<Self>, me: NodeId, input: u8, keep_tables: bool) -> PhasedNode {
        PhasedNode {
            ctx: Arc::clone(self),
            me,
            gamma: input,
            ledger: FloodLedger::new(me),
            history: Vec::new(),
            keep_tables,
        }
    }
}

/// What one node did in one phase.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseRecord {
    pub start: u8,
    pub end: u8,
    pub case: Option<u8>,
    pub zero: u64,
    pub one: u64,
    /// Accepted `(route, value)` pairs, kept only on request.
    pub ledger: Option<Vec<(Route, u8)>>,
}

pub struct PhasedNode {
    ctx: Arc<PhasedContext>,
    me: NodeId,
    gamma: u8,
    ledger: FloodLedger<u8>,
    history: Vec<PhaseRecord>,
    keep_tables: bool,
}

impl PhasedNode {
    pub fn gamma(&self) -> u8 {
        self.gamma
    }

    pub fn history(&self) -> &[PhaseRecord] {
        &self.history
    }

    fn start_phase(&mut self) -> Payload {
        self.ledger = FloodLedger::new(self.me);
        Payload::bit(self.gamma, Route::EMPTY)
    }

    /// Estimates the phase's zero/one sets, then applies the update rule.
    fn finish_phase(&mut self, phase: usize) -> Result<(), ProtocolError> {
        let ctx = Arc::clone(&self.ctx);
        let cfg = &ctx.phases[phase];
        let me = self.me;
        let (mut zero, mut one) = (0u64, 0u64);
        for (u, est) in ctx.estimates[phase][me].iter().enumerate() {
            let value = match *est {
                Estimate::Skip => continue,
                Estimate::Own => self.gamma,
                Estimate::Along(route) => self.ledger.get(route).copied().unwrap_or(1),
                Estimate::Missing => {
                    return Err(ProtocolError::NoExcludingPath { phase, from: u, to: me })
                }
            };
            if value == 0 {
                zero |= 1 << u;
            } else {
                one |= 1 << u;
            }
        }
        let start = self.gamma;
        let choice = select_case(zero, one, cfg.faulty_mask(), cfg.phi, ctx.f);
        if choice.updaters >> me & 1 == 1 {
            if let Some(delta) = self.monochromatic_family(choice.sources, cfg)? {
                self.gamma = delta;
            } else if ctx.conforming {
                let needed = ctx.f + 1;
                let found = disjoint_set_paths_excluding(
                    &ctx.graph,
                    &set_of(choice.sources),
                    me,
                    needed,
                    &cfg.excluded(),
                )
                .expect("ids in range");
                if found.is_none() {
                    return Err(ProtocolError::MissingFamily { phase, node: me, needed });
                }
            }
        }
        self.history.push(PhaseRecord {
            start,
            end: self.gamma,
            case: Some(choice.case),
            zero,
            one,
            ledger: self.keep_tables.then(|| self.ledger.entries().to_vec()),
        });
        Ok(())
    }

    /// First value in `0, 1` received along `f + 1` disjoint paths that start
    /// in `sources` and whose internal nodes avoid the phase's candidates.
    fn monochromatic_family(&self, sources: u64, cfg: &PhaseConfig) -> Result<Option<u8>, ProtocolError> {
        if sources >> self.me & 1 == 1 {
            return Ok(None);
        }
        let excluded = cfg.faulty_mask() | cfg.equivocator_mask();
        for delta in [0u8, 1] {
            let masks: Vec<u64> = self
                .ledger
                .entries()
                .iter()
                .filter(|(route, value)| {
                    *value == delta && {
                        let start = route.first().expect("ledger routes are nonempty");
                        let mask = route.mask();
                        sources >> start & 1 == 1 && mask & !(1 << start) & excluded == 0
                    }
                })
                .map(|(route, _)| route.mask())
                .collect();
            if pick_disjoint(&masks, self.ctx.f + 1).is_some() {
                return Ok(Some(delta));
            }
        }
        Ok(None)
    }
}

impl NodeProtocol for PhasedNode {
    fn step(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Result<StepOutput, NodeError> {
        let n = self.ctx.n();
        let offset = round % n;
        let phase = round / n;
        let adjacency = &self.ctx.adjacency;
        if offset == 0 {
            if phase > 0 {
                self.ledger.receive(adjacency, inbox, false, bit_of);
                self.finish_phase(phase - 1)?;
            }
            if phase == self.ctx.phases.len() {
                return Ok(StepOutput {
                    broadcasts: vec![],
                    decision: Some(self.gamma),
                });
            }
            return Ok(StepOutput {
                broadcasts: vec![self.start_phase()],
                decision: None,
            });
        }
        let mut out = self.ledger.receive(adjacency, inbox, true, bit_of);
        if offset == 1 {
            for route in self.ledger.substitute_defaults(adjacency, 1) {
                out.push(Payload::bit(1, route));
            }
        }
        Ok(StepOutput {
            broadcasts: out,
            decision: None,
        })
    }
}

pub struct PhasedRun {
    pub trace: crate::netsim::ExecutionTrace,
    /// Final state of each non-faulty node; `None` for faulty ones.
    pub nodes: Vec<Option<PhasedNode>>,
}

pub fn run_phased(
    ctx: &Arc<PhasedContext>,
    inputs: &[u8],
    faulty: FaultyNodes,
    opts: RunOptions,
) -> Result<PhasedRun, RunError> {
    validate_inputs(ctx.n(), inputs)?;
    let budget = opts.max_rounds.unwrap_or_else(|| ctx.default_budget());
    let (trace, nodes) = run_nodes(
        &ctx.graph,
        |x| ctx.node(x, inputs[x], opts.keep_tables),
        faulty,
        budget,
        opts.metadata,
    )?;
    Ok(PhasedRun { trace, nodes })
}
