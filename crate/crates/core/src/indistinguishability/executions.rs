use std::collections::BTreeMap;
use std::fmt;

use crate::adversaries::{scripted, ScriptTable};
use crate::graph::{NodeId, NodeSet};
use crate::message::Payload;
use crate::netsim::{run_synchronous, Audience, ExecutionTrace, Network, NodeProtocol, Participant, SimError};
use crate::protocols::Protocol;

use super::{Construction, Part, SplitError, SplitNetwork};

/// Who is faulty in one derived execution and which side models each
/// duplicated honest part.
struct Plan {
    name: &'static str,
    faulty: &'static [Part],
    equivocating: &'static [Part],
    sides: &'static [(Part, u8)],
}

fn plans(c: Construction) -> [Plan; 3] {
    use Part::*;
    match c {
        Construction::Degree => [
            Plan { name: "E1", faulty: &[F2], equivocating: &[], sides: &[(W, 0)] },
            Plan { name: "E2", faulty: &[F1], equivocating: &[], sides: &[(W, 1)] },
            Plan { name: "E3", faulty: &[F1, Z], equivocating: &[], sides: &[(W, 1)] },
        ],
        Construction::Connectivity => [
            Plan { name: "E1", faulty: &[C2, C3], equivocating: &[], sides: &[(A, 0), (B, 0)] },
            Plan { name: "E2", faulty: &[C1, C3], equivocating: &[], sides: &[(A, 0), (B, 1)] },
            Plan { name: "E3", faulty: &[C1, C2], equivocating: &[], sides: &[(A, 1), (B, 1)] },
        ],
        Construction::HybridDegree => [
            Plan { name: "E1", faulty: &[F2, R], equivocating: &[], sides: &[(T, 0), (W, 0)] },
            Plan { name: "E2", faulty: &[F1], equivocating: &[T], sides: &[(W, 1)] },
            Plan { name: "E3", faulty: &[F1, S], equivocating: &[], sides: &[(T, 1), (W, 1)] },
        ],
        Construction::HybridConnectivity => [
            Plan { name: "E1", faulty: &[C2, C3], equivocating: &[T], sides: &[(A, 0), (B, 0), (R, 0)] },
            Plan { name: "E2", faulty: &[C1, C3], equivocating: &[R], sides: &[(A, 0), (B, 1), (T, 1)] },
            Plan { name: "E3", faulty: &[C1, C2], equivocating: &[T], sides: &[(A, 1), (B, 1), (R, 1)] },
        ],
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExecutionOutcome {
    Decided {
        values: BTreeMap<NodeId, u8>,
        agreement: bool,
        validity: bool,
    },
    Aborted(String),
    /// The round budget ran out first.
    Undecided,
}

impl fmt::Display for ExecutionOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExecutionOutcome::Decided {
                values,
                agreement,
                validity,
            } => {
                let vals: Vec<String> = values.iter().map(|(x, v)| format!("{x}:{v}")).collect();
                write!(f, "decided [{}] agreement={agreement} validity={validity}", vals.join(" "))
            }
            ExecutionOutcome::Aborted(e) => write!(f, "aborted: {e}"),
            ExecutionOutcome::Undecided => f.write_str("undecided"),
        }
    }
}

/// One execution on the original graph, replaying copies of the split run
/// as its faulty nodes.
#[derive(Clone, Debug)]
pub struct DerivedExecution {
    pub name: String,
    pub faulty: NodeSet,
    pub equivocating: NodeSet,
    /// Inputs of the honest nodes; faulty entries are 0.
    pub inputs: Vec<u8>,
    /// The split-network copy that models each honest node.
    pub model: BTreeMap<NodeId, usize>,
    pub scripts: BTreeMap<NodeId, ScriptTable>,
    pub trace: ExecutionTrace,
    pub outcome: ExecutionOutcome,
}

impl DerivedExecution {
    /// Runs the execution again from its scripts.
    pub fn replay(&self, protocol: &dyn Protocol, budget: usize) -> Result<ExecutionTrace, SplitError> {
        let (trace, _) = run_derived(protocol, self, budget)?;
        Ok(trace)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DemoOutcome {
    Violation { execution: String, property: &'static str },
    Aborted { execution: String },
    NoViolation,
}

impl fmt::Display for DemoOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemoOutcome::Violation { execution, property } => write!(f, "violation {property} in {execution}"),
            DemoOutcome::Aborted { execution } => write!(f, "aborted in {execution}"),
            DemoOutcome::NoViolation => f.write_str("no violation"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DemoReport {
    pub split_trace: ExecutionTrace,
    pub split_error: Option<String>,
    pub executions: Vec<DerivedExecution>,
    pub outcome: DemoOutcome,
}

/// Splits a run result into the trace, an abort message, and the last round
/// every node finished.
fn settle(result: Result<ExecutionTrace, SimError>) -> Result<(ExecutionTrace, Option<String>, usize), SimError> {
    match result {
        Ok(trace) => {
            let done = trace.rounds;
            Ok((trace, None, done))
        }
        Err(SimError::Node { node, round, source, trace }) => {
            let msg = format!("node {node} at round {round}: {source}");
            Ok((*trace, Some(msg), round.saturating_sub(1)))
        }
        Err(e) => Err(e),
    }
}

fn sent_by(trace: &ExecutionTrace, sender: usize, upto: usize) -> Vec<(usize, &Payload)> {
    trace
        .transmissions
        .iter()
        .filter(|t| t.sender == sender && t.round <= upto)
        .map(|t| (t.round, &t.payload))
        .collect()
}

fn run_derived(
    protocol: &dyn Protocol,
    exec: &DerivedExecution,
    budget: usize,
) -> Result<(ExecutionTrace, Option<(String, usize)>), SplitError> {
    let g = protocol.graph();
    let mut participants: Vec<Participant<Box<dyn NodeProtocol + Send>>> = (0..g.n())
        .map(|x| match exec.scripts.get(&x) {
            Some(table) => {
                let node = scripted(table.clone(), exec.equivocating.contains(&x));
                Participant::Faulty {
                    behavior: node.behavior,
                    equivocating: node.equivocating,
                }
            }
            None => Participant::Honest(protocol.node(x, exec.inputs[x])),
        })
        .collect();
    let meta = vec![("execution".to_string(), exec.name.clone())];
    let result = run_synchronous(&Network::from_graph(g), &mut participants, budget, meta);
    let (trace, err, done) = settle(result).map_err(crate::protocols::RunError::from)?;
    Ok((trace, err.map(|e| (e, done))))
}

/// Runs `protocol` on the split network, then derives and runs the three
/// executions on the original graph, checking that every honest node there
/// behaves exactly like the copy that models it.
pub fn derive_executions(
    net: &SplitNetwork,
    protocol: &dyn Protocol,
    budget: Option<usize>,
) -> Result<DemoReport, SplitError> {
    let g = net.graph();
    if protocol.graph() != g {
        return Err(SplitError::Invalid("protocol was built for another graph".into()));
    }
    let budget = budget.unwrap_or_else(|| protocol.default_budget());
    let spec = net.spec();
    let mut participants: Vec<Participant<Box<dyn NodeProtocol + Send>>> = net
        .copies()
        .iter()
        .enumerate()
        .map(|(c, copy)| Participant::Honest(protocol.node(copy.node, net.input_of(c))))
        .collect();
    let meta = vec![("split".to_string(), spec.to_string())];
    let result = run_synchronous(&net.network(), &mut participants, budget, meta);
    let (split_trace, split_error, split_done) = settle(result).map_err(crate::protocols::RunError::from)?;

    let mut executions = Vec::new();
    for plan in plans(spec.construction()) {
        let in_parts = |parts: &[Part]| -> NodeSet { parts.iter().flat_map(|&p| spec.members(p)).collect() };
        let equivocating = in_parts(plan.equivocating);
        let faulty: NodeSet = in_parts(plan.faulty).union(&equivocating).copied().collect();
        let mut model = BTreeMap::new();
        let mut inputs = vec![0u8; g.n()];
        for x in (0..g.n()).filter(|x| !faulty.contains(x)) {
            let part = spec.part_of(x);
            let side = spec.construction().duplicated(part).then(|| {
                plan.sides
                    .iter()
                    .find(|(p, _)| *p == part)
                    .map(|&(_, s)| s)
                    .expect("every duplicated honest part has a side")
            });
            let c = net.index_of(x, side).expect("copy exists");
            model.insert(x, c);
            inputs[x] = net.input_of(c);
        }
        let mut scripts = BTreeMap::new();
        for &x in &faulty {
            let mut heard: BTreeMap<usize, Vec<NodeId>> = BTreeMap::new();
            for &y in g.neighbors(x) {
                if let Some(&my) = model.get(&y) {
                    heard.entry(net.heard_copy(my, x)).or_default().push(y);
                }
            }
            let fallback = net.index_of(x, None).or_else(|| net.index_of(x, Some(0))).expect("copy exists");
            let mut entries = Vec::new();
            if heard.len() <= 1 {
                let c = heard.keys().next().copied().unwrap_or(fallback);
                for (round, p) in sent_by(&split_trace, c, usize::MAX) {
                    entries.push((round, Audience::Broadcast, p.clone()));
                }
            } else if equivocating.contains(&x) {
                for (&c, ys) in &heard {
                    for (round, p) in sent_by(&split_trace, c, usize::MAX) {
                        for &y in ys {
                            entries.push((round, Audience::Targeted(y), p.clone()));
                        }
                    }
                }
            } else {
                return Err(SplitError::ProjectionMismatch {
                    execution: plan.name.to_string(),
                    detail: format!("non-equivocating faulty node {x} must act as several copies"),
                });
            }
            scripts.insert(x, ScriptTable::new(entries));
        }
        let mut exec = DerivedExecution {
            name: plan.name.to_string(),
            faulty,
            equivocating,
            inputs,
            model,
            scripts,
            trace: ExecutionTrace::parse("").expect("empty trace parses"),
            outcome: ExecutionOutcome::Undecided,
        };
        let (trace, err) = run_derived(protocol, &exec, budget)?;
        let done = err.as_ref().map_or(trace.rounds, |e| e.1);
        let horizon = done.min(split_done);
        for (&x, &c) in &exec.model {
            if sent_by(&trace, x, horizon) != sent_by(&split_trace, c, horizon) {
                return Err(SplitError::ProjectionMismatch {
                    execution: plan.name.to_string(),
                    detail: format!("node {x} diverges from copy {}", net.copies()[c]),
                });
            }
            let mine = trace.decisions.get(&x).filter(|d| d.round <= horizon);
            let theirs = split_trace.decisions.get(&c).filter(|d| d.round <= horizon);
            if mine != theirs {
                return Err(SplitError::ProjectionMismatch {
                    execution: plan.name.to_string(),
                    detail: format!("node {x} decides differently from copy {}", net.copies()[c]),
                });
            }
        }
        exec.outcome = match err {
            Some((e, _)) => ExecutionOutcome::Aborted(e),
            None if !trace.terminated => ExecutionOutcome::Undecided,
            None => {
                let values: BTreeMap<NodeId, u8> = trace.decisions.iter().map(|(&x, d)| (x, d.value)).collect();
                let honest_inputs: Vec<u8> = exec.model.keys().map(|&x| exec.inputs[x]).collect();
                let first = values.values().next().copied();
                ExecutionOutcome::Decided {
                    agreement: values.values().all(|&v| Some(v) == first),
                    validity: values.values().all(|v| honest_inputs.contains(v)),
                    values,
                }
            }
        };
        exec.trace = trace;
        executions.push(exec);
    }

    let violation = executions.iter().find_map(|e| match &e.outcome {
        ExecutionOutcome::Decided { agreement: false, .. } => Some((e.name.clone(), "agreement")),
        ExecutionOutcome::Decided { validity: false, .. } => Some((e.name.clone(), "validity")),
        _ => None,
    });
    let outcome = match violation {
        Some((execution, property)) => DemoOutcome::Violation { execution, property },
        None => match executions.iter().find(|e| matches!(e.outcome, ExecutionOutcome::Aborted(_))) {
            Some(e) => DemoOutcome::Aborted {
                execution: e.name.clone(),
            },
            None if split_error.is_some() => DemoOutcome::Aborted {
                execution: "split".to_string(),
            },
            None => DemoOutcome::NoViolation,
        },
    };
    Ok(DemoReport {
        split_trace,
        split_error,
        executions,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::indistinguishability::{build_split_network, SplitSpec};
    use crate::protocols::phased::PhasedContext;

    #[test]
    fn p3_demo_aborts_or_violates() {
        let g = Graph::path(3).unwrap();
        let spec = SplitSpec::find(&g, Construction::Degree, 1, 0).unwrap();
        let net = build_split_network(&g, &spec).unwrap();
        let ctx = PhasedContext::new(&g, 1, 0).unwrap();
        let report = derive_executions(&net, &ctx, None).unwrap();
        assert_ne!(report.outcome, DemoOutcome::NoViolation);
        assert_eq!(report.executions.len(), 3);
        assert_eq!(report.executions[0].faulty, [1].into());
        assert_eq!(report.executions[2].faulty, [0].into());
    }

    #[test]
    fn c5_connectivity_demo_for_f2() {
        let g = Graph::cycle(5).unwrap();
        let spec = SplitSpec::find(&g, Construction::Connectivity, 2, 0).unwrap();
        let net = build_split_network(&g, &spec).unwrap();
        let ctx = PhasedContext::new(&g, 2, 0).unwrap();
        let report = derive_executions(&net, &ctx, None).unwrap();
        assert_ne!(report.outcome, DemoOutcome::NoViolation);
        for e in &report.executions {
            let again = e.replay(&ctx, ctx.default_budget()).unwrap();
            assert_eq!(again.digest(), e.trace.digest());
        }
    }
}
