//! Running protocols under named fault configurations: graph families,
//! replayable run keys and parallel sweeps.

mod generate;
mod key;
mod sweep;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::adversaries::{build_faulty, AdversaryError};
use crate::graph::{Graph, GraphError, NodeId};
use crate::netsim::ExecutionTrace;
use crate::protocols::efficient::{run_efficient, EfficientContext, IdentificationRule};
use crate::protocols::invariants::{check_phased, Violation};
use crate::protocols::phased::{run_phased, PhasedContext};
use crate::protocols::{FaultyNodes, Protocol, ProtocolError, RunError, RunOptions};

pub use generate::GraphFamily;
pub use key::{parse_bits, show_bits, RunKey, StrategyAssignment};
pub use sweep::{sweep, FaultSpace, InputSpace, RunRecord, RunVerdict, SweepReport, SweepSpec};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Adversary(#[from] AdversaryError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Unsatisfiable(String),
    #[error("replay digest {got} does not match key digest {expected}")]
    DigestMismatch { expected: String, got: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolId {
    /// Candidate-set protocol, local broadcast only.
    Alg1,
    /// Fault-identifying protocol with a `3n` round bound.
    Alg2,
    /// Candidate-set protocol with up to `t` equivocators.
    Alg3,
}

impl FromStr for ProtocolId {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alg1" => Ok(ProtocolId::Alg1),
            "alg2" => Ok(ProtocolId::Alg2),
            "alg3" => Ok(ProtocolId::Alg3),
            _ => Err(HarnessError::Parse(format!("unknown protocol `{s}`"))),
        }
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProtocolId::Alg1 => "alg1",
            ProtocolId::Alg2 => "alg2",
            ProtocolId::Alg3 => "alg3",
        })
    }
}

/// A protocol prepared for one graph and fault bound.
#[derive(Clone)]
pub enum Instance {
    Phased(Arc<PhasedContext>),
    Efficient(Arc<EfficientContext>),
}

/// What one execution produced.
pub struct Execution {
    pub trace: ExecutionTrace,
    /// Per-phase invariant violations; empty unless requested.
    pub violations: Vec<Violation>,
}

impl Instance {
    pub fn new(protocol: ProtocolId, g: &Graph, f: usize, t: usize) -> Result<Self, HarnessError> {
        match protocol {
            ProtocolId::Alg1 | ProtocolId::Alg2 if t > 0 => Err(HarnessError::Parse(format!(
                "{protocol} has no equivocators; use alg3 for t > 0"
            ))),
            ProtocolId::Alg1 | ProtocolId::Alg3 => Ok(Instance::Phased(PhasedContext::new(g, f, t)?)),
            ProtocolId::Alg2 => Ok(Instance::Efficient(EfficientContext::new(
                g,
                f,
                IdentificationRule::default(),
            )?)),
        }
    }

    pub fn protocol(&self) -> &dyn Protocol {
        match self {
            Instance::Phased(c) => c,
            Instance::Efficient(c) => c,
        }
    }

    pub fn graph(&self) -> &Graph {
        self.protocol().graph()
    }

    pub fn decision_round(&self) -> usize {
        match self {
            Instance::Phased(c) => c.decision_round(),
            Instance::Efficient(c) => c.decision_round(),
        }
    }

    /// Whether every non-faulty node must decide exactly at the decision
    /// round rather than by it.
    pub fn decides_on_schedule(&self) -> bool {
        matches!(self, Instance::Phased(_))
    }

    pub fn execute(
        &self,
        inputs: &[u8],
        faulty: FaultyNodes,
        metadata: Vec<(String, String)>,
        check_invariants: bool,
    ) -> Result<Execution, RunError> {
        let opts = RunOptions {
            keep_tables: check_invariants,
            max_rounds: None,
            metadata,
        };
        match self {
            Instance::Phased(ctx) => {
                let run = run_phased(ctx, inputs, faulty, opts)?;
                let violations = if check_invariants { check_phased(ctx, &run) } else { Vec::new() };
                Ok(Execution {
                    trace: run.trace,
                    violations,
                })
            }
            Instance::Efficient(ctx) => Ok(Execution {
                trace: run_efficient(ctx, inputs, faulty, opts)?.trace,
                violations: Vec::new(),
            }),
        }
    }

    /// Runs the configuration `key` names. The trace header records the key
    /// without its digest.
    pub fn run_key(&self, key: &RunKey, check_invariants: bool) -> Result<Execution, HarnessError> {
        let mut faulty = FaultyNodes::new();
        for &x in &key.faulty {
            let spec = key.strategy.for_node(x)?;
            let equivocating = key.equivocating.contains(&x);
            let input = *key
                .inputs
                .get(x)
                .ok_or_else(|| HarnessError::Parse(format!("no input for node {x}")))?;
            let node = build_faulty(spec, x, self.graph().neighbors(x), equivocating, || {
                self.protocol().node(x, input)
            })?;
            faulty.insert(x, node);
        }
        let metadata = vec![("key".to_string(), key.without_digest().to_string())];
        Ok(self.execute(&key.inputs, faulty, metadata, check_invariants)?)
    }

    /// Reasons the run fails termination, agreement or validity; empty when
    /// it passes.
    pub fn judge(&self, inputs: &[u8], trace: &ExecutionTrace) -> Vec<String> {
        let honest: Vec<NodeId> = (0..inputs.len()).filter(|x| !trace.faulty.contains(x)).collect();
        let mut reasons = Vec::new();
        let deadline = self.decision_round();
        let mut values = Vec::new();
        for &x in &honest {
            match trace.decisions.get(&x) {
                None => reasons.push(format!("termination: node {x} did not decide")),
                Some(d) => {
                    let late = if self.decides_on_schedule() { d.round != deadline } else { d.round > deadline };
                    if late {
                        reasons.push(format!("termination: node {x} decided at round {}", d.round));
                    }
                    values.push(d.value);
                }
            }
        }
        if values.iter().any(|&v| v != values[0]) {
            reasons.push(format!("agreement: decided {values:?}"));
        }
        for &v in &values {
            if !honest.iter().any(|&x| inputs[x] == v) {
                reasons.push(format!("validity: decided {v}, no non-faulty input"));
                break;
            }
        }
        reasons
    }
}

/// Re-runs `key` and checks the trace digest against the one it records.
pub fn replay(key: &RunKey) -> Result<(ExecutionTrace, Vec<String>), HarnessError> {
    let instance = Instance::new(key.protocol, &key.graph, key.f, key.t)?;
    let trace = match instance.run_key(key, false) {
        Ok(run) => run.trace,
        Err(HarnessError::Run(e)) => match e.partial_trace() {
            Some(t) => t.clone(),
            None => return Err(e.into()),
        },
        Err(e) => return Err(e),
    };
    if let Some(expected) = &key.digest {
        let got = trace.digest();
        if &got != expected {
            return Err(HarnessError::DigestMismatch {
                expected: expected.clone(),
                got,
            });
        }
    }
    let reasons = instance.judge(&key.inputs, &trace);
    Ok((trace, reasons))
}
