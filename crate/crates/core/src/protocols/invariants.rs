//! Per-phase checks on finished runs of the candidate-set protocol.
//!
//! Runs must be made with `keep_tables` set; nodes without per-phase ledgers
//! are only checked for validity and agreement.

use std::fmt;

use crate::message::{Payload, Route};
use crate::netsim::{Audience, ExecutionTrace};

use super::phased::{PhasedContext, PhasedRun};
use super::mask_of;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InvariantKind {
    /// A node's end state equals some non-faulty start state.
    PhaseValidity,
    /// All non-faulty nodes agree after a phase whose candidates cover the
    /// faulty nodes.
    CoveringAgreement,
    /// A value received along an all-honest route is what its initiator sent.
    PathConsistency,
    /// Non-faulty floods stay inside their phase and advance one hop a round.
    Quiescence,
}

impl fmt::Display for InvariantKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InvariantKind::PhaseValidity => "phase-validity",
            InvariantKind::CoveringAgreement => "covering-agreement",
            InvariantKind::PathConsistency => "path-consistency",
            InvariantKind::Quiescence => "quiescence",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub kind: InvariantKind,
    pub phase: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.phase {
            Some(p) => write!(f, "{} phase {p}: {}", self.kind, self.detail),
            None => write!(f, "{}: {}", self.kind, self.detail),
        }
    }
}

/// Whether a phase's candidates cover the actual faults: for `t = 0`
/// `F` contains every faulty node, otherwise `T` is exactly the equivocators
/// and `F` exactly the other faulty nodes.
fn covers(ctx: &PhasedContext, phase: usize, faulty: u64, equivocating: u64) -> bool {
    let cfg = &ctx.phases()[phase];
    if ctx.t() == 0 {
        cfg.equivocators.is_empty() && faulty & !cfg.faulty_mask() == 0
    } else {
        cfg.equivocator_mask() == equivocating && cfg.faulty_mask() == faulty & !equivocating
    }
}

pub fn check_phased(ctx: &PhasedContext, run: &PhasedRun) -> Vec<Violation> {
    let trace = &run.trace;
    let n = ctx.n();
    let faulty = mask_of(&trace.faulty);
    let equivocating = mask_of(&trace.equivocating);
    let honest: Vec<_> = run.nodes.iter().enumerate().filter_map(|(x, s)| s.as_ref().map(|s| (x, s))).collect();
    let mut out = Vec::new();
    let phases_done = honest.iter().map(|(_, s)| s.history().len()).min().unwrap_or(0);
    for p in 0..phases_done {
        let starts: Vec<u8> = honest.iter().map(|(_, s)| s.history()[p].start).collect();
        for (x, s) in &honest {
            let end = s.history()[p].end;
            if !starts.contains(&end) {
                out.push(Violation {
                    kind: InvariantKind::PhaseValidity,
                    phase: Some(p),
                    detail: format!("node {x} ended with {end}, no non-faulty node started with it"),
                });
            }
        }
        if covers(ctx, p, faulty, equivocating) {
            let ends: Vec<u8> = honest.iter().map(|(_, s)| s.history()[p].end).collect();
            if ends.iter().any(|&e| e != ends[0]) {
                out.push(Violation {
                    kind: InvariantKind::CoveringAgreement,
                    phase: Some(p),
                    detail: format!("end states {ends:?}"),
                });
            }
        }
        for (v, s) in &honest {
            let Some(ledger) = &s.history()[p].ledger else { continue };
            for &(route, value) in ledger {
                if route.mask() & faulty & !(1 << route.get(0)) != 0 {
                    continue;
                }
                let u = route.get(0);
                let first_hop = if route.len() > 1 { route.get(1) } else { *v };
                let expected = if faulty >> u & 1 == 0 {
                    honest.iter().find(|(x, _)| *x == u).map(|(_, s)| s.history()[p].start)
                } else {
                    Some(effective_initiation(trace, u, first_hop, p * n))
                };
                if expected.is_some_and(|e| e != value) {
                    out.push(Violation {
                        kind: InvariantKind::PathConsistency,
                        phase: Some(p),
                        detail: format!("node {v} took {value} along {route}, initiator sent {expected:?}"),
                    });
                }
            }
        }
    }
    out.extend(check_quiescence(trace, n, ctx.decision_round()));
    out
}

/// The value `u` effectively initiated toward `listener` at `round`: the
/// first fresh bit flood `listener` could hear, or the default `1`.
fn effective_initiation(trace: &ExecutionTrace, u: usize, listener: usize, round: usize) -> u8 {
    trace
        .round_range(round)
        .iter()
        .filter(|t| t.sender == u && t.receivers.contains(&listener))
        .find_map(|t| match &t.payload {
            Payload::Bit { value, route } if route.is_empty() => Some(*value),
            _ => None,
        })
        .unwrap_or(1)
}

fn check_quiescence(trace: &ExecutionTrace, n: usize, decision_round: usize) -> Vec<Violation> {
    let faulty = mask_of(&trace.faulty);
    let mut out = Vec::new();
    for t in &trace.transmissions {
        if faulty >> t.sender & 1 == 1 {
            continue;
        }
        let phase = t.round / n;
        let offset = t.round % n;
        let mut bad = |detail: String| {
            out.push(Violation {
                kind: InvariantKind::Quiescence,
                phase: Some(phase),
                detail,
            })
        };
        if t.round >= decision_round {
            bad(format!("node {} sent at round {} after the last phase", t.sender, t.round));
            continue;
        }
        if t.audience != Audience::Broadcast {
            bad(format!("node {} sent a targeted message", t.sender));
        }
        let Payload::Bit { route, .. } = &t.payload else {
            bad(format!("node {} sent a non-flood payload", t.sender));
            continue;
        };
        let all_honest = route.mask() & faulty == 0;
        let ok = if offset == 0 {
            *route == Route::EMPTY
        } else {
            !route.is_empty() && route.len() < n && (!all_honest || route.len() == offset)
        };
        if !ok {
            bad(format!("node {} sent route {route} at offset {offset}", t.sender));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{build_faulty, StrategySpec};
    use crate::graph::Graph;
    use crate::protocols::phased::run_phased;
    use crate::protocols::{FaultyNodes, RunOptions};

    #[test]
    fn c5_runs_are_clean_under_tampering() {
        let g = Graph::cycle(5).unwrap();
        let ctx = PhasedContext::new(&g, 1, 0).unwrap();
        let spec: StrategySpec = "tamper:all".parse().unwrap();
        for bits in [0u8, 5, 19, 31] {
            let inputs: Vec<u8> = (0..5).map(|i| bits >> i & 1).collect();
            let mut faulty = FaultyNodes::new();
            let node = build_faulty(&spec, 2, g.neighbors(2), false, || Box::new(ctx.node(2, inputs[2], false))).unwrap();
            faulty.insert(2, node);
            let opts = RunOptions {
                keep_tables: true,
                ..Default::default()
            };
            let run = run_phased(&ctx, &inputs, faulty, opts).unwrap();
            assert_eq!(check_phased(&ctx, &run), vec![]);
        }
    }

    #[test]
    fn doctored_history_is_caught() {
        let g = Graph::cycle(5).unwrap();
        let ctx = PhasedContext::new(&g, 1, 0).unwrap();
        let opts = RunOptions {
            keep_tables: true,
            ..Default::default()
        };
        let mut run = run_phased(&ctx, &[0, 0, 0, 0, 0], FaultyNodes::new(), opts).unwrap();
        run.trace.transmissions.retain(|t| !(t.round == 3 && t.sender == 1));
        let mut tx = run.trace.transmissions[7].clone();
        tx.round = 3;
        tx.payload = Payload::bit(1, Route::from_nodes(&[4]).unwrap());
        run.trace.transmissions.push(tx);
        let kinds: Vec<_> = check_phased(&ctx, &run).into_iter().map(|v| v.kind).collect();
        assert!(kinds.contains(&InvariantKind::Quiescence), "{kinds:?}");
    }
}
