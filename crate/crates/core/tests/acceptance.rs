//! Acceptance suite: one PASS/FAIL line per criterion. Tolerances and time
//! budgets are pinned below.

// tolerances are pinned constants that may be zero
#![allow(clippy::absurd_extreme_comparisons)]

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{brute_connectivity, graph_from_bits, simple_paths};
use lbcast::feasibility::{check_hybrid, check_local_broadcast};
use lbcast::graph::{vertex_connectivity, Graph, NodeId, NodeSet};
use lbcast::harness::{sweep, FaultSpace, InputSpace, Instance, ProtocolId, SweepReport, SweepSpec};
use lbcast::indistinguishability::{build_split_network, derive_executions, Construction, DemoOutcome, SplitSpec};
use lbcast::message::Route;
use lbcast::protocols::reliable::reliable_receipt;

const MINUTE: Duration = Duration::from_secs(60);
/// Every criterion is exact: no failed runs, discrepancies or violations.
const ALLOWED_FAILURES: usize = 0;
const CONNECTIVITY_BUDGET: Duration = Duration::from_secs(5 * 60);
const C5_SWEEP_BUDGET: Duration = Duration::from_secs(2 * 60);
const FIG1B_SWEEP_BUDGET: Duration = Duration::from_secs(30 * 60);
const RECEIPT_BUDGET: Duration = Duration::from_secs(5 * 60);
/// Rounds per candidate-set run on C5 with one fault: 5 nodes times 6 phases.
const C5_ROUNDS: usize = 30;
const HYBRID_INPUT_SAMPLES: usize = 64;
const SEED: u64 = 2024;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fig1b() -> Graph {
    Graph::complete_bipartite(4, 4).unwrap()
}

fn strategies(list: &[&str]) -> Vec<lbcast::adversaries::StrategySpec> {
    list.iter().map(|s| s.parse().unwrap()).collect()
}

const C5_STRATEGIES: [&str; 7] = [
    "silent",
    "constant:0",
    "constant:1",
    "input-flip",
    "tamper:all",
    "tamper:first-hop=0",
    "tamper:via=2",
];
const FIG1B_STRATEGIES: [&str; 4] = ["silent", "constant:0", "input-flip", "tamper:all"];

fn c5_spec(protocol: ProtocolId, check_invariants: bool) -> SweepSpec {
    SweepSpec {
        protocol,
        graph: Graph::cycle(5).unwrap(),
        f: 1,
        t: 0,
        inputs: InputSpace::Exhaustive,
        faults: FaultSpace::UpTo(1),
        strategies: strategies(&C5_STRATEGIES),
        seed: SEED,
        check_invariants,
    }
}

fn fig1b_spec(protocol: ProtocolId, check_invariants: bool) -> SweepSpec {
    SweepSpec {
        protocol,
        graph: fig1b(),
        f: 2,
        t: 0,
        inputs: InputSpace::Exhaustive,
        faults: FaultSpace::Exactly(2),
        strategies: strategies(&FIG1B_STRATEGIES),
        seed: SEED,
        check_invariants,
    }
}

fn failures(report: &SweepReport) -> usize {
    report.total() - report.passed()
}

fn first_failure(report: &SweepReport) -> String {
    report.failures().next().map(|r| format!("; first failure {r}")).unwrap_or_default()
}

fn connectivity_exhaustive() -> Outcome {
    let start = Instant::now();
    let mut graphs = 0usize;
    let mut discrepancies = 0usize;
    for n in 1..=6 {
        for bits in 0u64..1 << (n * (n - 1) / 2) {
            let g = graph_from_bits(n, bits);
            graphs += 1;
            if vertex_connectivity(&g) != brute_connectivity(&g) {
                discrepancies += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        discrepancies <= ALLOWED_FAILURES && elapsed < CONNECTIVITY_BUDGET,
        format!("{graphs} graphs, {discrepancies} discrepancies, {elapsed:.1?}"),
    )
}

fn boundary_verdicts() -> Outcome {
    let achievable = |g: &Graph, f| check_local_broadcast(g, f).unwrap().achievable;
    let c5 = Graph::cycle(5).unwrap();
    let mut wrong = Vec::new();
    if !achievable(&c5, 1) {
        wrong.push("C5 f=1".to_string());
    }
    if !achievable(&fig1b(), 2) {
        wrong.push("fig1b f=2".to_string());
    }
    if achievable(&c5, 2) {
        wrong.push("C5 f=2".to_string());
    }
    let mut dropped = 0;
    for (u, v) in fig1b().edges() {
        let mut g = fig1b();
        g.remove_edge(u, v);
        let report = check_local_broadcast(&g, 2).unwrap();
        if report.checks.iter().any(|c| !c.pass) {
            dropped += 1;
            if report.achievable || report.witness.is_none() {
                wrong.push(format!("fig1b minus {u}-{v}"));
            }
        }
    }
    outcome(
        wrong.is_empty() && dropped == 16,
        format!("4 named verdicts, {dropped}/16 edge deletions drop a check, wrong: {wrong:?}"),
    )
}

/// Sweeps for criteria 3, 4 and 8, shared with criterion 5's shapes.
struct PhasedSweeps {
    c5: SweepReport,
    c5_time: Duration,
    fig1b: SweepReport,
    fig1b_time: Duration,
}

fn timed(spec: &SweepSpec) -> (SweepReport, Duration) {
    let start = Instant::now();
    let report = sweep(spec).unwrap();
    (report, start.elapsed())
}

fn c5_alg1(s: &PhasedSweeps) -> Outcome {
    let expected = 32 * 6 * C5_STRATEGIES.len();
    let off_schedule = s.c5.records.iter().filter(|r| r.decided.map(|d| d.1) != Some(C5_ROUNDS)).count();
    outcome(
        s.c5.total() == expected
            && failures(&s.c5) <= ALLOWED_FAILURES
            && off_schedule == 0
            && s.c5_time < C5_SWEEP_BUDGET,
        format!(
            "{}/{} runs pass, {off_schedule} not deciding at round {C5_ROUNDS}, {:.1?}{}",
            s.c5.passed(),
            expected,
            s.c5_time,
            first_failure(&s.c5)
        ),
    )
}

fn fig1b_alg1(s: &PhasedSweeps) -> Outcome {
    let expected = 256 * 28 * FIG1B_STRATEGIES.len();
    outcome(
        s.fig1b.total() == expected && failures(&s.fig1b) <= ALLOWED_FAILURES && s.fig1b_time < FIG1B_SWEEP_BUDGET,
        format!(
            "{}/{} runs pass, {:.1?}{}",
            s.fig1b.passed(),
            expected,
            s.fig1b_time,
            first_failure(&s.fig1b)
        ),
    )
}

fn efficient_sweeps() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for spec in [c5_spec(ProtocolId::Alg2, false), fig1b_spec(ProtocolId::Alg2, false)] {
        let bound = 3 * spec.graph.n();
        let (report, elapsed) = timed(&spec);
        let late = report.records.iter().filter(|r| r.decided.is_none_or(|d| d.1 > bound)).count();
        pass &= failures(&report) <= ALLOWED_FAILURES && late == 0;
        parts.push(format!(
            "n={}: {}/{} pass, {late} undecided by round {bound}, {elapsed:.1?}{}",
            spec.graph.n(),
            report.passed(),
            report.total(),
            first_failure(&report)
        ));
    }
    outcome(pass, parts.join("; "))
}

fn hybrid_reduction() -> Outcome {
    let spec = c5_spec(ProtocolId::Alg1, false);
    let alg1 = Instance::new(ProtocolId::Alg1, &spec.graph, 1, 0).unwrap();
    let alg3 = Instance::new(ProtocolId::Alg3, &spec.graph, 1, 0).unwrap();
    let keys = spec.keys().unwrap();
    let mut differing = 0;
    for key in &keys {
        // identical keys give identical trace headers
        let a = alg1.run_key(key, false).unwrap().trace.to_text();
        let b = alg3.run_key(key, false).unwrap().trace.to_text();
        differing += usize::from(a != b);
    }
    outcome(
        differing <= ALLOWED_FAILURES,
        format!("{} runs, {differing} traces differ", keys.len()),
    )
}

fn hybrid_sweep() -> Outcome {
    // graphs with no more nodes than faults are rejected outright
    let passes = |n: usize| check_hybrid(&Graph::complete(n).unwrap(), 2, 1).is_ok_and(|r| r.achievable);
    let Some(n) = (2..=10).find(|&n| passes(n)) else {
        return outcome(false, "no complete graph up to K10 passes the hybrid check");
    };
    let spec = SweepSpec {
        protocol: ProtocolId::Alg3,
        graph: Graph::complete(n).unwrap(),
        f: 2,
        t: 1,
        inputs: InputSpace::Sampled(HYBRID_INPUT_SAMPLES),
        faults: FaultSpace::Exactly(2),
        strategies: strategies(&["silent", "constant:0", "input-flip", "equivocate:split/tamper:all"]),
        seed: SEED,
        check_invariants: false,
    };
    let expected = n * (n - 1) / 2 * 4 * HYBRID_INPUT_SAMPLES;
    let (report, elapsed) = timed(&spec);
    outcome(
        report.total() == expected && failures(&report) <= ALLOWED_FAILURES,
        format!(
            "K{n}: {}/{expected} runs pass, {elapsed:.1?}{}",
            report.passed(),
            first_failure(&report)
        ),
    )
}

fn invariants(s: &PhasedSweeps) -> Outcome {
    let mut by_kind = std::collections::BTreeMap::new();
    for r in s.c5.records.iter().chain(&s.fig1b.records) {
        for v in &r.violations {
            *by_kind.entry(v.kind.to_string()).or_insert(0usize) += 1;
        }
    }
    let total: usize = by_kind.values().sum();
    outcome(
        total <= ALLOWED_FAILURES,
        format!(
            "{} traces checked, violations {by_kind:?}",
            s.c5.total() + s.fig1b.total()
        ),
    )
}

/// Two `A` nodes and two `B` nodes joined only through a triangle of `C`
/// nodes: every degree is at least 4 but `{2, 3, 4}` is a cut.
fn three_cut_graph() -> Graph {
    let mut edges = vec![(0, 1), (5, 6), (2, 3), (2, 4), (3, 4)];
    for a in [0, 1, 5, 6] {
        for c in [2, 3, 4] {
            edges.push((a, c));
        }
    }
    Graph::from_edges(7, edges).unwrap()
}

fn necessity() -> Outcome {
    let cases = [
        ("P3", Graph::path(3).unwrap(), Construction::Degree, 1),
        ("three-cut", three_cut_graph(), Construction::Connectivity, 2),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, g, construction, f) in cases {
        let conforming = check_local_broadcast(&g, f).unwrap().achievable;
        let Some(spec) = SplitSpec::find(&g, construction, f, 0) else {
            pass = false;
            parts.push(format!("{name}: no split"));
            continue;
        };
        let net = build_split_network(&g, &spec).unwrap();
        let hearing = net.check_hearing().is_ok();
        let instance = Instance::new(ProtocolId::Alg1, &g, f, 0).unwrap();
        let budget = instance.protocol().default_budget();
        let report = derive_executions(&net, instance.protocol(), None).unwrap();
        let deterministic = report.executions.iter().all(|e| {
            e.replay(instance.protocol(), budget).map(|t| t.to_text()).ok() == Some(e.trace.to_text())
        });
        let shown = match &report.outcome {
            DemoOutcome::Violation { execution, .. } => execution == "E2",
            DemoOutcome::Aborted { .. } => true,
            DemoOutcome::NoViolation => false,
        };
        pass &= !conforming && hearing && deterministic && shown && report.executions.len() == 3;
        parts.push(format!(
            "{name}: {} executions, {}, hearing {}, replay {}",
            report.executions.len(),
            report.outcome,
            if hearing { "ok" } else { "broken" },
            if deterministic { "deterministic" } else { "diverged" }
        ));
    }
    outcome(pass, parts.join("; "))
}

/// Values `v` reliably receives from `u` per the definition, by enumerating
/// every `(f + 1)`-subset of the recorded routes carrying each value.
fn oracle_values(g: &Graph, v: NodeId, u: NodeId, own: u8, entries: &[(Route, u8)], f: usize) -> Vec<u8> {
    if u == v {
        return vec![own];
    }
    if g.has_edge(u, v) {
        let direct = Route::from_nodes(&[u]).unwrap();
        return entries.iter().filter(|(r, _)| *r == direct).map(|&(_, b)| b).take(1).collect();
    }
    [0u8, 1]
        .into_iter()
        .filter(|&b| {
            let routes: Vec<NodeSet> = entries
                .iter()
                .filter(|(r, value)| *value == b && r.first() == Some(u))
                .map(|(r, _)| r.iter().skip(1).collect())
                .collect();
            routes
                .iter()
                .combinations(f + 1)
                .any(|set| set.iter().tuple_combinations().all(|(a, c)| a.is_disjoint(c)))
        })
        .collect()
}

fn reliable_receive() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut cases = 0usize;
    let mut discrepancies = 0usize;
    let mut first = None;
    for (g, f) in [(Graph::cycle(5).unwrap(), 1), (fig1b(), 2)] {
        let n = g.n();
        for u in 0..n {
            for v in (0..n).filter(|&v| v != u) {
                let paths = simple_paths(&g, u, v);
                for size in 0..=f {
                    for faulty in (0..n).filter(|&x| x != v).combinations(size) {
                        let faulty: NodeSet = faulty.into_iter().collect();
                        // pattern 0 faithful, 1 flip every faulty-touched route,
                        // 2 drop them, the rest random per route
                        for pattern in 0..6 {
                            for value in [0u8, 1] {
                                let mut entries = Vec::new();
                                for p in &paths {
                                    let route = Route::from_nodes(&p[..p.len() - 1]).unwrap();
                                    let touched = p[..p.len() - 1].iter().any(|x| faulty.contains(x));
                                    let choice = if !touched { 0 } else if pattern < 3 { pattern } else { rng.gen_range(0..3) };
                                    match choice {
                                        0 => entries.push((route, value)),
                                        1 => entries.push((route, 1 - value)),
                                        _ => {}
                                    }
                                }
                                cases += 1;
                                let got = reliable_receipt(&g, v, u, value, &entries, f).map(|r| r.value);
                                let expected = oracle_values(&g, v, u, value, &entries, f);
                                if got != expected.first().copied() {
                                    discrepancies += 1;
                                    first.get_or_insert(format!(
                                        "n={n} u={u} v={v} faulty={faulty:?} pattern={pattern}: {got:?} vs {expected:?}"
                                    ));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        discrepancies <= ALLOWED_FAILURES && elapsed < RECEIPT_BUDGET,
        format!(
            "{cases} cases, {discrepancies} discrepancies, {elapsed:.1?}{}",
            first.map(|s| format!("; first {s}")).unwrap_or_default()
        ),
    )
}

fn report(id: usize, name: &str, o: &Outcome) {
    println!("{} criterion {id:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn main() -> ExitCode {
    // `cargo test` passes harness flags; a name filter selects nothing here.
    if std::env::args().skip(1).any(|a| !a.starts_with('-')) {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let mut results = Vec::new();
    let mut run = |id: usize, name: &str, o: Outcome| {
        report(id, name, &o);
        results.push(o.pass);
    };
    run(1, "connectivity oracle", connectivity_exhaustive());
    run(2, "boundary verdicts", boundary_verdicts());
    let (c5, c5_time) = timed(&c5_spec(ProtocolId::Alg1, true));
    let (fig1b, fig1b_time) = timed(&fig1b_spec(ProtocolId::Alg1, true));
    let sweeps = PhasedSweeps {
        c5,
        c5_time,
        fig1b,
        fig1b_time,
    };
    run(3, "alg1 exhaustive on C5", c5_alg1(&sweeps));
    run(4, "alg1 sweep on fig1b", fig1b_alg1(&sweeps));
    run(5, "alg2 sweeps", efficient_sweeps());
    run(6, "alg3 with t=0 matches alg1", hybrid_reduction());
    run(7, "alg3 hybrid sweep", hybrid_sweep());
    run(8, "per-phase invariants", invariants(&sweeps));
    run(9, "necessity demos", necessity());
    run(10, "reliable receipt oracle", reliable_receive());
    let passed = results.iter().filter(|&&p| p).count();
    println!(
        "acceptance: {passed}/{} criteria pass in {:.1} min",
        results.len(),
        start.elapsed().as_secs_f64() / MINUTE.as_secs_f64()
    );
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
