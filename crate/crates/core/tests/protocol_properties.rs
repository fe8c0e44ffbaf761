use std::collections::BTreeMap;

use lbcast::graph::{Graph, NodeSet};
use lbcast::harness::{Instance, ProtocolId, RunKey, StrategyAssignment};
use lbcast::message::Payload;
use lbcast::netsim::{Audience, ExecutionTrace};
use lbcast::protocols::phased::{run_phased, PhasedContext};
use lbcast::protocols::{FaultyNodes, RunOptions};
use lbcast::adversaries::{build_faulty, StrategySpec};
use proptest::prelude::*;

/// Non-equivocating library strategies on an `n`-node graph.
fn plain_strategy(n: usize) -> impl Strategy<Value = String> {
    prop_oneof![
        Just("silent".to_string()),
        Just("constant:0".to_string()),
        Just("constant:1".to_string()),
        Just("input-flip".to_string()),
        Just("tamper:all".to_string()),
        (0..n).prop_map(|x| format!("tamper:first-hop={x}")),
        (0..n).prop_map(|x| format!("tamper:via={x}")),
    ]
}

fn equivocating_strategy(n: usize) -> impl Strategy<Value = String> {
    prop_oneof![
        Just("equivocate:split".to_string()),
        plain_strategy(n),
    ]
}

fn fault_set(n: usize, f: usize) -> impl Strategy<Value = NodeSet> {
    proptest::collection::btree_set(0..n, 0..=f)
}

fn inputs(n: usize) -> impl Strategy<Value = Vec<u8>> {
    proptest::collection::vec(0u8..2, n)
}

/// Structural facts every trace must satisfy on `g`.
fn check_trace(g: &Graph, trace: &ExecutionTrace) -> Result<(), TestCaseError> {
    for t in &trace.transmissions {
        match t.audience {
            Audience::Broadcast => prop_assert_eq!(&t.receivers[..], g.neighbors(t.sender)),
            Audience::Targeted(x) => {
                prop_assert!(trace.equivocating.contains(&t.sender));
                prop_assert_eq!(&t.receivers[..], &[x][..]);
            }
        }
    }
    for x in 0..g.n() {
        prop_assert_eq!(trace.decisions.contains_key(&x), !trace.faulty.contains(&x));
    }
    Ok(())
}

fn run(protocol: ProtocolId, g: &Graph, f: usize, t: usize, inputs: Vec<u8>, faulty: NodeSet, strategy: &str) -> Result<(), TestCaseError> {
    let instance = Instance::new(protocol, g, f, t).unwrap();
    let key = RunKey {
        protocol,
        f,
        t,
        graph: g.clone(),
        equivocating: faulty.iter().copied().take(t).collect(),
        inputs,
        faulty,
        strategy: StrategyAssignment::Uniform(strategy.parse().unwrap()),
        seed: 0,
        digest: None,
    };
    let first = instance.run_key(&key, false).unwrap().trace;
    let reasons = instance.judge(&key.inputs, &first);
    prop_assert!(reasons.is_empty(), "{}: {:?}", key, reasons);
    check_trace(g, &first)?;
    let second = instance.run_key(&key, false).unwrap().trace;
    // structural equality; alg2 text traces run to hundreds of megabytes
    prop_assert!(first == second);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn alg1_on_c5(inp in inputs(5), faulty in fault_set(5, 1), s in plain_strategy(5)) {
        run(ProtocolId::Alg1, &Graph::cycle(5).unwrap(), 1, 0, inp, faulty, &s)?;
    }

    #[test]
    fn alg1_on_k4(inp in inputs(4), faulty in fault_set(4, 1), s in plain_strategy(4)) {
        run(ProtocolId::Alg1, &Graph::complete(4).unwrap(), 1, 0, inp, faulty, &s)?;
    }

    #[test]
    fn alg1_on_fig1b(inp in inputs(8), faulty in fault_set(8, 2), s in plain_strategy(8)) {
        run(ProtocolId::Alg1, &Graph::complete_bipartite(4, 4).unwrap(), 2, 0, inp, faulty, &s)?;
    }

    #[test]
    fn alg2_on_c5_and_fig1b(inp in inputs(8), faulty in fault_set(8, 2), s in plain_strategy(8)) {
        let small: NodeSet = faulty.iter().copied().filter(|&x| x < 5).take(1).collect();
        run(ProtocolId::Alg2, &Graph::cycle(5).unwrap(), 1, 0, inp[..5].to_vec(), small, &s)?;
        run(ProtocolId::Alg2, &Graph::complete_bipartite(4, 4).unwrap(), 2, 0, inp, faulty, &s)?;
    }

    #[test]
    fn alg3_on_k6(inp in inputs(6), faulty in fault_set(6, 2), s in equivocating_strategy(6), rest in plain_strategy(6)) {
        let strategy = format!("{s}/{rest}");
        run(ProtocolId::Alg3, &Graph::complete(6).unwrap(), 2, 1, inp, faulty, &strategy)?;
    }

    /// Two non-faulty nodes that record a value along routes whose only
    /// faulty node is a non-equivocating initiator record the same value.
    #[test]
    fn equivocation_is_futile(inp in inputs(8), faulty in fault_set(8, 2), s in plain_strategy(8)) {
        let g = Graph::complete_bipartite(4, 4).unwrap();
        let ctx = PhasedContext::new(&g, 2, 0).unwrap();
        let spec: StrategySpec = s.parse().unwrap();
        let mut nodes = FaultyNodes::new();
        for &x in &faulty {
            let node = build_faulty(&spec, x, g.neighbors(x), false, || Box::new(ctx.node(x, inp[x], false))).unwrap();
            nodes.insert(x, node);
        }
        let opts = RunOptions { keep_tables: true, ..Default::default() };
        let run = run_phased(&ctx, &inp, nodes, opts).unwrap();
        let mask = faulty.iter().fold(0u64, |m, &x| m | 1 << x);
        let phases = run.nodes.iter().flatten().map(|s| s.history().len()).min().unwrap();
        for p in 0..phases {
            let mut seen: BTreeMap<usize, u8> = BTreeMap::new();
            for state in run.nodes.iter().flatten() {
                for &(route, value) in state.history()[p].ledger.as_ref().unwrap() {
                    let u = route.get(0);
                    if mask >> u & 1 == 1 && route.mask() & mask == 1 << u {
                        let prior = *seen.entry(u).or_insert(value);
                        prop_assert_eq!(prior, value, "phase {} initiator {}", p, u);
                    }
                }
            }
        }
    }
}

#[test]
fn broadcasts_fan_out_one_payload() {
    let g = Graph::complete_bipartite(4, 4).unwrap();
    let instance = Instance::new(ProtocolId::Alg1, &g, 2, 0).unwrap();
    let key: RunKey = format!(
        "proto=alg1;f=2;t=0;graph={};inputs=01100101;faulty=1,6;equivocating=;strategy=tamper:all;seed=0",
        g.to_compact()
    )
    .parse()
    .unwrap();
    let trace = instance.run_key(&key, false).unwrap().trace;
    // one transmission per broadcast: each receiver sees the same payload object
    for t in &trace.transmissions {
        assert_eq!(t.audience, Audience::Broadcast);
        if let Payload::Bit { route, .. } = &t.payload {
            assert!(route.len() < g.n());
        }
    }
}
