use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lbcast::adversaries::StrategySpec;
use lbcast::feasibility::{check, FaultModel};
use lbcast::graph::{Graph, NodeSet};
use lbcast::harness::{
    parse_bits, replay, sweep, FaultSpace, GraphFamily, InputSpace, Instance, ProtocolId, RunKey,
    StrategyAssignment, SweepSpec,
};
use lbcast::indistinguishability::{build_split_network, derive_executions, Construction, DemoOutcome, SplitSpec};
use lbcast::netsim::ExecutionTrace;

#[derive(Parser)]
#[command(name = "lbcast", version, about = "Byzantine consensus under local broadcast")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check whether consensus is achievable on a graph.
    Check(CheckArgs),
    /// Run one execution.
    Run(RunArgs),
    /// Run every combination of inputs, fault sets and strategies.
    Sweep(SweepArgs),
    /// Rerun an execution from its key and verify the trace digest.
    Replay(ReplayArgs),
    /// Build the split-network executions that defeat a protocol on a
    /// graph that fails the feasibility conditions.
    DemoNecessity(DemoArgs),
    /// Print a graph from a named family.
    GenGraph(GenArgs),
}

#[derive(Args)]
struct GraphArg {
    /// Graph file, or a family such as `cycle:5` or `fig1b`.
    #[arg(long)]
    graph: String,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    f: usize,
    /// Equivocating faults; nonzero selects the hybrid model.
    #[arg(long, default_value_t = 0)]
    t: usize,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long, default_value = "alg1")]
    protocol: ProtocolId,
    #[arg(long)]
    f: usize,
    #[arg(long, default_value_t = 0)]
    t: usize,
    /// Input bitstring, node 0 first.
    #[arg(long)]
    inputs: String,
    /// Comma-separated faulty node ids.
    #[arg(long, default_value = "")]
    faulty: String,
    /// Comma-separated equivocating ids; defaults to the first `t` faulty nodes.
    #[arg(long)]
    equivocating: Option<String>,
    /// One strategy for all faulty nodes, or `x=spec+y=spec`.
    #[arg(long, default_value = "silent")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory for `trace.txt` and `key.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long, default_value = "alg1")]
    protocol: ProtocolId,
    #[arg(long)]
    f: usize,
    #[arg(long, default_value_t = 0)]
    t: usize,
    /// `exhaustive`, `sample:<count>`, or a bitstring.
    #[arg(long, default_value = "exhaustive")]
    inputs: String,
    /// `exhaustive` (all sets up to f), `size=<k>`, or comma-separated ids.
    #[arg(long, default_value = "exhaustive")]
    faulty: String,
    /// Comma-separated strategies.
    #[arg(long, default_value = "silent")]
    strategy: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also check per-phase invariants.
    #[arg(long)]
    invariants: bool,
    /// Directory for `sweep.txt` and `failures.txt`; records go to stdout
    /// without it.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// A run key, or `@file` to read one.
    #[arg(long)]
    key: String,
    /// Directory for the replayed `trace.txt`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DemoArgs {
    #[command(flatten)]
    graph: GraphArg,
    #[arg(long)]
    f: usize,
    #[arg(long, default_value_t = 0)]
    t: usize,
    #[arg(long)]
    construction: Construction,
    /// Defaults to alg3 for hybrid constructions and alg1 otherwise.
    #[arg(long)]
    protocol: Option<ProtocolId>,
    /// Directory for traces, fault scripts and replay keys.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// `cycle:n`, `complete:n`, `path:n`, `fig1b` or `random:n:k:seed`.
    family: GraphFamily,
    /// Write to this file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_graph(arg: &GraphArg) -> Result<Graph> {
    let path = Path::new(&arg.graph);
    if path.exists() {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        return Graph::parse(&text).with_context(|| format!("parsing {}", path.display()));
    }
    match arg.graph.parse::<GraphFamily>() {
        Ok(family) => Ok(family.generate()?),
        Err(_) => bail!("`{}` is neither a graph file nor a graph family", arg.graph),
    }
}

fn parse_ids(s: &str) -> Result<NodeSet> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().with_context(|| format!("bad node id `{p}`")))
        .collect()
}

fn show_ids(s: &NodeSet) -> String {
    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Splits a strategy list on commas, keeping `equivocate:1=0,2=1` whole.
fn parse_strategies(s: &str) -> Result<Vec<StrategySpec>> {
    let mut parts: Vec<String> = Vec::new();
    for piece in s.split(',') {
        match parts.last_mut() {
            Some(last) if piece.starts_with(|c: char| c.is_ascii_digit()) => {
                last.push(',');
                last.push_str(piece);
            }
            _ => parts.push(piece.to_string()),
        }
    }
    parts
        .iter()
        .map(|p| p.parse().with_context(|| format!("strategy `{p}`")))
        .collect()
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn verdict_line(reasons: &[String]) -> String {
    if reasons.is_empty() {
        "verdict=pass".to_string()
    } else {
        format!("verdict=fail reasons=\"{}\"", reasons.join("; "))
    }
}

fn cmd_check(args: CheckArgs) -> Result<bool> {
    let g = load_graph(&args.graph)?;
    let model = if args.t == 0 {
        FaultModel::local_broadcast(args.f)
    } else {
        FaultModel::hybrid(args.f, args.t)?
    };
    let report = check(&g, &model)?;
    print!("{report}");
    println!("{}", report.record());
    Ok(report.achievable)
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let g = load_graph(&args.graph)?;
    let faulty = parse_ids(&args.faulty)?;
    let equivocating = match &args.equivocating {
        Some(s) => parse_ids(s)?,
        None => faulty.iter().copied().take(args.t).collect(),
    };
    let mut key = RunKey {
        protocol: args.protocol,
        f: args.f,
        t: args.t,
        graph: g,
        inputs: parse_bits(&args.inputs)?,
        faulty,
        equivocating,
        strategy: args.strategy.parse()?,
        seed: args.seed,
        digest: None,
    };
    let instance = Instance::new(key.protocol, &key.graph, key.f, key.t)?;
    let run = instance.run_key(&key, false)?;
    key.digest = Some(run.trace.digest());
    for (x, d) in &run.trace.decisions {
        println!("node {x} decided {} at round {}", d.value, d.round);
    }
    let reasons = instance.judge(&key.inputs, &run.trace);
    println!("{}", verdict_line(&reasons));
    println!("key={key}");
    if let Some(out) = &args.out {
        write_file(&out.join("trace.txt"), &run.trace.to_text())?;
        write_file(&out.join("key.txt"), &format!("{key}\n"))?;
    }
    Ok(reasons.is_empty())
}

fn cmd_sweep(args: SweepArgs) -> Result<bool> {
    let graph = load_graph(&args.graph)?;
    let inputs = match args.inputs.as_str() {
        "exhaustive" => InputSpace::Exhaustive,
        s => match s.strip_prefix("sample:") {
            Some(count) => InputSpace::Sampled(count.parse().context("bad sample count")?),
            None => InputSpace::Fixed(vec![parse_bits(s)?]),
        },
    };
    let faults = match args.faulty.as_str() {
        "exhaustive" => FaultSpace::UpTo(args.f),
        s => match s.strip_prefix("size=") {
            Some(k) => FaultSpace::Exactly(k.parse().context("bad fault set size")?),
            None => FaultSpace::Fixed(vec![parse_ids(s)?]),
        },
    };
    let spec = SweepSpec {
        protocol: args.protocol,
        graph,
        f: args.f,
        t: args.t,
        inputs,
        faults,
        strategies: parse_strategies(&args.strategy)?,
        seed: args.seed,
        check_invariants: args.invariants,
    };
    let expected = spec.input_vectors()?.len() * spec.fault_sets().len() * spec.strategies.len();
    let report = sweep(&spec)?;
    let failures: String = report.failures().map(|r| format!("{}\n", r.key)).collect();
    match &args.out {
        Some(out) => {
            write_file(&out.join("sweep.txt"), &report.to_text())?;
            write_file(&out.join("failures.txt"), &failures)?;
        }
        None => {
            for r in &report.records {
                println!("{r}");
            }
        }
    }
    for r in report.failures() {
        println!("failing key={}", r.key);
    }
    println!("{} expected={expected}", report.summary());
    Ok(report.total() == expected && report.passed() == report.total())
}

fn cmd_replay(args: ReplayArgs) -> Result<bool> {
    let text = match args.key.strip_prefix('@') {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => args.key.clone(),
    };
    let key: RunKey = text.trim().parse()?;
    let (trace, reasons) = replay(&key)?;
    println!("digest={} matches", trace.digest());
    print!("{}", trace.decide_block());
    println!("{}", verdict_line(&reasons));
    if let Some(out) = &args.out {
        write_file(&out.join("trace.txt"), &trace.to_text())?;
    }
    Ok(reasons.is_empty())
}

/// Everything but the header: what the nodes did.
fn same_behavior(a: &ExecutionTrace, b: &ExecutionTrace) -> bool {
    a.transmissions == b.transmissions && a.decisions == b.decisions && a.rounds == b.rounds
}

fn cmd_demo(args: DemoArgs) -> Result<bool> {
    let g = load_graph(&args.graph)?;
    let protocol = args.protocol.unwrap_or(if args.construction.is_hybrid() {
        ProtocolId::Alg3
    } else {
        ProtocolId::Alg1
    });
    let Some(spec) = SplitSpec::find(&g, args.construction, args.f, args.t) else {
        bail!("no {} split exists on this graph for f={} t={}", args.construction, args.f, args.t);
    };
    println!("split {spec}");
    let net = build_split_network(&g, &spec)?;
    net.check_hearing()?;
    println!("hearing=ok copies={}", net.copies().len());
    let instance = Instance::new(protocol, &g, args.f, args.t)?;
    let budget = instance.protocol().default_budget();
    let report = derive_executions(&net, instance.protocol(), None)?;
    if let Some(e) = &report.split_error {
        println!("split run aborted: {e}");
    }
    let mut replay_ok = true;
    for exec in &report.executions {
        println!(
            "{} faulty={{{}}} equivocating={{{}}} {}",
            exec.name,
            show_ids(&exec.faulty),
            show_ids(&exec.equivocating),
            exec.outcome
        );
        let again = exec.replay(instance.protocol(), budget)?;
        replay_ok &= again.digest() == exec.trace.digest();
        let Some(out) = &args.out else { continue };
        let dir = out.join(&exec.name);
        write_file(&dir.join("trace.txt"), &exec.trace.to_text())?;
        let mut strategies = std::collections::BTreeMap::new();
        for (x, table) in &exec.scripts {
            let path = dir.join(format!("node{x}.script"));
            write_file(&path, &table.to_text())?;
            let path = fs::canonicalize(&path)?;
            strategies.insert(*x, StrategySpec::Script(path));
        }
        let mut key = RunKey {
            protocol,
            f: args.f,
            t: args.t,
            graph: g.clone(),
            inputs: exec.inputs.clone(),
            faulty: exec.faulty.clone(),
            equivocating: exec.equivocating.clone(),
            strategy: StrategyAssignment::PerNode(strategies),
            seed: 0,
            digest: None,
        };
        let keyed = match instance.run_key(&key, false) {
            Ok(run) => run.trace,
            Err(lbcast::harness::HarnessError::Run(e)) => match e.partial_trace() {
                Some(t) => t.clone(),
                None => return Err(e.into()),
            },
            Err(e) => return Err(e.into()),
        };
        replay_ok &= same_behavior(&keyed, &exec.trace);
        key.digest = Some(keyed.digest());
        write_file(&dir.join("key.txt"), &format!("{key}\n"))?;
    }
    if let Some(out) = &args.out {
        write_file(&out.join("split.dot"), &net.to_dot())?;
        write_file(&out.join("split-trace.txt"), &report.split_trace.to_text())?;
    }
    let demonstrated = report.outcome != DemoOutcome::NoViolation;
    println!(
        "verdict={} outcome=\"{}\" replay={}",
        if demonstrated && replay_ok { "pass" } else { "fail" },
        report.outcome,
        if replay_ok { "deterministic" } else { "diverged" }
    );
    Ok(demonstrated && replay_ok)
}

fn cmd_gen(args: GenArgs) -> Result<bool> {
    let g = args.family.generate()?;
    match &args.out {
        Some(path) => write_file(path, &g.to_text())?,
        None => print!("{}", g.to_text()),
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check(a) => cmd_check(a),
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Replay(a) => cmd_replay(a),
        Command::DemoNecessity(a) => cmd_demo(a),
        Command::GenGraph(a) => cmd_gen(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
