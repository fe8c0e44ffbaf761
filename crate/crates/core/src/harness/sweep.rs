use std::fmt;

use itertools::Itertools;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::adversaries::StrategySpec;
use crate::graph::{Graph, NodeSet};
use crate::protocols::invariants::Violation;

use super::{HarnessError, Instance, ProtocolId, RunKey, StrategyAssignment};

/// Input vectors to sweep. Node `i`'s input is bit `i` of the index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputSpace {
    Exhaustive,
    Fixed(Vec<Vec<u8>>),
    /// Distinct vectors drawn with the sweep seed.
    Sampled(usize),
}

/// Fault placements to sweep.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FaultSpace {
    /// Every set of at most `k` nodes, the empty set included.
    UpTo(usize),
    /// Every set of exactly `k` nodes.
    Exactly(usize),
    Fixed(Vec<NodeSet>),
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub protocol: ProtocolId,
    pub graph: Graph,
    pub f: usize,
    pub t: usize,
    pub inputs: InputSpace,
    pub faults: FaultSpace,
    pub strategies: Vec<StrategySpec>,
    pub seed: u64,
    /// Also check per-phase invariants (candidate-set protocols only).
    pub check_invariants: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RunVerdict {
    Pass,
    Fail(Vec<String>),
    Error(String),
}

impl RunVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, RunVerdict::Pass)
    }
}

#[derive(Clone, Debug)]
pub struct RunRecord {
    pub index: usize,
    /// Carries the digest of the trace; `None` only if no trace exists.
    pub key: RunKey,
    pub verdict: RunVerdict,
    /// Common decision and its latest round, when all non-faulty nodes agree.
    pub decided: Option<(u8, usize)>,
    pub violations: Vec<Violation>,
}

impl fmt::Display for RunRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "run={} ", self.index)?;
        match &self.verdict {
            RunVerdict::Pass => f.write_str("verdict=pass")?,
            RunVerdict::Fail(r) => write!(f, "verdict=fail reasons=\"{}\"", r.join("; "))?,
            RunVerdict::Error(e) => write!(f, "verdict=error reason=\"{e}\"")?,
        }
        match self.decided {
            Some((v, r)) => write!(f, " decided={v}@{r}")?,
            None => f.write_str(" decided=-")?,
        }
        write!(f, " key={}", self.key)
    }
}

pub struct SweepReport {
    pub records: Vec<RunRecord>,
}

impl SweepReport {
    pub fn total(&self) -> usize {
        self.records.len()
    }

    pub fn passed(&self) -> usize {
        self.records.iter().filter(|r| r.verdict.passed()).count()
    }

    pub fn pass_rate(&self) -> f64 {
        if self.records.is_empty() {
            return 1.0;
        }
        self.passed() as f64 / self.total() as f64
    }

    pub fn failures(&self) -> impl Iterator<Item = &RunRecord> {
        self.records.iter().filter(|r| !r.verdict.passed())
    }

    pub fn violation_count(&self) -> usize {
        self.records.iter().map(|r| r.violations.len()).sum()
    }

    pub fn summary(&self) -> String {
        format!(
            "total={} passed={} failed={} pass_rate={:.4} violations={}",
            self.total(),
            self.passed(),
            self.total() - self.passed(),
            self.pass_rate(),
            self.violation_count()
        )
    }

    /// One line per run in sweep order, then the summary line.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s.push_str(&self.summary());
        s.push('\n');
        s
    }
}

impl SweepSpec {
    pub fn input_vectors(&self) -> Result<Vec<Vec<u8>>, HarnessError> {
        let n = self.graph.n();
        let from_index = |bits: usize| (0..n).map(|i| (bits >> i & 1) as u8).collect::<Vec<u8>>();
        match &self.inputs {
            InputSpace::Exhaustive => {
                if n > 16 {
                    return Err(HarnessError::Parse(format!("{n} nodes is too many for exhaustive inputs")));
                }
                Ok((0..1usize << n).map(from_index).collect())
            }
            InputSpace::Fixed(v) => Ok(v.clone()),
            InputSpace::Sampled(count) => {
                let space = 1usize.checked_shl(n as u32).filter(|_| n < 63).ok_or_else(|| {
                    HarnessError::Parse(format!("{n} nodes is too many for sampled inputs"))
                })?;
                if *count > space {
                    return Err(HarnessError::Parse(format!("cannot draw {count} distinct inputs from {space}")));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                Ok(sample(&mut rng, space, *count).into_iter().map(from_index).collect())
            }
        }
    }

    pub fn fault_sets(&self) -> Vec<NodeSet> {
        let n = self.graph.n();
        match &self.faults {
            FaultSpace::UpTo(k) => (0..=*k)
                .flat_map(|size| (0..n).combinations(size))
                .map(|c| c.into_iter().collect())
                .collect(),
            FaultSpace::Exactly(k) => (0..n).combinations(*k).map(|c| c.into_iter().collect()).collect(),
            FaultSpace::Fixed(v) => v.clone(),
        }
    }

    /// The first `t` members of each fault set equivocate.
    pub fn equivocators(&self, faulty: &NodeSet) -> NodeSet {
        faulty.iter().copied().take(self.t).collect()
    }

    /// Every run key in sweep order: fault sets, then strategies, then inputs.
    pub fn keys(&self) -> Result<Vec<RunKey>, HarnessError> {
        let inputs = self.input_vectors()?;
        let faults = self.fault_sets();
        let mut keys = Vec::with_capacity(inputs.len() * faults.len() * self.strategies.len());
        for faulty in &faults {
            let equivocating = self.equivocators(faulty);
            for strategy in &self.strategies {
                for input in &inputs {
                    keys.push(RunKey {
                        protocol: self.protocol,
                        f: self.f,
                        t: self.t,
                        graph: self.graph.clone(),
                        inputs: input.clone(),
                        faulty: faulty.clone(),
                        equivocating: equivocating.clone(),
                        strategy: StrategyAssignment::Uniform(strategy.clone()),
                        seed: self.seed,
                        digest: None,
                    });
                }
            }
        }
        Ok(keys)
    }
}

/// Runs every configuration of `spec` in parallel; records come back in
/// sweep order regardless of scheduling.
pub fn sweep(spec: &SweepSpec) -> Result<SweepReport, HarnessError> {
    let instance = Instance::new(spec.protocol, &spec.graph, spec.f, spec.t)?;
    let keys = spec.keys()?;
    let records = keys
        .into_par_iter()
        .enumerate()
        .map(|(index, key)| run_one(&instance, index, key, spec.check_invariants))
        .collect();
    Ok(SweepReport { records })
}

fn run_one(instance: &Instance, index: usize, mut key: RunKey, check_invariants: bool) -> RunRecord {
    let run = instance.run_key(&key, check_invariants);
    let (trace, verdict, violations) = match run {
        Ok(run) => {
            let mut reasons = instance.judge(&key.inputs, &run.trace);
            reasons.extend(run.violations.iter().map(|v| format!("invariant {v}")));
            let verdict = if reasons.is_empty() { RunVerdict::Pass } else { RunVerdict::Fail(reasons) };
            (Some(run.trace), verdict, run.violations)
        }
        Err(e) => {
            let partial = match &e {
                HarnessError::Run(r) => r.partial_trace().cloned(),
                _ => None,
            };
            (partial, RunVerdict::Error(e.to_string()), Vec::new())
        }
    };
    let decided = trace.as_ref().and_then(|t| {
        let mut ds = t.decisions.iter().filter(|(x, _)| !t.faulty.contains(x)).map(|(_, d)| d);
        let first = ds.next()?;
        let mut last = first.round;
        for d in ds {
            if d.value != first.value {
                return None;
            }
            last = last.max(d.round);
        }
        Some((first.value, last))
    });
    key.digest = trace.as_ref().map(|t| t.digest());
    RunRecord {
        index,
        key,
        verdict,
        decided,
        violations,
    }
}
