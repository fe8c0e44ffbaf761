use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::adversaries::StrategySpec;
use crate::graph::{Graph, NodeId, NodeSet};

use super::{HarnessError, ProtocolId};

/// Which faulty node runs which strategy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StrategyAssignment {
    Uniform(StrategySpec),
    PerNode(BTreeMap<NodeId, StrategySpec>),
}

impl StrategyAssignment {
    pub fn for_node(&self, x: NodeId) -> Result<&StrategySpec, HarnessError> {
        match self {
            StrategyAssignment::Uniform(s) => Ok(s),
            StrategyAssignment::PerNode(m) => m
                .get(&x)
                .ok_or_else(|| HarnessError::Parse(format!("no strategy for faulty node {x}"))),
        }
    }
}

/// `spec` for everyone, or `x=spec+y=spec` per node; empty for no
/// faulty nodes.
impl FromStr for StrategyAssignment {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.is_empty() {
            return Ok(StrategyAssignment::PerNode(BTreeMap::new()));
        }
        if !s.starts_with(|c: char| c.is_ascii_digit()) {
            return Ok(StrategyAssignment::Uniform(s.parse()?));
        }
        let mut map = BTreeMap::new();
        for part in s.split('+') {
            let (x, spec) = part
                .split_once('=')
                .ok_or_else(|| HarnessError::Parse(format!("expected node=strategy in `{part}`")))?;
            let x = x
                .parse()
                .map_err(|_| HarnessError::Parse(format!("bad node id in `{part}`")))?;
            if map.insert(x, spec.parse()?).is_some() {
                return Err(HarnessError::Parse(format!("node {x} assigned twice")));
            }
        }
        Ok(StrategyAssignment::PerNode(map))
    }
}

impl fmt::Display for StrategyAssignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyAssignment::Uniform(s) => write!(f, "{s}"),
            StrategyAssignment::PerNode(m) => {
                for (i, (x, s)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{x}={s}")?;
                }
                Ok(())
            }
        }
    }
}

/// Everything needed to rerun one execution, plus the digest of the trace
/// it produced.
///
/// Text form: `proto=alg1;f=1;t=0;graph=5:0-1.1-2;inputs=01011;faulty=2;
/// equivocating=;strategy=silent;seed=0;digest=...` on one line, with node
/// `i`'s input at position `i`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunKey {
    pub protocol: ProtocolId,
    pub f: usize,
    pub t: usize,
    pub graph: Graph,
    pub inputs: Vec<u8>,
    pub faulty: NodeSet,
    pub equivocating: NodeSet,
    pub strategy: StrategyAssignment,
    pub seed: u64,
    pub digest: Option<String>,
}

impl RunKey {
    pub fn without_digest(&self) -> RunKey {
        RunKey {
            digest: None,
            ..self.clone()
        }
    }
}

fn show_set(s: &NodeSet) -> String {
    s.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_set(s: &str) -> Result<NodeSet, HarnessError> {
    s.split(',')
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| HarnessError::Parse(format!("bad node id `{p}`"))))
        .collect()
}

/// Parses an input bitstring, node 0 first.
pub fn parse_bits(s: &str) -> Result<Vec<u8>, HarnessError> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(HarnessError::Parse(format!("bad input bit `{c}` in `{s}`"))),
        })
        .collect()
}

pub fn show_bits(bits: &[u8]) -> String {
    bits.iter().map(|b| char::from(b'0' + b)).collect()
}

impl fmt::Display for RunKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "proto={};f={};t={};graph={};inputs={};faulty={};equivocating={};strategy={};seed={}",
            self.protocol,
            self.f,
            self.t,
            self.graph.to_compact(),
            show_bits(&self.inputs),
            show_set(&self.faulty),
            show_set(&self.equivocating),
            self.strategy,
            self.seed
        )?;
        if let Some(d) = &self.digest {
            write!(f, ";digest={d}")?;
        }
        Ok(())
    }
}

impl FromStr for RunKey {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut fields = BTreeMap::new();
        for part in s.trim().split(';') {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| HarnessError::Parse(format!("bad key field `{part}`")))?;
            if fields.insert(k, v).is_some() {
                return Err(HarnessError::Parse(format!("key field `{k}` repeated")));
            }
        }
        let mut take = |k: &str| {
            fields
                .remove(k)
                .ok_or_else(|| HarnessError::Parse(format!("key is missing `{k}`")))
        };
        let num = |k: &str, v: &str| v.parse::<u64>().map_err(|_| HarnessError::Parse(format!("bad `{k}` value `{v}`")));
        let key = RunKey {
            protocol: take("proto")?.parse()?,
            f: num("f", take("f")?)? as usize,
            t: num("t", take("t")?)? as usize,
            graph: Graph::from_compact(take("graph")?)?,
            inputs: parse_bits(take("inputs")?)?,
            faulty: parse_set(take("faulty")?)?,
            equivocating: parse_set(take("equivocating")?)?,
            strategy: take("strategy")?.parse()?,
            seed: num("seed", take("seed")?)?,
            digest: fields.remove("digest").map(str::to_string),
        };
        if let Some(k) = fields.keys().next() {
            return Err(HarnessError::Parse(format!("unknown key field `{k}`")));
        }
        Ok(key)
    }
}
