//! Library of faulty-node behaviors and their textual specs.
//!
//! Spec strings:
//!
//! | spec | behavior |
//! |------|----------|
//! | `silent` | sends nothing |
//! | `constant:b` | runs the protocol but initiates every flood with `b` |
//! | `input-flip` | runs the protocol but initiates every flood with the flipped value |
//! | `tamper:all` | flips the value of every bit flood it forwards |
//! | `tamper:first-hop=x` | flips forwarded bit floods whose route starts at `x` |
//! | `tamper:via=x` | flips forwarded bit floods whose route contains `x` |
//! | `equivocate:3=0,4=1` | sends its initiations only to the listed neighbors, with the listed values |
//! | `equivocate:split` | sends `0` to even-indexed neighbors and `1` to odd-indexed ones |
//! | `script:<file>` | replays a script table verbatim |
//! | `A/B` | `A` for equivocating nodes, `B` for the rest |
//!
//! Behaviors other than `silent` and `script` wrap an honest copy of the
//! protocol and rewrite its output. If that copy fails, the node goes silent.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use thiserror::Error;

use crate::graph::NodeId;
use crate::message::Payload;
use crate::netsim::{Audience, Behavior, Delivery, NodeProtocol, Outgoing};
use crate::protocols::FaultyNode;

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error("bad strategy spec `{spec}`: {reason}")]
    Parse { spec: String, reason: String },
    #[error("strategy `{0}` needs an equivocating node")]
    NeedsEquivocation(String),
    #[error("node {node} has no neighbor {target}")]
    NotANeighbor { node: NodeId, target: NodeId },
    #[error("script line {line}: {reason}")]
    Script { line: usize, reason: String },
    #[error("reading script {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TamperRule {
    All,
    FirstHop(NodeId),
    Via(NodeId),
}

impl TamperRule {
    fn matches(&self, route: crate::message::Route) -> bool {
        match *self {
            TamperRule::All => !route.is_empty(),
            TamperRule::FirstHop(x) => route.first() == Some(x),
            TamperRule::Via(x) => route.contains(x),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum EquivocationPlan {
    /// Explicit per-neighbor values; unlisted neighbors get nothing.
    Targets(BTreeMap<NodeId, u8>),
    /// Alternating values by neighbor index.
    Split,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum StrategySpec {
    Silent,
    Constant(u8),
    InputFlip,
    Tamper(TamperRule),
    Equivocate(EquivocationPlan),
    Script(PathBuf),
    /// First for equivocating nodes, second for the rest.
    ByRole(Box<StrategySpec>, Box<StrategySpec>),
}

impl StrategySpec {
    /// The strategy a node with this equivocation flag actually runs.
    pub fn for_role(&self, equivocating: bool) -> &StrategySpec {
        match self {
            StrategySpec::ByRole(a, b) => {
                if equivocating {
                    a.for_role(true)
                } else {
                    b.for_role(false)
                }
            }
            other => other,
        }
    }

    pub fn needs_equivocation(&self) -> bool {
        matches!(self, StrategySpec::Equivocate(_))
    }

    /// Whether the behavior wraps an honest copy of the protocol.
    pub fn needs_shadow(&self) -> bool {
        matches!(
            self,
            StrategySpec::Constant(_) | StrategySpec::InputFlip | StrategySpec::Tamper(_) | StrategySpec::Equivocate(_)
        )
    }
}

fn parse_bit(s: &str) -> Option<u8> {
    match s {
        "0" => Some(0),
        "1" => Some(1),
        _ => None,
    }
}

impl FromStr for StrategySpec {
    type Err = AdversaryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| AdversaryError::Parse {
            spec: s.to_string(),
            reason: reason.to_string(),
        };
        if let Some(rest) = s.strip_prefix("script:") {
            if rest.is_empty() {
                return Err(bad("missing file"));
            }
            return Ok(StrategySpec::Script(PathBuf::from(rest)));
        }
        if let Some((a, b)) = s.split_once('/') {
            return Ok(StrategySpec::ByRole(Box::new(a.parse()?), Box::new(b.parse()?)));
        }
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        let node = |v: &str| v.parse::<NodeId>().map_err(|_| bad("bad node id"));
        match (head, arg) {
            ("silent", None) => Ok(StrategySpec::Silent),
            ("input-flip", None) => Ok(StrategySpec::InputFlip),
            ("constant", Some(b)) => parse_bit(b).map(StrategySpec::Constant).ok_or_else(|| bad("bit must be 0 or 1")),
            ("tamper", Some("all")) => Ok(StrategySpec::Tamper(TamperRule::All)),
            ("tamper", Some(rule)) => match rule.split_once('=') {
                Some(("first-hop", x)) => Ok(StrategySpec::Tamper(TamperRule::FirstHop(node(x)?))),
                Some(("via", x)) => Ok(StrategySpec::Tamper(TamperRule::Via(node(x)?))),
                _ => Err(bad("expected all, first-hop=x or via=x")),
            },
            ("equivocate", Some("split")) => Ok(StrategySpec::Equivocate(EquivocationPlan::Split)),
            ("equivocate", Some(list)) => {
                let mut targets = BTreeMap::new();
                for pair in list.split(',') {
                    let (x, b) = pair.split_once('=').ok_or_else(|| bad("expected node=bit"))?;
                    let b = parse_bit(b).ok_or_else(|| bad("bit must be 0 or 1"))?;
                    if targets.insert(node(x)?, b).is_some() {
                        return Err(bad("neighbor listed twice"));
                    }
                }
                Ok(StrategySpec::Equivocate(EquivocationPlan::Targets(targets)))
            }
            _ => Err(bad("unknown strategy")),
        }
    }
}

impl fmt::Display for StrategySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategySpec::Silent => f.write_str("silent"),
            StrategySpec::Constant(b) => write!(f, "constant:{b}"),
            StrategySpec::InputFlip => f.write_str("input-flip"),
            StrategySpec::Tamper(TamperRule::All) => f.write_str("tamper:all"),
            StrategySpec::Tamper(TamperRule::FirstHop(x)) => write!(f, "tamper:first-hop={x}"),
            StrategySpec::Tamper(TamperRule::Via(x)) => write!(f, "tamper:via={x}"),
            StrategySpec::Equivocate(EquivocationPlan::Split) => f.write_str("equivocate:split"),
            StrategySpec::Equivocate(EquivocationPlan::Targets(t)) => {
                f.write_str("equivocate:")?;
                for (i, (x, b)) in t.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{x}={b}")?;
                }
                Ok(())
            }
            StrategySpec::Script(p) => write!(f, "script:{}", p.display()),
            StrategySpec::ByRole(a, b) => write!(f, "{a}/{b}"),
        }
    }
}

/// Transmissions to replay, keyed by round.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ScriptTable {
    entries: Vec<(usize, Audience, Payload)>,
}

impl ScriptTable {
    pub fn new(mut entries: Vec<(usize, Audience, Payload)>) -> Self {
        entries.sort_by_key(|e| e.0);
        Self { entries }
    }

    pub fn entries(&self) -> &[(usize, Audience, Payload)] {
        &self.entries
    }

    pub fn has_targeted(&self) -> bool {
        self.entries.iter().any(|e| e.1 != Audience::Broadcast)
    }

    /// One line per transmission: `round audience payload-hex`.
    pub fn to_text(&self) -> String {
        self.entries
            .iter()
            .map(|(r, a, p)| format!("{r} {a} {}\n", hex::encode(p.encode())))
            .collect()
    }

    pub fn parse(text: &str) -> Result<Self, AdversaryError> {
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |reason: &str| AdversaryError::Script {
                line: i + 1,
                reason: reason.to_string(),
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 3 {
                return Err(bad("expected `round audience payload-hex`"));
            }
            let round = fields[0].parse().map_err(|_| bad("bad round"))?;
            let audience = match fields[1] {
                "*" => Audience::Broadcast,
                a => Audience::Targeted(
                    a.strip_prefix('@')
                        .and_then(|x| x.parse().ok())
                        .ok_or_else(|| bad("audience must be * or @node"))?,
                ),
            };
            let bytes = hex::decode(fields[2]).map_err(|_| bad("bad payload hex"))?;
            entries.push((round, audience, Payload::from_bytes(&bytes)));
        }
        Ok(Self::new(entries))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, AdversaryError> {
        let text = std::fs::read_to_string(path).map_err(|source| AdversaryError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }
}

struct Silent;

impl Behavior for Silent {
    fn act(&mut self, _: usize, _: &[Delivery<'_>]) -> Vec<Outgoing> {
        Vec::new()
    }
}

struct Scripted {
    table: ScriptTable,
    next: usize,
}

impl Behavior for Scripted {
    fn act(&mut self, round: usize, _: &[Delivery<'_>]) -> Vec<Outgoing> {
        let entries = &self.table.entries;
        while self.next < entries.len() && entries[self.next].0 < round {
            self.next += 1;
        }
        let mut out = Vec::new();
        while self.next < entries.len() && entries[self.next].0 == round {
            let (_, audience, payload) = &entries[self.next];
            out.push(Outgoing {
                audience: *audience,
                payload: payload.clone(),
            });
            self.next += 1;
        }
        out
    }
}

#[derive(Clone, Copy)]
enum Rewrite {
    Constant(u8),
    Flip,
    Tamper(TamperRule),
}

/// Runs an honest copy and rewrites what it sends.
struct Shadowed {
    honest: Option<Box<dyn NodeProtocol + Send>>,
    rewrite: Option<Rewrite>,
    /// `(neighbor, value)` pairs for targeted initiations.
    targets: Option<Vec<(NodeId, u8)>>,
}

fn initiation(p: &Payload) -> Option<u8> {
    match p {
        Payload::Bit { value, route } | Payload::Decision { value, route } if route.is_empty() => Some(*value),
        _ => None,
    }
}

fn with_value(p: &Payload, value: u8) -> Payload {
    match p {
        Payload::Bit { route, .. } => Payload::Bit { value, route: *route },
        Payload::Decision { route, .. } => Payload::Decision { value, route: *route },
        other => other.clone(),
    }
}

impl Behavior for Shadowed {
    fn act(&mut self, round: usize, inbox: &[Delivery<'_>]) -> Vec<Outgoing> {
        let Some(honest) = self.honest.as_mut() else {
            return Vec::new();
        };
        let Ok(step) = honest.step(round, inbox) else {
            self.honest = None;
            return Vec::new();
        };
        let mut out = Vec::new();
        for p in step.broadcasts {
            let init = initiation(&p);
            let p = match (self.rewrite, init, &p) {
                (Some(Rewrite::Constant(b)), Some(_), _) => with_value(&p, b),
                (Some(Rewrite::Flip), Some(v), _) => with_value(&p, 1 - v),
                (Some(Rewrite::Tamper(rule)), None, Payload::Bit { value, route }) if rule.matches(*route) => {
                    with_value(&p, 1 - value)
                }
                _ => p,
            };
            match (&self.targets, init) {
                (Some(targets), Some(_)) => {
                    for &(x, b) in targets {
                        out.push(Outgoing {
                            audience: Audience::Targeted(x),
                            payload: with_value(&p, b),
                        });
                    }
                }
                _ => out.push(Outgoing::broadcast(p)),
            }
        }
        out
    }
}

/// Instantiates `spec` for `node`.
///
/// `neighbors` is the node's neighbor list and `shadow` builds the honest
/// protocol copy; it is called only when the strategy needs one.
pub fn build_faulty(
    spec: &StrategySpec,
    node: NodeId,
    neighbors: &[NodeId],
    equivocating: bool,
    shadow: impl FnOnce() -> Box<dyn NodeProtocol + Send>,
) -> Result<FaultyNode, AdversaryError> {
    let spec = spec.for_role(equivocating);
    if spec.needs_equivocation() && !equivocating {
        return Err(AdversaryError::NeedsEquivocation(spec.to_string()));
    }
    let behavior: Box<dyn Behavior + Send> = match spec {
        StrategySpec::Silent => Box::new(Silent),
        StrategySpec::Script(path) => {
            let table = ScriptTable::load(path)?;
            if table.has_targeted() && !equivocating {
                return Err(AdversaryError::NeedsEquivocation(spec.to_string()));
            }
            Box::new(Scripted { table, next: 0 })
        }
        StrategySpec::ByRole(..) => unreachable!("resolved by for_role"),
        StrategySpec::Constant(b) => shadowed(shadow(), Some(Rewrite::Constant(*b)), None),
        StrategySpec::InputFlip => shadowed(shadow(), Some(Rewrite::Flip), None),
        StrategySpec::Tamper(rule) => shadowed(shadow(), Some(Rewrite::Tamper(*rule)), None),
        StrategySpec::Equivocate(plan) => {
            let targets = match plan {
                EquivocationPlan::Split => neighbors.iter().enumerate().map(|(i, &x)| (x, (i % 2) as u8)).collect(),
                EquivocationPlan::Targets(t) => {
                    for &x in t.keys() {
                        if !neighbors.contains(&x) {
                            return Err(AdversaryError::NotANeighbor { node, target: x });
                        }
                    }
                    t.iter().map(|(&x, &b)| (x, b)).collect()
                }
            };
            shadowed(shadow(), None, Some(targets))
        }
    };
    Ok(FaultyNode { behavior, equivocating })
}

/// A scripted faulty node built from an in-memory table.
pub fn scripted(table: ScriptTable, equivocating: bool) -> FaultyNode {
    FaultyNode {
        behavior: Box::new(Scripted { table, next: 0 }),
        equivocating,
    }
}

fn shadowed(
    honest: Box<dyn NodeProtocol + Send>,
    rewrite: Option<Rewrite>,
    targets: Option<Vec<(NodeId, u8)>>,
) -> Box<dyn Behavior + Send> {
    Box::new(Shadowed {
        honest: Some(honest),
        rewrite,
        targets,
    })
}
