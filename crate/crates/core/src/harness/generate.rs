use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{vertex_connectivity, Graph};

use super::HarnessError;

/// Rejection-sampling budget for `random` graphs.
const RANDOM_ATTEMPTS: usize = 10_000;

/// Named graph families accepted by `gen-graph` and `--graph`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraphFamily {
    Cycle(usize),
    Complete(usize),
    Path(usize),
    /// The 8-node, 4-connected reference graph: `K_{4,4}`.
    Fig1b,
    /// A seeded random graph with vertex connectivity at least `k`.
    Random { n: usize, k: usize, seed: u64 },
}

impl FromStr for GraphFamily {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |reason: &str| HarnessError::Parse(format!("graph family `{s}`: {reason}"));
        let parts: Vec<&str> = s.split(':').collect();
        let num = |x: &str| x.parse::<usize>().map_err(|_| bad("expected a number"));
        match parts.as_slice() {
            ["fig1b"] => Ok(GraphFamily::Fig1b),
            ["cycle", n] => Ok(GraphFamily::Cycle(num(n)?)),
            ["complete", n] => Ok(GraphFamily::Complete(num(n)?)),
            ["path", n] => Ok(GraphFamily::Path(num(n)?)),
            ["random", n, k, seed] => Ok(GraphFamily::Random {
                n: num(n)?,
                k: num(k)?,
                seed: seed.parse().map_err(|_| bad("bad seed"))?,
            }),
            _ => Err(bad("expected cycle:n, complete:n, path:n, fig1b or random:n:k:seed")),
        }
    }
}

impl fmt::Display for GraphFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphFamily::Cycle(n) => write!(f, "cycle:{n}"),
            GraphFamily::Complete(n) => write!(f, "complete:{n}"),
            GraphFamily::Path(n) => write!(f, "path:{n}"),
            GraphFamily::Fig1b => f.write_str("fig1b"),
            GraphFamily::Random { n, k, seed } => write!(f, "random:{n}:{k}:{seed}"),
        }
    }
}

impl GraphFamily {
    pub fn generate(&self) -> Result<Graph, HarnessError> {
        match *self {
            GraphFamily::Cycle(n) => Ok(Graph::cycle(n)?),
            GraphFamily::Complete(n) => Ok(Graph::complete(n)?),
            GraphFamily::Path(n) => Ok(Graph::path(n)?),
            GraphFamily::Fig1b => Ok(Graph::complete_bipartite(4, 4)?),
            GraphFamily::Random { n, k, seed } => random_connected(n, k, seed),
        }
    }
}

/// Samples `G(n, p)` graphs from a ChaCha8 stream until one is
/// `k`-connected, raising `p` slowly so dense targets terminate.
fn random_connected(n: usize, k: usize, seed: u64) -> Result<Graph, HarnessError> {
    if n == 0 || k >= n {
        return Err(HarnessError::Unsatisfiable(format!("no graph on {n} nodes has connectivity {k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = if n > 1 { (k as f64 / (n - 1) as f64).max(0.1) } else { 1.0 };
    for attempt in 0..RANDOM_ATTEMPTS {
        let p = (base + attempt as f64 * 0.001).min(1.0);
        let mut g = Graph::new(n)?;
        for u in 0..n {
            for v in u + 1..n {
                if rng.gen_bool(p) {
                    g.add_edge(u, v)?;
                }
            }
        }
        if vertex_connectivity(&g) >= k {
            return Ok(g);
        }
    }
    Err(HarnessError::Unsatisfiable(format!(
        "no {k}-connected graph on {n} nodes after {RANDOM_ATTEMPTS} samples"
    )))
}
