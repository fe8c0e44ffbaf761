//! Reliable receipt of a flooded value.
//!
//! `v` reliably receives `b` from `u` when `v = u` holds `b`, when `v` is a
//! neighbor of `u` and took `b` directly from `u`, or when `b` arrived along
//! `f + 1` internally disjoint `uv`-paths.

use crate::graph::{Graph, NodeId, Path, PathFamily};
use crate::message::Route;
use crate::packing::pick_disjoint;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Justification {
    Own,
    Neighbor,
    Paths(PathFamily),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReliableReceipt {
    pub source: NodeId,
    pub value: u8,
    pub justification: Justification,
}

/// The value `me` reliably received from `source`, given `me`'s own value and
/// its accepted `(route, value)` pairs (routes start at the initiator and
/// exclude `me`). Values are tried in the order `0`, `1`.
pub fn reliable_receipt(
    g: &Graph,
    me: NodeId,
    source: NodeId,
    own: u8,
    entries: &[(Route, u8)],
    f: usize,
) -> Option<ReliableReceipt> {
    if me == source {
        return Some(ReliableReceipt {
            source,
            value: own,
            justification: Justification::Own,
        });
    }
    if g.has_edge(me, source) {
        let direct = Route::from_nodes(&[source])?;
        let value = entries.iter().find(|(r, _)| *r == direct).map(|&(_, v)| v)?;
        return Some(ReliableReceipt {
            source,
            value,
            justification: Justification::Neighbor,
        });
    }
    let (value, picked) = disjoint_value(source, entries, f)?;
    let paths = picked
        .into_iter()
        .map(|r| {
            let mut nodes = r.to_vec();
            nodes.push(me);
            Path::new(g, nodes).expect("accepted routes are simple paths")
        })
        .collect();
    let family = PathFamily::between(paths).expect("picked routes are disjoint");
    Some(ReliableReceipt {
        source,
        value,
        justification: Justification::Paths(family),
    })
}

/// Clause three alone: the first value in `0, 1` carried by `f + 1` routes
/// from `source` with pairwise disjoint internal nodes.
pub(crate) fn disjoint_value(source: NodeId, entries: &[(Route, u8)], f: usize) -> Option<(u8, Vec<Route>)> {
    for delta in [0u8, 1] {
        let routes: Vec<Route> = entries
            .iter()
            .filter(|(r, v)| *v == delta && r.first() == Some(source))
            .map(|&(r, _)| r)
            .collect();
        let masks: Vec<u64> = routes.iter().map(|r| r.mask() & !(1 << source)).collect();
        if let Some(idx) = pick_disjoint(&masks, f + 1) {
            return Some((delta, idx.into_iter().map(|i| routes[i]).collect()));
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(xs: &[NodeId]) -> Route {
        Route::from_nodes(xs).unwrap()
    }

    #[test]
    fn own_and_neighbor() {
        let g = Graph::cycle(5).unwrap();
        let entries = vec![(r(&[1]), 0), (r(&[4]), 1)];
        let own = reliable_receipt(&g, 0, 0, 1, &entries, 1).unwrap();
        assert_eq!((own.value, own.justification), (1, Justification::Own));
        let nb = reliable_receipt(&g, 0, 4, 0, &entries, 1).unwrap();
        assert_eq!((nb.value, nb.justification), (1, Justification::Neighbor));
    }

    #[test]
    fn two_disjoint_routes_on_c5() {
        let g = Graph::cycle(5).unwrap();
        // node 0 hears node 2's value via 1 and via 3-4
        let entries = vec![(r(&[2, 1]), 0), (r(&[2, 3, 4]), 0)];
        let got = reliable_receipt(&g, 0, 2, 1, &entries, 1).unwrap();
        assert_eq!(got.value, 0);
        let Justification::Paths(fam) = got.justification else {
            panic!("expected a family");
        };
        assert_eq!(fam.len(), 2);
        assert_eq!(fam.paths()[0].to_string(), "2-1-0");
    }

    #[test]
    fn conflicting_routes_give_nothing() {
        let g = Graph::cycle(5).unwrap();
        let entries = vec![(r(&[2, 1]), 0), (r(&[2, 3, 4]), 1)];
        assert!(reliable_receipt(&g, 0, 2, 1, &entries, 1).is_none());
    }
}
