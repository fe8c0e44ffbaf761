//! Per-phase flooding ledger with the four discard/accept rules.

use std::collections::hash_map::Entry;

use rustc_hash::FxHashMap;

use crate::graph::NodeId;
use crate::message::{Payload, Route};
use crate::netsim::Delivery;

/// What one node accepted during one flooding phase.
///
/// A message `(value, route)` from neighbor `u` is accepted as "value received
/// along `route-u`" unless `route-u` is not a simple path of the graph, the
/// same `route-u` was already accepted, or the route already contains this
/// node.
#[derive(Clone, Debug)]
pub struct FloodLedger<V> {
    me: NodeId,
    entries: Vec<(Route, V)>,
    index: FxHashMap<Route, usize>,
    initiated: u64,
}

impl<V: Clone> FloodLedger<V> {
    pub fn new(me: NodeId) -> Self {
        Self {
            me,
            entries: Vec::new(),
            index: FxHashMap::default(),
            initiated: 0,
        }
    }

    /// Accepted `(full route, value)` pairs in acceptance order.
    pub fn entries(&self) -> &[(Route, V)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, route: Route) -> Option<&V> {
        self.index.get(&route).map(|&i| &self.entries[i].1)
    }

    /// Applies the flooding rules to one message; returns the route to
    /// forward with when accepted.
    pub fn accept(&mut self, adjacency: &[u64], sender: NodeId, value: V, route: Route) -> Option<Route> {
        if route.contains(self.me) {
            return None;
        }
        let full = route.push(sender)?;
        if adjacency[self.me] >> sender & 1 == 0 || !full.is_simple_path(adjacency) {
            return None;
        }
        self.insert(full, value)?;
        if route.is_empty() {
            self.initiated |= 1 << sender;
        }
        Some(full)
    }

    fn insert(&mut self, full: Route, value: V) -> Option<()> {
        match self.index.entry(full) {
            Entry::Occupied(_) => None,
            Entry::Vacant(slot) => {
                slot.insert(self.entries.len());
                self.entries.push((full, value));
                Some(())
            }
        }
    }

    /// Handles an inbox. `extract` maps a payload to its value and route, or
    /// `None` for payloads this flood ignores. Accepted messages are returned
    /// re-wrapped for forwarding when `forward` is set.
    pub fn receive(
        &mut self,
        adjacency: &[u64],
        inbox: &[Delivery<'_>],
        forward: bool,
        mut extract: impl FnMut(&Payload) -> Option<(V, Route)>,
    ) -> Vec<Payload> {
        let mut out = Vec::new();
        for d in inbox {
            let Some((value, route)) = extract(d.payload) else {
                continue;
            };
            if let Some(full) = self.accept(adjacency, d.sender, value, route) {
                if forward {
                    out.push(d.payload.with_route(full));
                }
            }
        }
        out
    }

    /// Records `default` for every neighbor that did not initiate; returns
    /// the substituted `(neighbor, route)` pairs in ascending neighbor order.
    pub fn substitute_defaults(&mut self, adjacency: &[u64], default: V) -> Vec<Route> {
        let mut out = Vec::new();
        let missing = adjacency[self.me] & !self.initiated;
        for u in 0..adjacency.len() {
            if missing >> u & 1 == 1 {
                let full = Route::EMPTY.push(u).expect("node ids fit in routes");
                if self.insert(full, default.clone()).is_some() {
                    self.initiated |= 1 << u;
                    out.push(full);
                }
            }
        }
        out
    }
}

pub fn bit_of(p: &Payload) -> Option<(u8, Route)> {
    match p {
        Payload::Bit { value, route } => Some((*value, *route)),
        _ => None,
    }
}
