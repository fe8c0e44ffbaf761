//! Flooding payloads and their canonical byte encoding.
//!
//! Encodings (ASCII):
//! - bit flood: `F <b> <route>`
//! - decision flood: `D <b> <route>`
//! - report flood: `P <route>` followed by `|R <origin> <round> F <b> <route>` per item
//!
//! A route is dash-joined node ids, or `⊥` when empty. Bytes that do not
//! decode to exactly their own canonical form are kept as [`Payload::Raw`].

use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, OnceLock};

use rustc_hash::{FxHashMap, FxHasher};

use crate::graph::NodeId;

/// Largest node id a route can hold.
pub const MAX_ROUTE_NODE: NodeId = 15;
/// Longest route.
pub const MAX_ROUTE_LEN: usize = 16;

const EMPTY_TOKEN: &str = "⊥";

/// Short simple-or-not node sequence packed four bits per node.
///
/// The first node sits in the most significant nibble, so the derived order
/// is lexicographic on the node sequence.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Route {
    packed: u64,
    len: u8,
}

impl Route {
    pub const EMPTY: Route = Route { packed: 0, len: 0 };

    pub fn from_nodes(nodes: &[NodeId]) -> Option<Self> {
        let mut r = Self::EMPTY;
        for &x in nodes {
            r = r.push(x)?;
        }
        Some(r)
    }

    /// Appends `x`; `None` if `x` or the length is out of range.
    pub fn push(self, x: NodeId) -> Option<Self> {
        if x > MAX_ROUTE_NODE || self.len as usize >= MAX_ROUTE_LEN {
            return None;
        }
        let shift = 60 - 4 * self.len as u32;
        Some(Self {
            packed: self.packed | (x as u64) << shift,
            len: self.len + 1,
        })
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> NodeId {
        debug_assert!(i < self.len());
        (self.packed >> (60 - 4 * i as u32) & 0xF) as NodeId
    }

    pub fn first(&self) -> Option<NodeId> {
        (self.len > 0).then(|| self.get(0))
    }

    pub fn last(&self) -> Option<NodeId> {
        (self.len > 0).then(|| self.get(self.len() - 1))
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.len()).map(|i| self.get(i))
    }

    pub fn to_vec(&self) -> Vec<NodeId> {
        self.iter().collect()
    }

    /// Bitmask of the nodes on the route.
    pub fn mask(&self) -> u64 {
        self.iter().fold(0, |m, x| m | 1 << x)
    }

    pub fn contains(&self, x: NodeId) -> bool {
        self.iter().any(|y| y == x)
    }

    /// The first `k` nodes.
    pub fn prefix(&self, k: usize) -> Self {
        let k = k.min(self.len());
        let keep = if k == 0 { 0 } else { !0u64 << (64 - 4 * k as u32) };
        Self {
            packed: self.packed & keep,
            len: k as u8,
        }
    }

    /// True when no node repeats and consecutive nodes are adjacent in the
    /// graph given by `adjacency` bitmasks.
    pub fn is_simple_path(&self, adjacency: &[u64]) -> bool {
        let mut seen = 0u64;
        let mut prev: Option<NodeId> = None;
        for x in self.iter() {
            if x >= adjacency.len() || seen >> x & 1 == 1 {
                return false;
            }
            if let Some(p) = prev {
                if adjacency[p] >> x & 1 == 0 {
                    return false;
                }
            }
            seen |= 1 << x;
            prev = Some(x);
        }
        true
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == EMPTY_TOKEN {
            return Some(Self::EMPTY);
        }
        let mut r = Self::EMPTY;
        for part in s.split('-') {
            if part.is_empty() || (part.len() > 1 && part.starts_with('0')) {
                return None;
            }
            r = r.push(part.parse().ok()?)?;
        }
        Some(r)
    }
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str(EMPTY_TOKEN);
        }
        for (i, x) in self.iter().enumerate() {
            if i > 0 {
                f.write_str("-")?;
            }
            write!(f, "{x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Route({self})")
    }
}

/// One bit-flood transmission a node heard from a neighbor.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct ReportItem {
    pub origin: NodeId,
    pub round: usize,
    pub value: u8,
    pub route: Route,
}

impl fmt::Display for ReportItem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R {} {} F {} {}", self.origin, self.round, self.value, self.route)
    }
}

/// Everything a node heard during input flooding.
#[derive(Debug)]
pub struct ReportBundle {
    items: Vec<ReportItem>,
    views: OnceLock<FxHashMap<(NodeId, Route), Vec<(usize, u8)>>>,
    digest: OnceLock<u64>,
}

impl ReportBundle {
    pub fn new(mut items: Vec<ReportItem>) -> Self {
        items.sort();
        items.dedup();
        Self {
            items,
            views: OnceLock::new(),
            digest: OnceLock::new(),
        }
    }

    pub fn items(&self) -> &[ReportItem] {
        &self.items
    }

    /// Sorted `(round, value)` pairs reported for `origin` sending `route`.
    pub fn view(&self, origin: NodeId, route: Route) -> &[(usize, u8)] {
        let views = self.views.get_or_init(|| {
            let mut m: FxHashMap<(NodeId, Route), Vec<(usize, u8)>> = FxHashMap::default();
            for i in &self.items {
                m.entry((i.origin, i.route)).or_default().push((i.round, i.value));
            }
            m
        });
        views.get(&(origin, route)).map_or(&[], Vec::as_slice)
    }

    /// Whether the bundle reports `origin` sending `(value, route)` in any round.
    pub fn contains(&self, origin: NodeId, value: u8, route: Route) -> bool {
        self.view(origin, route).iter().any(|&(_, v)| v == value)
    }

    pub fn digest(&self) -> u64 {
        *self.digest.get_or_init(|| {
            let mut h = FxHasher::default();
            self.items.hash(&mut h);
            h.finish()
        })
    }
}

impl PartialEq for ReportBundle {
    fn eq(&self, other: &Self) -> bool {
        self.items == other.items
    }
}

impl Eq for ReportBundle {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Bit { value: u8, route: Route },
    Decision { value: u8, route: Route },
    Reports { bundle: Arc<ReportBundle>, route: Route },
    Raw(Arc<[u8]>),
}

impl Payload {
    pub fn bit(value: u8, route: Route) -> Self {
        Payload::Bit { value, route }
    }

    pub fn route(&self) -> Option<Route> {
        match self {
            Payload::Bit { route, .. }
            | Payload::Decision { route, .. }
            | Payload::Reports { route, .. } => Some(*route),
            Payload::Raw(_) => None,
        }
    }

    /// Same payload carrying a different route; raw bytes are unchanged.
    pub fn with_route(&self, route: Route) -> Self {
        match self {
            Payload::Bit { value, .. } => Payload::Bit { value: *value, route },
            Payload::Decision { value, .. } => Payload::Decision { value: *value, route },
            Payload::Reports { bundle, .. } => Payload::Reports {
                bundle: bundle.clone(),
                route,
            },
            Payload::Raw(b) => Payload::Raw(b.clone()),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        match self {
            Payload::Bit { value, route } => format!("F {value} {route}").into_bytes(),
            Payload::Decision { value, route } => format!("D {value} {route}").into_bytes(),
            Payload::Reports { bundle, route } => {
                let mut s = format!("P {route}");
                for item in bundle.items() {
                    s.push('|');
                    s.push_str(&item.to_string());
                }
                s.into_bytes()
            }
            Payload::Raw(bytes) => bytes.to_vec(),
        }
    }

    /// Decodes canonical bytes; anything else becomes [`Payload::Raw`].
    pub fn from_bytes(bytes: &[u8]) -> Self {
        match Self::decode_structured(bytes) {
            Some(p) if p.encode() == bytes => p,
            _ => Payload::Raw(bytes.into()),
        }
    }

    fn decode_structured(bytes: &[u8]) -> Option<Self> {
        let text = std::str::from_utf8(bytes).ok()?;
        let bit = |s: &str| match s {
            "0" => Some(0u8),
            "1" => Some(1u8),
            _ => None,
        };
        if let Some(rest) = text.strip_prefix("P ") {
            let mut parts = rest.split('|');
            let route = Route::parse(parts.next()?)?;
            let mut items = Vec::new();
            for part in parts {
                let f: Vec<&str> = part.split(' ').collect();
                if f.len() != 6 || f[0] != "R" || f[3] != "F" {
                    return None;
                }
                items.push(ReportItem {
                    origin: f[1].parse().ok()?,
                    round: f[2].parse().ok()?,
                    value: bit(f[4])?,
                    route: Route::parse(f[5])?,
                });
            }
            return Some(Payload::Reports {
                bundle: Arc::new(ReportBundle::new(items)),
                route,
            });
        }
        let f: Vec<&str> = text.split(' ').collect();
        if f.len() != 3 {
            return None;
        }
        let value = bit(f[1])?;
        let route = Route::parse(f[2])?;
        match f[0] {
            "F" => Some(Payload::Bit { value, route }),
            "D" => Some(Payload::Decision { value, route }),
            _ => None,
        }
    }

    /// Stable structural hash.
    pub fn digest(&self) -> u64 {
        let mut h = FxHasher::default();
        match self {
            Payload::Bit { value, route } => (0u8, value, route).hash(&mut h),
            Payload::Decision { value, route } => (1u8, value, route).hash(&mut h),
            Payload::Reports { bundle, route } => (2u8, bundle.digest(), route).hash(&mut h),
            Payload::Raw(bytes) => (3u8, &bytes[..]).hash(&mut h),
        }
        h.finish()
    }
}

impl fmt::Display for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Payload::Raw(b) => write!(f, "raw:{}", hex::encode(b)),
            Payload::Reports { bundle, route } => {
                write!(f, "P {route} ({} items)", bundle.items().len())
            }
            other => f.write_str(&String::from_utf8_lossy(&other.encode())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(xs: &[NodeId]) -> Route {
        Route::from_nodes(xs).unwrap()
    }

    #[test]
    fn route_basics() {
        let a = r(&[3, 0, 15]);
        assert_eq!(a.to_vec(), vec![3, 0, 15]);
        assert_eq!(a.to_string(), "3-0-15");
        assert_eq!(Route::EMPTY.to_string(), "⊥");
        assert_eq!(a.first(), Some(3));
        assert_eq!(a.last(), Some(15));
        assert_eq!(a.mask(), 1 | 1 << 3 | 1 << 15);
        assert_eq!(a.prefix(2), r(&[3, 0]));
        assert_eq!(a.prefix(0), Route::EMPTY);
        assert!(Route::EMPTY.push(16).is_none());
        assert_eq!(Route::parse("3-0-15"), Some(a));
        assert_eq!(Route::parse("⊥"), Some(Route::EMPTY));
        assert_eq!(Route::parse("01"), None);
        assert_eq!(Route::parse(""), None);
    }

    #[test]
    fn route_order_is_lexicographic() {
        let mut v = [r(&[1]), r(&[0, 2]), r(&[0]), Route::EMPTY, r(&[0, 0]), r(&[0, 1, 5])];
        v.sort();
        let shown: Vec<String> = v.iter().map(Route::to_string).collect();
        assert_eq!(shown, ["⊥", "0", "0-0", "0-1-5", "0-2", "1"]);
    }

    #[test]
    fn simple_path_check() {
        let c5 = crate::graph::Graph::cycle(5).unwrap().adjacency_masks();
        assert!(r(&[0, 1, 2]).is_simple_path(&c5));
        assert!(!r(&[0, 2]).is_simple_path(&c5));
        assert!(!r(&[0, 1, 0]).is_simple_path(&c5));
        assert!(!r(&[7]).is_simple_path(&c5));
        assert!(Route::EMPTY.is_simple_path(&c5));
    }

    #[test]
    fn canonical_round_trip() {
        let bundle = Arc::new(ReportBundle::new(vec![
            ReportItem { origin: 2, round: 3, value: 1, route: r(&[4]) },
            ReportItem { origin: 1, round: 0, value: 0, route: Route::EMPTY },
        ]));
        let cases = [
            Payload::bit(0, Route::EMPTY),
            Payload::bit(1, r(&[1, 2])),
            Payload::Decision { value: 1, route: r(&[0]) },
            Payload::Reports { bundle, route: r(&[3]) },
            Payload::Reports { bundle: Arc::new(ReportBundle::new(vec![])), route: Route::EMPTY },
        ];
        for p in cases {
            assert_eq!(Payload::from_bytes(&p.encode()), p);
        }
        assert_eq!(Payload::bit(1, r(&[1, 2])).encode(), b"F 1 1-2");
        let reports = Payload::from_bytes(b"P 3|R 1 0 F 0 \xe2\x8a\xa5|R 2 3 F 1 4");
        assert!(matches!(reports, Payload::Reports { .. }));
    }

    #[test]
    fn non_canonical_is_raw() {
        for bytes in [&b"F 2 1"[..], b"F 1  1", b"F 1 01", b"hello", b"F 1 1-2 ", b"D 0", b"\xff"] {
            assert!(matches!(Payload::from_bytes(bytes), Payload::Raw(_)), "{bytes:?}");
        }
        // items out of canonical order
        let p = Payload::from_bytes(b"P 3|R 2 3 F 1 4|R 1 0 F 0 1");
        assert!(matches!(p, Payload::Raw(_)));
    }

    #[test]
    fn bundle_lookup_ignores_round() {
        let b = ReportBundle::new(vec![ReportItem { origin: 2, round: 3, value: 1, route: r(&[4]) }]);
        assert!(b.contains(2, 1, r(&[4])));
        assert!(!b.contains(2, 0, r(&[4])));
        assert_eq!(b.view(2, r(&[4])), &[(3, 1)]);
        assert!(b.view(1, r(&[4])).is_empty());
    }
}
