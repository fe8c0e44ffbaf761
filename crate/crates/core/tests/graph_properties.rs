mod common;

use common::{arb_graph, brute_connectivity, brute_uv_cut, connected_without};
use lbcast::graph::{
    disjoint_set_paths, disjoint_uv_paths, min_vertex_cut, path_excluding, vertex_connectivity, Graph, NodeSet, Path,
    PathFamily,
};
use proptest::prelude::*;

fn is_walk(g: &Graph, p: &Path) -> bool {
    p.nodes().windows(2).all(|w| g.has_edge(w[0], w[1]))
}

fn mask(s: &NodeSet) -> u64 {
    s.iter().fold(0, |m, &x| m | 1 << x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn connectivity_matches_cut_oracle(g in arb_graph(1, 8)) {
        prop_assert_eq!(vertex_connectivity(&g), brute_connectivity(&g));
    }

    #[test]
    fn min_cut_disconnects(g in arb_graph(2, 8)) {
        match min_vertex_cut(&g) {
            None => prop_assert!(g.is_complete()),
            Some(cut) => {
                prop_assert_eq!(cut.len(), vertex_connectivity(&g));
                prop_assert!(!connected_without(&g, mask(&cut)));
            }
        }
    }

    #[test]
    fn menger_on_non_adjacent_pairs(g in arb_graph(3, 7), u in 0usize..7, v in 0usize..7, k in 1usize..6) {
        let (u, v) = (u % g.n(), v % g.n());
        prop_assume!(u != v && !g.has_edge(u, v));
        let found = disjoint_uv_paths(&g, u, v, k).unwrap();
        prop_assert_eq!(found.is_some(), brute_uv_cut(&g, u, v) >= k);
        if let Some(family) = found {
            prop_assert_eq!(family.len(), k);
            prop_assert!(family.paths().iter().all(|p| is_walk(&g, p) && p.start() == u && p.end() == v));
            prop_assert!(PathFamily::between(family.paths().to_vec()).is_ok());
            prop_assert_eq!(Some(family), disjoint_uv_paths(&g, u, v, k).unwrap());
        }
    }

    #[test]
    fn set_paths_are_disjoint(g in arb_graph(3, 7), sources in any::<u8>(), v in 0usize..7, k in 1usize..4) {
        let v = v % g.n();
        let sources: NodeSet = (0..g.n()).filter(|&x| x != v && sources >> x & 1 == 1).collect();
        if let Some(family) = disjoint_set_paths(&g, &sources, v, k).unwrap() {
            prop_assert_eq!(family.len(), k);
            for p in family.paths() {
                prop_assert!(is_walk(&g, p));
                prop_assert!(sources.contains(&p.start()));
                prop_assert_eq!(p.end(), v);
            }
            prop_assert!(PathFamily::into_target(family.paths().to_vec()).is_ok());
        }
    }

    #[test]
    fn excluding_path_avoids_excluded(g in arb_graph(2, 8), u in 0usize..8, v in 0usize..8, ex in any::<u8>()) {
        let (u, v) = (u % g.n(), v % g.n());
        prop_assume!(u != v);
        let excluded: NodeSet = (0..g.n()).filter(|&x| x != u && x != v && ex >> x & 1 == 1).collect();
        let found = path_excluding(&g, u, v, &excluded).unwrap();
        // reachable in g minus the excluded nodes
        let mut sub = g.clone();
        for &x in &excluded {
            for y in g.neighbors(x).to_vec() {
                sub.remove_edge(x, y);
            }
        }
        let reachable = !common::simple_paths(&sub, u, v).is_empty();
        prop_assert_eq!(found.is_some(), reachable);
        if let Some(p) = found {
            prop_assert!(is_walk(&g, &p));
            prop_assert!(p.internal().iter().all(|x| !excluded.contains(x)));
            prop_assert_eq!(Some(p), path_excluding(&g, u, v, &excluded).unwrap());
        }
    }
}
