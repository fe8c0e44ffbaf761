//! Exact search for pairwise-disjoint node sets given as bitmasks.

/// Indices of `k` candidates whose masks are pairwise disjoint, or `None`.
///
/// Only inclusion-minimal masks are searched: any solution using a mask can
/// swap it for a subset of itself. Among equal masks the earliest index wins.
pub fn pick_disjoint(masks: &[u64], k: usize) -> Option<Vec<usize>> {
    if k == 0 {
        return Some(Vec::new());
    }
    let mut chosen = Vec::with_capacity(k);
    // An empty mask is disjoint from everything, but only one is taken.
    if let Some(e) = masks.iter().position(|&m| m == 0) {
        chosen.push(e);
        if k == 1 {
            return Some(chosen);
        }
    }
    let mut order: Vec<usize> = (0..masks.len()).filter(|&i| masks[i] != 0).collect();
    order.sort_by_key(|&i| (masks[i].count_ones(), masks[i], i));
    order.dedup_by_key(|i| masks[*i]);
    let mut minimal: Vec<usize> = Vec::new();
    for i in order {
        let m = masks[i];
        if !minimal.iter().any(|&j| masks[j] & m == masks[j]) {
            minimal.push(i);
        }
    }
    if search(masks, &minimal, 0, 0, k, &mut chosen) {
        chosen.sort_unstable();
        Some(chosen)
    } else {
        None
    }
}

fn search(
    masks: &[u64],
    pool: &[usize],
    from: usize,
    used: u64,
    k: usize,
    chosen: &mut Vec<usize>,
) -> bool {
    if chosen.len() == k {
        return true;
    }
    let need = k - chosen.len();
    let fits = pool[from..].iter().filter(|&&i| masks[i] & used == 0).count();
    if fits < need {
        return false;
    }
    for (off, &i) in pool[from..].iter().enumerate() {
        if masks[i] & used != 0 {
            continue;
        }
        chosen.push(i);
        if search(masks, pool, from + off + 1, used | masks[i], k, chosen) {
            return true;
        }
        chosen.pop();
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(masks: &[u64], k: usize) -> bool {
        let m = masks.len();
        (0u32..1 << m).any(|sel| {
            sel.count_ones() as usize == k && {
                let mut used = 0u64;
                (0..m).filter(|i| sel >> i & 1 == 1).all(|i| {
                    let ok = masks[i] & used == 0 && (masks[i] != 0 || used & 1 << 63 == 0);
                    used |= masks[i] | if masks[i] == 0 { 1 << 63 } else { 0 };
                    ok
                })
            }
        })
    }

    #[test]
    fn small_cases() {
        assert_eq!(pick_disjoint(&[0b11, 0b01, 0b10], 2), Some(vec![1, 2]));
        assert_eq!(pick_disjoint(&[0b11, 0b110], 2), None);
        assert_eq!(pick_disjoint(&[0, 0, 0b1], 2), Some(vec![0, 2]));
        assert_eq!(pick_disjoint(&[0, 0], 2), None);
        assert_eq!(pick_disjoint(&[], 0), Some(vec![]));
        assert_eq!(pick_disjoint(&[0b101, 0b101], 2), None);
    }

    #[test]
    fn greedy_trap() {
        // smallest-first greedy takes 0b0110 and blocks both others
        let masks = [0b0110, 0b0011, 0b1100];
        assert_eq!(pick_disjoint(&masks, 2), Some(vec![1, 2]));
    }

    #[test]
    fn agrees_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..400 {
            let m = rng.gen_range(0..10);
            let masks: Vec<u64> = (0..m)
                .map(|_| rng.gen_range(0u64..64) & rng.gen_range(0u64..64))
                .collect();
            let k = rng.gen_range(0..5);
            let got = pick_disjoint(&masks, k);
            assert_eq!(got.is_some(), brute(&masks, k), "{masks:?} k={k}");
            if let Some(idx) = got {
                assert_eq!(idx.len(), k);
                let mut used = 0;
                for i in idx {
                    assert_eq!(masks[i] & used, 0);
                    used |= masks[i];
                }
            }
        }
    }
}
