//! Generate-and-filter construction of ordered partitions, sharing no code
//! with the tree walk: every non-crossing partition, every labeling of its
//! blocks, kept when nested blocks carry larger labels.

use crate::partition::{all_noncrossing, NcPartition};
use crate::tree::OrderedNcPartition;

fn contains(outer: &[usize], inner: &[usize]) -> bool {
    outer[0] < inner[0] && inner[inner.len() - 1] < outer[outer.len() - 1]
}

fn is_monotone(p: &NcPartition, labels: &[usize]) -> bool {
    let b = p.blocks();
    for i in 0..b.len() {
        for j in 0..b.len() {
            if contains(&b[j], &b[i]) && labels[i] <= labels[j] {
                return false;
            }
        }
    }
    true
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(k - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, k);
            out.push(q);
        }
    }
    out
}

/// All monotonic orderings of all partitions in `partitions`.
fn ordered(partitions: Vec<NcPartition>) -> Vec<OrderedNcPartition> {
    let mut out = Vec::new();
    for p in partitions {
        for labels in permutations(p.num_blocks()) {
            if is_monotone(&p, &labels) {
                out.push(OrderedNcPartition::new(p.clone(), labels).expect("filtered ordering"));
            }
        }
    }
    out
}

/// Every element of level `n` of the full tree, in no particular order.
pub fn ordered_partitions(n: usize) -> Vec<OrderedNcPartition> {
    ordered(all_noncrossing(n))
}

/// Every ordered pair partition of `2n` points.
pub fn ordered_pair_partitions(n: usize) -> Vec<OrderedNcPartition> {
    ordered(all_noncrossing(2 * n).into_iter().filter(NcPartition::is_pair_partition).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{enumerate, TreeKind};

    #[test]
    fn matches_tree_walk() {
        for n in 1..=6 {
            let mut a = ordered_partitions(n);
            let mut b: Vec<_> = enumerate(n, TreeKind::Full).unwrap().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
        for n in 1..=4 {
            let mut a = ordered_pair_partitions(n);
            let mut b: Vec<_> = enumerate(n, TreeKind::Pair).unwrap().collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }
}
