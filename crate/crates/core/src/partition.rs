//! Set partitions of `{1..n}` in canonical block form, with the non-crossing
//! check and the structural queries used throughout the crate (nesting, outer
//! blocks, interval pairs, restrict-and-relabel).

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("not a partition of {{1..{n}}}: {reason}")]
    NotAPartition { n: usize, reason: String },
    #[error("crossing blocks: {a1},{a3} and {a2},{a4} interleave")]
    Crossing {
        a1: usize,
        a2: usize,
        a3: usize,
        a4: usize,
    },
    #[error("restriction to an empty set")]
    EmptyKeep,
    #[error("keep set must be strictly increasing within 1..={n}")]
    BadKeep { n: usize },
    #[error("block index {index} out of range ({len} blocks)")]
    BadBlockRef { index: usize, len: usize },
}

impl PartitionError {
    /// The quadruple `a1 < a2 < a3 < a4` of a `Crossing` error.
    pub fn crossing_witness(&self) -> Option<[usize; 4]> {
        match *self {
            PartitionError::Crossing { a1, a2, a3, a4 } => Some([a1, a2, a3, a4]),
            _ => None,
        }
    }
}

/// Position of a block within an [`NcPartition`]'s canonical block list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BlockRef(pub usize);

/// A non-crossing partition of `{1..n}`.
///
/// Blocks are strictly increasing and sorted by their minimum; two partitions
/// are equal iff they have the same blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "RawPartition")]
pub struct NcPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

#[derive(Deserialize)]
struct RawPartition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl TryFrom<RawPartition> for NcPartition {
    type Error = PartitionError;

    fn try_from(raw: RawPartition) -> Result<Self, Self::Error> {
        validate_noncrossing(raw.blocks, raw.n)
    }
}

/// Checks that `blocks` is a non-crossing partition of `{1..n}` and returns it
/// in canonical form.
///
/// Crossing detection is a single stack scan over the positions: a block is
/// pushed at its first element and popped at its last, and every intermediate
/// element must find its own block on top of the stack.
pub fn validate_noncrossing(
    blocks: Vec<Vec<usize>>,
    n: usize,
) -> Result<NcPartition, PartitionError> {
    let not_partition = |reason: String| PartitionError::NotAPartition { n, reason };
    if n == 0 {
        return Err(not_partition("ground set must be non-empty".into()));
    }
    let mut owner = vec![usize::MAX; n + 1];
    let mut blocks = blocks;
    for (b, block) in blocks.iter_mut().enumerate() {
        if block.is_empty() {
            return Err(not_partition(format!("block #{b} is empty")));
        }
        block.sort_unstable();
        for &x in block.iter() {
            if x == 0 || x > n {
                return Err(not_partition(format!("element {x} outside 1..={n}")));
            }
            if owner[x] != usize::MAX {
                return Err(not_partition(format!("element {x} appears twice")));
            }
            owner[x] = b;
        }
    }
    if let Some(x) = (1..=n).find(|&x| owner[x] == usize::MAX) {
        return Err(not_partition(format!("element {x} is not covered")));
    }
    blocks.sort_unstable_by_key(|b| b[0]);
    let p = NcPartition { n, blocks };
    p.check_noncrossing()?;
    Ok(p)
}

impl NcPartition {
    /// Builds a partition from blocks already known to be canonical and
    /// non-crossing. Debug builds still verify.
    pub(crate) fn from_canonical(n: usize, blocks: Vec<Vec<usize>>) -> Self {
        let p = NcPartition { n, blocks };
        debug_assert!(p.check_noncrossing().is_ok());
        debug_assert!(p.blocks.windows(2).all(|w| w[0][0] < w[1][0]));
        p
    }

    fn check_noncrossing(&self) -> Result<(), PartitionError> {
        let n = self.n;
        let mut owner = vec![0usize; n + 1];
        let mut pos_in_block = vec![0usize; n + 1];
        for (b, block) in self.blocks.iter().enumerate() {
            for (i, &x) in block.iter().enumerate() {
                owner[x] = b;
                pos_in_block[x] = i;
            }
        }
        let mut stack: Vec<usize> = Vec::new();
        for x in 1..=n {
            let b = owner[x];
            let block = &self.blocks[b];
            let i = pos_in_block[x];
            let last = i + 1 == block.len();
            if i == 0 {
                if !last {
                    stack.push(b);
                }
                continue;
            }
            let top = *stack.last().expect("continuation with empty stack");
            if top != b {
                // `top` was opened after the previous element of `b` and is
                // still open, so it has an element beyond `x`.
                let other = &self.blocks[top];
                let a4 = *other.iter().find(|&&y| y > x).expect("open block");
                return Err(PartitionError::Crossing {
                    a1: block[i - 1],
                    a2: other[0],
                    a3: x,
                    a4,
                });
            }
            if last {
                stack.pop();
            }
        }
        Ok(())
    }

    /// `0_n`, all singletons.
    pub fn singletons(n: usize) -> Self {
        Self::from_canonical(n, (1..=n).map(|x| vec![x]).collect())
    }

    /// `1_n`, the one-block partition.
    pub fn one_block(n: usize) -> Self {
        Self::from_canonical(n, vec![(1..=n).collect()])
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block(&self, r: BlockRef) -> Result<&[usize], PartitionError> {
        self.blocks
            .get(r.0)
            .map(Vec::as_slice)
            .ok_or(PartitionError::BadBlockRef {
                index: r.0,
                len: self.blocks.len(),
            })
    }

    pub fn block_refs(&self) -> impl Iterator<Item = BlockRef> {
        (0..self.blocks.len()).map(BlockRef)
    }

    /// Block containing point `x`.
    pub fn block_of(&self, x: usize) -> Option<BlockRef> {
        self.blocks
            .iter()
            .position(|b| b.binary_search(&x).is_ok())
            .map(BlockRef)
    }

    /// Whether every block has exactly two elements.
    pub fn is_pair_partition(&self) -> bool {
        self.blocks.iter().all(|b| b.len() == 2)
    }

    /// `inner` is nested in `outer`: `min(inner) > min(outer)` and
    /// `max(inner) < max(outer)`.
    pub fn is_nested(&self, inner: BlockRef, outer: BlockRef) -> Result<bool, PartitionError> {
        let i = self.block(inner)?;
        let o = self.block(outer)?;
        Ok(nested(i, o))
    }

    /// Blocks not nested in any other block, ordered by minimum.
    pub fn outer_blocks(&self) -> Vec<BlockRef> {
        // Canonical order is by minimum, so a block is outer iff its minimum
        // lies past the maximum of every earlier outer block.
        let mut out = Vec::new();
        let mut reach = 0;
        for (b, block) in self.blocks.iter().enumerate() {
            if block[0] > reach {
                out.push(BlockRef(b));
                reach = *block.last().unwrap();
            }
        }
        out
    }

    /// Blocks of the form `{m, m+1}`.
    pub fn interval_pairs(&self) -> Vec<BlockRef> {
        self.blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.len() == 2 && b[1] == b[0] + 1)
            .map(|(i, _)| BlockRef(i))
            .collect()
    }

    /// Whether the block is a contiguous run of integers.
    pub fn is_interval(&self, r: BlockRef) -> Result<bool, PartitionError> {
        let b = self.block(r)?;
        Ok(b[b.len() - 1] - b[0] + 1 == b.len())
    }

    /// Restricts to `keep` and renames its elements `1..|keep|` in increasing
    /// order.
    pub fn restrict_relabel(&self, keep: &[usize]) -> Result<NcPartition, PartitionError> {
        if keep.is_empty() {
            return Err(PartitionError::EmptyKeep);
        }
        if keep.windows(2).any(|w| w[0] >= w[1]) || keep[0] == 0 || keep[keep.len() - 1] > self.n {
            return Err(PartitionError::BadKeep { n: self.n });
        }
        let mut image = vec![0usize; self.n + 1];
        for (i, &x) in keep.iter().enumerate() {
            image[x] = i + 1;
        }
        let mut blocks: Vec<Vec<usize>> = self
            .blocks
            .iter()
            .map(|b| b.iter().filter_map(|&x| (image[x] > 0).then(|| image[x])).collect::<Vec<_>>())
            .filter(|b: &Vec<usize>| !b.is_empty())
            .collect();
        blocks.sort_unstable_by_key(|b| b[0]);
        Ok(NcPartition::from_canonical(keep.len(), blocks))
    }

    /// Restriction to `{1..n} \ {x}`.
    pub fn remove_point(&self, x: usize) -> Result<NcPartition, PartitionError> {
        let keep: Vec<usize> = (1..=self.n).filter(|&y| y != x).collect();
        self.restrict_relabel(&keep)
    }

    /// The block of each point `1..=n` (index 0 unused).
    pub fn owner_table(&self) -> Vec<usize> {
        let mut owner = vec![usize::MAX; self.n + 1];
        for (b, block) in self.blocks.iter().enumerate() {
            for &x in block {
                owner[x] = b;
            }
        }
        owner
    }
}

pub(crate) fn nested(inner: &[usize], outer: &[usize]) -> bool {
    inner[0] > outer[0] && inner[inner.len() - 1] < outer[outer.len() - 1]
}

impl fmt::Display for NcPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, b) in self.blocks.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{{")?;
            for (j, x) in b.iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{x}")?;
            }
            write!(f, "}}")?;
        }
        write!(f, "}}")
    }
}

/// All of `NC(n)`, generated by splitting off the block containing 1: its
/// elements `1 = b_1 < ... < b_r` cut the rest into gaps, each filled
/// independently with a non-crossing partition.
pub fn all_noncrossing(n: usize) -> Vec<NcPartition> {
    fn rec(lo: usize, hi: usize) -> Vec<Vec<Vec<usize>>> {
        // non-crossing partitions of the interval lo..=hi (empty when lo > hi)
        if lo > hi {
            return vec![Vec::new()];
        }
        let mut out = Vec::new();
        // choose the block of `lo` as lo plus an increasing subset of (lo, hi]
        let rest: Vec<usize> = (lo + 1..=hi).collect();
        for mask in 0u64..(1u64 << rest.len()) {
            let mut block = vec![lo];
            block.extend(rest.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &x)| x));
            // gaps between consecutive elements of the block, plus the tail
            let mut parts: Vec<Vec<Vec<Vec<usize>>>> = Vec::new();
            for w in block.windows(2) {
                parts.push(rec(w[0] + 1, w[1] - 1));
            }
            parts.push(rec(block[block.len() - 1] + 1, hi));
            let mut acc: Vec<Vec<Vec<usize>>> = vec![vec![block.clone()]];
            for choices in parts {
                let mut next = Vec::with_capacity(acc.len() * choices.len());
                for a in &acc {
                    for c in &choices {
                        let mut merged = a.clone();
                        merged.extend(c.iter().cloned());
                        next.push(merged);
                    }
                }
                acc = next;
            }
            out.extend(acc);
        }
        out
    }
    assert!(n >= 1 && n < 64);
    rec(1, n)
        .into_iter()
        .map(|mut blocks| {
            blocks.sort_unstable_by_key(|b| b[0]);
            NcPartition::from_canonical(n, blocks)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(blocks: &[&[usize]], n: usize) -> NcPartition {
        validate_noncrossing(blocks.iter().map(|b| b.to_vec()).collect(), n).unwrap()
    }

    fn pair_example() -> NcPartition {
        p(&[&[1, 6], &[2, 3], &[4, 5], &[7, 8], &[9, 14], &[10, 13], &[11, 12]], 14)
    }

    #[test]
    fn validates_example_partition() {
        let q = p(&[&[4, 5], &[1, 2, 6], &[3]], 6);
        assert_eq!(q.blocks(), &[vec![1, 2, 6], vec![3], vec![4, 5]]);
        assert_eq!(q.num_blocks(), 3);
        assert_eq!(p(&[&[1]], 1).num_blocks(), 1);
    }

    #[test]
    fn crossing_witness() {
        let err = validate_noncrossing(vec![vec![1, 3], vec![2, 4]], 4).unwrap_err();
        assert_eq!(err.crossing_witness(), Some([1, 2, 3, 4]));
        let err = validate_noncrossing(vec![vec![1, 5, 8], vec![2, 3], vec![4, 6, 7]], 8).unwrap_err();
        let [a1, a2, a3, a4] = err.crossing_witness().unwrap();
        assert!(a1 < a2 && a2 < a3 && a3 < a4);
    }

    #[test]
    fn not_a_partition() {
        for (blocks, n) in [
            (vec![vec![1, 2], vec![2, 3]], 3),
            (vec![vec![1, 2]], 3),
            (vec![vec![1, 4]], 3),
            (vec![vec![], vec![1]], 1),
        ] {
            assert!(matches!(
                validate_noncrossing(blocks, n),
                Err(PartitionError::NotAPartition { .. })
            ));
        }
    }

    #[test]
    fn nesting() {
        let q = p(&[&[1, 2, 6], &[3], &[4, 5]], 6);
        assert!(q.is_nested(BlockRef(2), BlockRef(0)).unwrap());
        let q = p(&[&[1, 2], &[3, 4]], 4);
        assert!(!q.is_nested(BlockRef(0), BlockRef(1)).unwrap());
        let example = p(&[&[1, 2], &[3, 4, 7, 9], &[5, 6], &[8]], 9);
        assert!(example.is_nested(BlockRef(3), BlockRef(1)).unwrap());
        assert!(q.is_nested(BlockRef(0), BlockRef(7)).is_err());
    }

    #[test]
    fn outer_blocks_of_pair_example() {
        let q = pair_example();
        let outer: Vec<&[usize]> = q.outer_blocks().into_iter().map(|r| q.block(r).unwrap()).collect();
        assert_eq!(outer, vec![&[1, 6][..], &[7, 8], &[9, 14]]);
        assert_eq!(NcPartition::singletons(5).outer_blocks().len(), 5);
        assert_eq!(NcPartition::one_block(5).outer_blocks(), vec![BlockRef(0)]);
    }

    #[test]
    fn interval_pairs_of_pair_example() {
        let q = pair_example();
        let ints: Vec<&[usize]> = q.interval_pairs().into_iter().map(|r| q.block(r).unwrap()).collect();
        assert_eq!(ints, vec![&[2, 3][..], &[4, 5], &[7, 8], &[11, 12]]);
        assert_eq!(NcPartition::one_block(2).interval_pairs(), vec![BlockRef(0)]);
        assert!(NcPartition::singletons(3).interval_pairs().is_empty());
    }

    #[test]
    fn restrict_examples() {
        let q = p(&[&[1, 2, 6], &[3], &[4, 5]], 6);
        assert_eq!(q.remove_point(5).unwrap(), p(&[&[1, 2, 5], &[3], &[4]], 5));
        assert_eq!(q.remove_point(3).unwrap(), p(&[&[1, 2, 5], &[3, 4]], 5));
        assert_eq!(q.restrict_relabel(&[1, 2, 3, 4, 5, 6]).unwrap(), q);
        assert_eq!(q.restrict_relabel(&[]), Err(PartitionError::EmptyKeep));
    }

    /// Naive quadruple search, for cross-checking the stack scan.
    fn crosses_naive(blocks: &[Vec<usize>]) -> bool {
        for (i, a) in blocks.iter().enumerate() {
            for (j, b) in blocks.iter().enumerate() {
                if i == j {
                    continue;
                }
                for &a1 in a {
                    for &a3 in a {
                        for &a2 in b {
                            for &a4 in b {
                                if a1 < a2 && a2 < a3 && a3 < a4 {
                                    return true;
                                }
                            }
                        }
                    }
                }
            }
        }
        false
    }

    /// All set partitions of 1..=n as restricted growth strings.
    fn all_set_partitions(n: usize) -> Vec<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        let mut rgs = vec![0usize; n];
        loop {
            let k = rgs.iter().max().unwrap() + 1;
            let mut blocks = vec![Vec::new(); k];
            for (x, &b) in rgs.iter().enumerate() {
                blocks[b].push(x + 1);
            }
            out.push(blocks);
            let mut i = n - 1;
            loop {
                if i == 0 {
                    return out;
                }
                let bound = rgs[..i].iter().max().unwrap() + 1;
                if rgs[i] < bound {
                    rgs[i] += 1;
                    for r in rgs.iter_mut().skip(i + 1) {
                        *r = 0;
                    }
                    break;
                }
                i -= 1;
            }
        }
    }

    #[test]
    fn stack_scan_agrees_with_quadruple_search() {
        for n in 1..=7 {
            let mut nc = 0;
            for blocks in all_set_partitions(n) {
                let naive = crosses_naive(&blocks);
                let res = validate_noncrossing(blocks, n);
                assert_eq!(res.is_err(), naive);
                if let Err(e) = res {
                    let [a1, a2, a3, a4] = e.crossing_witness().unwrap();
                    assert!(a1 < a2 && a2 < a3 && a3 < a4);
                } else {
                    nc += 1;
                }
            }
            assert_eq!(nc, all_noncrossing(n).len());
        }
    }

    #[test]
    fn catalan_counts() {
        let catalan = [1, 2, 5, 14, 42, 132, 429, 1430];
        for n in 1..=8 {
            let all = all_noncrossing(n);
            assert_eq!(all.len(), catalan[n - 1]);
            let mut sorted = all.clone();
            sorted.sort();
            sorted.dedup();
            assert_eq!(sorted.len(), all.len());
        }
    }

    #[test]
    fn restriction_closure_exhaustive() {
        for n in 1..=8 {
            for q in all_noncrossing(n) {
                for mask in 1u32..(1 << n) {
                    let keep: Vec<usize> = (1..=n).filter(|x| mask >> (x - 1) & 1 == 1).collect();
                    let r = q.restrict_relabel(&keep).unwrap();
                    assert!(validate_noncrossing(r.blocks().to_vec(), r.n()).is_ok());
                }
            }
        }
    }

    #[test]
    fn outer_frame_and_unique_outer_container() {
        for n in 1..=8 {
            for q in all_noncrossing(n) {
                let outer = q.outer_blocks();
                let w: Vec<&[usize]> = outer.iter().map(|&r| q.block(r).unwrap()).collect();
                assert_eq!(w[0][0], 1);
                for pair in w.windows(2) {
                    assert_eq!(pair[1][0], pair[0][pair[0].len() - 1] + 1);
                }
                assert_eq!(*w[w.len() - 1].last().unwrap(), n);
                // brute force: outer iff nested in nothing
                for r in q.block_refs() {
                    let containers: Vec<BlockRef> = q
                        .block_refs()
                        .filter(|&o| o != r && q.is_nested(r, o).unwrap())
                        .collect();
                    assert_eq!(containers.is_empty(), outer.contains(&r));
                    if !containers.is_empty() {
                        let outer_containers = containers.iter().filter(|c| outer.contains(c)).count();
                        assert_eq!(outer_containers, 1);
                    }
                }
            }
        }
    }

    #[test]
    fn json_round_trip_and_rejects_crossing() {
        let q = p(&[&[1, 2, 6], &[3], &[4, 5]], 6);
        let s = serde_json::to_string(&q).unwrap();
        assert_eq!(s, r#"{"n":6,"blocks":[[1,2,6],[3],[4,5]]}"#);
        assert_eq!(serde_json::from_str::<NcPartition>(&s).unwrap(), q);
        assert!(serde_json::from_str::<NcPartition>(r#"{"n":4,"blocks":[[1,3],[2,4]]}"#).is_err());
    }
}
