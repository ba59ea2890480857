//! Monotonically ordered non-crossing partitions and the two rooted trees on
//! them: the full tree, where a node on `n` points has `n + 2` children, and
//! the pair tree, where a pairing of `2n` points has `2n + 1` children.
//!
//! Tree paths are encoded as mixed-radix words ([`TreeCode`]). Digit `d` at a
//! node on `s` points means: insert the singleton `{d + 1}` if `d <= s`, or
//! elongate the max-labeled block if `d = s + 1`. In the pair tree digit `d`
//! inserts the interval pair `{d + 1, d + 2}`.

use std::fmt;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::{nested, validate_noncrossing, BlockRef, NcPartition, PartitionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error("labels must be a bijection onto 1..={k}")]
    BadLabels { k: usize },
    #[error("ordering is not monotonic: block with label {inner} is nested in block with label {outer}")]
    NotMonotone { inner: usize, outer: usize },
    #[error("the root has no parent")]
    RootHasNoParent,
    #[error("not a pair partition")]
    NotPairPartition,
    #[error("digit {digit} at level {level} out of range 0..{radix}")]
    DigitOutOfRange { level: usize, digit: u32, radix: u32 },
    #[error("rank {rank} out of range for {kind} tree at n={n}")]
    RankOutOfRange { rank: u128, n: usize, kind: TreeKind },
    #[error("tree size n={n} too large for a 128-bit rank")]
    RankOverflow { n: usize },
    #[error("n must be at least 1")]
    EmptyTree,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeKind {
    Full,
    Pair,
}

impl fmt::Display for TreeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TreeKind::Full => "full",
            TreeKind::Pair => "pair",
        })
    }
}

impl TreeKind {
    /// Number of children of a node at depth `level` (the root has level 1).
    pub fn radix(self, level: usize) -> u32 {
        match self {
            TreeKind::Full => level as u32 + 2,
            TreeKind::Pair => 2 * level as u32 + 1,
        }
    }

    /// Number of ground-set points of a node at depth `n`.
    pub fn points(self, n: usize) -> usize {
        match self {
            TreeKind::Full => n,
            TreeKind::Pair => 2 * n,
        }
    }
}

/// A non-crossing partition together with a monotonic ordering of its
/// blocks. `labels[i]` is the label of the `i`-th block in canonical order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedNcPartition {
    partition: NcPartition,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct RawOrdered {
    n: usize,
    blocks_by_label: Vec<Vec<usize>>,
}

impl Serialize for OrderedNcPartition {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        RawOrdered {
            n: self.n(),
            blocks_by_label: self.blocks_by_label().into_iter().map(<[usize]>::to_vec).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrderedNcPartition {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = RawOrdered::deserialize(d)?;
        OrderedNcPartition::from_blocks_by_label(raw.n, raw.blocks_by_label).map_err(serde::de::Error::custom)
    }
}

impl OrderedNcPartition {
    /// Builds `(π, u)` from blocks listed in label order (label 1 first).
    pub fn from_blocks_by_label(n: usize, blocks: Vec<Vec<usize>>) -> Result<Self, TreeError> {
        let mut keyed: Vec<(usize, Vec<usize>)> = blocks
            .into_iter()
            .enumerate()
            .map(|(i, mut b)| {
                b.sort_unstable();
                (i + 1, b)
            })
            .collect();
        let partition = validate_noncrossing(keyed.iter().map(|(_, b)| b.clone()).collect(), n)?;
        keyed.sort_unstable_by_key(|(_, b)| b[0]);
        let labels = keyed.into_iter().map(|(l, _)| l).collect();
        Self::new(partition, labels)
    }

    /// Pairs a partition with labels given in canonical block order.
    pub fn new(partition: NcPartition, labels: Vec<usize>) -> Result<Self, TreeError> {
        let k = partition.num_blocks();
        let mut seen = vec![false; k + 1];
        if labels.len() != k {
            return Err(TreeError::BadLabels { k });
        }
        for &l in &labels {
            if l == 0 || l > k || seen[l] {
                return Err(TreeError::BadLabels { k });
            }
            seen[l] = true;
        }
        let blocks = partition.blocks();
        for i in 0..k {
            for j in 0..k {
                if i != j && nested(&blocks[i], &blocks[j]) && labels[i] < labels[j] {
                    return Err(TreeError::NotMonotone {
                        inner: labels[i],
                        outer: labels[j],
                    });
                }
            }
        }
        Ok(OrderedNcPartition { partition, labels })
    }

    fn from_parts_unchecked(partition: NcPartition, labels: Vec<usize>) -> Self {
        let op = OrderedNcPartition { partition, labels };
        debug_assert!(Self::new(op.partition.clone(), op.labels.clone()).is_ok());
        op
    }

    /// The unique element of level 1.
    pub fn root() -> Self {
        Self::from_parts_unchecked(NcPartition::one_block(1), vec![1])
    }

    /// The root of the pair tree, `{{1,2}}`.
    pub fn pair_root() -> Self {
        Self::from_parts_unchecked(NcPartition::one_block(2), vec![1])
    }

    pub fn partition(&self) -> &NcPartition {
        &self.partition
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn num_blocks(&self) -> usize {
        self.labels.len()
    }

    pub fn label(&self, r: BlockRef) -> usize {
        self.labels[r.0]
    }

    /// Labels in canonical block order.
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn blocks_by_label(&self) -> Vec<&[usize]> {
        let mut out: Vec<&[usize]> = vec![&[]; self.labels.len()];
        for (b, &l) in self.partition.blocks().iter().zip(&self.labels) {
            out[l - 1] = b;
        }
        out
    }

    /// `J(π,u)`, the block carrying the largest label.
    pub fn max_label_block(&self) -> BlockRef {
        let k = self.labels.len();
        BlockRef(self.labels.iter().position(|&l| l == k).expect("labels are a bijection"))
    }

    fn j_block(&self) -> &[usize] {
        &self.partition.blocks()[self.max_label_block().0]
    }

    /// Deletes `max J` and drops `J` if it was a singleton; surviving blocks
    /// keep their labels.
    pub fn parent(&self) -> Result<Self, TreeError> {
        if self.n() == 1 {
            return Err(TreeError::RootHasNoParent);
        }
        let j = self.max_label_block();
        let m = *self.j_block().last().unwrap();
        let partition = self.partition.remove_point(m)?;
        let labels = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != j.0 || self.partition.blocks()[b].len() > 1)
            .map(|(_, &l)| l)
            .collect();
        Ok(Self::from_parts_unchecked(partition, labels))
    }

    /// The `n + 2` children of a node on `n` points, in digit order.
    pub fn children(&self) -> Vec<Self> {
        let s = self.n();
        let mut out: Vec<Self> = (0..=s).map(|d| self.singleton_child(d + 1)).collect();
        out.push(self.elongation_child());
        out
    }

    /// The child obtained by taking digit `d`.
    pub fn child(&self, d: u32) -> Result<Self, TreeError> {
        let s = self.n();
        let radix = s as u32 + 2;
        match d as usize {
            d if d <= s => Ok(self.singleton_child(d + 1)),
            d if d == s + 1 => Ok(self.elongation_child()),
            _ => Err(TreeError::DigitOutOfRange { level: s, digit: d, radix }),
        }
    }

    fn singleton_child(&self, m: usize) -> Self {
        let k = self.labels.len();
        let shift = |x: usize| if x >= m { x + 1 } else { x };
        let mut pairs: Vec<(Vec<usize>, usize)> = self
            .partition
            .blocks()
            .iter()
            .zip(&self.labels)
            .map(|(b, &l)| (b.iter().map(|&x| shift(x)).collect(), l))
            .collect();
        pairs.push((vec![m], k + 1));
        Self::assemble(self.n() + 1, pairs)
    }

    fn elongation_child(&self) -> Self {
        let j = self.max_label_block().0;
        let q = *self.j_block().last().unwrap();
        let pairs = self
            .partition
            .blocks()
            .iter()
            .zip(&self.labels)
            .enumerate()
            .map(|(i, (b, &l))| {
                let mut nb: Vec<usize> = b.iter().map(|&x| if x > q { x + 1 } else { x }).collect();
                if i == j {
                    nb.push(q + 1);
                }
                (nb, l)
            })
            .collect();
        Self::assemble(self.n() + 1, pairs)
    }

    fn assemble(n: usize, mut pairs: Vec<(Vec<usize>, usize)>) -> Self {
        pairs.sort_unstable_by_key(|(b, _)| b[0]);
        let (blocks, labels): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Self::from_parts_unchecked(NcPartition::from_canonical(n, blocks), labels)
    }

    /// Deletes both points of `J`, which must be an interval pair.
    pub fn pair_parent(&self) -> Result<Self, TreeError> {
        if !self.partition.is_pair_partition() {
            return Err(TreeError::NotPairPartition);
        }
        if self.n() == 2 {
            return Err(TreeError::RootHasNoParent);
        }
        let j = self.max_label_block();
        let keep: Vec<usize> = (1..=self.n()).filter(|x| !self.j_block().contains(x)).collect();
        let partition = self.partition.restrict_relabel(&keep)?;
        let labels = self
            .labels
            .iter()
            .enumerate()
            .filter(|&(b, _)| b != j.0)
            .map(|(_, &l)| l)
            .collect();
        Ok(Self::from_parts_unchecked(partition, labels))
    }

    /// The `2n + 1` pair-children of a pairing of `2n` points: child `m`
    /// inserts `{m, m+1}` with the new maximal label.
    pub fn pair_children(&self) -> Result<Vec<Self>, TreeError> {
        if !self.partition.is_pair_partition() {
            return Err(TreeError::NotPairPartition);
        }
        Ok((1..=self.n() + 1).map(|m| self.pair_child_at(m)).collect())
    }

    fn pair_child_at(&self, m: usize) -> Self {
        let k = self.labels.len();
        let mut pairs: Vec<(Vec<usize>, usize)> = self
            .partition
            .blocks()
            .iter()
            .zip(&self.labels)
            .map(|(b, &l)| (b.iter().map(|&x| if x >= m { x + 2 } else { x }).collect(), l))
            .collect();
        pairs.push((vec![m, m + 1], k + 1));
        Self::assemble(self.n() + 2, pairs)
    }

    /// The digit leading from the parent to this node.
    fn last_digit(&self, kind: TreeKind) -> u32 {
        let j = self.j_block();
        match kind {
            TreeKind::Full if j.len() == 1 => (j[0] - 1) as u32,
            TreeKind::Full => self.n() as u32,
            TreeKind::Pair => (j[0] - 1) as u32,
        }
    }

    /// Path code from the root.
    pub fn encode(&self, kind: TreeKind) -> Result<TreeCode, TreeError> {
        if kind == TreeKind::Pair && !self.partition.is_pair_partition() {
            return Err(TreeError::NotPairPartition);
        }
        let mut digits = Vec::new();
        let mut cur = self.clone();
        let root_points = kind.points(1);
        while cur.n() > root_points {
            digits.push(cur.last_digit(kind));
            cur = match kind {
                TreeKind::Full => cur.parent()?,
                TreeKind::Pair => cur.pair_parent()?,
            };
        }
        digits.reverse();
        Ok(TreeCode {
            kind,
            n: digits.len() + 1,
            digits,
        })
    }

    /// Position in enumeration order.
    pub fn rank(&self, kind: TreeKind) -> Result<u128, TreeError> {
        self.encode(kind)?.rank()
    }

    pub fn to_word(&self) -> LabelWord {
        let mut labels = vec![0u8; self.n()];
        for (b, &l) in self.partition.blocks().iter().zip(&self.labels) {
            for &x in b {
                labels[x - 1] = l as u8;
            }
        }
        LabelWord {
            labels,
            blocks: self.labels.len() as u8,
        }
    }
}

impl fmt::Display for OrderedNcPartition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.blocks_by_label().into_iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{}:{:?}", i + 1, b)?;
        }
        write!(f, ")")
    }
}

/// Root-to-node path in one of the trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCode", into = "RawCode")]
pub struct TreeCode {
    kind: TreeKind,
    n: usize,
    digits: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawCode {
    kind: TreeKind,
    digits: Vec<u32>,
}

impl TryFrom<RawCode> for TreeCode {
    type Error = TreeError;
    fn try_from(raw: RawCode) -> Result<Self, TreeError> {
        TreeCode::new(raw.kind, raw.digits)
    }
}

impl From<TreeCode> for RawCode {
    fn from(c: TreeCode) -> Self {
        RawCode {
            kind: c.kind,
            digits: c.digits,
        }
    }
}

impl TreeCode {
    pub fn new(kind: TreeKind, digits: Vec<u32>) -> Result<Self, TreeError> {
        for (i, &d) in digits.iter().enumerate() {
            let radix = kind.radix(i + 1);
            if d >= radix {
                return Err(TreeError::DigitOutOfRange {
                    level: i + 1,
                    digit: d,
                    radix,
                });
            }
        }
        Ok(TreeCode {
            kind,
            n: digits.len() + 1,
            digits,
        })
    }

    pub fn kind(&self) -> TreeKind {
        self.kind
    }

    /// Depth of the target node (1 for the root).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    /// Follows the path from the root.
    pub fn decode(&self) -> OrderedNcPartition {
        let mut w = LabelWord::root(self.kind);
        for &d in &self.digits {
            w.push_child(self.kind, d);
        }
        w.to_ordered()
    }

    pub fn rank(&self) -> Result<u128, TreeError> {
        let mut r: u128 = 0;
        for (i, &d) in self.digits.iter().enumerate() {
            r = r
                .checked_mul(self.kind.radix(i + 1) as u128)
                .and_then(|r| r.checked_add(d as u128))
                .ok_or(TreeError::RankOverflow { n: self.n })?;
        }
        Ok(r)
    }

    pub fn unrank(rank: u128, n: usize, kind: TreeKind) -> Result<Self, TreeError> {
        if n == 0 {
            return Err(TreeError::EmptyTree);
        }
        let total = count_u128(n, kind)?;
        if rank >= total {
            return Err(TreeError::RankOutOfRange { rank, n, kind });
        }
        let mut digits = vec![0u32; n - 1];
        let mut r = rank;
        for i in (0..n - 1).rev() {
            let radix = kind.radix(i + 1) as u128;
            digits[i] = (r % radix) as u32;
            r /= radix;
        }
        Ok(TreeCode { kind, n, digits })
    }
}

/// `(n+1)!/2` for the full tree, `(2n-1)!!` for the pair tree.
pub fn count(n: usize, kind: TreeKind) -> BigUint {
    (1..n).map(|i| BigUint::from(kind.radix(i))).product()
}

pub fn count_u128(n: usize, kind: TreeKind) -> Result<u128, TreeError> {
    (1..n).try_fold(1u128, |acc, i| acc.checked_mul(kind.radix(i) as u128)).ok_or(TreeError::RankOverflow { n })
}

pub fn unrank(rank: u128, n: usize, kind: TreeKind) -> Result<OrderedNcPartition, TreeError> {
    Ok(TreeCode::unrank(rank, n, kind)?.decode())
}

/// Compact node representation used on enumeration hot paths: the label of
/// every point, plus the number of blocks.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelWord {
    labels: Vec<u8>,
    blocks: u8,
}

#[derive(Debug, Clone, Copy)]
struct Undo {
    at: u8,
    width: u8,
    new_block: bool,
}

impl LabelWord {
    pub fn root(kind: TreeKind) -> Self {
        LabelWord {
            labels: vec![1; kind.points(1)],
            blocks: 1,
        }
    }

    /// Label of each point, index 0 holding point 1.
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks as usize
    }

    pub fn points(&self) -> usize {
        self.labels.len()
    }

    fn push_child(&mut self, kind: TreeKind, d: u32) -> Undo {
        let s = self.labels.len();
        let d = d as usize;
        let k = self.blocks;
        match kind {
            TreeKind::Full if d <= s => {
                self.labels.insert(d, k + 1);
                self.blocks += 1;
                Undo {
                    at: d as u8,
                    width: 1,
                    new_block: true,
                }
            }
            TreeKind::Full => {
                let q = self.labels.iter().rposition(|&l| l == k).unwrap();
                self.labels.insert(q + 1, k);
                Undo {
                    at: (q + 1) as u8,
                    width: 1,
                    new_block: false,
                }
            }
            TreeKind::Pair => {
                self.labels.splice(d..d, [k + 1, k + 1]);
                self.blocks += 1;
                Undo {
                    at: d as u8,
                    width: 2,
                    new_block: true,
                }
            }
        }
    }

    fn pop_child(&mut self, u: Undo) {
        let at = u.at as usize;
        self.labels.drain(at..at + u.width as usize);
        if u.new_block {
            self.blocks -= 1;
        }
    }

    pub fn to_ordered(&self) -> OrderedNcPartition {
        let k = self.blocks as usize;
        let mut by_label: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &l) in self.labels.iter().enumerate() {
            by_label[l as usize - 1].push(i + 1);
        }
        let pairs = by_label.into_iter().enumerate().map(|(i, b)| (b, i + 1)).collect();
        OrderedNcPartition::assemble(self.labels.len(), pairs)
    }
}

/// Depth-first walk over one level of a tree, positioned at an arbitrary
/// rank. Holds one word plus an undo record per level.
#[derive(Debug, Clone)]
pub struct Cursor {
    kind: TreeKind,
    word: LabelWord,
    digits: Vec<u32>,
    undo: Vec<Undo>,
    rank: u128,
    end: u128,
}

impl Cursor {
    /// Cursor over ranks `start..end` of level `n`.
    pub fn new(n: usize, kind: TreeKind, start: u128, end: u128) -> Result<Self, TreeError> {
        let total = count_u128(n, kind)?;
        let end = end.min(total);
        let start = start.min(end);
        let code = if start < total {
            TreeCode::unrank(start, n, kind)?
        } else {
            TreeCode {
                kind,
                n,
                digits: vec![0; n.saturating_sub(1)],
            }
        };
        let mut word = LabelWord::root(kind);
        let undo = code.digits.iter().map(|&d| word.push_child(kind, d)).collect();
        Ok(Cursor {
            kind,
            word,
            digits: code.digits,
            undo,
            rank: start,
            end,
        })
    }

    pub fn rank(&self) -> u128 {
        self.rank
    }

    pub fn word(&self) -> &LabelWord {
        &self.word
    }

    pub fn digits(&self) -> &[u32] {
        &self.digits
    }

    pub fn is_done(&self) -> bool {
        self.rank >= self.end
    }

    /// Moves to the next rank; returns false once the range is exhausted.
    pub fn advance(&mut self) -> bool {
        self.rank += 1;
        if self.rank >= self.end {
            return false;
        }
        let depth = self.digits.len();
        let mut i = depth;
        loop {
            // rank < total guarantees some level can still be incremented
            i -= 1;
            let u = self.undo.pop().unwrap();
            self.word.pop_child(u);
            self.digits[i] += 1;
            if self.digits[i] < self.kind.radix(i + 1) {
                break;
            }
        }
        for j in i..depth {
            if j > i {
                self.digits[j] = 0;
            }
            let u = self.word.push_child(self.kind, self.digits[j]);
            self.undo.push(u);
        }
        true
    }
}

/// Calls `f(rank, word)` for every node of level `n` with rank in `range`.
pub fn for_each_in_range(
    n: usize,
    kind: TreeKind,
    range: std::ops::Range<u128>,
    mut f: impl FnMut(u128, &LabelWord),
) -> Result<(), TreeError> {
    let mut c = Cursor::new(n, kind, range.start, range.end)?;
    if c.is_done() {
        return Ok(());
    }
    loop {
        f(c.rank(), c.word());
        if !c.advance() {
            return Ok(());
        }
    }
}

/// Splits `0..total` into at most `shards` contiguous ranges.
pub fn shard_ranges(total: u128, shards: usize) -> Vec<std::ops::Range<u128>> {
    let shards = (shards.max(1) as u128).min(total.max(1));
    let step = total.div_ceil(shards);
    (0..shards)
        .map(|i| (i * step).min(total)..((i + 1) * step).min(total))
        .filter(|r| !r.is_empty())
        .collect()
}

/// Streams a whole level in rank order.
pub struct Enumerate {
    cursor: Cursor,
    started: bool,
}

impl Iterator for Enumerate {
    type Item = OrderedNcPartition;

    fn next(&mut self) -> Option<Self::Item> {
        if self.started {
            if !self.cursor.advance() {
                return None;
            }
        } else {
            self.started = true;
            if self.cursor.is_done() {
                return None;
            }
        }
        Some(self.cursor.word().to_ordered())
    }
}

pub fn enumerate(n: usize, kind: TreeKind) -> Result<Enumerate, TreeError> {
    if n == 0 {
        return Err(TreeError::EmptyTree);
    }
    Ok(Enumerate {
        cursor: Cursor::new(n, kind, 0, u128::MAX)?,
        started: false,
    })
}
