//! Statistics of ordered (pair-)partitions and the certification of their
//! child-step transition rules.

use std::fmt;
use std::str::FromStr;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::partition::NcPartition;
use crate::poly::int;
use crate::tree::{enumerate, LabelWord, OrderedNcPartition, TreeError, TreeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StatError {
    #[error("area requires a pair partition")]
    AreaRequiresPairPartition,
    #[error("not a pair partition")]
    NotPairPartition,
    #[error("{0} is not recursive of the first kind")]
    NotFirstKind(StatisticId),
    #[error("{0} is not recursive of the second kind on the {1} tree")]
    NotSecondKind(StatisticId, TreeKind),
    #[error("transition rule fails at {witness}: {detail}")]
    VerificationFailed { witness: String, detail: String },
    #[error("unknown statistic {0:?}")]
    UnknownStatistic(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// The statistics studied: `Y`, `Yℓ`, `Yge3`, `Out`, `Int`, `Area`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StatisticId {
    BlockCount,
    BlocksOfSize(usize),
    BlocksAtLeast3,
    OuterBlocks,
    IntervalPairs,
    Area,
}

impl fmt::Display for StatisticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StatisticId::BlockCount => write!(f, "Y"),
            StatisticId::BlocksOfSize(l) => write!(f, "Y{l}"),
            StatisticId::BlocksAtLeast3 => write!(f, "Yge3"),
            StatisticId::OuterBlocks => write!(f, "Out"),
            StatisticId::IntervalPairs => write!(f, "Int"),
            StatisticId::Area => write!(f, "Area"),
        }
    }
}

impl FromStr for StatisticId {
    type Err = StatError;
    fn from_str(s: &str) -> Result<Self, StatError> {
        let bad = || StatError::UnknownStatistic(s.to_string());
        Ok(match s {
            "Y" => StatisticId::BlockCount,
            "Yge3" => StatisticId::BlocksAtLeast3,
            "Out" => StatisticId::OuterBlocks,
            "Int" => StatisticId::IntervalPairs,
            "Area" => StatisticId::Area,
            _ => {
                let l: usize = s.strip_prefix('Y').ok_or_else(bad)?.parse().map_err(|_| bad())?;
                if l == 0 {
                    return Err(bad());
                }
                StatisticId::BlocksOfSize(l)
            }
        })
    }
}

impl Serialize for StatisticId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StatisticId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Input vector `r` of a first-kind recursion: a child whose max-labeled
/// block has size `j` changes the statistic by `r[j-1]` (by 0 if `j > k`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstKindInput {
    pub r: Vec<BigRational>,
}

impl FirstKindInput {
    pub fn from_ints(r: &[i64]) -> Self {
        assert!(!r.is_empty());
        FirstKindInput {
            r: r.iter().map(|&x| int(x)).collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.r.len()
    }

    /// Increment for a child with `|J| = j`.
    pub fn step(&self, j: usize) -> BigRational {
        self.r.get(j - 1).cloned().unwrap_or_else(|| int(0))
    }
}

/// Parameters `(α, β; q)` of a second-kind recursion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecondKindInput {
    pub alpha: i64,
    pub beta: i64,
    pub q: i64,
}

/// Value of a statistic on an ordered partition.
pub fn evaluate(stat: StatisticId, op: &OrderedNcPartition) -> Result<BigRational, StatError> {
    let p = op.partition();
    let v = match stat {
        StatisticId::BlockCount => p.num_blocks() as i64,
        StatisticId::BlocksOfSize(l) => p.blocks().iter().filter(|b| b.len() == l).count() as i64,
        StatisticId::BlocksAtLeast3 => p.blocks().iter().filter(|b| b.len() >= 3).count() as i64,
        StatisticId::OuterBlocks => p.outer_blocks().len() as i64,
        StatisticId::IntervalPairs => p.interval_pairs().len() as i64,
        StatisticId::Area => area(p).map_err(|_| StatError::AreaRequiresPairPartition)? as i64,
    };
    Ok(int(v))
}

/// Slope word of the Dyck path: `+1` at each pair opener, `-1` at each closer.
pub fn dyck_path(p: &NcPartition) -> Result<Vec<i8>, StatError> {
    if !p.is_pair_partition() {
        return Err(StatError::NotPairPartition);
    }
    let mut path = vec![0i8; p.n()];
    for b in p.blocks() {
        path[b[0] - 1] = 1;
        path[b[1] - 1] = -1;
    }
    Ok(path)
}

/// Area under the Dyck path, as `Σ (max V − min V)`.
pub fn area(p: &NcPartition) -> Result<u64, StatError> {
    if !p.is_pair_partition() {
        return Err(StatError::NotPairPartition);
    }
    Ok(p.blocks().iter().map(|b| (b[1] - b[0]) as u64).sum())
}

const MAX_LABELS: usize = 256;

/// Value of `stat` computed straight from a label word, for enumeration
/// hot paths.
pub fn word_value(stat: StatisticId, w: &LabelWord) -> Result<u64, StatError> {
    let labels = w.labels();
    let k = w.num_blocks();
    debug_assert!(k < MAX_LABELS);
    let mut size = [0u16; MAX_LABELS];
    let mut first = [u16::MAX; MAX_LABELS];
    let mut last = [0u16; MAX_LABELS];
    for (i, &l) in labels.iter().enumerate() {
        let l = l as usize;
        size[l] += 1;
        if first[l] == u16::MAX {
            first[l] = i as u16;
        }
        last[l] = i as u16;
    }
    let sizes = &size[1..=k];
    Ok(match stat {
        StatisticId::BlockCount => k as u64,
        StatisticId::BlocksOfSize(l) => sizes.iter().filter(|&&s| s as usize == l).count() as u64,
        StatisticId::BlocksAtLeast3 => sizes.iter().filter(|&&s| s >= 3).count() as u64,
        StatisticId::OuterBlocks => {
            let mut reach: i32 = -1;
            let mut outer = 0;
            for (i, &l) in labels.iter().enumerate() {
                let l = l as usize;
                if first[l] as usize == i {
                    if i as i32 > reach {
                        outer += 1;
                    }
                    reach = reach.max(last[l] as i32);
                }
            }
            outer
        }
        StatisticId::IntervalPairs => (1..=k).filter(|&l| size[l] == 2 && last[l] == first[l] + 1).count() as u64,
        StatisticId::Area => {
            if sizes.iter().any(|&s| s != 2) {
                return Err(StatError::AreaRequiresPairPartition);
            }
            (1..=k).map(|l| (last[l] - first[l]) as u64).sum()
        }
    })
}

/// The known first-kind input of a statistic.
pub fn first_kind_input(stat: StatisticId) -> Result<FirstKindInput, StatError> {
    Ok(match stat {
        StatisticId::BlockCount => FirstKindInput::from_ints(&[1]),
        StatisticId::BlocksOfSize(1) => FirstKindInput::from_ints(&[1, -1]),
        StatisticId::BlocksOfSize(l) => {
            let mut r = vec![0; l + 1];
            r[l - 1] = 1;
            r[l] = -1;
            FirstKindInput::from_ints(&r)
        }
        StatisticId::BlocksAtLeast3 => FirstKindInput::from_ints(&[0, 0, 1]),
        other => return Err(StatError::NotFirstKind(other)),
    })
}

/// Returns the first-kind input of `stat` after checking the transition rule
/// on every node of the full tree up to level `bound`.
pub fn certify_first_kind(stat: StatisticId, bound: usize) -> Result<FirstKindInput, StatError> {
    let input = first_kind_input(stat)?;
    for n in 2..=bound {
        for x in enumerate(n, TreeKind::Full)? {
            let parent = x.parent()?;
            let j = x.partition().block(x.max_label_block()).unwrap().len();
            let diff = evaluate(stat, &x)? - evaluate(stat, &parent)?;
            if diff != input.step(j) {
                return Err(StatError::VerificationFailed {
                    witness: serde_json::to_string(&x).unwrap(),
                    detail: format!("{stat} changes by {diff}, expected {} for |J|={j}", input.step(j)),
                });
            }
        }
    }
    Ok(input)
}

/// The known second-kind input of a statistic on a tree.
pub fn second_kind_input(stat: StatisticId, kind: TreeKind) -> Result<SecondKindInput, StatError> {
    match (stat, kind) {
        (StatisticId::OuterBlocks, _) => Ok(SecondKindInput { alpha: 1, beta: 0, q: 1 }),
        (StatisticId::IntervalPairs, TreeKind::Pair) => Ok(SecondKindInput { alpha: 0, beta: 1, q: 0 }),
        _ => Err(StatError::NotSecondKind(stat, kind)),
    }
}

/// The digits of the children forming `C_o` of a parent.
///
/// Outer blocks: insert the new singleton (or pair) just before an outer
/// block, or at the very end. Interval pairs: insert the new pair inside an
/// existing interval pair.
pub fn special_children(stat: StatisticId, kind: TreeKind, parent: &OrderedNcPartition) -> Result<Vec<u32>, StatError> {
    let p = parent.partition();
    let mut digits: Vec<u32> = match (stat, kind) {
        (StatisticId::OuterBlocks, _) => {
            let mut d: Vec<u32> = p.outer_blocks().iter().map(|&r| (p.block(r).unwrap()[0] - 1) as u32).collect();
            d.push(p.n() as u32);
            d
        }
        (StatisticId::IntervalPairs, TreeKind::Pair) => p
            .interval_pairs()
            .iter()
            .map(|&r| p.block(r).unwrap()[0] as u32)
            .collect(),
        _ => return Err(StatError::NotSecondKind(stat, kind)),
    };
    digits.sort_unstable();
    Ok(digits)
}

/// Per-parent outcome of a second-kind check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecondKindWitness {
    pub parents_checked: u64,
}

/// Returns the second-kind input after checking, for every parent up to
/// level `bound - 1`, that the constructed `C_o` satisfies all three clauses.
pub fn certify_second_kind(stat: StatisticId, kind: TreeKind, bound: usize) -> Result<SecondKindInput, StatError> {
    certify_second_kind_counted(stat, kind, bound).map(|(i, _)| i)
}

pub fn certify_second_kind_counted(
    stat: StatisticId,
    kind: TreeKind,
    bound: usize,
) -> Result<(SecondKindInput, SecondKindWitness), StatError> {
    let input = second_kind_input(stat, kind)?;
    let mut checked = 0u64;
    for n in 1..bound {
        for parent in enumerate(n, kind)? {
            check_second_kind_at(stat, kind, input, &parent)?;
            checked += 1;
        }
    }
    Ok((input, SecondKindWitness { parents_checked: checked }))
}

/// Checks clauses (1)-(3) for the children of a single parent.
pub fn check_second_kind_at(
    stat: StatisticId,
    kind: TreeKind,
    input: SecondKindInput,
    parent: &OrderedNcPartition,
) -> Result<(), StatError> {
    let special = special_children(stat, kind, parent)?;
    let z = evaluate(stat, parent)?;
    let children = match kind {
        TreeKind::Full => parent.children(),
        TreeKind::Pair => parent.pair_children()?,
    };
    let fail = |detail: String| StatError::VerificationFailed {
        witness: serde_json::to_string(parent).unwrap(),
        detail,
    };
    for (d, c) in children.iter().enumerate() {
        let in_co = special.binary_search(&(d as u32)).is_ok();
        let step = if in_co { input.alpha } else { input.beta };
        let got = evaluate(stat, c)? - &z;
        if got != int(step) {
            return Err(fail(format!("child {d} changes {stat} by {got}, expected {step}")));
        }
    }
    if int(special.len() as i64) != &z + int(input.q) {
        return Err(fail(format!("|C_o| = {} but {stat} + q = {}", special.len(), &z + int(input.q))));
    }
    Ok(())
}
