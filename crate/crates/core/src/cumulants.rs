//! Monotone moment-cumulant calculus, the monotone Poisson moments, and the
//! triangle `J_k^(n)` counting ordered partitions by number of blocks.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::closed_forms::factorial;
use crate::laplace::{histograms, LaplaceError, ScanOptions};
use crate::partition::{all_noncrossing, nested, NcPartition};
use crate::stats::StatisticId;
use crate::tree::TreeKind;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CumulantError {
    #[error("need cumulants through order {need}, got {got}")]
    InsufficientCumulants { need: usize, got: usize },
    #[error("need moments through order {need}, got {got}")]
    InsufficientMoments { need: usize, got: usize },
    #[error(transparent)]
    Scan(#[from] LaplaceError),
}

/// `moments[i]` is the moment of order `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MomentSequence(pub Vec<BigRational>);

/// `cumulants[i]` is the cumulant of order `i + 1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CumulantSequence(pub Vec<BigRational>);

impl MomentSequence {
    pub fn get(&self, n: usize) -> &BigRational {
        &self.0[n - 1]
    }
}

impl CumulantSequence {
    pub fn get(&self, n: usize) -> &BigRational {
        &self.0[n - 1]
    }
}

/// For each block, the index of the innermost block containing it.
fn nesting_parents(p: &NcPartition) -> Vec<Option<usize>> {
    let blocks = p.blocks();
    (0..blocks.len())
        .map(|i| {
            (0..blocks.len())
                .filter(|&j| j != i && nested(&blocks[i], &blocks[j]))
                // the innermost container has the largest minimum
                .max_by_key(|&j| blocks[j][0])
        })
        .collect()
}

/// Number of monotonic orderings of `p`: the linear extensions of its
/// nesting forest, `k! / Π subtree sizes`.
pub fn monord(p: &NcPartition) -> BigUint {
    let parents = nesting_parents(p);
    let k = parents.len();
    let mut size = vec![1usize; k];
    // children have larger minima than their parents, so visiting blocks by
    // decreasing minimum finishes every subtree before its root
    for i in (0..k).rev() {
        if let Some(j) = parents[i] {
            size[j] += size[i];
        }
    }
    let denom: BigUint = size.iter().map(|&s| BigUint::from(s)).product();
    let kf: BigUint = (1..=k as u64).map(BigUint::from).product();
    kf / denom
}

/// `monord` by testing every labeling of the blocks.
pub fn monord_bruteforce(p: &NcPartition) -> u64 {
    let blocks = p.blocks();
    let k = blocks.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut count = 0;
    loop {
        let ok = (0..k).all(|i| (0..k).all(|j| !nested(&blocks[i], &blocks[j]) || perm[i] > perm[j]));
        if ok {
            count += 1;
        }
        if !next_permutation(&mut perm) {
            return count;
        }
    }
}

fn next_permutation(a: &mut [usize]) -> bool {
    let Some(i) = (1..a.len()).rev().find(|&i| a[i - 1] < a[i]) else {
        return false;
    };
    let j = (i..a.len()).rev().find(|&j| a[j] > a[i - 1]).unwrap();
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

type Weighted = Arc<Vec<(BigRational, Vec<usize>)>>;

/// `monord(π)/|π|!` for every `π ∈ NC(n)`, with the block sizes. Memoized.
fn weighted_partitions(n: usize) -> Weighted {
    static MEMO: OnceLock<Mutex<HashMap<usize, Weighted>>> = OnceLock::new();
    let memo = MEMO.get_or_init(Default::default);
    if let Some(w) = memo.lock().unwrap().get(&n) {
        return w.clone();
    }
    let w: Weighted = Arc::new(
        all_noncrossing(n)
            .into_par_iter()
            .map(|p| {
                let k = p.num_blocks();
                let w = BigRational::new(BigInt::from(monord(&p)), factorial(k));
                let sizes = p.blocks().iter().map(Vec::len).collect();
                (w, sizes)
            })
            .collect(),
    );
    memo.lock().unwrap().insert(n, w.clone());
    w
}

fn product_of(c: &[BigRational], sizes: &[usize]) -> BigRational {
    sizes.iter().fold(BigRational::one(), |acc, &s| acc * &c[s - 1])
}

/// `μ(Xⁿ) = Σ_{π ∈ NC(n)} monord(π)/|π|! · Π_{V∈π} c_{|V|}` for `n <= upto`.
pub fn moments_from_cumulants(c: &CumulantSequence, upto: usize) -> Result<MomentSequence, CumulantError> {
    if c.0.len() < upto {
        return Err(CumulantError::InsufficientCumulants { need: upto, got: c.0.len() });
    }
    let moments = (1..=upto)
        .map(|n| {
            weighted_partitions(n)
                .iter()
                .fold(BigRational::zero(), |acc, (w, sizes)| acc + w * product_of(&c.0, sizes))
        })
        .collect();
    Ok(MomentSequence(moments))
}

/// Inverts [`moments_from_cumulants`] order by order: the one-block term of
/// order `n` is `c_n` itself, every other term uses lower cumulants only.
pub fn cumulants_from_moments(m: &MomentSequence, upto: usize) -> Result<CumulantSequence, CumulantError> {
    if m.0.len() < upto {
        return Err(CumulantError::InsufficientMoments { need: upto, got: m.0.len() });
    }
    let mut c: Vec<BigRational> = Vec::with_capacity(upto);
    for n in 1..=upto {
        let rest = weighted_partitions(n)
            .iter()
            .filter(|(_, sizes)| sizes.len() > 1)
            .fold(BigRational::zero(), |acc, (w, sizes)| acc + w * product_of(&c, sizes));
        c.push(&m.0[n - 1] - rest);
    }
    Ok(CumulantSequence(c))
}

/// Triangle `J_k^(n)`, `1 <= k <= n <= n_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StirlingTable {
    rows: Vec<Vec<BigUint>>,
}

impl StirlingTable {
    pub fn n_max(&self) -> usize {
        self.rows.len()
    }

    /// `J_k^(n)`.
    pub fn get(&self, n: usize, k: usize) -> &BigUint {
        &self.rows[n - 1][k - 1]
    }

    /// Row `n`, indexed by `k - 1`.
    pub fn row(&self, n: usize) -> &[BigUint] {
        &self.rows[n - 1]
    }

    pub fn rows(&self) -> &[Vec<BigUint>] {
        &self.rows
    }

    /// Counts tree nodes by number of blocks.
    pub fn by_tree_count(n_max: usize, opts: &ScanOptions) -> Result<Self, CumulantError> {
        let mut rows = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let h = histograms(&[StatisticId::BlockCount], n, TreeKind::Full, opts)?;
            let mut row: Vec<BigUint> = h[0].iter().skip(1).map(|&c| BigUint::from(c)).collect();
            row.resize(n, BigUint::zero());
            rows.push(row);
        }
        Ok(StirlingTable { rows })
    }

    /// `J_1 = 1`, `J_n = n!`, `J_k^(n) = J_k^(n−1) + n J_{k−1}^(n−1)`.
    pub fn by_recursion(n_max: usize) -> Self {
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(n_max);
        for n in 1..=n_max {
            let row = (1..=n)
                .map(|k| {
                    if k == 1 {
                        BigUint::one()
                    } else if k == n {
                        (1..=n as u64).map(BigUint::from).product()
                    } else {
                        let prev = &rows[n - 2];
                        &prev[k - 1] + &prev[k - 2] * BigUint::from(n)
                    }
                })
                .collect();
            rows.push(row);
        }
        StirlingTable { rows }
    }

    /// `J_k^(n) = Σ_{2 <= j_1 < … < j_{k−1} <= n} j_1 ⋯ j_{k−1}`, summed over
    /// explicit subsets of `{2..n}`.
    pub fn by_closed_form(n_max: usize) -> Self {
        StirlingTable {
            rows: (1..=n_max).map(closed_form_row).collect(),
        }
    }
}

/// Row `n` of the triangle by subset enumeration, indexed by `k - 1`.
pub fn closed_form_row(n: usize) -> Vec<BigUint> {
    assert!((1..=25).contains(&n), "subset enumeration is exponential");
    let mut row = vec![BigUint::zero(); n];
    let m = n - 1;
    for mask in 0u32..(1u32 << m) {
        let prod: u128 = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| (i + 2) as u128).product();
        row[mask.count_ones() as usize] += BigUint::from(prod);
    }
    row
}

/// Moments `ν_α(Xⁿ) = Σ_k J_k^(n) α^k / k!` of the monotone Poisson
/// distribution, whose cumulants all equal `α`.
pub fn poisson_moments(alpha: &BigRational, upto: usize) -> MomentSequence {
    let table = StirlingTable::by_recursion(upto);
    let moments = (1..=upto)
        .map(|n| {
            let mut acc = BigRational::zero();
            let mut pow = BigRational::one();
            for k in 1..=n {
                pow *= alpha;
                let j = BigRational::from_integer(BigInt::from(table.get(n, k).clone()));
                acc += j * &pow / BigRational::from_integer(factorial(k));
            }
            acc
        })
        .collect();
    MomentSequence(moments)
}

/// Sum of `monord` over `NC(n)`.
pub fn total_orderings(n: usize) -> BigUint {
    all_noncrossing(n).iter().map(monord).sum()
}

/// `J_k^(n)` as `u64` when it fits.
pub fn stirling_u64(t: &StirlingTable, n: usize, k: usize) -> Option<u64> {
    t.get(n, k).to_u64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::validate_noncrossing;
    use crate::poly::{int, ratio};
    use crate::tree::count;
    use proptest::prelude::*;

    fn big(v: &[u64]) -> Vec<BigUint> {
        v.iter().map(|&x| BigUint::from(x)).collect()
    }

    #[test]
    fn monord_examples() {
        assert_eq!(monord(&NcPartition::one_block(5)), BigUint::one());
        assert_eq!(monord(&NcPartition::singletons(5)), BigUint::from(120u32));
        let example = validate_noncrossing(vec![vec![1, 2], vec![3, 4, 7, 9], vec![5, 6], vec![8]], 9).unwrap();
        assert_eq!(monord(&example), BigUint::from(8u32));
        assert_eq!(monord_bruteforce(&example), 8);
    }

    #[test]
    fn monord_hook_length_matches_filter() {
        for n in 1..=7 {
            for p in all_noncrossing(n) {
                assert_eq!(monord(&p), BigUint::from(monord_bruteforce(&p)), "{p}");
            }
        }
    }

    #[test]
    fn monord_weight_at_most_one() {
        for n in 1..=8 {
            for p in all_noncrossing(n) {
                let w = BigRational::new(BigInt::from(monord(&p)), factorial(p.num_blocks()));
                let interval = (0..p.num_blocks()).all(|i| p.is_interval(crate::BlockRef(i)).unwrap());
                assert!(w <= int(1));
                assert_eq!(w == int(1), interval);
            }
        }
    }

    #[test]
    fn orderings_total() {
        for n in 1..=8 {
            assert_eq!(total_orderings(n), count(n, TreeKind::Full));
        }
    }

    #[test]
    fn low_order_moments() {
        let (c1, c2, c3) = (ratio(2, 3), ratio(-5, 7), ratio(11, 2));
        let m = moments_from_cumulants(&CumulantSequence(vec![c1.clone(), c2.clone(), c3.clone()]), 3).unwrap();
        assert_eq!(m.get(1), &c1);
        assert_eq!(m.get(2), &(&c2 + &c1 * &c1));
        assert_eq!(m.get(3), &(&c3 + ratio(5, 2) * &c1 * &c2 + &c1 * &c1 * &c1));
        assert_eq!(
            moments_from_cumulants(&CumulantSequence(vec![c1]), 2),
            Err(CumulantError::InsufficientCumulants { need: 2, got: 1 })
        );
    }

    #[test]
    fn cumulants_of_small_moments() {
        let c = cumulants_from_moments(&MomentSequence(vec![int(1), int(2), int(5)]), 3).unwrap();
        assert_eq!(c.0, vec![int(1), int(1), ratio(3, 2)]);
        assert!(cumulants_from_moments(&MomentSequence(vec![int(1)]), 2).is_err());
    }

    #[test]
    fn stirling_small_rows() {
        for t in [StirlingTable::by_recursion(6), StirlingTable::by_closed_form(6)] {
            assert_eq!(t.row(6), big(&[1, 20, 155, 580, 1044, 720]).as_slice());
            assert_eq!(t.row(3), big(&[1, 5, 6]).as_slice());
            assert_eq!(t.get(4, 3), &BigUint::from(26u32));
        }
        assert_eq!(StirlingTable::by_tree_count(6, &ScanOptions::default()).unwrap(), StirlingTable::by_recursion(6));
    }

    #[test]
    fn stirling_builders_agree() {
        assert_eq!(StirlingTable::by_recursion(16), StirlingTable::by_closed_form(16));
        let t = StirlingTable::by_recursion(12);
        for n in 1..=12 {
            let s: BigUint = t.row(n).iter().sum();
            assert_eq!(s, count(n, TreeKind::Full));
        }
    }

    #[test]
    fn poisson_examples() {
        assert!(poisson_moments(&int(0), 5).0.iter().all(Zero::is_zero));
        assert_eq!(poisson_moments(&int(1), 3).get(3), &ratio(9, 2));
        for alpha in [int(1), int(2), ratio(1, 2), int(-1)] {
            let direct = moments_from_cumulants(&CumulantSequence(vec![alpha.clone(); 6]), 6).unwrap();
            assert_eq!(poisson_moments(&alpha, 6), direct);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn round_trip(raw in proptest::collection::vec((-20i64..=20, 1i64..=9), 6)) {
            let c = CumulantSequence(raw.iter().map(|&(p, q)| ratio(p, q)).collect());
            let m = moments_from_cumulants(&c, 6).unwrap();
            prop_assert_eq!(cumulants_from_moments(&m, 6).unwrap(), c);
        }
    }
}
