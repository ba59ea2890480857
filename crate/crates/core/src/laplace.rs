//! Combinatorial Laplace transforms `L_n(t) = Σ t^{Z(π,u)}` over a tree
//! level, by exhaustive enumeration and by the first- and second-kind
//! recursions, and the moments they encode.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;
use thiserror::Error;

use crate::poly::{int, ExactPolynomial};
use crate::stats::{word_value, FirstKindInput, SecondKindInput, StatError, StatisticId};
use crate::tree::{count_u128, for_each_in_range, shard_ranges, TreeError, TreeKind};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LaplaceError {
    #[error("{kind} tree at n={n} exceeds the size bound {max}")]
    SizeBoundExceeded { n: usize, kind: TreeKind, max: usize },
    #[error("recursion needs {need} seed polynomials, got {got}")]
    InsufficientSeed { need: usize, got: usize },
    #[error("recursion produced the negative exponent {exponent} at n={n}")]
    NegativeExponent { exponent: i64, n: usize },
    #[error("input entry {0} is not an integer")]
    NonIntegralInput(BigRational),
    #[error("recursion requires n >= {min}, got {n}")]
    BadLevel { n: usize, min: usize },
    #[error("transform vanishes at t = 1")]
    ZeroPolynomial,
    #[error(transparent)]
    Stat(#[from] StatError),
    #[error(transparent)]
    Tree(#[from] TreeError),
}

/// Limits and parallelism for exhaustive scans.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScanOptions {
    pub max_full: usize,
    pub max_pair: usize,
    pub shards: usize,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            max_full: 10,
            max_pair: 8,
            shards: 64,
        }
    }
}

impl ScanOptions {
    pub fn check(&self, n: usize, kind: TreeKind) -> Result<(), LaplaceError> {
        let max = match kind {
            TreeKind::Full => self.max_full,
            TreeKind::Pair => self.max_pair,
        };
        if n > max {
            return Err(LaplaceError::SizeBoundExceeded { n, kind, max });
        }
        Ok(())
    }
}

/// Value histograms of several statistics over one tree level, computed in a
/// single sharded pass. `out[s][v]` counts nodes where statistic `s` equals `v`.
pub fn histograms(
    stats: &[StatisticId],
    n: usize,
    kind: TreeKind,
    opts: &ScanOptions,
) -> Result<Vec<Vec<u64>>, LaplaceError> {
    opts.check(n, kind)?;
    let total = count_u128(n, kind)?;
    let shards = shard_ranges(total, opts.shards);
    let parts: Vec<Result<Vec<Vec<u64>>, LaplaceError>> = shards
        .into_par_iter()
        .map(|range| {
            let mut h: Vec<Vec<u64>> = vec![Vec::new(); stats.len()];
            let mut err = None;
            for_each_in_range(n, kind, range, |_, w| {
                if err.is_some() {
                    return;
                }
                for (s, hist) in stats.iter().zip(h.iter_mut()) {
                    match word_value(*s, w) {
                        Ok(v) => {
                            let v = v as usize;
                            if hist.len() <= v {
                                hist.resize(v + 1, 0);
                            }
                            hist[v] += 1;
                        }
                        Err(e) => err = Some(e),
                    }
                }
            })?;
            match err {
                Some(e) => Err(e.into()),
                None => Ok(h),
            }
        })
        .collect();
    let mut acc: Vec<Vec<u64>> = vec![Vec::new(); stats.len()];
    for part in parts {
        for (a, h) in acc.iter_mut().zip(part?) {
            if a.len() < h.len() {
                a.resize(h.len(), 0);
            }
            for (x, y) in a.iter_mut().zip(h) {
                *x += y;
            }
        }
    }
    Ok(acc)
}

pub fn polynomial_from_histogram(h: &[u64]) -> ExactPolynomial {
    ExactPolynomial::from_counts(h.iter().enumerate().map(|(v, &c)| (v as u32, c)))
}

/// `L_n` by enumerating the whole level.
pub fn laplace_bruteforce(stat: StatisticId, n: usize, kind: TreeKind) -> Result<ExactPolynomial, LaplaceError> {
    laplace_bruteforce_with(stat, n, kind, &ScanOptions::default())
}

pub fn laplace_bruteforce_with(
    stat: StatisticId,
    n: usize,
    kind: TreeKind,
    opts: &ScanOptions,
) -> Result<ExactPolynomial, LaplaceError> {
    let h = histograms(&[stat], n, kind, opts)?;
    Ok(polynomial_from_histogram(&h[0]))
}

/// Brute-force transforms `L_1..=L_k`, the seeds of a recursion.
pub fn bruteforce_seeds(stat: StatisticId, k: usize, kind: TreeKind) -> Result<Vec<ExactPolynomial>, LaplaceError> {
    (1..=k).map(|n| laplace_bruteforce(stat, n, kind)).collect()
}

/// Laurent polynomial used for intermediate recursion terms, where negative
/// input entries produce negative exponents that must cancel in the end.
#[derive(Debug, Clone, Default, PartialEq)]
struct Laurent(BTreeMap<i64, BigRational>);

impl Laurent {
    fn from_poly(p: &ExactPolynomial) -> Self {
        Laurent(p.terms().map(|(e, c)| (e as i64, c.clone())).collect())
    }

    fn monomial(e: i64, c: BigRational) -> Self {
        let mut l = Laurent::default();
        l.add_term(e, c);
        l
    }

    fn add_term(&mut self, e: i64, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.0.entry(e).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.0.remove(&e);
        }
    }

    fn add(&mut self, other: &Laurent) {
        for (&e, c) in &other.0 {
            self.add_term(e, c.clone());
        }
    }

    fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = Laurent::default();
        for (&a, x) in &self.0 {
            for (&b, y) in &other.0 {
                out.add_term(a + b, x * y);
            }
        }
        out
    }

    fn derivative(&self) -> Laurent {
        let mut out = Laurent::default();
        for (&e, c) in &self.0 {
            out.add_term(e - 1, c * int(e));
        }
        out
    }

    fn into_poly(self, n: usize) -> Result<ExactPolynomial, LaplaceError> {
        let mut p = ExactPolynomial::zero();
        for (e, c) in self.0 {
            if e < 0 {
                return Err(LaplaceError::NegativeExponent { exponent: e, n });
            }
            p.add_term(e as u32, c);
        }
        Ok(p)
    }
}

fn integral(r: &BigRational) -> Result<i64, LaplaceError> {
    if !r.is_integer() {
        return Err(LaplaceError::NonIntegralInput(r.clone()));
    }
    r.to_integer().to_i64().ok_or_else(|| LaplaceError::NonIntegralInput(r.clone()))
}

/// `L_n` from the first-kind recursion
///
/// `L_m = (1 + m t^{r_1}) L_{m-1}
///        + Σ_{j=2..k} (m-j+1)(t^{r_j} - 1) t^{r_1+...+r_{j-1}} L_{m-j}`
///
/// for `m > k`, started from the seeds `L_1..=L_k`.
pub fn recurse_first_kind(
    input: &FirstKindInput,
    seed: &[ExactPolynomial],
    n: usize,
) -> Result<ExactPolynomial, LaplaceError> {
    let k = input.k();
    if seed.len() < k {
        return Err(LaplaceError::InsufficientSeed { need: k, got: seed.len() });
    }
    if n == 0 {
        return Err(LaplaceError::BadLevel { n, min: 1 });
    }
    if n <= seed.len() {
        return Ok(seed[n - 1].clone());
    }
    let r: Vec<i64> = input.r.iter().map(integral).collect::<Result<_, _>>()?;
    let mut prefix = vec![0i64; k + 1];
    for j in 0..k {
        prefix[j + 1] = prefix[j] + r[j];
    }
    let mut ls: Vec<Laurent> = seed.iter().map(Laurent::from_poly).collect();
    for m in ls.len() + 1..=n {
        let mut head = Laurent::monomial(0, BigRational::one());
        head.add_term(r[0], int(m as i64));
        let mut next = head.mul(&ls[m - 2]);
        for j in 2..=k {
            let mut factor = Laurent::monomial(r[j - 1] + prefix[j - 1], int((m - j + 1) as i64));
            factor.add_term(prefix[j - 1], -int((m - j + 1) as i64));
            next.add(&factor.mul(&ls[m - j - 1]));
        }
        // validate each level, not only the last
        ls.push(Laurent::from_poly(&next.clone().into_poly(m)?));
    }
    Laurent::into_poly(ls.pop().unwrap(), n)
}

/// Number of children of a node one level above `n`.
pub fn children_count(n: usize, kind: TreeKind) -> i64 {
    match kind {
        TreeKind::Full => n as i64 + 1,
        TreeKind::Pair => 2 * n as i64 - 1,
    }
}

/// `L_n` from the second-kind recursion
///
/// `L_m = (q t^α + (c_m - q) t^β) L_{m-1} + (t^{α+1} - t^{β+1}) L'_{m-1}`
///
/// where `c_m` is the number of children per node at level `m - 1`.
pub fn recurse_second_kind(
    input: SecondKindInput,
    seed: &ExactPolynomial,
    n: usize,
    kind: TreeKind,
) -> Result<ExactPolynomial, LaplaceError> {
    if n == 0 {
        return Err(LaplaceError::BadLevel { n, min: 1 });
    }
    let SecondKindInput { alpha, beta, q } = input;
    let mut l = Laurent::from_poly(seed);
    for m in 2..=n {
        let c = children_count(m, kind);
        let mut a = Laurent::monomial(alpha, int(q));
        a.add_term(beta, int(c - q));
        let mut b = Laurent::monomial(alpha + 1, BigRational::one());
        b.add_term(beta + 1, -BigRational::one());
        let mut next = a.mul(&l);
        next.add(&b.mul(&l.derivative()));
        l = Laurent::from_poly(&next.into_poly(m)?);
    }
    l.into_poly(n)
}

/// `E[Z] = L'(1) / L(1)`.
pub fn expectation_from_laplace(l: &ExactPolynomial) -> Result<BigRational, LaplaceError> {
    let total = l.at_one();
    if total.is_zero() {
        return Err(LaplaceError::ZeroPolynomial);
    }
    Ok(l.derivative().at_one() / total)
}

/// `Var[Z] = (L''(1) + L'(1)) / L(1) - E[Z]^2`.
pub fn variance_from_laplace(l: &ExactPolynomial) -> Result<BigRational, LaplaceError> {
    let total = l.at_one();
    if total.is_zero() {
        return Err(LaplaceError::ZeroPolynomial);
    }
    let d1 = l.derivative();
    let d2 = d1.derivative();
    let e = d1.at_one() / &total;
    Ok((d2.at_one() + d1.at_one()) / total - &e * &e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::ratio;
    use crate::stats::{evaluate, first_kind_input, second_kind_input};
    use crate::tree::{count, enumerate};

    fn b_product(n: usize) -> ExactPolynomial {
        (2..=n).fold(ExactPolynomial::t_pow(1), |acc, j| &acc * &ExactPolynomial::from_ints([1, j as i64]))
    }

    #[test]
    fn spot_transforms() {
        assert_eq!(
            laplace_bruteforce(StatisticId::BlockCount, 3, TreeKind::Full).unwrap(),
            ExactPolynomial::from_ints([0, 1, 5, 6])
        );
        assert_eq!(
            laplace_bruteforce(StatisticId::BlocksOfSize(2), 3, TreeKind::Full).unwrap(),
            ExactPolynomial::from_ints([7, 5])
        );
        assert_eq!(
            laplace_bruteforce(StatisticId::BlocksOfSize(1), 2, TreeKind::Full).unwrap(),
            ExactPolynomial::from_ints([1, 0, 2])
        );
    }

    #[test]
    fn singleton_transform_at_three() {
        // the brute-force value; the recursion and the mean agree with it
        let b3 = laplace_bruteforce(StatisticId::BlocksOfSize(1), 3, TreeKind::Full).unwrap();
        assert_eq!(b3, ExactPolynomial::from_ints([1, 5, 0, 6]));
        let input = first_kind_input(StatisticId::BlocksOfSize(1)).unwrap();
        let seeds = vec![ExactPolynomial::t_pow(1), ExactPolynomial::from_ints([1, 0, 2])];
        assert_eq!(recurse_first_kind(&input, &seeds, 3).unwrap(), b3);
        assert_eq!(expectation_from_laplace(&b3).unwrap(), ratio(23, 12));
    }

    #[test]
    fn moments_of_block_count() {
        let b3 = ExactPolynomial::from_ints([0, 1, 5, 6]);
        assert_eq!(expectation_from_laplace(&b3).unwrap(), ratio(29, 12));
        assert_eq!(variance_from_laplace(&b3).unwrap(), ratio(59, 144));
        let constant = ExactPolynomial::monomial(4, int(7));
        assert_eq!(variance_from_laplace(&constant).unwrap(), int(0));
        assert_eq!(expectation_from_laplace(&ExactPolynomial::zero()), Err(LaplaceError::ZeroPolynomial));
    }

    #[test]
    fn normalization_and_product() {
        for n in 1..=8 {
            let b = laplace_bruteforce(StatisticId::BlockCount, n, TreeKind::Full).unwrap();
            assert_eq!(b, b_product(n));
            assert_eq!(b.at_one(), BigRational::from_integer(count(n, TreeKind::Full).into()));
            assert_eq!(b.degree(), Some(n as u32));
        }
    }

    #[test]
    fn block_count_recursion_padded_or_not() {
        let seeds = bruteforce_seeds(StatisticId::BlockCount, 2, TreeKind::Full).unwrap();
        for n in 1..=9 {
            let a = recurse_first_kind(&FirstKindInput::from_ints(&[1]), &seeds[..1], n).unwrap();
            let b = recurse_first_kind(&FirstKindInput::from_ints(&[1, 0]), &seeds, n).unwrap();
            assert_eq!(a, b_product(n));
            assert_eq!(b, b_product(n));
        }
    }

    #[test]
    fn first_kind_matches_bruteforce() {
        for stat in [
            StatisticId::BlocksOfSize(1),
            StatisticId::BlocksOfSize(2),
            StatisticId::BlocksOfSize(3),
            StatisticId::BlocksAtLeast3,
        ] {
            let input = first_kind_input(stat).unwrap();
            let seeds = bruteforce_seeds(stat, input.k(), TreeKind::Full).unwrap();
            for n in 1..=8 {
                let rec = recurse_first_kind(&input, &seeds, n).unwrap();
                let bf = laplace_bruteforce(stat, n, TreeKind::Full).unwrap();
                assert_eq!(rec, bf, "{stat} n={n}");
            }
        }
    }

    #[test]
    fn second_kind_matches_bruteforce() {
        for (stat, kind, bound) in [
            (StatisticId::OuterBlocks, TreeKind::Full, 8),
            (StatisticId::OuterBlocks, TreeKind::Pair, 6),
            (StatisticId::IntervalPairs, TreeKind::Pair, 6),
        ] {
            let input = second_kind_input(stat, kind).unwrap();
            let seed = laplace_bruteforce(stat, 1, kind).unwrap();
            assert_eq!(seed, ExactPolynomial::t_pow(1));
            for n in 1..=bound {
                assert_eq!(
                    recurse_second_kind(input, &seed, n, kind).unwrap(),
                    laplace_bruteforce(stat, n, kind).unwrap(),
                    "{stat} {kind} n={n}"
                );
            }
        }
    }

    #[test]
    fn errors() {
        let input = FirstKindInput::from_ints(&[0, 1, -1]);
        assert_eq!(
            recurse_first_kind(&input, &[ExactPolynomial::one()], 5),
            Err(LaplaceError::InsufficientSeed { need: 3, got: 1 })
        );
        // a wrong input vector drives exponents negative
        let bad = FirstKindInput::from_ints(&[-1]);
        assert!(matches!(
            recurse_first_kind(&bad, &[ExactPolynomial::t_pow(1)], 4),
            Err(LaplaceError::NegativeExponent { .. })
        ));
        let frac = FirstKindInput { r: vec![ratio(1, 2)] };
        assert!(matches!(
            recurse_first_kind(&frac, &[ExactPolynomial::t_pow(1)], 3),
            Err(LaplaceError::NonIntegralInput(_))
        ));
        let opts = ScanOptions { max_full: 4, ..Default::default() };
        assert!(matches!(
            laplace_bruteforce_with(StatisticId::BlockCount, 5, TreeKind::Full, &opts),
            Err(LaplaceError::SizeBoundExceeded { .. })
        ));
        assert!(matches!(
            laplace_bruteforce(StatisticId::Area, 3, TreeKind::Full),
            Err(LaplaceError::Stat(StatError::AreaRequiresPairPartition))
        ));
    }

    #[test]
    fn shard_count_does_not_change_result() {
        let stats = [StatisticId::BlockCount, StatisticId::OuterBlocks];
        let one = histograms(&stats, 7, TreeKind::Full, &ScanOptions { shards: 1, ..Default::default() }).unwrap();
        let many = histograms(&stats, 7, TreeKind::Full, &ScanOptions { shards: 37, ..Default::default() }).unwrap();
        assert_eq!(one, many);
    }

    #[test]
    fn bruteforce_agrees_with_slow_evaluation() {
        for n in 1..=5 {
            let mut slow = ExactPolynomial::zero();
            for x in enumerate(n, TreeKind::Pair).unwrap() {
                let v = evaluate(StatisticId::Area, &x).unwrap();
                slow.add_term(v.to_integer().to_u32().unwrap(), BigRational::one());
            }
            assert_eq!(slow, laplace_bruteforce(StatisticId::Area, n, TreeKind::Pair).unwrap());
        }
    }
}
