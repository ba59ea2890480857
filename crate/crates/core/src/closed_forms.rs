//! Closed-form expectations and variances, their expectation recursions,
//! and float diagnostics for the large-`n` behaviour.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::laplace::children_count;
use crate::poly::{int, ratio};
use crate::stats::SecondKindInput;
use crate::tree::TreeKind;

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_431;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ClosedFormError {
    #[error("{formula} is stated for n >= {min}, got n={n}")]
    OutOfValidity { formula: &'static str, n: usize, min: usize },
}

fn require(formula: &'static str, n: usize, min: usize) -> Result<(), ClosedFormError> {
    if n < min {
        return Err(ClosedFormError::OutOfValidity { formula, n, min });
    }
    Ok(())
}

/// Harmonic numbers `H_n = Σ 1/k` and `H_n^(2) = Σ 1/k²` for `n <= max`.
#[derive(Debug, Clone)]
pub struct HarmonicCache {
    h: Vec<BigRational>,
    h2: Vec<BigRational>,
}

impl HarmonicCache {
    pub fn new(max: usize) -> Self {
        let mut h = Vec::with_capacity(max + 1);
        let mut h2 = Vec::with_capacity(max + 1);
        h.push(BigRational::zero());
        h2.push(BigRational::zero());
        for k in 1..=max as i64 {
            let next = h.last().unwrap() + ratio(1, k);
            h.push(next);
            let next2 = h2.last().unwrap() + BigRational::new(BigInt::one(), BigInt::from(k) * k);
            h2.push(next2);
        }
        HarmonicCache { h, h2 }
    }

    pub fn max(&self) -> usize {
        self.h.len() - 1
    }

    /// Panics if `n` exceeds the cache.
    pub fn h(&self, n: usize) -> &BigRational {
        &self.h[n]
    }

    pub fn h2(&self, n: usize) -> &BigRational {
        &self.h2[n]
    }
}

/// Harmonic numbers as integers over the fixed denominators `L` and `L²`,
/// `L = lcm(1..=max)`. Long ranges of closed forms can then be compared
/// with integer arithmetic only.
#[derive(Debug, Clone)]
pub struct ScaledHarmonics {
    l: BigInt,
    h: Vec<BigInt>,
    h2: Vec<BigInt>,
}

impl ScaledHarmonics {
    pub fn new(max: usize) -> Self {
        let l = (1..=max as u64).fold(BigInt::one(), |acc, k| acc.lcm(&BigInt::from(k)));
        let l2 = &l * &l;
        let mut h = vec![BigInt::zero()];
        let mut h2 = vec![BigInt::zero()];
        for k in 1..=max as u64 {
            h.push(h.last().unwrap() + &l / k);
            h2.push(h2.last().unwrap() + &l2 / (k * k));
        }
        ScaledHarmonics { l, h, h2 }
    }

    pub fn max(&self) -> usize {
        self.h.len() - 1
    }

    /// `L`.
    pub fn denominator(&self) -> &BigInt {
        &self.l
    }

    pub fn h(&self, n: usize) -> BigRational {
        BigRational::new(self.h[n].clone(), self.l.clone())
    }

    pub fn h2(&self, n: usize) -> BigRational {
        BigRational::new(self.h2[n].clone(), &self.l * &self.l)
    }

    /// Numerators of the two variance forms over the common denominator
    /// `4(n+1)²L²`. Needs `n + 1 <= max`.
    pub fn variance_y_numerators(&self, n: usize) -> Result<(BigInt, BigInt), ClosedFormError> {
        require("Var[Y]", n, 2)?;
        let l2 = &self.l * &self.l;
        let m = BigInt::from(4 * (n as u64 + 1) * (n as u64 + 1));
        let first = (&self.h[n] * &self.l - &self.h2[n]) * &m - &l2 * BigInt::from((n as u64 - 1).pow(2));
        let second = (&self.h[n + 1] * &self.l - &self.h2[n + 1]) * &m - &l2 * BigInt::from((n as u64 + 1).pow(2));
        Ok((first, second))
    }

    pub fn variance_y(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        let (num, _) = self.variance_y_numerators(n)?;
        let m = BigInt::from(4 * (n as u64 + 1) * (n as u64 + 1));
        Ok(BigRational::new(num, m * &self.l * &self.l))
    }
}

/// Closed forms evaluated against a shared harmonic cache.
#[derive(Debug, Clone)]
pub struct ClosedForms {
    cache: HarmonicCache,
}

impl ClosedForms {
    /// Supports every formula up to `n = max`.
    pub fn new(max: usize) -> Self {
        ClosedForms {
            cache: HarmonicCache::new(max + 1),
        }
    }

    pub fn cache(&self) -> &HarmonicCache {
        &self.cache
    }

    /// `E[Y_n] = n − H_n + 3/2 − 1/(n+1)`.
    pub fn expected_y(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        require("E[Y]", n, 2)?;
        let n_ = n as i64;
        Ok(int(n_) - self.cache.h(n) + ratio(3, 2) - ratio(1, n_ + 1))
    }

    /// `Var[Y_n] = H_n − H_n^(2) − (n−1)²/(4(n+1)²)`.
    pub fn variance_y(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        require("Var[Y]", n, 2)?;
        let n_ = n as i64;
        Ok(self.cache.h(n) - self.cache.h2(n) - ratio((n_ - 1) * (n_ - 1), 4 * (n_ + 1) * (n_ + 1)))
    }

    /// The alternate form `H_{n+1} − H_{n+1}^(2) − 1/4`.
    pub fn variance_y_alt(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        require("Var[Y]", n, 2)?;
        Ok(self.cache.h(n + 1) - self.cache.h2(n + 1) - ratio(1, 4))
    }

    /// `E[Y_n^(1)] = n − 2H_n + 10/3 − 3/(n+1)`.
    pub fn expected_y1(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        require("E[Y1]", n, 3)?;
        let n_ = n as i64;
        Ok(int(n_) - self.cache.h(n) * int(2) + ratio(10, 3) - ratio(3, n_ + 1))
    }

    /// `E[Y_n^(2)] = H_n − 51/24 + (6n−1)/(2n(n+1))`.
    pub fn expected_y2(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        require("E[Y2]", n, 4)?;
        let n_ = n as i64;
        Ok(self.cache.h(n) - ratio(51, 24) + ratio(6 * n_ - 1, 2 * n_ * (n_ + 1)))
    }

    pub fn expected_yge3(&self, n: usize) -> Result<BigRational, ClosedFormError> {
        expected_yge3(n)
    }
}

/// `Σ_{k=2..n} k/(k+1)²`, the variance of `Y_n` written as a sum.
pub fn variance_y_sum(n: usize) -> Result<BigRational, ClosedFormError> {
    require("Var[Y]", n, 2)?;
    Ok((2..=n as i64).map(|k| ratio(k, (k + 1) * (k + 1))).fold(BigRational::zero(), |a, b| a + b))
}

/// `E[Y_n^(≥3)] = 7/24 − (2n−1)/(2n(n+1))`.
pub fn expected_yge3(n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Yge3]", n, 4)?;
    let n_ = n as i64;
    Ok(ratio(7, 24) - ratio(2 * n_ - 1, 2 * n_ * (n_ + 1)))
}

pub fn expected_y(n: usize) -> Result<BigRational, ClosedFormError> {
    ClosedForms::new(n).expected_y(n)
}

pub fn variance_y(n: usize) -> Result<BigRational, ClosedFormError> {
    ClosedForms::new(n).variance_y(n)
}

pub fn expected_y1(n: usize) -> Result<BigRational, ClosedFormError> {
    ClosedForms::new(n).expected_y1(n)
}

pub fn expected_y2(n: usize) -> Result<BigRational, ClosedFormError> {
    ClosedForms::new(n).expected_y2(n)
}

/// Outer blocks on the full tree: `(2n+1)/3`.
pub fn expected_outer_full(n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Out] (full)", n, 1)?;
    Ok(ratio(2 * n as i64 + 1, 3))
}

/// Interval pairs on the pair tree: `(2n+1)/3`.
pub fn expected_interval_pairs(n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Int]", n, 1)?;
    Ok(ratio(2 * n as i64 + 1, 3))
}

pub fn factorial(n: usize) -> BigInt {
    (1..=n as u64).map(BigInt::from).product()
}

/// `(2n−1)!! = 1·3·…·(2n−1)`.
pub fn double_factorial_odd(n: usize) -> BigInt {
    (1..=n as u64).map(|k| BigInt::from(2 * k - 1)).product()
}

/// Outer blocks on the pair tree: `2ⁿ n! / (2n−1)!! − 1`.
pub fn expected_outer_pairs(n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Out] (pair)", n, 1)?;
    let num = (BigInt::one() << n) * factorial(n);
    Ok(BigRational::new(num, double_factorial_odd(n)) - int(1))
}

fn odd_reciprocal_sum(n: usize) -> BigRational {
    (1..=n as i64).map(|k| ratio(1, 2 * k + 1)).fold(BigRational::zero(), |a, b| a + b)
}

/// `E[A_n] = (2n+1) Σ_{k=1..n} 1/(2k+1)`.
pub fn expected_area(n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Area]", n, 1)?;
    Ok(int(2 * n as i64 + 1) * odd_reciprocal_sum(n))
}

/// Total area over the level, `S_n = (2n+1)!! Σ_{k=1..n} 1/(2k+1)`.
pub fn total_area(n: usize) -> Result<BigRational, ClosedFormError> {
    require("S", n, 1)?;
    Ok(BigRational::from_integer(double_factorial_odd(n + 1)) * odd_reciprocal_sum(n))
}

/// One step of the second-kind expectation recursion
///
/// `E_n = (c + α − β)/c · E_{n−1} + (αq + β(c − q))/c`
///
/// with `c` the number of children per node at level `n − 1`.
pub fn expectation_recursion_step(input: SecondKindInput, prev: &BigRational, n: usize, kind: TreeKind) -> BigRational {
    let c = children_count(n, kind);
    let SecondKindInput { alpha, beta, q } = input;
    ratio(c + alpha - beta, c) * prev + ratio(alpha * q + beta * (c - q), c)
}

/// Iterates the expectation recursion from `E_1 = first`.
pub fn expectation_by_recursion(input: SecondKindInput, first: BigRational, n: usize, kind: TreeKind) -> BigRational {
    (2..=n).fold(first, |e, m| expectation_recursion_step(input, &e, m, kind))
}

/// Increment `E[Y_n^(ℓ)] − E[Y_{n−1}^(ℓ)] = (n−ℓ)!/(n+1)! · ((n−ℓ+1)² − (n−ℓ))`,
/// valid for `n >= ℓ + 2`.
pub fn blocks_of_size_increment(ell: usize, n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Y_l] increment", n, ell + 2)?;
    let a = (n - ell) as i64;
    // (n−ℓ)!/(n+1)! = 1/((n−ℓ+1)(n−ℓ+2)…(n+1))
    let den: BigInt = ((n - ell + 1) as u64..=(n + 1) as u64).map(BigInt::from).product();
    Ok(BigRational::new(BigInt::from((a + 1) * (a + 1) - a), den))
}

/// `E[Y_n^(ℓ)]` by telescoping the increments from `seed = E[Y_{ℓ+1}^(ℓ)]`.
pub fn expected_blocks_of_size_telescoped(ell: usize, seed: BigRational, n: usize) -> Result<BigRational, ClosedFormError> {
    require("E[Y_l] telescoped", n, ell + 1)?;
    (ell + 2..=n).try_fold(seed, |e, m| Ok(e + blocks_of_size_increment(ell, m)?))
}

/// The float diagnostics available in [`asymptotic_report`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum AsymptoticId {
    /// `E[Y_n] − (n − ln n) − (3/2 − γ)`.
    BlockCountMean,
    /// `Var[Y_n] − ln n + (π²/6 + 1/4 − γ)`.
    BlockCountVariance,
    /// `E[Y_n^(1)] − (n − 2 ln n) − (10/3 − 2γ)`.
    SingletonMean,
    /// `E[Y_n^(2)] − ln n + (51/24 − γ)`.
    PairBlockMean,
    /// `E[Out_n] / √(πn)` on the pair tree.
    OuterPairsRatio,
    /// `E[A_n] / (n ln n)`.
    AreaRatio,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub id: AsymptoticId,
    pub n: usize,
    /// Exact formula, evaluated in floating point.
    pub value: f64,
    /// Leading-order asymptotic expression.
    pub asymptotic: f64,
    /// `value − asymptotic` for gap diagnostics, `value / asymptotic` for ratios.
    pub diagnostic: f64,
    pub is_ratio: bool,
}

fn harmonic_f64(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / k as f64).sum()
}

fn harmonic2_f64(n: usize) -> f64 {
    (1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum()
}

/// Float evaluation of an exact formula next to its asymptotic expression.
pub fn asymptotic_report(id: AsymptoticId, n: usize) -> AsymptoticReport {
    let nf = n as f64;
    let ln = nf.ln();
    let pi = std::f64::consts::PI;
    let (value, asymptotic, is_ratio) = match id {
        AsymptoticId::BlockCountMean => (
            nf - harmonic_f64(n) + 1.5 - 1.0 / (nf + 1.0),
            nf - ln + 1.5 - EULER_GAMMA,
            false,
        ),
        AsymptoticId::BlockCountVariance => (
            harmonic_f64(n) - harmonic2_f64(n) - (nf - 1.0).powi(2) / (4.0 * (nf + 1.0).powi(2)),
            ln - (pi * pi / 6.0 + 0.25 - EULER_GAMMA),
            false,
        ),
        AsymptoticId::SingletonMean => (
            nf - 2.0 * harmonic_f64(n) + 10.0 / 3.0 - 3.0 / (nf + 1.0),
            nf - 2.0 * ln + 10.0 / 3.0 - 2.0 * EULER_GAMMA,
            false,
        ),
        AsymptoticId::PairBlockMean => (
            harmonic_f64(n) - 51.0 / 24.0 + (6.0 * nf - 1.0) / (2.0 * nf * (nf + 1.0)),
            ln + EULER_GAMMA - 51.0 / 24.0,
            false,
        ),
        AsymptoticId::OuterPairsRatio => {
            // 2ⁿ n!/(2n−1)!! = Π_{k=1..n} 2k/(2k−1)
            let log: f64 = (1..=n).map(|k| (2.0 * k as f64 / (2.0 * k as f64 - 1.0)).ln()).sum();
            (log.exp() - 1.0, (pi * nf).sqrt(), true)
        }
        AsymptoticId::AreaRatio => {
            let s: f64 = (1..=n).rev().map(|k| 1.0 / (2.0 * k as f64 + 1.0)).sum();
            ((2.0 * nf + 1.0) * s, nf * ln, true)
        }
    };
    let diagnostic = if is_ratio { value / asymptotic } else { value - asymptotic };
    AsymptoticReport {
        id,
        n,
        value,
        asymptotic,
        diagnostic,
        is_ratio,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::ToPrimitive;

    #[test]
    fn scaled_harmonics_match_reduced() {
        let c = HarmonicCache::new(60);
        let s = ScaledHarmonics::new(60);
        let cf = ClosedForms::new(59);
        for n in 1..=60 {
            assert_eq!(&s.h(n), c.h(n));
            assert_eq!(&s.h2(n), c.h2(n));
        }
        for n in 2..=59 {
            let (a, b) = s.variance_y_numerators(n).unwrap();
            assert_eq!(a, b);
            assert_eq!(s.variance_y(n).unwrap(), cf.variance_y(n).unwrap());
        }
    }

    #[test]
    fn harmonic_cache_steps() {
        let c = HarmonicCache::new(50);
        assert_eq!(c.h(1), &int(1));
        assert_eq!(c.h2(1), &int(1));
        for n in 2..=50 {
            assert_eq!(c.h(n) - c.h(n - 1), ratio(1, n as i64));
            assert_eq!(c.h2(n) - c.h2(n - 1), ratio(1, (n * n) as i64));
        }
    }

    #[test]
    fn spot_values() {
        assert_eq!(expected_y(3).unwrap(), ratio(29, 12));
        assert_eq!(expected_y(2).unwrap(), ratio(5, 3));
        assert_eq!(variance_y(3).unwrap(), ratio(59, 144));
        assert_eq!(variance_y_sum(3).unwrap(), ratio(59, 144));
        assert_eq!(expected_y1(3).unwrap(), ratio(23, 12));
        assert_eq!(expected_y2(4).unwrap(), ratio(8, 15));
        assert_eq!(expected_outer_full(1).unwrap(), int(1));
        assert_eq!(expected_outer_full(2).unwrap(), ratio(5, 3));
        assert_eq!(expected_interval_pairs(2).unwrap(), ratio(5, 3));
        assert_eq!(expected_outer_pairs(1).unwrap(), int(1));
        assert_eq!(expected_outer_pairs(2).unwrap(), ratio(5, 3));
        assert_eq!(expected_area(1).unwrap(), int(1));
        assert_eq!(expected_area(2).unwrap(), ratio(8, 3));
        assert_eq!(total_area(2).unwrap(), int(8));
    }

    #[test]
    fn validity_ranges() {
        assert!(matches!(expected_y1(2), Err(ClosedFormError::OutOfValidity { min: 3, .. })));
        assert!(expected_y2(3).is_err());
        assert!(expected_yge3(3).is_err());
        assert!(expected_y(1).is_err());
        assert!(variance_y(1).is_err());
    }

    #[test]
    fn variance_forms_agree() {
        let cf = ClosedForms::new(300);
        for n in 2..=300 {
            let v = cf.variance_y(n).unwrap();
            assert_eq!(v, cf.variance_y_alt(n).unwrap());
        }
        for n in 2..=40 {
            assert_eq!(cf.variance_y(n).unwrap(), variance_y_sum(n).unwrap());
        }
    }

    #[test]
    fn decomposition_and_yge3_limit() {
        let cf = ClosedForms::new(200);
        let mut prev_gap: Option<BigRational> = None;
        for n in 4..=200 {
            let sum = cf.expected_y1(n).unwrap() + cf.expected_y2(n).unwrap() + cf.expected_yge3(n).unwrap();
            assert_eq!(sum, cf.expected_y(n).unwrap());
            let gap = ratio(7, 24) - cf.expected_yge3(n).unwrap();
            assert_eq!(gap, ratio(2 * n as i64 - 1, 2 * (n * (n + 1)) as i64));
            if let Some(p) = &prev_gap {
                assert!(&gap < p);
            }
            prev_gap = Some(gap);
        }
    }

    #[test]
    fn expectation_recursions_reproduce_closed_forms() {
        let out = SecondKindInput { alpha: 1, beta: 0, q: 1 };
        let int_pairs = SecondKindInput { alpha: 0, beta: 1, q: 0 };
        for n in 1..=40 {
            assert_eq!(expectation_by_recursion(out, int(1), n, TreeKind::Full), expected_outer_full(n).unwrap());
            assert_eq!(expectation_by_recursion(int_pairs, int(1), n, TreeKind::Pair), expected_interval_pairs(n).unwrap());
            assert_eq!(expectation_by_recursion(out, int(1), n, TreeKind::Pair), expected_outer_pairs(n).unwrap());
        }
        // (1 + 1/(n+1)) E + 1/(n+1)
        let step = expectation_recursion_step(out, &int(1), 2, TreeKind::Full);
        assert_eq!(step, ratio(4, 3) + ratio(1, 3));
    }

    #[test]
    fn area_total_relation() {
        for n in 1..=30 {
            let e = expected_area(n).unwrap();
            let s = total_area(n).unwrap();
            assert_eq!(s, e * BigRational::from_integer(double_factorial_odd(n)));
        }
    }

    #[test]
    fn pair_block_telescoping_matches_closed_form() {
        // ℓ = 2, seeded from the closed form at n = 4
        let cf = ClosedForms::new(60);
        let seed = cf.expected_y2(4).unwrap();
        for n in 5..=60 {
            let tele = (5..=n).fold(seed.clone(), |e, m| e + blocks_of_size_increment(2, m).unwrap());
            assert_eq!(tele, cf.expected_y2(n).unwrap());
        }
    }

    #[test]
    fn triple_block_increment_partial_fractions() {
        for n in 5..=100i64 {
            let pf = ratio(1, 6 * (n - 2)) - ratio(3, 2 * (n - 1)) + ratio(7, 2 * n) - ratio(13, 6 * (n + 1));
            assert_eq!(blocks_of_size_increment(3, n as usize).unwrap(), pf);
        }
    }

    #[test]
    fn asymptotic_diagnostics() {
        let r = asymptotic_report(AsymptoticId::BlockCountMean, 10_000);
        assert!(r.diagnostic.abs() < 1e-3);
        let r = asymptotic_report(AsymptoticId::OuterPairsRatio, 10_000);
        assert!((0.99..=1.01).contains(&r.diagnostic));
        let exact = expected_outer_pairs(200).unwrap().to_f64().unwrap();
        let r = asymptotic_report(AsymptoticId::OuterPairsRatio, 200);
        assert!((r.value - exact).abs() < 1e-9 * exact);
    }
}
