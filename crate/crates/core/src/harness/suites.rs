use std::collections::HashSet;
use std::sync::{Arc, OnceLock};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{CheckSpec, Failure, HarnessError, Mode, ProbeResult, TransformCache};
use crate::closed_forms::{
    self, asymptotic_report, blocks_of_size_increment, double_factorial_odd, expectation_by_recursion, factorial,
    AsymptoticId, ClosedForms, ScaledHarmonics,
};
use crate::cumulants::{
    closed_form_row, cumulants_from_moments, monord, monord_bruteforce, moments_from_cumulants, poisson_moments,
    CumulantSequence, MomentSequence, StirlingTable,
};
use crate::laplace::{
    expectation_from_laplace, recurse_first_kind, recurse_second_kind, variance_from_laplace, ScanOptions,
};
use crate::oracle;
use crate::partition::{all_noncrossing, BlockRef};
use crate::poly::{int, ratio, ExactPolynomial};
use crate::stats::{
    check_second_kind_at, evaluate, first_kind_input, second_kind_input, word_value, SecondKindInput, StatisticId,
};
use crate::tree::{count_u128, enumerate, for_each_in_range, shard_ranges, unrank, OrderedNcPartition, TreeKind};

/// Largest levels scanned exhaustively.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bounds {
    pub full: usize,
    pub pair: usize,
}

impl Bounds {
    pub const DEFAULT: Bounds = Bounds { full: 9, pair: 7 };
    pub const DEEP: Bounds = Bounds { full: 10, pair: 8 };
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds::DEFAULT
    }
}

pub const SUITES: &[&str] = &[
    "cardinality",
    "thm16",
    "thm17",
    "laplace",
    "lemmas",
    "thm110",
    "thm111",
    "stirling",
    "cumulants",
    "asymptotics",
    "selftest",
];

pub fn suite_names() -> &'static [&'static str] {
    SUITES
}

const FIRST_KIND: [StatisticId; 6] = [
    StatisticId::BlockCount,
    StatisticId::BlocksOfSize(1),
    StatisticId::BlocksOfSize(2),
    StatisticId::BlocksOfSize(3),
    StatisticId::BlocksOfSize(4),
    StatisticId::BlocksAtLeast3,
];

const SHARDS: usize = 64;

struct Ctx {
    suite: &'static str,
    cache: Arc<TransformCache>,
    specs: Vec<CheckSpec>,
}

impl Ctx {
    fn add(
        &mut self,
        id: &str,
        description: &str,
        lo: usize,
        bound: usize,
        mode: Mode,
        probe: impl Fn(usize) -> ProbeResult + Send + Sync + 'static,
    ) {
        self.specs.push(CheckSpec {
            id: id.to_string(),
            suite: self.suite,
            description: description.to_string(),
            lo,
            bound,
            mode,
            shards: SHARDS,
            probe: Arc::new(probe),
        });
    }
}

fn eq<T: PartialEq + std::fmt::Display>(label: &str, got: T, want: T) -> Result<String, Failure> {
    if got == want {
        Ok(format!("{label}={got}"))
    } else {
        Err(Failure::new(format!("{label}: got {got}, expected {want}")))
    }
}

fn poly_eq(label: &str, got: &ExactPolynomial, want: &ExactPolynomial) -> Result<String, Failure> {
    if got == want {
        return Ok(format!("{label} ok (degree {})", got.degree().map_or(-1, |d| d as i64)));
    }
    let exps: std::collections::BTreeSet<u32> = got.terms().chain(want.terms()).map(|(e, _)| e).collect();
    let e = exps.into_iter().find(|&e| got.coeff(e) != want.coeff(e)).unwrap();
    Err(Failure::new(format!(
        "{label}: coefficient of t^{e} is {} but expected {}",
        got.coeff(e),
        want.coeff(e)
    )))
}

fn transform(cache: &TransformCache, stat: StatisticId, n: usize, kind: TreeKind) -> Result<ExactPolynomial, Failure> {
    cache.transform(stat, n, kind).map_err(|e| Failure::new(e.to_string()))
}

fn mean(cache: &TransformCache, stat: StatisticId, n: usize, kind: TreeKind) -> Result<BigRational, Failure> {
    expectation_from_laplace(&transform(cache, stat, n, kind)?).map_err(|e| Failure::new(e.to_string()))
}

fn closed(r: Result<BigRational, closed_forms::ClosedFormError>) -> Result<BigRational, Failure> {
    r.map_err(|e| Failure::new(e.to_string()))
}

/// Shared closed-form evaluator for `n <= 1000`.
fn closed_forms_upto(max: usize) -> Arc<ClosedForms> {
    static CF: OnceLock<Arc<ClosedForms>> = OnceLock::new();
    assert!(max <= 1000);
    CF.get_or_init(|| Arc::new(ClosedForms::new(1000))).clone()
}

fn scaled_harmonics() -> &'static ScaledHarmonics {
    static S: OnceLock<ScaledHarmonics> = OnceLock::new();
    S.get_or_init(|| ScaledHarmonics::new(10_001))
}

/// Counts a level by streaming it.
fn streamed_count(n: usize, kind: TreeKind) -> Result<u128, Failure> {
    let total = count_u128(n, kind).map_err(|e| Failure::new(e.to_string()))?;
    shard_ranges(total, SHARDS)
        .into_par_iter()
        .map(|r| {
            let mut c = 0u128;
            for_each_in_range(n, kind, r, |_, _| c += 1).map_err(|e| Failure::new(e.to_string()))?;
            Ok(c)
        })
        .sum()
}

/// Scans a level and returns the smallest rank at which `f` fails.
fn scan_level(
    n: usize,
    kind: TreeKind,
    f: impl Fn(u128, &OrderedNcPartition) -> Result<(), String> + Sync,
) -> Result<(), Failure> {
    let total = count_u128(n, kind).map_err(|e| Failure::new(e.to_string()))?;
    let first = shard_ranges(total, SHARDS)
        .into_par_iter()
        .filter_map(|r| {
            let mut fail = None;
            for_each_in_range(n, kind, r, |rank, w| {
                if fail.is_none() {
                    if let Err(d) = f(rank, &w.to_ordered()) {
                        fail = Some(Failure::at_rank(rank, d));
                    }
                }
            })
            .ok()?;
            fail
        })
        .min_by_key(|f| f.rank);
    match first {
        Some(f) => Err(f),
        None => Ok(()),
    }
}

fn j_size(x: &OrderedNcPartition) -> usize {
    x.partition().block(x.max_label_block()).unwrap().len()
}

fn builders(name: &str) -> Option<fn(&mut Ctx, Bounds, bool)> {
    Some(match name {
        "cardinality" => cardinality,
        "thm16" => block_count,
        "thm17" => block_sizes,
        "laplace" => laplace,
        "lemmas" => tree_lemmas,
        "thm110" => outer_and_interval,
        "thm111" => area,
        "stirling" => stirling,
        "cumulants" => cumulants,
        "asymptotics" => asymptotics,
        "selftest" => selftest,
        _ => return None,
    })
}

/// Checks of the named suite (`"all"` for every suite). With `corrupt`, the
/// suite contains only its deliberately broken check.
pub fn suite(name: &str, bounds: Bounds, corrupt: bool, cache: Arc<TransformCache>) -> Result<Vec<CheckSpec>, HarnessError> {
    if name == "all" {
        let mut out = Vec::new();
        for s in SUITES {
            out.extend(suite(s, bounds, corrupt, cache.clone())?);
        }
        return Ok(out);
    }
    let (name, build) = SUITES
        .iter()
        .find(|s| **s == name)
        .and_then(|s| builders(s).map(|b| (*s, b)))
        .ok_or_else(|| HarnessError::UnknownSuite(name.to_string()))?;
    let mut ctx = Ctx {
        suite: name,
        cache,
        specs: Vec::new(),
    };
    build(&mut ctx, bounds, corrupt);
    Ok(ctx.specs)
}

fn cardinality(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let want_full = move |n: usize| -> BigInt {
        if corrupt {
            factorial(n + 2) / 6
        } else {
            factorial(n + 1) / 2
        }
    };
    ctx.add("card-full", "streamed count of the full tree level is (n+1)!/2", 1, b.full, Mode::Exact, move |n| {
        let c = streamed_count(n, TreeKind::Full)?;
        Ok(vec![eq("count", BigInt::from(c), want_full(n))?])
    });
    if corrupt {
        return;
    }
    ctx.add("card-pair", "streamed count of the pair tree level is (2n-1)!!", 1, b.pair, Mode::Exact, |n| {
        let c = streamed_count(n, TreeKind::Pair)?;
        Ok(vec![eq("count", BigInt::from(c), double_factorial_odd(n))?])
    });
    ctx.add(
        "oracle-enumeration",
        "tree walk equals generate-and-filter over NC(n) as sets",
        1,
        b.full.min(7),
        Mode::Exact,
        |n| {
            let walk: Vec<OrderedNcPartition> = enumerate(n, TreeKind::Full).unwrap().collect();
            let filtered: HashSet<OrderedNcPartition> = oracle::ordered_partitions(n).into_iter().collect();
            if let Some(k) = walk.iter().position(|x| !filtered.contains(x)) {
                return Err(Failure::at_rank(k as u128, format!("{} not produced by the filter", walk[k])));
            }
            let walked: HashSet<&OrderedNcPartition> = walk.iter().collect();
            if walked.len() != walk.len() {
                return Err(Failure::new("tree walk repeats an element"));
            }
            if filtered.len() != walk.len() {
                return Err(Failure::new(format!("filter gives {} elements, walk {}", filtered.len(), walk.len())));
            }
            Ok(vec![format!("{} elements", walk.len())])
        },
    );
    ctx.add(
        "oracle-enumeration-pair",
        "pair tree walk equals generate-and-filter over pair partitions",
        1,
        b.pair.min(5),
        Mode::Exact,
        |n| {
            let mut walk: Vec<OrderedNcPartition> = enumerate(n, TreeKind::Pair).unwrap().collect();
            let mut filtered = oracle::ordered_pair_partitions(n);
            walk.sort();
            filtered.sort();
            if walk != filtered {
                return Err(Failure::new("sets differ"));
            }
            Ok(vec![format!("{} elements", walk.len())])
        },
    );
}

fn block_count(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let cache = ctx.cache.clone();
    ctx.add("block-count-mean", "E[Y_n] = n - H_n + 3/2 - 1/(n+1)", 2, b.full, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::BlockCount, n, TreeKind::Full)?;
        let cf = closed_forms_upto(1000);
        let want = if corrupt {
            int(n as i64) - cf.cache().h(n + 1) + ratio(3, 2) - ratio(1, n as i64 + 1)
        } else {
            closed(cf.expected_y(n))?
        };
        Ok(vec![eq("E", got, want)?])
    });
    if corrupt {
        return;
    }
    let cache = ctx.cache.clone();
    ctx.add("block-count-variance", "Var[Y_n] = H_n - H2_n - (n-1)^2/(4(n+1)^2)", 2, b.full, Mode::Exact, move |n| {
        let l = transform(&cache, StatisticId::BlockCount, n, TreeKind::Full)?;
        let got = variance_from_laplace(&l).map_err(|e| Failure::new(e.to_string()))?;
        Ok(vec![eq("Var", got, closed(closed_forms_upto(1000).variance_y(n))?)?])
    });
    let cache = ctx.cache.clone();
    ctx.add("block-count-n3", "E[Y_3] = 29/12 and Var[Y_3] = 59/144", 3, 3, Mode::Exact, move |n| {
        let l = transform(&cache, StatisticId::BlockCount, n, TreeKind::Full)?;
        Ok(vec![
            eq("B_3", l.clone(), ExactPolynomial::from_ints([0, 1, 5, 6]))?,
            eq("E", expectation_from_laplace(&l).unwrap(), ratio(29, 12))?,
            eq("Var", variance_from_laplace(&l).unwrap(), ratio(59, 144))?,
            eq("Var sum form", closed(closed_forms::variance_y_sum(n))?, ratio(59, 144))?,
        ])
    });
    ctx.add(
        "block-count-variance-forms",
        "both variance forms agree exactly",
        2,
        10_000,
        Mode::Exact,
        |n| {
            let s = scaled_harmonics();
            let (a, b) = s.variance_y_numerators(n).map_err(|e| Failure::new(e.to_string()))?;
            if a != b {
                return Err(Failure::new("numerators over 4(n+1)^2 L^2 differ"));
            }
            if n <= 1000 && n % 100 == 0 {
                let cf = closed_forms_upto(1000);
                eq("reduced forms", closed(cf.variance_y(n))?, closed(cf.variance_y_alt(n))?)?;
                eq("scaled vs reduced", closed(s.variance_y(n))?, closed(cf.variance_y(n))?)?;
            }
            Ok(if n == 10_000 { vec!["agree".into()] } else { vec![] })
        },
    );
}

fn block_sizes(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let cache = ctx.cache.clone();
    ctx.add("pair-blocks-mean", "E[Y2_n] = H_n - 51/24 + (6n-1)/(2n(n+1))", 4, b.full, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::BlocksOfSize(2), n, TreeKind::Full)?;
        let cf = closed_forms_upto(1000);
        let n_ = n as i64;
        let want = if corrupt {
            cf.cache().h(n) - ratio(50, 24) + ratio(6 * n_ - 1, 2 * n_ * (n_ + 1))
        } else {
            closed(cf.expected_y2(n))?
        };
        Ok(vec![eq("E", got, want)?])
    });
    if corrupt {
        return;
    }
    let cache = ctx.cache.clone();
    ctx.add("singletons-mean", "E[Y1_n] = n - 2H_n + 10/3 - 3/(n+1)", 3, b.full, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::BlocksOfSize(1), n, TreeKind::Full)?;
        Ok(vec![eq("E", got, closed(closed_forms_upto(1000).expected_y1(n))?)?])
    });
    let cache = ctx.cache.clone();
    ctx.add("large-blocks-mean", "E[Yge3_n] = 7/24 - (2n-1)/(2n(n+1))", 4, b.full, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::BlocksAtLeast3, n, TreeKind::Full)?;
        Ok(vec![eq("E", got, closed(closed_forms::expected_yge3(n))?)?])
    });
    ctx.add(
        "block-size-decomposition",
        "E[Y] = E[Y1] + E[Y2] + E[Yge3] via closed forms",
        4,
        1000,
        Mode::Exact,
        |n| {
            let cf = closed_forms_upto(1000);
            let sum = closed(cf.expected_y1(n))? + closed(cf.expected_y2(n))? + closed(cf.expected_yge3(n))?;
            eq("sum", sum, closed(cf.expected_y(n))?)?;
            Ok(vec![])
        },
    );
    ctx.add(
        "yge3-limit-gap",
        "7/24 - E[Yge3_n] = (2n-1)/(2n(n+1)), decreasing",
        4,
        1000,
        Mode::Exact,
        |n| {
            let gap = |m: usize| closed(closed_forms::expected_yge3(m)).map(|e| ratio(7, 24) - e);
            let g = gap(n)?;
            let n_ = n as i64;
            eq("gap", g.clone(), ratio(2 * n_ - 1, 2 * n_ * (n_ + 1)))?;
            if n > 4 && g >= gap(n - 1)? {
                return Err(Failure::new("gap does not decrease"));
            }
            Ok(vec![])
        },
    );
    let cache = ctx.cache.clone();
    ctx.add(
        "y3-telescoping",
        "E[Y3_4] = 1/10 by enumeration; telescoped means match enumeration",
        4,
        b.full,
        Mode::Exact,
        move |n| {
            let seed = mean(&cache, StatisticId::BlocksOfSize(3), 4, TreeKind::Full)?;
            eq("E[Y3_4]", seed.clone(), ratio(1, 10))?;
            let tele = closed(closed_forms::expected_blocks_of_size_telescoped(3, seed, n))?;
            let got = mean(&cache, StatisticId::BlocksOfSize(3), n, TreeKind::Full)?;
            Ok(vec![eq("E", got, tele)?])
        },
    );
}

fn laplace(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let cache = ctx.cache.clone();
    ctx.add("b-product", "B_n(t) = t(1+2t)...(1+nt)", 1, b.full, Mode::Exact, move |n| {
        let shift = if corrupt { 1 } else { 0 };
        let product = (2..=n as i64).fold(ExactPolynomial::t_pow(1), |acc, j| {
            &acc * &ExactPolynomial::from_ints([1, j + shift])
        });
        let bf = transform(&cache, StatisticId::BlockCount, n, TreeKind::Full)?;
        Ok(vec![poly_eq("B_n", &bf, &product)?])
    });
    if corrupt {
        return;
    }
    for stat in FIRST_KIND {
        let cache = ctx.cache.clone();
        let id = format!("first-kind-recursion-{stat}");
        let desc = format!("first-kind recursion for {stat} equals the enumerated transform");
        ctx.add(&id, &desc, 1, b.full, Mode::Exact, move |n| {
            let input = first_kind_input(stat).map_err(|e| Failure::new(e.to_string()))?;
            let seeds = (1..=input.k())
                .map(|m| transform(&cache, stat, m, TreeKind::Full))
                .collect::<Result<Vec<_>, _>>()?;
            let rec = recurse_first_kind(&input, &seeds, n).map_err(|e| Failure::new(e.to_string()))?;
            let bf = transform(&cache, stat, n, TreeKind::Full)?;
            Ok(vec![poly_eq("L_n", &rec, &bf)?])
        });
    }
    for (stat, kind, bound) in [
        (StatisticId::OuterBlocks, TreeKind::Full, b.full),
        (StatisticId::IntervalPairs, TreeKind::Pair, b.pair),
        (StatisticId::OuterBlocks, TreeKind::Pair, b.pair),
    ] {
        let cache = ctx.cache.clone();
        let id = format!("second-kind-recursion-{stat}-{kind}");
        let desc = format!("second-kind recursion for {stat} on the {kind} tree equals the enumerated transform");
        ctx.add(&id, &desc, 1, bound, Mode::Exact, move |n| {
            let input = second_kind_input(stat, kind).map_err(|e| Failure::new(e.to_string()))?;
            let seed = transform(&cache, stat, 1, kind)?;
            let rec = recurse_second_kind(input, &seed, n, kind).map_err(|e| Failure::new(e.to_string()))?;
            Ok(vec![poly_eq("L_n", &rec, &transform(&cache, stat, n, kind)?)?])
        });
    }
    let cache = ctx.cache.clone();
    ctx.add(
        "singleton-transform-n3",
        "B_3 for singletons is 6t^3+5t+1, consistent with its recursion and mean",
        3,
        3,
        Mode::Exact,
        move |n| {
            let stat = StatisticId::BlocksOfSize(1);
            let bf = transform(&cache, stat, n, TreeKind::Full)?;
            let input = first_kind_input(stat).unwrap();
            let seeds = vec![transform(&cache, stat, 1, TreeKind::Full)?, transform(&cache, stat, 2, TreeKind::Full)?];
            let rec = recurse_first_kind(&input, &seeds, n).map_err(|e| Failure::new(e.to_string()))?;
            let misprint = ExactPolynomial::from_ints([1, 0, 5, 6]);
            let mut out = vec![poly_eq("enumerated", &bf, &ExactPolynomial::from_ints([1, 5, 0, 6]))?];
            out.push(poly_eq("recursion", &rec, &bf)?);
            out.push(eq("E", expectation_from_laplace(&bf).unwrap(), closed(closed_forms::expected_y1(n))?)?);
            if misprint == bf {
                return Err(Failure::new("6t^3+5t^2+1 unexpectedly matches"));
            }
            out.push(format!("6t^3+5t^2+1 has mean {}", expectation_from_laplace(&misprint).unwrap()));
            Ok(out)
        },
    );
    ctx.add(
        "first-kind-transition",
        "each child changes a first-kind statistic by r_|J|",
        2,
        b.full.min(8),
        Mode::Exact,
        |n| {
            let inputs: Vec<_> = FIRST_KIND.iter().map(|&s| (s, first_kind_input(s).unwrap())).collect();
            scan_level(n, TreeKind::Full, |_, x| {
                let parent = x.parent().map_err(|e| e.to_string())?;
                let j = j_size(x);
                for (s, input) in &inputs {
                    let diff = evaluate(*s, x).unwrap() - evaluate(*s, &parent).unwrap();
                    if diff != input.step(j) {
                        return Err(format!("{s} changes by {diff} with |J|={j}"));
                    }
                }
                Ok(())
            })?;
            Ok(vec![])
        },
    );
    let cache = ctx.cache.clone();
    ctx.add("normalization", "every transform sums to the level size at t=1", 1, b.full, Mode::Exact, move |n| {
        let size = BigRational::from_integer(factorial(n + 1) / 2);
        for s in FIRST_KIND.iter().chain(&[StatisticId::OuterBlocks]) {
            eq(&format!("{s}(1)"), transform(&cache, *s, n, TreeKind::Full)?.at_one(), size.clone())?;
        }
        Ok(vec![])
    });
}

fn tree_lemmas(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let area_child_sum = move |n: usize, parent: &OrderedNcPartition| -> Result<(), String> {
        let children = parent.pair_children().map_err(|e| e.to_string())?;
        let sum: u64 = children.iter().map(|c| crate::stats::area(c.partition()).unwrap()).sum();
        let a = crate::stats::area(parent.partition()).unwrap();
        let factor = if corrupt { 2 * n as u64 } else { 2 * n as u64 + 1 };
        let want = (2 * n as u64 - 1) + factor * a;
        if sum != want {
            return Err(format!("children area sum {sum}, expected {want}"));
        }
        Ok(())
    };
    ctx.add(
        "area-child-sum",
        "area sum over pair children is (2n-1) + (2n+1) A_{n-1}",
        2,
        b.pair.min(6),
        Mode::Exact,
        move |n| {
            scan_level(n - 1, TreeKind::Pair, |_, p| area_child_sum(n, p))?;
            Ok(vec![])
        },
    );
    if corrupt {
        return;
    }
    if b.pair >= 7 {
        ctx.add(
            "area-child-sum-sampled",
            "area child-sum identity on 10^4 sampled parents",
            7,
            7,
            Mode::Exact,
            move |n| {
                let total = count_u128(n - 1, TreeKind::Pair).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(0x82);
                let mut ranks: Vec<u128> = (0..10_000).map(|_| rng.gen_range(0..total)).collect();
                ranks.sort_unstable();
                for r in ranks {
                    let p = unrank(r, n - 1, TreeKind::Pair).unwrap();
                    area_child_sum(n, &p).map_err(|d| Failure::at_rank(r, format!("parent rank {r}: {d}")))?;
                }
                Ok(vec!["10000 parents".into()])
            },
        );
    }
    ctx.add(
        "parent-power-bijection",
        "l-1 parent steps biject {|J|=l} onto {|J|=1} and shift values by r_2+...+r_l",
        2,
        b.full.min(8),
        Mode::Exact,
        |m| {
            let inputs: Vec<_> = FIRST_KIND.iter().map(|&s| (s, first_kind_input(s).unwrap())).collect();
            let mut out = Vec::new();
            for l in 2..=m.min(4) {
                let mut images = HashSet::new();
                let mut fail: Option<Failure> = None;
                for (rank, x) in enumerate(m, TreeKind::Full).unwrap().enumerate() {
                    if j_size(&x) != l {
                        continue;
                    }
                    let mut y = x.clone();
                    for _ in 1..l {
                        y = y.parent().unwrap();
                    }
                    let err = |d: String| Failure::at_rank(rank as u128, format!("l={l}: {d}"));
                    if j_size(&y) != 1 {
                        fail = Some(err(format!("image {y} has |J|={}", j_size(&y))));
                        break;
                    }
                    for (s, input) in &inputs {
                        let shift = (2..=l).fold(int(0), |a, j| a + input.step(j));
                        let (zx, zy) = (evaluate(*s, &x).unwrap(), evaluate(*s, &y).unwrap());
                        if zx != &zy + &shift {
                            fail = Some(err(format!("{s}: {zx} != {zy} + {shift}")));
                            break;
                        }
                    }
                    if fail.is_some() {
                        break;
                    }
                    if !images.insert(y) {
                        fail = Some(err("two elements share an image".into()));
                        break;
                    }
                }
                if let Some(f) = fail {
                    return Err(f);
                }
                let target = enumerate(m - l + 1, TreeKind::Full).unwrap().filter(|y| j_size(y) == 1).count();
                if images.len() != target {
                    return Err(Failure::new(format!("l={l}: {} images but {target} targets", images.len())));
                }
                out.push(format!("l={l}: {target} pairs"));
            }
            Ok(out)
        },
    );
    let cache = ctx.cache.clone();
    ctx.add(
        "singleton-j-identity",
        "sum of t^Z over {|J|=1} is m t^{r_1} L_{m-1}",
        2,
        b.full.min(8),
        Mode::Exact,
        move |m| {
            for s in FIRST_KIND {
                let input = first_kind_input(s).unwrap();
                let r1 = input.r[0].to_integer();
                let mut hist: Vec<u64> = Vec::new();
                for_each_in_range(m, TreeKind::Full, 0..u128::MAX, |_, w| {
                    let k = w.num_blocks() as u8;
                    if w.labels().iter().filter(|&&l| l == k).count() == 1 {
                        let v = word_value(s, w).unwrap() as usize;
                        if hist.len() <= v {
                            hist.resize(v + 1, 0);
                        }
                        hist[v] += 1;
                    }
                })
                .unwrap();
                let lhs = crate::laplace::polynomial_from_histogram(&hist);
                let prev = transform(&cache, s, m - 1, TreeKind::Full)?;
                let e: u32 = r1.try_into().map_err(|_| Failure::new("r_1 out of range"))?;
                let rhs = prev.shift(e).scale(&int(m as i64));
                poly_eq(&format!("{s}"), &lhs, &rhs)?;
            }
            Ok(vec![])
        },
    );
}

fn outer_and_interval(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let cache = ctx.cache.clone();
    ctx.add("interval-pairs-mean", "E[Int_n] = (2n+1)/3 on the pair tree", 1, b.pair, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::IntervalPairs, n, TreeKind::Pair)?;
        let want = if corrupt {
            ratio(2 * n as i64 + 2, 3)
        } else {
            closed(closed_forms::expected_interval_pairs(n))?
        };
        Ok(vec![eq("E", got, want)?])
    });
    if corrupt {
        return;
    }
    let cache = ctx.cache.clone();
    ctx.add("outer-full-mean", "E[Out_n] = (2n+1)/3 on the full tree", 1, b.full, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::OuterBlocks, n, TreeKind::Full)?;
        let input = SecondKindInput { alpha: 1, beta: 0, q: 1 };
        let rec = expectation_by_recursion(input, int(1), n, TreeKind::Full);
        eq("recursion", rec, closed(closed_forms::expected_outer_full(n))?)?;
        Ok(vec![eq("E", got, closed(closed_forms::expected_outer_full(n))?)?])
    });
    let cache = ctx.cache.clone();
    ctx.add("outer-pairs-mean", "E[Out_n] = 2^n n!/(2n-1)!! - 1 on the pair tree", 1, b.pair, Mode::Exact, move |n| {
        let got = mean(&cache, StatisticId::OuterBlocks, n, TreeKind::Pair)?;
        Ok(vec![eq("E", got, closed(closed_forms::expected_outer_pairs(n))?)?])
    });
    ctx.add(
        "second-kind-clauses",
        "the constructed C_o satisfies all three clauses at every parent",
        2,
        b.full.min(8).max(b.pair),
        Mode::Exact,
        move |n| {
            let mut out = Vec::new();
            for (stat, kind, bound) in [
                (StatisticId::OuterBlocks, TreeKind::Full, b.full.min(8)),
                (StatisticId::OuterBlocks, TreeKind::Pair, b.pair),
                (StatisticId::IntervalPairs, TreeKind::Pair, b.pair),
            ] {
                if n > bound {
                    continue;
                }
                let input = second_kind_input(stat, kind).unwrap();
                scan_level(n - 1, kind, |_, p| check_second_kind_at(stat, kind, input, p).map_err(|e| e.to_string()))?;
                out.push(format!("{stat}/{kind}"));
            }
            Ok(out)
        },
    );
}

fn area(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let cache = ctx.cache.clone();
    ctx.add(
        "area-mean-total",
        "E[A_n] = (2n+1) sum 1/(2k+1) and S_n = (2n+1)!! sum 1/(2k+1)",
        1,
        b.pair,
        Mode::Exact,
        move |n| {
            let l = transform(&cache, StatisticId::Area, n, TreeKind::Pair)?;
            let total = l.derivative().at_one();
            let want_total = if corrupt {
                let s = (1..=n as i64).fold(BigRational::zero(), |a, k| a + ratio(1, 2 * k + 1));
                BigRational::from_integer(double_factorial_odd(n)) * s
            } else {
                closed(closed_forms::total_area(n))?
            };
            let s = eq("S", total, want_total)?;
            let e = eq("E", expectation_from_laplace(&l).unwrap(), closed(closed_forms::expected_area(n))?)?;
            Ok(vec![e, s])
        },
    );
    if corrupt {
        return;
    }
    let cache = ctx.cache.clone();
    ctx.add("area-n2", "E[A_2] = 8/3 and S_2 = 8", 2, 2, Mode::Exact, move |n| {
        let l = transform(&cache, StatisticId::Area, n, TreeKind::Pair)?;
        Ok(vec![
            eq("E", expectation_from_laplace(&l).unwrap(), ratio(8, 3))?,
            eq("S", l.derivative().at_one(), int(8))?,
        ])
    });
}

const TABLE: [&[u64]; 6] = [
    &[1],
    &[1, 2],
    &[1, 5, 6],
    &[1, 9, 26, 24],
    &[1, 14, 71, 154, 120],
    &[1, 20, 155, 580, 1044, 720],
];

fn recursion_rows() -> &'static StirlingTable {
    static T: OnceLock<StirlingTable> = OnceLock::new();
    T.get_or_init(|| StirlingTable::by_recursion(20))
}

fn stirling(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    let table_row = |n: usize| -> Vec<num_bigint::BigUint> { TABLE[n - 1].iter().map(|&x| x.into()).collect() };
    ctx.add(
        "stirling-recursion",
        "J_k^(n) = J_k^(n-1) + n J_{k-1}^(n-1) reproduces the table for n <= 6",
        1,
        6,
        Mode::Exact,
        move |n| {
            let row: Vec<num_bigint::BigUint> = if corrupt {
                // multiplier off by one
                let mut rows: Vec<Vec<num_bigint::BigUint>> = vec![vec![1u32.into()]];
                for m in 2..=n {
                    let prev = &rows[m - 2];
                    let row = (1..=m)
                        .map(|k| {
                            if k == 1 {
                                1u32.into()
                            } else if k == m {
                                num_bigint::BigUint::try_from(factorial(m)).unwrap()
                            } else {
                                &prev[k - 1] + &prev[k - 2] * (m - 1)
                            }
                        })
                        .collect();
                    rows.push(row);
                }
                rows.pop().unwrap()
            } else {
                recursion_rows().row(n).to_vec()
            };
            if row != table_row(n) {
                return Err(Failure::new(format!("row {row:?} differs from {:?}", TABLE[n - 1])));
            }
            Ok(vec![format!("{:?}", TABLE[n - 1])])
        },
    );
    if corrupt {
        return;
    }
    ctx.add("stirling-closed-table", "subset sums reproduce the table for n <= 6", 1, 6, Mode::Exact, move |n| {
        if closed_form_row(n) != table_row(n) {
            return Err(Failure::new("row differs"));
        }
        Ok(vec![])
    });
    let opts = ScanOptions::default();
    let cache = ctx.cache.clone();
    ctx.add(
        "stirling-tree",
        "counting tree nodes by blocks matches the recursion (and the table for n <= 6)",
        1,
        b.full,
        Mode::Exact,
        move |n| {
            let _ = opts;
            let l = transform(&cache, StatisticId::BlockCount, n, TreeKind::Full)?;
            let row: Vec<num_bigint::BigUint> =
                (1..=n as u32).map(|k| l.coeff(k).to_integer().try_into().unwrap()).collect();
            if row != recursion_rows().row(n) {
                return Err(Failure::new("tree count differs from recursion"));
            }
            if n <= 6 && row != table_row(n) {
                return Err(Failure::new("tree count differs from the table"));
            }
            Ok(vec![])
        },
    );
    ctx.add("stirling-closed-form", "recursion equals subset sums", 1, 20, Mode::Exact, |n| {
        if closed_form_row(n) != recursion_rows().row(n) {
            return Err(Failure::new("rows differ"));
        }
        Ok(vec![])
    });
}

fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    ratio(rng.gen_range(-20..=20), rng.gen_range(1..=12))
}

fn cumulants(ctx: &mut Ctx, _b: Bounds, corrupt: bool) {
    ctx.add(
        "poisson-moments",
        "sum_k J_k^(n) a^k/k! equals the moments of constant cumulants a",
        1,
        8,
        Mode::Exact,
        move |n| {
            let mut out = Vec::new();
            for alpha in [int(1), int(2), ratio(1, 2), int(-1)] {
                let got = if corrupt {
                    let t = recursion_rows();
                    (1..=n).fold(BigRational::zero(), |acc, k| {
                        let j = BigRational::from_integer(BigInt::from(t.get(n, k).clone()));
                        acc + j * num_traits::pow(alpha.clone(), k) / BigRational::from_integer(factorial(k - 1))
                    })
                } else {
                    poisson_moments(&alpha, n).get(n).clone()
                };
                let direct = moments_from_cumulants(&CumulantSequence(vec![alpha.clone(); n]), n).unwrap();
                out.push(eq(&format!("a={alpha}"), got, direct.get(n).clone())?);
            }
            Ok(out)
        },
    );
    if corrupt {
        return;
    }
    ctx.add("monord-hook-length", "hook-length count equals the ordering filter", 1, 8, Mode::Exact, |n| {
        for p in all_noncrossing(n) {
            let fast = monord(&p);
            let slow = monord_bruteforce(&p);
            if fast != slow.into() {
                return Err(Failure::new(format!("{p}: {fast} vs {slow}")));
            }
        }
        Ok(vec![])
    });
    ctx.add(
        "monord-weights",
        "monord/k! <= 1 with equality exactly for interval partitions; sum of monord is (n+1)!/2",
        1,
        8,
        Mode::Exact,
        |n| {
            let mut total = BigInt::zero();
            for p in all_noncrossing(n) {
                let m = BigInt::from(monord(&p));
                total += &m;
                let w = BigRational::new(m, factorial(p.num_blocks()));
                let interval = (0..p.num_blocks()).all(|i| p.is_interval(BlockRef(i)).unwrap());
                if w > BigRational::one() || (w == BigRational::one()) != interval {
                    return Err(Failure::new(format!("{p}: weight {w}")));
                }
            }
            Ok(vec![eq("total", total, factorial(n + 1) / 2)?])
        },
    );
    ctx.add("moment-cumulant-spot", "low-order formulas", 3, 3, Mode::Exact, |_| {
        let c = cumulants_from_moments(&MomentSequence(vec![int(1), int(2), int(5)]), 3).unwrap();
        let (c1, c2, c3) = (ratio(3, 7), ratio(-2, 5), ratio(9, 4));
        let m = moments_from_cumulants(&CumulantSequence(vec![c1.clone(), c2.clone(), c3.clone()]), 3).unwrap();
        Ok(vec![
            eq("c_3 of (1,2,5)", c.get(3).clone(), ratio(3, 2))?,
            eq("mu_3", m.get(3).clone(), &c3 + ratio(5, 2) * &c1 * &c2 + &c1 * &c1 * &c1)?,
            eq("poisson a=1 n=3", poisson_moments(&int(1), 3).get(3).clone(), ratio(9, 2))?,
        ])
    });
    ctx.add(
        "moment-cumulant-round-trip",
        "100 random rational cumulant sequences survive moments and back through order 8",
        8,
        8,
        Mode::Exact,
        |n| {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            for i in 0..100 {
                let c = CumulantSequence((0..n).map(|_| random_rational(&mut rng)).collect());
                let m = moments_from_cumulants(&c, n).unwrap();
                let back = cumulants_from_moments(&m, n).unwrap();
                if back != c {
                    return Err(Failure::new(format!("sequence {i} does not round-trip")));
                }
                let m2 = moments_from_cumulants(&back, n).unwrap();
                if m2 != m {
                    return Err(Failure::new(format!("moments of sequence {i} do not round-trip")));
                }
            }
            Ok(vec!["100 sequences".into()])
        },
    );
}

fn asymptotics(ctx: &mut Ctx, _b: Bounds, corrupt: bool) {
    let float = |t: f64| Mode::Float { tolerance: t };
    ctx.add(
        "asym-mean-y",
        "|E[Y_n] - (n - ln n) - (3/2 - gamma)| < 1e-3 at n = 10^4 (threshold is an engineering choice)",
        10_000,
        10_000,
        float(1e-3),
        move |n| {
            let r = asymptotic_report(AsymptoticId::BlockCountMean, n);
            let gap = if corrupt { r.diagnostic + 2.0 * closed_forms::EULER_GAMMA } else { r.diagnostic };
            if gap.abs() >= 1e-3 {
                return Err(Failure::new(format!("gap {gap:e}")));
            }
            Ok(vec![format!("float gap {gap:e}")])
        },
    );
    if corrupt {
        return;
    }
    ctx.add(
        "asym-var-y",
        "|Var[Y_n] - ln n + (pi^2/6 + 1/4 - gamma)| < 1e-3 at n = 10^4",
        10_000,
        10_000,
        float(1e-3),
        |n| {
            let r = asymptotic_report(AsymptoticId::BlockCountVariance, n);
            if r.diagnostic.abs() >= 1e-3 {
                return Err(Failure::new(format!("gap {:e}", r.diagnostic)));
            }
            Ok(vec![format!("float gap {:e}", r.diagnostic)])
        },
    );
    ctx.add(
        "asym-outer-pairs",
        "E[Out_n]/sqrt(pi n) on the pair tree lies in [0.99, 1.01] at n = 10^4",
        10_000,
        10_000,
        float(1e-2),
        |n| {
            let r = asymptotic_report(AsymptoticId::OuterPairsRatio, n);
            if !(0.99..=1.01).contains(&r.diagnostic) {
                return Err(Failure::new(format!("ratio {}", r.diagnostic)));
            }
            Ok(vec![format!("float ratio {:.6}", r.diagnostic)])
        },
    );
    ctx.add(
        "asym-area",
        "E[A_n]/(n ln n) lies in [0.9, 1.1] at n = 10^6 and is closer to 1 than at 10^5",
        1_000_000,
        1_000_000,
        float(1e-1),
        |n| {
            let r6 = asymptotic_report(AsymptoticId::AreaRatio, n);
            let r5 = asymptotic_report(AsymptoticId::AreaRatio, n / 10);
            if !(0.9..=1.1).contains(&r6.diagnostic) {
                return Err(Failure::new(format!("ratio {}", r6.diagnostic)));
            }
            if (r6.diagnostic - 1.0).abs() >= (r5.diagnostic - 1.0).abs() {
                return Err(Failure::new(format!("gap grows: {} then {}", r5.diagnostic, r6.diagnostic)));
            }
            Ok(vec![format!("float ratios {:.6} (10^5), {:.6} (10^6)", r5.diagnostic, r6.diagnostic)])
        },
    );
    let cache = ctx.cache.clone();
    ctx.add(
        "asym-y3-limit",
        "telescoped E[Y3_n] from the enumerated E[Y3_4] is within 1e-2 of 23/90 at n = 10^3, increasing",
        1000,
        1000,
        float(1e-2),
        move |n| {
            let seed = mean(&cache, StatisticId::BlocksOfSize(3), 4, TreeKind::Full)?;
            eq("E[Y3_4]", seed.clone(), ratio(1, 10))?;
            for m in 5..=n {
                if blocks_of_size_increment(3, m).unwrap() <= BigRational::zero() {
                    return Err(Failure::new(format!("increment at n={m} is not positive")));
                }
            }
            let e = closed(closed_forms::expected_blocks_of_size_telescoped(3, seed, n))?;
            let gap = ratio(23, 90) - &e;
            if gap <= BigRational::zero() || gap >= ratio(1, 100) {
                return Err(Failure::new(format!("23/90 - E = {gap}")));
            }
            use num_traits::ToPrimitive;
            Ok(vec![format!("float gap {:e}", gap.to_f64().unwrap())])
        },
    );
}

fn selftest(ctx: &mut Ctx, b: Bounds, corrupt: bool) {
    if corrupt {
        return;
    }
    for name in SUITES.iter().filter(|s| **s != "selftest") {
        let cache = ctx.cache.clone();
        let id = format!("selftest-{name}");
        let desc = format!("a corrupted formula in {name} fails with a minimized witness");
        ctx.add(&id, &desc, 1, 1, Mode::Exact, move |_| {
            let specs = suite(name, b, true, cache.clone()).map_err(|e| Failure::new(e.to_string()))?;
            let mut out = Vec::new();
            for spec in &specs {
                let report = super::run_check(spec);
                let Some(w) = &report.witness else {
                    return Err(Failure::new(format!("corrupted {} passed", spec.id)));
                };
                let min = super::counterexample_minimize(spec, &report).map_err(|e| Failure::new(e.to_string()))?;
                let mw = min.witness.unwrap();
                if mw.n > w.n {
                    return Err(Failure::new("minimization increased n"));
                }
                out.push(format!("{} fails at n={}: {}", spec.id, mw.n, mw.detail));
            }
            if out.is_empty() {
                return Err(Failure::new("no corrupted check"));
            }
            Ok(out)
        });
    }
    if b.pair >= 6 {
        let cache = ctx.cache.clone();
        ctx.add(
            "selftest-minimize-seeded",
            "a corrupted area identity reported at n=6 minimizes to the smallest failing n",
            1,
            1,
            Mode::Exact,
            move |_| {
                let specs = suite("lemmas", b, true, cache.clone()).map_err(|e| Failure::new(e.to_string()))?;
                let spec = &specs[0];
                let mut report = super::run_check(spec);
                let Some(w) = report.witness.as_mut() else {
                    return Err(Failure::new("corrupted check passed"));
                };
                w.n = 6;
                let min = super::counterexample_minimize(spec, &report).map_err(|e| Failure::new(e.to_string()))?;
                let mw = min.witness.unwrap();
                if mw.n != spec.lo {
                    return Err(Failure::new(format!("minimized to n={}", mw.n)));
                }
                Ok(vec![format!("n=6 -> n={} rank={}", mw.n, mw.rank.unwrap_or_default())])
            },
        );
    }
}
