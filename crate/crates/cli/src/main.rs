use std::io::{self, BufWriter, Write};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::BigRational;
use serde_json::json;

use mton_core::closed_forms::{self as cf, asymptotic_report, AsymptoticId};
use mton_core::cumulants::{cumulants_from_moments, moments_from_cumulants, poisson_moments, CumulantSequence, MomentSequence, StirlingTable};
use mton_core::harness::{counterexample_minimize, run_suite, suite, summary_table, Bounds, TransformCache};
use mton_core::laplace::{
    bruteforce_seeds, laplace_bruteforce_with, recurse_first_kind, recurse_second_kind, ScanOptions,
};
use mton_core::poly::{fmt_rational, parse_rational};
use mton_core::stats::{certify_first_kind, certify_second_kind, word_value};
use mton_core::tree::{count, for_each_in_range, LabelWord};
use mton_core::{StatisticId, TreeKind};

#[derive(Parser)]
#[command(name = "mton", version, about = "Monotonically ordered non-crossing partitions")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Full,
    Pair,
}

impl From<Kind> for TreeKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Full => TreeKind::Full,
            Kind::Pair => TreeKind::Pair,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum EnumFormat {
    Json,
    Count,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsFormat {
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Brute,
    Recursion,
    Both,
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    MeanY,
    VarY,
    VarYAlt,
    VarYSum,
    MeanY1,
    MeanY2,
    MeanYge3,
    MeanOutFull,
    MeanIntPairs,
    MeanOutPairs,
    MeanArea,
    TotalArea,
    AsymMeanY,
    AsymVarY,
    AsymMeanY1,
    AsymMeanY2,
    AsymOutPairs,
    AsymArea,
}

#[derive(Subcommand)]
enum Cmd {
    /// Stream a tree level in rank order, or print its size.
    Enumerate {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "full")]
        kind: Kind,
        #[arg(long, value_enum, default_value = "json")]
        format: EnumFormat,
        #[arg(long)]
        limit: Option<u128>,
        #[arg(long)]
        force: bool,
    },
    /// Statistic values per ordered partition, with exact means.
    Stats {
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "full")]
        kind: Kind,
        /// Comma-separated: Y, Y1, Y2, ..., Yge3, Out, Int, Area.
        #[arg(long, value_delimiter = ',', required = true)]
        stats: Vec<StatisticId>,
        #[arg(long, value_enum, default_value = "csv")]
        format: StatsFormat,
        #[arg(long)]
        force: bool,
    },
    /// Laplace transform of a statistic over a tree level.
    Laplace {
        #[arg(long)]
        stat: StatisticId,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "brute")]
        method: Method,
        #[arg(long, value_enum, default_value = "full")]
        kind: Kind,
        #[arg(long)]
        force: bool,
    },
    /// Evaluate a closed form exactly (asym-* variants in floating point).
    ClosedForm {
        #[arg(long, value_enum)]
        formula: Formula,
        #[arg(long)]
        n: usize,
    },
    /// Convert between moments and monotone cumulants.
    Cumulants {
        /// Comma-separated rationals m_1,m_2,...
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, conflicts_with = "cumulants", required_unless_present = "cumulants")]
        moments: Vec<String>,
        /// Comma-separated rationals c_1,c_2,...
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        cumulants: Vec<String>,
        #[arg(long)]
        upto: Option<usize>,
    },
    /// Rows of the generalized Stirling numbers J_k^(n).
    Stirling {
        #[arg(long)]
        n: usize,
        /// Compare the recursion against the subset-sum formula and tree counts.
        #[arg(long)]
        check: bool,
    },
    /// Moments of the distribution with all monotone cumulants equal to alpha.
    Poisson {
        #[arg(long, allow_hyphen_values = true)]
        alpha: String,
        #[arg(long)]
        upto: usize,
    },
    /// Run verification suites; JSON lines on stdout, summary on stderr.
    Verify {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long)]
        deep: bool,
    },
}

enum Fail {
    /// Stdout was closed by the reader.
    Closed,
    Usage(String),
    Verification(String),
}

type Out = BufWriter<io::StdoutLock<'static>>;

fn usage(e: impl std::fmt::Display) -> Fail {
    Fail::Usage(e.to_string())
}

fn io_err(e: io::Error) -> Fail {
    if e.kind() == io::ErrorKind::BrokenPipe {
        Fail::Closed
    } else {
        Fail::Usage(e.to_string())
    }
}

fn scan_options(force: bool) -> ScanOptions {
    let mut opts = ScanOptions::default();
    if force {
        opts.max_full = usize::MAX;
        opts.max_pair = usize::MAX;
    } else if let Some(m) = std::env::var("MTON_MAX_N").ok().and_then(|v| v.parse().ok()) {
        opts.max_full = m;
        opts.max_pair = m;
    }
    opts
}

fn guard(n: usize, kind: TreeKind, force: bool) -> Result<ScanOptions, Fail> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let opts = scan_options(force);
    opts.check(n, kind).map_err(|e| usage(format!("{e} (use --force or MTON_MAX_N)")))?;
    Ok(opts)
}

fn enumerate(out: &mut Out, n: usize, kind: TreeKind, format: EnumFormat, limit: Option<u128>, force: bool) -> Result<(), Fail> {
    match format {
        EnumFormat::Count => {
            if n == 0 {
                return Err(usage("--n must be at least 1"));
            }
            writeln!(out, "{}", count(n, kind)).map_err(io_err)
        }
        EnumFormat::Json => {
            guard(n, kind, force)?;
            let mut err = None;
            for_each_in_range(n, kind, 0..limit.unwrap_or(u128::MAX), |_, w| {
                if err.is_none() {
                    let line = serde_json::to_string(&w.to_ordered()).expect("partition serializes");
                    err = writeln!(out, "{line}").err();
                }
            })
            .map_err(usage)?;
            err.map_or(Ok(()), |e| Err(io_err(e)))
        }
    }
}

fn stats(out: &mut Out, n: usize, kind: TreeKind, stats: &[StatisticId], force: bool) -> Result<(), Fail> {
    guard(n, kind, force)?;
    let root = LabelWord::root(kind);
    for &s in stats {
        word_value(s, &root).map_err(usage)?;
    }
    let names: Vec<String> = stats.iter().map(|s| s.to_string()).collect();
    writeln!(out, "rank,{}", names.join(",")).map_err(io_err)?;
    let mut sums = vec![0u128; stats.len()];
    let mut rows = 0u128;
    let mut err = None;
    let mut line = String::new();
    for_each_in_range(n, kind, 0..u128::MAX, |rank, w| {
        line.clear();
        line.push_str(&rank.to_string());
        for (i, &s) in stats.iter().enumerate() {
            let v = word_value(s, w).expect("checked at the root");
            sums[i] += v as u128;
            line.push(',');
            line.push_str(&v.to_string());
        }
        rows += 1;
        if err.is_none() {
            err = writeln!(out, "{line}").err();
        }
    })
    .map_err(usage)?;
    if let Some(e) = err {
        return Err(io_err(e));
    }
    let means: Vec<String> = sums
        .iter()
        .map(|&s| fmt_rational(&BigRational::new(s.into(), rows.into())))
        .collect();
    writeln!(out, "mean,{}", means.join(",")).map_err(io_err)
}

fn recursion(stat: StatisticId, n: usize, kind: TreeKind) -> Result<mton_core::ExactPolynomial, Fail> {
    // certification enumerates small levels only
    const CERTIFY: usize = 6;
    match certify_first_kind(stat, CERTIFY) {
        Ok(input) if kind == TreeKind::Full => {
            let seeds = bruteforce_seeds(stat, input.k().min(n), kind).map_err(usage)?;
            if n <= seeds.len() {
                return Ok(seeds[n - 1].clone());
            }
            recurse_first_kind(&input, &seeds, n).map_err(usage)
        }
        _ => {
            let input = certify_second_kind(stat, kind, CERTIFY).map_err(usage)?;
            let seed = bruteforce_seeds(stat, 1, kind).map_err(usage)?.remove(0);
            recurse_second_kind(input, &seed, n, kind).map_err(usage)
        }
    }
}

fn laplace(out: &mut Out, stat: StatisticId, n: usize, method: Method, kind: TreeKind, force: bool) -> Result<(), Fail> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let brute = || -> Result<_, Fail> {
        let opts = guard(n, kind, force)?;
        laplace_bruteforce_with(stat, n, kind, &opts).map_err(usage)
    };
    let show = |p: &mton_core::ExactPolynomial| serde_json::to_string(p).expect("polynomial serializes");
    match method {
        Method::Brute => writeln!(out, "{}", show(&brute()?)).map_err(io_err),
        Method::Recursion => writeln!(out, "{}", show(&recursion(stat, n, kind)?)).map_err(io_err),
        Method::Both => {
            let b = brute()?;
            let r = recursion(stat, n, kind)?;
            writeln!(out, "brute {}", show(&b)).map_err(io_err)?;
            writeln!(out, "recursion {}", show(&r)).map_err(io_err)?;
            if b == r {
                writeln!(out, "EQUAL").map_err(io_err)
            } else {
                writeln!(out, "DIFFERENT").map_err(io_err)?;
                Err(Fail::Verification("transforms differ".into()))
            }
        }
    }
}

fn closed_form(out: &mut Out, formula: Formula, n: usize) -> Result<(), Fail> {
    use Formula::*;
    let asym = match formula {
        AsymMeanY => Some(AsymptoticId::BlockCountMean),
        AsymVarY => Some(AsymptoticId::BlockCountVariance),
        AsymMeanY1 => Some(AsymptoticId::SingletonMean),
        AsymMeanY2 => Some(AsymptoticId::PairBlockMean),
        AsymOutPairs => Some(AsymptoticId::OuterPairsRatio),
        AsymArea => Some(AsymptoticId::AreaRatio),
        _ => None,
    };
    if let Some(id) = asym {
        if n == 0 {
            return Err(usage("--n must be at least 1"));
        }
        let mut v = serde_json::to_value(asymptotic_report(id, n)).expect("report serializes");
        v["float"] = json!(true);
        return writeln!(out, "{v}").map_err(io_err);
    }
    let value = match formula {
        MeanY => cf::expected_y(n),
        VarY => cf::variance_y(n),
        VarYAlt => cf::ClosedForms::new(n).variance_y_alt(n),
        VarYSum => cf::variance_y_sum(n),
        MeanY1 => cf::expected_y1(n),
        MeanY2 => cf::expected_y2(n),
        MeanYge3 => cf::expected_yge3(n),
        MeanOutFull => cf::expected_outer_full(n),
        MeanIntPairs => cf::expected_interval_pairs(n),
        MeanOutPairs => cf::expected_outer_pairs(n),
        MeanArea => cf::expected_area(n),
        TotalArea => cf::total_area(n),
        _ => unreachable!(),
    }
    .map_err(usage)?;
    let name = formula.to_possible_value().unwrap().get_name().to_string();
    writeln!(out, "{}", json!({"formula": name, "n": n, "value": fmt_rational(&value)})).map_err(io_err)
}

fn rationals(xs: &[String]) -> Result<Vec<BigRational>, Fail> {
    xs.iter()
        .map(|s| parse_rational(s).ok_or_else(|| usage(format!("not a rational: {s:?}"))))
        .collect()
}

fn strings(xs: &[BigRational]) -> Vec<String> {
    xs.iter().map(fmt_rational).collect()
}

fn cumulants(out: &mut Out, moments: &[String], cumulants: &[String], upto: Option<usize>) -> Result<(), Fail> {
    let v = if !moments.is_empty() {
        let m = MomentSequence(rationals(moments)?);
        let upto = upto.unwrap_or(m.0.len());
        let c = cumulants_from_moments(&m, upto).map_err(usage)?;
        json!({"cumulants": strings(&c.0)})
    } else {
        let c = CumulantSequence(rationals(cumulants)?);
        let upto = upto.unwrap_or(c.0.len());
        let m = moments_from_cumulants(&c, upto).map_err(usage)?;
        json!({"moments": strings(&m.0)})
    };
    writeln!(out, "{v}").map_err(io_err)
}

fn stirling(out: &mut Out, n: usize, check: bool) -> Result<(), Fail> {
    if n == 0 {
        return Err(usage("--n must be at least 1"));
    }
    let table = StirlingTable::by_recursion(n);
    for m in 1..=n {
        let row: Vec<String> = table.row(m).iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", json!({"n": m, "row": row})).map_err(io_err)?;
    }
    if !check {
        return Ok(());
    }
    let closed_max = n.min(25);
    let closed = StirlingTable::by_closed_form(closed_max);
    let tree_max = n.min(scan_options(false).max_full);
    let tree = StirlingTable::by_tree_count(tree_max, &ScanOptions::default()).map_err(usage)?;
    let closed_ok = (1..=closed_max).all(|m| closed.row(m) == table.row(m));
    let tree_ok = (1..=tree_max).all(|m| tree.row(m) == table.row(m));
    writeln!(
        out,
        "{}",
        json!({"closed_form": {"upto": closed_max, "agree": closed_ok}, "tree_count": {"upto": tree_max, "agree": tree_ok}})
    )
    .map_err(io_err)?;
    if closed_ok && tree_ok {
        Ok(())
    } else {
        Err(Fail::Verification("Stirling builders disagree".into()))
    }
}

fn poisson(out: &mut Out, alpha: &str, upto: usize) -> Result<(), Fail> {
    let a = parse_rational(alpha).ok_or_else(|| usage(format!("not a rational: {alpha:?}")))?;
    let m = poisson_moments(&a, upto);
    writeln!(out, "{}", json!({"alpha": fmt_rational(&a), "moments": strings(&m.0)})).map_err(io_err)
}

fn verify(out: &mut Out, name: &str, deep: bool) -> Result<(), Fail> {
    let bounds = if deep { Bounds::DEEP } else { Bounds::DEFAULT };
    let cache = Arc::new(TransformCache::new(ScanOptions::default()));
    let specs = suite(name, bounds, false, cache).map_err(usage)?;
    let mut reports = run_suite(&specs);
    for (spec, r) in specs.iter().zip(reports.iter_mut()) {
        if !r.passed() {
            if let Ok(m) = counterexample_minimize(spec, r) {
                *r = m;
            }
        }
    }
    for r in &reports {
        writeln!(out, "{}", r.to_json_line()).map_err(io_err)?;
    }
    out.flush().map_err(io_err)?;
    eprint!("{}", summary_table(&reports));
    let failed = reports.iter().filter(|r| !r.passed()).count();
    if failed == 0 {
        Ok(())
    } else {
        Err(Fail::Verification(format!("{failed} checks failed")))
    }
}

fn run(cli: Cli) -> Result<(), Fail> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(usage)?;
    }
    let mut out: Out = BufWriter::new(io::stdout().lock());
    match cli.cmd {
        Cmd::Enumerate { n, kind, format, limit, force } => enumerate(&mut out, n, kind.into(), format, limit, force),
        Cmd::Stats { n, kind, stats: s, format: StatsFormat::Csv, force } => stats(&mut out, n, kind.into(), &s, force),
        Cmd::Laplace { stat, n, method, kind, force } => laplace(&mut out, stat, n, method, kind.into(), force),
        Cmd::ClosedForm { formula, n } => closed_form(&mut out, formula, n),
        Cmd::Cumulants { moments, cumulants: c, upto } => cumulants(&mut out, &moments, &c, upto),
        Cmd::Stirling { n, check } => stirling(&mut out, n, check),
        Cmd::Poisson { alpha, upto } => poisson(&mut out, &alpha, upto),
        Cmd::Verify { suite, deep } => verify(&mut out, &suite, deep),
    }?;
    out.flush().map_err(io_err)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Fail::Closed) => ExitCode::SUCCESS,
        Err(Fail::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Fail::Verification(m)) => {
            eprintln!("verification failed: {m}");
            ExitCode::from(1)
        }
    }
}
