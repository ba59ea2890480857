use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::laplace::{histograms, polynomial_from_histogram, LaplaceError, ScanOptions};
use crate::poly::ExactPolynomial;
use crate::stats::StatisticId;
use crate::tree::TreeKind;

type Level = Arc<OnceLock<Result<Vec<(StatisticId, ExactPolynomial)>, LaplaceError>>>;

/// Brute-force transforms shared between checks. Each tree level is scanned
/// once for a fixed set of statistics.
#[derive(Debug)]
pub struct TransformCache {
    opts: ScanOptions,
    levels: Mutex<HashMap<(usize, TreeKind), Level>>,
}

fn scanned(kind: TreeKind) -> Vec<StatisticId> {
    use StatisticId::*;
    match kind {
        TreeKind::Full => vec![
            BlockCount,
            BlocksOfSize(1),
            BlocksOfSize(2),
            BlocksOfSize(3),
            BlocksOfSize(4),
            BlocksAtLeast3,
            OuterBlocks,
            IntervalPairs,
        ],
        TreeKind::Pair => vec![BlockCount, OuterBlocks, IntervalPairs, Area],
    }
}

impl TransformCache {
    pub fn new(opts: ScanOptions) -> Self {
        TransformCache {
            opts,
            levels: Mutex::new(HashMap::new()),
        }
    }

    /// Brute-force `L_n` of `stat`.
    pub fn transform(&self, stat: StatisticId, n: usize, kind: TreeKind) -> Result<ExactPolynomial, LaplaceError> {
        let stats = scanned(kind);
        if !stats.contains(&stat) {
            return crate::laplace::laplace_bruteforce_with(stat, n, kind, &self.opts);
        }
        let level = self.levels.lock().unwrap().entry((n, kind)).or_default().clone();
        let res = level.get_or_init(|| {
            let h = histograms(&stats, n, kind, &self.opts)?;
            Ok(stats.iter().copied().zip(h.iter().map(|h| polynomial_from_histogram(h))).collect())
        });
        match res {
            Ok(all) => Ok(all.iter().find(|(s, _)| *s == stat).unwrap().1.clone()),
            Err(e) => Err(e.clone()),
        }
    }
}
