//! Comparison baselines: layered memory sharing over `K` equal-cache
//! sub-problems, and a loader for externally computed rate tables.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use itertools::Itertools;
use num::{One, Zero};
use rayon::prelude::*;

use crate::combinatorics::{int, parse_rational, rat, Rational};
use crate::equal_cache::rate_eq;
use crate::error::{Error, Result};
use crate::unequal::UnequalConfig;

/// How many times the coordinate-descent step is halved after the grid search.
const REFINE_HALVINGS: u32 = 6;

/// Fraction of every file assigned to each of the `K` layered sub-problems.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BetaAllocation {
    beta: Vec<Rational>,
}

impl BetaAllocation {
    pub fn new(beta: Vec<Rational>) -> Result<Self> {
        if beta.is_empty() {
            return Err(Error::InvalidConfig("allocation needs at least one layer".into()));
        }
        if beta.iter().any(|b| *b < Rational::zero()) {
            return Err(Error::InvalidConfig("allocation entries must be non-negative".into()));
        }
        let total: Rational = beta.iter().sum();
        if !total.is_one() {
            return Err(Error::InvalidConfig(format!("allocation sums to {total}, not 1")));
        }
        Ok(BetaAllocation { beta })
    }

    /// All mass on sub-problem `layer` (1-based) out of `k`.
    pub fn unit(k: usize, layer: usize) -> Self {
        let beta = (1..=k).map(|i| if i == layer { int(1) } else { int(0) }).collect();
        BetaAllocation { beta }
    }

    fn from_counts(counts: &[u64], denom: u64) -> Self {
        let beta = counts.iter().map(|c| rat(*c as i64, denom as i64)).collect();
        BetaAllocation { beta }
    }

    pub fn values(&self) -> &[Rational] {
        &self.beta
    }

    pub fn len(&self) -> usize {
        self.beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.beta.is_empty()
    }
}

impl fmt::Display for BetaAllocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.beta.iter().join(","))
    }
}

/// Outcome of evaluating one allocation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Scheme1Eval {
    Feasible {
        rate: Rational,
        /// Sub-problems whose per-layer cache exceeded `N` and was capped at `N`.
        clamped: Vec<usize>,
    },
    /// Sub-problem `layer` has cache to place but no share of the file.
    Infeasible { layer: usize },
}

impl Scheme1Eval {
    pub fn rate(&self) -> Option<&Rational> {
        match self {
            Scheme1Eval::Feasible { rate, .. } => Some(rate),
            Scheme1Eval::Infeasible { .. } => None,
        }
    }
}

fn check_sorted(n: usize, k: usize, m_sorted: &[Rational]) -> Result<()> {
    if n == 0 || k == 0 {
        return Err(Error::EmptySystem);
    }
    if k > n {
        return Err(Error::MoreUsersThanFiles { n, k });
    }
    if m_sorted.len() != k {
        return Err(Error::InvalidConfig(format!("expected {k} cache sizes, got {}", m_sorted.len())));
    }
    for m in m_sorted {
        if *m < Rational::zero() || *m > int(n as i64) {
            return Err(Error::CacheOutOfRange { m: m.clone(), n });
        }
    }
    if m_sorted.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidConfig("cache sizes must be sorted in descending order".into()));
    }
    Ok(())
}

/// Sum of the `K` sub-problem rates for a fixed allocation.
///
/// Sub-problem `i` serves users `1..=i` from a cache of `(M_i - M_{i+1}) / beta_i`
/// and sends its share uncoded to the remaining `K - i` users, with `M_{K+1} = 0`.
pub fn scheme1_rate_at(beta: &BetaAllocation, n: usize, k: usize, m_sorted: &[Rational]) -> Result<Scheme1Eval> {
    check_sorted(n, k, m_sorted)?;
    if beta.len() != k {
        return Err(Error::InvalidConfig(format!("expected {k} allocation entries, got {}", beta.len())));
    }
    let cap = int(n as i64);
    let mut rate = Rational::zero();
    let mut clamped = Vec::new();
    for i in 1..=k {
        let next = m_sorted.get(i).cloned().unwrap_or_else(Rational::zero);
        let gap = &m_sorted[i - 1] - next;
        let b = &beta.values()[i - 1];
        if b.is_zero() {
            if gap.is_zero() {
                continue;
            }
            return Ok(Scheme1Eval::Infeasible { layer: i });
        }
        let mut cache = gap / b;
        if cache > cap {
            cache = cap.clone();
            clamped.push(i);
        }
        rate += b * (rate_eq(n, i, &cache)? + int((k - i) as i64));
    }
    Ok(Scheme1Eval::Feasible { rate, clamped })
}

/// Lowest allocation found, with its rate.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scheme1Optimum {
    pub beta: BetaAllocation,
    pub rate: Rational,
}

/// Minimizes the layered rate over allocations.
///
/// A simplex grid with step `1/resolution` is searched exhaustively, then
/// the best point is polished by moving mass between pairs of layers with a
/// step that halves whenever no move helps. Ties go to the lexicographically
/// smallest allocation, so the result does not depend on thread scheduling.
///
/// The answer at `resolution` is never worse than the answer at
/// `resolution / 2` (when that is still at least 8), so doubling the
/// resolution never raises the value. Other pairs of resolutions have
/// unrelated grids and carry no such guarantee.
pub fn scheme1_optimize(n: usize, k: usize, m_sorted: &[Rational], resolution: u64) -> Result<Scheme1Optimum> {
    check_sorted(n, k, m_sorted)?;
    optimize_over(n, k, m_sorted, resolution, &(1..=k).collect::<Vec<_>>())
}

/// Same search restricted to the two layers that can carry cache for a two-level
/// system: layer `L` (the larger caches' surplus) and layer `K`.
pub fn scheme1_optimize_two_level(cfg: &UnequalConfig, resolution: u64) -> Result<Scheme1Optimum> {
    cfg.validate()?;
    let m_sorted = cfg.cache_vector();
    let support = if cfg.l == cfg.k { vec![cfg.k] } else { vec![cfg.l, cfg.k] };
    optimize_over(cfg.n, cfg.k, &m_sorted, resolution, &support)
}

/// `scheme1_optimize` on the cache vector of a two-level system.
pub fn scheme1_for(cfg: &UnequalConfig, resolution: u64) -> Result<Scheme1Optimum> {
    cfg.validate()?;
    scheme1_optimize(cfg.n, cfg.k, &cfg.cache_vector(), resolution)
}

fn optimize_over(
    n: usize,
    k: usize,
    m_sorted: &[Rational],
    resolution: u64,
    support: &[usize],
) -> Result<Scheme1Optimum> {
    if resolution < 8 {
        return Err(Error::InvalidConfig(format!("resolution must be at least 8, got {resolution}")));
    }
    let eval = |counts: &[u64], denom: u64| -> Option<(Rational, BetaAllocation)> {
        let mut full = vec![0u64; k];
        for (slot, c) in support.iter().zip(counts) {
            full[slot - 1] = *c;
        }
        let beta = BetaAllocation::from_counts(&full, denom);
        match scheme1_rate_at(&beta, n, k, m_sorted) {
            Ok(Scheme1Eval::Feasible { rate, .. }) => Some((rate, beta)),
            _ => None,
        }
    };

    let grid = compositions(resolution, support.len());
    let best = grid
        .par_iter()
        .filter_map(|counts| eval(counts, resolution).map(|(rate, beta)| (rate, beta, counts.clone())))
        .min_by(|a, b| (&a.0, &a.1).cmp(&(&b.0, &b.1)));
    let (mut rate, mut beta, mut counts) = best
        .ok_or_else(|| Error::InvalidConfig(format!("no feasible allocation on a grid of resolution {resolution}")))?;

    let mut denom = resolution;
    for _ in 0..=REFINE_HALVINGS {
        loop {
            let mut improved: Option<(Rational, BetaAllocation, Vec<u64>)> = None;
            for (from, to) in (0..counts.len()).cartesian_product(0..counts.len()) {
                if from == to || counts[from] == 0 {
                    continue;
                }
                let mut moved = counts.clone();
                moved[from] -= 1;
                moved[to] += 1;
                if let Some((r, b)) = eval(&moved, denom) {
                    let better = match &improved {
                        None => r < rate,
                        Some((best_r, best_b, _)) => (&r, &b) < (best_r, best_b),
                    };
                    if better {
                        improved = Some((r, b, moved));
                    }
                }
            }
            match improved {
                Some((r, b, c)) => {
                    rate = r;
                    beta = b;
                    counts = c;
                }
                None => break,
            }
        }
        counts.iter_mut().for_each(|c| *c *= 2);
        denom *= 2;
    }
    let mut best = Scheme1Optimum { beta, rate };
    if resolution / 2 >= 8 {
        let coarse = optimize_over(n, k, m_sorted, resolution / 2, support)?;
        if (&coarse.rate, &coarse.beta) < (&best.rate, &best.beta) {
            best = coarse;
        }
    }
    Ok(best)
}

/// Every way of writing `total` as an ordered sum of `parts` non-negative integers,
/// in lexicographic order.
fn compositions(total: u64, parts: usize) -> Vec<Vec<u64>> {
    fn go(left: u64, parts: usize, prefix: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if parts == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=left {
            prefix.push(first);
            go(left - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        go(total, parts, &mut Vec::new(), &mut out);
    }
    out
}

/// Cache point key: `(N, K, L, Mhat, M)`.
pub type CachePoint = (usize, usize, usize, Rational, Rational);

pub fn cache_point(cfg: &UnequalConfig) -> CachePoint {
    (cfg.n, cfg.k, cfg.l, cfg.mhat.clone(), cfg.m.clone())
}

/// Rates computed elsewhere, keyed by cache point.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ExternalRates {
    /// Value and source line of each row.
    pub rows: BTreeMap<CachePoint, (Rational, usize)>,
}

impl ExternalRates {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, cfg: &UnequalConfig) -> Option<&Rational> {
        self.rows.get(&cache_point(cfg)).map(|(rate, _)| rate)
    }

    /// Looks up each point and warns about rows that match none of them.
    pub fn attach(&self, points: &[UnequalConfig]) -> Vec<Option<Rational>> {
        let wanted: std::collections::BTreeSet<CachePoint> = points.iter().map(cache_point).collect();
        for (point, (_, line)) in &self.rows {
            if !wanted.contains(point) {
                log::warn!(
                    "external rates line {line}: no matching point N={} K={} L={} Mhat={} M={}, skipped",
                    point.0,
                    point.1,
                    point.2,
                    point.3,
                    point.4
                );
            }
        }
        points.iter().map(|p| self.get(p).cloned()).collect()
    }
}

/// Reads `N,K,L,Mhat,M,rate` rows. Blank lines, `#` comments, and a header
/// row starting with `N` are ignored.
pub fn import_external_rates(path: &Path) -> Result<ExternalRates> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_external_rates(&text)
}

pub fn parse_external_rates(text: &str) -> Result<ExternalRates> {
    let mut table = ExternalRates::default();
    for (index, raw) in text.lines().enumerate() {
        let line = index + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() || body.starts_with('N') {
            continue;
        }
        let bad = |message: String| Error::Malformed { line, message };
        let fields: Vec<&str> = body.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(bad(format!("expected 6 fields, found {}", fields.len())));
        }
        let count = |i: usize| -> Result<usize> {
            fields[i].parse().map_err(|_| bad(format!("field {} is not a count: {:?}", i + 1, fields[i])))
        };
        let value = |i: usize| -> Result<Rational> {
            parse_rational(fields[i]).map_err(|_| bad(format!("field {} is not a number: {:?}", i + 1, fields[i])))
        };
        let point = (count(0)?, count(1)?, count(2)?, value(3)?, value(4)?);
        let rate = value(5)?;
        if rate < Rational::zero() {
            return Err(bad("rate must be non-negative".into()));
        }
        table.rows.insert(point, (rate, line));
    }
    Ok(table)
}
