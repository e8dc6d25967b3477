//! Holdout evaluation of calibrated scores against noisy or true targets.
//!
//! With the ground truth unobservable, one (or two) review scores per paper
//! act as the data and the mean of the remaining reviews is the target. The
//! resulting proxy MSE is biased upward by the target's variance, but the
//! per-paper difference between two estimators' squared errors is unbiased
//! for their true MSE difference; that difference drives the confidence
//! intervals below.

pub mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::aggregation::{self, effective_rankings, participating_papers, StrategyKind};
use crate::error::{Error, Result};
use crate::isotonic::ScoreVector;
use crate::model::{Dataset, Decision, PaperId, Role};
use stats::{mse_reduction_ci, paired_t_test_one_sided, Interval};

pub use stats::{chi_square_2xk, pearson_correlation, ChiSquareTest, PairedTTest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum HoldoutMode {
    /// One review is the data, the rest form the target.
    OneScore,
    /// The mean of two reviews is the data, the rest form the target.
    TwoScores,
}

impl HoldoutMode {
    pub fn estimator_reviews(self) -> usize {
        match self {
            HoldoutMode::OneScore => 1,
            HoldoutMode::TwoScores => 2,
        }
    }

    pub fn min_reviews(self) -> usize {
        self.estimator_reviews() + 1
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HoldoutMode::OneScore => "one",
            HoldoutMode::TwoScores => "two",
        }
    }
}

impl FromStr for HoldoutMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one" => Ok(HoldoutMode::OneScore),
            "two" => Ok(HoldoutMode::TwoScores),
            other => Err(Error::Parse(format!(
                "unknown holdout mode {other:?} (expected one or two)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutSplit {
    pub estimator_scores: ScoreVector,
    pub proxy_targets: ScoreVector,
    pub mode: HoldoutMode,
    /// Papers with too few reviews for the mode.
    pub excluded: Vec<PaperId>,
}

/// Seeded per-paper random split of reviews into data and noisy target.
///
/// Papers are visited in id order so the split does not depend on storage
/// order.
pub fn holdout_split(d: &Dataset, mode: HoldoutMode, seed: u64) -> HoldoutSplit {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut papers: Vec<_> = d.papers.iter().collect();
    papers.sort_by(|a, b| a.id.cmp(&b.id));

    let k = mode.estimator_reviews();
    let mut split = HoldoutSplit {
        estimator_scores: ScoreVector::new(),
        proxy_targets: ScoreVector::new(),
        mode,
        excluded: Vec::new(),
    };
    for p in papers {
        let n = p.reviews.len();
        if n < mode.min_reviews() {
            split.excluded.push(p.id.clone());
            continue;
        }
        let chosen = rand::seq::index::sample(&mut rng, n, k);
        let mut picked = vec![false; n];
        for i in chosen.iter() {
            picked[i] = true;
        }
        let (mut est, mut tgt) = (0.0, 0.0);
        for (r, used) in p.reviews.iter().zip(&picked) {
            if *used {
                est += r.score as f64;
            } else {
                tgt += r.score as f64;
            }
        }
        split.estimator_scores.insert(p.id.clone(), est / k as f64);
        split.proxy_targets.insert(p.id.clone(), tgt / (n - k) as f64);
    }
    split
}

/// Per-paper `(squared error, absolute error)` of `est` against `target`.
pub fn proxy_errors(est: &ScoreVector, target: &ScoreVector) -> Result<Vec<(PaperId, f64, f64)>> {
    if let Some(id) = est.ids().find(|id| !target.contains(id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    if let Some(id) = target.ids().find(|id| !est.contains(id)) {
        return Err(Error::IdMismatch(id.clone()));
    }
    Ok(est
        .iter()
        .map(|(id, e)| {
            let diff = e - target.get(id).unwrap();
            (id.clone(), diff * diff, diff.abs())
        })
        .collect())
}

/// What the errors are measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TargetKind {
    /// Mean of held-out reviews.
    Proxy,
    /// Known ground truth (synthetic data).
    Truth,
}

impl TargetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TargetKind::Proxy => "proxy",
            TargetKind::Truth => "truth",
        }
    }
}

/// Which papers enter a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Population {
    /// Papers covered by at least one ranking of two or more scored papers.
    #[default]
    Ranked,
    /// Every paper with a score.
    All,
}

impl FromStr for Population {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ranked" => Ok(Population::Ranked),
            "all" => Ok(Population::All),
            other => Err(Error::Parse(format!(
                "unknown population {other:?} (expected ranked or all)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PaperErrors {
    pub seed: u64,
    pub paper: PaperId,
    pub target: f64,
    pub raw: f64,
    pub iso: f64,
}

impl PaperErrors {
    pub fn raw_sq(&self) -> f64 {
        (self.raw - self.target).powi(2)
    }

    pub fn iso_sq(&self) -> f64 {
        (self.iso - self.target).powi(2)
    }

    pub fn raw_abs(&self) -> f64 {
        (self.raw - self.target).abs()
    }

    pub fn iso_abs(&self) -> f64 {
        (self.iso - self.target).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub n: usize,
    pub raw_mse: f64,
    pub iso_mse: f64,
    pub raw_mae: f64,
    pub iso_mae: f64,
    pub mse_improvement_pct: f64,
    pub mae_improvement_pct: f64,
    pub mse_p_value: f64,
    pub mae_p_value: f64,
    pub ci95: Interval,
    pub ci99: Interval,
}

/// `100 · (raw − iso) / raw`, zero when both are zero.
pub fn improvement_pct(raw: f64, iso: f64) -> f64 {
    if raw == 0.0 {
        if iso == 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    } else {
        100.0 * (raw - iso) / raw
    }
}

impl Summary {
    pub fn from_rows(rows: &[PaperErrors]) -> Result<Summary> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::TooFewObservations { needed: 2, got: n });
        }
        let col = |f: fn(&PaperErrors) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let (raw_sq, iso_sq) = (col(PaperErrors::raw_sq), col(PaperErrors::iso_sq));
        let (raw_abs, iso_abs) = (col(PaperErrors::raw_abs), col(PaperErrors::iso_abs));
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (raw_mse, iso_mse) = (mean(&raw_sq), mean(&iso_sq));
        let (raw_mae, iso_mae) = (mean(&raw_abs), mean(&iso_abs));
        let diffs: Vec<f64> = raw_sq.iter().zip(&iso_sq).map(|(a, b)| a - b).collect();
        Ok(Summary {
            n,
            raw_mse,
            iso_mse,
            raw_mae,
            iso_mae,
            mse_improvement_pct: improvement_pct(raw_mse, iso_mse),
            mae_improvement_pct: improvement_pct(raw_mae, iso_mae),
            mse_p_value: paired_t_test_one_sided(&raw_sq, &iso_sq)?.p_value,
            mae_p_value: paired_t_test_one_sided(&raw_abs, &iso_abs)?.p_value,
            ci95: mse_reduction_ci(&diffs, 0.95)?,
            ci99: mse_reduction_ci(&diffs, 0.99)?,
        })
    }
}

/// Raw-versus-isotonic comparison for one strategy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub strategy: StrategyKind,
    pub target: TargetKind,
    pub seeds: Vec<u64>,
    pub rows: Vec<PaperErrors>,
    pub summary: Summary,
}

impl EvaluationReport {
    pub fn new(strategy: StrategyKind, target: TargetKind, seeds: Vec<u64>, rows: Vec<PaperErrors>) -> Result<Self> {
        let summary = Summary::from_rows(&rows)?;
        Ok(EvaluationReport {
            strategy,
            target,
            seeds,
            rows,
            summary,
        })
    }

    /// Concatenates the per-paper rows of several reports for one strategy.
    pub fn pool(reports: &[&EvaluationReport]) -> Result<Self> {
        let first = reports.first().ok_or(Error::EmptyInput)?;
        let mut seeds = Vec::new();
        let mut rows = Vec::new();
        for r in reports {
            if r.strategy != first.strategy || r.target != first.target {
                return Err(Error::InvalidArgument("pooling reports of different kinds".into()));
            }
            seeds.extend(&r.seeds);
            rows.extend(r.rows.iter().cloned());
        }
        EvaluationReport::new(first.strategy, first.target, seeds, rows)
    }
}

/// Calibrates `estimator` with every strategy and scores raw and isotonic
/// values against `target` on the chosen population.
pub fn evaluate_split(
    d: &Dataset,
    estimator: &ScoreVector,
    target: &ScoreVector,
    target_kind: TargetKind,
    population: Population,
    seed: u64,
) -> Result<Vec<EvaluationReport>> {
    let members: BTreeSet<PaperId> = match population {
        Population::Ranked => participating_papers(d, estimator),
        Population::All => estimator.ids().cloned().collect(),
    };
    if members.is_empty() {
        return Err(match population {
            Population::Ranked => Error::NoRankedPapers,
            Population::All => Error::EmptyInput,
        });
    }
    StrategyKind::ALL
        .iter()
        .map(|&strategy| {
            let calibrated = aggregation::calibrate(d, estimator, strategy)?;
            let rows = members
                .iter()
                .map(|id| {
                    Ok(PaperErrors {
                        seed,
                        paper: id.clone(),
                        target: target.get(id).ok_or_else(|| Error::IdMismatch(id.clone()))?,
                        raw: estimator.get(id).unwrap(),
                        iso: calibrated.scores.get(id).unwrap(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            EvaluationReport::new(strategy, target_kind, vec![seed], rows)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedEvaluation {
    pub seed: u64,
    pub excluded: usize,
    pub reports: Vec<EvaluationReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub per_seed: Vec<SeedEvaluation>,
    /// One report per strategy, rows concatenated across seeds.
    pub pooled: Vec<EvaluationReport>,
}

/// Runs `f` for every item, in parallel when the `parallel` feature is on.
/// Results keep the input order.
pub(crate) fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Pools per-seed report lists (same strategy order in each) strategy by strategy.
pub fn pool_by_strategy(per_seed: &[Vec<EvaluationReport>]) -> Result<Vec<EvaluationReport>> {
    let first = per_seed.first().ok_or(Error::EmptyInput)?;
    (0..first.len())
        .map(|i| {
            let parts: Vec<&EvaluationReport> = per_seed.iter().map(|r| &r[i]).collect();
            EvaluationReport::pool(&parts)
        })
        .collect()
}

/// Holdout evaluation of all three strategies for every seed, plus pooled reports.
pub fn evaluate_strategies(
    d: &Dataset,
    mode: HoldoutMode,
    seeds: &[u64],
    population: Population,
) -> Result<Evaluation> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let results = map_ordered(seeds, |&seed| {
        let split = holdout_split(d, mode, seed);
        let reports = evaluate_split(
            d,
            &split.estimator_scores,
            &split.proxy_targets,
            TargetKind::Proxy,
            population,
            seed,
        )?;
        Ok(SeedEvaluation {
            seed,
            excluded: split.excluded.len(),
            reports,
        })
    });
    let per_seed: Vec<SeedEvaluation> = results.into_iter().collect::<Result<_>>()?;
    let lists: Vec<Vec<EvaluationReport>> = per_seed.iter().map(|s| s.reports.clone()).collect();
    let pooled = pool_by_strategy(&lists)?;
    Ok(Evaluation { per_seed, pooled })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupKey {
    /// Longest submitted ranking among the authors ranking the paper.
    RankingLength,
    /// Number of authors of the paper.
    CoauthorCount,
}

impl GroupKey {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupKey::RankingLength => "ranking_length",
            GroupKey::CoauthorCount => "coauthor_count",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub key: usize,
    pub n: usize,
    pub raw_mse: f64,
    pub iso_mse: f64,
    pub raw_mae: f64,
    pub iso_mae: f64,
}

impl GroupStats {
    pub fn mse_improvement_pct(&self) -> f64 {
        improvement_pct(self.raw_mse, self.iso_mse)
    }
}

/// Per-paper group key. Papers without a multi-paper ranking get ranking
/// length 0.
pub fn group_keys(d: &Dataset, key: GroupKey) -> BTreeMap<PaperId, usize> {
    let mut out = BTreeMap::new();
    match key {
        GroupKey::RankingLength => {
            for p in &d.papers {
                out.insert(p.id.clone(), 0);
            }
            for a in &d.authors {
                let Some(r) = &a.ranking else { continue };
                let len = r.len();
                if len < 2 {
                    continue;
                }
                for id in r.ids() {
                    let e = out.entry(id.clone()).or_insert(0);
                    *e = (*e).max(len);
                }
            }
        }
        GroupKey::CoauthorCount => {
            let by_paper = d.authors_by_paper();
            for p in &d.papers {
                out.insert(p.id.clone(), by_paper.get(&p.id).map_or(0, Vec::len));
            }
        }
    }
    out
}

/// Aggregate errors per group; groups are listed by key and empty ones omitted.
pub fn group_by(d: &Dataset, report: &EvaluationReport, key: GroupKey) -> Vec<GroupStats> {
    let keys = group_keys(d, key);
    let mut acc: BTreeMap<usize, [f64; 5]> = BTreeMap::new();
    for row in &report.rows {
        let k = keys.get(&row.paper).copied().unwrap_or(0);
        let e = acc.entry(k).or_default();
        e[0] += 1.0;
        e[1] += row.raw_sq();
        e[2] += row.iso_sq();
        e[3] += row.raw_abs();
        e[4] += row.iso_abs();
    }
    acc.into_iter()
        .map(|(key, s)| GroupStats {
            key,
            n: s[0] as usize,
            raw_mse: s[1] / s[0],
            iso_mse: s[2] / s[0],
            raw_mae: s[3] / s[0],
            iso_mae: s[4] / s[0],
        })
        .collect()
}

/// The `k` best-scored papers, ties broken by ascending id.
pub fn top_k(scores: &ScoreVector, k: usize) -> Vec<PaperId> {
    let mut all: Vec<(&PaperId, f64)> = scores.iter().collect();
    all.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    all.into_iter().take(k).map(|(id, _)| id.clone()).collect()
}

/// Number of papers in the top `percentile` share, rounded up.
pub fn top_count(n: usize, percentile: f64) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004
    ((percentile * n as f64) - 1e-9).ceil().max(0.0) as usize
}

/// `|top_K(a) ∩ top_K(b)| / K` with `K = ⌈percentile · n⌉`.
pub fn top_k_overlap(a: &ScoreVector, b: &ScoreVector, percentile: f64) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(id) = a
        .ids()
        .find(|id| !b.contains(id))
        .or_else(|| b.ids().find(|id| !a.contains(id)))
    {
        return Err(Error::IdMismatch(id.clone()));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(Error::InvalidArgument(format!("percentile {percentile} not in (0, 1]")));
    }
    let k = top_count(a.len(), percentile).max(1);
    let ta: BTreeSet<PaperId> = top_k(a, k).into_iter().collect();
    let hits = top_k(b, k).iter().filter(|id| ta.contains(*id)).count();
    Ok(hits as f64 / k as f64)
}

/// Papers accepted as oral (award papers included).
pub fn oral_reference(d: &Dataset) -> BTreeSet<PaperId> {
    d.papers
        .iter()
        .filter(|p| matches!(p.decision, Some(Decision::Oral | Decision::Award)))
        .map(|p| p.id.clone())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub fraction: f64,
    pub reversed_authors: usize,
    pub overlaps: Vec<usize>,
    pub mean: f64,
    pub sd: f64,
}

/// Reverses the rankings of a random share of ranking authors, recalibrates,
/// and counts how many of the top `k` isotonic papers fall in `reference`.
///
/// Each seed draws one random order of the ranking authors; fraction `f`
/// reverses the first `⌊f · R⌋` of them, so larger fractions perturb supersets.
pub fn perturbation_study(
    d: &Dataset,
    scores: &ScoreVector,
    reference: &BTreeSet<PaperId>,
    fractions: &[f64],
    k: usize,
    seeds: &[u64],
    strategy: StrategyKind,
) -> Result<Vec<PerturbationRow>> {
    if k == 0 || k > scores.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must be in 1..={}",
            scores.len()
        )));
    }
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    if let Some(f) = fractions.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidArgument(format!("fraction {f} not in [0, 1]")));
    }
    let rankers: Vec<_> = effective_rankings(d, scores)
        .into_iter()
        .filter(|(_, r)| r.len() >= 2)
        .map(|(a, _)| a)
        .collect();

    let per_seed = map_ordered(seeds, |&seed| -> Result<Vec<usize>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order = rankers.clone();
        order.shuffle(&mut rng);
        fractions
            .iter()
            .map(|&f| {
                let m = ((f * order.len() as f64) + 1e-9).floor() as usize;
                let flip: BTreeSet<_> = order[..m.min(order.len())].iter().collect();
                let mut perturbed = d.clone();
                for a in &mut perturbed.authors {
                    if flip.contains(&a.id) {
                        a.ranking = a.ranking.as_ref().map(|r| r.reversed());
                    }
                }
                let cal = aggregation::calibrate(&perturbed, scores, strategy)?;
                Ok(top_k(&cal.scores, k)
                    .iter()
                    .filter(|id| reference.contains(*id))
                    .count())
            })
            .collect()
    });
    let per_seed: Vec<Vec<usize>> = per_seed.into_iter().collect::<Result<_>>()?;

    Ok(fractions
        .iter()
        .enumerate()
        .map(|(i, &f)| {
            let overlaps: Vec<usize> = per_seed.iter().map(|s| s[i]).collect();
            let vals: Vec<f64> = overlaps.iter().map(|&c| c as f64).collect();
            let (mean, sd) = stats::mean_sd(&vals);
            PerturbationRow {
                fraction: f,
                reversed_authors: ((f * rankers.len() as f64) + 1e-9).floor() as usize,
                overlaps,
                mean,
                sd,
            }
        })
        .collect())
}

/// Drops the rankings of authors whose role is not in `roles`; authorship and
/// papers are untouched.
pub fn filter_rankings(d: &Dataset, roles: &BTreeSet<Role>) -> Dataset {
    let mut out = d.clone();
    for a in &mut out.authors {
        if !roles.contains(&a.role) {
            a.ranking = None;
        }
    }
    out
}

impl fmt::Display for Population {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Population::Ranked => "ranked",
            Population::All => "all",
        })
    }
}
