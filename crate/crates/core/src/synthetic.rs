//! Synthetic conferences: ground-truth quality, noisy and biased reviewers,
//! Plackett–Luce author rankings and an authorship graph whose
//! papers-per-author tail matches a large ML venue.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal as NormalCdf};

use crate::aggregation::{self, participating_papers, StrategyKind};
use crate::error::{Error, Result};
use crate::evaluation::{
    self, evaluate_split, holdout_split, stats::mse_reduction_ci, stats::Interval, EvaluationReport, HoldoutMode,
    Population, TargetKind,
};
use crate::isotonic::ScoreVector;
use crate::model::{Author, AuthorId, Dataset, Paper, PaperId, Ranking, Review};

pub const SCORE_MIN: i32 = 0;
pub const SCORE_MAX: i32 = 10;

/// How the second parameter of `N(μ, s)` is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum ScaleConvention {
    /// `s` is the standard deviation.
    #[default]
    StdDev,
    /// `s` is the variance.
    Variance,
}

impl ScaleConvention {
    pub fn std_dev(self, scale: f64) -> f64 {
        match self {
            ScaleConvention::StdDev => scale,
            ScaleConvention::Variance => scale.sqrt(),
        }
    }
}

impl FromStr for ScaleConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sd" | "stddev" => Ok(ScaleConvention::StdDev),
            "var" | "variance" => Ok(ScaleConvention::Variance),
            other => Err(Error::Parse(format!("unknown scale convention {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ReviewerModel {
    Unbiased,
    /// Each review slot is bold or conservative with probability 1/2.
    BoldConservativeMix,
    /// Unbiased stored reviews; the experiment adds a uniform outlier score.
    WithOutlier,
}

/// Behaviour of one review slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reviewer {
    Unbiased,
    Bold,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankingModel {
    /// Authors rank by true quality.
    TruthOrder,
    /// Authors rank by a Plackett–Luce draw with weights `exp(sharpness · R)`.
    PlackettLuce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExperimentKind {
    NoisyRanking,
    BiasedReviewers,
    OutlierScore,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 3] = [
        ExperimentKind::NoisyRanking,
        ExperimentKind::BiasedReviewers,
        ExperimentKind::OutlierScore,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExperimentKind::NoisyRanking => "noisy",
            ExperimentKind::BiasedReviewers => "biased",
            ExperimentKind::OutlierScore => "outlier",
        }
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?} (expected noisy, biased or outlier)")))
    }
}

/// Papers-per-author targets for the synthetic authorship graph.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuthorGraphConfig {
    pub n_authors: usize,
    pub n_papers: usize,
    /// `(threshold, number of authors with at least that many papers)`,
    /// thresholds strictly increasing and all ≥ 2.
    pub tail_targets: Vec<(usize, usize)>,
    /// Largest number of papers any single author may get.
    pub max_papers_per_author: usize,
    pub max_ranking_length: usize,
    /// Exponent of the `d^-a` weights used to pick a degree inside a tail bin.
    pub degree_exponent: f64,
}

pub const REFERENCE_AUTHORS: usize = 18_535;
pub const REFERENCE_PAPERS: usize = 6_538;

impl AuthorGraphConfig {
    /// Full-size venue: 18,535 authors, 6,538 papers, longest ranking 17.
    pub fn reference_venue() -> Self {
        AuthorGraphConfig {
            n_authors: REFERENCE_AUTHORS,
            n_papers: REFERENCE_PAPERS,
            tail_targets: vec![(2, 4505), (5, 508), (10, 74), (15, 26), (20, 7)],
            max_papers_per_author: 24,
            max_ranking_length: 17,
            degree_exponent: 2.5,
        }
    }

    /// Every count multiplied by `factor` and rounded.
    pub fn scaled(factor: f64) -> Self {
        let full = Self::reference_venue();
        let s = |x: usize| (x as f64 * factor).round() as usize;
        AuthorGraphConfig {
            n_authors: s(full.n_authors),
            n_papers: s(full.n_papers),
            tail_targets: full.tail_targets.iter().map(|&(t, c)| (t, s(c))).collect(),
            ..full
        }
    }

    /// Scaled so the paper count is exactly `n_papers`.
    pub fn with_papers(n_papers: usize) -> Self {
        let mut cfg = Self::scaled(n_papers as f64 / REFERENCE_PAPERS as f64);
        cfg.n_papers = n_papers;
        cfg
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_authors == 0 || self.n_papers == 0 {
            return bad("graph needs at least one author and one paper".into());
        }
        let mut prev: Option<(usize, usize)> = None;
        for &(t, c) in &self.tail_targets {
            if t < 2 {
                return bad(format!("tail threshold {t} must be at least 2"));
            }
            if let Some((pt, pc)) = prev {
                if t <= pt {
                    return bad("tail thresholds must increase".into());
                }
                if c > pc {
                    return bad(format!("tail count for ≥{t} exceeds the count for ≥{pt}"));
                }
            }
            prev = Some((t, c));
        }
        if let Some(&(_, c)) = self.tail_targets.first() {
            if c > self.n_authors {
                return bad("more multi-paper authors than authors".into());
            }
        }
        if let Some(&(t, _)) = self.tail_targets.last() {
            if t > self.max_papers_per_author {
                return bad("largest tail threshold exceeds max_papers_per_author".into());
            }
        }
        if self.max_ranking_length < 2 {
            return bad("max_ranking_length must be at least 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyntheticConfig {
    pub truth_mean: f64,
    pub truth_scale: f64,
    pub noise_scale: f64,
    pub scale_convention: ScaleConvention,
    pub reviewer_model: ReviewerModel,
    pub reviews_per_paper: usize,
    pub ranking_model: RankingModel,
    /// Multiplier on the true scores inside the Plackett–Luce weights; 0 gives
    /// uniformly random rankings.
    pub ranking_sharpness: f64,
    pub graph: AuthorGraphConfig,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            truth_mean: 5.0,
            truth_scale: 1.25,
            noise_scale: 1.25,
            scale_convention: ScaleConvention::StdDev,
            reviewer_model: ReviewerModel::Unbiased,
            reviews_per_paper: 3,
            ranking_model: RankingModel::PlackettLuce,
            ranking_sharpness: 1.0,
            graph: AuthorGraphConfig::reference_venue(),
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    /// Defaults for one of the three experiments on a graph scaled by `scale`.
    pub fn for_experiment(kind: ExperimentKind, scale: f64, seed: u64) -> Self {
        let (reviewer_model, ranking_model) = match kind {
            ExperimentKind::NoisyRanking => (ReviewerModel::Unbiased, RankingModel::PlackettLuce),
            ExperimentKind::BiasedReviewers => (ReviewerModel::BoldConservativeMix, RankingModel::TruthOrder),
            ExperimentKind::OutlierScore => (ReviewerModel::WithOutlier, RankingModel::PlackettLuce),
        };
        SyntheticConfig {
            reviewer_model,
            ranking_model,
            graph: AuthorGraphConfig::scaled(scale),
            seed,
            ..Default::default()
        }
    }

    pub fn n_papers(&self) -> usize {
        self.graph.n_papers
    }

    pub fn truth_sd(&self) -> f64 {
        self.scale_convention.std_dev(self.truth_scale)
    }

    pub fn noise_sd(&self) -> f64 {
        self.scale_convention.std_dev(self.noise_scale)
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !self.truth_mean.is_finite() || !finite_nonneg(self.truth_scale) || !finite_nonneg(self.noise_scale) {
            return Err(Error::InvalidArgument(
                "truth and noise scales must be finite and non-negative".into(),
            ));
        }
        if self.reviews_per_paper == 0 {
            return Err(Error::InvalidArgument("reviews_per_paper must be at least 1".into()));
        }
        if !self.ranking_sharpness.is_finite() {
            return Err(Error::InvalidArgument("ranking_sharpness must be finite".into()));
        }
        self.graph.validate()
    }
}

/// Independent RNG streams derived from one seed.
#[derive(Clone, Copy)]
enum Stream {
    Graph = 1,
    Truth = 2,
    Reviews = 3,
    Rankings = 4,
    Experiment = 5,
}

fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn normal(mean: f64, sd: f64) -> Normal<f64> {
    Normal::new(mean, sd).expect("validated scale")
}

/// `R = clip(N(truth_mean, truth_sd), 0, 10)`.
pub fn gen_ground_truth<R: Rng + ?Sized>(n: usize, cfg: &SyntheticConfig, rng: &mut R) -> Vec<f64> {
    let dist = normal(cfg.truth_mean, cfg.truth_sd());
    (0..n)
        .map(|_| dist.sample(rng).clamp(SCORE_MIN as f64, SCORE_MAX as f64))
        .collect()
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Additive shift of a reviewer at true quality `r`.
pub fn reviewer_bias(r: f64, reviewer: Reviewer) -> f64 {
    let b = sigmoid(r - 5.0) - 0.5;
    match reviewer {
        Reviewer::Unbiased => 0.0,
        Reviewer::Bold => b,
        Reviewer::Conservative => -b,
    }
}

/// `clip(round(r + bias + N(0, noise_sd)), 0, 10)`, rounding half away from zero.
pub fn gen_review<R: Rng + ?Sized>(r: f64, reviewer: Reviewer, noise_sd: f64, rng: &mut R) -> i32 {
    let noise = normal(0.0, noise_sd).sample(rng);
    let y0 = (r + reviewer_bias(r, reviewer) + noise).round();
    y0.clamp(SCORE_MIN as f64, SCORE_MAX as f64) as i32
}

/// Exact mean of [`gen_review`] at quality `r`.
pub fn expected_review_score(r: f64, reviewer: Reviewer, noise_sd: f64) -> f64 {
    let mu = r + reviewer_bias(r, reviewer);
    // E[y] = Σ_{k=0}^{9} P(y > k), and y > k iff mu + ε ≥ k + 0.5
    (SCORE_MIN..SCORE_MAX)
        .map(|k| {
            let cut = k as f64 + 0.5;
            if noise_sd == 0.0 {
                if mu >= cut {
                    1.0
                } else {
                    0.0
                }
            } else {
                NormalCdf::new(mu, noise_sd).expect("sd > 0").sf(cut)
            }
        })
        .sum()
}

/// Plackett–Luce draw: indices of `scores` from first to last.
pub fn sample_plackett_luce<R: Rng + ?Sized>(scores: &[f64], rng: &mut R) -> Vec<usize> {
    let mut remaining: Vec<usize> = (0..scores.len()).collect();
    let mut order = Vec::with_capacity(scores.len());
    let mut weights = Vec::with_capacity(scores.len());
    while remaining.len() > 1 {
        let m = remaining.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        weights.clear();
        weights.extend(remaining.iter().map(|&i| (scores[i] - m).exp()));
        let total: f64 = weights.iter().sum();
        let mut u = rng.random::<f64>() * total;
        let mut pick = remaining.len() - 1;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                pick = j;
                break;
            }
            u -= w;
        }
        order.push(remaining.remove(pick));
    }
    order.extend(remaining);
    order
}

/// Probability of `order` under Plackett–Luce with the given scores.
pub fn plackett_luce_probability(scores: &[f64], order: &[usize]) -> f64 {
    let mut log_p = 0.0;
    for j in 0..order.len() {
        let rest = &order[j..];
        let m = rest.iter().map(|&i| scores[i]).fold(f64::NEG_INFINITY, f64::max);
        let lse = m + rest.iter().map(|&i| (scores[i] - m).exp()).sum::<f64>().ln();
        log_p += scores[order[j]] - lse;
    }
    log_p.exp()
}

/// Authors with at least each threshold's number of papers.
pub fn tail_counts(papers_per_author: &[usize], thresholds: &[usize]) -> Vec<(usize, usize)> {
    thresholds
        .iter()
        .map(|&t| (t, papers_per_author.iter().filter(|&&d| d >= t).count()))
        .collect()
}

fn pad(prefix: char, i: usize, n: usize) -> String {
    let width = n.to_string().len();
    format!("{prefix}{:0width$}", i + 1)
}

fn sample_author_degrees<R: Rng + ?Sized>(cfg: &AuthorGraphConfig, rng: &mut R) -> Vec<usize> {
    let mut bins: Vec<(usize, usize, usize)> = Vec::new();
    let ts = &cfg.tail_targets;
    let multi = ts.first().map_or(0, |&(_, c)| c);
    bins.push((1, ts.first().map_or(1, |&(t, _)| t - 1), cfg.n_authors - multi));
    for (i, &(t, c)) in ts.iter().enumerate() {
        let (hi, next) = match ts.get(i + 1) {
            Some(&(nt, nc)) => (nt - 1, nc),
            None => (cfg.max_papers_per_author, 0),
        };
        bins.push((t, hi, c - next));
    }

    let mut degrees = Vec::with_capacity(cfg.n_authors);
    for (lo, hi, count) in bins {
        if count == 0 {
            continue;
        }
        let support: Vec<usize> = (lo..=hi).collect();
        let weights: Vec<f64> = support.iter().map(|&d| (d as f64).powf(-cfg.degree_exponent)).collect();
        let dist = rand::distr::weighted::WeightedIndex::new(&weights).expect("positive weights");
        degrees.extend((0..count).map(|_| support[dist.sample(rng)]));
    }
    degrees.shuffle(rng);
    degrees
}

/// Pairs author stubs with paper stubs; `None` if duplicates cannot be repaired.
fn pair_stubs<R: Rng + ?Sized>(author_degrees: &[usize], n_papers: usize, rng: &mut R) -> Option<Vec<(usize, usize)>> {
    let stubs: usize = author_degrees.iter().sum();
    let mut paper_stubs: Vec<usize> = (0..n_papers).collect();
    paper_stubs.extend((0..stubs - n_papers).map(|_| rng.random_range(0..n_papers)));
    paper_stubs.shuffle(rng);
    let author_stubs: Vec<usize> = author_degrees
        .iter()
        .enumerate()
        .flat_map(|(a, &d)| std::iter::repeat_n(a, d))
        .collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(stubs);
    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(stubs);
    for (&a, &p) in author_stubs.iter().zip(&paper_stubs) {
        if seen.insert((a, p)) {
            edges.push((a, p));
            continue;
        }
        // swap papers with an accepted edge of another author
        let mut fixed = false;
        for _ in 0..1000 {
            if edges.is_empty() {
                break;
            }
            let j = rng.random_range(0..edges.len());
            let (b, q) = edges[j];
            if b == a || seen.contains(&(a, q)) || seen.contains(&(b, p)) {
                continue;
            }
            seen.remove(&(b, q));
            seen.insert((b, p));
            seen.insert((a, q));
            edges[j] = (b, p);
            edges.push((a, q));
            fixed = true;
            break;
        }
        if !fixed {
            return None;
        }
    }
    Some(edges)
}

/// Papers, authors and authorship with no reviews or rankings.
///
/// Author degrees are drawn bin by bin so the tail counts are met exactly;
/// every paper gets one author and the remaining author slots land on
/// uniformly random papers.
pub fn gen_authorship_graph<R: Rng + ?Sized>(cfg: &AuthorGraphConfig, rng: &mut R) -> Result<Dataset> {
    cfg.validate()?;
    const ATTEMPTS: usize = 20;
    let thresholds: Vec<usize> = cfg.tail_targets.iter().map(|&(t, _)| t).collect();
    let mut realized = Vec::new();
    for _ in 0..ATTEMPTS {
        let degrees = sample_author_degrees(cfg, rng);
        let stubs: usize = degrees.iter().sum();
        realized = tail_counts(&degrees, &thresholds);
        let tails_ok = realized
            .iter()
            .zip(&cfg.tail_targets)
            .all(|(&(_, got), &(_, want))| (got as f64 - want as f64).abs() <= 0.1 * want as f64);
        if !tails_ok || stubs < cfg.n_papers || degrees.iter().any(|&d| d > cfg.n_papers) {
            continue;
        }
        let Some(mut edges) = pair_stubs(&degrees, cfg.n_papers, rng) else {
            continue;
        };
        edges.sort_unstable();
        let papers = (0..cfg.n_papers)
            .map(|i| Paper {
                id: PaperId::new(pad('p', i, cfg.n_papers)),
                reviews: Vec::new(),
                decision: None,
                ground_truth: None,
            })
            .collect();
        let authors = (0..cfg.n_authors)
            .map(|i| Author::new(pad('a', i, cfg.n_authors)))
            .collect();
        let authorship = edges
            .into_iter()
            .map(|(a, p)| {
                (
                    AuthorId::new(pad('a', a, cfg.n_authors)),
                    PaperId::new(pad('p', p, cfg.n_papers)),
                )
            })
            .collect();
        return Ok(Dataset {
            papers,
            authors,
            authorship,
        });
    }
    Err(Error::InfeasibleGraph {
        attempts: ATTEMPTS,
        realized,
    })
}

fn reviewer_for<R: Rng + ?Sized>(model: ReviewerModel, rng: &mut R) -> Reviewer {
    match model {
        ReviewerModel::Unbiased | ReviewerModel::WithOutlier => Reviewer::Unbiased,
        ReviewerModel::BoldConservativeMix => {
            if rng.random_bool(0.5) {
                Reviewer::Bold
            } else {
                Reviewer::Conservative
            }
        }
    }
}

/// Full synthetic dataset: graph, ground truth, reviews and one strict
/// ranking per multi-paper author (a random subset when the author has more
/// papers than `max_ranking_length`).
pub fn generate_dataset(cfg: &SyntheticConfig) -> Result<Dataset> {
    cfg.validate()?;
    let mut d = gen_authorship_graph(&cfg.graph, &mut stream_rng(cfg.seed, Stream::Graph))?;

    let truth = gen_ground_truth(d.papers.len(), cfg, &mut stream_rng(cfg.seed, Stream::Truth));
    let mut rng = stream_rng(cfg.seed, Stream::Reviews);
    let sd = cfg.noise_sd();
    for (p, &r) in d.papers.iter_mut().zip(&truth) {
        p.ground_truth = Some(r);
        p.reviews = (0..cfg.reviews_per_paper)
            .map(|_| {
                let who = reviewer_for(cfg.reviewer_model, &mut rng);
                Review::new(gen_review(r, who, sd, &mut rng))
            })
            .collect();
    }

    let truth_of: BTreeMap<PaperId, f64> = d
        .papers
        .iter()
        .map(|p| (p.id.clone(), p.ground_truth.unwrap()))
        .collect();
    let by_author = d.papers_by_author();
    let mut rng = stream_rng(cfg.seed, Stream::Rankings);
    for a in &mut d.authors {
        let Some(owned) = by_author.get(&a.id) else { continue };
        if owned.len() < 2 {
            continue;
        }
        let mut ids = owned.clone();
        if ids.len() > cfg.graph.max_ranking_length {
            ids.shuffle(&mut rng);
            ids.truncate(cfg.graph.max_ranking_length);
            ids.sort();
        }
        let ordered: Vec<PaperId> = match cfg.ranking_model {
            RankingModel::TruthOrder => {
                let mut v = ids;
                v.sort_by(|x, y| truth_of[y].total_cmp(&truth_of[x]).then_with(|| x.cmp(y)));
                v
            }
            RankingModel::PlackettLuce => {
                let s: Vec<f64> = ids.iter().map(|id| cfg.ranking_sharpness * truth_of[id]).collect();
                sample_plackett_luce(&s, &mut rng)
                    .into_iter()
                    .map(|i| ids[i].clone())
                    .collect()
            }
        };
        a.ranking = Some(Ranking::strict(ordered));
    }
    Ok(d)
}

fn truth_vector(d: &Dataset) -> ScoreVector {
    d.papers
        .iter()
        .filter_map(|p| p.ground_truth.map(|g| (p.id.clone(), g)))
        .collect()
}

/// Reports of one synthetic run, one per strategy.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticRun {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub dataset: Dataset,
    pub reports: Vec<EvaluationReport>,
    /// Outlier runs only: the same split with the outlier removed.
    pub baseline: Option<Vec<EvaluationReport>>,
}

/// One synthetic experiment for `cfg.seed`.
///
/// Noisy-ranking and biased-reviewer runs compare the mean review score and
/// its calibration against the ground truth. The outlier run averages one
/// random review with a uniform draw from 1..=10 as the estimator and uses the
/// mean of the remaining reviews as the target.
pub fn run_synthetic_experiment(kind: ExperimentKind, cfg: &SyntheticConfig) -> Result<SyntheticRun> {
    let expected = match kind {
        ExperimentKind::NoisyRanking => ReviewerModel::Unbiased,
        ExperimentKind::BiasedReviewers => ReviewerModel::BoldConservativeMix,
        ExperimentKind::OutlierScore => ReviewerModel::WithOutlier,
    };
    if cfg.reviewer_model != expected {
        return Err(Error::InvalidArgument(format!(
            "experiment {} needs reviewer model {expected:?}",
            kind.as_str()
        )));
    }
    if kind == ExperimentKind::OutlierScore && cfg.reviews_per_paper < 2 {
        return Err(Error::InvalidArgument(
            "outlier experiment needs at least two reviews per paper".into(),
        ));
    }
    let d = generate_dataset(cfg)?;
    let (reports, baseline) = match kind {
        ExperimentKind::NoisyRanking | ExperimentKind::BiasedReviewers => {
            let reports = evaluate_split(
                &d,
                &d.mean_scores(),
                &truth_vector(&d),
                TargetKind::Truth,
                Population::Ranked,
                cfg.seed,
            )?;
            (reports, None)
        }
        ExperimentKind::OutlierScore => {
            let mut rng = stream_rng(cfg.seed, Stream::Experiment);
            let mut with_outlier = ScoreVector::new();
            let mut without = ScoreVector::new();
            let mut target = ScoreVector::new();
            for p in &d.papers {
                let n = p.reviews.len();
                let j = rng.random_range(0..n);
                let outlier = rng.random_range(1..=10) as f64;
                let pick = p.reviews[j].score as f64;
                let rest: f64 = p.reviews.iter().map(|r| r.score as f64).sum::<f64>() - pick;
                with_outlier.insert(p.id.clone(), (pick + outlier) / 2.0);
                without.insert(p.id.clone(), pick);
                target.insert(p.id.clone(), rest / (n - 1) as f64);
            }
            let run =
                |est: &ScoreVector| evaluate_split(&d, est, &target, TargetKind::Proxy, Population::Ranked, cfg.seed);
            (run(&with_outlier)?, Some(run(&without)?))
        }
    };
    Ok(SyntheticRun {
        kind,
        seed: cfg.seed,
        dataset: d,
        reports,
        baseline,
    })
}

/// Runs of one experiment over several seeds, with pooled reports.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedRuns {
    pub runs: Vec<SyntheticRun>,
    pub pooled: Vec<EvaluationReport>,
    pub pooled_baseline: Option<Vec<EvaluationReport>>,
}

/// [`run_synthetic_experiment`] once per seed (in parallel when enabled).
pub fn run_replicated(kind: ExperimentKind, cfg: &SyntheticConfig, seeds: &[u64]) -> Result<ReplicatedRuns> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("at least one seed is required".into()));
    }
    let runs: Vec<SyntheticRun> = evaluation::map_ordered(seeds, |&seed| {
        let cfg = SyntheticConfig { seed, ..cfg.clone() };
        run_synthetic_experiment(kind, &cfg)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let lists: Vec<Vec<EvaluationReport>> = runs.iter().map(|r| r.reports.clone()).collect();
    let pooled = evaluation::pool_by_strategy(&lists)?;
    let pooled_baseline = match runs[0].baseline {
        Some(_) => {
            let lists: Vec<Vec<EvaluationReport>> = runs.iter().map(|r| r.baseline.clone().unwrap()).collect();
            Some(evaluation::pool_by_strategy(&lists)?)
        }
        None => None,
    };
    Ok(ReplicatedRuns {
        runs,
        pooled,
        pooled_baseline,
    })
}

/// Proxy and true errors of one holdout split on a synthetic dataset.
///
/// The truth for each paper is the exact expected review score, so the
/// held-out mean is an unbiased noisy target for it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProxyTruthComparison {
    pub seed: u64,
    pub n: usize,
    pub proxy_raw_mse: f64,
    pub proxy_iso_mse: f64,
    pub true_raw_mse: f64,
    pub true_iso_mse: f64,
    /// 95% interval for the mean proxy-MSE reduction.
    pub ci95: Interval,
}

impl ProxyTruthComparison {
    pub fn proxy_reduction(&self) -> f64 {
        self.proxy_raw_mse - self.proxy_iso_mse
    }

    pub fn true_reduction(&self) -> f64 {
        self.true_raw_mse - self.true_iso_mse
    }

    pub fn relative_proxy_reduction(&self) -> f64 {
        self.proxy_reduction() / self.proxy_raw_mse
    }

    pub fn relative_true_reduction(&self) -> f64 {
        self.true_reduction() / self.true_raw_mse
    }
}

/// One-score holdout on an unbiased-reviewer dataset, scored both against the
/// held-out mean and against the expected review score.
pub fn proxy_truth_comparison(cfg: &SyntheticConfig, strategy: StrategyKind) -> Result<ProxyTruthComparison> {
    if cfg.reviewer_model != ReviewerModel::Unbiased {
        return Err(Error::InvalidArgument(
            "proxy/truth comparison needs unbiased reviewers".into(),
        ));
    }
    let d = generate_dataset(cfg)?;
    let split = holdout_split(&d, HoldoutMode::OneScore, cfg.seed);
    let cal = aggregation::calibrate(&d, &split.estimator_scores, strategy)?;
    let members: BTreeSet<PaperId> = participating_papers(&d, &split.estimator_scores);
    if members.len() < 2 {
        return Err(Error::TooFewObservations {
            needed: 2,
            got: members.len(),
        });
    }
    let sd = cfg.noise_sd();
    let truth: BTreeMap<&PaperId, f64> = d
        .papers
        .iter()
        .map(|p| {
            (
                &p.id,
                expected_review_score(p.ground_truth.unwrap(), Reviewer::Unbiased, sd),
            )
        })
        .collect();
    let (mut pr, mut pi, mut tr, mut ti) = (0.0, 0.0, 0.0, 0.0);
    let mut diffs = Vec::with_capacity(members.len());
    for id in &members {
        let raw = split.estimator_scores.get(id).unwrap();
        let iso = cal.scores.get(id).unwrap();
        let y = split.proxy_targets.get(id).unwrap();
        let theta = truth[id];
        let (a, b) = ((raw - y).powi(2), (iso - y).powi(2));
        pr += a;
        pi += b;
        diffs.push(a - b);
        tr += (raw - theta).powi(2);
        ti += (iso - theta).powi(2);
    }
    let n = members.len() as f64;
    Ok(ProxyTruthComparison {
        seed: cfg.seed,
        n: members.len(),
        proxy_raw_mse: pr / n,
        proxy_iso_mse: pi / n,
        true_raw_mse: tr / n,
        true_iso_mse: ti / n,
        ci95: mse_reduction_ci(&diffs, 0.95)?,
    })
}
