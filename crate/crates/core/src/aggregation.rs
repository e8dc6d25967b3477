//! Combining several authors' projections into one calibrated score per paper.
//!
//! Every strategy starts from each ranking author's ranking restricted to the
//! papers that have an input score. Rankings left with fewer than two papers
//! are inert. Papers outside every ranking keep their input score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::isotonic::{project_isotonic, ScoreVector};
use crate::model::{AuthorId, Dataset, PaperId, Ranking};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    SimpleAveraging,
    Greedy,
    MultiOwner,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::SimpleAveraging,
        StrategyKind::Greedy,
        StrategyKind::MultiOwner,
    ];

    /// Short name used on the command line and in report files.
    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::SimpleAveraging => "simple",
            StrategyKind::Greedy => "greedy",
            StrategyKind::MultiOwner => "multiowner",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "simple" => Ok(StrategyKind::SimpleAveraging),
            "greedy" => Ok(StrategyKind::Greedy),
            "multiowner" => Ok(StrategyKind::MultiOwner),
            other => Err(Error::Parse(format!(
                "unknown strategy {other:?} (expected simple, greedy or multiowner)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub scores: ScoreVector,
    /// Authors whose projection fed into each paper's score. Papers without
    /// contributors carry their input score.
    pub contributors: BTreeMap<PaperId, Vec<AuthorId>>,
    pub strategy: StrategyKind,
}

/// Drops ids not in `keep` and any group left empty.
pub fn restrict_ranking(r: &Ranking, keep: &BTreeSet<PaperId>) -> Ranking {
    r.restrict(keep)
}

/// Each ranking author's ranking restricted to papers present in `input`,
/// sorted by author id. Authors left with an empty ranking are omitted.
pub fn effective_rankings(d: &Dataset, input: &ScoreVector) -> Vec<(AuthorId, Ranking)> {
    let scored: BTreeSet<PaperId> = input.ids().cloned().collect();
    let mut out: Vec<(AuthorId, Ranking)> = d
        .authors
        .iter()
        .filter_map(|a| {
            let r = a.ranking.as_ref()?.restrict(&scored);
            (!r.is_empty()).then(|| (a.id.clone(), r))
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Papers covered by at least one effective ranking of length two or more.
pub fn participating_papers(d: &Dataset, input: &ScoreVector) -> BTreeSet<PaperId> {
    effective_rankings(d, input)
        .into_iter()
        .filter(|(_, r)| r.len() >= 2)
        .flat_map(|(_, r)| r.groups.into_iter().flatten())
        .collect()
}

fn fit_ranking(input: &ScoreVector, ranking: &Ranking) -> Result<Vec<(PaperId, f64)>> {
    let sub: ScoreVector = ranking
        .ids()
        .map(|id| {
            input
                .get(id)
                .map(|v| (id.clone(), v))
                .ok_or_else(|| Error::MissingScore(id.clone()))
        })
        .collect::<Result<_>>()?;
    let fit = project_isotonic(&sub, ranking)?;
    Ok(fit.scores.iter().map(|(k, v)| (k.clone(), v)).collect())
}

pub fn calibrate(d: &Dataset, input: &ScoreVector, strategy: StrategyKind) -> Result<CalibrationResult> {
    match strategy {
        StrategyKind::SimpleAveraging => calibrate_simple_average(d, input),
        StrategyKind::Greedy => calibrate_greedy(d, input),
        StrategyKind::MultiOwner => calibrate_multi_owner(d, input),
    }
}

#[derive(Default)]
struct Accumulator {
    sums: BTreeMap<PaperId, (f64, usize)>,
    contributors: BTreeMap<PaperId, Vec<AuthorId>>,
}

impl Accumulator {
    fn add(&mut self, author: &AuthorId, fit: Vec<(PaperId, f64)>) {
        for (id, v) in fit {
            let e = self.sums.entry(id.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
            self.contributors.entry(id).or_default().push(author.clone());
        }
    }

    fn finish(self, input: &ScoreVector, strategy: StrategyKind) -> CalibrationResult {
        let mut scores = input.clone();
        for (id, (sum, n)) in self.sums {
            scores.insert(id, sum / n as f64);
        }
        CalibrationResult {
            scores,
            contributors: self.contributors,
            strategy,
        }
    }
}

/// Every ranking author is projected separately; a paper's score is the plain
/// mean of its per-author fitted values.
pub fn calibrate_simple_average(d: &Dataset, input: &ScoreVector) -> Result<CalibrationResult> {
    let mut acc = Accumulator::default();
    for (author, ranking) in effective_rankings(d, input) {
        if ranking.len() >= 2 {
            acc.add(&author, fit_ranking(input, &ranking)?);
        }
    }
    Ok(acc.finish(input, StrategyKind::SimpleAveraging))
}

/// Index of the author with the most still-unassigned ranked papers; ties go
/// to the smaller author id (`remaining` is sorted by id). `None` when every
/// remaining author's papers are assigned.
fn longest_ranker(remaining: &[(AuthorId, Ranking)], assigned: &BTreeSet<PaperId>) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for (i, (_, r)) in remaining.iter().enumerate() {
        let count = r.ids().filter(|p| !assigned.contains(*p)).count();
        if count > 0 && best.is_none_or(|(c, _)| count > c) {
            best = Some((count, i));
        }
    }
    best.map(|(_, i)| i)
}

fn unassigned(ranking: &Ranking, assigned: &BTreeSet<PaperId>) -> BTreeSet<PaperId> {
    ranking.ids().filter(|p| !assigned.contains(*p)).cloned().collect()
}

/// Longest ranking first; its papers are fixed and removed before the next
/// author is considered, so each paper is scored by exactly one author.
pub fn calibrate_greedy(d: &Dataset, input: &ScoreVector) -> Result<CalibrationResult> {
    let mut remaining = effective_rankings(d, input);
    let mut assigned = BTreeSet::new();
    let mut acc = Accumulator::default();
    while let Some(i) = longest_ranker(&remaining, &assigned) {
        let (author, ranking) = remaining.remove(i);
        let keep = unassigned(&ranking, &assigned);
        let sub = ranking.restrict(&keep);
        if sub.len() >= 2 {
            acc.add(&author, fit_ranking(input, &sub)?);
        }
        assigned.extend(keep);
    }
    Ok(acc.finish(input, StrategyKind::Greedy))
}

/// Disjoint blocks formed longest-ranker-first. Inside a block every author
/// ranking at least two of its papers contributes a projection of their
/// restricted ranking, and the block's scores average those fits.
pub fn calibrate_multi_owner(d: &Dataset, input: &ScoreVector) -> Result<CalibrationResult> {
    let mut remaining = effective_rankings(d, input);
    let mut assigned = BTreeSet::new();
    let mut acc = Accumulator::default();
    while let Some(i) = longest_ranker(&remaining, &assigned) {
        let block = unassigned(&remaining[i].1, &assigned);
        for (author, ranking) in &remaining {
            let sub = ranking.restrict(&block);
            if sub.len() >= 2 {
                acc.add(author, fit_ranking(input, &sub)?);
            }
        }
        remaining.remove(i);
        assigned.extend(block);
    }
    Ok(acc.finish(input, StrategyKind::MultiOwner))
}
