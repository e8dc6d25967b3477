//! Decision support built on isotonic residuals: emergency-reviewer
//! allocation, prediction of surprising review outcomes, and statistics on
//! how author rankings line up with final decisions.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::Serialize;

use crate::aggregation::{participating_papers, StrategyKind};
use crate::error::{Error, Result};
use crate::evaluation::stats::chi_square_2xk;
use crate::isotonic::isotonic_residuals;
use crate::model::{Dataset, Decision, PaperId};

/// Quantile of each residual's magnitude: average rank of `|r|` (1 = smallest)
/// divided by `n`.
pub fn residual_quantiles(residuals: &[(PaperId, f64)]) -> Result<Vec<(PaperId, f64)>> {
    if residuals.is_empty() {
        return Err(Error::EmptyInput);
    }
    if let Some(i) = residuals.iter().position(|(_, r)| !r.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let n = residuals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| residuals[a].1.abs().total_cmp(&residuals[b].1.abs()));
    let mut q = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mag = residuals[order[i]].1.abs();
        let mut j = i + 1;
        while j < n && residuals[order[j]].1.abs() == mag {
            j += 1;
        }
        // positions i..j share ranks i+1..=j
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            q[k] = avg_rank / n as f64;
        }
        i = j;
    }
    Ok(residuals.iter().zip(q).map(|((id, _), q)| (id.clone(), q)).collect())
}

pub const INITIAL_REVIEWERS_PARTICIPATING: u32 = 3;
pub const INITIAL_REVIEWERS_OTHER: u32 = 4;

/// Two emergency reviewers above the 70th percentile, one above the 30th.
pub fn emergency_count(quantile: f64) -> u32 {
    if quantile > 0.7 {
        2
    } else if quantile > 0.3 {
        1
    } else {
        0
    }
}

/// One row of an [`EmergencyPlan`]. The residual itself, and so its sign, is
/// not part of the plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanRow {
    pub paper: PaperId,
    pub participating: bool,
    pub initial: u32,
    pub emergency: u32,
    pub quantile: Option<f64>,
}

impl PlanRow {
    pub fn total(&self) -> u32 {
        self.initial + self.emergency
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmergencyPlan {
    pub strategy: StrategyKind,
    pub rows: Vec<PlanRow>,
}

impl EmergencyPlan {
    pub const CSV_HEADER: &'static str = "paper_id,participating,initial,emergency,quantile";

    /// CSV with the header above; quantiles use 17 significant digits and are
    /// empty for non-participating papers.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let q = r.quantile.map(|q| format!("{q:.16e}")).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.paper, r.participating, r.initial, r.emergency, q
            );
        }
        out
    }
}

/// Reviewer allocation for every paper with reviews.
///
/// Participating papers (ranked alongside another paper by some author) start
/// with three reviewers and get zero to two more by the magnitude quantile of
/// their residual among participating papers; the rest get four.
pub fn emergency_plan(d: &Dataset, strategy: StrategyKind) -> Result<EmergencyPlan> {
    let residuals = isotonic_residuals(d, strategy)?;
    let participating = participating_papers(d, &d.mean_scores());
    let subset: Vec<(PaperId, f64)> = residuals
        .values
        .iter()
        .filter(|(id, _)| participating.contains(id))
        .cloned()
        .collect();
    let quantiles: BTreeMap<PaperId, f64> = if subset.is_empty() {
        BTreeMap::new()
    } else {
        residual_quantiles(&subset)?.into_iter().collect()
    };
    let rows = residuals
        .values
        .iter()
        .map(|(id, _)| match quantiles.get(id) {
            Some(&q) => PlanRow {
                paper: id.clone(),
                participating: true,
                initial: INITIAL_REVIEWERS_PARTICIPATING,
                emergency: emergency_count(q),
                quantile: Some(q),
            },
            None => PlanRow {
                paper: id.clone(),
                participating: false,
                initial: INITIAL_REVIEWERS_OTHER,
                emergency: 0,
                quantile: None,
            },
        })
        .collect();
    Ok(EmergencyPlan { strategy, rows })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Indicator {
    /// Largest isotonic-residual magnitude.
    Residual,
    /// Largest review-score variance.
    Variance,
    /// Lowest mean reviewer confidence.
    Confidence,
}

impl Indicator {
    pub const ALL: [Indicator; 3] = [Indicator::Residual, Indicator::Variance, Indicator::Confidence];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PredictionOutcome {
    pub evaluated: usize,
    pub correct: usize,
    pub accuracy: f64,
}

/// For each author with a flagged paper and at least two reviewed papers,
/// predicts the flagged one by `indicator` and reports the hit rate.
///
/// An author's first flagged paper (by id) is the label. Ties on the
/// indicator go to the smallest paper id.
pub fn unexpected_outcome_predictor(
    d: &Dataset,
    flagged: &BTreeSet<PaperId>,
    indicator: Indicator,
    strategy: StrategyKind,
) -> Result<PredictionOutcome> {
    let papers = d.paper_map();
    let residual: BTreeMap<PaperId, f64> = match indicator {
        Indicator::Residual => isotonic_residuals(d, strategy)?.values.into_iter().collect(),
        _ => BTreeMap::new(),
    };
    // larger is more suspicious
    let signal = |id: &PaperId| -> Option<f64> {
        let p = papers.get(id)?;
        match indicator {
            Indicator::Residual => residual.get(id).map(|r| r.abs()),
            Indicator::Variance => Some(p.score_variance()),
            Indicator::Confidence => p.mean_confidence().map(|c| -c),
        }
    };

    let (mut evaluated, mut correct) = (0, 0);
    for owned in d.papers_by_author().values() {
        let mut owned: Vec<&PaperId> = owned
            .iter()
            .filter(|id| papers.get(id).is_some_and(|p| !p.reviews.is_empty()))
            .collect();
        owned.sort();
        if owned.len() < 2 {
            continue;
        }
        let Some(label) = owned.iter().find(|id| flagged.contains(**id)) else {
            continue;
        };
        let mut best: Option<(&PaperId, f64)> = None;
        for id in &owned {
            if let Some(s) = signal(id) {
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((id, s));
                }
            }
        }
        evaluated += 1;
        if best.is_some_and(|(id, _)| id == *label) {
            correct += 1;
        }
    }
    if evaluated == 0 {
        return Err(Error::Degenerate(
            "no author with a flagged paper and two reviewed papers".into(),
        ));
    }
    Ok(PredictionOutcome {
        evaluated,
        correct,
        accuracy: correct as f64 / evaluated as f64,
    })
}

/// Decision columns of the highest/lowest table; awards count as orals.
pub const OUTCOME_COLUMNS: [Decision; 4] = [
    Decision::Withdrawn,
    Decision::Rejected,
    Decision::Poster,
    Decision::Oral,
];

fn column(d: Decision) -> usize {
    match d {
        Decision::Withdrawn => 0,
        Decision::Rejected => 1,
        Decision::Poster => 2,
        Decision::Oral | Decision::Award => 3,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankPositionTable {
    pub highest_counts: [usize; 4],
    pub lowest_counts: [usize; 4],
    pub highest_pct: [f64; 4],
    pub lowest_pct: [f64; 4],
    /// Per column: chi-square p-value of {column, other} × {highest, lowest};
    /// absent when a margin is zero.
    pub p_values: [Option<f64>; 4],
    /// Share of the designated papers ranked first by at least one author,
    /// among those that appear in a ranking of two or more papers.
    pub first_ranked_share: Option<f64>,
}

fn percentages(counts: &[usize; 4]) -> [f64; 4] {
    let total: usize = counts.iter().sum();
    counts.map(|c| {
        if total == 0 {
            0.0
        } else {
            100.0 * c as f64 / total as f64
        }
    })
}

/// Decision shares of top-ranked versus bottom-ranked papers.
///
/// A paper is highest-ranked if it sits in the first tie-group of some
/// ranking with at least two groups, lowest-ranked if in the last group.
/// Papers without a decision are ignored.
pub fn rank_position_stats(d: &Dataset, designated: &BTreeSet<PaperId>) -> RankPositionTable {
    let mut highest: BTreeSet<&PaperId> = BTreeSet::new();
    let mut lowest: BTreeSet<&PaperId> = BTreeSet::new();
    let mut in_ranking: BTreeSet<&PaperId> = BTreeSet::new();
    for r in d.authors.iter().filter_map(|a| a.ranking.as_ref()) {
        if r.len() >= 2 {
            in_ranking.extend(r.ids());
        }
        if r.groups.len() >= 2 {
            highest.extend(r.groups.first().unwrap());
            lowest.extend(r.groups.last().unwrap());
        }
    }
    let papers = d.paper_map();
    let tally = |set: &BTreeSet<&PaperId>| {
        let mut c = [0usize; 4];
        for id in set {
            if let Some(dec) = papers.get(*id).and_then(|p| p.decision) {
                c[column(dec)] += 1;
            }
        }
        c
    };
    let (h, l) = (tally(&highest), tally(&lowest));
    let (ht, lt): (usize, usize) = (h.iter().sum(), l.iter().sum());
    let p_values = std::array::from_fn(|j| {
        chi_square_2xk(&[h[j] as f64, (ht - h[j]) as f64], &[l[j] as f64, (lt - l[j]) as f64])
            .ok()
            .map(|t| t.p_value)
    });

    let eligible: Vec<&PaperId> = designated.iter().filter(|id| in_ranking.contains(id)).collect();
    let first_ranked_share = if eligible.is_empty() {
        None
    } else {
        let firsts: BTreeSet<&PaperId> = d
            .authors
            .iter()
            .filter_map(|a| a.ranking.as_ref())
            .filter(|r| r.len() >= 2)
            .flat_map(|r| r.groups.first().into_iter().flatten())
            .collect();
        let hits = eligible.iter().filter(|id| firsts.contains(**id)).count();
        Some(hits as f64 / eligible.len() as f64)
    };

    RankPositionTable {
        highest_counts: h,
        lowest_counts: l,
        highest_pct: percentages(&h),
        lowest_pct: percentages(&l),
        p_values,
        first_ranked_share,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Author, Paper, Ranking, Review};
    use approx::assert_abs_diff_eq;

    fn ids(v: &[&str]) -> Vec<PaperId> {
        v.iter().map(|s| PaperId::new(*s)).collect()
    }

    #[test]
    fn distinct_residuals_give_permutation() {
        let r: Vec<(PaperId, f64)> = ids(&["a", "b", "c", "d"])
            .into_iter()
            .zip([0.3, -2.0, 0.0, 1.0])
            .collect();
        let q: Vec<f64> = residual_quantiles(&r).unwrap().into_iter().map(|(_, q)| q).collect();
        assert_eq!(q, vec![0.5, 1.0, 0.25, 0.75]);
    }

    #[test]
    fn equal_residuals_share_the_mean_rank() {
        let r: Vec<(PaperId, f64)> = ids(&["a", "b", "c", "d", "e"])
            .into_iter()
            .map(|id| (id, -0.4))
            .collect();
        for (_, q) in residual_quantiles(&r).unwrap() {
            assert_abs_diff_eq!(q, 6.0 / 10.0, epsilon = 1e-15);
        }
        let mixed: Vec<(PaperId, f64)> = ids(&["a", "b", "c"]).into_iter().zip([0.5, -0.5, 0.1]).collect();
        let q: Vec<f64> = residual_quantiles(&mixed)
            .unwrap()
            .into_iter()
            .map(|(_, q)| q)
            .collect();
        assert_eq!(q, vec![2.5 / 3.0, 2.5 / 3.0, 1.0 / 3.0]);
        assert!(residual_quantiles(&[]).is_err());
    }

    #[test]
    fn ten_value_fixture_by_hand() {
        let vals = [0.9, -0.1, 0.45, -1.7, 0.0, 0.3, -0.3, 2.2, -0.05, 0.6];
        // |r| sorted: 0.0 .05 .1 (.3 .3) .45 .6 .9 1.7 2.2
        let ranks = [8.0, 3.0, 6.0, 9.0, 1.0, 4.5, 4.5, 10.0, 2.0, 7.0];
        let r: Vec<(PaperId, f64)> = (0..10).map(|i| (PaperId::new(format!("p{i}")), vals[i])).collect();
        for ((_, q), rank) in residual_quantiles(&r).unwrap().into_iter().zip(ranks) {
            assert_abs_diff_eq!(q, rank / 10.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn boundaries_of_the_allocation_rule() {
        assert_eq!(emergency_count(1.0), 2);
        assert_eq!(emergency_count(0.71), 2);
        assert_eq!(emergency_count(0.7), 1);
        assert_eq!(emergency_count(0.31), 1);
        assert_eq!(emergency_count(0.3), 0);
        assert_eq!(emergency_count(0.0), 0);
    }

    fn ranked_fixture(n: usize) -> Dataset {
        // one author ranks all papers in the reverse of their score order,
        // so every residual differs
        let papers: Vec<Paper> = (0..n)
            .map(|i| {
                let mut p = Paper::new(format!("p{i:02}"), &[]);
                p.reviews = vec![Review::new(1 + (i % 10) as i32), Review::new(1 + ((i * 7) % 10) as i32)];
                p
            })
            .collect();
        let ranking = Ranking::strict((0..n).map(|i| format!("p{i:02}")));
        let authorship = (0..n).map(|i| ("a".into(), PaperId::new(format!("p{i:02}")))).collect();
        Dataset {
            papers,
            authors: vec![Author::with_ranking("a", ranking)],
            authorship,
        }
    }

    #[test]
    fn plan_without_rankings() {
        let mut d = ranked_fixture(6);
        d.authors[0].ranking = None;
        let plan = emergency_plan(&d, StrategyKind::SimpleAveraging).unwrap();
        assert!(plan
            .rows
            .iter()
            .all(|r| !r.participating && r.initial == 4 && r.emergency == 0 && r.quantile.is_none()));
    }

    #[test]
    fn plan_csv_has_no_signed_residuals() {
        let d = ranked_fixture(8);
        let plan = emergency_plan(&d, StrategyKind::SimpleAveraging).unwrap();
        let csv = plan.to_csv();
        assert!(csv.starts_with("paper_id,participating,initial,emergency,quantile\n"));
        assert!(!csv.contains("residual"));
        assert_eq!(csv.lines().count(), 9);
        for line in csv.lines().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 5);
            let q: f64 = fields[4].parse().unwrap();
            assert!((0.0..=1.0).contains(&q));
        }
        assert!(plan.rows.iter().all(|r| r.participating && r.initial == 3));
    }

    #[test]
    fn flagged_paper_with_only_nonzero_residual() {
        // p1 is ranked above p0 but scored lower: both pool, p2 is untouched
        let papers = vec![
            Paper::new("p0", &[8, 8]),
            Paper::new("p1", &[4, 4]),
            Paper::new("p2", &[2, 2]),
        ];
        let d = Dataset {
            papers,
            authors: vec![Author::with_ranking("a", Ranking::strict(["p1", "p0"]))],
            authorship: vec![
                ("a".into(), "p0".into()),
                ("a".into(), "p1".into()),
                ("a".into(), "p2".into()),
            ],
        };
        let flagged: BTreeSet<PaperId> = ["p1".into()].into();
        let out =
            unexpected_outcome_predictor(&d, &flagged, Indicator::Residual, StrategyKind::SimpleAveraging).unwrap();
        // p0 and p1 tie on |residual| = 2; the smaller id wins
        assert_eq!((out.evaluated, out.correct), (1, 0));
        let flagged: BTreeSet<PaperId> = ["p0".into()].into();
        let out =
            unexpected_outcome_predictor(&d, &flagged, Indicator::Residual, StrategyKind::SimpleAveraging).unwrap();
        assert_eq!(out.accuracy, 1.0);
    }

    #[test]
    fn confidence_and_variance_indicators() {
        let mut a = Paper::new("p0", &[]);
        a.reviews = vec![Review::with_confidence(5, 4), Review::with_confidence(5, 5)];
        let mut b = Paper::new("p1", &[]);
        b.reviews = vec![Review::with_confidence(2, 2), Review::with_confidence(9, 3)];
        let d = Dataset {
            papers: vec![a, b],
            authors: vec![Author::new("x")],
            authorship: vec![("x".into(), "p0".into()), ("x".into(), "p1".into())],
        };
        let flagged: BTreeSet<PaperId> = ["p1".into()].into();
        for ind in [Indicator::Variance, Indicator::Confidence] {
            let out = unexpected_outcome_predictor(&d, &flagged, ind, StrategyKind::Greedy).unwrap();
            assert_eq!(out.accuracy, 1.0, "{ind:?}");
        }
        // no rankings: every residual is zero, so the tie-break picks p0
        let out = unexpected_outcome_predictor(&d, &flagged, Indicator::Residual, StrategyKind::Greedy).unwrap();
        assert_eq!(out.accuracy, 0.0);
        assert!(unexpected_outcome_predictor(&d, &BTreeSet::new(), Indicator::Variance, StrategyKind::Greedy).is_err());
    }

    fn decided(id: &str, dec: Decision) -> Paper {
        let mut p = Paper::new(id, &[5]);
        p.decision = Some(dec);
        p
    }

    #[test]
    fn top_accepted_bottom_rejected() {
        let papers = vec![
            decided("h1", Decision::Oral),
            decided("l1", Decision::Rejected),
            decided("h2", Decision::Award),
            decided("l2", Decision::Rejected),
        ];
        let authors = vec![
            Author::with_ranking("a", Ranking::strict(["h1", "l1"])),
            Author::with_ranking("b", Ranking::strict(["h2", "l2"])),
        ];
        let d = Dataset {
            papers,
            authors,
            authorship: vec![],
        };
        let t = rank_position_stats(&d, &["h1".into(), "h2".into()].into());
        assert_eq!(t.highest_pct, [0.0, 0.0, 0.0, 100.0]);
        assert_eq!(t.lowest_pct, [0.0, 100.0, 0.0, 0.0]);
        assert_eq!(t.first_ranked_share, Some(1.0));
        assert!(t.p_values[0].is_none());
        assert!(t.p_values[3].is_some());
    }

    #[test]
    fn hand_tallied_table() {
        let mut papers = Vec::new();
        let mut authors = Vec::new();
        let top = [
            Decision::Poster,
            Decision::Poster,
            Decision::Oral,
            Decision::Rejected,
            Decision::Withdrawn,
        ];
        let bottom = [
            Decision::Rejected,
            Decision::Rejected,
            Decision::Poster,
            Decision::Rejected,
            Decision::Withdrawn,
        ];
        for i in 0..5 {
            papers.push(decided(&format!("t{i}"), top[i]));
            papers.push(decided(&format!("m{i}"), Decision::Poster));
            papers.push(decided(&format!("b{i}"), bottom[i]));
            let r: Ranking = format!("t{i} > m{i} > b{i}").parse().unwrap();
            authors.push(Author::with_ranking(format!("a{i}"), r));
        }
        let d = Dataset {
            papers,
            authors,
            authorship: vec![],
        };
        let t = rank_position_stats(&d, &["t0".into(), "m0".into(), "zz".into()].into());
        assert_eq!(t.highest_counts, [1, 1, 2, 1]);
        assert_eq!(t.lowest_counts, [1, 3, 1, 0]);
        assert_eq!(t.highest_pct, [20.0, 20.0, 40.0, 20.0]);
        for row in [t.highest_pct, t.lowest_pct] {
            assert_abs_diff_eq!(row.iter().sum::<f64>(), 100.0, epsilon = 1e-9);
        }
        assert_eq!(t.first_ranked_share, Some(0.5));
        // rejected column: (1, 4) vs (3, 2)
        let direct = chi_square_2xk(&[1.0, 4.0], &[3.0, 2.0]).unwrap().p_value;
        assert_eq!(t.p_values[1], Some(direct));
    }
}
