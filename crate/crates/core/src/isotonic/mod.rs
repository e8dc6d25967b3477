//! Order-constrained L2 projection of review scores onto an author's ranking.
//!
//! A ranking of tie-groups `G_1 ≻ G_2 ≻ … ≻ G_m` constrains every member of an
//! earlier group to score at least as high as every member of a later group.
//! Members of the same group are mutually unconstrained. The projection is
//! computed by ordering each group's members by descending input score and
//! running pool-adjacent-violators on the resulting chain; this is exact for
//! weak orders and is checked against exhaustive search in [`oracle`].

pub mod oracle;

use std::collections::btree_map;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::{self, StrategyKind};
use crate::error::{Error, Result};
use crate::model::{Dataset, PaperId, Ranking};

pub use oracle::{brute_force_project, brute_force_project_by_orderings};

/// Per-paper real scores, kept sorted by paper id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ScoreVector(BTreeMap<PaperId, f64>);

impl ScoreVector {
    pub fn new() -> Self {
        ScoreVector(BTreeMap::new())
    }

    pub fn get(&self, id: &PaperId) -> Option<f64> {
        self.0.get(id).copied()
    }

    pub fn insert(&mut self, id: PaperId, value: f64) -> Option<f64> {
        self.0.insert(id, value)
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.0.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &PaperId> {
        self.0.keys()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.0.values().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PaperId, f64)> {
        self.0.iter().map(|(k, v)| (k, *v))
    }

    pub fn as_map(&self) -> &BTreeMap<PaperId, f64> {
        &self.0
    }

    /// Keeps only the papers for which `keep` returns true.
    pub fn filtered(&self, mut keep: impl FnMut(&PaperId) -> bool) -> ScoreVector {
        ScoreVector(
            self.0
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.clone(), *v))
                .collect(),
        )
    }
}

impl FromIterator<(PaperId, f64)> for ScoreVector {
    fn from_iter<T: IntoIterator<Item = (PaperId, f64)>>(iter: T) -> Self {
        ScoreVector(iter.into_iter().collect())
    }
}

impl<'a> IntoIterator for &'a ScoreVector {
    type Item = (&'a PaperId, &'a f64);
    type IntoIter = btree_map::Iter<'a, PaperId, f64>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// Projected scores plus the squared L2 distance to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicFit {
    pub scores: ScoreVector,
    pub objective: f64,
}

#[derive(Clone, Copy)]
struct Block {
    sum: f64,
    weight: f64,
    len: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.sum / self.weight
    }
}

/// Weighted pool-adjacent-violators for the non-increasing chain
/// `v_1 ≥ v_2 ≥ … ≥ v_n`.
///
/// Pooled blocks take the weighted mean of their members.
pub fn pava(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    if values.len() != weights.len() {
        return Err(Error::LengthMismatch(values.len(), weights.len()));
    }
    for (i, (&v, &w)) in values.iter().zip(weights).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFinite(i));
        }
        if !(w > 0.0 && w.is_finite()) {
            return Err(Error::NonPositiveWeight(i));
        }
    }

    let mut blocks: Vec<Block> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push(Block {
            sum: v * w,
            weight: w,
            len: 1,
        });
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.mean() >= last.mean() {
                break;
            }
            blocks.pop();
            let merged = blocks.last_mut().unwrap();
            merged.sum += last.sum;
            merged.weight += last.weight;
            merged.len += last.len;
        }
    }

    let mut out = Vec::with_capacity(values.len());
    for b in &blocks {
        let m = b.mean();
        out.extend(std::iter::repeat_n(m, b.len));
    }
    Ok(out)
}

/// Chain order used for the projection: groups best-first, members within a
/// group by descending score then ascending id.
fn chain_order(scores: &ScoreVector, ranking: &Ranking) -> Result<Vec<(PaperId, f64)>> {
    let mut chain = Vec::with_capacity(ranking.len());
    for group in &ranking.groups {
        let mut members = Vec::with_capacity(group.len());
        for id in group {
            let y = scores.get(id).ok_or_else(|| Error::MissingScore(id.clone()))?;
            if !y.is_finite() {
                return Err(Error::NonFinite(chain.len() + members.len()));
            }
            members.push((id.clone(), y));
        }
        members.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        chain.extend(members);
    }
    Ok(chain)
}

/// Projects `scores` onto the cone induced by `ranking`.
///
/// Papers not named in the ranking pass through unchanged.
pub fn project_isotonic(scores: &ScoreVector, ranking: &Ranking) -> Result<IsotonicFit> {
    let chain = chain_order(scores, ranking)?;
    let mut fitted = scores.clone();
    if chain.is_empty() {
        return Ok(IsotonicFit {
            scores: fitted,
            objective: 0.0,
        });
    }
    let values: Vec<f64> = chain.iter().map(|(_, y)| *y).collect();
    let weights = vec![1.0; values.len()];
    let projected = pava(&values, &weights)?;
    let mut objective = 0.0;
    for ((id, y), r) in chain.into_iter().zip(projected) {
        objective += (y - r) * (y - r);
        fitted.insert(id, r);
    }
    Ok(IsotonicFit {
        scores: fitted,
        objective,
    })
}

/// Isotonic residuals and the papers left out for lack of reviews.
#[derive(Debug, Clone, PartialEq)]
pub struct Residuals {
    pub values: Vec<(PaperId, f64)>,
    pub excluded: Vec<PaperId>,
}

/// Isotonic score minus mean review score, per paper.
///
/// The mechanism runs on the mean of all review scores with the given
/// multi-author strategy. Papers without reviews are excluded and listed.
pub fn isotonic_residuals(d: &Dataset, strategy: StrategyKind) -> Result<Residuals> {
    let means = d.mean_scores();
    let excluded: Vec<PaperId> = d
        .papers
        .iter()
        .filter(|p| p.reviews.is_empty())
        .map(|p| p.id.clone())
        .collect();
    let calibrated = aggregation::calibrate(d, &means, strategy)?;
    let values = means
        .iter()
        .map(|(id, y)| {
            let iso = calibrated.scores.get(id).unwrap_or(y);
            (id.clone(), iso - y)
        })
        .collect();
    Ok(Residuals { values, excluded })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Author, Paper};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sv(pairs: &[(&str, f64)]) -> ScoreVector {
        pairs.iter().map(|(k, v)| (PaperId::new(*k), *v)).collect()
    }

    fn values_in(fit: &IsotonicFit, ids: &[&str]) -> Vec<f64> {
        ids.iter().map(|i| fit.scores.get(&PaperId::new(*i)).unwrap()).collect()
    }

    #[test]
    fn pava_pools_the_violating_pair() {
        assert_eq!(
            pava(&[8.0, 4.0, 7.0, 3.0], &[1.0; 4]).unwrap(),
            vec![8.0, 5.5, 5.5, 3.0]
        );
    }

    #[test]
    fn pava_keeps_monotone_input() {
        assert_eq!(pava(&[5.0, 4.0, 3.0], &[1.0; 3]).unwrap(), vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn pava_single_block_is_mean() {
        assert_eq!(pava(&[1.0, 2.0], &[1.0, 1.0]).unwrap(), vec![1.5, 1.5]);
    }

    #[test]
    fn pava_weighted_mean() {
        let out = pava(&[1.0, 4.0], &[3.0, 1.0]).unwrap();
        assert_abs_diff_eq!(out[0], 1.75, epsilon = 1e-15);
        assert_abs_diff_eq!(out[1], 1.75, epsilon = 1e-15);
    }

    #[test]
    fn pava_rejects_bad_input() {
        assert!(matches!(pava(&[], &[]), Err(Error::EmptyInput)));
        assert!(matches!(pava(&[1.0], &[0.0]), Err(Error::NonPositiveWeight(0))));
        assert!(matches!(
            pava(&[1.0, 2.0], &[1.0, -1.0]),
            Err(Error::NonPositiveWeight(1))
        ));
        assert!(matches!(pava(&[1.0, f64::NAN], &[1.0, 1.0]), Err(Error::NonFinite(1))));
        assert!(matches!(pava(&[1.0], &[1.0, 1.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn worked_example() {
        let y = sv(&[("p1", 8.0), ("p2", 7.0), ("p3", 4.0), ("p4", 3.0)]);
        let ranking = Ranking::strict(["p1", "p3", "p2", "p4"]);
        let fit = project_isotonic(&y, &ranking).unwrap();
        assert_eq!(values_in(&fit, &["p1", "p2", "p3", "p4"]), vec![8.0, 5.5, 5.5, 3.0]);
        assert_abs_diff_eq!(fit.objective, 4.5, epsilon = 1e-12);
    }

    #[test]
    fn tie_group_is_unconstrained_inside() {
        let y = sv(&[("a", 3.0), ("b", 5.0)]);
        let fit = project_isotonic(&y, &"a = b".parse().unwrap()).unwrap();
        assert_eq!(values_in(&fit, &["a", "b"]), vec![3.0, 5.0]);
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn tie_groups_pool_across() {
        let y = sv(&[("a", 10.0), ("b", 0.0), ("c", 5.0), ("d", 5.0)]);
        let fit = project_isotonic(&y, &"a = b > c = d".parse().unwrap()).unwrap();
        let got = values_in(&fit, &["a", "b", "c", "d"]);
        let third = 10.0 / 3.0;
        for (g, e) in got.iter().zip([10.0, third, third, third]) {
            assert_abs_diff_eq!(*g, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn unranked_papers_pass_through() {
        let y = sv(&[("a", 1.0), ("b", 2.0), ("z", 9.5)]);
        let fit = project_isotonic(&y, &Ranking::strict(["a", "b"])).unwrap();
        assert_eq!(fit.scores.get(&"z".into()), Some(9.5));
        assert_eq!(values_in(&fit, &["a", "b"]), vec![1.5, 1.5]);
    }

    #[test]
    fn missing_score_names_the_paper() {
        let y = sv(&[("a", 1.0)]);
        let err = project_isotonic(&y, &Ranking::strict(["a", "ghost"])).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn length_one_ranking_is_identity() {
        let y = sv(&[("a", 6.5)]);
        let fit = project_isotonic(&y, &Ranking::strict(["a"])).unwrap();
        assert_eq!(fit.scores, y);
    }

    fn single_author(scores: &[(&str, i32)], ranking: &str) -> Dataset {
        Dataset {
            papers: scores.iter().map(|(id, s)| Paper::new(*id, &[*s])).collect(),
            authors: vec![Author::with_ranking("a1", ranking.parse().unwrap())],
            authorship: scores.iter().map(|(id, _)| ("a1".into(), PaperId::new(*id))).collect(),
        }
    }

    #[test]
    fn residuals_of_worked_example() {
        let d = single_author(&[("p1", 8), ("p2", 7), ("p3", 4), ("p4", 3)], "p1 > p3 > p2 > p4");
        let r = isotonic_residuals(&d, StrategyKind::SimpleAveraging).unwrap();
        let vals: Vec<f64> = r.values.iter().map(|(_, v)| *v).collect();
        assert_eq!(vals, vec![0.0, -1.5, 1.5, 0.0]);
        assert!(r.excluded.is_empty());
    }

    #[test]
    fn residuals_zero_when_ranking_agrees() {
        let d = single_author(&[("p1", 8), ("p2", 7), ("p3", 4)], "p1 > p2 > p3");
        let r = isotonic_residuals(&d, StrategyKind::Greedy).unwrap();
        assert!(r.values.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn residuals_exclude_unreviewed_papers() {
        let mut d = single_author(&[("p1", 3), ("p2", 7), ("p3", 4)], "p1 > p2 > p3");
        d.papers[2].reviews.clear();
        let r = isotonic_residuals(&d, StrategyKind::SimpleAveraging).unwrap();
        assert_eq!(r.excluded, vec![PaperId::new("p3")]);
        assert_eq!(r.values.len(), 2);
        let sum: f64 = r.values.iter().map(|(_, v)| v).sum();
        assert_abs_diff_eq!(sum, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn residuals_match_oracle_on_random_triples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let scores: Vec<(&str, i32)> = ["x", "y", "z"]
                .iter()
                .map(|&id| (id, rng.random_range(1..=10)))
                .collect();
            let d = single_author(&scores, "z > x > y");
            let r = isotonic_residuals(&d, StrategyKind::SimpleAveraging).unwrap();
            let means = d.mean_scores();
            let oracle = brute_force_project(&means, &"z > x > y".parse().unwrap()).unwrap();
            for (id, res) in &r.values {
                let expect = oracle.scores.get(id).unwrap() - means.get(id).unwrap();
                assert_abs_diff_eq!(*res, expect, epsilon = 1e-9);
            }
        }
    }

    /// Random tie structure over ids `q0..q{n-1}` with scores on [0, 10].
    fn instance() -> impl Strategy<Value = (ScoreVector, Ranking)> {
        (1usize..=8)
            .prop_flat_map(|n| {
                (
                    prop::collection::vec(0.0f64..=10.0, n),
                    prop::collection::vec(any::<bool>(), n),
                    Just(n),
                )
            })
            .prop_map(|(ys, cuts, n)| {
                let scores: ScoreVector = (0..n).map(|i| (PaperId::new(format!("q{i}")), ys[i])).collect();
                let mut groups: Vec<Vec<PaperId>> = vec![vec![]];
                for (i, &cut) in cuts.iter().enumerate() {
                    if cut && !groups.last().unwrap().is_empty() {
                        groups.push(vec![]);
                    }
                    groups.last_mut().unwrap().push(PaperId::new(format!("q{i}")));
                }
                (scores, Ranking::new(groups))
            })
    }

    fn feasible(fit: &ScoreVector, ranking: &Ranking) -> bool {
        ranking.groups.windows(2).all(|w| {
            let lo = w[0].iter().map(|p| fit.get(p).unwrap()).fold(f64::INFINITY, f64::min);
            let hi = w[1]
                .iter()
                .map(|p| fit.get(p).unwrap())
                .fold(f64::NEG_INFINITY, f64::max);
            lo >= hi - 1e-12
        })
    }

    proptest! {
        #[test]
        fn prop_matches_oracle((y, r) in instance()) {
            let fast = project_isotonic(&y, &r).unwrap();
            let slow = brute_force_project(&y, &r).unwrap();
            for (id, v) in fast.scores.iter() {
                prop_assert!((v - slow.scores.get(id).unwrap()).abs() <= 1e-9);
            }
            prop_assert!((fast.objective - slow.objective).abs() <= 1e-9);
        }

        #[test]
        fn prop_feasible_and_objective_consistent((y, r) in instance()) {
            let fit = project_isotonic(&y, &r).unwrap();
            prop_assert!(feasible(&fit.scores, &r));
            let obj: f64 = y.iter().map(|(id, v)| (v - fit.scores.get(id).unwrap()).powi(2)).sum();
            prop_assert!((obj - fit.objective).abs() <= 1e-12);
        }

        #[test]
        fn prop_idempotent((y, r) in instance()) {
            let once = project_isotonic(&y, &r).unwrap();
            let twice = project_isotonic(&once.scores, &r).unwrap();
            for (id, v) in once.scores.iter() {
                prop_assert!((v - twice.scores.get(id).unwrap()).abs() <= 1e-12);
            }
        }

        #[test]
        fn prop_sum_preserved((y, r) in instance()) {
            let fit = project_isotonic(&y, &r).unwrap();
            let a: f64 = y.values().sum();
            let b: f64 = fit.scores.values().sum();
            prop_assert!((a - b).abs() <= 1e-9);
        }

        #[test]
        fn prop_translation_equivariant((y, r) in instance(), c in -5.0f64..5.0) {
            let shifted: ScoreVector = y.iter().map(|(k, v)| (k.clone(), v + c)).collect();
            let a = project_isotonic(&y, &r).unwrap();
            let b = project_isotonic(&shifted, &r).unwrap();
            for (id, v) in a.scores.iter() {
                prop_assert!((v + c - b.scores.get(id).unwrap()).abs() <= 1e-9);
            }
        }

        #[test]
        fn prop_stays_in_input_range((y, r) in instance()) {
            let fit = project_isotonic(&y, &r).unwrap();
            let lo = y.values().fold(f64::INFINITY, f64::min);
            let hi = y.values().fold(f64::NEG_INFINITY, f64::max);
            for v in fit.scores.values() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn prop_monotone_input_is_fixed_point(mut ys in prop::collection::vec(0.0f64..=10.0, 1..10)) {
            ys.sort_by(|a, b| b.total_cmp(a));
            let y: ScoreVector = ys.iter().enumerate().map(|(i, v)| (PaperId::new(format!("m{i}")), *v)).collect();
            let r = Ranking::strict((0..ys.len()).map(|i| format!("m{i}")));
            let fit = project_isotonic(&y, &r).unwrap();
            prop_assert_eq!(fit.scores, y);
        }
    }
}
