use std::collections::BTreeSet;

use isocal::evaluation::{evaluate_strategies, top_k_overlap, HoldoutMode, Population};
use isocal::isotonic::isotonic_residuals;
use isocal::model::validate_dataset;
use isocal::policy::{emergency_plan, rank_position_stats};
use isocal::synthetic::{generate_dataset, sample_plackett_luce, AuthorGraphConfig, ExperimentKind, SyntheticConfig};
use isocal::{calibrate, Author, AuthorId, Dataset, Decision, Paper, PaperId, Ranking, ScoreVector, StrategyKind};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random venue: every author ranks a random subset of papers, with ties.
fn venue(seed: u64, n_papers: usize, n_authors: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decisions = [
        Decision::Rejected,
        Decision::Poster,
        Decision::Oral,
        Decision::Award,
        Decision::Withdrawn,
    ];
    let papers: Vec<Paper> = (0..n_papers)
        .map(|i| {
            let k = rng.random_range(1..=4);
            let scores: Vec<i32> = (0..k).map(|_| rng.random_range(1..=10)).collect();
            let mut p = Paper::new(format!("p{i:02}"), &scores);
            p.decision = Some(decisions[rng.random_range(0..decisions.len())]);
            p
        })
        .collect();
    let mut authors = Vec::new();
    let mut authorship = Vec::new();
    for a in 0..n_authors {
        let id = format!("a{a:02}");
        let mut ids: Vec<usize> = (0..n_papers).collect();
        ids.shuffle(&mut rng);
        let k = rng.random_range(1..=n_papers.min(6));
        let mut groups: Vec<Vec<PaperId>> = Vec::new();
        for &i in &ids[..k] {
            let pid = PaperId::new(format!("p{i:02}"));
            authorship.push((AuthorId::new(id.clone()), pid.clone()));
            match groups.last_mut() {
                Some(g) if rng.random_bool(0.25) => g.push(pid),
                _ => groups.push(vec![pid]),
            }
        }
        let mut author = Author::with_ranking(id, Ranking::new(groups));
        if rng.random_bool(0.2) {
            author.ranking = None;
        }
        authors.push(author);
    }
    Dataset {
        papers,
        authors,
        authorship,
    }
}

fn shuffled(d: &Dataset, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = d.clone();
    out.papers.shuffle(&mut rng);
    out.authors.shuffle(&mut rng);
    out.authorship.shuffle(&mut rng);
    out
}

fn small_synthetic(kind: ExperimentKind, seed: u64) -> SyntheticConfig {
    let mut cfg = SyntheticConfig::for_experiment(kind, 1.0, seed);
    cfg.graph = AuthorGraphConfig::with_papers(150);
    cfg
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn venues_are_valid(seed in any::<u64>(), n in 2usize..12, m in 1usize..6) {
        prop_assert!(validate_dataset(&venue(seed, n, m)).is_empty());
    }

    #[test]
    fn storage_order_is_irrelevant(seed in any::<u64>(), n in 2usize..12, m in 1usize..6, perm in any::<u64>()) {
        let d = venue(seed, n, m);
        let e = shuffled(&d, perm);
        let (ys, ye) = (d.mean_scores(), e.mean_scores());
        for s in StrategyKind::ALL {
            let a = calibrate(&d, &ys, s).unwrap();
            let b = calibrate(&e, &ye, s).unwrap();
            prop_assert_eq!(a.scores, b.scores, "{}", s.as_str());
        }
    }

    #[test]
    fn single_author_residuals_sum_to_zero(seed in any::<u64>(), n in 2usize..12) {
        let d = venue(seed, n, 1);
        let r = isotonic_residuals(&d, StrategyKind::SimpleAveraging).unwrap();
        let total: f64 = r.values.iter().map(|(_, x)| x).sum();
        prop_assert!(total.abs() < 1e-9, "{total}");
    }

    #[test]
    fn calibration_is_deterministic(seed in any::<u64>(), n in 2usize..12, m in 1usize..6) {
        let d = venue(seed, n, m);
        let ys = d.mean_scores();
        for s in StrategyKind::ALL {
            prop_assert_eq!(calibrate(&d, &ys, s).unwrap(), calibrate(&d, &ys, s).unwrap());
        }
    }

    #[test]
    fn dataset_file_round_trip(seed in any::<u64>(), n in 2usize..12, m in 1usize..6) {
        let d = venue(seed, n, m);
        let back = Dataset::from_json(&d.to_json()).unwrap();
        prop_assert_eq!(&back, &d);
        prop_assert_eq!(validate_dataset(&back), validate_dataset(&d));
    }

    #[test]
    fn overlap_is_reflexive_and_symmetric(
        a in prop::collection::vec(0.0f64..10.0, 2..30),
        shift in prop::collection::vec(-3.0f64..3.0, 30),
        q in 0.01f64..1.0,
    ) {
        let sa: ScoreVector = a.iter().enumerate().map(|(i, &x)| (PaperId::new(format!("p{i:02}")), x)).collect();
        let sb: ScoreVector = a.iter().zip(&shift).enumerate()
            .map(|(i, (&x, &s))| (PaperId::new(format!("p{i:02}")), x + s)).collect();
        prop_assert_eq!(top_k_overlap(&sa, &sa, q).unwrap(), 1.0);
        prop_assert_eq!(top_k_overlap(&sa, &sb, q).unwrap(), top_k_overlap(&sb, &sa, q).unwrap());
    }

    #[test]
    fn plackett_luce_ignores_a_common_shift(
        w in prop::collection::vec(-4.0f64..4.0, 1..8),
        c in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let shifted: Vec<f64> = w.iter().map(|x| x + c).collect();
        let a = sample_plackett_luce(&w, &mut ChaCha8Rng::seed_from_u64(seed));
        let b = sample_plackett_luce(&shifted, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(a, b);
    }

    #[test]
    fn position_table_rows_are_percentages(seed in any::<u64>(), n in 4usize..12, m in 2usize..6) {
        let d = venue(seed, n, m);
        let designated: BTreeSet<PaperId> = d.papers.iter().take(2).map(|p| p.id.clone()).collect();
        let t = rank_position_stats(&d, &designated);
        for row in [t.highest_pct, t.lowest_pct] {
            let total: f64 = row.iter().sum();
            prop_assert!(total == 0.0 || (total - 100.0).abs() <= 0.01, "{row:?}");
        }
    }

    #[test]
    fn plan_has_no_signed_output(seed in any::<u64>(), n in 2usize..12, m in 1usize..6) {
        let d = venue(seed, n, m);
        let plan = emergency_plan(&d, StrategyKind::SimpleAveraging).unwrap();
        for row in &plan.rows {
            if let Some(q) = row.quantile {
                prop_assert!((0.0..=1.0).contains(&q));
            }
            prop_assert!(row.emergency <= 2);
        }
        prop_assert!(plan.to_csv().starts_with("paper_id,participating,initial,emergency,quantile\n"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn synthetic_scores_stay_on_the_scale(seed in any::<u64>(), k in 0usize..3) {
        let d = generate_dataset(&small_synthetic(ExperimentKind::ALL[k], seed)).unwrap();
        for p in &d.papers {
            let r = p.ground_truth.unwrap();
            prop_assert!((0.0..=10.0).contains(&r));
            prop_assert!(p.reviews.iter().all(|rv| (0..=10).contains(&rv.score)));
        }
        prop_assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn ordered_noiseless_reviews_are_fixed_points(seed in any::<u64>()) {
        let mut cfg = small_synthetic(ExperimentKind::BiasedReviewers, seed);
        cfg.reviewer_model = isocal::synthetic::ReviewerModel::Unbiased;
        cfg.noise_scale = 0.0;
        let d = generate_dataset(&cfg).unwrap();
        let ys = d.mean_scores();
        for s in StrategyKind::ALL {
            prop_assert_eq!(&calibrate(&d, &ys, s).unwrap().scores, &ys);
        }
    }
}

#[test]
fn evaluation_is_reproducible() {
    let d = generate_dataset(&small_synthetic(ExperimentKind::NoisyRanking, 3)).unwrap();
    let seeds = [4, 5, 6];
    let a = evaluate_strategies(&d, HoldoutMode::OneScore, &seeds, Population::Ranked).unwrap();
    let b = evaluate_strategies(&d, HoldoutMode::OneScore, &seeds, Population::Ranked).unwrap();
    assert_eq!(a, b);
    for r in &a.pooled {
        let s = &r.summary;
        assert!(s.ci99.contains_interval(&s.ci95));
        let pct = 100.0 * (s.raw_mse - s.iso_mse) / s.raw_mse;
        assert!((s.mse_improvement_pct - pct).abs() < 1e-12);
        assert!(r.rows.iter().all(|row| seeds.contains(&row.seed)));
    }
}
