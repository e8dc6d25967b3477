use isocal_wasm::{experiment_json, plackett_luce_json, project_json};
use serde_json::Value;

fn parse(s: &str) -> Value {
    serde_json::from_str(s).expect("valid JSON")
}

#[test]
fn projection_of_the_worked_example() {
    let v = parse(&project_json("8, 7, 4, 3", "1 > 3 > 2 > 4").unwrap());
    let iso: Vec<f64> = v["papers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["isotonic"].as_f64().unwrap())
        .collect();
    assert_eq!(iso, vec![8.0, 5.5, 5.5, 3.0]);
    assert!((v["objective"].as_f64().unwrap() - 4.5).abs() < 1e-12);
}

#[test]
fn ties_and_unranked_papers() {
    // papers 1 and 2 tied above 3, paper 4 left alone: pooling 2 with 9 gives
    // 5.5 > 3, so all three ranked papers meet at 14/3
    let v = parse(&project_json("2 3 9 1", "1 = 2 > 3").unwrap());
    let iso: Vec<f64> = v["papers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["isotonic"].as_f64().unwrap())
        .collect();
    for (got, want) in iso.iter().zip([14.0 / 3.0, 14.0 / 3.0, 14.0 / 3.0, 1.0]) {
        assert!((got - want).abs() < 1e-12, "{iso:?}");
    }
    // with a weaker top score only the tied-group member below the floor moves
    let v = parse(&project_json("8 3 5", "1 = 2 > 3").unwrap());
    let iso: Vec<f64> = v["papers"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["isotonic"].as_f64().unwrap())
        .collect();
    assert_eq!(iso, vec![8.0, 4.0, 4.0]);
}

#[test]
fn empty_ranking_is_identity() {
    let v = parse(&project_json("4 5 6", "").unwrap());
    assert_eq!(v["objective"].as_f64().unwrap(), 0.0);
}

#[test]
fn projection_rejects_bad_input() {
    assert!(project_json("", "").is_err());
    assert!(project_json("1 two 3", "").is_err());
    assert!(project_json("1 2", "1 > 3").is_err());
}

#[test]
fn small_experiment_reports_three_strategies() {
    let v = parse(&experiment_json("biased", 0.02, 4).unwrap());
    let s = v["strategies"].as_array().unwrap();
    assert_eq!(s.len(), 3);
    assert_eq!(v["target"], "truth");
    assert!(v["baseline"].is_null());
    assert!(v["papers"].as_u64().unwrap() > 100);
    for row in s {
        let raw = row["raw_mse"].as_f64().unwrap();
        let iso = row["iso_mse"].as_f64().unwrap();
        assert!(iso < raw, "{row}");
    }
    assert_eq!(
        experiment_json("biased", 0.02, 4).unwrap(),
        experiment_json("biased", 0.02, 4).unwrap()
    );
}

#[test]
fn outlier_experiment_carries_a_baseline() {
    let v = parse(&experiment_json("outlier", 0.01, 1).unwrap());
    assert_eq!(v["target"], "proxy");
    assert_eq!(v["baseline"].as_array().unwrap().len(), 3);
}

#[test]
fn experiment_rejects_bad_input() {
    assert!(experiment_json("loud", 0.02, 0).is_err());
    assert!(experiment_json("noisy", 0.5, 0).is_err());
    assert!(experiment_json("noisy", 0.0, 0).is_err());
}

#[test]
fn plackett_luce_frequencies_approach_exact_probabilities() {
    let v = parse(&plackett_luce_json("2, 1, 0", 40_000, 11).unwrap());
    let rows = v["orderings"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    let total: f64 = rows.iter().map(|r| r["exact"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    // exact value of the most likely order, by hand: e²/(e²+e+1) · e/(e+1)
    let e = std::f64::consts::E;
    let top = e * e / (e * e + e + 1.0) * e / (e + 1.0);
    assert_eq!(rows[0]["order"], serde_json::json!([1, 2, 3]));
    assert!((rows[0]["exact"].as_f64().unwrap() - top).abs() < 1e-12);
    assert!(v["total_variation"].as_f64().unwrap() < 0.02);
}

#[test]
fn plackett_luce_limits() {
    assert!(plackett_luce_json("1 2 3 4 5 6 7", 10, 0).is_err());
    assert!(plackett_luce_json("1 2", 0, 0).is_err());
    let v = parse(&plackett_luce_json("5", 3, 0).unwrap());
    assert_eq!(v["orderings"][0]["observed"].as_f64().unwrap(), 1.0);
}
