//! Browser bindings: each operation takes plain strings and numbers and
//! answers with a JSON document the page renders.

use std::collections::BTreeMap;

use isocal::evaluation::EvaluationReport;
use isocal::synthetic::{
    plackett_luce_probability, run_synthetic_experiment, sample_plackett_luce, ExperimentKind, SyntheticConfig,
};
use isocal::{project_isotonic, PaperId, Ranking, ScoreVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

/// Largest item count for the Plackett–Luce table (6! orderings).
pub const MAX_PL_ITEMS: usize = 6;

/// Largest synthetic venue the page will build.
pub const MAX_SCALE: f64 = 0.05;

fn parse_numbers(text: &str) -> Result<Vec<f64>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| format!("`{t}` is not a number"))
        })
        .collect()
}

/// Parses `"1 > 3 = 2 > 4"`: `>` separates tie-groups, `=` joins papers
/// within one. Papers are the 1-based positions of the score list.
pub fn parse_ranking(text: &str, n: usize) -> Result<Ranking, String> {
    if text.trim().is_empty() {
        return Ok(Ranking::default());
    }
    let mut seen = vec![false; n];
    let mut groups = Vec::new();
    for group in text.split('>') {
        let mut ids = Vec::new();
        for tok in group.split('=').map(str::trim) {
            let i: usize = tok.parse().map_err(|_| format!("`{tok}` is not a paper number"))?;
            if i == 0 || i > n {
                return Err(format!("paper {i} is outside 1..={n}"));
            }
            if std::mem::replace(&mut seen[i - 1], true) {
                return Err(format!("paper {i} appears twice"));
            }
            ids.push(PaperId::new(i.to_string()));
        }
        groups.push(ids);
    }
    Ok(Ranking::new(groups))
}

/// Projects a score list onto the order given by `ranking`.
pub fn project_json(scores: &str, ranking: &str) -> Result<String, String> {
    let ys = parse_numbers(scores)?;
    if ys.is_empty() {
        return Err("enter at least one score".into());
    }
    let ranking = parse_ranking(ranking, ys.len())?;
    let input: ScoreVector = ys
        .iter()
        .enumerate()
        .map(|(i, &y)| (PaperId::new((i + 1).to_string()), y))
        .collect();
    let fit = project_isotonic(&input, &ranking).map_err(|e| e.to_string())?;
    let papers: Vec<Value> = ys
        .iter()
        .enumerate()
        .map(|(i, &raw)| {
            let id = PaperId::new((i + 1).to_string());
            json!({ "paper": i + 1, "raw": raw, "isotonic": fit.scores.get(&id).unwrap() })
        })
        .collect();
    Ok(json!({ "papers": papers, "objective": fit.objective }).to_string())
}

fn summarize(reports: &[EvaluationReport]) -> Vec<Value> {
    reports
        .iter()
        .map(|r| {
            let s = &r.summary;
            json!({
                "strategy": r.strategy.as_str(),
                "n": s.n,
                "raw_mse": s.raw_mse,
                "iso_mse": s.iso_mse,
                "improvement_pct": s.mse_improvement_pct,
                "p_value": s.mse_p_value,
            })
        })
        .collect()
}

/// Builds a small synthetic venue and compares the three strategies on it.
pub fn experiment_json(kind: &str, scale: f64, seed: u32) -> Result<String, String> {
    let kind: ExperimentKind = kind.parse().map_err(|e: isocal::Error| e.to_string())?;
    if !(scale > 0.0 && scale <= MAX_SCALE) {
        return Err(format!("scale must be in (0, {MAX_SCALE}]"));
    }
    let cfg = SyntheticConfig::for_experiment(kind, scale, u64::from(seed));
    let run = run_synthetic_experiment(kind, &cfg).map_err(|e| e.to_string())?;
    let rankings = run.dataset.authors.iter().filter(|a| a.ranking.is_some()).count();
    Ok(json!({
        "kind": kind.as_str(),
        "seed": seed,
        "papers": run.dataset.papers.len(),
        "authors": run.dataset.authors.len(),
        "rankings": rankings,
        "target": run.reports.first().map(|r| r.target.as_str()),
        "strategies": summarize(&run.reports),
        "baseline": run.baseline.as_deref().map(summarize),
    })
    .to_string())
}

/// Empirical frequency of every ordering against its exact probability.
pub fn plackett_luce_json(scores: &str, draws: u32, seed: u32) -> Result<String, String> {
    let w = parse_numbers(scores)?;
    if w.is_empty() || w.len() > MAX_PL_ITEMS {
        return Err(format!("enter between 1 and {MAX_PL_ITEMS} scores"));
    }
    if draws == 0 {
        return Err("draw at least one ranking".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let mut counts: BTreeMap<Vec<usize>, u32> = BTreeMap::new();
    for _ in 0..draws {
        *counts.entry(sample_plackett_luce(&w, &mut rng)).or_default() += 1;
    }
    let mut rows = Vec::new();
    let mut tv = 0.0;
    for order in permutations(w.len()) {
        let exact = plackett_luce_probability(&w, &order);
        let observed = f64::from(counts.get(&order).copied().unwrap_or(0)) / f64::from(draws);
        tv += (exact - observed).abs();
        rows.push(json!({
            "order": order.iter().map(|i| i + 1).collect::<Vec<_>>(),
            "exact": exact,
            "observed": observed,
        }));
    }
    rows.sort_by(|a, b| b["exact"].as_f64().unwrap().total_cmp(&a["exact"].as_f64().unwrap()));
    Ok(json!({ "draws": draws, "orderings": rows, "total_variation": tv / 2.0 }).to_string())
}

/// All orderings of `0..n` in lexicographic order.
fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..n).collect();
    loop {
        out.push(cur.clone());
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).unwrap();
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
}

#[wasm_bindgen]
pub fn project(scores: &str, ranking: &str) -> Result<String, JsError> {
    project_json(scores, ranking).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn experiment(kind: &str, scale: f64, seed: u32) -> Result<String, JsError> {
    experiment_json(kind, scale, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn plackett_luce(scores: &str, draws: u32, seed: u32) -> Result<String, JsError> {
    plackett_luce_json(scores, draws, seed).map_err(|e| JsError::new(&e))
}
