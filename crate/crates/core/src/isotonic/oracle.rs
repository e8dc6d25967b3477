//! Exhaustive-search projections used to check [`super::project_isotonic`].
//!
//! Neither routine shares code with the chain/PAVA path. The set-partition
//! search relies only on the fact that the optimum is constant on each of its
//! level sets and equals the mean of the inputs there, so the minimum over all
//! feasible "partition → block means" candidates is the projection.

use super::{IsotonicFit, ScoreVector};
use crate::error::{Error, Result};
use crate::model::{PaperId, Ranking};

/// Largest ranking accepted by [`brute_force_project`].
pub const MAX_BRUTE_FORCE: usize = 10;
/// Largest ranking accepted by [`brute_force_project_by_orderings`].
pub const MAX_ORDERINGS: usize = 6;

const FEASIBILITY_TOL: f64 = 1e-12;

struct Problem {
    ids: Vec<PaperId>,
    y: Vec<f64>,
    group: Vec<usize>,
    n_groups: usize,
}

fn problem(scores: &ScoreVector, ranking: &Ranking, limit: usize) -> Result<Problem> {
    let n = ranking.len();
    if n > limit {
        return Err(Error::TooLarge(n, limit));
    }
    let mut p = Problem {
        ids: Vec::with_capacity(n),
        y: Vec::with_capacity(n),
        group: Vec::with_capacity(n),
        n_groups: ranking.groups.len(),
    };
    for (g, members) in ranking.groups.iter().enumerate() {
        for id in members {
            let y = scores.get(id).ok_or_else(|| Error::MissingScore(id.clone()))?;
            p.ids.push(id.clone());
            p.y.push(y);
            p.group.push(g);
        }
    }
    Ok(p)
}

fn feasible(p: &Problem, r: &[f64]) -> bool {
    let mut lo = vec![f64::INFINITY; p.n_groups];
    let mut hi = vec![f64::NEG_INFINITY; p.n_groups];
    for (i, &g) in p.group.iter().enumerate() {
        lo[g] = lo[g].min(r[i]);
        hi[g] = hi[g].max(r[i]);
    }
    (1..p.n_groups).all(|g| lo[g - 1] >= hi[g] - FEASIBILITY_TOL)
}

fn finish(scores: &ScoreVector, p: &Problem, best: Vec<f64>, objective: f64) -> IsotonicFit {
    let mut out = scores.clone();
    for (id, v) in p.ids.iter().zip(best) {
        out.insert(id.clone(), v);
    }
    IsotonicFit { scores: out, objective }
}

/// Projection by enumerating every set partition of the ranked papers into
/// candidate level sets (restricted growth strings). Refuses more than
/// [`MAX_BRUTE_FORCE`] papers.
pub fn brute_force_project(scores: &ScoreVector, ranking: &Ranking) -> Result<IsotonicFit> {
    let p = problem(scores, ranking, MAX_BRUTE_FORCE)?;
    let n = p.y.len();
    if n == 0 {
        return Ok(finish(scores, &p, vec![], 0.0));
    }

    let mut labels = vec![0usize; n];
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut r = vec![0.0; n];
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    loop {
        sums.iter_mut().for_each(|s| *s = 0.0);
        counts.iter_mut().for_each(|c| *c = 0);
        for i in 0..n {
            sums[labels[i]] += p.y[i];
            counts[labels[i]] += 1;
        }
        for i in 0..n {
            r[i] = sums[labels[i]] / counts[labels[i]] as f64;
        }
        if feasible(&p, &r) {
            let obj: f64 = p.y.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, r.clone()));
            }
        }
        if !next_partition(&mut labels) {
            break;
        }
    }
    // The all-in-one partition is always feasible.
    let (obj, vals) = best.expect("pooled partition is feasible");
    Ok(finish(scores, &p, vals, obj))
}

/// Advances a restricted growth string; false once all partitions are seen.
fn next_partition(labels: &mut [usize]) -> bool {
    let n = labels.len();
    for i in (1..n).rev() {
        let max_prefix = labels[..i].iter().copied().max().unwrap_or(0);
        if labels[i] <= max_prefix {
            labels[i] += 1;
            for l in labels.iter_mut().skip(i + 1) {
                *l = 0;
            }
            return true;
        }
    }
    false
}

/// Projection by enumerating every within-group ordering of the ranking and,
/// for each resulting chain, every split into contiguous level blocks.
/// Refuses more than [`MAX_ORDERINGS`] papers.
pub fn brute_force_project_by_orderings(scores: &ScoreVector, ranking: &Ranking) -> Result<IsotonicFit> {
    let p = problem(scores, ranking, MAX_ORDERINGS)?;
    let n = p.y.len();
    if n == 0 {
        return Ok(finish(scores, &p, vec![], 0.0));
    }

    let mut offsets = Vec::with_capacity(p.n_groups);
    let mut start = 0;
    for g in &ranking.groups {
        offsets.push((start, g.len()));
        start += g.len();
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    for chain in linear_extensions(&offsets) {
        for mask in 0u32..(1 << (n - 1)) {
            // bit k set: a block boundary between chain positions k and k + 1
            let mut r = vec![0.0; n];
            let mut block_start = 0;
            let mut prev_mean = f64::INFINITY;
            let mut ok = true;
            for k in 0..n {
                let boundary = k == n - 1 || mask & (1 << k) != 0;
                if !boundary {
                    continue;
                }
                let members = &chain[block_start..=k];
                let mean = members.iter().map(|&i| p.y[i]).sum::<f64>() / members.len() as f64;
                if mean > prev_mean + FEASIBILITY_TOL {
                    ok = false;
                    break;
                }
                for &i in members {
                    r[i] = mean;
                }
                prev_mean = mean;
                block_start = k + 1;
            }
            if !ok {
                continue;
            }
            let obj: f64 = p.y.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.as_ref().is_none_or(|(b, _)| obj < *b) {
                best = Some((obj, r));
            }
        }
    }
    let (obj, vals) = best.expect("pooled chain is feasible");
    Ok(finish(scores, &p, vals, obj))
}

/// All chains obtained by permuting members inside each group.
fn linear_extensions(groups: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &(start, len) in groups {
        let perms = permutations(&(start..start + len).collect::<Vec<_>>());
        let mut next = Vec::with_capacity(out.len() * perms.len());
        for prefix in &out {
            for perm in &perms {
                let mut c = prefix.clone();
                c.extend_from_slice(perm);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}
