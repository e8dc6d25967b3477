//! Papers, reviews, authors, rankings and dataset validation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque paper identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PaperId(pub String);

/// Opaque author identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AuthorId(pub String);

impl PaperId {
    pub fn new(id: impl Into<String>) -> Self {
        PaperId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl AuthorId {
    pub fn new(id: impl Into<String>) -> Self {
        AuthorId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for PaperId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for AuthorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for PaperId {
    fn from(s: &str) -> Self {
        PaperId(s.to_string())
    }
}

impl From<PaperId> for String {
    fn from(id: PaperId) -> Self {
        id.0
    }
}

impl From<&str> for AuthorId {
    fn from(s: &str) -> Self {
        AuthorId(s.to_string())
    }
}

/// A single review. Scores are review points on the 1..=10 scale; synthetic
/// datasets (papers with a ground truth) may also carry 0 after clipping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Review {
    pub score: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<i32>,
}

impl Review {
    pub fn new(score: i32) -> Self {
        Review {
            score,
            confidence: None,
        }
    }

    pub fn with_confidence(score: i32, confidence: i32) -> Self {
        Review {
            score,
            confidence: Some(confidence),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Withdrawn,
    Rejected,
    Poster,
    Oral,
    Award,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paper {
    pub id: PaperId,
    pub reviews: Vec<Review>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decision: Option<Decision>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<f64>,
}

impl Paper {
    pub fn new(id: impl Into<String>, scores: &[i32]) -> Self {
        Paper {
            id: PaperId::new(id),
            reviews: scores.iter().map(|&s| Review::new(s)).collect(),
            decision: None,
            ground_truth: None,
        }
    }

    /// Unweighted mean of all review scores, `None` without reviews.
    pub fn mean_score(&self) -> Option<f64> {
        if self.reviews.is_empty() {
            return None;
        }
        let sum: f64 = self.reviews.iter().map(|r| r.score as f64).sum();
        Some(sum / self.reviews.len() as f64)
    }

    /// Sample variance of review scores; 0 with fewer than two reviews.
    pub fn score_variance(&self) -> f64 {
        let n = self.reviews.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean_score().unwrap_or(0.0);
        let ss: f64 = self.reviews.iter().map(|r| (r.score as f64 - mean).powi(2)).sum();
        ss / (n - 1) as f64
    }

    /// Mean confidence over reviews that report one.
    pub fn mean_confidence(&self) -> Option<f64> {
        let conf: Vec<f64> = self
            .reviews
            .iter()
            .filter_map(|r| r.confidence.map(f64::from))
            .collect();
        if conf.is_empty() {
            None
        } else {
            Some(conf.iter().sum::<f64>() / conf.len() as f64)
        }
    }
}

/// Tie-aware ranking: ordered tie-groups, best group first.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking {
    pub groups: Vec<Vec<PaperId>>,
}

impl Ranking {
    pub fn new(groups: Vec<Vec<PaperId>>) -> Self {
        Ranking { groups }
    }

    /// Strict order, one paper per group.
    pub fn strict<I, S>(ids: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Ranking {
            groups: ids.into_iter().map(|s| vec![PaperId::new(s)]).collect(),
        }
    }

    /// Total number of ranked ids.
    pub fn len(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ids(&self) -> impl Iterator<Item = &PaperId> {
        self.groups.iter().flatten()
    }

    pub fn contains(&self, id: &PaperId) -> bool {
        self.ids().any(|p| p == id)
    }

    /// Keeps only the ids in `keep`, dropping emptied groups.
    pub fn restrict(&self, keep: &BTreeSet<PaperId>) -> Ranking {
        let groups = self
            .groups
            .iter()
            .map(|g| g.iter().filter(|p| keep.contains(*p)).cloned().collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect();
        Ranking { groups }
    }

    /// Same groups in opposite order.
    pub fn reversed(&self) -> Ranking {
        Ranking {
            groups: self.groups.iter().rev().cloned().collect(),
        }
    }
}

/// Parses `"a > b = c > d"`: `>` separates tie-groups, `=` joins members of a group.
impl FromStr for Ranking {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut groups = Vec::new();
        for part in s.split('>') {
            let group: Vec<PaperId> = part
                .split('=')
                .map(str::trim)
                .filter(|t| !t.is_empty())
                .map(PaperId::new)
                .collect();
            if group.is_empty() {
                return Err(Error::Parse(format!("empty tie-group in ranking {s:?}")));
            }
            groups.push(group);
        }
        Ok(Ranking { groups })
    }
}

impl fmt::Display for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, g) in self.groups.iter().enumerate() {
            if i > 0 {
                f.write_str(" > ")?;
            }
            for (j, p) in g.iter().enumerate() {
                if j > 0 {
                    f.write_str(" = ")?;
                }
                f.write_str(p.as_str())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    #[default]
    None,
    Reviewer,
    AreaChair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Author {
    pub id: AuthorId,
    #[serde(default)]
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ranking: Option<Ranking>,
}

impl Author {
    pub fn new(id: impl Into<String>) -> Self {
        Author {
            id: AuthorId::new(id),
            role: Role::None,
            ranking: None,
        }
    }

    pub fn with_ranking(id: impl Into<String>, ranking: Ranking) -> Self {
        Author {
            id: AuthorId::new(id),
            role: Role::None,
            ranking: Some(ranking),
        }
    }
}

/// Papers, authors and the authorship relation.
///
/// This is also the on-disk dataset format: a single JSON document with
/// `papers`, `authors` and `authorship` (a list of `[author, paper]` pairs).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dataset {
    pub papers: Vec<Paper>,
    pub authors: Vec<Author>,
    pub authorship: Vec<(AuthorId, PaperId)>,
}

impl Dataset {
    pub fn paper(&self, id: &PaperId) -> Option<&Paper> {
        self.papers.iter().find(|p| &p.id == id)
    }

    pub fn paper_map(&self) -> HashMap<&PaperId, &Paper> {
        self.papers.iter().map(|p| (&p.id, p)).collect()
    }

    /// Papers of each author, sorted by id.
    pub fn papers_by_author(&self) -> BTreeMap<AuthorId, Vec<PaperId>> {
        let mut out: BTreeMap<AuthorId, Vec<PaperId>> = BTreeMap::new();
        for (a, p) in &self.authorship {
            out.entry(a.clone()).or_default().push(p.clone());
        }
        for v in out.values_mut() {
            v.sort();
            v.dedup();
        }
        out
    }

    /// Authors of each paper, sorted by id.
    pub fn authors_by_paper(&self) -> BTreeMap<PaperId, Vec<AuthorId>> {
        let mut out: BTreeMap<PaperId, Vec<AuthorId>> = BTreeMap::new();
        for (a, p) in &self.authorship {
            out.entry(p.clone()).or_default().push(a.clone());
        }
        for v in out.values_mut() {
            v.sort();
            v.dedup();
        }
        out
    }

    /// Per-paper mean review score; papers without reviews are skipped.
    pub fn mean_scores(&self) -> crate::isotonic::ScoreVector {
        self.papers
            .iter()
            .filter_map(|p| p.mean_score().map(|m| (p.id.clone(), m)))
            .collect()
    }

    /// Parses a dataset from its JSON form. Unknown fields are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("dataset serialization cannot fail")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Subject {
    Paper(PaperId),
    Author(AuthorId),
    Authorship(AuthorId, PaperId),
}

/// One broken dataset invariant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Violation {
    pub subject: Subject,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Subject::Paper(p) => write!(f, "paper {p}: {}", self.reason),
            Subject::Author(a) => write!(f, "author {a}: {}", self.reason),
            Subject::Authorship(a, p) => write!(f, "authorship ({a}, {p}): {}", self.reason),
        }
    }
}

/// Returns every invariant violation in `d`; an empty list means valid.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let paper_v = |p: &PaperId, reason: String| Violation {
        subject: Subject::Paper(p.clone()),
        reason,
    };
    let author_v = |a: &AuthorId, reason: String| Violation {
        subject: Subject::Author(a.clone()),
        reason,
    };

    let mut paper_ids = BTreeSet::new();
    for p in &d.papers {
        if !paper_ids.insert(&p.id) {
            out.push(paper_v(&p.id, "duplicate paper id".into()));
        }
        let synthetic = p.ground_truth.is_some();
        let min_score = if synthetic { 0 } else { 1 };
        for (i, r) in p.reviews.iter().enumerate() {
            if r.score < min_score || r.score > 10 {
                out.push(paper_v(
                    &p.id,
                    format!("reviews[{i}].score = {} outside [{min_score}, 10]", r.score),
                ));
            }
            if let Some(c) = r.confidence {
                if !(1..=5).contains(&c) {
                    out.push(paper_v(&p.id, format!("reviews[{i}].confidence = {c} outside [1, 5]")));
                }
            }
        }
        if let Some(g) = p.ground_truth {
            if !g.is_finite() {
                out.push(paper_v(&p.id, "ground_truth is not finite".into()));
            }
        }
    }

    let mut author_ids = BTreeSet::new();
    for a in &d.authors {
        if !author_ids.insert(&a.id) {
            out.push(author_v(&a.id, "duplicate author id".into()));
        }
    }

    let mut pairs = BTreeSet::new();
    for (a, p) in &d.authorship {
        let subject = Subject::Authorship(a.clone(), p.clone());
        if !author_ids.contains(a) {
            out.push(Violation {
                subject: subject.clone(),
                reason: format!("unknown author id {a:?}"),
            });
        }
        if !paper_ids.contains(p) {
            out.push(Violation {
                subject: subject.clone(),
                reason: format!("unknown paper id {p:?}"),
            });
        }
        if !pairs.insert((a, p)) {
            out.push(Violation {
                subject,
                reason: "duplicate authorship pair".into(),
            });
        }
    }

    for a in &d.authors {
        let Some(ranking) = &a.ranking else { continue };
        let mut seen = BTreeSet::new();
        for (gi, g) in ranking.groups.iter().enumerate() {
            if g.is_empty() {
                out.push(author_v(&a.id, format!("ranking group {gi} is empty")));
            }
            for p in g {
                if !seen.insert(p) {
                    out.push(author_v(&a.id, format!("ranking lists paper {p:?} twice")));
                }
                if !paper_ids.contains(p) {
                    out.push(author_v(&a.id, format!("ranking references unknown paper {p:?}")));
                } else if !pairs.contains(&(&a.id, p)) {
                    out.push(author_v(
                        &a.id,
                        format!("ranking references paper {p:?} not authored by this author"),
                    ));
                }
            }
        }
    }

    out.sort();
    out
}
