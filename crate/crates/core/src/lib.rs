//! Ranking-calibrated peer-review scores.
//!
//! Authors rank their own submissions; the scores of each author's papers are
//! projected onto the order their ranking implies (isotonic regression), and
//! multi-author overlaps are resolved by one of three strategies. The crate
//! also carries the holdout evaluation methodology, synthetic review
//! generators, and reviewer-allocation policies built on isotonic residuals.

pub mod aggregation;
pub mod error;
pub mod evaluation;
pub mod isotonic;
pub mod model;
pub mod policy;
pub mod synthetic;

pub use aggregation::{calibrate, CalibrationResult, StrategyKind};
pub use error::{Error, Result};
pub use isotonic::{project_isotonic, IsotonicFit, ScoreVector};
pub use model::{Author, AuthorId, Dataset, Decision, Paper, PaperId, Ranking, Review, Role};
