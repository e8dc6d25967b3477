use thiserror::Error;

use crate::model::PaperId;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("length mismatch: {0} values vs {1} weights")]
    LengthMismatch(usize, usize),

    #[error("weight at position {0} is not strictly positive")]
    NonPositiveWeight(usize),

    #[error("value at position {0} is not finite")]
    NonFinite(usize),

    #[error("ranked paper {0} has no score")]
    MissingScore(PaperId),

    #[error("score vectors cover different papers (first mismatch: {0})")]
    IdMismatch(PaperId),

    #[error("brute-force projection refused: {0} papers exceeds the limit of {1}")]
    TooLarge(usize, usize),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no paper participates in a multi-paper ranking")]
    NoRankedPapers,

    #[error("authorship graph infeasible after {attempts} attempts; realized tails {realized:?}")]
    InfeasibleGraph {
        attempts: usize,
        realized: Vec<(usize, usize)>,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
