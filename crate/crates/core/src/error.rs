use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the local projection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("label column `{0}` not found in header")]
    MissingLabelColumn(String),

    #[error("non-numeric value `{value}` at data row {row}, column `{column}`")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("non-finite value at data row {row}, column `{column}`")]
    NonFinite { row: usize, column: String },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("rows {first} and {second} have identical features but different labels")]
    LabelConflict { first: usize, second: usize },

    #[error("invalid resample plan: {0}")]
    InvalidPlan(String),

    #[error("class `{class}` would get {train} of {total} observations for training, leaving one side empty")]
    EmptySplit {
        class: String,
        train: usize,
        total: usize,
    },

    #[error("class of observation {owner} has {size} members, fewer than k = {k}")]
    ClassTooSmall { owner: usize, size: usize, k: usize },

    #[error("class of observation {owner} exhausted at affine rank {rank}, needed {needed}")]
    ClassExhausted {
        owner: usize,
        rank: usize,
        needed: usize,
    },

    #[error("core of observation {owner} has numeric rank {rank}, needed {needed}; try rank-adjusted mode")]
    DegenerateCore {
        owner: usize,
        rank: usize,
        needed: usize,
    },

    #[error("discriminant fit needs at least two classes, found {0}")]
    TooFewClasses(usize),

    #[error("discriminant fit has {points} points for {classes} classes; no degrees of freedom left for the covariance")]
    NoDegreesOfFreedom { points: usize, classes: usize },

    #[error("pooled covariance is not positive definite even with the largest ridge")]
    RidgeExhausted,

    #[error("training data has rank {rank}, needs at least {needed}")]
    RankTooLow { rank: usize, needed: usize },

    #[error("local model of observation {owner}: {source}")]
    Local {
        owner: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("empty interval for k: lower bound {lo} exceeds upper bound {hi} ({binding})")]
    EmptyInterval {
        lo: usize,
        hi: usize,
        binding: String,
    },

    #[error("k = {k} is outside the admissible interval [{lo}, {hi}]")]
    KOutOfRange { k: usize, lo: usize, hi: usize },

    #[error("observation {0} is contained in every core and cannot be scored")]
    Unscored(usize),

    #[error("neighbour count {k} is invalid for {n} training rows")]
    InvalidNeighbours { k: usize, n: usize },

    #[error("all repetitions failed for method {0}")]
    AllFailed(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid class pair ({0}, {1})")]
    InvalidPair(usize, usize),

    #[error("ternary diagrams need at least three classes, found {0}")]
    TooFewClassesForPlot(usize),

    #[error("posterior vector is invalid: {0}")]
    InvalidPosterior(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_owner(self, owner: usize) -> Self {
        match self {
            e @ Error::Local { .. } => e,
            other => Error::Local {
                owner,
                source: Box::new(other),
            },
        }
    }
}
