use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::{ItemId, UserId};

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("duplicate (user, item) pairs: {}", format_pairs(.0))]
    DuplicatePairs(Vec<(UserId, ItemId)>),

    #[error("score {score} for ({user}, {item}) lies outside scale [{min}, {max}]")]
    ScoreOutOfScale {
        user: UserId,
        item: ItemId,
        score: f64,
        min: f64,
        max: f64,
    },

    #[error("dataset eliminated by preprocessing")]
    EmptyDataset,

    #[error("unsupported score scale [{min}, {max}]: binarization supports 0-5 and 0-10")]
    UnsupportedScale { min: f64, max: f64 },

    #[error("user {user} has {count} interactions, fewer than the {k} folds requested")]
    TooFewInteractions { user: UserId, count: usize, k: usize },

    #[error("item {0} has no genres")]
    GenrelessItem(ItemId),

    #[error("item {0} is not in the genre catalog")]
    UnknownItem(ItemId),

    #[error("genre axis mismatch: {left} vs {right} genres")]
    AxisMismatch { left: usize, right: usize },

    #[error("duplicate user {0} in distribution matrix")]
    DuplicateUser(UserId),

    #[error("{0}")]
    InvalidInput(String),

    #[error("candidate list has {have} items, need at least {need}")]
    NotEnoughCandidates { have: usize, need: usize },

    #[error("silhouette undefined: {0} effective group(s), need at least 2")]
    SilhouetteUndefined(usize),

    #[error("covariance matrix is singular even after regularization")]
    SingularCovariance,

    #[error("stage {stage} failed (fold {fold}, {subject}): {source}")]
    Stage {
        stage: String,
        fold: usize,
        subject: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &str, fold: usize, subject: impl Into<String>) -> Self {
        Error::Stage {
            stage: stage.to_string(),
            fold,
            subject: subject.into(),
            source: Box::new(self),
        }
    }
}

fn format_pairs(pairs: &[(UserId, ItemId)]) -> String {
    const SHOWN: usize = 10;
    let mut out: Vec<String> = pairs
        .iter()
        .take(SHOWN)
        .map(|(u, i)| format!("({u}, {i})"))
        .collect();
    if pairs.len() > SHOWN {
        out.push(format!("... {} more", pairs.len() - SHOWN));
    }
    out.join(", ")
}
