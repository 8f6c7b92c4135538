use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calibrate::CalibrationConfig;
use crate::error::{Error, Result};
use crate::ingest::CsvSchema;
use crate::recommender::HyperParams;
use crate::structure::{Algorithm, SearchSpace};

/// Overrides `output_dir` when set.
pub const OUTPUT_DIR_ENV: &str = "CALIB_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "format", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// `ratings.dat` / `movies.dat` with `::` separators.
    Movielens { ratings: PathBuf, movies: PathBuf },
    /// Headed ratings CSV plus an `item_id,genres` file.
    Csv {
        ratings: PathBuf,
        genres: PathBuf,
        schema: CsvSchema,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub name: String,
    pub source: DatasetSource,
    #[serde(default = "default_min_user_tx")]
    pub min_user_tx: usize,
}

fn default_min_user_tx() -> usize {
    50
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    Original,
    Binary,
}

impl ScoreMode {
    pub fn name(self) -> &'static str {
        match self {
            ScoreMode::Original => "original",
            ScoreMode::Binary => "binary",
        }
    }

    pub(crate) fn index(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for ScoreMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreModes {
    #[default]
    Original,
    Binary,
    Both,
}

impl ScoreModes {
    pub fn modes(self) -> Vec<ScoreMode> {
        match self {
            ScoreModes::Original => vec![ScoreMode::Original],
            ScoreModes::Binary => vec![ScoreMode::Binary],
            ScoreModes::Both => vec![ScoreMode::Original, ScoreMode::Binary],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecommenderConfig {
    /// Random-search trials; ignored when `params` is set.
    pub n_trials: usize,
    /// Folds of the cross-validation that scores each trial.
    pub cv_folds: usize,
    /// Candidate list length handed to the re-ranker.
    pub candidates: usize,
    /// Fixed hyperparameters that skip tuning.
    pub params: Option<HyperParams>,
}

impl Default for RecommenderConfig {
    fn default() -> Self {
        Self {
            n_trials: 20,
            cv_folds: 5,
            candidates: 100,
            params: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    pub algorithms: Vec<Algorithm>,
    pub space: SearchSpace,
}

impl Default for StructureConfig {
    fn default() -> Self {
        Self {
            algorithms: Algorithm::ALL.to_vec(),
            space: SearchSpace::default(),
        }
    }
}

/// Everything one experiment run needs. Relative paths in the file are
/// resolved against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub score_mode: ScoreModes,
    #[serde(default = "default_folds")]
    pub folds: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub recommender: RecommenderConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub structure: StructureConfig,
    /// SHA-256 of the file the config was read from.
    #[serde(skip)]
    pub source_hash: Option<String>,
}

fn default_folds() -> usize {
    5
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.source_hash = Some(hex::encode(Sha256::digest(text.as_bytes())));
        Ok(cfg)
    }

    /// Reads, resolves relative paths, applies the output-directory
    /// environment override and validates.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        cfg.override_output_dir(std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset.source {
            DatasetSource::Movielens { ratings, movies } => {
                fix(ratings);
                fix(movies);
            }
            DatasetSource::Csv { ratings, genres, .. } => {
                fix(ratings);
                fix(genres);
            }
        }
        fix(&mut self.output_dir);
    }

    pub fn override_output_dir(&mut self, dir: Option<PathBuf>) {
        if let Some(dir) = dir {
            self.output_dir = dir;
        }
    }

    pub fn validate(&self) -> Result<()> {
        let inputs: Vec<&PathBuf> = match &self.dataset.source {
            DatasetSource::Movielens { ratings, movies } => vec![ratings, movies],
            DatasetSource::Csv { ratings, genres, .. } => vec![ratings, genres],
        };
        if let Some(missing) = inputs.into_iter().find(|p| !p.is_file()) {
            return Err(Error::Config(format!("input file {} does not exist", missing.display())));
        }
        if self.folds < 2 {
            return Err(Error::Config("folds must be at least 2".into()));
        }
        let rec = &self.recommender;
        if rec.params.is_none() && rec.n_trials == 0 {
            return Err(Error::Config("recommender.n_trials must be at least 1".into()));
        }
        if rec.cv_folds < 2 {
            return Err(Error::Config("recommender.cv_folds must be at least 2".into()));
        }
        if let Some(hp) = rec.params {
            if hp.n_factors == 0 || hp.n_epochs == 0 || !(hp.lr_all > 0.0) || !(hp.reg_all >= 0.0) {
                return Err(Error::Config(format!("invalid recommender.params {hp:?}")));
            }
        }
        self.calibration.validate()?;
        if rec.candidates < self.calibration.list_size {
            return Err(Error::Config(format!(
                "recommender.candidates ({}) is smaller than the list size ({})",
                rec.candidates, self.calibration.list_size
            )));
        }
        if self.structure.algorithms.is_empty() {
            return Err(Error::Config("structure.algorithms is empty".into()));
        }
        self.structure.space.validate()
    }
}
