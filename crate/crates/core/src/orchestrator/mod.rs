//! End-to-end experiment driver.
//!
//! Each stage reads what the previous one wrote under the output directory,
//! so the CLI can run stages one at a time; [`run_experiment`] chains them in
//! memory and produces the same files.
//!
//! ```text
//! <out>/cleaned/{ratings,genres}.csv
//! <out>/<mode>/{hyperparams.json,tuning.csv}
//! <out>/<mode>/fold-<f>/model.txt, candidates.csv, calibrated.csv,
//!     matrices/<stage>.csv, ranking.csv, structure.csv, configs.csv,
//!     trials.csv, labels/<algorithm>/<stage>.csv
//! <out>/metrics.csv, fig-*.csv, ranking-modes.csv, manifest.json
//! ```

mod config;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

pub use config::{
    DatasetConfig, DatasetSource, ExperimentConfig, RecommenderConfig, ScoreMode, ScoreModes, StructureConfig,
    OUTPUT_DIR_ENV,
};
pub use report::{
    emit_plot_data, read_reports, write_ranking_modes, write_reports, DataSummary, Manifest, Timing,
};

use crate::calibrate::{stage_label, sweep_lambda, write_calibrated_csv};
use crate::distribution::{
    distribution_matrix, list_distribution, preference_distribution, DistributionMatrix, GenreDistribution, Stage,
};
use crate::error::{Error, Result};
use crate::ingest::{
    binarize, load_csv, load_genre_csv, load_movielens, preprocess, split_folds, write_genre_csv,
    write_interactions_csv, FoldAssignment, GenreCatalog, InteractionSet, ItemId, UserId,
};
use crate::metrics::{jaccard, mace, map_at_n, mrr, silhouette, MetricReport};
use crate::recommender::{candidates, random_search, train_mf, write_checkpoint, HyperParams, RankedList};
use crate::seed;
use crate::structure::{fit, grid_search, write_config_report, Algorithm, Metric, SearchOutcome};

/// Stage label of the preference matrix.
pub const PREF_STAGE: &str = "PREF";
/// Algorithm column of ranking-metric rows.
pub const RANKING_ALGORITHM: &str = "mf";

// Seed-path tags.
const SEED_FOLDS: u64 = 1;
const SEED_TUNE: u64 = 2;
const SEED_TRAIN: u64 = 3;
const SEED_STRUCTURE: u64 = 4;

pub fn folds_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.seed, &[SEED_FOLDS])
}

pub fn tune_seed(cfg: &ExperimentConfig, mode: ScoreMode) -> u64 {
    seed::derive(cfg.seed, &[SEED_TUNE, mode.index()])
}

pub fn train_seed(cfg: &ExperimentConfig, mode: ScoreMode, fold: usize) -> u64 {
    seed::derive(cfg.seed, &[SEED_TRAIN, mode.index(), fold as u64])
}

pub fn structure_seed(cfg: &ExperimentConfig, mode: ScoreMode, fold: usize, alg: Algorithm) -> u64 {
    let idx = Algorithm::ALL.iter().position(|&a| a == alg).unwrap_or(0);
    seed::derive(cfg.seed, &[SEED_STRUCTURE, mode.index(), fold as u64, idx as u64])
}

/// Where every artifact of a run lives.
#[derive(Debug, Clone)]
pub struct Layout {
    root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn cleaned_dir(&self) -> PathBuf {
        self.root.join("cleaned")
    }

    pub fn mode_dir(&self, mode: ScoreMode) -> PathBuf {
        self.root.join(mode.name())
    }

    pub fn hyperparams(&self, mode: ScoreMode) -> PathBuf {
        self.mode_dir(mode).join("hyperparams.json")
    }

    pub fn fold_dir(&self, mode: ScoreMode, fold: usize) -> PathBuf {
        self.mode_dir(mode).join(format!("fold-{fold}"))
    }

    pub fn candidates(&self, mode: ScoreMode, fold: usize) -> PathBuf {
        self.fold_dir(mode, fold).join("candidates.csv")
    }

    pub fn matrix(&self, mode: ScoreMode, fold: usize, stage: &str) -> PathBuf {
        self.fold_dir(mode, fold).join("matrices").join(format!("{stage}.csv"))
    }

    pub fn ranking(&self, mode: ScoreMode, fold: usize) -> PathBuf {
        self.fold_dir(mode, fold).join("ranking.csv")
    }

    pub fn structure(&self, mode: ScoreMode, fold: usize) -> PathBuf {
        self.fold_dir(mode, fold).join("structure.csv")
    }

    pub fn labels(&self, mode: ScoreMode, fold: usize, alg: Algorithm, stage: &str) -> PathBuf {
        self.fold_dir(mode, fold)
            .join("labels")
            .join(alg.name())
            .join(format!("{stage}.csv"))
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.csv")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) => ensure_dir(p),
        None => Ok(()),
    }
}

/// Cleaned data and its fold assignment, shared by every stage.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub interactions: InteractionSet,
    pub catalog: GenreCatalog,
    pub folds: FoldAssignment,
}

impl Prepared {
    /// Scores as the recommender sees them in `mode`.
    pub fn scores(&self, mode: ScoreMode) -> Result<InteractionSet> {
        match mode {
            ScoreMode::Original => Ok(self.interactions.clone()),
            ScoreMode::Binary => binarize(&self.interactions),
        }
    }

    pub fn summary(&self) -> DataSummary {
        DataSummary {
            users: self.interactions.users().len(),
            items: self.catalog.item_count(),
            interactions: self.interactions.len(),
            genres: self.catalog.genres().to_vec(),
        }
    }
}

/// Loads, cleans and splits the dataset. Deterministic, so every stage can
/// call it again instead of reading it back.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let name = &cfg.dataset.name;
    let (raw, catalog) = match &cfg.dataset.source {
        DatasetSource::Movielens { ratings, movies } => load_movielens(ratings, movies),
        DatasetSource::Csv {
            ratings,
            genres,
            schema,
        } => load_csv(ratings, schema).and_then(|set| Ok((set, load_genre_csv(genres)?))),
    }
    .map_err(|e| e.in_stage("ingest", 0, name.as_str()))?;
    let (interactions, catalog) =
        preprocess(&raw, &catalog, cfg.dataset.min_user_tx).map_err(|e| e.in_stage("ingest", 0, name.as_str()))?;
    let folds = split_folds(&interactions, cfg.folds, folds_seed(cfg)).map_err(|e| e.in_stage("ingest", 0, name.as_str()))?;
    log::info!(
        "{name}: {} users, {} items, {} interactions, {} genres",
        interactions.users().len(),
        catalog.item_count(),
        interactions.len(),
        catalog.genre_count()
    );
    Ok(Prepared {
        interactions,
        catalog,
        folds,
    })
}

/// Writes the cleaned interactions and genre catalog.
pub fn write_cleaned(layout: &Layout, prepared: &Prepared) -> Result<Vec<PathBuf>> {
    let dir = layout.cleaned_dir();
    ensure_dir(&dir)?;
    let ratings = dir.join("ratings.csv");
    let genres = dir.join("genres.csv");
    write_interactions_csv(&ratings, &prepared.interactions)?;
    write_genre_csv(&genres, &prepared.catalog)?;
    Ok(vec![ratings, genres])
}

/// Picks MF hyperparameters for `mode`: the configured ones, or a random
/// search on fold 0's training split. Writes `hyperparams.json` and, after a
/// search, `tuning.csv`.
pub fn tune(cfg: &ExperimentConfig, layout: &Layout, prepared: &Prepared, mode: ScoreMode) -> Result<HyperParams> {
    let dir = layout.mode_dir(mode);
    ensure_dir(&dir)?;
    let hp = match cfg.recommender.params {
        Some(hp) => hp,
        None => {
            let scores = prepared.scores(mode)?;
            let (train, _) = prepared.folds.split(&scores, 0);
            let outcome = random_search(&train, cfg.recommender.n_trials, cfg.recommender.cv_folds, tune_seed(cfg, mode))
                .map_err(|e| e.in_stage("tune", 0, mode.name()))?;
            let path = dir.join("tuning.csv");
            let mut w = csv::Writer::from_path(&path)?;
            w.write_record(["trial", "n_factors", "n_epochs", "lr_all", "reg_all", "cv_rmse"])?;
            for (t, trial) in outcome.trials.iter().enumerate() {
                let p = trial.params;
                w.write_record([
                    t.to_string(),
                    p.n_factors.to_string(),
                    p.n_epochs.to_string(),
                    p.lr_all.to_string(),
                    p.reg_all.to_string(),
                    trial.cv_rmse.to_string(),
                ])?;
            }
            w.flush().map_err(|e| Error::io(&path, e))?;
            outcome.best
        }
    };
    let path = layout.hyperparams(mode);
    let json = serde_json::to_string_pretty(&hp).map_err(|e| Error::InvalidInput(e.to_string()))?;
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))?;
    log::info!("{mode}: hyperparameters {hp:?}");
    Ok(hp)
}

/// Reads the hyperparameters a previous `tune` wrote.
pub fn read_hyperparams(layout: &Layout, mode: ScoreMode) -> Result<HyperParams> {
    let path = layout.hyperparams(mode);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path,
        line: e.line(),
        message: e.to_string(),
    })
}

/// Trains the fold's model and ranks every unseen catalog item for each
/// training user, keeping the top `recommender.candidates`. Lists are sorted
/// by user.
pub fn recommend_fold(
    cfg: &ExperimentConfig,
    layout: &Layout,
    prepared: &Prepared,
    mode: ScoreMode,
    fold: usize,
    hp: &HyperParams,
) -> Result<Vec<RankedList>> {
    let dir = layout.fold_dir(mode, fold);
    ensure_dir(&dir)?;
    let scores = prepared.scores(mode)?;
    let (train, _) = prepared.folds.split(&scores, fold);
    let model = train_mf(&train, hp, train_seed(cfg, mode, fold)).map_err(|e| e.in_stage("recommend", fold, mode.name()))?;
    write_checkpoint(&model, dir.join("model.txt"))?;

    let universe: Vec<ItemId> = prepared.catalog.items().collect();
    let by_user = train.by_user();
    let lists: Vec<RankedList> = by_user
        .par_iter()
        .map(|(&user, items)| {
            let seen: BTreeSet<ItemId> = items.iter().map(|&(i, _)| i).collect();
            candidates(&model, user, &universe, &seen, cfg.recommender.candidates)
        })
        .collect();
    write_candidates_csv(layout.candidates(mode, fold), &lists)?;
    Ok(lists)
}

/// Writes `user_id,rank,item_id,predicted_score`; ranks are 1-based.
pub fn write_candidates_csv(path: impl AsRef<Path>, lists: &[RankedList]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["user_id", "rank", "item_id", "predicted_score"])?;
    for list in lists {
        for (rank, (item, score)) in list.entries().iter().enumerate() {
            w.write_record([
                list.owner.to_string(),
                (rank + 1).to_string(),
                item.to_string(),
                score.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_candidates_csv(path: impl AsRef<Path>) -> Result<Vec<RankedList>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    let mut rows: BTreeMap<UserId, Vec<(usize, ItemId, f64)>> = BTreeMap::new();
    for row in r.deserialize::<(UserId, usize, ItemId, f64)>() {
        let (user, rank, item, score) = row?;
        rows.entry(user).or_default().push((rank, item, score));
    }
    Ok(rows
        .into_iter()
        .map(|(user, mut entries)| {
            entries.sort_by_key(|e| e.0);
            RankedList::new(user, entries.into_iter().map(|(_, i, s)| (i, s)).collect())
        })
        .collect())
}

/// Output of calibrating one fold.
#[derive(Debug, Clone)]
pub struct FoldCalibration {
    pub prefs: BTreeMap<UserId, GenreDistribution>,
    /// `(stage label, lists sorted by user)` in λ-grid order.
    pub lists: Vec<(String, Vec<RankedList>)>,
    /// PREF first, then one matrix per λ.
    pub matrices: Vec<(String, DistributionMatrix)>,
    pub reports: Vec<MetricReport>,
}

/// Stage labels of a run: PREF, then `C@λ` for every grid value.
pub fn stage_labels(cfg: &ExperimentConfig) -> Vec<String> {
    std::iter::once(PREF_STAGE.to_string())
        .chain(cfg.calibration.lambda_grid.iter().map(|&l| stage_label(l)))
        .collect()
}

/// Builds P for every training user, sweeps λ over each candidate list,
/// stacks the stage matrices and scores every stage's lists against the
/// fold's held-out items.
pub fn calibrate_fold(
    cfg: &ExperimentConfig,
    layout: &Layout,
    prepared: &Prepared,
    mode: ScoreMode,
    fold: usize,
    cands: &[RankedList],
) -> Result<FoldCalibration> {
    let cal = &cfg.calibration;
    let catalog = &prepared.catalog;
    let dir = layout.fold_dir(mode, fold);
    ensure_dir(&dir.join("matrices"))?;
    let scores = prepared.scores(mode)?;
    let (train, test) = prepared.folds.split(&scores, fold);

    let prefs: BTreeMap<UserId, GenreDistribution> = train
        .by_user()
        .into_iter()
        .map(|(u, items)| {
            let p = preference_distribution(u, &items, catalog, cal.denominator)
                .map_err(|e| e.in_stage("calibrate", fold, format!("user {u}")))?;
            Ok((u, p))
        })
        .collect::<Result<_>>()?;

    let swept: Vec<Vec<(f64, RankedList)>> = cands
        .par_iter()
        .map(|c| {
            let p = prefs.get(&c.owner).ok_or_else(|| {
                Error::InvalidInput(format!("no training interactions")).in_stage("calibrate", fold, format!("user {}", c.owner))
            })?;
            sweep_lambda(c, p, cal, catalog).map_err(|e| e.in_stage("calibrate", fold, format!("user {}", c.owner)))
        })
        .collect::<Result<_>>()?;
    if swept.len() != prefs.len() {
        return Err(Error::InvalidInput(format!(
            "{} candidate lists for {} training users",
            swept.len(),
            prefs.len()
        ))
        .in_stage("calibrate", fold, mode.name()));
    }

    write_calibrated_csv(
        dir.join("calibrated.csv"),
        swept.iter().flat_map(|per_user| per_user.iter().map(|(l, list)| (*l, list))),
    )?;

    let lists: Vec<(String, Vec<RankedList>)> = cal
        .lambda_grid
        .iter()
        .enumerate()
        .map(|(j, &l)| (stage_label(l), swept.iter().map(|s| s[j].1.clone()).collect()))
        .collect();

    let pref_dists: Vec<GenreDistribution> = prefs.values().cloned().collect();
    let mut matrices = vec![(
        PREF_STAGE.to_string(),
        distribution_matrix(&pref_dists, catalog).map_err(|e| e.in_stage("calibrate", fold, PREF_STAGE))?,
    )];
    for (label, stage_lists) in &lists {
        let kind = if label == &stage_label(0.0) {
            Stage::Candidate
        } else {
            Stage::Calibrated
        };
        let dists = stage_lists
            .iter()
            .map(|l| list_distribution(l, kind, catalog, cal.denominator))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.in_stage("calibrate", fold, label.as_str()))?;
        matrices.push((
            label.clone(),
            distribution_matrix(&dists, catalog).map_err(|e| e.in_stage("calibrate", fold, label.as_str()))?,
        ));
    }
    for (label, m) in &matrices {
        m.write_csv(layout.matrix(mode, fold, label))?;
    }

    let threshold = scores.scale().positive_threshold()?;
    let mut relevant: BTreeMap<UserId, BTreeSet<ItemId>> = BTreeMap::new();
    for r in test.records().iter().filter(|r| r.score >= threshold) {
        relevant.entry(r.user).or_default().insert(r.item);
    }
    let report = |stage: &str, metric: &str, value: f64| MetricReport {
        dataset: cfg.dataset.name.clone(),
        score_mode: mode.name().to_string(),
        algorithm: RANKING_ALGORITHM.to_string(),
        stage: stage.to_string(),
        fold,
        metric: metric.to_string(),
        value,
    };
    let mut reports = Vec::new();
    for (label, stage_lists) in &lists {
        let wrap = |e: Error| e.in_stage("metrics", fold, label.as_str());
        reports.push(report(label, "map", map_at_n(stage_lists, &relevant).map_err(wrap)?));
        reports.push(report(label, "mrr", mrr(stage_lists, &relevant).map_err(wrap)?));
        reports.push(report(
            label,
            "mace",
            mace(&prefs, stage_lists, catalog, cal.denominator).map_err(wrap)?,
        ));
    }
    write_reports(layout.ranking(mode, fold), &reports)?;
    Ok(FoldCalibration {
        prefs,
        lists,
        matrices,
        reports,
    })
}

/// Reads the stage matrices a previous `calibrate` wrote, PREF first.
pub fn read_matrices(
    cfg: &ExperimentConfig,
    layout: &Layout,
    mode: ScoreMode,
    fold: usize,
) -> Result<Vec<(String, DistributionMatrix)>> {
    stage_labels(cfg)
        .into_iter()
        .map(|label| {
            let m = DistributionMatrix::read_csv(layout.matrix(mode, fold, &label))?;
            Ok((label, m))
        })
        .collect()
}

/// Grid-searches every configured algorithm on the PREF matrix, refits the
/// chosen configuration (same seed) on each other stage, and reports
/// silhouette, group count and Jaccard against the PREF labeling.
pub fn analyze_fold(
    cfg: &ExperimentConfig,
    layout: &Layout,
    mode: ScoreMode,
    fold: usize,
    matrices: &[(String, DistributionMatrix)],
) -> Result<Vec<MetricReport>> {
    let Some((pref_label, pref)) = matrices.first() else {
        return Err(Error::InvalidInput("no matrices to analyze".into()).in_stage("analyze", fold, mode.name()));
    };
    let dir = layout.fold_dir(mode, fold);
    ensure_dir(&dir)?;
    let report = |alg: Algorithm, stage: &str, metric: &str, value: f64| MetricReport {
        dataset: cfg.dataset.name.clone(),
        score_mode: mode.name().to_string(),
        algorithm: alg.name().to_string(),
        stage: stage.to_string(),
        fold,
        metric: metric.to_string(),
        value,
    };

    let mut reports = Vec::new();
    let mut outcomes: Vec<SearchOutcome> = Vec::new();
    for &alg in &cfg.structure.algorithms {
        let wrap = |stage: &str| {
            let subject = format!("{alg} at {stage}");
            move |e: Error| e.in_stage("analyze", fold, subject)
        };
        let outcome = grid_search(alg, &cfg.structure.space, pref, structure_seed(cfg, mode, fold, alg))
            .map_err(wrap(pref_label))?;
        log::info!(
            "{mode} fold {fold}: {alg} picked {} (silhouette {:.4}, {} groups)",
            outcome.config,
            outcome.silhouette,
            outcome.labeling.n_groups()
        );
        write_labels(layout.labels(mode, fold, alg, pref_label), &outcome.labeling)?;
        reports.push(report(alg, pref_label, "silhouette", outcome.silhouette));
        reports.push(report(alg, pref_label, "n_groups", outcome.labeling.n_groups() as f64));

        let refits = matrices[1..]
            .par_iter()
            .map(|(label, m)| {
                let labeling = fit(&outcome.config, m, outcome.seed).map_err(wrap(label))?;
                let s = match silhouette(m, &labeling, Metric::Euclidean) {
                    Err(Error::SilhouetteUndefined(_)) => -1.0,
                    other => other.map_err(wrap(label))?,
                };
                let j = jaccard(&outcome.labeling, &labeling).map_err(wrap(label))?;
                Ok((label, labeling, s, j))
            })
            .collect::<Result<Vec<_>>>()?;
        for (label, labeling, s, j) in refits {
            write_labels(layout.labels(mode, fold, alg, label), &labeling)?;
            reports.push(report(alg, label, "silhouette", s));
            reports.push(report(alg, label, "n_groups", labeling.n_groups() as f64));
            reports.push(report(alg, label, "jaccard", j));
        }
        outcomes.push(outcome);
    }
    write_config_report(dir.join("configs.csv"), &outcomes)?;
    write_trials(dir.join("trials.csv"), &outcomes)?;
    write_reports(layout.structure(mode, fold), &reports)?;
    Ok(reports)
}

fn write_labels(path: PathBuf, labeling: &crate::structure::Labeling) -> Result<()> {
    ensure_parent(&path)?;
    labeling.write_csv(path)
}

/// Writes `algorithm,config,silhouette,n_groups` for every configuration
/// tried; `n_groups` is empty when the fit failed.
fn write_trials(path: PathBuf, outcomes: &[SearchOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(["algorithm", "config", "silhouette", "n_groups"])?;
    for o in outcomes {
        for t in &o.trials {
            w.write_record([
                t.config.algorithm().name().to_string(),
                t.config.to_string(),
                t.silhouette.to_string(),
                t.n_groups.map(|g| g.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))
}

/// Collects every fold's ranking and structure rows in (mode, fold) order,
/// writes `metrics.csv` and the fold-averaged figure files.
pub fn report(cfg: &ExperimentConfig, layout: &Layout) -> Result<Vec<PathBuf>> {
    let modes = cfg.score_mode.modes();
    let mut reports = Vec::new();
    for &mode in &modes {
        for fold in 0..cfg.folds {
            reports.extend(read_reports(layout.ranking(mode, fold))?);
            reports.extend(read_reports(layout.structure(mode, fold))?);
        }
    }
    emit_all(layout, &modes, &reports)
}

fn emit_all(layout: &Layout, modes: &[ScoreMode], reports: &[MetricReport]) -> Result<Vec<PathBuf>> {
    ensure_dir(layout.root())?;
    let mut outputs = vec![layout.metrics()];
    write_reports(layout.metrics(), reports)?;
    if modes.len() == 1 {
        outputs.extend(emit_plot_data(reports, layout.root(), "")?);
    } else {
        for &mode in modes {
            let subset: Vec<MetricReport> = reports.iter().filter(|r| r.score_mode == mode.name()).cloned().collect();
            outputs.extend(emit_plot_data(&subset, layout.root(), &format!("_{}", mode.name()))?);
        }
        let path = layout.root().join("ranking-modes.csv");
        write_ranking_modes(&path, reports, modes)?;
        outputs.push(path);
    }
    Ok(outputs)
}

/// What a full run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub reports: Vec<MetricReport>,
    pub outputs: Vec<PathBuf>,
    pub manifest: Manifest,
}

/// Runs every stage for every score mode and fold, then writes the reports
/// and `manifest.json`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let layout = Layout::new(&cfg.output_dir);
    let mut timings = Vec::new();
    let mut timed = |step: String, start: Instant| {
        timings.push(Timing {
            step,
            seconds: start.elapsed().as_secs_f64(),
        })
    };

    let start = Instant::now();
    let prepared = prepare(cfg)?;
    let mut outputs = write_cleaned(&layout, &prepared)?;
    timed("ingest".into(), start);

    let modes = cfg.score_mode.modes();
    let mut reports = Vec::new();
    let mut hyperparams = BTreeMap::new();
    for &mode in &modes {
        let start = Instant::now();
        let hp = tune(cfg, &layout, &prepared, mode)?;
        hyperparams.insert(mode.name().to_string(), hp);
        timed(format!("{mode}/tune"), start);
        for fold in 0..cfg.folds {
            let start = Instant::now();
            let cands = recommend_fold(cfg, &layout, &prepared, mode, fold, &hp)?;
            timed(format!("{mode}/fold-{fold}/recommend"), start);

            let start = Instant::now();
            let calibrated = calibrate_fold(cfg, &layout, &prepared, mode, fold, &cands)?;
            timed(format!("{mode}/fold-{fold}/calibrate"), start);

            let start = Instant::now();
            let structure = analyze_fold(cfg, &layout, mode, fold, &calibrated.matrices)?;
            timed(format!("{mode}/fold-{fold}/analyze"), start);

            reports.extend(calibrated.reports);
            reports.extend(structure);
        }
    }

    let start = Instant::now();
    outputs.extend(emit_all(&layout, &modes, &reports)?);
    timed("report".into(), start);

    let manifest = Manifest::new(cfg, &modes, prepared.summary(), hyperparams, timings, &outputs, layout.root());
    manifest.write(layout.manifest())?;
    outputs.push(layout.manifest());
    Ok(RunSummary {
        reports,
        outputs,
        manifest,
    })
}
