use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, ScoreMode};
use super::{folds_seed, structure_seed, train_seed, tune_seed};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::recommender::HyperParams;

/// Figure files and the metrics each one carries.
const FIGURES: [(&str, &[&str]); 4] = [
    ("fig-jaccard", &["jaccard"]),
    ("fig-silhouette", &["silhouette"]),
    ("fig-groups", &["n_groups"]),
    ("fig-ranking", &["map", "mrr", "mace"]),
];

/// Writes tidy `dataset,score_mode,algorithm,stage,fold,metric,value` rows.
pub fn write_reports(path: impl AsRef<Path>, reports: &[MetricReport]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    if reports.is_empty() {
        w.write_record(["dataset", "score_mode", "algorithm", "stage", "fold", "metric", "value"])?;
    }
    for r in reports {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<MetricReport>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

type RowKey = (String, String, String, String);

/// Fold values per (row, stage); rows and stages keep first-appearance order.
struct Table {
    rows: Vec<RowKey>,
    stages: Vec<String>,
    cells: BTreeMap<(usize, usize), Vec<f64>>,
}

impl Table {
    fn build<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> Self {
        let mut t = Table {
            rows: Vec::new(),
            stages: Vec::new(),
            cells: BTreeMap::new(),
        };
        for r in reports {
            let key = (r.dataset.clone(), r.score_mode.clone(), r.algorithm.clone(), r.metric.clone());
            let row = position_or_push(&mut t.rows, key);
            let stage = position_or_push(&mut t.stages, r.stage.clone());
            t.cells.entry((row, stage)).or_default().push(r.value);
        }
        t
    }

    fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = ["dataset", "score_mode", "algorithm", "metric"].map(String::from).to_vec();
        header.extend(self.stages.iter().cloned());
        header.extend(self.stages.iter().map(|s| format!("{s}_sd")));
        w.write_record(&header)?;
        for (i, (dataset, mode, alg, metric)) in self.rows.iter().enumerate() {
            let stats: Vec<Option<(f64, f64)>> = (0..self.stages.len())
                .map(|j| self.cells.get(&(i, j)).map(|v| mean_sd(v)))
                .collect();
            let mut record = vec![dataset.clone(), mode.clone(), alg.clone(), metric.clone()];
            record.extend(stats.iter().map(|s| s.map(|(m, _)| m.to_string()).unwrap_or_default()));
            record.extend(stats.iter().map(|s| s.map(|(_, sd)| sd.to_string()).unwrap_or_default()));
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

fn position_or_push<T: PartialEq>(v: &mut Vec<T>, x: T) -> usize {
    match v.iter().position(|y| *y == x) {
        Some(i) => i,
        None => {
            v.push(x);
            v.len() - 1
        }
    }
}

/// Writes one wide, fold-averaged file per figure into `dir`:
/// `dataset,score_mode,algorithm,metric,<stage>...,<stage>_sd...`, stages in
/// the order they first appear in `reports`. The standard deviation is the
/// sample one (0 for a single fold). Figures without rows are skipped.
pub fn emit_plot_data(reports: &[MetricReport], dir: &Path, suffix: &str) -> Result<Vec<PathBuf>> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("no metric reports to emit".into()));
    }
    let mut written = Vec::new();
    for (name, metrics) in FIGURES {
        let rows: Vec<&MetricReport> = reports.iter().filter(|r| metrics.contains(&r.metric.as_str())).collect();
        if rows.is_empty() {
            continue;
        }
        let path = dir.join(format!("{name}{suffix}.csv"));
        Table::build(rows).write(&path)?;
        written.push(path);
    }
    Ok(written)
}

/// Side-by-side fold means of the ranking metrics per score mode:
/// `dataset,metric,stage,<mode>...`.
pub fn write_ranking_modes(path: &Path, reports: &[MetricReport], modes: &[ScoreMode]) -> Result<()> {
    let ranking = FIGURES[3].1;
    let mut keys: Vec<(String, String, String)> = Vec::new();
    let mut cells: BTreeMap<(usize, &str), Vec<f64>> = BTreeMap::new();
    for r in reports.iter().filter(|r| ranking.contains(&r.metric.as_str())) {
        let k = position_or_push(&mut keys, (r.dataset.clone(), r.metric.clone(), r.stage.clone()));
        cells.entry((k, r.score_mode.as_str())).or_default().push(r.value);
    }
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<&str> = vec!["dataset", "metric", "stage"];
    header.extend(modes.iter().map(|m| m.name()));
    w.write_record(&header)?;
    for (k, (dataset, metric, stage)) in keys.iter().enumerate() {
        let mut record = vec![dataset.clone(), metric.clone(), stage.clone()];
        record.extend(modes.iter().map(|m| {
            cells
                .get(&(k, m.name()))
                .map(|v| mean_sd(v).0.to_string())
                .unwrap_or_default()
        }));
        w.write_record(&record)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    /// Genre axis of every matrix, in column order.
    pub genres: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub step: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub dataset: String,
    pub config_sha256: Option<String>,
    pub master_seed: u64,
    /// Derived seeds keyed by step (`folds`, `<mode>/tune`,
    /// `<mode>/fold-<f>/train`, `<mode>/fold-<f>/<algorithm>`).
    pub seeds: BTreeMap<String, u64>,
    pub hyperparams: BTreeMap<String, HyperParams>,
    pub data: DataSummary,
    pub timings: Vec<Timing>,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(
        cfg: &ExperimentConfig,
        modes: &[ScoreMode],
        data: DataSummary,
        hyperparams: BTreeMap<String, HyperParams>,
        timings: Vec<Timing>,
        outputs: &[PathBuf],
        root: &Path,
    ) -> Self {
        let mut seeds = BTreeMap::new();
        seeds.insert("folds".to_string(), folds_seed(cfg));
        for &mode in modes {
            seeds.insert(format!("{mode}/tune"), tune_seed(cfg, mode));
            for fold in 0..cfg.folds {
                seeds.insert(format!("{mode}/fold-{fold}/train"), train_seed(cfg, mode, fold));
                for &alg in &cfg.structure.algorithms {
                    seeds.insert(format!("{mode}/fold-{fold}/{alg}"), structure_seed(cfg, mode, fold, alg));
                }
            }
        }
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            dataset: cfg.dataset.name.clone(),
            config_sha256: cfg.source_hash.clone(),
            master_seed: cfg.seed,
            seeds,
            hyperparams,
            data,
            timings,
            outputs: outputs
                .iter()
                .map(|p| p.strip_prefix(root).unwrap_or(p).display().to_string())
                .collect(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::InvalidInput(e.to_string()))?;
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}
