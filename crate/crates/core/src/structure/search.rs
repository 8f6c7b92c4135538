use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::density::{dbscan, optics_ordering};
use super::distance::{DistanceMatrix, Metric};
use super::outlier::{flag_above, lof_scores};
use super::{
    check_density, fit, rows_of, Algorithm, Config, DensityMethod, Labeling, OutlierParams,
    PartitionalMethod,
};
use crate::distribution::DistributionMatrix;
use crate::error::{Error, Result};
use crate::metrics::silhouette_from_distances;
use crate::seed;

const PRIMES: [usize; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

fn one_and_primes() -> Vec<usize> {
    std::iter::once(1).chain(PRIMES).collect()
}

/// Candidate values per hyperparameter. Each algorithm takes the cartesian
/// product of the lists it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchSpace {
    pub n_clusters: Vec<usize>,
    pub n_components: Vec<usize>,
    pub epsilon: Vec<f64>,
    pub min_samples: Vec<usize>,
    pub metric: Vec<Metric>,
    pub n_estimators: Vec<usize>,
    pub n_neighbors: Vec<usize>,
    pub nu: Vec<f64>,
    pub iforest_threshold: f64,
    pub lof_threshold: f64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            n_clusters: PRIMES.to_vec(),
            n_components: one_and_primes(),
            epsilon: (1..=11).map(|i| i as f64 / 20.0).collect(),
            min_samples: PRIMES.to_vec(),
            metric: Metric::ALL.to_vec(),
            n_estimators: one_and_primes(),
            n_neighbors: one_and_primes(),
            nu: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5],
            iforest_threshold: 0.5,
            lof_threshold: 1.5,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_clusters", &self.n_clusters),
            ("n_components", &self.n_components),
            ("min_samples", &self.min_samples),
            ("n_estimators", &self.n_estimators),
            ("n_neighbors", &self.n_neighbors),
        ];
        for (name, values) in counts {
            if values.contains(&0) {
                return Err(Error::Config(format!("{name} values must be at least 1")));
            }
        }
        if let Some(e) = self.epsilon.iter().find(|e| !(**e > 0.0)) {
            return Err(Error::Config(format!("epsilon {e} must be positive")));
        }
        if let Some(nu) = self.nu.iter().find(|nu| !(**nu > 0.0 && **nu <= 0.5)) {
            return Err(Error::Config(format!("nu {nu} outside (0, 0.5]")));
        }
        if !self.iforest_threshold.is_finite() || !self.lof_threshold.is_finite() {
            return Err(Error::Config("outlier thresholds must be finite".into()));
        }
        Ok(())
    }

    /// Every configuration of `algorithm`, in enumeration order. Density
    /// methods vary epsilon slowest and metric fastest.
    pub fn configs(&self, algorithm: Algorithm) -> Vec<Config> {
        let partitional = |method| {
            self.n_clusters
                .iter()
                .map(|&n_clusters| Config::Partitional { method, n_clusters })
                .collect()
        };
        let density = |method| {
            let mut out = Vec::new();
            for &eps in &self.epsilon {
                for &min_samples in &self.min_samples {
                    for &metric in &self.metric {
                        out.push(Config::Density {
                            method,
                            eps,
                            min_samples,
                            metric,
                        });
                    }
                }
            }
            out
        };
        match algorithm {
            Algorithm::KMeans => partitional(PartitionalMethod::KMeans),
            Algorithm::Bisecting => partitional(PartitionalMethod::Bisecting),
            Algorithm::Fuzzy => partitional(PartitionalMethod::Fuzzy),
            Algorithm::Agglomerative => self
                .n_clusters
                .iter()
                .map(|&n_clusters| Config::Agglomerative { n_clusters })
                .collect(),
            Algorithm::Dbscan => density(DensityMethod::Dbscan),
            Algorithm::Optics => density(DensityMethod::Optics),
            Algorithm::GaussianMixture => self
                .n_components
                .iter()
                .map(|&n_components| Config::GaussianMixture { n_components })
                .collect(),
            Algorithm::IsolationForest => self
                .n_estimators
                .iter()
                .map(|&n_estimators| {
                    Config::Outlier(OutlierParams::IsolationForest {
                        n_estimators,
                        threshold: self.iforest_threshold,
                    })
                })
                .collect(),
            Algorithm::Lof => {
                let mut out = Vec::new();
                for &n_neighbors in &self.n_neighbors {
                    for &metric in &self.metric {
                        out.push(Config::Outlier(OutlierParams::Lof {
                            n_neighbors,
                            metric,
                            threshold: self.lof_threshold,
                        }));
                    }
                }
                out
            }
            Algorithm::Envelope => self
                .nu
                .iter()
                .map(|&nu| Config::Outlier(OutlierParams::Envelope { nu }))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trial {
    pub config: Config,
    pub seed: u64,
    /// -1 when the labeling has fewer than two groups or the fit failed.
    pub silhouette: f64,
    /// `None` when the configuration could not be fit.
    pub n_groups: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct SearchOutcome {
    pub config: Config,
    /// Seed the chosen configuration was fitted with; refitting it on other
    /// matrices with this seed keeps stages comparable.
    pub seed: u64,
    pub labeling: Labeling,
    pub silhouette: f64,
    pub trials: Vec<Trial>,
}

fn metric_of(c: &Config) -> Option<Metric> {
    match *c {
        Config::Density { metric, .. } | Config::Outlier(OutlierParams::Lof { metric, .. }) => Some(metric),
        _ => None,
    }
}

fn score(euclid: &DistanceMatrix, raw: Result<Vec<i64>>, config: &Config) -> (f64, Option<usize>) {
    match raw {
        Ok(labels) => {
            let groups = labels.iter().filter(|&&l| l >= 0).collect::<BTreeSet<_>>().len();
            // Fewer than two groups (noise included) has no silhouette.
            let s = silhouette_from_distances(euclid, &labels).unwrap_or(-1.0);
            (s, Some(groups))
        }
        Err(e) => {
            log::debug!("skipping {config}: {e}");
            (-1.0, None)
        }
    }
}

/// Labels for configurations sharing one distance matrix.
fn metric_labels(config: &Config, d: &DistanceMatrix, optics: &BTreeMap<usize, super::OpticsOrdering>) -> Result<Vec<i64>> {
    match *config {
        Config::Density {
            method,
            eps,
            min_samples,
            ..
        } => {
            check_density(eps, min_samples)?;
            Ok(match method {
                DensityMethod::Dbscan => dbscan(d, eps, min_samples),
                DensityMethod::Optics => optics[&min_samples].extract(eps),
            })
        }
        Config::Outlier(OutlierParams::Lof {
            n_neighbors,
            threshold,
            ..
        }) => Ok(flag_above(&lof_scores(d, n_neighbors)?, threshold)),
        _ => unreachable!("not a metric configuration"),
    }
}

/// Fits every configuration of `algorithm` in `space` and keeps the one
/// whose labeling has the highest mean (euclidean) silhouette, the earliest
/// on ties. Configurations that cannot be fit, or yield fewer than two
/// groups, score -1.
pub fn grid_search(
    algorithm: Algorithm,
    space: &SearchSpace,
    x: &DistributionMatrix,
    seed: u64,
) -> Result<SearchOutcome> {
    space.validate()?;
    let configs = space.configs(algorithm);
    if configs.is_empty() {
        return Err(Error::Config(format!("search space has no values for {algorithm}")));
    }
    let rows = rows_of(x);
    let euclid = DistanceMatrix::compute(&rows, Metric::Euclidean);
    let seeds: Vec<u64> = (0..configs.len()).map(|i| seed::derive(seed, &[i as u64])).collect();
    let mut scores = vec![(-1.0, None); configs.len()];

    let mut by_metric: BTreeMap<Metric, Vec<usize>> = BTreeMap::new();
    let mut plain = Vec::new();
    for (i, c) in configs.iter().enumerate() {
        match metric_of(c) {
            Some(m) => by_metric.entry(m).or_default().push(i),
            None => plain.push(i),
        }
    }

    let out: Vec<(f64, Option<usize>)> = plain
        .par_iter()
        .map(|&i| {
            let raw = fit(&configs[i], x, seeds[i]).map(|l| l.labels().to_vec());
            score(&euclid, raw, &configs[i])
        })
        .collect();
    for (&i, s) in plain.iter().zip(out) {
        scores[i] = s;
    }

    // One distance matrix alive at a time.
    for (metric, idx) in by_metric {
        let d = DistanceMatrix::compute(&rows, metric);
        let optics: BTreeMap<usize, super::OpticsOrdering> = if algorithm == Algorithm::Optics {
            let needed: BTreeSet<usize> = idx
                .iter()
                .filter_map(|&i| match configs[i] {
                    Config::Density { min_samples, .. } if min_samples > 0 => Some(min_samples),
                    _ => None,
                })
                .collect();
            needed
                .into_par_iter()
                .map(|ms| (ms, optics_ordering(&d, ms)))
                .collect::<Vec<_>>()
                .into_iter()
                .collect()
        } else {
            BTreeMap::new()
        };
        let out: Vec<(f64, Option<usize>)> = idx
            .par_iter()
            .map(|&i| score(&euclid, metric_labels(&configs[i], &d, &optics), &configs[i]))
            .collect();
        for (&i, s) in idx.iter().zip(out) {
            scores[i] = s;
        }
    }

    let trials: Vec<Trial> = configs
        .iter()
        .zip(&seeds)
        .zip(&scores)
        .map(|((c, &s), &(silhouette, n_groups))| Trial {
            config: *c,
            seed: s,
            silhouette,
            n_groups,
        })
        .collect();
    let failed = trials.iter().filter(|t| t.n_groups.is_none()).count();
    if failed > 0 {
        log::warn!("{algorithm}: {failed} of {} configurations could not be fit", trials.len());
    }
    let best = trials
        .iter()
        .enumerate()
        .filter(|(_, t)| t.n_groups.is_some())
        .fold(None::<(usize, f64)>, |acc, (i, t)| match acc {
            Some((_, s)) if s >= t.silhouette => acc,
            _ => Some((i, t.silhouette)),
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::InvalidInput(format!("no configuration of {algorithm} could be fit")))?;
    let chosen = &trials[best];
    if chosen.silhouette <= -1.0 {
        log::warn!("{algorithm}: every configuration is degenerate; keeping {}", chosen.config);
    }
    let labeling = fit(&chosen.config, x, chosen.seed)?;
    Ok(SearchOutcome {
        config: chosen.config,
        seed: chosen.seed,
        silhouette: chosen.silhouette,
        labeling,
        trials,
    })
}

/// Writes `algorithm,parameter,value,silhouette`, one row per parameter of
/// each chosen configuration.
pub fn write_config_report(path: impl AsRef<Path>, outcomes: &[SearchOutcome]) -> Result<()> {
    let mut w = csv::Writer::from_path(path.as_ref())?;
    w.write_record(["algorithm", "parameter", "value", "silhouette"])?;
    for o in outcomes {
        for (name, value) in o.config.params() {
            w.write_record([
                o.config.algorithm().name(),
                name,
                &value,
                &o.silhouette.to_string(),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io(path.as_ref(), e))
}
