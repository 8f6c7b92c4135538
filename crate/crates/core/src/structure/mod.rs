//! Structure learners over distribution matrices.
//!
//! Every learner turns the rows of a [`DistributionMatrix`] into a
//! [`Labeling`]. Clusterers produce a partition with labels `0..n_groups`,
//! density methods may additionally mark points as noise (`-1`), and outlier
//! detectors label each user `0` (inlier) or `1` (outlier).

mod density;
mod distance;
mod hierarchical;
mod linalg;
mod mixture;
mod outlier;
mod partitional;
mod search;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::distribution::DistributionMatrix;
use crate::error::{Error, Result};
use crate::ingest::UserId;

pub use density::{optics_ordering, OpticsOrdering};
pub use distance::{pairwise_distances, DistanceMatrix, Metric};
pub use search::{grid_search, write_config_report, SearchOutcome, SearchSpace, Trial};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Algorithm {
    KMeans,
    Bisecting,
    Fuzzy,
    Agglomerative,
    Dbscan,
    Optics,
    GaussianMixture,
    IsolationForest,
    Lof,
    Envelope,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::KMeans,
        Algorithm::Bisecting,
        Algorithm::Fuzzy,
        Algorithm::Agglomerative,
        Algorithm::Dbscan,
        Algorithm::Optics,
        Algorithm::GaussianMixture,
        Algorithm::IsolationForest,
        Algorithm::Lof,
        Algorithm::Envelope,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "kmeans",
            Algorithm::Bisecting => "bisecting",
            Algorithm::Fuzzy => "fuzzy",
            Algorithm::Agglomerative => "agglomerative",
            Algorithm::Dbscan => "dbscan",
            Algorithm::Optics => "optics",
            Algorithm::GaussianMixture => "gmm",
            Algorithm::IsolationForest => "iforest",
            Algorithm::Lof => "lof",
            Algorithm::Envelope => "envelope",
        }
    }

    /// Binary inlier/outlier labelers; their labels are not renumbered.
    pub fn is_outlier_detector(self) -> bool {
        matches!(
            self,
            Algorithm::IsolationForest | Algorithm::Lof | Algorithm::Envelope
        )
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

impl TryFrom<String> for Algorithm {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Algorithm> for String {
    fn from(a: Algorithm) -> String {
        a.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionalMethod {
    KMeans,
    Bisecting,
    Fuzzy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMethod {
    Dbscan,
    Optics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum OutlierParams {
    /// Outlier iff the anomaly score exceeds `threshold`.
    IsolationForest { n_estimators: usize, threshold: f64 },
    /// Outlier iff the local outlier factor exceeds `threshold`.
    Lof {
        n_neighbors: usize,
        metric: Metric,
        threshold: f64,
    },
    /// The `ceil(nu * n)` points farthest from the center are outliers.
    Envelope { nu: f64 },
}

/// One point of a search space: an algorithm plus its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Config {
    Partitional {
        method: PartitionalMethod,
        n_clusters: usize,
    },
    Agglomerative {
        n_clusters: usize,
    },
    Density {
        method: DensityMethod,
        eps: f64,
        min_samples: usize,
        metric: Metric,
    },
    GaussianMixture {
        n_components: usize,
    },
    Outlier(OutlierParams),
}

impl Config {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            Config::Partitional { method, .. } => match method {
                PartitionalMethod::KMeans => Algorithm::KMeans,
                PartitionalMethod::Bisecting => Algorithm::Bisecting,
                PartitionalMethod::Fuzzy => Algorithm::Fuzzy,
            },
            Config::Agglomerative { .. } => Algorithm::Agglomerative,
            Config::Density { method, .. } => match method {
                DensityMethod::Dbscan => Algorithm::Dbscan,
                DensityMethod::Optics => Algorithm::Optics,
            },
            Config::GaussianMixture { .. } => Algorithm::GaussianMixture,
            Config::Outlier(p) => match p {
                OutlierParams::IsolationForest { .. } => Algorithm::IsolationForest,
                OutlierParams::Lof { .. } => Algorithm::Lof,
                OutlierParams::Envelope { .. } => Algorithm::Envelope,
            },
        }
    }

    /// `(name, value)` pairs in a fixed order, for reports.
    pub fn params(&self) -> Vec<(&'static str, String)> {
        match *self {
            Config::Partitional { n_clusters, .. } | Config::Agglomerative { n_clusters } => {
                vec![("n_clusters", n_clusters.to_string())]
            }
            Config::Density {
                eps,
                min_samples,
                metric,
                ..
            } => vec![
                ("eps", eps.to_string()),
                ("min_samples", min_samples.to_string()),
                ("metric", metric.to_string()),
            ],
            Config::GaussianMixture { n_components } => {
                vec![("n_components", n_components.to_string())]
            }
            Config::Outlier(OutlierParams::IsolationForest {
                n_estimators,
                threshold,
            }) => vec![
                ("n_estimators", n_estimators.to_string()),
                ("threshold", threshold.to_string()),
            ],
            Config::Outlier(OutlierParams::Lof {
                n_neighbors,
                metric,
                threshold,
            }) => vec![
                ("n_neighbors", n_neighbors.to_string()),
                ("metric", metric.to_string()),
                ("threshold", threshold.to_string()),
            ],
            Config::Outlier(OutlierParams::Envelope { nu }) => vec![("nu", nu.to_string())],
        }
    }
}

impl fmt::Display for Config {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.algorithm())?;
        for (i, (k, v)) in self.params().iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}={v}")?;
        }
        f.write_str(")")
    }
}

/// Per-user group labels produced by one fitted configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeling {
    users: Vec<UserId>,
    labels: Vec<i64>,
    n_groups: usize,
    config: Config,
}

impl Labeling {
    /// Clusterer labels are renumbered by first appearance (noise stays
    /// `-1`); outlier-detector labels are kept as given.
    pub fn new(users: Vec<UserId>, raw: Vec<i64>, config: Config) -> Result<Self> {
        if users.len() != raw.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} users",
                raw.len(),
                users.len()
            )));
        }
        let labels = if config.algorithm().is_outlier_detector() {
            raw
        } else {
            compact(&raw)
        };
        let n_groups = labels
            .iter()
            .filter(|&&l| l >= 0)
            .collect::<std::collections::BTreeSet<_>>()
            .len();
        Ok(Self {
            users,
            labels,
            n_groups,
            config,
        })
    }

    pub fn users(&self) -> &[UserId] {
        &self.users
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    /// Distinct non-noise labels.
    pub fn n_groups(&self) -> usize {
        self.n_groups
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    pub fn algorithm(&self) -> Algorithm {
        self.config.algorithm()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Writes `user_id,label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["user_id", "label"])?;
        for (u, l) in self.users.iter().zip(&self.labels) {
            w.write_record([u.to_string(), l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

/// Reads a `user_id,label` file back.
pub fn read_labels_csv(path: impl AsRef<Path>) -> Result<Vec<(UserId, i64)>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (row, rec) in r.deserialize::<(UserId, i64)>().enumerate() {
        out.push(rec.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: row + 2,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Renumbers non-negative labels `0, 1, ...` in order of first appearance;
/// negative labels become `-1`.
pub(crate) fn compact(raw: &[i64]) -> Vec<i64> {
    let mut map = BTreeMap::new();
    raw.iter()
        .map(|&l| {
            if l < 0 {
                -1
            } else {
                let next = map.len() as i64;
                *map.entry(l).or_insert(next)
            }
        })
        .collect()
}

pub(crate) fn rows_of(x: &DistributionMatrix) -> Vec<Vec<f64>> {
    x.data().rows().into_iter().map(|r| r.to_vec()).collect()
}

fn check_k(k: usize, n: usize, what: &str) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "{what} = {k} must be between 1 and the number of users ({n})"
        )));
    }
    Ok(())
}

/// K-means, bisecting k-means or fuzzy c-means with `k` clusters.
pub fn fit_partitional(
    method: PartitionalMethod,
    k: usize,
    x: &DistributionMatrix,
    seed: u64,
) -> Result<Labeling> {
    check_k(k, x.nrows(), "n_clusters")?;
    let rows = rows_of(x);
    let mut rng = crate::seed::rng(seed, &[]);
    let raw = match method {
        PartitionalMethod::KMeans => partitional::kmeans(&rows, k, &mut rng).labels,
        PartitionalMethod::Bisecting => partitional::bisecting(&rows, k, &mut rng),
        PartitionalMethod::Fuzzy => partitional::fuzzy_cmeans(&rows, k, &mut rng).labels(),
    };
    Labeling::new(
        x.users().to_vec(),
        raw,
        Config::Partitional {
            method,
            n_clusters: k,
        },
    )
}

/// Average-linkage agglomerative clustering on euclidean distances.
pub fn fit_agglomerative(k: usize, x: &DistributionMatrix) -> Result<Labeling> {
    check_k(k, x.nrows(), "n_clusters")?;
    let d = DistanceMatrix::compute(&rows_of(x), Metric::Euclidean);
    Labeling::new(
        x.users().to_vec(),
        hierarchical::average_linkage(&d, k),
        Config::Agglomerative { n_clusters: k },
    )
}

/// DBSCAN, or OPTICS with DBSCAN-equivalent extraction at `eps`.
pub fn fit_density(
    method: DensityMethod,
    eps: f64,
    min_samples: usize,
    metric: Metric,
    x: &DistributionMatrix,
) -> Result<Labeling> {
    let d = DistanceMatrix::compute(&rows_of(x), metric);
    fit_density_with(method, eps, min_samples, &d, x.users())
}

fn fit_density_with(
    method: DensityMethod,
    eps: f64,
    min_samples: usize,
    d: &DistanceMatrix,
    users: &[UserId],
) -> Result<Labeling> {
    check_density(eps, min_samples)?;
    let raw = match method {
        DensityMethod::Dbscan => density::dbscan(d, eps, min_samples),
        DensityMethod::Optics => optics_ordering(d, min_samples).extract(eps),
    };
    Labeling::new(
        users.to_vec(),
        raw,
        Config::Density {
            method,
            eps,
            min_samples,
            metric: d.metric(),
        },
    )
}

fn check_density(eps: f64, min_samples: usize) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput(format!("eps must be positive, got {eps}")));
    }
    if min_samples == 0 {
        return Err(Error::InvalidInput("min_samples must be at least 1".into()));
    }
    Ok(())
}

/// Gaussian mixture with full covariances fitted by EM.
pub fn fit_gaussian_mixture(
    n_components: usize,
    x: &DistributionMatrix,
    seed: u64,
) -> Result<Labeling> {
    check_k(n_components, x.nrows(), "n_components")?;
    let rows = rows_of(x);
    let mut rng = crate::seed::rng(seed, &[]);
    let raw = mixture::fit(&rows, n_components, &mut rng)?;
    Labeling::new(
        x.users().to_vec(),
        raw,
        Config::GaussianMixture { n_components },
    )
}

/// Isolation forest, local outlier factor or elliptic envelope.
pub fn fit_outlier(params: OutlierParams, x: &DistributionMatrix, seed: u64) -> Result<Labeling> {
    let rows = rows_of(x);
    let n = rows.len();
    let raw = match params {
        OutlierParams::IsolationForest {
            n_estimators,
            threshold,
        } => {
            if n_estimators == 0 {
                return Err(Error::InvalidInput("n_estimators must be at least 1".into()));
            }
            let mut rng = crate::seed::rng(seed, &[]);
            let scores = outlier::isolation_scores(&rows, n_estimators, &mut rng);
            outlier::flag_above(&scores, threshold)
        }
        OutlierParams::Lof {
            n_neighbors,
            metric,
            threshold,
        } => {
            let d = DistanceMatrix::compute(&rows, metric);
            let scores = outlier::lof_scores(&d, n_neighbors)?;
            outlier::flag_above(&scores, threshold)
        }
        OutlierParams::Envelope { nu } => {
            if !(nu > 0.0 && nu <= 0.5) {
                return Err(Error::InvalidInput(format!("nu must be in (0, 0.5], got {nu}")));
            }
            if n == 0 {
                return Err(Error::InvalidInput("no users to fit".into()));
            }
            outlier::envelope(&rows, nu)?
        }
    };
    Labeling::new(x.users().to_vec(), raw, Config::Outlier(params))
}

/// Fits any configuration. `seed` only matters for randomized learners.
pub fn fit(config: &Config, x: &DistributionMatrix, seed: u64) -> Result<Labeling> {
    match *config {
        Config::Partitional { method, n_clusters } => fit_partitional(method, n_clusters, x, seed),
        Config::Agglomerative { n_clusters } => fit_agglomerative(n_clusters, x),
        Config::Density {
            method,
            eps,
            min_samples,
            metric,
        } => fit_density(method, eps, min_samples, metric, x),
        Config::GaussianMixture { n_components } => fit_gaussian_mixture(n_components, x, seed),
        Config::Outlier(p) => fit_outlier(p, x, seed),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::Rng as _;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn matrix(rows: &[Vec<f64>]) -> DistributionMatrix {
        let g = rows.first().map_or(0, Vec::len);
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        DistributionMatrix::anonymous(Array2::from_shape_vec((rows.len(), g), flat).unwrap())
    }

    /// `per_blob` points around each of two centers far apart in `dim`
    /// dimensions; the first half of the rows is blob 0.
    pub(crate) fn two_blobs(per_blob: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = crate::seed::rng(seed, &[]);
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rows = Vec::new();
        for c in [0.0, 1.0] {
            for _ in 0..per_blob {
                rows.push((0..dim).map(|_| c + noise.sample(&mut rng)).collect());
            }
        }
        rows
    }

    pub(crate) fn same_partition(a: &[i64], b: &[i64]) -> bool {
        a.len() == b.len()
            && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn compact_renumbers_by_first_appearance() {
        assert_eq!(compact(&[5, 5, 2, -1, 9, 2]), vec![0, 0, 1, -1, 2, 1]);
    }

    #[test]
    fn every_clusterer_recovers_two_blobs() {
        let rows = two_blobs(20, 3, 1);
        let truth: Vec<i64> = (0..40).map(|i| (i >= 20) as i64).collect();
        let x = matrix(&rows);
        for m in [
            PartitionalMethod::KMeans,
            PartitionalMethod::Bisecting,
            PartitionalMethod::Fuzzy,
        ] {
            let l = fit_partitional(m, 2, &x, 3).unwrap();
            assert!(same_partition(l.labels(), &truth), "{m:?}");
        }
        assert!(same_partition(fit_agglomerative(2, &x).unwrap().labels(), &truth));
        assert!(same_partition(fit_gaussian_mixture(2, &x, 3).unwrap().labels(), &truth));
        for m in [DensityMethod::Dbscan, DensityMethod::Optics] {
            let l = fit_density(m, 0.2, 3, Metric::Euclidean, &x).unwrap();
            assert!(same_partition(l.labels(), &truth), "{m:?}");
        }
    }

    #[test]
    fn k_equal_n_gives_singletons() {
        let mut rng = crate::seed::rng(4, &[]);
        let rows: Vec<Vec<f64>> = (0..7).map(|_| (0..2).map(|_| rng.random::<f64>()).collect()).collect();
        let x = matrix(&rows);
        let singletons: Vec<i64> = (0..7).collect();
        for m in [PartitionalMethod::KMeans, PartitionalMethod::Bisecting] {
            assert_eq!(fit_partitional(m, 7, &x, 0).unwrap().labels(), &singletons[..]);
        }
        assert_eq!(fit_agglomerative(7, &x).unwrap().labels(), &singletons[..]);
        assert_eq!(fit_agglomerative(1, &x).unwrap().n_groups(), 1);
    }

    #[test]
    fn too_many_clusters_is_an_error() {
        let x = matrix(&[vec![0.0], vec![1.0]]);
        assert!(fit_partitional(PartitionalMethod::KMeans, 3, &x, 0).is_err());
        assert!(fit_agglomerative(3, &x).is_err());
        assert!(fit_gaussian_mixture(3, &x, 0).is_err());
    }

    #[test]
    fn duplicates_share_a_label() {
        let rows = vec![
            vec![0.1, 0.2],
            vec![0.9, 0.8],
            vec![0.1, 0.2],
            vec![0.5, 0.5],
            vec![0.9, 0.8],
        ];
        let x = matrix(&rows);
        let configs = [
            Config::Partitional {
                method: PartitionalMethod::KMeans,
                n_clusters: 3,
            },
            Config::Partitional {
                method: PartitionalMethod::Bisecting,
                n_clusters: 3,
            },
            Config::Partitional {
                method: PartitionalMethod::Fuzzy,
                n_clusters: 3,
            },
            Config::Agglomerative { n_clusters: 3 },
        ];
        for c in configs {
            let l = fit(&c, &x, 11).unwrap();
            assert_eq!(l.labels()[0], l.labels()[2], "{c}");
            assert_eq!(l.labels()[1], l.labels()[4], "{c}");
        }
    }

    #[test]
    fn gaussian_mixture_single_component_and_determinism() {
        let rows = two_blobs(15, 2, 8);
        let x = matrix(&rows);
        let one = fit_gaussian_mixture(1, &x, 0).unwrap();
        assert!(one.labels().iter().all(|&l| l == 0));
        assert_eq!(
            fit_gaussian_mixture(3, &x, 5).unwrap(),
            fit_gaussian_mixture(3, &x, 5).unwrap()
        );
    }

    #[test]
    fn outlier_labels_are_binary_and_kept() {
        let mut rows = two_blobs(10, 2, 2);
        rows.push(vec![40.0, 40.0]);
        let x = matrix(&rows);
        let l = fit_outlier(OutlierParams::Envelope { nu: 0.05 }, &x, 0).unwrap();
        assert_eq!(l.labels()[20], 1);
        assert!(l.labels().iter().all(|&v| v == 0 || v == 1));
        assert_eq!(l.labels().iter().filter(|&&v| v == 1).count(), 2);
    }

    #[test]
    fn labeling_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        let l = Labeling::new(vec![4, 9], vec![-1, 3], Config::Agglomerative { n_clusters: 1 }).unwrap();
        l.write_csv(&path).unwrap();
        assert_eq!(read_labels_csv(&path).unwrap(), vec![(4, -1), (9, 0)]);
    }

    #[test]
    fn names_parse_back() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
    }
}
