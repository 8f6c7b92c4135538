use rand::seq::index;
use rand::Rng as _;

use super::distance::DistanceMatrix;
use super::linalg::{cholesky, mahalanobis_sq};
use crate::error::{Error, Result};
use crate::seed::Rng;

const MAX_SAMPLES: usize = 256;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Average path length of an unsuccessful search in a binary search tree of
/// `n` points.
pub(crate) fn average_path_length(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * ((n - 1.0).ln() + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

enum Node {
    Leaf {
        size: usize,
    },
    Split {
        feature: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn grow(rows: &[Vec<f64>], sample: Vec<usize>, limit: usize, rng: &mut Rng) -> Self {
        let mut tree = Tree { nodes: Vec::new() };
        tree.build(rows, sample, 0, limit, rng);
        tree
    }

    fn build(
        &mut self,
        rows: &[Vec<f64>],
        idx: Vec<usize>,
        depth: usize,
        limit: usize,
        rng: &mut Rng,
    ) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { size: idx.len() });
        if depth >= limit || idx.len() <= 1 {
            return id;
        }
        let dim = rows[idx[0]].len();
        let ranges: Vec<(usize, f64, f64)> = (0..dim)
            .filter_map(|f| {
                let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                    (lo.min(rows[i][f]), hi.max(rows[i][f]))
                });
                (lo < hi).then_some((f, lo, hi))
            })
            .collect();
        if ranges.is_empty() {
            return id;
        }
        let (feature, lo, hi) = ranges[rng.random_range(0..ranges.len())];
        let value = rng.random_range(lo..hi);
        // `<=` keeps both sides non-empty even when `value == lo`.
        let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][feature] <= value);
        let left = self.build(rows, l, depth + 1, limit, rng);
        let right = self.build(rows, r, depth + 1, limit, rng);
        self.nodes[id] = Node::Split {
            feature,
            value,
            left,
            right,
        };
        id
    }

    fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0.0;
        loop {
            match self.nodes[node] {
                Node::Leaf { size } => return depth + average_path_length(size),
                Node::Split {
                    feature,
                    value,
                    left,
                    right,
                } => {
                    node = if x[feature] <= value { left } else { right };
                    depth += 1.0;
                }
            }
        }
    }
}

/// Isolation-forest anomaly scores `2^(-E[h(x)] / c(ψ))` in (0, 1]; each
/// tree sees ψ = min(256, n) rows drawn without replacement and grows to
/// depth ⌈log2 ψ⌉.
pub(crate) fn isolation_scores(rows: &[Vec<f64>], n_estimators: usize, rng: &mut Rng) -> Vec<f64> {
    let n = rows.len();
    let psi = n.min(MAX_SAMPLES);
    if psi <= 1 {
        return vec![0.5; n];
    }
    let limit = (psi as f64).log2().ceil() as usize;
    let trees: Vec<Tree> = (0..n_estimators)
        .map(|_| {
            let sample = index::sample(rng, n, psi).into_vec();
            Tree::grow(rows, sample, limit, rng)
        })
        .collect();
    let c = average_path_length(psi);
    rows.iter()
        .map(|x| {
            let mean = trees.iter().map(|t| t.path_length(x)).sum::<f64>() / trees.len() as f64;
            (-mean / c).exp2()
        })
        .collect()
}

/// Local outlier factor with `k` nearest neighbors (self excluded, ties by
/// index).
pub(crate) fn lof_scores(d: &DistanceMatrix, k: usize) -> Result<Vec<f64>> {
    let n = d.n();
    if k == 0 || k >= n {
        return Err(Error::InvalidInput(format!(
            "n_neighbors = {k} must be between 1 and n - 1 ({})",
            n.saturating_sub(1)
        )));
    }
    let knn: Vec<Vec<usize>> = (0..n)
        .map(|p| {
            let mut others: Vec<usize> = (0..n).filter(|&o| o != p).collect();
            others.sort_by(|&a, &b| d.get(p, a).total_cmp(&d.get(p, b)).then(a.cmp(&b)));
            others.truncate(k);
            others
        })
        .collect();
    let kdist: Vec<f64> = (0..n).map(|p| d.get(p, knn[p][k - 1])).collect();
    let lrd: Vec<f64> = (0..n)
        .map(|p| {
            let reach: f64 = knn[p].iter().map(|&o| kdist[o].max(d.get(p, o))).sum::<f64>() / k as f64;
            1.0 / (reach + 1e-10)
        })
        .collect();
    Ok((0..n)
        .map(|p| knn[p].iter().map(|&o| lrd[o]).sum::<f64>() / k as f64 / lrd[p])
        .collect())
}

pub(crate) fn flag_above(scores: &[f64], threshold: f64) -> Vec<i64> {
    scores.iter().map(|&s| (s > threshold) as i64).collect()
}

/// Squared Mahalanobis distances under the empirical mean and (biased)
/// covariance. A singular covariance gets a small ridge before giving up.
pub(crate) fn mahalanobis_all(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i * d + j] += (r[i] - mean[i]) * (r[j] - mean[j]) / n;
            }
        }
    }
    let l = match cholesky(&cov, d) {
        Some(l) => l,
        None => {
            for i in 0..d {
                cov[i * d + i] += 1e-6;
            }
            cholesky(&cov, d).ok_or(Error::SingularCovariance)?
        }
    };
    Ok(rows
        .iter()
        .map(|r| {
            let diff: Vec<f64> = r.iter().zip(&mean).map(|(a, b)| a - b).collect();
            mahalanobis_sq(&l, d, &diff)
        })
        .collect())
}

/// Flags the `ceil(nu * n)` rows farthest from the center (ties by index).
pub(crate) fn envelope(rows: &[Vec<f64>], nu: f64) -> Result<Vec<i64>> {
    let dist = mahalanobis_all(rows)?;
    let n = rows.len();
    let m = ((nu * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| dist[b].total_cmp(&dist[a]).then(a.cmp(&b)));
    let mut labels = vec![0i64; n];
    for &i in &order[..m] {
        labels[i] = 1;
    }
    Ok(labels)
}
