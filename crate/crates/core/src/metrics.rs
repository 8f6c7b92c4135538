//! Group-quality, group-shift and ranking metrics.

use std::collections::{BTreeMap, BTreeSet};

use pathfinding::prelude::{kuhn_munkres, Matrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distribution::{genre_proportions, Denominator, DistributionMatrix, GenreAccumulator, GenreDistribution};
use crate::error::{Error, Result};
use crate::ingest::{GenreCatalog, ItemId, UserId};
use crate::recommender::RankedList;
use crate::structure::{DistanceMatrix, Labeling, Metric};

/// One tidy row of experiment output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dataset: String,
    pub score_mode: String,
    pub algorithm: String,
    pub stage: String,
    pub fold: usize,
    pub metric: String,
    pub value: f64,
}

/// Maps labels to dense group indices; noise (`-1`) is a group like any
/// other here.
fn group_index(labels: &[i64]) -> (Vec<usize>, usize) {
    let mut ids = BTreeMap::new();
    let idx = labels
        .iter()
        .map(|l| {
            let next = ids.len();
            *ids.entry(*l).or_insert(next)
        })
        .collect();
    (idx, ids.len())
}

/// Mean silhouette over all points for precomputed dissimilarities.
///
/// `a(i)` is the mean distance to the other members of `i`'s group, `b(i)`
/// the smallest mean distance to another group. Points alone in their group
/// score 0, as do points with `a = b = 0`.
pub fn silhouette_from_distances(d: &DistanceMatrix, labels: &[i64]) -> Result<f64> {
    let n = d.n();
    if labels.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} labels for {n} points",
            labels.len()
        )));
    }
    let (group, g) = group_index(labels);
    if g < 2 {
        return Err(Error::SilhouetteUndefined(g));
    }
    let mut size = vec![0usize; g];
    for &c in &group {
        size[c] += 1;
    }
    let per_point: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = group[i];
            if size[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; g];
            for (j, &dij) in d.row(i).iter().enumerate() {
                sums[group[j]] += dij;
            }
            let a = sums[own] / (size[own] - 1) as f64;
            let b = (0..g)
                .filter(|&c| c != own)
                .map(|c| sums[c] / size[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m == 0.0 {
                0.0
            } else {
                (b - a) / m
            }
        })
        .collect();
    Ok(per_point.iter().sum::<f64>() / n as f64)
}

pub fn silhouette(x: &DistributionMatrix, labeling: &Labeling, metric: Metric) -> Result<f64> {
    let d = crate::structure::pairwise_distances(x, metric);
    silhouette_from_distances(&d, labeling.labels())
}

/// Agreement of two labelings of the same users as `m / (2n - m)`, where
/// `m` counts users whose labels agree. With `align`, `b`'s labels are first
/// renamed to `a`'s by the matching of label pairs that maximizes `m`.
pub fn jaccard_labels(a: &[i64], b: &[i64], align: bool) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "labelings have {} and {} users",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n == 0 {
        return Ok(1.0);
    }
    let m = if align {
        let (ga, ka) = group_index(a);
        let (gb, kb) = group_index(b);
        let size = ka.max(kb);
        let mut counts = Matrix::new(size, size, 0i64);
        for (&x, &y) in ga.iter().zip(&gb) {
            counts[(x, y)] += 1;
        }
        kuhn_munkres(&counts).0 as usize
    } else {
        a.iter().zip(b).filter(|(x, y)| x == y).count()
    };
    Ok(m as f64 / (2 * n - m) as f64)
}

/// [`jaccard_labels`] for two fitted labelings; outlier labels are compared
/// as they are, clusterer labels after alignment.
pub fn jaccard(a: &Labeling, b: &Labeling) -> Result<f64> {
    if a.users() != b.users() {
        return Err(Error::InvalidInput("labelings cover different users".into()));
    }
    let binary = a.algorithm().is_outlier_detector() && b.algorithm().is_outlier_detector();
    jaccard_labels(a.labels(), b.labels(), !binary)
}

fn check_lists(lists: &[RankedList]) -> Result<()> {
    if lists.is_empty() {
        return Err(Error::InvalidInput("no recommendation lists".into()));
    }
    if let Some(l) = lists.iter().find(|l| l.is_empty()) {
        return Err(Error::InvalidInput(format!("empty list for user {}", l.owner)));
    }
    Ok(())
}

fn hit_ranks<'a>(
    list: &'a RankedList,
    relevant: &'a BTreeMap<UserId, BTreeSet<ItemId>>,
) -> impl Iterator<Item = usize> + 'a {
    let rel = relevant.get(&list.owner);
    list.items()
        .enumerate()
        .filter(move |(_, item)| rel.is_some_and(|r| r.contains(item)))
        .map(|(i, _)| i + 1)
}

/// Mean over users of the average precision at the ranks of relevant hits.
/// Users without hits contribute 0.
pub fn map_at_n(lists: &[RankedList], relevant: &BTreeMap<UserId, BTreeSet<ItemId>>) -> Result<f64> {
    check_lists(lists)?;
    let total: f64 = lists
        .iter()
        .map(|l| {
            let ranks: Vec<usize> = hit_ranks(l, relevant).collect();
            if ranks.is_empty() {
                return 0.0;
            }
            ranks
                .iter()
                .enumerate()
                .map(|(h, &r)| (h + 1) as f64 / r as f64)
                .sum::<f64>()
                / ranks.len() as f64
        })
        .sum();
    Ok(total / lists.len() as f64)
}

/// Mean over users of `1 / rank` of the first relevant item (0 if none).
pub fn mrr(lists: &[RankedList], relevant: &BTreeMap<UserId, BTreeSet<ItemId>>) -> Result<f64> {
    check_lists(lists)?;
    let total: f64 = lists
        .iter()
        .map(|l| hit_ranks(l, relevant).next().map_or(0.0, |r| 1.0 / r as f64))
        .sum();
    Ok(total / lists.len() as f64)
}

/// Mean absolute calibration error.
///
/// For each user and each prefix length `k = 1..N`, the mean of
/// `|P(g) - Q_k(g)|` over the genres present in `P` or in the full list;
/// averaged over prefixes, then over users.
pub fn mace(
    prefs: &BTreeMap<UserId, GenreDistribution>,
    lists: &[RankedList],
    catalog: &GenreCatalog,
    mode: Denominator,
) -> Result<f64> {
    check_lists(lists)?;
    let width = catalog.genre_count();
    let mut total = 0.0;
    for list in lists {
        let p = prefs
            .get(&list.owner)
            .ok_or_else(|| Error::InvalidInput(format!("no preference distribution for user {}", list.owner)))?;
        if p.len() != width {
            return Err(Error::AxisMismatch {
                left: p.len(),
                right: width,
            });
        }
        let mut acc = GenreAccumulator::new(width);
        let mut prefixes = Vec::with_capacity(list.len());
        for &(item, w) in list.entries() {
            acc.add(&genre_proportions(item, catalog)?, w);
            prefixes.push(acc.values(mode));
        }
        let full = prefixes.last().unwrap();
        let support: Vec<usize> = (0..width).filter(|&g| p.get(g) > 0.0 || full[g] > 0.0).collect();
        if support.is_empty() {
            continue;
        }
        let ace_sum: f64 = prefixes
            .iter()
            .map(|q| support.iter().map(|&g| (p.get(g) - q[g]).abs()).sum::<f64>() / support.len() as f64)
            .sum();
        total += ace_sum / prefixes.len() as f64;
    }
    Ok(total / lists.len() as f64)
}
