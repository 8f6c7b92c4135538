use rand::Rng as _;

use super::distance::{euclidean, squared_euclidean};
use crate::seed::Rng;

const MAX_ITER: usize = 300;
const TOL: f64 = 1e-6;

pub(crate) struct KMeansFit {
    pub labels: Vec<i64>,
    // Read by the tests.
    #[cfg_attr(not(test), allow(dead_code))]
    pub centroids: Vec<Vec<f64>>,
    #[cfg_attr(not(test), allow(dead_code))]
    pub inertia: f64,
    /// Inertia after every assignment step.
    #[cfg_attr(not(test), allow(dead_code))]
    pub history: Vec<f64>,
}

/// Nearest centroid (lowest index on ties) and its squared distance.
fn nearest(row: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.iter().enumerate() {
        let d = squared_euclidean(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// k-means++ seeding: the first center uniformly at random, each further one
/// with probability proportional to its squared distance from the chosen set.
pub(crate) fn kmeans_pp(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = rows.iter().map(|r| squared_euclidean(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = d2.iter().rposition(|&d| d > 0.0).unwrap_or(n - 1);
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].clone();
        for (i, r) in rows.iter().enumerate() {
            d2[i] = d2[i].min(squared_euclidean(r, &c));
        }
        centers.push(c);
    }
    centers
}

/// Lloyd iterations from the given centroids until no centroid moves more
/// than the tolerance. An emptied cluster is moved onto the point farthest
/// from its own centroid.
pub(crate) fn lloyd(rows: &[Vec<f64>], mut centroids: Vec<Vec<f64>>) -> KMeansFit {
    let k = centroids.len();
    let dim = rows.first().map_or(0, Vec::len);
    let mut history = Vec::new();
    let mut assignment: Vec<(usize, f64)>;
    let mut iter = 0;
    loop {
        assignment = rows.iter().map(|r| nearest(r, &centroids)).collect();
        history.push(assignment.iter().map(|a| a.1).sum());
        if iter == MAX_ITER {
            break;
        }
        iter += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (r, &(c, _)) in rows.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(r) {
                *s += v;
            }
        }
        let mut taken = vec![false; rows.len()];
        let mut next = centroids.clone();
        for c in 0..k {
            if counts[c] > 0 {
                next[c] = sums[c].iter().map(|s| s / counts[c] as f64).collect();
                continue;
            }
            let far = (0..rows.len())
                .filter(|&i| !taken[i])
                .max_by(|&a, &b| assignment[a].1.total_cmp(&assignment[b].1).then(b.cmp(&a)));
            if let Some(i) = far {
                taken[i] = true;
                next[c] = rows[i].clone();
            }
        }
        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| euclidean(a, b))
            .fold(0.0, f64::max);
        centroids = next;
        if shift <= TOL {
            assignment = rows.iter().map(|r| nearest(r, &centroids)).collect();
            history.push(assignment.iter().map(|a| a.1).sum());
            break;
        }
    }
    KMeansFit {
        labels: assignment.iter().map(|a| a.0 as i64).collect(),
        inertia: *history.last().unwrap(),
        centroids,
        history,
    }
}

pub(crate) fn kmeans(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> KMeansFit {
    let init = kmeans_pp(rows, k, rng);
    lloyd(rows, init)
}

fn sse(rows: &[Vec<f64>], members: &[usize]) -> f64 {
    let dim = rows[members[0]].len();
    let mut mean = vec![0.0; dim];
    for &i in members {
        for (m, v) in mean.iter_mut().zip(&rows[i]) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= members.len() as f64);
    members.iter().map(|&i| squared_euclidean(&rows[i], &mean)).sum()
}

/// Starts from one cluster and repeatedly splits the cluster with the
/// largest within-cluster sum of squares using 2-means.
pub(crate) fn bisecting(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<i64> {
    let mut clusters: Vec<Vec<usize>> = vec![(0..rows.len()).collect()];
    while clusters.len() < k {
        let Some(target) = clusters
            .iter()
            .enumerate()
            .filter(|(_, c)| c.len() >= 2)
            .map(|(i, c)| (i, sse(rows, c)))
            .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
            .map(|(i, _)| i)
        else {
            break;
        };
        let members = std::mem::take(&mut clusters[target]);
        let sub: Vec<Vec<f64>> = members.iter().map(|&i| rows[i].clone()).collect();
        let fit = kmeans(&sub, 2, rng);
        let (mut left, mut right): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
        for (&i, &l) in members.iter().zip(&fit.labels) {
            if l == 0 {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        // Only identical points fail to split.
        if left.is_empty() {
            std::mem::swap(&mut left, &mut right);
        }
        if right.is_empty() {
            right.push(left.pop().unwrap());
        }
        clusters[target] = left;
        clusters.push(right);
    }
    let mut labels = vec![0i64; rows.len()];
    for (c, members) in clusters.iter().enumerate() {
        for &i in members {
            labels[i] = c as i64;
        }
    }
    labels
}

pub(crate) struct FuzzyFit {
    /// Row-major `n × k`; each row sums to 1.
    pub memberships: Vec<Vec<f64>>,
}

impl FuzzyFit {
    /// Cluster of highest membership, lowest index on ties.
    pub fn labels(&self) -> Vec<i64> {
        self.memberships
            .iter()
            .map(|u| {
                let mut best = 0;
                for (c, &v) in u.iter().enumerate() {
                    if v > u[best] {
                        best = c;
                    }
                }
                best as i64
            })
            .collect()
    }
}

/// Memberships for fuzzifier m = 2: `u_c ∝ 1 / d_c²`. A point sitting on
/// one or more centers splits its membership evenly among them.
fn memberships(row: &[f64], centers: &[Vec<f64>]) -> Vec<f64> {
    let d2: Vec<f64> = centers.iter().map(|c| squared_euclidean(row, c)).collect();
    let zeros = d2.iter().filter(|&&d| d == 0.0).count();
    if zeros > 0 {
        return d2
            .iter()
            .map(|&d| if d == 0.0 { 1.0 / zeros as f64 } else { 0.0 })
            .collect();
    }
    let inv: Vec<f64> = d2.iter().map(|d| 1.0 / d).collect();
    let total: f64 = inv.iter().sum();
    inv.iter().map(|v| v / total).collect()
}

/// Fuzzy c-means with fuzzifier 2, seeded with k-means++ centers.
pub(crate) fn fuzzy_cmeans(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> FuzzyFit {
    let dim = rows.first().map_or(0, Vec::len);
    let mut centers = kmeans_pp(rows, k, rng);
    let mut u: Vec<Vec<f64>> = rows.iter().map(|r| memberships(r, &centers)).collect();
    for _ in 0..MAX_ITER {
        for (c, center) in centers.iter_mut().enumerate() {
            let mut num = vec![0.0; dim];
            let mut den = 0.0;
            for (r, ui) in rows.iter().zip(&u) {
                let w = ui[c] * ui[c];
                den += w;
                for (n, v) in num.iter_mut().zip(r) {
                    *n += w * v;
                }
            }
            if den > 0.0 {
                *center = num.iter().map(|n| n / den).collect();
            }
        }
        let next: Vec<Vec<f64>> = rows.iter().map(|r| memberships(r, &centers)).collect();
        let change = u
            .iter()
            .flatten()
            .zip(next.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = next;
        if change < TOL {
            break;
        }
    }
    FuzzyFit { memberships: u }
}
