use std::collections::VecDeque;

use super::distance::DistanceMatrix;

/// Points within `eps` of `i` (inclusive, `i` itself included).
fn neighbors(d: &DistanceMatrix, i: usize, eps: f64) -> Vec<usize> {
    d.row(i)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v <= eps)
        .map(|(j, _)| j)
        .collect()
}

/// DBSCAN. Clusters grow from core points in index order; a border point
/// joins the first cluster that reaches it. Points reached by no cluster are
/// noise (`-1`).
pub(crate) fn dbscan(d: &DistanceMatrix, eps: f64, min_samples: usize) -> Vec<i64> {
    let n = d.n();
    let hoods: Vec<Vec<usize>> = (0..n).map(|i| neighbors(d, i, eps)).collect();
    let core: Vec<bool> = hoods.iter().map(|h| h.len() >= min_samples).collect();
    let mut labels = vec![-1i64; n];
    let mut next = 0;
    for start in 0..n {
        if !core[start] || labels[start] >= 0 {
            continue;
        }
        labels[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(p) = queue.pop_front() {
            for &q in &hoods[p] {
                if labels[q] < 0 {
                    labels[q] = next;
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    labels
}

/// OPTICS reachability ordering with unbounded neighborhood radius.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticsOrdering {
    pub ordering: Vec<usize>,
    /// Per point, in original index order; infinite where unreached.
    pub reachability: Vec<f64>,
    /// Distance to the `min_samples`-th nearest point (self included);
    /// infinite when there are fewer points than that.
    pub core_distance: Vec<f64>,
}

/// Computes the ordering. The next point processed is always the
/// unprocessed point of smallest reachability, lowest index on ties.
pub fn optics_ordering(d: &DistanceMatrix, min_samples: usize) -> OpticsOrdering {
    let n = d.n();
    let core_distance: Vec<f64> = (0..n)
        .map(|i| {
            if min_samples == 0 || min_samples > n {
                return f64::INFINITY;
            }
            let mut row = d.row(i).to_vec();
            let (_, kth, _) = row.select_nth_unstable_by(min_samples - 1, f64::total_cmp);
            *kth
        })
        .collect();
    let mut reachability = vec![f64::INFINITY; n];
    let mut processed = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    for _ in 0..n {
        let mut p = usize::MAX;
        for i in 0..n {
            if !processed[i] && (p == usize::MAX || reachability[i] < reachability[p]) {
                p = i;
            }
        }
        processed[p] = true;
        ordering.push(p);
        let cd = core_distance[p];
        if cd.is_finite() {
            for o in 0..n {
                if !processed[o] {
                    let r = cd.max(d.get(p, o));
                    if r < reachability[o] {
                        reachability[o] = r;
                    }
                }
            }
        }
    }
    OpticsOrdering {
        ordering,
        reachability,
        core_distance,
    }
}

impl OpticsOrdering {
    /// DBSCAN-equivalent clusters at radius `eps`: walking the ordering, a
    /// point whose reachability exceeds `eps` starts a new cluster if it is
    /// itself a core point at `eps`, and is noise otherwise.
    pub fn extract(&self, eps: f64) -> Vec<i64> {
        let n = self.ordering.len();
        let mut labels = vec![-1i64; n];
        let mut current = -1i64;
        for &p in &self.ordering {
            let far = self.reachability[p] > eps;
            let near_core = self.core_distance[p] <= eps;
            if far && near_core {
                current += 1;
            }
            labels[p] = if far && !near_core { -1 } else { current };
        }
        labels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::distance::Metric;
    use crate::structure::tests::{same_partition, two_blobs};
    use proptest::prelude::*;

    fn dm(rows: &[Vec<f64>]) -> DistanceMatrix {
        DistanceMatrix::compute(rows, Metric::Euclidean)
    }

    #[test]
    fn huge_eps_is_one_cluster_tiny_eps_is_noise() {
        let rows = two_blobs(10, 2, 3);
        let d = dm(&rows);
        assert!(dbscan(&d, 100.0, 1).iter().all(|&l| l == 0));
        assert!(optics_ordering(&d, 1).extract(100.0).iter().all(|&l| l == 0));
        assert!(dbscan(&d, 1e-9, 2).iter().all(|&l| l == -1));
        assert!(optics_ordering(&d, 2).extract(1e-9).iter().all(|&l| l == -1));
    }

    #[test]
    fn far_point_is_noise() {
        let mut rows = two_blobs(15, 2, 4);
        rows.truncate(15);
        // blob radius is about 0.03
        rows.push(vec![3.0, 3.0]);
        let d = dm(&rows);
        for labels in [dbscan(&d, 0.1, 2), optics_ordering(&d, 2).extract(0.1)] {
            assert_eq!(labels[15], -1);
            assert!(labels[..15].iter().all(|&l| l == 0));
        }
    }

    #[test]
    fn border_point_joins_first_cluster() {
        // 10 is within reach of the cores 2 and 18 but is not a core itself.
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 10.0, 18.0, 19.0, 20.0]
            .iter()
            .map(|&v| vec![v])
            .collect();
        let d = dm(&rows);
        assert_eq!(dbscan(&d, 8.5, 4), vec![0, 0, 0, 0, 1, 1, 1]);
        assert_eq!(dbscan(&d, 8.5, 5), vec![-1; 7]);
    }

    #[test]
    fn optics_ordering_small_case() {
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 3.0].iter().map(|&v| vec![v]).collect();
        let o = optics_ordering(&dm(&rows), 2);
        assert_eq!(o.ordering, vec![0, 1, 2]);
        assert_eq!(o.core_distance, vec![1.0, 1.0, 2.0]);
        assert_eq!(o.reachability[0], f64::INFINITY);
        assert_eq!(o.reachability[1], 1.0);
        assert_eq!(o.reachability[2], 2.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The eps cut groups core points exactly as DBSCAN does.
        #[test]
        fn optics_cut_matches_dbscan_on_core_points(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 2..40),
            eps in 0.02f64..0.5,
            min_samples in 1usize..6,
        ) {
            let d = dm(&rows);
            let a = dbscan(&d, eps, min_samples);
            let b = optics_ordering(&d, min_samples).extract(eps);
            let core: Vec<usize> = (0..rows.len())
                .filter(|&i| neighbors(&d, i, eps).len() >= min_samples)
                .collect();
            let ca: Vec<i64> = core.iter().map(|&i| a[i]).collect();
            let cb: Vec<i64> = core.iter().map(|&i| b[i]).collect();
            prop_assert!(same_partition(&ca, &cb));
            prop_assert!(cb.iter().all(|&l| l >= 0));
        }

        #[test]
        fn dbscan_permutation_invariant_on_cores(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 2..30),
            eps in 0.02f64..0.5,
            min_samples in 1usize..5,
            rot in 1usize..29,
        ) {
            let n = rows.len();
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&p| rows[p].clone()).collect();
            let d = dm(&rows);
            let base = dbscan(&d, eps, min_samples);
            let moved = dbscan(&dm(&permuted), eps, min_samples);
            let cores: Vec<usize> = (0..n)
                .filter(|&i| neighbors(&d, i, eps).len() >= min_samples)
                .collect();
            // noise and core membership do not depend on order
            for i in 0..n {
                prop_assert_eq!(moved[i] == -1, base[perm[i]] == -1);
            }
            let inv: Vec<usize> = {
                let mut inv = vec![0; n];
                for (i, &p) in perm.iter().enumerate() { inv[p] = i; }
                inv
            };
            let a: Vec<i64> = cores.iter().map(|&c| base[c]).collect();
            let b: Vec<i64> = cores.iter().map(|&c| moved[inv[c]]).collect();
            prop_assert!(same_partition(&a, &b));
        }
    }
}
