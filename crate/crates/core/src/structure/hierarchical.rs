use super::distance::DistanceMatrix;

/// Average-linkage agglomerative clustering, merging until `k` clusters
/// remain. Among equally close pairs the one with the smallest `(i, j)`
/// indices merges first; a merged cluster keeps the smaller index.
///
/// Keeps each active cluster's nearest neighbor cached, so a merge costs
/// O(n) plus a rescan of the rows whose neighbor was involved.
pub(crate) fn average_linkage(d: &DistanceMatrix, k: usize) -> Vec<i64> {
    let n = d.n();
    let mut dist: Vec<f64> = (0..n).flat_map(|i| d.row(i).to_vec()).collect();
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut parent: Vec<usize> = (0..n).collect();
    let mut nn = vec![(usize::MAX, f64::INFINITY); n];

    let scan = |i: usize, dist: &[f64], active: &[bool]| -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for j in 0..n {
            if j != i && active[j] && dist[i * n + j] < best.1 {
                best = (j, dist[i * n + j]);
            }
        }
        best
    };
    for i in 0..n {
        nn[i] = scan(i, &dist, &active);
    }

    let mut clusters = n;
    while clusters > k.max(1) {
        // Smallest distance, then smallest normalized pair.
        let mut best: Option<(f64, usize, usize)> = None;
        for i in (0..n).filter(|&i| active[i]) {
            let (j, dij) = nn[i];
            if j == usize::MAX {
                continue;
            }
            let cand = (dij, i.min(j), i.max(j));
            if best.is_none_or(|b| (cand.0, cand.1, cand.2) < (b.0, b.1, b.2)) {
                best = Some(cand);
            }
        }
        let Some((_, a, b)) = best else { break };

        let (sa, sb) = (size[a] as f64, size[b] as f64);
        for m in (0..n).filter(|&m| active[m] && m != a && m != b) {
            let v = (sa * dist[a * n + m] + sb * dist[b * n + m]) / (sa + sb);
            dist[a * n + m] = v;
            dist[m * n + a] = v;
        }
        active[b] = false;
        size[a] += size[b];
        parent[b] = a;
        clusters -= 1;

        for m in (0..n).filter(|&m| active[m]) {
            if m == a || nn[m].0 == a || nn[m].0 == b {
                nn[m] = scan(m, &dist, &active);
            } else {
                let v = dist[m * n + a];
                if v < nn[m].1 || (v == nn[m].1 && a < nn[m].0) {
                    nn[m] = (a, v);
                }
            }
        }
    }

    (0..n)
        .map(|mut i| {
            while parent[i] != i {
                i = parent[i];
            }
            i as i64
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::structure::distance::Metric;
    use crate::structure::tests::same_partition;
    use proptest::prelude::*;

    fn dm(rows: &[Vec<f64>]) -> DistanceMatrix {
        DistanceMatrix::compute(rows, Metric::Euclidean)
    }

    /// Textbook O(n³) average linkage: recompute every cluster-pair mean
    /// distance from the original points at every step.
    fn naive(d: &DistanceMatrix, k: usize) -> Vec<i64> {
        let mut clusters: Vec<Vec<usize>> = (0..d.n()).map(|i| vec![i]).collect();
        while clusters.len() > k {
            let mut best = (f64::INFINITY, 0, 0);
            for a in 0..clusters.len() {
                for b in a + 1..clusters.len() {
                    let mut s = 0.0;
                    for &i in &clusters[a] {
                        for &j in &clusters[b] {
                            s += d.get(i, j);
                        }
                    }
                    let v = s / (clusters[a].len() * clusters[b].len()) as f64;
                    if v < best.0 - 1e-12 {
                        best = (v, a, b);
                    }
                }
            }
            let merged = clusters.remove(best.2);
            clusters[best.1].extend(merged);
        }
        let mut labels = vec![0; d.n()];
        for (c, m) in clusters.iter().enumerate() {
            for &i in m {
                labels[i] = c as i64;
            }
        }
        labels
    }

    #[test]
    fn collinear_points() {
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
        assert_eq!(average_linkage(&dm(&rows), 2), vec![0, 0, 2, 2]);
    }

    #[test]
    fn ties_merge_lowest_pair_first() {
        // Equidistant: 0-1 and 1-2 are both at 1; 0-1 merges first, then
        // {0,1} is 1.5 from 2 on average and 2-3 at 1 wins.
        let rows: Vec<Vec<f64>> = [0.0, 1.0, 2.0, 3.0].iter().map(|&v| vec![v]).collect();
        assert_eq!(average_linkage(&dm(&rows), 2), vec![0, 0, 2, 2]);
        assert_eq!(average_linkage(&dm(&rows), 3), vec![0, 0, 2, 3]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn matches_naive_linkage(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 2), 2..25),
            k in 1usize..6,
        ) {
            let k = k.min(rows.len());
            let d = dm(&rows);
            prop_assert!(same_partition(&average_linkage(&d, k), &naive(&d, k)));
        }

        #[test]
        fn permuting_rows_permutes_labels(
            rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 3..20),
            k in 1usize..5,
            rot in 1usize..19,
        ) {
            let n = rows.len();
            let k = k.min(n);
            let perm: Vec<usize> = (0..n).map(|i| (i + rot) % n).collect();
            let permuted: Vec<Vec<f64>> = perm.iter().map(|&p| rows[p].clone()).collect();
            let base = average_linkage(&dm(&rows), k);
            let moved = average_linkage(&dm(&permuted), k);
            let back: Vec<i64> = perm.iter().map(|&p| base[p]).collect();
            prop_assert!(same_partition(&moved, &back));
        }
    }
}
