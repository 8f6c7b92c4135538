use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Dissimilarity between two rows. Aliases (`l1`/`manhattan`/`cityblock`,
/// `l2`/`euclidean`) compute the same value but keep their own names so
/// reports show what was searched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Metric {
    Cityblock,
    Cosine,
    Euclidean,
    L1,
    L2,
    Manhattan,
    Braycurtis,
    Canberra,
    Chebyshev,
    Correlation,
    Hamming,
}

impl Metric {
    pub const ALL: [Metric; 11] = [
        Metric::Cityblock,
        Metric::Cosine,
        Metric::Euclidean,
        Metric::L1,
        Metric::L2,
        Metric::Manhattan,
        Metric::Braycurtis,
        Metric::Canberra,
        Metric::Chebyshev,
        Metric::Correlation,
        Metric::Hamming,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Cityblock => "cityblock",
            Metric::Cosine => "cosine",
            Metric::Euclidean => "euclidean",
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Manhattan => "manhattan",
            Metric::Braycurtis => "braycurtis",
            Metric::Canberra => "canberra",
            Metric::Chebyshev => "chebyshev",
            Metric::Correlation => "correlation",
            Metric::Hamming => "hamming",
        }
    }

    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        if a == b {
            return 0.0;
        }
        match self {
            Metric::Cityblock | Metric::L1 | Metric::Manhattan => {
                a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
            }
            Metric::Euclidean | Metric::L2 => euclidean(a, b),
            Metric::Chebyshev => a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
            Metric::Braycurtis => {
                let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum();
                let den: f64 = a.iter().zip(b).map(|(x, y)| (x + y).abs()).sum();
                if den == 0.0 {
                    0.0
                } else {
                    num / den
                }
            }
            Metric::Canberra => a
                .iter()
                .zip(b)
                .map(|(x, y)| {
                    let den = x.abs() + y.abs();
                    if den == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() / den
                    }
                })
                .sum(),
            Metric::Hamming => {
                if a.is_empty() {
                    return 0.0;
                }
                a.iter().zip(b).filter(|(x, y)| x != y).count() as f64 / a.len() as f64
            }
            Metric::Cosine => angular(a, b),
            Metric::Correlation => {
                let ma = mean(a);
                let mb = mean(b);
                let ca: Vec<f64> = a.iter().map(|x| x - ma).collect();
                let cb: Vec<f64> = b.iter().map(|x| x - mb).collect();
                angular(&ca, &cb)
            }
        }
    }
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_euclidean(a, b).sqrt()
}

pub(crate) fn squared_euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn mean(a: &[f64]) -> f64 {
    if a.is_empty() {
        0.0
    } else {
        a.iter().sum::<f64>() / a.len() as f64
    }
}

/// `1 - cos(a, b)`; a zero vector is at distance 1 from any nonzero vector
/// and 0 from another zero vector.
fn angular(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 0.0,
        (true, false) | (false, true) => 1.0,
        _ => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            (1.0 - dot / (na * nb)).max(0.0)
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown metric `{s}`")))
    }
}

impl TryFrom<String> for Metric {
    type Error = Error;

    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

impl From<Metric> for String {
    fn from(m: Metric) -> String {
        m.name().to_string()
    }
}

/// Dense symmetric `n × n` dissimilarities with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
    metric: Metric,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// Builds a matrix over `rows`. Only the upper triangle is evaluated and
    /// then mirrored, so symmetry is exact.
    pub fn compute(rows: &[Vec<f64>], metric: Metric) -> Self {
        let n = rows.len();
        let upper: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| ((i + 1)..n).map(|j| metric.distance(&rows[i], &rows[j])).collect())
            .collect();
        let mut data = vec![0.0; n * n];
        for (i, row) in upper.into_iter().enumerate() {
            for (off, d) in row.into_iter().enumerate() {
                let j = i + 1 + off;
                data[i * n + j] = d;
                data[j * n + i] = d;
            }
        }
        Self { n, data, metric }
    }
}

pub fn pairwise_distances(x: &crate::distribution::DistributionMatrix, metric: Metric) -> DistanceMatrix {
    DistanceMatrix::compute(&super::rows_of(x), metric)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn basic_values() {
        assert_eq!(Metric::Euclidean.distance(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
        assert_eq!(Metric::Cosine.distance(&[1.0, 0.0], &[0.0, 1.0]), 1.0);
        assert_eq!(Metric::Cityblock.distance(&[0.0, 0.0], &[3.0, 4.0]), 7.0);
        assert_eq!(Metric::Chebyshev.distance(&[0.0, 0.0], &[3.0, 4.0]), 4.0);
        assert_eq!(Metric::Hamming.distance(&[1.0, 2.0, 3.0, 4.0], &[1.0, 0.0, 3.0, 0.0]), 0.5);
        assert!((Metric::Braycurtis.distance(&[1.0, 0.0], &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        assert!((Metric::Canberra.distance(&[1.0, 0.0], &[3.0, 0.0]) - 0.5).abs() < 1e-15);
        assert!((Metric::Correlation.distance(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vectors_under_angular_metrics() {
        for m in [Metric::Cosine, Metric::Correlation] {
            assert_eq!(m.distance(&[0.0, 0.0], &[0.0, 0.0]), 0.0);
            assert_eq!(m.distance(&[0.0, 0.0], &[0.3, 0.1]), 1.0);
        }
        // constant rows have zero variance
        assert_eq!(Metric::Correlation.distance(&[0.2, 0.2], &[0.5, 0.1]), 1.0);
    }

    #[test]
    fn names_parse_back() {
        for m in Metric::ALL {
            assert_eq!(m.name().parse::<Metric>().unwrap(), m);
        }
        assert!("minkowski".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn identical_rows_are_at_zero(row in prop::collection::vec(0.0f64..1.0, 1..8)) {
            for m in Metric::ALL {
                prop_assert_eq!(m.distance(&row, &row), 0.0);
            }
        }

        #[test]
        fn matrix_is_symmetric_nonnegative(rows in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 3), 1..12)) {
            for m in Metric::ALL {
                let d = DistanceMatrix::compute(&rows, m);
                for i in 0..rows.len() {
                    prop_assert_eq!(d.get(i, i), 0.0);
                    for j in 0..rows.len() {
                        prop_assert_eq!(d.get(i, j), d.get(j, i));
                        prop_assert!(d.get(i, j) >= 0.0);
                    }
                }
            }
        }
    }
}
