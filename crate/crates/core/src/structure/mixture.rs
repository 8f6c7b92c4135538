use super::linalg::{cholesky, log_det, mahalanobis_sq};
use super::partitional::kmeans;
use crate::error::{Error, Result};
use crate::seed::Rng;

const MAX_ITER: usize = 200;
const TOL: f64 = 1e-4;
const REG_COVAR: f64 = 1e-6;

struct Params {
    log_weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    /// Cholesky factor and log-determinant of each covariance.
    chol: Vec<(Vec<f64>, f64)>,
}

fn m_step(rows: &[Vec<f64>], resp: &[Vec<f64>], k: usize) -> Result<Params> {
    let n = rows.len();
    let d = rows[0].len();
    let mut log_weights = Vec::with_capacity(k);
    let mut means = Vec::with_capacity(k);
    let mut chol = Vec::with_capacity(k);
    for c in 0..k {
        let nk: f64 = resp.iter().map(|r| r[c]).sum::<f64>() + 10.0 * f64::EPSILON;
        let mut mean = vec![0.0; d];
        for (x, r) in rows.iter().zip(resp) {
            for (m, v) in mean.iter_mut().zip(x) {
                *m += r[c] * v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= nk);
        let mut cov = vec![0.0; d * d];
        for (x, r) in rows.iter().zip(resp) {
            let w = r[c];
            if w == 0.0 {
                continue;
            }
            for i in 0..d {
                let di = x[i] - mean[i];
                for j in 0..=i {
                    cov[i * d + j] += w * di * (x[j] - mean[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..=i {
                let v = cov[i * d + j] / nk;
                cov[i * d + j] = v;
                cov[j * d + i] = v;
            }
            cov[i * d + i] += REG_COVAR;
        }
        let l = cholesky(&cov, d).ok_or(Error::SingularCovariance)?;
        let ld = log_det(&l, d);
        log_weights.push((nk / n as f64).ln());
        means.push(mean);
        chol.push((l, ld));
    }
    Ok(Params {
        log_weights,
        means,
        chol,
    })
}

/// Log responsibilities and the mean log-likelihood.
fn e_step(rows: &[Vec<f64>], p: &Params) -> (Vec<Vec<f64>>, f64) {
    let d = rows[0].len();
    let norm = d as f64 * (2.0 * std::f64::consts::PI).ln();
    let mut total = 0.0;
    let log_resp = rows
        .iter()
        .map(|x| {
            let lp: Vec<f64> = p
                .means
                .iter()
                .zip(&p.chol)
                .zip(&p.log_weights)
                .map(|((mean, (l, ld)), lw)| {
                    let diff: Vec<f64> = x.iter().zip(mean).map(|(a, b)| a - b).collect();
                    lw - 0.5 * (norm + ld + mahalanobis_sq(l, d, &diff))
                })
                .collect();
            let max = lp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + lp.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            total += lse;
            lp.iter().map(|v| v - lse).collect()
        })
        .collect();
    (log_resp, total / rows.len() as f64)
}

/// EM for a full-covariance mixture started from a k-means partition.
/// Returns the most responsible component per row.
pub(crate) fn fit(rows: &[Vec<f64>], k: usize, rng: &mut Rng) -> Result<Vec<i64>> {
    let init = kmeans(rows, k, rng).labels;
    let mut resp: Vec<Vec<f64>> = init
        .iter()
        .map(|&l| (0..k).map(|c| if c as i64 == l { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut params = m_step(rows, &resp, k)?;
    let mut bound = f64::NEG_INFINITY;
    for _ in 0..MAX_ITER {
        let (log_resp, next) = e_step(rows, &params);
        resp = log_resp
            .iter()
            .map(|r| r.iter().map(|v| v.exp()).collect())
            .collect();
        params = m_step(rows, &resp, k)?;
        let change = next - bound;
        bound = next;
        if change.abs() < TOL {
            break;
        }
    }
    let (log_resp, _) = e_step(rows, &params);
    Ok(log_resp
        .iter()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = c;
                }
            }
            best as i64
        })
        .collect())
}
