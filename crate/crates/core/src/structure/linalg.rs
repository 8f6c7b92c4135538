//! Just enough dense linear algebra for Gaussian densities: Cholesky
//! factors of small symmetric positive-definite matrices stored row-major.

/// Lower-triangular `L` with `L Lᵀ = a`, or `None` if `a` is not positive
/// definite.
pub(crate) fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    Some(l)
}

/// `log det(a)` from its Cholesky factor.
pub(crate) fn log_det(l: &[f64], d: usize) -> f64 {
    2.0 * (0..d).map(|i| l[i * d + i].ln()).sum::<f64>()
}

/// `vᵀ a⁻¹ v` by forward substitution with the Cholesky factor of `a`.
pub(crate) fn mahalanobis_sq(l: &[f64], d: usize, v: &[f64]) -> f64 {
    let mut y = vec![0.0; d];
    for i in 0..d {
        let mut s = v[i];
        for k in 0..i {
            s -= l[i * d + k] * y[k];
        }
        y[i] = s / l[i * d + i];
    }
    y.iter().map(|x| x * x).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorizes_and_solves() {
        let a = [4.0, 2.0, 2.0, 3.0];
        let l = cholesky(&a, 2).unwrap();
        assert_eq!(l, vec![2.0, 0.0, 1.0, 2f64.sqrt()]);
        assert!((log_det(&l, 2) - 8f64.ln()).abs() < 1e-12);
        // a⁻¹ = [[3, -2], [-2, 4]] / 8
        let v = [1.0, 1.0];
        assert!((mahalanobis_sq(&l, 2, &v) - 3.0 / 8.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_singular() {
        assert!(cholesky(&[1.0, 1.0, 1.0, 1.0], 2).is_none());
        assert!(cholesky(&[0.0], 1).is_none());
    }
}
