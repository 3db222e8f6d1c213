use crate::error::{Error, Result};

use super::Matrix;

/// Numerically stable softmax (max-subtracted).
pub fn softmax(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::InvalidArgument("softmax of an empty vector".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("softmax input is not finite".into()));
    }
    let mut out = vec![0.0; v.len()];
    softmax_into(v, &mut out);
    Ok(out)
}

/// Unchecked softmax kernel; `v` must be finite and non-empty.
pub(crate) fn softmax_into(v: &[f64], out: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(v) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// `log Σ exp(v_i)`, returning `-inf` when every entry is `-inf`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Lower-triangular Cholesky factor of `S + eps·I`.
#[derive(Clone, Debug)]
pub struct Cholesky {
    lower: Matrix,
}

/// Factorizes `S + eps·I`. `S` must be square and symmetric within 1e-9.
pub fn regularized_cholesky(s: &Matrix, eps: f64) -> Result<Cholesky> {
    let n = s.rows();
    if s.cols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: s.cols(),
        });
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("regularizer must be >= 0, got {eps}")));
    }
    for i in 0..n {
        for j in 0..i {
            if (s.get(i, j) - s.get(j, i)).abs() > 1e-9 {
                return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
            }
        }
    }
    factor_lower(s, eps)
}

/// Cholesky of `S + eps·I` reading only the lower triangle of `S`.
pub(crate) fn factor_lower(s: &Matrix, eps: f64) -> Result<Cholesky> {
    let n = s.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut diag = s.get(j, j) + eps;
        for k in 0..j {
            diag -= l.get(j, k) * l.get(j, k);
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return Err(Error::SingularMatrix { component: None });
        }
        let ljj = diag.sqrt();
        l.set(j, j, ljj);
        for i in j + 1..n {
            let mut v = s.get(i, j);
            for k in 0..j {
                v -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, v / ljj);
        }
    }
    Ok(Cholesky { lower: l })
}

impl Cholesky {
    pub fn lower(&self) -> &Matrix {
        &self.lower
    }

    pub fn dim(&self) -> usize {
        self.lower.rows()
    }

    /// `log |S + eps·I|`
    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|j| self.lower.get(j, j).ln()).sum::<f64>()
    }

    /// Solves `L y = b`.
    pub fn forward_solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let mut v = y[i];
            for k in 0..i {
                v -= self.lower.get(i, k) * y[k];
            }
            y[i] = v / self.lower.get(i, i);
        }
        y
    }

    /// Solves `(L Lᵀ) x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = self.forward_solve(b);
        for i in (0..n).rev() {
            let mut v = x[i];
            for k in i + 1..n {
                v -= self.lower.get(k, i) * x[k];
            }
            x[i] = v / self.lower.get(i, i);
        }
        x
    }

    /// `bᵀ (L Lᵀ)⁻¹ b`
    pub fn quad_form(&self, b: &[f64]) -> f64 {
        self.forward_solve(b).iter().map(|v| v * v).sum()
    }

    pub fn inverse(&self) -> Matrix {
        let n = self.dim();
        let mut inv = Matrix::zeros(n, n);
        let mut e = vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for (i, v) in col.into_iter().enumerate() {
                inv.set(i, j, v);
            }
        }
        inv
    }

    /// `L Lᵀ`
    pub fn reconstruct(&self) -> Matrix {
        self.lower.matmul_t(&self.lower).expect("square factor")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0, 0.0]).unwrap(), vec![0.5, 0.5]);
        let big = softmax(&[1000.0, 1000.0, 1000.0]).unwrap();
        for p in big {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-15);
        assert!((p[1] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn softmax_rejects_bad_input() {
        assert!(matches!(softmax(&[]), Err(Error::InvalidArgument(_))));
        assert!(softmax(&[0.0, f64::NAN]).is_err());
        assert!(softmax(&[f64::INFINITY]).is_err());
    }

    #[test]
    fn cholesky_examples() {
        let l = regularized_cholesky(&Matrix::identity(2), 0.0).unwrap();
        assert_eq!(l.lower(), &Matrix::identity(2));

        let l = regularized_cholesky(&Matrix::scalar(4.0), 0.0).unwrap();
        assert_eq!(l.lower().get(0, 0), 2.0);
        assert!((l.log_det() - 4f64.ln()).abs() < 1e-15);

        let l = regularized_cholesky(&Matrix::scalar(0.0), 1e-6).unwrap();
        assert!((l.lower().get(0, 0) - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn cholesky_failure_is_singular_error() {
        let s = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(
            regularized_cholesky(&s, 0.0),
            Err(Error::SingularMatrix { .. })
        ));
        assert!(regularized_cholesky(&Matrix::scalar(0.0), 0.0).is_err());
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let s = Matrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        assert!(matches!(regularized_cholesky(&s, 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn solve_and_inverse() {
        let s = Matrix::from_rows(&[[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]).unwrap();
        let c = regularized_cholesky(&s, 0.0).unwrap();
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = s.matmul(&Matrix::new(3, 1, x.clone()).unwrap()).unwrap();
        assert!((back.data()[0] - 1.0).abs() < 1e-12);
        assert!((back.data()[2] - 3.0).abs() < 1e-12);
        let prod = s.matmul(&c.inverse()).unwrap();
        assert!(prod.max_abs_diff(&Matrix::identity(3)) < 1e-12);
        let q = c.quad_form(&[1.0, 2.0, 3.0]);
        assert!((q - (x[0] + 2.0 * x[1] + 3.0 * x[2])).abs() < 1e-12);
    }

    fn spd_strategy() -> impl Strategy<Value = (Matrix, f64)> {
        (1usize..=16).prop_flat_map(|n| {
            (proptest::collection::vec(-1.0f64..1.0, n * n), 0.0f64..1e-3).prop_map(move |(raw, eps)| {
                let a = Matrix::new(n, n, raw).unwrap();
                let mut s = a.matmul_t(&a).unwrap();
                for i in 0..n {
                    s.set(i, i, s.get(i, i) + 0.1);
                }
                (s, eps)
            })
        })
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            v in proptest::collection::vec(-50.0f64..50.0, 1..20),
            shift in -100.0f64..100.0,
        ) {
            let p = softmax(&v).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&x| x > 0.0));
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let q = softmax(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn cholesky_reconstructs((s, eps) in spd_strategy()) {
            let c = regularized_cholesky(&s, eps).unwrap();
            let mut target = s.clone();
            for i in 0..s.rows() {
                target.set(i, i, target.get(i, i) + eps);
            }
            prop_assert!(c.reconstruct().max_abs_diff(&target) < 1e-10);
        }
    }
}
