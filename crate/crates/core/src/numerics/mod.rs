//! Dense symmetric linear algebra and moment estimation.

mod eigen;
mod matrix;

pub use eigen::{sym_eig, EigenDecomposition};
pub use matrix::{Matrix, SymMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Covariance normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovDivisor {
    /// Divide by `n - 1`.
    #[default]
    Unbiased,
    /// Divide by `n`.
    Population,
}

/// Sample mean and unbiased (`n - 1`) covariance of `rows`.
pub fn mean_and_cov<T: Scalar, R: AsRef<[T]>>(rows: &[R], dim: usize) -> Result<(Vec<T>, SymMatrix<T>)> {
    mean_and_cov_with(rows, dim, CovDivisor::Unbiased)
}

pub fn mean_and_cov_with<T: Scalar, R: AsRef<[T]>>(
    rows: &[R],
    dim: usize,
    divisor: CovDivisor,
) -> Result<(Vec<T>, SymMatrix<T>)> {
    if rows.len() < 2 {
        return Err(Error::invalid(format!(
            "covariance needs at least 2 rows, got {}",
            rows.len()
        )));
    }
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    let mut mean = vec![T::zero(); dim];
    for r in rows {
        let r = r.as_ref();
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: r.len(),
            });
        }
        for (m, &x) in mean.iter_mut().zip(r) {
            *m += x;
        }
    }
    let n = T::from_usize_lossy(rows.len());
    for m in &mut mean {
        *m /= n;
    }

    let mut cov = Matrix::zeros(dim, dim);
    let mut centered = vec![T::zero(); dim];
    for r in rows {
        for ((c, &x), &m) in centered.iter_mut().zip(r.as_ref()).zip(&mean) {
            *c = x - m;
        }
        for i in 0..dim {
            let ci = centered[i];
            for j in i..dim {
                cov[(i, j)] += ci * centered[j];
            }
        }
    }
    let denom = match divisor {
        CovDivisor::Unbiased => n - T::one(),
        CovDivisor::Population => n,
    };
    for i in 0..dim {
        for j in i..dim {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mean, SymMatrix::symmetrize(cov)))
}

fn negativity_tolerance<T: Scalar>(spectral_norm: T) -> T {
    T::tol(1e-10, 256.0) * spectral_norm
}

fn check_psd<T: Scalar>(eig: &EigenDecomposition<T>) -> Result<()> {
    let tol = negativity_tolerance(eig.spectral_norm());
    let min = eig.values.first().copied().unwrap_or_else(T::zero);
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min.to_f64_lossy(),
            tolerance: tol.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Principal square root of a positive semi-definite matrix.
///
/// Eigenvalues down to `-1e-10 * ||A||_2` are treated as rounding noise and
/// clamped to zero; anything more negative is rejected.
pub fn psd_sqrt<T: Scalar>(a: &SymMatrix<T>) -> Result<SymMatrix<T>> {
    let eig = sym_eig(a)?;
    check_psd(&eig)?;
    Ok(eig.reconstruct_with(|l| l.max(T::zero()).sqrt()))
}

/// `Tr[(A B)^{1/2}]` for PSD `A`, `B`, evaluated as
/// `Tr[(A^{1/2} B A^{1/2})^{1/2}]` so only symmetric decompositions are needed.
pub fn trace_sqrt_product<T: Scalar>(a: &SymMatrix<T>, b: &SymMatrix<T>) -> Result<T> {
    if a.n() != b.n() {
        return Err(Error::DimensionMismatch {
            expected: a.n(),
            got: b.n(),
        });
    }
    check_psd(&sym_eig(b)?)?;
    let root = psd_sqrt(a)?;
    let inner = root.as_matrix().matmul(b.as_matrix())?.matmul(root.as_matrix())?;
    let inner = SymMatrix::symmetrize(inner);
    let eig = sym_eig(&inner)?;
    let t: T = eig.values.iter().map(|&l| l.max(T::zero()).sqrt()).sum();
    Ok(t.max(T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn moments_of_two_points() {
        let (m, c) = mean_and_cov(&[vec![0.0], vec![2.0]], 1).unwrap();
        assert_eq!(m, vec![1.0]);
        assert_eq!(c.get(0, 0), 2.0);
    }

    #[test]
    fn moments_of_identical_rows_are_degenerate() {
        let v = vec![1.5, -2.0, 3.0];
        let rows = vec![v.clone(); 5];
        let (m, c) = mean_and_cov(&rows, 3).unwrap();
        assert_eq!(m, v);
        assert_eq!(c, SymMatrix::zeros(3));
    }

    #[test]
    fn moments_of_unit_vectors() {
        let (m, c) = mean_and_cov(&[vec![1.0, 0.0], vec![0.0, 1.0]], 2).unwrap();
        assert_eq!(m, vec![0.5, 0.5]);
        assert_eq!(c, SymMatrix::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap());
    }

    #[test]
    fn population_divisor() {
        let (_, c) = mean_and_cov_with(&[vec![0.0], vec![2.0]], 1, CovDivisor::Population).unwrap();
        assert_eq!(c.get(0, 0), 1.0);
    }

    #[test]
    fn moments_reject_bad_input() {
        assert!(mean_and_cov(&[vec![1.0]], 1).is_err());
        assert!(matches!(
            mean_and_cov(&[vec![1.0], vec![1.0, 2.0]], 1),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn sqrt_examples() {
        let r = psd_sqrt(&SymMatrix::from_rows(&[vec![4.0]]).unwrap()).unwrap();
        assert!(close(r.get(0, 0), 2.0, 1e-15));

        let r = psd_sqrt(&SymMatrix::<f64>::identity(4)).unwrap();
        assert_eq!(r, SymMatrix::identity(4));

        // eigenvalues 1 and 3 on (1,-1)/sqrt2 and (1,1)/sqrt2
        let a = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let r = psd_sqrt(&a).unwrap();
        let s3 = 3f64.sqrt();
        assert!(close(r.get(0, 0), (1.0 + s3) / 2.0, 1e-14));
        assert!(close(r.get(0, 1), (s3 - 1.0) / 2.0, 1e-14));
        let eig = sym_eig(&r).unwrap();
        assert!(close(eig.values[0], 1.0, 1e-14));
        assert!(close(eig.values[1], s3, 1e-14));
    }

    #[test]
    fn sqrt_rejects_indefinite() {
        let a = SymMatrix::from_rows(&[vec![1.0, 0.0], vec![0.0, -1.0]]).unwrap();
        assert!(matches!(psd_sqrt(&a), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sqrt_tolerates_rounding_negativity() {
        let a = SymMatrix::diagonal(&[1.0, -1e-13]);
        let r = psd_sqrt(&a).unwrap();
        assert_eq!(r.get(1, 1), 0.0);
    }

    #[test]
    fn trace_sqrt_examples() {
        let i3 = SymMatrix::<f64>::identity(3);
        assert!(close(trace_sqrt_product(&i3, &i3).unwrap(), 3.0, 1e-14));

        let a = SymMatrix::from_rows(&[vec![4.0]]).unwrap();
        let b = SymMatrix::from_rows(&[vec![9.0]]).unwrap();
        assert!(close(trace_sqrt_product(&a, &b).unwrap(), 6.0, 1e-14));

        let b = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        assert_eq!(trace_sqrt_product(&SymMatrix::zeros(2), &b).unwrap(), 0.0);
    }

    #[test]
    fn trace_sqrt_errors() {
        let a = SymMatrix::<f64>::identity(2);
        let b = SymMatrix::<f64>::identity(3);
        assert!(matches!(
            trace_sqrt_product(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
        let neg = SymMatrix::diagonal(&[1.0, -2.0]);
        assert!(matches!(trace_sqrt_product(&a, &neg), Err(Error::NotPsd { .. })));
        assert!(matches!(trace_sqrt_product(&neg, &a), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn symmetry_check_on_construction() {
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.1, 1.0]]).is_err());
        assert!(SymMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0 + 1e-14, 1.0]]).is_ok());
        assert!(SymMatrix::from_rows(&[vec![f64::NAN]]).is_err());
    }
}
