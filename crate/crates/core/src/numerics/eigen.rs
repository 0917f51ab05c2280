//! Symmetric eigendecomposition: Householder reduction to tridiagonal form
//! followed by the implicit QL method (the EISPACK `tred2`/`tql2` pair).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::matrix::{Matrix, SymMatrix};

/// `A = V diag(values) V^T`, eigenvalues ascending, eigenvectors in the
/// columns of `vectors`.
#[derive(Clone, Debug, PartialEq)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    pub vectors: Matrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    /// Rebuilds `V diag(f(lambda)) V^T`.
    pub fn reconstruct_with(&self, mut f: impl FnMut(T) -> T) -> SymMatrix<T> {
        let n = self.values.len();
        let mapped: Vec<T> = self.values.iter().map(|&l| f(l)).collect();
        let v = &self.vectors;
        let mut out = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let mut s = T::zero();
                for (k, &m) in mapped.iter().enumerate() {
                    s += v[(i, k)] * m * v[(j, k)];
                }
                out[(i, j)] = s;
                out[(j, i)] = s;
            }
        }
        SymMatrix::symmetrize(out)
    }

    pub fn reconstruct(&self) -> SymMatrix<T> {
        self.reconstruct_with(|l| l)
    }

    /// Largest absolute eigenvalue, i.e. the spectral norm.
    pub fn spectral_norm(&self) -> T {
        self.values.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }
}

const MAX_QL_ITERATIONS: usize = 60;

pub fn sym_eig<T: Scalar>(a: &SymMatrix<T>) -> Result<EigenDecomposition<T>> {
    let n = a.n();
    let mut v = a.as_matrix().clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    if n == 1 {
        d[0] = v[(0, 0)];
        return Ok(EigenDecomposition {
            values: d,
            vectors: Matrix::identity(1),
        });
    }
    tridiagonalize(&mut v, &mut d, &mut e);
    ql_implicit(&mut v, &mut d, &mut e).map_err(|index| Error::NoConvergence {
        index,
        n,
        frobenius_norm: a.frobenius_norm().to_f64_lossy(),
        max_offdiag: a.max_abs_offdiag().to_f64_lossy(),
    })?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition { values, vectors })
}

fn tridiagonalize<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for dk in d.iter().take(i) {
            scale += dk.abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for dk in d.iter_mut().take(i) {
                *dk /= scale;
                h += *dk * *dk;
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }

            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }

    // Accumulate the transformations.
    for i in 0..(n - 1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// On failure returns the index of the eigenvalue that did not converge.
fn ql_implicit<T: Scalar>(v: &mut Matrix<T>, d: &mut [T], e: &mut [T]) -> std::result::Result<(), usize> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();

    let two = T::lit(2.0);
    let eps = T::epsilon();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        let m = m.min(n - 1);

        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > MAX_QL_ITERATIONS {
                    return Err(l);
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (two * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let hk = v[(k, i + 1)];
                        let vki = v[(k, i)];
                        v[(k, i + 1)] = s * vki + c * hk;
                        v[(k, i)] = c * vki - s * hk;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn check_invariants(a: &SymMatrix<f64>, eig: &EigenDecomposition<f64>) {
        let n = a.n();
        let rec = eig.reconstruct();
        let mut diff = 0.0;
        for i in 0..n {
            for j in 0..n {
                diff += (rec.get(i, j) - a.get(i, j)).powi(2);
            }
        }
        assert!(diff.sqrt() <= 1e-8 * a.frobenius_norm().max(1.0));
        let vtv = eig.vectors.transpose().matmul(&eig.vectors).unwrap();
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..n {
                let t = if i == j { 1.0 } else { 0.0 };
                off += (vtv[(i, j)] - t).powi(2);
            }
        }
        assert!(off.sqrt() <= 1e-8);
        assert!(eig.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn identity_has_unit_spectrum() {
        let a = SymMatrix::<f64>::identity(3);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.values, vec![1.0, 1.0, 1.0]);
        check_invariants(&a, &eig);
    }

    #[test]
    fn diagonal_is_axis_aligned() {
        let a = SymMatrix::<f64>::diagonal(&[3.0, 2.0]);
        let eig = sym_eig(&a).unwrap();
        assert_eq!(eig.values, vec![2.0, 3.0]);
        // eigenvector for 2 is e_1, for 3 is e_0
        assert!((eig.vectors[(1, 0)].abs() - 1.0).abs() < 1e-15);
        assert!((eig.vectors[(0, 1)].abs() - 1.0).abs() < 1e-15);
        check_invariants(&a, &eig);
    }

    #[test]
    fn swap_matrix_has_plus_minus_one() {
        let a = SymMatrix::from_rows(&[vec![0.0f64, 1.0], vec![1.0, 0.0]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        assert!((eig.values[0] + 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 1.0).abs() < 1e-14);
        check_invariants(&a, &eig);
    }

    #[test]
    fn scalar_and_zero_matrices() {
        let a = SymMatrix::from_rows(&[vec![-4.5]]).unwrap();
        assert_eq!(sym_eig(&a).unwrap().values, vec![-4.5]);
        let z = SymMatrix::<f64>::zeros(4);
        let eig = sym_eig(&z).unwrap();
        assert!(eig.values.iter().all(|&v| v == 0.0));
        check_invariants(&z, &eig);
    }

    #[test]
    fn works_in_single_precision() {
        let a = SymMatrix::from_rows(&[vec![4.0f32, 1.0, 0.5], vec![1.0, 3.0, 0.25], vec![0.5, 0.25, 2.0]]).unwrap();
        let eig = sym_eig(&a).unwrap();
        let rec = eig.reconstruct();
        for i in 0..3 {
            for j in 0..3 {
                assert!((rec.get(i, j) - a.get(i, j)).abs() < 1e-5);
            }
        }
    }
}
