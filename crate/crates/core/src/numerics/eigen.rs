//! Cyclic Jacobi eigensolver for real symmetric matrices.

use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const MAX_SWEEPS: usize = 100;

/// Entries whose magnitude is at most this are skipped when fixing eigenvector signs.
const SIGN_FLOOR: f64 = 1e-12;
/// Allowed `|M[i,j] - M[j,i]|`, relative to `max(1, max|M|)`.
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenvalues in descending order with matching orthonormal eigenvectors (as columns).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition<T> {
    pub values: Vec<T>,
    pub vectors: DenseMatrix<T>,
}

impl<T: Scalar> EigenDecomposition<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The `k`-th eigenvector (0-based, descending eigenvalue order).
    pub fn vector(&self, k: usize) -> Vec<T> {
        self.vectors.col(k)
    }

    /// `Vᵀ y`: coordinates of `y` in the eigenbasis.
    pub fn project(&self, y: &[T]) -> Vec<T> {
        let n = self.len();
        let mut out = vec![T::zero(); n];
        for (i, yi) in y.iter().enumerate() {
            let row = self.vectors.row(i);
            for (o, v) in out.iter_mut().zip(row) {
                *o += *v * *yi;
            }
        }
        out
    }

    /// `V diag(g) c` for coefficients `c` in the eigenbasis.
    pub fn expand(&self, coeffs: &[T], gains: impl Fn(usize) -> T) -> Vec<T> {
        let n = self.len();
        let scaled: Vec<T> = coeffs.iter().enumerate().map(|(k, c)| *c * gains(k)).collect();
        (0..n).map(|i| super::matrix::dot(self.vectors.row(i), &scaled)).collect()
    }

    /// `V diag(f(λ)) Vᵀ`.
    pub fn spectral_map(&self, f: impl Fn(T) -> T) -> DenseMatrix<T> {
        let n = self.len();
        let fv: Vec<T> = self.values.iter().map(|l| f(*l)).collect();
        let mut out = DenseMatrix::zeros(n, n);
        for i in 0..n {
            let vi = self.vectors.row(i);
            for j in i..n {
                let vj = self.vectors.row(j);
                let mut acc = T::zero();
                for k in 0..n {
                    acc += vi[k] * fv[k] * vj[k];
                }
                out[(i, j)] = acc;
                out[(j, i)] = acc;
            }
        }
        out
    }

    pub fn reconstruct(&self) -> DenseMatrix<T> {
        self.spectral_map(|l| l)
    }
}

/// Full eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.
///
/// Sweeps stop once the largest off-diagonal magnitude falls below
/// `tol * max(1, max|M|)`; after [`MAX_SWEEPS`] sweeps the solver gives up with
/// [`Error::NoConvergence`].
pub fn sym_eig<T: Scalar>(m: &DenseMatrix<T>, tol: T) -> Result<EigenDecomposition<T>> {
    if !m.is_square() {
        return Err(Error::NonSquare { rows: m.rows(), cols: m.cols() });
    }
    let n = m.rows();
    let scale = m.max_abs().max(T::one());
    let (gap, row, col) = m.asymmetry();
    if gap > T::lit(SYMMETRY_TOL) * scale {
        return Err(Error::NotSymmetric { row, col, gap: gap.as_f64() });
    }
    let mut a = m.clone();
    a.symmetrize();
    // Rows of `vt` are the eigenvectors.
    let mut vt = DenseMatrix::<T>::identity(n);
    let threshold = tol * scale;
    let hundred = T::lit(100.0);
    let half = T::lit(0.5);

    let mut converged = false;
    for sweep in 0..=MAX_SWEEPS {
        if max_off_diagonal(&a) < threshold {
            converged = true;
            break;
        }
        if sweep == MAX_SWEEPS {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == T::zero() {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Off-diagonal already negligible against both diagonals.
                if sweep > 3 && (app.abs() + hundred * apq.abs() == app.abs()) && (aqq.abs() + hundred * apq.abs() == aqq.abs()) {
                    a[(p, q)] = T::zero();
                    a[(q, p)] = T::zero();
                    continue;
                }
                let theta = (aqq - app) * half / apq;
                let t = if theta.abs() > T::lit(1e150) {
                    half / theta
                } else {
                    let t = T::one() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    if theta < T::zero() {
                        -t
                    } else {
                        t
                    }
                };
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                rotate(&mut a, p, q, c, s, t);
                rotate_rows(&mut vt, p, q, c, s);
            }
        }
    }
    if !converged {
        return Err(Error::NoConvergence { what: "cyclic Jacobi", iterations: MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap_or(std::cmp::Ordering::Equal));
    let values: Vec<T> = order.iter().map(|&i| a[(i, i)]).collect();
    let floor = T::lit(SIGN_FLOOR);
    let mut vectors = DenseMatrix::zeros(n, n);
    for (k, &src) in order.iter().enumerate() {
        let v = vt.row(src);
        let flip = v.iter().find(|x| x.abs() > floor).is_some_and(|x| *x < T::zero());
        for i in 0..n {
            vectors[(i, k)] = if flip { -v[i] } else { v[i] };
        }
    }
    Ok(EigenDecomposition { values, vectors })
}

fn max_off_diagonal<T: Scalar>(a: &DenseMatrix<T>) -> T {
    let n = a.rows();
    let mut worst = T::zero();
    for i in 0..n {
        for x in &a.row(i)[i + 1..] {
            worst = worst.max(x.abs());
        }
    }
    worst
}

/// `A <- Jᵀ A J` for the plane rotation annihilating `A[p,q]`.
fn rotate<T: Scalar>(a: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T, t: T) {
    let n = a.rows();
    let apq = a[(p, q)];
    let app = a[(p, p)];
    let aqq = a[(q, q)];
    {
        let data = a.as_mut_slice();
        let (lo, hi) = data.split_at_mut(q * n);
        let rp = &mut lo[p * n..(p + 1) * n];
        let rq = &mut hi[..n];
        for k in 0..n {
            let x = rp[k];
            let y = rq[k];
            rp[k] = c * x - s * y;
            rq[k] = s * x + c * y;
        }
    }
    a[(p, p)] = app - t * apq;
    a[(q, q)] = aqq + t * apq;
    a[(p, q)] = T::zero();
    a[(q, p)] = T::zero();
    for k in 0..n {
        if k != p && k != q {
            let vp = a[(p, k)];
            let vq = a[(q, k)];
            a[(k, p)] = vp;
            a[(k, q)] = vq;
        }
    }
}

fn rotate_rows<T: Scalar>(vt: &mut DenseMatrix<T>, p: usize, q: usize, c: T, s: T) {
    let n = vt.cols();
    let data = vt.as_mut_slice();
    let (lo, hi) = data.split_at_mut(q * n);
    let rp = &mut lo[p * n..(p + 1) * n];
    let rq = &mut hi[..n];
    for k in 0..n {
        let x = rp[k];
        let y = rq[k];
        rp[k] = c * x - s * y;
        rq[k] = s * x + c * y;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_input() {
        let m = DenseMatrix::diag(&[1.0, 2.0]);
        let e = sym_eig(&m, DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![2.0, 1.0]);
        assert_eq!(e.vector(0), vec![0.0, 1.0]);
        assert_eq!(e.vector(1), vec![1.0, 0.0]);
    }

    #[test]
    fn identity_input() {
        let e = sym_eig(&DenseMatrix::<f64>::identity(4), DEFAULT_TOL).unwrap();
        assert_eq!(e.values, vec![1.0; 4]);
    }

    #[test]
    fn rejects_non_square_and_asymmetric() {
        let r = DenseMatrix::<f64>::zeros(2, 3);
        assert!(matches!(sym_eig(&r, DEFAULT_TOL), Err(Error::NonSquare { .. })));
        let m = DenseMatrix::from_vec(2, 2, vec![1.0, 2.0, 2.1, 1.0]).unwrap();
        assert!(matches!(sym_eig(&m, DEFAULT_TOL), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn two_by_two_closed_form() {
        let m = DenseMatrix::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = sym_eig(&m, DEFAULT_TOL).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-14);
        assert!((e.values[1] - 1.0).abs() < 1e-14);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let v1 = e.vector(1);
        assert!((v1[0] - h).abs() < 1e-14 && (v1[1] + h).abs() < 1e-14);
    }

    #[test]
    fn sign_convention_first_component_nonnegative() {
        let m = DenseMatrix::from_vec(3, 3, vec![4.0, -2.0, 0.5, -2.0, 3.0, 1.0, 0.5, 1.0, 1.0]).unwrap();
        let e = sym_eig(&m, DEFAULT_TOL).unwrap();
        for k in 0..3 {
            let v = e.vector(k);
            let first = v.iter().find(|x| x.abs() > 1e-12).unwrap();
            assert!(*first >= 0.0);
        }
    }

    #[test]
    fn f32_decomposition() {
        let m = DenseMatrix::<f32>::from_vec(2, 2, vec![2.0, 1.0, 1.0, 2.0]).unwrap();
        let e = sym_eig(&m, 1e-6).unwrap();
        assert!((e.values[0] - 3.0).abs() < 1e-5);
    }
}
