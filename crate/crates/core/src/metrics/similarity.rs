use crate::error::{Error, Result};
use crate::numerics::DenseMatrix;
use crate::scalar::Scalar;

/// Centered kernel alignment `⟨HK₁H, HK₂H⟩_F / (‖HK₁H‖_F ‖HK₂H‖_F)`, `H = I − 11ᵀ/P`.
pub fn cka<T: Scalar>(k1: &DenseMatrix<T>, k2: &DenseMatrix<T>) -> Result<T> {
    k1.check_same_shape(k2)?;
    if !k1.is_square() {
        return Err(Error::NonSquare { rows: k1.rows(), cols: k1.cols() });
    }
    let c1 = center(k1);
    let c2 = center(k2);
    let n1 = c1.frobenius_norm();
    let n2 = c2.frobenius_norm();
    if n1.as_f64() < 1e-14 || n2.as_f64() < 1e-14 {
        return Err(Error::DegenerateKernel);
    }
    Ok(crate::numerics::dot(c1.as_slice(), c2.as_slice()) / (n1 * n2))
}

/// `H K H`: subtract row and column means, add back the grand mean.
fn center<T: Scalar>(k: &DenseMatrix<T>) -> DenseMatrix<T> {
    let n = k.rows();
    let nf = T::from_usize(n).unwrap();
    let row_means: Vec<T> = (0..n).map(|i| k.row(i).iter().copied().sum::<T>() / nf).collect();
    let col_means: Vec<T> = (0..n).map(|j| (0..n).map(|i| k[(i, j)]).sum::<T>() / nf).collect();
    let grand = row_means.iter().copied().sum::<T>() / nf;
    DenseMatrix::from_fn(n, n, |i, j| k[(i, j)] - row_means[i] - col_means[j] + grand)
}

/// `‖f − f_ref‖₂ / ‖f_ref‖₂` over all entries.
pub fn relative_rmse<T: Scalar>(f: &[T], f_ref: &[T]) -> Result<T> {
    if f.len() != f_ref.len() {
        return Err(Error::DimensionMismatch { context: "relative_rmse", expected: f_ref.len(), got: f.len() });
    }
    let den = f_ref.iter().map(|v| *v * *v).sum::<T>().sqrt();
    if den == T::zero() {
        return Err(Error::ZeroReference);
    }
    let num = f.iter().zip(f_ref).map(|(a, b)| (*a - *b) * (*a - *b)).sum::<T>().sqrt();
    Ok(num / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::RngState;

    fn random_psd(seed: u64, n: usize) -> DenseMatrix<f64> {
        let g = DenseMatrix::from_vec(n, 3, RngState::new(seed).gaussian_stream(3 * n)).unwrap();
        g.gram_rows()
    }

    #[test]
    fn self_alignment_and_scale_invariance() {
        let k = random_psd(1, 6);
        assert!((cka(&k, &k).unwrap() - 1.0).abs() < 1e-12);
        assert!((cka(&k, &k.clone().scaled(4.2)).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn in_unit_interval_for_psd() {
        for s in 0..10 {
            let v = cka(&random_psd(s, 8), &random_psd(s + 100, 8)).unwrap();
            assert!((0.0..=1.0 + 1e-12).contains(&v));
        }
    }

    #[test]
    fn constant_kernel_is_degenerate() {
        let k = DenseMatrix::from_fn(4, 4, |_, _| 1.0);
        assert!(matches!(cka(&k, &k), Err(Error::DegenerateKernel)));
        assert!(matches!(cka(&k, &DenseMatrix::zeros(3, 3)), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn rmse_cases() {
        let r = [1.0, -2.0, 0.5];
        assert_eq!(relative_rmse(&r, &r).unwrap(), 0.0);
        assert_eq!(relative_rmse(&[0.0; 3], &r).unwrap(), 1.0);
        assert!((relative_rmse::<f64>(&[2.0, -4.0, 1.0], &r).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(relative_rmse(&r, &[0.0; 3]), Err(Error::ZeroReference)));
    }
}
