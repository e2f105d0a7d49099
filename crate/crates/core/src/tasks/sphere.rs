use crate::numerics::{DenseMatrix, RngState};

/// `n` points uniform on `S^{D−1}`: normalized Gaussian vectors, one row each.
///
/// Consumes exactly `n·D` Gaussian draws from `rng`.
pub fn sample_sphere(rng: &mut RngState, dim: usize, n: usize) -> DenseMatrix<f64> {
    let mut data = rng.gaussian_stream(n * dim);
    if dim > 0 {
        for row in data.chunks_exact_mut(dim) {
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                row.iter_mut().for_each(|v| *v /= norm);
            } else {
                row[0] = 1.0;
            }
        }
    }
    DenseMatrix::from_vec(n, dim, data).expect("draw count matches shape")
}
