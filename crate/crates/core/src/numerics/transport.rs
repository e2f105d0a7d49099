use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// 1-Wasserstein distance between two empirical distributions on the line.
///
/// Both samples are sorted; when lengths differ the shorter sample's quantile
/// function is resampled at the longer sample's midpoints `(i + 1/2) / n`.
pub fn wasserstein1<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput("wasserstein1 needs non-empty samples"));
    }
    let sa = sorted(a);
    let sb = sorted(b);
    if sa.len() == sb.len() {
        let n = T::from_usize(sa.len()).unwrap();
        return Ok(sa.iter().zip(&sb).map(|(x, y)| (*x - *y).abs()).sum::<T>() / n);
    }
    let (long, short) = if sa.len() > sb.len() { (&sa, &sb) } else { (&sb, &sa) };
    let n = long.len();
    let m = short.len();
    let total: T = long
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let u = (i as f64 + 0.5) / n as f64;
            let j = ((u * m as f64) as usize).min(m - 1);
            (*x - short[j]).abs()
        })
        .sum();
    Ok(total / T::from_usize(n).unwrap())
}

fn sorted<T: Scalar>(xs: &[T]) -> Vec<T> {
    let mut v = xs.to_vec();
    v.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    v
}
