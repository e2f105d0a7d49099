//! Empirical neural tangent kernels.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::checkpoint::{read_array, read_json, write_arrays, write_json, ArrayEntry};
use crate::net::{backprop_deltas, forward, per_output_jacobian, relu, NetConfig, ParamSet};
use crate::numerics::{gemm, DenseMatrix, MatView};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelNorm {
    /// `∇f_μ · ∇f_ν` as is.
    #[serde(rename = "RAW")]
    Raw,
    /// RAW scaled by `effective_lr / η₀` and the probe measure `1/P`.
    #[serde(rename = "FLOW")]
    Flow,
}

/// Symmetric `(P·C) x (P·C)` Gram matrix, point-major with `C x C` channel blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMatrix<T> {
    pub matrix: DenseMatrix<T>,
    pub probe_ids: Vec<usize>,
    pub channels: usize,
    pub normalization: KernelNorm,
}

impl<T: Scalar> KernelMatrix<T> {
    pub fn new(matrix: DenseMatrix<T>, channels: usize, normalization: KernelNorm) -> Result<Self> {
        if !matrix.is_square() || channels == 0 || !matrix.rows().is_multiple_of(channels) {
            return Err(Error::ShapeMismatch(format!(
                "kernel {}x{} is not square with {} channel blocks",
                matrix.rows(),
                matrix.cols(),
                channels
            )));
        }
        let points = matrix.rows() / channels;
        Ok(KernelMatrix { matrix, probe_ids: (0..points).collect(), channels, normalization })
    }

    pub fn points(&self) -> usize {
        self.probe_ids.len()
    }

    pub fn size(&self) -> usize {
        self.matrix.rows()
    }

    /// RAW → FLOW: multiply by `lr_ratio / P` where `lr_ratio = effective_lr / η₀`.
    pub fn to_flow(&self, lr_ratio: f64) -> Result<Self> {
        if self.normalization != KernelNorm::Raw {
            return Err(Error::ShapeMismatch("to_flow expects a RAW kernel".into()));
        }
        let s = T::lit(lr_ratio / self.points() as f64);
        Ok(KernelMatrix { matrix: self.matrix.clone().scaled(s), normalization: KernelNorm::Flow, ..self.clone() })
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.size() != other.size()
            || self.channels != other.channels
            || self.probe_ids != other.probe_ids
            || self.normalization != other.normalization
        {
            return Err(Error::ShapeMismatch(format!(
                "kernels differ: {}x{} ({:?}, C={}) vs {}x{} ({:?}, C={})",
                self.size(),
                self.size(),
                self.normalization,
                self.channels,
                other.size(),
                other.size(),
                other.normalization,
                other.channels
            )));
        }
        Ok(())
    }

    /// Single-channel block `c, c'` as a `P x P` matrix.
    pub fn block(&self, c: usize, c2: usize) -> DenseMatrix<T> {
        let ch = self.channels;
        DenseMatrix::from_fn(self.points(), self.points(), |i, j| self.matrix[(i * ch + c, j * ch + c2)])
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelManifest {
    version: u32,
    normalization: KernelNorm,
    channels: usize,
    probe_ids: Vec<usize>,
    arrays: Vec<ArrayEntry>,
}

/// Stores a kernel as `manifest.json` + `K.bin` (little-endian `f64`, row-major).
pub fn save_kernel<T: Scalar>(dir: &Path, kernel: &KernelMatrix<T>) -> Result<()> {
    let arrays = write_arrays(dir, &[("K".to_string(), &kernel.matrix)])?;
    let manifest = KernelManifest {
        version: crate::net::checkpoint::CHECKPOINT_VERSION,
        normalization: kernel.normalization,
        channels: kernel.channels,
        probe_ids: kernel.probe_ids.clone(),
        arrays,
    };
    write_json(&dir.join("manifest.json"), &manifest)
}

pub fn load_kernel<T: Scalar>(dir: &Path) -> Result<KernelMatrix<T>> {
    let manifest: KernelManifest = read_json(&dir.join("manifest.json"))?;
    let entry = manifest
        .arrays
        .first()
        .ok_or_else(|| Error::MalformedArtifact { path: dir.to_path_buf(), reason: "kernel manifest lists no arrays".into() })?;
    let matrix = read_array(dir, entry)?;
    Ok(KernelMatrix { matrix, probe_ids: manifest.probe_ids, channels: manifest.channels, normalization: manifest.normalization })
}

/// eNTK as the Gram matrix `J Jᵀ` of the full per-output Jacobian.
///
/// Memory is `O(P·C·#params)`; use [`entk_layerwise`] for wide networks.
pub fn entk<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, probes: &DenseMatrix<T>) -> Result<KernelMatrix<T>> {
    let jac = per_output_jacobian(params, config, probes)?;
    let mut k = jac.gram_rows();
    k.symmetrize();
    KernelMatrix::new(k, config.output_dim, KernelNorm::Raw)
}

fn gram<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> DenseMatrix<T> {
    let mut out = DenseMatrix::zeros(a.rows(), b.rows());
    gemm(
        T::one(),
        MatView::new(a.as_slice(), a.rows(), a.cols(), false),
        MatView::new(b.as_slice(), b.rows(), b.cols(), true),
        T::zero(),
        out.as_mut_slice(),
    );
    out
}

/// Per-weight-matrix eNTK contributions, `W0` first and the readout last.
///
/// Every weight gradient is an outer product `s_ℓ δ^{ℓ+1} ⊗ φ(h^ℓ)`, so each
/// contribution is `s_ℓ² (δδᵀ) ∘ (φφᵀ)` and never materializes the Jacobian.
pub fn entk_layer_contributions<T: Scalar>(
    params: &ParamSet<T>,
    config: &NetConfig,
    probes: &DenseMatrix<T>,
) -> Result<Vec<KernelMatrix<T>>> {
    let trace = forward(params, config, probes)?;
    let points = probes.rows();
    let channels = config.output_dim;
    let hidden = config.hidden_layers();
    // deltas[c][l] = ∂f_c/∂h^{l+1}
    let deltas: Vec<Vec<DenseMatrix<T>>> = (0..channels)
        .map(|c| {
            let dout = DenseMatrix::from_fn(points, channels, |_, k| if k == c { T::one() } else { T::zero() });
            backprop_deltas(params, config, &trace, &dout)
        })
        .collect();
    let size = points * channels;
    let mut out = Vec::with_capacity(hidden + 1);
    for l in 0..=hidden {
        let input = if l == 0 { probes.clone() } else { relu(&trace.preacts[l - 1]) };
        let feat = gram(&input, &input);
        let s2 = T::lit(config.layer_scale(l).powi(2));
        let mut k = DenseMatrix::zeros(size, size);
        for c in 0..channels {
            for c2 in c..channels {
                let cot: Option<DenseMatrix<T>> = if l == hidden { None } else { Some(gram(&deltas[c][l], &deltas[c2][l])) };
                if cot.is_none() && c != c2 {
                    continue;
                }
                for mu in 0..points {
                    for nu in 0..points {
                        let g = cot.as_ref().map_or(T::one(), |m| m[(mu, nu)]);
                        let v = s2 * g * feat[(mu, nu)];
                        k[(mu * channels + c, nu * channels + c2)] = v;
                        k[(nu * channels + c2, mu * channels + c)] = v;
                    }
                }
            }
        }
        k.symmetrize();
        out.push(KernelMatrix::new(k, channels, KernelNorm::Raw)?);
    }
    Ok(out)
}

/// eNTK summed from per-layer outer-product contributions (exact, `O(P²N + PN²)`).
pub fn entk_layerwise<T: Scalar>(params: &ParamSet<T>, config: &NetConfig, probes: &DenseMatrix<T>) -> Result<KernelMatrix<T>> {
    let parts = entk_layer_contributions(params, config, probes)?;
    let mut total = parts[0].clone();
    for p in &parts[1..] {
        total.matrix.add_scaled(&p.matrix, T::one())?;
    }
    Ok(total)
}

/// Entrywise mean of kernels sharing shape, probes and normalization.
pub fn ensemble_avg<T: Scalar>(kernels: &[KernelMatrix<T>]) -> Result<KernelMatrix<T>> {
    let first = kernels.first().ok_or(Error::EmptyInput("ensemble_avg needs at least one kernel"))?;
    let mut acc = first.clone();
    for k in &kernels[1..] {
        first.check_compatible(k)?;
        acc.matrix.add_scaled(&k.matrix, T::one())?;
    }
    acc.matrix.scale(T::one() / T::from_usize(kernels.len()).unwrap());
    Ok(acc)
}
