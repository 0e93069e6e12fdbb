//! Maximum mean discrepancy and its α-weighted variant.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Result};
use crate::kernels::{cross_kernel, KernelSpec};
use crate::pointset::PointSet;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MmdNormalization {
    /// `(1/|A|²) ΣΣ k_AA + (1/|B|²) ΣΣ k_BB - (2/|A||B|) ΣΣ k_AB`
    #[default]
    Standard,
    /// Coefficients `1/(2|A|)`, `1/(2|B|)`, `1/(|A||B|)` on the same three sums.
    HalfWithin,
}

fn block_sums(kernel: &KernelSpec, a: &PointSet, b: &PointSet) -> (f64, f64, f64) {
    let kaa = cross_kernel(kernel, a.iter(), a.iter()).sum();
    let kbb = cross_kernel(kernel, b.iter(), b.iter()).sum();
    let kab = cross_kernel(kernel, a.iter(), b.iter()).sum();
    (kaa, kbb, kab)
}

pub fn mmd_distance(
    kernel: &KernelSpec,
    a: &PointSet,
    b: &PointSet,
    normalization: MmdNormalization,
) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (kaa, kbb, kab) = block_sums(kernel, a, b);
    Ok(match normalization {
        MmdNormalization::Standard => kaa / (na * na) + kbb / (nb * nb) - 2.0 * kab / (na * nb),
        MmdNormalization::HalfWithin => kaa / (2.0 * na) + kbb / (2.0 * nb) - kab / (na * nb),
    })
}

/// Gradient of the standard MMD estimate with respect to each point of `b`.
pub fn mmd_grad_points(kernel: &KernelSpec, a: &PointSet, b: &PointSet) -> Result<Vec<Vec<f64>>> {
    check_dim(a.dim(), b.dim())?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut out = Vec::with_capacity(b.len());
    for x in b.iter() {
        let mut g = vec![0.0; b.dim()];
        for y in b.iter() {
            kernel.grad_x_accumulate(x, y, 2.0 / (nb * nb), &mut g);
        }
        for y in a.iter() {
            kernel.grad_x_accumulate(x, y, -2.0 / (na * nb), &mut g);
        }
        out.push(g);
    }
    Ok(out)
}

/// Witness-function scores `mean_A k(a, x) - mean_B k(b, x)` offset so that the
/// midpoint between the two class means of the witness is zero.
pub fn mmd_witness_scores(kernel: &KernelSpec, a: &PointSet, b: &PointSet) -> Result<Vec<f64>> {
    check_dim(a.dim(), b.dim())?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let witness = |x: &[f64]| -> f64 {
        a.iter().map(|y| kernel.eval_unchecked(x, y)).sum::<f64>() / na
            - b.iter().map(|y| kernel.eval_unchecked(x, y)).sum::<f64>() / nb
    };
    let wa: Vec<f64> = a.iter().map(witness).collect();
    let wb: Vec<f64> = b.iter().map(witness).collect();
    let mid = 0.5 * (wa.iter().sum::<f64>() / na + wb.iter().sum::<f64>() / nb);
    Ok(wa.into_iter().chain(wb).map(|s| s - mid).collect())
}

/// `(1/2λ) [α_Aᵀ K_AA α_A + α_Bᵀ K_BB α_B - 2 α_Aᵀ K_AB α_B]` on raw kernel blocks.
pub fn weighted_mmd(
    kernel: &KernelSpec,
    a: &PointSet,
    b: &PointSet,
    alpha: &[f64],
    lambda: f64,
) -> Result<f64> {
    check_dim(a.dim(), b.dim())?;
    check_dim(a.len() + b.len(), alpha.len())?;
    let (alpha_a, alpha_b) = alpha.split_at(a.len());
    let va = DVector::from_column_slice(alpha_a);
    let vb = DVector::from_column_slice(alpha_b);
    let kaa = cross_kernel(kernel, a.iter(), a.iter());
    let kbb = cross_kernel(kernel, b.iter(), b.iter());
    let kab = cross_kernel(kernel, a.iter(), b.iter());
    let quad = va.dot(&(&kaa * &va)) + vb.dot(&(&kbb * &vb)) - 2.0 * va.dot(&(&kab * &vb));
    Ok(quad / (2.0 * lambda))
}

/// Gradient of [`weighted_mmd`] with respect to each point of `b` at fixed `α`:
/// `(1/λ) α_m [Σ_B α_j ∂k(b_m, b_j) - Σ_A α_i ∂k(b_m, a_i)]`.
pub fn weighted_mmd_grad_points(
    kernel: &KernelSpec,
    a: &PointSet,
    b: &PointSet,
    alpha: &[f64],
    lambda: f64,
) -> Result<Vec<Vec<f64>>> {
    check_dim(a.dim(), b.dim())?;
    check_dim(a.len() + b.len(), alpha.len())?;
    let (alpha_a, alpha_b) = alpha.split_at(a.len());
    let mut out = Vec::with_capacity(b.len());
    for (m, x) in b.iter().enumerate() {
        let mut g = vec![0.0; b.dim()];
        let s = alpha_b[m] / lambda;
        for (y, aj) in b.iter().zip(alpha_b) {
            kernel.grad_x_accumulate(x, y, s * aj, &mut g);
        }
        for (y, ai) in a.iter().zip(alpha_a) {
            kernel.grad_x_accumulate(x, y, -s * ai, &mut g);
        }
        out.push(g);
    }
    Ok(out)
}
