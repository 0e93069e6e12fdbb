//! Kernels, the label-signed Gram matrix `Q` and kernel input gradients.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::pointset::LabeledUnion;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec {
    Linear,
    /// `exp(-|x - y|^2 / (2 bandwidth^2))`
    Gaussian { bandwidth: f64 },
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if bandwidth > 0.0 && bandwidth.is_finite() {
            Ok(KernelSpec::Gaussian { bandwidth })
        } else {
            Err(Error::InvalidSpec(format!("Gaussian bandwidth must be positive, got {bandwidth}")))
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, KernelSpec::Linear)
    }

    /// Unchecked evaluation; callers guarantee equal lengths.
    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Linear => dot(x, y),
            KernelSpec::Gaussian { bandwidth } => {
                (-sq_dist(x, y) / (2.0 * bandwidth * bandwidth)).exp()
            }
        }
    }

    /// Adds `scale * dk(x, y)/dx` into `out`.
    #[inline]
    pub(crate) fn grad_x_accumulate(&self, x: &[f64], y: &[f64], scale: f64, out: &mut [f64]) {
        match *self {
            KernelSpec::Linear => {
                for (o, yk) in out.iter_mut().zip(y) {
                    *o += scale * yk;
                }
            }
            KernelSpec::Gaussian { bandwidth } => {
                let s2 = bandwidth * bandwidth;
                let k = (-sq_dist(x, y) / (2.0 * s2)).exp();
                let c = -scale * k / s2;
                for ((o, xk), yk) in out.iter_mut().zip(x).zip(y) {
                    *o += c * (xk - yk);
                }
            }
        }
    }
}

#[inline]
pub(crate) fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

#[inline]
pub(crate) fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(x.len(), y.len())?;
    Ok(spec.eval_unchecked(x, y))
}

/// Gradient of `k(x, y)` with respect to `x`.
pub fn kernel_grad_point(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    check_dim(x.len(), y.len())?;
    let mut g = vec![0.0; x.len()];
    spec.grad_x_accumulate(x, y, 1.0, &mut g);
    Ok(g)
}

/// Median pairwise Euclidean distance over distinct pairs. Falls back to `1.0`
/// when every pair coincides.
pub fn median_bandwidth<'a, I>(points: I) -> f64
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let pts: Vec<&[f64]> = points.into_iter().collect();
    let mut dists = Vec::with_capacity(pts.len() * pts.len().saturating_sub(1) / 2);
    for i in 0..pts.len() {
        for j in 0..i {
            dists.push(sq_dist(pts[i], pts[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let med = if m % 2 == 1 { dists[m / 2] } else { 0.5 * (dists[m / 2 - 1] + dists[m / 2]) };
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

/// `Q_ij = y_i y_j k(x_i, x_j)` together with the raw (unsigned) kernel blocks.
#[derive(Clone, Debug, PartialEq)]
pub struct GramBlocks {
    pub q: DMatrix<f64>,
    pub q_aa: DMatrix<f64>,
    pub q_bb: DMatrix<f64>,
    pub q_ab: DMatrix<f64>,
}

impl GramBlocks {
    pub fn a_count(&self) -> usize {
        self.q_aa.nrows()
    }

    pub fn b_count(&self) -> usize {
        self.q_bb.nrows()
    }

    pub fn len(&self) -> usize {
        self.q.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.nrows() == 0
    }

    /// Rebuilds `Q` from the raw blocks and the `+1 / -1` label partition.
    pub fn reassemble(&self) -> DMatrix<f64> {
        let (na, nb) = (self.a_count(), self.b_count());
        let mut q = DMatrix::zeros(na + nb, na + nb);
        q.view_mut((0, 0), (na, na)).copy_from(&self.q_aa);
        q.view_mut((na, na), (nb, nb)).copy_from(&self.q_bb);
        q.view_mut((0, na), (na, nb)).copy_from(&(-&self.q_ab));
        q.view_mut((na, 0), (nb, na)).copy_from(&(-self.q_ab.transpose()));
        q
    }
}

pub fn build_gram(spec: &KernelSpec, c: &LabeledUnion) -> GramBlocks {
    let n = c.len();
    let (na, nb) = (c.a_count(), c.b_count());
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = spec.eval_unchecked(c.point(i), c.point(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    let q_aa = k.view((0, 0), (na, na)).into_owned();
    let q_bb = k.view((na, na), (nb, nb)).into_owned();
    let q_ab = k.view((0, na), (na, nb)).into_owned();
    let y = c.labels();
    for i in 0..n {
        for j in 0..n {
            k[(i, j)] *= y[i] * y[j];
        }
    }
    GramBlocks { q: k, q_aa, q_bb, q_ab }
}

/// Raw kernel matrix between two point collections.
pub(crate) fn cross_kernel<'a, I, J>(spec: &KernelSpec, xs: I, ys: J) -> DMatrix<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
    J: IntoIterator<Item = &'a [f64]>,
{
    let xs: Vec<&[f64]> = xs.into_iter().collect();
    let ys: Vec<&[f64]> = ys.into_iter().collect();
    DMatrix::from_fn(xs.len(), ys.len(), |i, j| spec.eval_unchecked(xs[i], ys[j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{generate, make_labeled_union, Domain, GeneratorSpec, PointSet};
    use proptest::prelude::*;

    fn union(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> LabeledUnion {
        let a = PointSet::new(a, Domain::SourceA).unwrap();
        let b = PointSet::new(b, Domain::TargetB).unwrap();
        make_labeled_union(&a, &b).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_eq!(kernel_eval(&KernelSpec::Linear, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let g = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(kernel_eval(&g, &[0.3, -1.0], &[0.3, -1.0]).unwrap(), 1.0);
        let v = kernel_eval(&g, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 0.367_879_441_171_442_33).abs() < 1e-15);
        assert!(kernel_eval(&g, &[0.0], &[1.0, 1.0]).is_err());
        assert!(KernelSpec::gaussian(0.0).is_err());
    }

    #[test]
    fn kernel_gradients() {
        let g = kernel_grad_point(&KernelSpec::Linear, &[9.0, -1.0], &[3.0, 4.0]).unwrap();
        assert_eq!(g, vec![3.0, 4.0]);
        let gk = KernelSpec::gaussian(1.0).unwrap();
        assert_eq!(kernel_grad_point(&gk, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), vec![0.0, 0.0]);

        let (x, y, h) = ([1.0, 0.0], [0.0, 0.0], 1e-5);
        let g = kernel_grad_point(&gk, &x, &y).unwrap();
        for k in 0..2 {
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (kernel_eval(&gk, &xp, &y).unwrap() - kernel_eval(&gk, &xm, &y).unwrap()) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn gram_identical_points() {
        let c = union(vec![vec![1.0, 0.0]], vec![vec![1.0, 0.0]]);
        let g = build_gram(&KernelSpec::Linear, &c);
        assert_eq!(g.q, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        assert_eq!(g.q_aa[(0, 0)], 1.0);
        assert_eq!(g.q_bb[(0, 0)], 1.0);
        assert_eq!(g.q_ab[(0, 0)], 1.0);

        let c = union(vec![vec![1.0, 0.0]], vec![vec![0.0, 1.0]]);
        let g = build_gram(&KernelSpec::Linear, &c);
        assert_eq!(g.q, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]));
    }

    #[test]
    fn gram_matches_pairwise_recomputation() {
        let a = generate(&GeneratorSpec::gaussian_blob(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2, 5)).unwrap();
        let b = generate(&GeneratorSpec::gaussian_blob(vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 2, 6))
            .unwrap()
            .with_tag(Domain::TargetB);
        let c = make_labeled_union(&a, &b).unwrap();
        let spec = KernelSpec::gaussian(2.0).unwrap();
        let g = build_gram(&spec, &c);
        for i in 0..4 {
            for j in 0..4 {
                let expect = c.label(i) * c.label(j) * kernel_eval(&spec, c.point(i), c.point(j)).unwrap();
                assert!((g.q[(i, j)] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn median_heuristic() {
        let pts: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![3.0]];
        // distances 1, 2, 3
        assert_eq!(median_bandwidth(pts.iter().map(Vec::as_slice)), 2.0);
        let same: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0]];
        assert_eq!(median_bandwidth(same.iter().map(Vec::as_slice)), 1.0);
    }

    fn arb_points(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-3.0..3.0f64, 2), 1..n)
    }

    proptest! {
        #[test]
        fn gram_symmetric_psd_and_tiles(a in arb_points(6), b in arb_points(6), sigma in 0.3..3.0f64, linear in any::<bool>()) {
            let spec = if linear { KernelSpec::Linear } else { KernelSpec::gaussian(sigma).unwrap() };
            let c = union(a, b);
            let g = build_gram(&spec, &c);
            let n = g.len();
            for i in 0..n {
                for j in 0..n {
                    prop_assert!((g.q[(i, j)] - g.q[(j, i)]).abs() <= 1e-14);
                }
            }
            let scale = g.q.norm().max(1.0);
            let eig = g.q.clone().symmetric_eigen();
            prop_assert!(eig.eigenvalues.min() >= -1e-9 * scale);
            prop_assert_eq!(g.reassemble(), g.q.clone());
        }

        #[test]
        fn kernel_value_bounds(x in prop::collection::vec(-2.0..2.0f64, 3), y in prop::collection::vec(-2.0..2.0f64, 3), sigma in 0.5..5.0f64) {
            let v = kernel_eval(&KernelSpec::gaussian(sigma).unwrap(), &x, &y).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
            let lin = kernel_eval(&KernelSpec::Linear, &x, &y).unwrap();
            let bound = dot(&x, &x).sqrt() * dot(&y, &y).sqrt();
            prop_assert!(lin.abs() <= bound * (1.0 + 1e-12));
        }
    }
}
