//! Matching functions `M_θ` that move the target set `B` onto `A`, and the
//! chain rule from point gradients to parameter gradients.

use std::io::Write;

use crate::error::{check_dim, Error, Result};
use crate::pointset::{Domain, PointSet};

/// Parameters of a matching function. Gradients share the same shape.
#[derive(Clone, Debug, PartialEq)]
pub enum MatcherParams {
    /// `b_i + offsets[i]`; every target point moves freely.
    FreePoints { offsets: Vec<Vec<f64>> },
    /// `matrix · b_i + translation`; `matrix` is stored as rows.
    Affine { matrix: Vec<Vec<f64>>, translation: Vec<f64> },
}

impl MatcherParams {
    /// Zero offsets, i.e. the identity map.
    pub fn free_points(count: usize, dim: usize) -> Self {
        MatcherParams::FreePoints { offsets: vec![vec![0.0; dim]; count] }
    }

    pub fn affine_identity(dim: usize) -> Self {
        let matrix = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        MatcherParams::Affine { matrix, translation: vec![0.0; dim] }
    }

    /// Zero-valued parameters of the same shape.
    pub fn zeros_like(&self) -> Self {
        match self {
            MatcherParams::FreePoints { offsets } => MatcherParams::FreePoints {
                offsets: offsets.iter().map(|o| vec![0.0; o.len()]).collect(),
            },
            MatcherParams::Affine { matrix, translation } => MatcherParams::Affine {
                matrix: matrix.iter().map(|r| vec![0.0; r.len()]).collect(),
                translation: vec![0.0; translation.len()],
            },
        }
    }

    /// Flat parameter vector: concatenated offsets, or the row-major matrix
    /// followed by the translation.
    pub fn to_flat(&self) -> Vec<f64> {
        match self {
            MatcherParams::FreePoints { offsets } => offsets.concat(),
            MatcherParams::Affine { matrix, translation } => {
                let mut v = matrix.concat();
                v.extend_from_slice(translation);
                v
            }
        }
    }

    /// Inverse of [`to_flat`](Self::to_flat) using `self` as the shape template.
    pub fn from_flat_like(&self, flat: &[f64]) -> Result<Self> {
        check_dim(self.num_params(), flat.len())?;
        let mut it = flat.iter().copied();
        let mut take = |n: usize| -> Vec<f64> { it.by_ref().take(n).collect() };
        Ok(match self {
            MatcherParams::FreePoints { offsets } => {
                MatcherParams::FreePoints { offsets: offsets.iter().map(|o| take(o.len())).collect() }
            }
            MatcherParams::Affine { matrix, translation } => MatcherParams::Affine {
                matrix: matrix.iter().map(|r| take(r.len())).collect(),
                translation: take(translation.len()),
            },
        })
    }

    pub fn num_params(&self) -> usize {
        match self {
            MatcherParams::FreePoints { offsets } => offsets.iter().map(Vec::len).sum(),
            MatcherParams::Affine { matrix, translation } => {
                matrix.iter().map(Vec::len).sum::<usize>() + translation.len()
            }
        }
    }

    /// `self += scale * other`; shapes must match.
    pub fn axpy(&mut self, scale: f64, other: &MatcherParams) -> Result<()> {
        let mut flat = self.to_flat();
        let o = other.to_flat();
        check_dim(flat.len(), o.len())?;
        for (v, g) in flat.iter_mut().zip(&o) {
            *v += scale * g;
        }
        *self = self.from_flat_like(&flat)?;
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.to_flat().iter().all(|v| v.is_finite())
    }

    fn validate(&self, b: &PointSet) -> Result<()> {
        let d = b.dim();
        match self {
            MatcherParams::FreePoints { offsets } => {
                if offsets.len() != b.len() {
                    return Err(Error::InvalidParams(format!(
                        "{} offsets for {} target points",
                        offsets.len(),
                        b.len()
                    )));
                }
                for o in offsets {
                    check_dim(d, o.len())?;
                }
            }
            MatcherParams::Affine { matrix, translation } => {
                check_dim(d, matrix.len())?;
                check_dim(d, translation.len())?;
                for row in matrix {
                    check_dim(d, row.len())?;
                }
                if !self.is_finite() {
                    return Err(Error::InvalidParams("affine parameters must be finite".into()));
                }
            }
        }
        Ok(())
    }
}

/// `B' = M_θ(B)`, tagged as the target domain.
pub fn apply(params: &MatcherParams, b: &PointSet) -> Result<PointSet> {
    params.validate(b)?;
    let d = b.dim();
    let mut coords = Vec::with_capacity(b.len() * d);
    match params {
        MatcherParams::FreePoints { offsets } => {
            for (x, o) in b.iter().zip(offsets) {
                coords.extend(x.iter().zip(o).map(|(xk, ok)| xk + ok));
            }
        }
        MatcherParams::Affine { matrix, translation } => {
            for x in b.iter() {
                for (row, t) in matrix.iter().zip(translation) {
                    coords.push(row.iter().zip(x).map(|(m, xk)| m * xk).sum::<f64>() + t);
                }
            }
        }
    }
    PointSet::from_flat(coords, d, Domain::TargetB)
}

/// Chain rule from `∂f/∂b'_i` to `∂f/∂θ`.
pub fn backprop_params(
    params: &MatcherParams,
    b: &PointSet,
    grad_points: &[Vec<f64>],
) -> Result<MatcherParams> {
    check_dim(b.len(), grad_points.len())?;
    let indices: Vec<usize> = (0..b.len()).collect();
    backprop_indexed(params, b, &indices, grad_points)
}

/// Like [`backprop_params`] when gradients are available only for the target
/// points at `indices` (a mini-batch); the other points contribute nothing.
pub fn backprop_indexed(
    params: &MatcherParams,
    b: &PointSet,
    indices: &[usize],
    grad_points: &[Vec<f64>],
) -> Result<MatcherParams> {
    params.validate(b)?;
    check_dim(indices.len(), grad_points.len())?;
    let d = b.dim();
    for g in grad_points {
        check_dim(d, g.len())?;
    }
    let mut grad = params.zeros_like();
    match &mut grad {
        MatcherParams::FreePoints { offsets } => {
            for (&i, g) in indices.iter().zip(grad_points) {
                for (o, gk) in offsets[i].iter_mut().zip(g) {
                    *o += gk;
                }
            }
        }
        MatcherParams::Affine { matrix, translation } => {
            for (&i, g) in indices.iter().zip(grad_points) {
                let x = b.point(i);
                for r in 0..d {
                    for c in 0..d {
                        matrix[r][c] += g[r] * x[c];
                    }
                    translation[r] += g[r];
                }
            }
        }
    }
    Ok(grad)
}

/// One `theta` column holding [`MatcherParams::to_flat`].
pub fn write_matcher_csv<W: Write>(w: W, params: &MatcherParams) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["theta"])?;
    for v in params.to_flat() {
        out.write_record([v.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ps(points: Vec<Vec<f64>>) -> PointSet {
        PointSet::new(points, Domain::TargetB).unwrap()
    }

    #[test]
    fn zero_offsets_are_identity() {
        let b = ps(vec![vec![1.0, 2.0], vec![-3.0, 0.5]]);
        assert_eq!(apply(&MatcherParams::free_points(2, 2), &b).unwrap(), b);
        assert_eq!(apply(&MatcherParams::affine_identity(2), &b).unwrap(), b);
    }

    #[test]
    fn affine_translation_and_rotation() {
        let b = ps(vec![vec![0.0, 0.0]]);
        let shift = MatcherParams::Affine { matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]], translation: vec![1.0, 0.0] };
        assert_eq!(apply(&shift, &b).unwrap().point(0), &[1.0, 0.0]);
        let rot = MatcherParams::Affine { matrix: vec![vec![0.0, -1.0], vec![1.0, 0.0]], translation: vec![0.0, 0.0] };
        assert_eq!(apply(&rot, &ps(vec![vec![1.0, 0.0]])).unwrap().point(0), &[0.0, 1.0]);
    }

    #[test]
    fn offset_count_mismatch() {
        let b = ps(vec![vec![1.0, 2.0], vec![-3.0, 0.5]]);
        assert!(matches!(apply(&MatcherParams::free_points(3, 2), &b), Err(Error::InvalidParams(_))));
        assert!(matches!(apply(&MatcherParams::affine_identity(3), &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn free_point_gradient_passthrough() {
        let b = ps(vec![vec![1.0, 2.0], vec![-3.0, 0.5]]);
        let g = vec![vec![0.1, 0.2], vec![0.3, 0.4]];
        let grad = backprop_params(&MatcherParams::free_points(2, 2), &b, &g).unwrap();
        assert_eq!(grad, MatcherParams::FreePoints { offsets: g });
    }

    #[test]
    fn affine_outer_product() {
        let b = ps(vec![vec![1.0, 0.0]]);
        let grad = backprop_params(&MatcherParams::affine_identity(2), &b, &[vec![0.0, 2.0]]).unwrap();
        assert_eq!(
            grad,
            MatcherParams::Affine { matrix: vec![vec![0.0, 0.0], vec![2.0, 0.0]], translation: vec![0.0, 2.0] }
        );
    }

    #[test]
    fn flat_layout_and_axpy() {
        let mut p = MatcherParams::Affine { matrix: vec![vec![1.0, 2.0], vec![3.0, 4.0]], translation: vec![5.0, 6.0] };
        assert_eq!(p.to_flat(), vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let g = p.clone();
        p.axpy(-1.0, &g).unwrap();
        assert!(p.to_flat().iter().all(|v| *v == 0.0));
        let mut buf = Vec::new();
        write_matcher_csv(&mut buf, &g).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "theta\n1\n2\n3\n4\n5\n6\n");
    }
}
