//! Point clouds, seeded synthetic generators and the labeled union `C`.
//!
//! A [`PointSet`] stores its coordinates row-major in one flat buffer. The
//! union of a source set `A` and a transformed target set `B'` carries the
//! label `+1` for every `A` point followed by `-1` for every `B'` point.

use std::io::{Read, Write};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Which side of the alignment problem a point set belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Domain {
    SourceA,
    TargetB,
}

/// An ordered, nonempty collection of `dim`-dimensional points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointSet {
    coords: Vec<f64>,
    dim: usize,
    tag: Domain,
}

impl PointSet {
    pub fn new(points: Vec<Vec<f64>>, tag: Domain) -> Result<Self> {
        let dim = points
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InsufficientData("point set must be nonempty".into()))?;
        if dim == 0 {
            return Err(Error::InvalidSpec("points must have dimension >= 1".into()));
        }
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in &points {
            check_dim(dim, p.len())?;
            coords.extend_from_slice(p);
        }
        Ok(PointSet { coords, dim, tag })
    }

    pub fn from_flat(coords: Vec<f64>, dim: usize, tag: Domain) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSpec("points must have dimension >= 1".into()));
        }
        if coords.is_empty() {
            return Err(Error::InsufficientData("point set must be nonempty".into()));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::dim(dim, coords.len() % dim));
        }
        Ok(PointSet { coords, dim, tag })
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> Domain {
        self.tag
    }

    pub fn with_tag(mut self, tag: Domain) -> Self {
        self.tag = tag;
        self
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    pub fn to_vecs(&self) -> Vec<Vec<f64>> {
        self.iter().map(<[f64]>::to_vec).collect()
    }

    /// Selects the points at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> PointSet {
        let mut coords = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            coords.extend_from_slice(self.point(i));
        }
        PointSet { coords, dim: self.dim, tag: self.tag }
    }
}

/// The merged dataset of source points (label `+1`) followed by transformed
/// target points (label `-1`).
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledUnion {
    coords: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
    a_count: usize,
    b_count: usize,
}

impl LabeledUnion {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_count(&self) -> usize {
        self.a_count
    }

    pub fn b_count(&self) -> usize {
        self.b_count
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    /// Labels as reals in `{+1, -1}`.
    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> f64 {
        self.labels[i]
    }
}

pub fn make_labeled_union(a: &PointSet, b_prime: &PointSet) -> Result<LabeledUnion> {
    check_dim(a.dim(), b_prime.dim())?;
    let mut coords = Vec::with_capacity(a.coords.len() + b_prime.coords.len());
    coords.extend_from_slice(&a.coords);
    coords.extend_from_slice(&b_prime.coords);
    let mut labels = vec![1.0; a.len()];
    labels.resize(a.len() + b_prime.len(), -1.0);
    Ok(LabeledUnion {
        coords,
        labels,
        dim: a.dim(),
        a_count: a.len(),
        b_count: b_prime.len(),
    })
}

/// One labeled Gaussian component of a two-class generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassBlob {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Class label, `1` or `-1`.
    pub label: i8,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorKind {
    GaussianBlob {
        mean: Vec<f64>,
        covariance: Vec<Vec<f64>>,
    },
    Ring {
        center: Vec<f64>,
        radius: f64,
        noise_sd: f64,
    },
    /// Two Gaussian classes; the first `ceil(count / 2)` points come from
    /// `classes[0]`, the rest from `classes[1]`.
    TwoClassLabeled { classes: [ClassBlob; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    #[serde(flatten)]
    pub kind: GeneratorKind,
    pub count: usize,
    pub seed: u64,
}

impl GeneratorSpec {
    pub fn gaussian_blob(mean: Vec<f64>, covariance: Vec<Vec<f64>>, count: usize, seed: u64) -> Self {
        GeneratorSpec { kind: GeneratorKind::GaussianBlob { mean, covariance }, count, seed }
    }

    pub fn ring(center: Vec<f64>, radius: f64, noise_sd: f64, count: usize, seed: u64) -> Self {
        GeneratorSpec { kind: GeneratorKind::Ring { center, radius, noise_sd }, count, seed }
    }

    pub fn two_class(classes: [ClassBlob; 2], count: usize, seed: u64) -> Self {
        GeneratorSpec { kind: GeneratorKind::TwoClassLabeled { classes }, count, seed }
    }

    pub fn dim(&self) -> usize {
        match &self.kind {
            GeneratorKind::GaussianBlob { mean, .. } => mean.len(),
            GeneratorKind::Ring { center, .. } => center.len(),
            GeneratorKind::TwoClassLabeled { classes } => classes[0].mean.len(),
        }
    }
}

/// Cholesky-factored Gaussian sampler.
struct GaussianSampler {
    mean: Vec<f64>,
    chol: DMatrix<f64>,
}

impl GaussianSampler {
    fn new(mean: &[f64], covariance: &[Vec<f64>]) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::InvalidSpec("mean must have dimension >= 1".into()));
        }
        if covariance.len() != d || covariance.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidSpec(format!("covariance must be {d}x{d}")));
        }
        let cov = DMatrix::from_fn(d, d, |i, j| covariance[i][j]);
        if cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("covariance has non-finite entries".into()));
        }
        let scale = cov.amax().max(1.0);
        for i in 0..d {
            for j in 0..i {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidSpec("covariance is not symmetric".into()));
                }
            }
        }
        let chol = cov
            .cholesky()
            .ok_or_else(|| Error::InvalidSpec("covariance is not positive-definite".into()))?;
        Ok(GaussianSampler { mean: mean.to_vec(), chol: chol.l() })
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut Vec<f64>) {
        let d = self.mean.len();
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        for i in 0..d {
            let mut v = self.mean[i];
            for (j, zj) in z.iter().enumerate().take(i + 1) {
                v += self.chol[(i, j)] * zj;
            }
            out.push(v);
        }
    }
}

/// Draws `spec.count` points. Identical specs give bit-identical output.
pub fn generate(spec: &GeneratorSpec) -> Result<PointSet> {
    generate_labeled(spec).map(|(points, _)| points)
}

/// Like [`generate`], also returning a per-point class label (all `1` for the
/// single-population generators).
pub fn generate_labeled(spec: &GeneratorSpec) -> Result<(PointSet, Vec<i8>)> {
    if spec.count == 0 {
        return Err(Error::InvalidSpec("count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let d = spec.dim();
    let mut coords = Vec::with_capacity(spec.count * d);
    let mut labels = Vec::with_capacity(spec.count);
    match &spec.kind {
        GeneratorKind::GaussianBlob { mean, covariance } => {
            let sampler = GaussianSampler::new(mean, covariance)?;
            for _ in 0..spec.count {
                sampler.sample_into(&mut rng, &mut coords);
            }
            labels.resize(spec.count, 1);
        }
        GeneratorKind::Ring { center, radius, noise_sd } => {
            if d == 0 {
                return Err(Error::InvalidSpec("center must have dimension >= 1".into()));
            }
            if !(radius.is_finite() && *radius > 0.0 && noise_sd.is_finite() && *noise_sd >= 0.0) {
                return Err(Error::InvalidSpec("ring needs radius > 0 and noise_sd >= 0".into()));
            }
            let angle = Uniform::new(0.0, std::f64::consts::TAU).expect("valid range");
            for _ in 0..spec.count {
                // Direction: exact unit circle in 2-D, normalized Gaussian otherwise.
                let dir: Vec<f64> = if d == 2 {
                    let t: f64 = angle.sample(&mut rng);
                    vec![t.cos(), t.sin()]
                } else {
                    loop {
                        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
                        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                        if norm > 1e-12 {
                            break z.into_iter().map(|v| v / norm).collect();
                        }
                    }
                };
                for k in 0..d {
                    let noise: f64 = if *noise_sd > 0.0 {
                        noise_sd * Distribution::<f64>::sample(&StandardNormal, &mut rng)
                    } else {
                        0.0
                    };
                    coords.push(center[k] + radius * dir[k] + noise);
                }
                labels.push(1);
            }
        }
        GeneratorKind::TwoClassLabeled { classes } => {
            for c in classes.iter() {
                check_dim(d, c.mean.len())?;
                if c.label != 1 && c.label != -1 {
                    return Err(Error::InvalidSpec("class labels must be 1 or -1".into()));
                }
            }
            if classes[0].label == classes[1].label {
                return Err(Error::InvalidSpec("the two classes need distinct labels".into()));
            }
            let samplers = [
                GaussianSampler::new(&classes[0].mean, &classes[0].covariance)?,
                GaussianSampler::new(&classes[1].mean, &classes[1].covariance)?,
            ];
            let first = spec.count.div_ceil(2);
            for i in 0..spec.count {
                let k = usize::from(i >= first);
                samplers[k].sample_into(&mut rng, &mut coords);
                labels.push(classes[k].label);
            }
        }
    }
    Ok((PointSet::from_flat(coords, d, Domain::SourceA)?, labels))
}

pub fn mean(p: &PointSet) -> Vec<f64> {
    let mut m = vec![0.0; p.dim()];
    for x in p.iter() {
        for (mk, xk) in m.iter_mut().zip(x) {
            *mk += xk;
        }
    }
    let n = p.len() as f64;
    m.iter_mut().for_each(|v| *v /= n);
    m
}

/// Sample mean and unbiased (`n - 1`) sample covariance.
pub fn empirical_moments(p: &PointSet) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = p.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!("moments need at least 2 points, got {n}")));
    }
    let d = p.dim();
    let mu = mean(p);
    let mut cov = DMatrix::zeros(d, d);
    for x in p.iter() {
        for i in 0..d {
            let di = x[i] - mu[i];
            for j in 0..=i {
                cov[(i, j)] += di * (x[j] - mu[j]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for i in 0..d {
        for j in 0..=i {
            let v = cov[(i, j)] / denom;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    Ok((mu, cov))
}

fn header(dim: usize) -> Vec<String> {
    (0..dim).map(|k| format!("x{k}")).collect()
}

/// Writes `x0,...,x{d-1}` followed by one row per point.
pub fn write_pointset_csv<W: Write>(w: W, p: &PointSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(header(p.dim()))?;
    for x in p.iter() {
        out.write_record(x.iter().map(|v| v.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes the union with a trailing `label` column of `1` / `-1`.
pub fn write_union_csv<W: Write>(w: W, c: &LabeledUnion) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut head = header(c.dim());
    head.push("label".into());
    out.write_record(&head)?;
    for (x, y) in c.points().zip(c.labels()) {
        let mut row: Vec<String> = x.iter().map(|v| v.to_string()).collect();
        row.push(if *y > 0.0 { "1".into() } else { "-1".into() });
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_pointset_csv<R: Read>(r: R, tag: Domain) -> Result<PointSet> {
    let mut rdr = csv::Reader::from_reader(r);
    let dim = rdr.headers()?.len();
    let mut coords = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        check_dim(dim, rec.len())?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| Error::InvalidSpec(format!("not a number: {field:?}")))?;
            coords.push(v);
        }
    }
    PointSet::from_flat(coords, dim, tag)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eye2() -> Vec<Vec<f64>> {
        vec![vec![1.0, 0.0], vec![0.0, 1.0]]
    }

    #[test]
    fn gaussian_blob_is_deterministic() {
        let spec = GeneratorSpec::gaussian_blob(vec![0.0, 0.0], eye2(), 4, 7);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a.len(), 4);
        let bits = |p: &PointSet| p.as_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
    }

    #[test]
    fn noiseless_ring_lies_on_unit_circle() {
        let spec = GeneratorSpec::ring(vec![0.0, 0.0], 1.0, 0.0, 8, 1);
        let p = generate(&spec).unwrap();
        assert_eq!(p.len(), 8);
        for x in p.iter() {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            assert!((r - 1.0).abs() < 1e-12);
        }
        let spec3 = GeneratorSpec::ring(vec![1.0, 1.0, 1.0], 2.0, 0.0, 8, 1);
        for x in generate(&spec3).unwrap().iter() {
            let r = x.iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>().sqrt();
            assert!((r - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn large_blob_mean_is_close() {
        let spec = GeneratorSpec::gaussian_blob(vec![5.0, 5.0], eye2(), 10_000, 3);
        let m = mean(&generate(&spec).unwrap());
        // Standard error is 0.01 per coordinate; 0.05 is five standard errors.
        assert!((m[0] - 5.0).abs() < 0.05 && (m[1] - 5.0).abs() < 0.05, "{m:?}");
    }

    #[test]
    fn non_spd_covariance_is_rejected() {
        let bad = GeneratorSpec::gaussian_blob(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], 3, 0);
        assert!(matches!(generate(&bad), Err(Error::InvalidSpec(_))));
        let asym = GeneratorSpec::gaussian_blob(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.0, 1.0]], 3, 0);
        assert!(matches!(generate(&asym), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn two_class_generator_splits_counts() {
        let spec = GeneratorSpec::two_class(
            [
                ClassBlob { mean: vec![-2.0, 0.0], covariance: eye2(), label: 1 },
                ClassBlob { mean: vec![2.0, 0.0], covariance: eye2(), label: -1 },
            ],
            5,
            9,
        );
        let (p, labels) = generate_labeled(&spec).unwrap();
        assert_eq!(p.len(), 5);
        assert_eq!(labels, vec![1, 1, 1, -1, -1]);
    }

    #[test]
    fn union_labels_and_counts() {
        let a = PointSet::new(vec![vec![1.0, 0.0]], Domain::SourceA).unwrap();
        let b = PointSet::new(vec![vec![0.0, 1.0]], Domain::TargetB).unwrap();
        let c = make_labeled_union(&a, &b).unwrap();
        assert_eq!(c.point(0), &[1.0, 0.0]);
        assert_eq!(c.point(1), &[0.0, 1.0]);
        assert_eq!(c.labels(), &[1.0, -1.0]);

        let a3 = PointSet::new(vec![vec![0.0, 0.0]; 3], Domain::SourceA).unwrap();
        let b5 = PointSet::new(vec![vec![1.0, 1.0]; 5], Domain::TargetB).unwrap();
        let c = make_labeled_union(&a3, &b5).unwrap();
        assert_eq!((c.a_count(), c.b_count(), c.labels().len()), (3, 5, 8));
        assert_eq!(c.labels().iter().sum::<f64>(), -2.0);
    }

    #[test]
    fn union_rejects_dimension_mismatch() {
        let a = PointSet::new(vec![vec![1.0, 0.0]], Domain::SourceA).unwrap();
        let b = PointSet::new(vec![vec![0.0, 1.0, 2.0]], Domain::TargetB).unwrap();
        assert!(matches!(make_labeled_union(&a, &b), Err(Error::Dimension { .. })));
    }

    #[test]
    fn two_point_moments() {
        let p = PointSet::new(vec![vec![1.0, 1.0], vec![-1.0, -1.0]], Domain::SourceA).unwrap();
        let (m, c) = empirical_moments(&p).unwrap();
        assert_eq!(m, vec![0.0, 0.0]);
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[2.0, 2.0, 2.0, 2.0]));
        let single = PointSet::new(vec![vec![1.0, 1.0]], Domain::SourceA).unwrap();
        assert!(matches!(empirical_moments(&single), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn sampled_covariance_matches_spec() {
        let spec =
            GeneratorSpec::gaussian_blob(vec![0.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 4.0]], 1000, 11);
        let (_, c) = empirical_moments(&generate(&spec).unwrap()).unwrap();
        assert!((c[(0, 0)] - 1.0).abs() < 0.15, "{c}");
        assert!((c[(1, 1)] - 4.0).abs() < 0.6, "{c}");
    }

    #[test]
    fn csv_round_trip_and_headers() {
        let p = PointSet::new(vec![vec![0.1, -2.5], vec![3.0, 4.0]], Domain::SourceA).unwrap();
        let mut buf = Vec::new();
        write_pointset_csv(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1\n0.1,-2.5\n"));
        let back = read_pointset_csv(buf.as_slice(), Domain::SourceA).unwrap();
        assert_eq!(back, p);

        let c = make_labeled_union(&p, &p.clone().with_tag(Domain::TargetB)).unwrap();
        let mut buf = Vec::new();
        write_union_csv(&mut buf, &c).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next(), Some("x0,x1,label"));
        assert!(text.lines().last().unwrap().ends_with(",-1"));
    }
}
