//! Discrete measures on R^d: construction (synthetic sampling, grayscale
//! grids), normalization, pairwise costs, and the affine rescaling used by
//! the fast-summation backend.

use crate::rng::SplitMix64;
use crate::{OtError, Result};
use serde::{Deserialize, Serialize};

/// A finitely supported nonnegative measure `sum_i w_i delta_{x_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    /// Row-major points: `points[i]` is the i-th atom's coordinate vector.
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub dim: usize,
}

/// Ground-cost specification d(x, y)^r.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSpec {
    pub norm: Norm,
    pub exponent: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    L1,
}

impl CostSpec {
    pub fn euclidean(exponent: f64) -> Result<Self> {
        Self::new(Norm::Euclidean, exponent)
    }

    pub fn new(norm: Norm, exponent: f64) -> Result<Self> {
        if !(exponent >= 1.0) || !exponent.is_finite() {
            return Err(OtError::InvalidParameter(format!(
                "cost exponent must be a finite real >= 1, got {exponent}"
            )));
        }
        Ok(Self { norm, exponent })
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.norm {
            Norm::Euclidean => euclidean_distance(x, y),
            Norm::L1 => x.iter().zip(y).map(|(a, b)| (a - b).abs()).sum(),
        }
    }

    /// d(x, y)^r
    pub fn cost(&self, x: &[f64], y: &[f64]) -> f64 {
        let d = self.distance(x, y);
        if self.exponent == 1.0 {
            d
        } else if self.exponent == 2.0 {
            d * d
        } else {
            d.powf(self.exponent)
        }
    }
}

pub fn euclidean_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(OtError::InvalidMeasure("empty measure".into()));
        }
        if points.len() != weights.len() {
            return Err(OtError::SizeMismatch(format!(
                "{} points vs {} weights",
                points.len(),
                weights.len()
            )));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(OtError::InvalidMeasure("zero-dimensional points".into()));
        }
        for p in &points {
            if p.len() != dim {
                return Err(OtError::DimensionMismatch(format!(
                    "point with {} coordinates in dimension-{dim} measure",
                    p.len()
                )));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(OtError::InvalidMeasure("non-finite coordinate".into()));
            }
        }
        for &w in &weights {
            if !(w > 0.0) || !w.is_finite() {
                return Err(OtError::InvalidMeasure(format!(
                    "weights must be strictly positive and finite, got {w}"
                )));
            }
        }
        Ok(Self { points, weights, dim })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn normalize(&self) -> DiscreteMeasure {
        let m = self.total_mass();
        DiscreteMeasure {
            points: self.points.clone(),
            weights: self.weights.iter().map(|w| w / m).collect(),
            dim: self.dim,
        }
    }

    /// Checks that `self` and `other` share an identical atom list.
    pub fn same_atoms(&self, other: &DiscreteMeasure) -> bool {
        self.dim == other.dim && self.points == other.points
    }
}

/// Entry (i, j) = d(x_i, y_j)^r, stored row-major as an n x m matrix.
pub fn pairwise_cost(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    cost: &CostSpec,
) -> Result<Vec<f64>> {
    if a.dim != b.dim {
        return Err(OtError::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in &a.points {
        for y in &b.points {
            out.push(cost.cost(x, y));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightMode {
    /// i.i.d. uniform weights on (0, 1].
    UniformRandom,
    /// Constant weights 1/n (a probability measure).
    Probability,
}

/// Seeded uniform samples on [0,1]^d with either random or uniform weights.
pub fn sample_uniform(
    n: usize,
    d: usize,
    weight_mode: WeightMode,
    seed: u64,
) -> Result<DiscreteMeasure> {
    if n == 0 {
        return Err(OtError::InvalidParameter("n must be >= 1".into()));
    }
    if !(1..=3).contains(&d) {
        return Err(OtError::InvalidParameter(format!(
            "dimension must be in 1..=3, got {d}"
        )));
    }
    let mut coord_rng = SplitMix64::stream(seed, 0);
    let mut weight_rng = SplitMix64::stream(seed, 1);
    let points = (0..n)
        .map(|_| (0..d).map(|_| coord_rng.next_f64()).collect())
        .collect();
    let weights = match weight_mode {
        WeightMode::UniformRandom => {
            (0..n).map(|_| weight_rng.next_f64_open()).collect()
        }
        WeightMode::Probability => vec![1.0 / n as f64; n],
    };
    DiscreteMeasure::new(points, weights)
}

/// One atom per pixel at ((col - 1/2)/C, (row - 1/2)/R) with the intensity
/// as weight; intensities are not normalized.
pub fn from_grayscale_grid(
    pixels: &[Vec<f64>],
    drop_zeros: bool,
) -> Result<DiscreteMeasure> {
    let rows = pixels.len();
    if rows == 0 {
        return Err(OtError::InvalidMeasure("empty image".into()));
    }
    let cols = pixels[0].len();
    if cols == 0 || pixels.iter().any(|r| r.len() != cols) {
        return Err(OtError::InvalidMeasure("ragged or empty image rows".into()));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (row, line) in pixels.iter().enumerate() {
        for (col, &v) in line.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(OtError::InvalidMeasure(format!(
                    "pixel intensity {v} outside [0,1] at ({row},{col})"
                )));
            }
            if v == 0.0 && drop_zeros {
                continue;
            }
            points.push(vec![
                (col as f64 + 0.5) / cols as f64,
                (row as f64 + 0.5) / rows as f64,
            ]);
            weights.push(v);
        }
    }
    if points.is_empty() {
        return Err(OtError::InvalidMeasure("empty measure".into()));
    }
    DiscreteMeasure::new(points, weights)
}

/// Result of [`rescale_pair_to_torus`].
#[derive(Debug, Clone)]
pub struct TorusRescale {
    pub a: DiscreteMeasure,
    pub b: DiscreteMeasure,
    /// Isotropic scale: scaled coordinate = (original - offset) / h.
    pub h: f64,
    pub offset: Vec<f64>,
    /// True when all points coincide and the scale defaulted to 1.
    pub degenerate: bool,
}

/// Shared affine map x -> (x - offset)/h sending both point clouds into a
/// Euclidean ball of radius 1/4 - margin/2, so every pairwise difference has
/// norm at most 1/2 - margin < 1/2 in the scaled coordinates.  A single
/// isotropic scale is used for all axes so radial structure is preserved.
pub fn rescale_pair_to_torus(
    a: &DiscreteMeasure,
    b: &DiscreteMeasure,
    margin: f64,
) -> Result<TorusRescale> {
    if a.dim != b.dim {
        return Err(OtError::DimensionMismatch(format!(
            "measures have dimensions {} and {}",
            a.dim, b.dim
        )));
    }
    if a.dim > 3 {
        return Err(OtError::Unsupported(
            "torus rescaling supports dimension <= 3".into(),
        ));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(OtError::InvalidParameter(format!(
            "margin must lie in (0,1), got {margin}"
        )));
    }
    let d = a.dim;
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in a.points.iter().chain(b.points.iter()) {
        for (k, &c) in p.iter().enumerate() {
            lo[k] = lo[k].min(c);
            hi[k] = hi[k].max(c);
        }
    }
    let offset: Vec<f64> = (0..d).map(|k| 0.5 * (lo[k] + hi[k])).collect();
    let mut max_norm = 0.0f64;
    for p in a.points.iter().chain(b.points.iter()) {
        let r = euclidean_distance(p, &offset);
        max_norm = max_norm.max(r);
    }
    let rho = 0.25 - 0.5 * margin;
    if !(rho > 0.0) {
        return Err(OtError::InvalidParameter(format!(
            "margin {margin} leaves no room inside the quarter box"
        )));
    }
    let degenerate = max_norm == 0.0;
    let h = if degenerate { 1.0 } else { max_norm / rho };
    let map = |m: &DiscreteMeasure| DiscreteMeasure {
        points: m
            .points
            .iter()
            .map(|p| {
                p.iter()
                    .zip(&offset)
                    .map(|(&c, &o)| (c - o) / h)
                    .collect()
            })
            .collect(),
        weights: m.weights.clone(),
        dim: m.dim,
    };
    Ok(TorusRescale { a: map(a), b: map(b), h, offset, degenerate })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(points: Vec<Vec<f64>>, weights: Vec<f64>) -> DiscreteMeasure {
        DiscreteMeasure::new(points, weights).unwrap()
    }

    #[test]
    fn total_mass_sums_weights() {
        let a = m(vec![vec![0.0], vec![1.0], vec![2.0]], vec![1.0, 1.0, 1.0]);
        assert_eq!(a.total_mass(), 3.0);
        let b = m(vec![vec![0.0]], vec![0.5]);
        assert_eq!(b.total_mass(), 0.5);
        let n = 137;
        let u = m(
            (0..n).map(|i| vec![i as f64]).collect(),
            vec![1.0 / n as f64; n],
        );
        assert!((u.total_mass() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn normalize_divides_by_mass() {
        let a = m(vec![vec![0.0], vec![1.0]], vec![2.0, 2.0]);
        assert_eq!(a.normalize().weights, vec![0.5, 0.5]);
        let b = m(vec![vec![0.0], vec![1.0]], vec![0.25, 0.75]);
        let bn = b.normalize();
        for (x, y) in bn.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-15);
        }
        let c = m(vec![vec![0.0], vec![1.0]], vec![1.0, 3.0]);
        assert_eq!(c.normalize().weights, vec![0.25, 0.75]);
        // idempotence
        let once = c.normalize();
        let twice = once.normalize();
        for (x, y) in once.weights.iter().zip(&twice.weights) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn pairwise_cost_examples() {
        let c2 = CostSpec::euclidean(2.0).unwrap();
        let a = m(vec![vec![0.0]], vec![1.0]);
        let b = m(vec![vec![1.0]], vec![1.0]);
        assert_eq!(pairwise_cost(&a, &b, &c2).unwrap(), vec![1.0]);
        assert_eq!(pairwise_cost(&a, &a, &c2).unwrap(), vec![0.0]);

        let c1 = CostSpec::euclidean(1.0).unwrap();
        let p = m(vec![vec![0.0, 0.0]], vec![1.0]);
        let q = m(vec![vec![3.0, 4.0]], vec![1.0]);
        assert_eq!(pairwise_cost(&p, &q, &c1).unwrap(), vec![5.0]);

        let bad = pairwise_cost(&a, &p, &c1);
        assert!(matches!(bad, Err(OtError::DimensionMismatch(_))));
    }

    #[test]
    fn pairwise_cost_self_symmetric_zero_diagonal() {
        let c = CostSpec::euclidean(1.5).unwrap();
        let a = sample_uniform(20, 2, WeightMode::UniformRandom, 7).unwrap();
        let d = pairwise_cost(&a, &a, &c).unwrap();
        let n = a.len();
        for i in 0..n {
            assert_eq!(d[i * n + i], 0.0);
            for j in 0..n {
                assert!(d[i * n + j] >= 0.0);
                assert!((d[i * n + j] - d[j * n + i]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn sample_uniform_properties() {
        let a = sample_uniform(1000, 2, WeightMode::UniformRandom, 42).unwrap();
        let b = sample_uniform(1000, 2, WeightMode::UniformRandom, 42).unwrap();
        assert_eq!(a, b);
        assert!(a
            .points
            .iter()
            .all(|p| p.iter().all(|&c| (0.0..=1.0).contains(&c))));
        assert!(a.weights.iter().all(|&w| w > 0.0 && w <= 1.0));
        let p = sample_uniform(321, 3, WeightMode::Probability, 1).unwrap();
        assert!((p.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn grayscale_grid_placement() {
        let one = from_grayscale_grid(&[vec![0.7]], false).unwrap();
        assert_eq!(one.len(), 1);
        assert_eq!(one.weights, vec![0.7]);

        let err = from_grayscale_grid(&[vec![0.0], vec![0.0]], true);
        assert!(matches!(err, Err(OtError::InvalidMeasure(ref s)) if s == "empty measure"));

        let diag =
            from_grayscale_grid(&[vec![1.0, 0.0], vec![0.0, 1.0]], true).unwrap();
        assert_eq!(diag.len(), 2);
        assert!((diag.total_mass() - 2.0).abs() < 1e-15);
        assert_eq!(diag.points[0], vec![0.25, 0.25]);
        assert_eq!(diag.points[1], vec![0.75, 0.75]);

        let bad = from_grayscale_grid(&[vec![1.5]], false);
        assert!(bad.is_err());
    }

    #[test]
    fn rescale_maps_1d_pair_into_box() {
        let a = m(vec![vec![0.0]], vec![1.0]);
        let b = m(vec![vec![10.0]], vec![2.0]);
        let r = rescale_pair_to_torus(&a, &b, 0.0625).unwrap();
        assert!((r.a.points[0][0] - (-0.21875)).abs() < 1e-15);
        assert!((r.b.points[0][0] - 0.21875).abs() < 1e-15);
        assert_eq!(r.a.weights, vec![1.0]);
        assert_eq!(r.b.weights, vec![2.0]);
        assert!(!r.degenerate);
    }

    #[test]
    fn rescale_preserves_distance_ratios() {
        let a = sample_uniform(30, 2, WeightMode::UniformRandom, 3).unwrap();
        let b = sample_uniform(25, 2, WeightMode::UniformRandom, 4).unwrap();
        let r = rescale_pair_to_torus(&a, &b, 0.0625).unwrap();
        let d01 = euclidean_distance(&a.points[0], &a.points[1]);
        let d02 = euclidean_distance(&a.points[0], &b.points[2]);
        let s01 = euclidean_distance(&r.a.points[0], &r.a.points[1]);
        let s02 = euclidean_distance(&r.a.points[0], &r.b.points[2]);
        assert!((d01 / d02 - s01 / s02).abs() < 1e-12);
        // every pairwise difference stays strictly inside the half box
        for p in r.a.points.iter().chain(r.b.points.iter()) {
            for q in r.a.points.iter().chain(r.b.points.iter()) {
                assert!(euclidean_distance(p, q) <= 0.5 - 0.0625 + 1e-15);
            }
        }
    }

    #[test]
    fn rescale_degenerate_flags() {
        let a = m(vec![vec![3.0, 3.0]], vec![1.0]);
        let r = rescale_pair_to_torus(&a, &a, 0.0625).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.h, 1.0);
        assert_eq!(r.a.points[0], vec![0.0, 0.0]);
    }
}
