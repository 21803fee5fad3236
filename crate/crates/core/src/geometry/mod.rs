//! Hyperbolic geometry in the Lorentz, Klein and Poincaré models.
//!
//! All three models share one curvature convention: the hyperboloid is
//! `{x : <x,x>_L = -1/kappa, x_time > 0}` and both balls have radius
//! `1/sqrt(kappa)`, so the maps between models are isometries.
//!
//! Points are plain `f64` vectors wrapped in newtypes that enforce the model's
//! invariant at construction. Operations are pure functions and may be called
//! from any thread.

pub(crate) mod ball;
pub(crate) mod lorentz;

pub use ball::{
    einstein_midpoint, exp_map_klein, klein_distance, klein_to_lorentz, klein_to_poincare,
    lorentz_factor, lorentz_to_klein, lorentz_to_poincare, poincare_distance, poincare_to_klein,
    poincare_to_lorentz, KleinPoint, PoincarePoint,
};
pub use lorentz::{
    clip_euclidean, exp_map_lorentz, lift_time, lorentz_centroid, lorentz_distance, lorentz_inner,
    squared_lorentzian_distance, LorentzPoint,
};

use thiserror::Error;

/// Relative tolerance on `|<x,x>_L + 1/kappa|` for a point to count as on-manifold.
pub const TOL_MANIFOLD: f64 = 1e-9;

/// Smallest admissible `1 - kappa * |x|^2` when lifting a ball point.
pub const TOL_BOUNDARY: f64 = 1e-12;

/// Below this value of `sqrt(kappa) * |v|` the exponential maps use their Taylor series.
pub const SERIES_THRESHOLD: f64 = 1e-4;

/// Largest `sqrt(kappa) * |v|` for which `sinh` stays finite.
pub const SINH_OVERFLOW: f64 = 710.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("curvature must be positive and finite, got {0}")]
    InvalidCurvature(f64),
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("non-finite component in input vector")]
    NonFinite,
    #[error("point is off the hyperboloid: relative residual {residual:e}")]
    OffManifold { residual: f64 },
    #[error("hyperboloid point must have positive time component, got {0}")]
    NegativeTime(f64),
    #[error("point lies outside the open ball (kappa*|x|^2 = {0})")]
    OutsideBall(f64),
    #[error("point too close to the ball boundary (1 - kappa*|x|^2 = {0:e})")]
    NearBoundary(f64),
    #[error("exponential map overflows: sqrt(kappa)*|v| = {0}")]
    Overflow(f64),
    #[error("empty point set")]
    EmptySet,
    #[error("{points} points but {weights} weights")]
    WeightCount { points: usize, weights: usize },
    #[error("weight {index} is not positive and finite: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("degenerate Lorentz norm {0:e} in centroid")]
    DegenerateNorm(f64),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

/// Positive curvature magnitude `kappa = -c`, where `c < 0` is the Gaussian curvature.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Curvature(f64);

impl Curvature {
    pub fn new(kappa: f64) -> Result<Self> {
        if kappa.is_finite() && kappa > 0.0 {
            Ok(Self(kappa))
        } else {
            Err(GeometryError::InvalidCurvature(kappa))
        }
    }

    /// Builds from the (negative) Gaussian curvature `c`.
    pub fn from_gaussian(c: f64) -> Result<Self> {
        Self::new(-c)
    }

    #[inline]
    pub fn kappa(self) -> f64 {
        self.0
    }

    #[inline]
    pub fn sqrt(self) -> f64 {
        self.0.sqrt()
    }

    /// Radius `1/sqrt(kappa)` of the Klein and Poincaré balls.
    #[inline]
    pub fn radius(self) -> f64 {
        1.0 / self.0.sqrt()
    }
}

/// Euclidean (tangent-space) vector with finite components.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanVec(Vec<f64>);

impl EuclideanVec {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(Self(components))
        } else {
            Err(GeometryError::NonFinite)
        }
    }

    pub fn zeros(dim: usize) -> Self {
        Self(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

impl AsRef<[f64]> for EuclideanVec {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Points paired with positive sample weights.
#[derive(Debug, Clone)]
pub struct WeightedPointSet<'a, P> {
    points: &'a [P],
    weights: Option<&'a [f64]>,
}

impl<'a, P> WeightedPointSet<'a, P> {
    pub fn new(points: &'a [P], weights: &'a [f64]) -> Result<Self> {
        if points.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        if points.len() != weights.len() {
            return Err(GeometryError::WeightCount {
                points: points.len(),
                weights: weights.len(),
            });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(GeometryError::InvalidWeight { index, value });
        }
        Ok(Self {
            points,
            weights: Some(weights),
        })
    }

    /// All weights equal to one.
    pub fn uniform(points: &'a [P]) -> Result<Self> {
        if points.is_empty() {
            return Err(GeometryError::EmptySet);
        }
        Ok(Self {
            points,
            weights: None,
        })
    }

    pub fn points(&self) -> &'a [P] {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights.map_or(1.0, |w| w[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'a P, f64)> + '_ {
        self.points
            .iter()
            .enumerate()
            .map(move |(i, p)| (p, self.weight(i)))
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub(crate) fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub(crate) fn check_dims(left: usize, right: usize) -> Result<()> {
    if left == right {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { left, right })
    }
}

/// `sinh(t)/t`, series below [`SERIES_THRESHOLD`].
#[inline]
pub(crate) fn sinhc(t: f64) -> f64 {
    if t < SERIES_THRESHOLD {
        let t2 = t * t;
        1.0 + t2 / 6.0 + t2 * t2 / 120.0
    } else {
        t.sinh() / t
    }
}

/// `tanh(t)/t`, series below [`SERIES_THRESHOLD`].
#[inline]
pub(crate) fn tanhc(t: f64) -> f64 {
    if t < SERIES_THRESHOLD {
        let t2 = t * t;
        1.0 - t2 / 3.0 + 2.0 * t2 * t2 / 15.0
    } else {
        t.tanh() / t
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn curvature_rejects_non_positive() {
        assert!(Curvature::new(0.0).is_err());
        assert!(Curvature::new(-1.0).is_err());
        assert!(Curvature::new(f64::NAN).is_err());
        assert!(Curvature::new(f64::INFINITY).is_err());
        assert_eq!(Curvature::from_gaussian(-0.05).unwrap().kappa(), 0.05);
    }

    #[test]
    fn euclidean_vec_rejects_non_finite() {
        assert_eq!(
            EuclideanVec::new(vec![1.0, f64::NAN]),
            Err(GeometryError::NonFinite)
        );
    }

    #[test]
    fn weighted_set_validation() {
        let pts = [1, 2, 3];
        assert!(WeightedPointSet::new(&pts, &[1.0, 2.0]).is_err());
        assert!(WeightedPointSet::new(&pts, &[1.0, 0.0, 2.0]).is_err());
        assert!(WeightedPointSet::new(&pts, &[1.0, f64::INFINITY, 2.0]).is_err());
        let empty: [i32; 0] = [];
        assert_eq!(
            WeightedPointSet::uniform(&empty).unwrap_err(),
            GeometryError::EmptySet
        );
        let ws = WeightedPointSet::new(&pts, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(ws.weight(2), 3.0);
    }

    #[test]
    fn series_matches_closed_form_near_threshold() {
        for &t in &[1e-5, 5e-5, 9.9e-5] {
            assert!((sinhc(t) - t.sinh() / t).abs() < 4e-16);
            assert!((tanhc(t) - t.tanh() / t).abs() < 4e-16);
        }
        assert_eq!(sinhc(0.0), 1.0);
        assert_eq!(tanhc(0.0), 1.0);
    }
}
