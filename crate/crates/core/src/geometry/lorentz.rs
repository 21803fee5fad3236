//! The Lorentz hyperboloid model.

use super::{
    check_dims, dot, norm, norm_sq, sinhc, Curvature, EuclideanVec, GeometryError, Result,
    WeightedPointSet, TOL_MANIFOLD,
};

/// Point `[time; space]` on the upper sheet `<x,x>_L = -1/kappa`.
#[derive(Debug, Clone, PartialEq)]
pub struct LorentzPoint {
    time: f64,
    space: Vec<f64>,
}

impl LorentzPoint {
    /// Validates positivity of `time` and the hyperboloid constraint.
    ///
    /// The residual `<x,x>_L + 1/kappa` is measured relative to
    /// `max(1/kappa, time^2)`: for far-out points the squared time carries
    /// that much rounding on its own.
    pub fn new(time: f64, space: Vec<f64>, k: Curvature) -> Result<Self> {
        if !time.is_finite() || space.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        if time <= 0.0 {
            return Err(GeometryError::NegativeTime(time));
        }
        let p = Self { time, space };
        let residual = p.manifold_residual(k);
        if residual > TOL_MANIFOLD {
            return Err(GeometryError::OffManifold { residual });
        }
        Ok(p)
    }

    /// Builds from ambient coordinates `[time, space_0, space_1, ...]`.
    pub fn from_ambient(coords: &[f64], k: Curvature) -> Result<Self> {
        match coords.split_first() {
            Some((&t, s)) => Self::new(t, s.to_vec(), k),
            None => Err(GeometryError::DimensionMismatch { left: 0, right: 1 }),
        }
    }

    pub(crate) fn from_parts_unchecked(time: f64, space: Vec<f64>) -> Self {
        Self { time, space }
    }

    /// The hyperboloid origin `[1/sqrt(kappa); 0]`.
    pub fn origin(dim: usize, k: Curvature) -> Self {
        Self {
            time: k.radius(),
            space: vec![0.0; dim],
        }
    }

    #[inline]
    pub fn time(&self) -> f64 {
        self.time
    }

    #[inline]
    pub fn space(&self) -> &[f64] {
        &self.space
    }

    /// Spatial dimension `n` (the ambient dimension is `n + 1`).
    #[inline]
    pub fn dim(&self) -> usize {
        self.space.len()
    }

    pub fn to_ambient(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.space.len() + 1);
        out.push(self.time);
        out.extend_from_slice(&self.space);
        out
    }

    /// `|<x,x>_L + 1/kappa| / max(1/kappa, time^2)`.
    pub fn manifold_residual(&self, k: Curvature) -> f64 {
        let inv = 1.0 / k.kappa();
        let r = (-self.time * self.time + norm_sq(&self.space) + inv).abs();
        r / inv.max(self.time * self.time)
    }

    #[inline]
    pub(crate) fn inner_unchecked(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.dim(), other.dim());
        -self.time * other.time + dot(&self.space, &other.space)
    }
}

/// Minkowski inner product `-x_time*y_time + <x_space, y_space>`.
pub fn lorentz_inner(x: &LorentzPoint, y: &LorentzPoint) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(x.inner_unchecked(y))
}

/// Lifts a spatial vector onto the hyperboloid: `time = sqrt(1/kappa + |space|^2)`.
pub fn lift_time(space: &EuclideanVec, k: Curvature) -> Result<LorentzPoint> {
    lift_slice(space.as_slice(), k)
}

pub(crate) fn lift_slice(space: &[f64], k: Curvature) -> Result<LorentzPoint> {
    let time = (1.0 / k.kappa() + norm_sq(space)).sqrt();
    if !time.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    Ok(LorentzPoint::from_parts_unchecked(time, space.to_vec()))
}

/// Below this value of `-kappa <x,y>_L` distances are taken from coordinate differences.
pub(crate) const NEAR_ARG: f64 = 1.5;

/// `<x-y, x-y>_L`, which is accurate for nearby points.
#[inline]
pub(crate) fn difference_norm_sq(x: &LorentzPoint, y: &LorentzPoint) -> f64 {
    let dt = x.time - y.time;
    let ds: f64 = x
        .space
        .iter()
        .zip(&y.space)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    (ds - dt * dt).max(0.0)
}

#[inline]
pub(crate) fn distance_unchecked(x: &LorentzPoint, y: &LorentzPoint, k: Curvature) -> f64 {
    let arg = -k.kappa() * x.inner_unchecked(y);
    if arg < NEAR_ARG {
        // arcosh(1 + kappa*q/2) == 2 asinh(sqrt(kappa*q)/2)
        2.0 * (0.5 * (k.kappa() * difference_norm_sq(x, y)).sqrt()).asinh() / k.sqrt()
    } else {
        arg.acosh() / k.sqrt()
    }
}

/// Geodesic distance `(1/sqrt(kappa)) * arcosh(-kappa <x,y>_L)`.
///
/// Arguments below 1.5 switch to the equivalent `asinh` form on coordinate
/// differences, so identical points give exactly 0 and rounding never
/// produces NaN.
pub fn lorentz_distance(x: &LorentzPoint, y: &LorentzPoint, k: Curvature) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(distance_unchecked(x, y, k))
}

#[inline]
pub(crate) fn sq_lorentzian_unchecked(x: &LorentzPoint, y: &LorentzPoint, k: Curvature) -> f64 {
    let inner = x.inner_unchecked(y);
    if -k.kappa() * inner < NEAR_ARG {
        difference_norm_sq(x, y)
    } else {
        -2.0 / k.kappa() - 2.0 * inner
    }
}

/// Squared Lorentzian distance `|x - y|_L^2 = -2/kappa - 2 <x,y>_L`.
///
/// Nearby pairs use `<x-y, x-y>_L` directly, which is never negative.
pub fn squared_lorentzian_distance(
    x: &LorentzPoint,
    y: &LorentzPoint,
    k: Curvature,
) -> Result<f64> {
    check_dims(x.dim(), y.dim())?;
    Ok(sq_lorentzian_unchecked(x, y, k))
}

/// Exponential map at the origin:
/// `space = sinh(sqrt(kappa)|v|) / (sqrt(kappa)|v|) * v`, time from the lift.
pub fn exp_map_lorentz(v: &EuclideanVec, k: Curvature) -> Result<LorentzPoint> {
    exp_map_slice(v.as_slice(), k)
}

pub(crate) fn exp_map_slice(v: &[f64], k: Curvature) -> Result<LorentzPoint> {
    let theta = k.sqrt() * norm(v);
    if theta > super::SINH_OVERFLOW {
        return Err(GeometryError::Overflow(theta));
    }
    let scale = sinhc(theta);
    let space: Vec<f64> = v.iter().map(|c| c * scale).collect();
    lift_slice(&space, k).map_err(|_| GeometryError::Overflow(theta))
}

/// Rescales `v` onto the sphere of radius `r` when it lies outside it.
///
/// `r = f64::INFINITY` disables clipping.
///
/// # Panics
///
/// If `r` is not positive.
pub fn clip_euclidean(v: &EuclideanVec, r: f64) -> EuclideanVec {
    EuclideanVec(clip_slice(v.as_slice(), r))
}

pub(crate) fn clip_slice(v: &[f64], r: f64) -> Vec<f64> {
    assert!(r > 0.0, "clip radius must be positive, got {r}");
    let n = norm(v);
    // a few ulps of slack keeps clipping idempotent on already-clipped vectors
    if n <= r * (1.0 + 4.0 * f64::EPSILON) {
        v.to_vec()
    } else {
        let s = r / n;
        v.iter().map(|c| c * s).collect()
    }
}

/// Weighted Lorentz centroid `(1/sqrt(kappa)) * S / |sqrt(|<S,S>_L|)|` with `S = sum w_i x_i`.
///
/// This is the exact minimiser of the weighted squared Lorentzian distance.
pub fn lorentz_centroid(ps: &WeightedPointSet<'_, LorentzPoint>, k: Curvature) -> Result<LorentzPoint> {
    let dim = ps.points()[0].dim();
    let mut time = 0.0;
    let mut space = vec![0.0; dim];
    for (p, w) in ps.iter() {
        check_dims(dim, p.dim())?;
        time += w * p.time;
        for (acc, c) in space.iter_mut().zip(&p.space) {
            *acc += w * c;
        }
    }
    let s = norm(&space);
    let nsq = (time - s) * (time + s);
    if !(nsq > f64::MIN_POSITIVE * 1e4) || !nsq.is_finite() {
        return Err(GeometryError::DegenerateNorm(nsq));
    }
    let scale = 1.0 / (k.sqrt() * nsq.sqrt());
    space.iter_mut().for_each(|c| *c *= scale);
    Ok(LorentzPoint::from_parts_unchecked(time * scale, space))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(v: f64) -> Curvature {
        Curvature::new(v).unwrap()
    }

    fn ev(v: &[f64]) -> EuclideanVec {
        EuclideanVec::new(v.to_vec()).unwrap()
    }

    #[test]
    fn inner_of_origin_is_minus_inverse_kappa() {
        let o = LorentzPoint::origin(2, k(1.0));
        assert_eq!(lorentz_inner(&o, &o).unwrap(), -1.0);
    }

    #[test]
    fn inner_trivial_pair() {
        let c = k(1.0);
        let x = LorentzPoint::new(2f64.sqrt(), vec![1.0, 0.0], c).unwrap();
        let y = LorentzPoint::new(2f64.sqrt(), vec![0.0, 1.0], c).unwrap();
        assert!((lorentz_inner(&x, &y).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn inner_dimension_mismatch() {
        let c = k(1.0);
        let a = LorentzPoint::origin(2, c);
        let b = LorentzPoint::origin(3, c);
        assert!(matches!(
            lorentz_inner(&a, &b),
            Err(GeometryError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        let p = lift_time(&ev(&[0.0, 0.0]), k(1.0)).unwrap();
        assert_eq!(p.time(), 1.0);
        let p = lift_time(&ev(&[3.0, 4.0]), k(1.0)).unwrap();
        assert_eq!(p.time(), 26f64.sqrt());
    }

    #[test]
    fn new_rejects_off_manifold_and_negative_time() {
        let c = k(1.0);
        assert!(matches!(
            LorentzPoint::new(1.5, vec![0.0], c),
            Err(GeometryError::OffManifold { .. })
        ));
        assert!(matches!(
            LorentzPoint::new(-1.0, vec![0.0], c),
            Err(GeometryError::NegativeTime(_))
        ));
        assert!(LorentzPoint::from_ambient(&[2f64.sqrt(), 1.0], c).is_ok());
    }

    #[test]
    fn distance_of_identical_points_is_zero() {
        let c = k(0.05);
        let x = lift_time(&ev(&[0.3, -2.0, 1.1]), c).unwrap();
        assert_eq!(lorentz_distance(&x, &x, c).unwrap(), 0.0);
        assert_eq!(squared_lorentzian_distance(&x, &x, c).unwrap(), 0.0);
    }

    #[test]
    fn squared_lorentzian_trivial() {
        let c = k(1.0);
        let x = LorentzPoint::new(2f64.sqrt(), vec![1.0, 0.0], c).unwrap();
        let y = LorentzPoint::new(2f64.sqrt(), vec![0.0, 1.0], c).unwrap();
        assert!((squared_lorentzian_distance(&x, &y, c).unwrap() - 2.0).abs() < 1e-14);
        let o = LorentzPoint::origin(2, c);
        assert_eq!(squared_lorentzian_distance(&o, &o, c).unwrap(), 0.0);
    }

    #[test]
    fn exp_map_of_zero_is_origin() {
        let c = k(0.05);
        let p = exp_map_lorentz(&EuclideanVec::zeros(3), c).unwrap();
        assert_eq!(p, LorentzPoint::origin(3, c));
    }

    #[test]
    fn exp_map_overflow_is_signalled() {
        let c = k(1.0);
        assert!(matches!(
            exp_map_lorentz(&ev(&[800.0]), c),
            Err(GeometryError::Overflow(_))
        ));
        assert!(matches!(
            exp_map_lorentz(&ev(&[400.0]), c),
            Err(GeometryError::Overflow(_))
        ));
    }

    #[test]
    fn clip_examples() {
        let v = ev(&[0.6, 0.8]);
        assert_eq!(clip_euclidean(&v, 2.3), v);
        let c = clip_euclidean(&ev(&[3.0, 4.0]), 2.3);
        assert!((c.as_slice()[0] - 1.38).abs() < 1e-15);
        assert!((c.as_slice()[1] - 1.84).abs() < 1e-15);
        assert_eq!(clip_euclidean(&c, 2.3), c);
        let big = ev(&[1e6, -3e5]);
        assert_eq!(clip_euclidean(&big, f64::INFINITY), big);
    }

    #[test]
    fn centroid_of_single_point_is_the_point() {
        let c = k(0.5);
        let p = lift_time(&ev(&[0.4, -1.3]), c).unwrap();
        let pts = [p.clone()];
        let mu = lorentz_centroid(&WeightedPointSet::new(&pts, &[3.0]).unwrap(), c).unwrap();
        assert!((mu.time() - p.time()).abs() < 1e-14);
        for (a, b) in mu.space().iter().zip(p.space()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn centroid_of_symmetric_pair_is_origin() {
        let c = k(2.0);
        let pts = [
            lift_time(&ev(&[0.7, 0.1]), c).unwrap(),
            lift_time(&ev(&[-0.7, -0.1]), c).unwrap(),
        ];
        let mu = lorentz_centroid(&WeightedPointSet::uniform(&pts).unwrap(), c).unwrap();
        assert!((mu.time() - c.radius()).abs() < 1e-15);
        assert!(mu.space().iter().all(|s| s.abs() < 1e-15));
    }
}
