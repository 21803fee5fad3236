//! Klein and Poincaré ball models of radius `1/sqrt(kappa)`.

use super::{
    check_dims, dot, lorentz::LorentzPoint, norm, norm_sq, tanhc, Curvature, EuclideanVec,
    GeometryError, Result, WeightedPointSet, TOL_BOUNDARY,
};

/// Point strictly inside the Klein ball `kappa*|x|^2 < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct KleinPoint(Vec<f64>);

/// Point strictly inside the Poincaré ball `kappa*|x|^2 < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoincarePoint(Vec<f64>);

fn check_ball(components: &[f64], k: Curvature) -> Result<()> {
    if components.iter().any(|c| !c.is_finite()) {
        return Err(GeometryError::NonFinite);
    }
    let r = k.kappa() * norm_sq(components);
    if r < 1.0 {
        Ok(())
    } else {
        Err(GeometryError::OutsideBall(r))
    }
}

/// Pulls a vector whose norm rounded onto (or past) the ball boundary back inside.
fn into_ball(mut v: Vec<f64>, k: Curvature) -> Vec<f64> {
    let scaled = k.sqrt() * norm(&v);
    if scaled >= 1.0 {
        let s = (1.0 - 1e-15) / scaled;
        v.iter_mut().for_each(|c| *c *= s);
    }
    v
}

/// `1 - kappa*|x|^2`, rejected below [`TOL_BOUNDARY`].
fn boundary_gap(components: &[f64], k: Curvature) -> Result<f64> {
    let gap = 1.0 - k.kappa() * norm_sq(components);
    if gap < TOL_BOUNDARY {
        Err(GeometryError::NearBoundary(gap))
    } else {
        Ok(gap)
    }
}

macro_rules! ball_point {
    ($ty:ident) => {
        impl $ty {
            pub fn new(components: Vec<f64>, k: Curvature) -> Result<Self> {
                check_ball(&components, k)?;
                Ok(Self(components))
            }

            pub fn origin(dim: usize) -> Self {
                Self(vec![0.0; dim])
            }

            #[inline]
            pub fn as_slice(&self) -> &[f64] {
                &self.0
            }

            #[inline]
            pub fn dim(&self) -> usize {
                self.0.len()
            }

            pub fn into_inner(self) -> Vec<f64> {
                self.0
            }
        }

        impl AsRef<[f64]> for $ty {
            fn as_ref(&self) -> &[f64] {
                &self.0
            }
        }
    };
}

ball_point!(KleinPoint);
ball_point!(PoincarePoint);

/// Gnomonic projection `x_space / (sqrt(kappa) * x_time)`.
pub fn lorentz_to_klein(x: &LorentzPoint, k: Curvature) -> KleinPoint {
    let s = 1.0 / (k.sqrt() * x.time());
    KleinPoint(into_ball(x.space().iter().map(|c| c * s).collect(), k))
}

/// Inverse of [`lorentz_to_klein`]: `(1/sqrt(kappa - kappa^2 |x|^2)) * [1; sqrt(kappa) x]`.
pub fn klein_to_lorentz(x: &KleinPoint, k: Curvature) -> Result<LorentzPoint> {
    let gap = boundary_gap(&x.0, k)?;
    let time = 1.0 / (k.kappa() * gap).sqrt();
    let s = k.sqrt() * time;
    Ok(LorentzPoint::from_parts_unchecked(
        time,
        x.0.iter().map(|c| c * s).collect(),
    ))
}

/// Lorentz factor `1/sqrt(1 - kappa |x|^2)`.
pub fn lorentz_factor(x: &KleinPoint, k: Curvature) -> Result<f64> {
    Ok(1.0 / boundary_gap(&x.0, k)?.sqrt())
}

/// Einstein midpoint `sum w_i g_i x_i / sum w_i g_i` with Lorentz factors `g_i`.
pub fn einstein_midpoint(ps: &WeightedPointSet<'_, KleinPoint>, k: Curvature) -> Result<KleinPoint> {
    let dim = ps.points()[0].dim();
    let mut acc = vec![0.0; dim];
    let mut total = 0.0;
    for (p, w) in ps.iter() {
        check_dims(dim, p.dim())?;
        let g = w * lorentz_factor(p, k)?;
        total += g;
        for (a, c) in acc.iter_mut().zip(&p.0) {
            *a += g * c;
        }
    }
    acc.iter_mut().for_each(|a| *a /= total);
    Ok(KleinPoint(into_ball(acc, k)))
}

/// Klein exponential map at the origin `tanh(sqrt(kappa)|v|) / (sqrt(kappa)|v|) * v`.
///
/// For very long `v` the result is pulled just inside the boundary, where it
/// is representable but cannot be lifted back to the hyperboloid.
pub fn exp_map_klein(v: &EuclideanVec, k: Curvature) -> KleinPoint {
    let theta = k.sqrt() * v.norm();
    let scale = tanhc(theta);
    KleinPoint(into_ball(v.as_slice().iter().map(|c| c * scale).collect(), k))
}

/// Stereographic projection `x_space / (1 + sqrt(kappa) x_time)`.
pub fn lorentz_to_poincare(x: &LorentzPoint, k: Curvature) -> PoincarePoint {
    let s = 1.0 / (1.0 + k.sqrt() * x.time());
    PoincarePoint(into_ball(x.space().iter().map(|c| c * s).collect(), k))
}

/// Inverse stereographic projection.
pub fn poincare_to_lorentz(p: &PoincarePoint, k: Curvature) -> Result<LorentzPoint> {
    let gap = boundary_gap(&p.0, k)?;
    let r2 = k.kappa() * norm_sq(&p.0);
    let time = (1.0 + r2) / (k.sqrt() * gap);
    let s = 2.0 / gap;
    Ok(LorentzPoint::from_parts_unchecked(
        time,
        p.0.iter().map(|c| c * s).collect(),
    ))
}

/// `2p / (1 + kappa |p|^2)`.
pub fn poincare_to_klein(p: &PoincarePoint, k: Curvature) -> KleinPoint {
    let s = 2.0 / (1.0 + k.kappa() * norm_sq(&p.0));
    KleinPoint(into_ball(p.0.iter().map(|c| c * s).collect(), k))
}

/// `x / (1 + sqrt(1 - kappa |x|^2))`.
pub fn klein_to_poincare(x: &KleinPoint, k: Curvature) -> PoincarePoint {
    let gap = (1.0 - k.kappa() * norm_sq(&x.0)).max(0.0);
    let s = 1.0 / (1.0 + gap.sqrt());
    PoincarePoint(x.0.iter().map(|c| c * s).collect())
}

#[inline]
pub(crate) fn poincare_distance_unchecked(p: &[f64], q: &[f64], k: Curvature) -> f64 {
    let kappa = k.kappa();
    let diff: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
    let denom = (1.0 - kappa * norm_sq(p)) * (1.0 - kappa * norm_sq(q));
    let arg = 1.0 + 2.0 * kappa * diff / denom;
    arg.max(1.0).acosh() / k.sqrt()
}

/// Poincaré-ball geodesic distance.
pub fn poincare_distance(p: &PoincarePoint, q: &PoincarePoint, k: Curvature) -> Result<f64> {
    check_dims(p.dim(), q.dim())?;
    Ok(poincare_distance_unchecked(&p.0, &q.0, k))
}

/// Klein-ball geodesic distance.
pub fn klein_distance(a: &KleinPoint, b: &KleinPoint, k: Curvature) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    let kappa = k.kappa();
    let num = 1.0 - kappa * dot(&a.0, &b.0);
    let den = ((1.0 - kappa * norm_sq(&a.0)) * (1.0 - kappa * norm_sq(&b.0))).sqrt();
    Ok((num / den).max(1.0).acosh() / k.sqrt())
}
