//! Metric spaces K-Means can run in: a distance, a centroid and a validity check.

use std::fmt;
use std::str::FromStr;

use crate::geometry::{
    self, einstein_midpoint, klein_to_poincare, lorentz_centroid, poincare_to_klein, Curvature,
    EuclideanVec, KleinPoint, LorentzPoint, PoincarePoint, WeightedPointSet, TOL_BOUNDARY,
    TOL_MANIFOLD,
};

use super::ClusteringError;

/// Distance + centroid abstraction driving Lloyd iterations.
pub trait MetricSpace: Sync {
    type Point: Clone + Send + Sync + fmt::Debug;

    fn distance(&self, a: &Self::Point, b: &Self::Point) -> f64;

    /// Centroid of a non-empty member list.
    fn centroid(&self, members: &[&Self::Point]) -> Result<Self::Point, ClusteringError>;

    fn validate(&self, p: &Self::Point) -> bool;

    fn dim(&self, p: &Self::Point) -> usize;

    /// Per-point cost the assignment step minimises and the objective sums.
    ///
    /// Must be a non-decreasing function of [`MetricSpace::distance`].
    fn cost(&self, centroid: &Self::Point, p: &Self::Point) -> f64 {
        let d = self.distance(centroid, p);
        d * d
    }

    /// Flat coordinates for reporting.
    fn coordinates(&self, p: &Self::Point) -> Vec<f64>;
}

/// Squared L2 distance and arithmetic mean.
#[derive(Debug, Clone, Copy, Default)]
pub struct EuclideanSpace;

impl MetricSpace for EuclideanSpace {
    type Point = EuclideanVec;

    fn distance(&self, a: &EuclideanVec, b: &EuclideanVec) -> f64 {
        self.cost(a, b).sqrt()
    }

    fn cost(&self, a: &EuclideanVec, b: &EuclideanVec) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y) * (x - y))
            .sum()
    }

    fn centroid(&self, members: &[&EuclideanVec]) -> Result<EuclideanVec, ClusteringError> {
        let first = members.first().ok_or(ClusteringError::Geometry(
            geometry::GeometryError::EmptySet,
        ))?;
        let mut acc = vec![0.0; first.dim()];
        for m in members {
            for (a, c) in acc.iter_mut().zip(m.as_slice()) {
                *a += c;
            }
        }
        let n = members.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Ok(EuclideanVec::new(acc)?)
    }

    fn validate(&self, p: &EuclideanVec) -> bool {
        p.as_slice().iter().all(|c| c.is_finite())
    }

    fn dim(&self, p: &EuclideanVec) -> usize {
        p.dim()
    }

    fn coordinates(&self, p: &EuclideanVec) -> Vec<f64> {
        p.as_slice().to_vec()
    }
}

/// Geodesic distance on the hyperboloid with the Lorentz centroid.
///
/// The cost is the squared Lorentzian distance, which is monotone in the
/// geodesic distance and is exactly what the centroid minimises, so the
/// objective never increases.
#[derive(Debug, Clone, Copy)]
pub struct LorentzSpace {
    pub curvature: Curvature,
}

impl MetricSpace for LorentzSpace {
    type Point = LorentzPoint;

    fn distance(&self, a: &LorentzPoint, b: &LorentzPoint) -> f64 {
        geometry::lorentz::distance_unchecked(a, b, self.curvature)
    }

    fn cost(&self, a: &LorentzPoint, b: &LorentzPoint) -> f64 {
        geometry::lorentz::sq_lorentzian_unchecked(a, b, self.curvature)
    }

    fn centroid(&self, members: &[&LorentzPoint]) -> Result<LorentzPoint, ClusteringError> {
        let owned: Vec<LorentzPoint> = members.iter().map(|p| (*p).clone()).collect();
        Ok(lorentz_centroid(
            &WeightedPointSet::uniform(&owned)?,
            self.curvature,
        )?)
    }

    fn validate(&self, p: &LorentzPoint) -> bool {
        p.time() > 0.0 && p.manifold_residual(self.curvature) <= TOL_MANIFOLD
    }

    fn dim(&self, p: &LorentzPoint) -> usize {
        p.dim()
    }

    fn coordinates(&self, p: &LorentzPoint) -> Vec<f64> {
        p.to_ambient()
    }
}

/// Poincaré distance with the Einstein midpoint computed in Klein coordinates.
#[derive(Debug, Clone, Copy)]
pub struct PoincareSpace {
    pub curvature: Curvature,
}

impl MetricSpace for PoincareSpace {
    type Point = PoincarePoint;

    fn distance(&self, a: &PoincarePoint, b: &PoincarePoint) -> f64 {
        geometry::ball::poincare_distance_unchecked(a.as_slice(), b.as_slice(), self.curvature)
    }

    fn centroid(&self, members: &[&PoincarePoint]) -> Result<PoincarePoint, ClusteringError> {
        let k = self.curvature;
        let klein: Vec<KleinPoint> = members.iter().map(|p| poincare_to_klein(p, k)).collect();
        let mid = einstein_midpoint(&WeightedPointSet::uniform(&klein)?, k)?;
        Ok(klein_to_poincare(&mid, k))
    }

    fn validate(&self, p: &PoincarePoint) -> bool {
        let r2: f64 = p.as_slice().iter().map(|c| c * c).sum();
        p.as_slice().iter().all(|c| c.is_finite())
            && 1.0 - self.curvature.kappa() * r2 >= TOL_BOUNDARY
    }

    fn dim(&self, p: &PoincarePoint) -> usize {
        p.dim()
    }

    fn coordinates(&self, p: &PoincarePoint) -> Vec<f64> {
        p.as_slice().to_vec()
    }
}

/// Which geometry to cluster in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SpaceModel {
    Euclidean,
    Lorentz,
    PoincareViaKlein,
}

impl SpaceModel {
    pub fn is_hyperbolic(self) -> bool {
        !matches!(self, SpaceModel::Euclidean)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SpaceModel::Euclidean => "euclidean",
            SpaceModel::Lorentz => "lorentz",
            SpaceModel::PoincareViaKlein => "poincare",
        }
    }
}

impl fmt::Display for SpaceModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpaceModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "euclidean" => Ok(SpaceModel::Euclidean),
            "lorentz" => Ok(SpaceModel::Lorentz),
            "poincare" | "poincare_via_klein" => Ok(SpaceModel::PoincareViaKlein),
            other => Err(format!("unknown space '{other}'")),
        }
    }
}

/// A constructed metric space of any supported model.
#[derive(Debug, Clone, Copy)]
pub enum SpaceHandle {
    Euclidean(EuclideanSpace),
    Lorentz(LorentzSpace),
    PoincareViaKlein(PoincareSpace),
}

impl SpaceHandle {
    pub fn model(&self) -> SpaceModel {
        match self {
            SpaceHandle::Euclidean(_) => SpaceModel::Euclidean,
            SpaceHandle::Lorentz(_) => SpaceModel::Lorentz,
            SpaceHandle::PoincareViaKlein(_) => SpaceModel::PoincareViaKlein,
        }
    }
}

/// Builds the metric space for `model`; hyperbolic models need a curvature.
pub fn make_space(
    model: SpaceModel,
    curvature: Option<Curvature>,
) -> Result<SpaceHandle, ClusteringError> {
    let need = || {
        curvature.ok_or_else(|| {
            ClusteringError::InvalidConfig(format!("{model} space requires a curvature"))
        })
    };
    Ok(match model {
        SpaceModel::Euclidean => SpaceHandle::Euclidean(EuclideanSpace),
        SpaceModel::Lorentz => SpaceHandle::Lorentz(LorentzSpace { curvature: need()? }),
        SpaceModel::PoincareViaKlein => {
            SpaceHandle::PoincareViaKlein(PoincareSpace { curvature: need()? })
        }
    })
}

/// Spot-checks symmetry and identity of the distance on a few sample points.
pub fn check_metric<S: MetricSpace>(space: &S, sample: &[S::Point]) -> Result<(), ClusteringError> {
    let n = sample.len().min(8);
    for i in 0..n {
        let a = &sample[i];
        let self_d = space.distance(a, a);
        if self_d.abs() > 1e-12 {
            return Err(ClusteringError::InvalidMetric(format!(
                "d(x,x) = {self_d:e} at sample {i}"
            )));
        }
        for (j, b) in sample.iter().enumerate().take(n).skip(i + 1) {
            let (ab, ba) = (space.distance(a, b), space.distance(b, a));
            if !ab.is_finite() || !ba.is_finite() || (ab - ba).abs() > 1e-12 * ab.abs().max(1.0) {
                return Err(ClusteringError::InvalidMetric(format!(
                    "asymmetric distance between samples {i} and {j}: {ab} vs {ba}"
                )));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{exp_map_lorentz, lorentz_to_poincare};

    #[test]
    fn euclidean_centroid_is_mean() {
        let a = EuclideanVec::new(vec![0.0, 0.0]).unwrap();
        let b = EuclideanVec::new(vec![2.0, 0.0]).unwrap();
        let c = EuclideanSpace.centroid(&[&a, &b]).unwrap();
        assert_eq!(c.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn lorentz_distance_on_identical_points_is_zero() {
        let k = Curvature::new(0.05).unwrap();
        let s = LorentzSpace { curvature: k };
        let p = exp_map_lorentz(&EuclideanVec::new(vec![0.4, 1.0]).unwrap(), k).unwrap();
        assert_eq!(s.distance(&p, &p), 0.0);
        assert_eq!(s.cost(&p, &p), 0.0);
    }

    #[test]
    fn poincare_and_lorentz_handles_agree() {
        let k = Curvature::new(0.5).unwrap();
        let l = LorentzSpace { curvature: k };
        let pc = PoincareSpace { curvature: k };
        let x = exp_map_lorentz(&EuclideanVec::new(vec![0.4, 1.0]).unwrap(), k).unwrap();
        let y = exp_map_lorentz(&EuclideanVec::new(vec![-1.2, 0.3]).unwrap(), k).unwrap();
        let d = l.distance(&x, &y);
        let dp = pc.distance(&lorentz_to_poincare(&x, k), &lorentz_to_poincare(&y, k));
        assert!((d - dp).abs() < 1e-8 * d);
    }

    #[test]
    fn hyperbolic_models_need_curvature() {
        assert!(make_space(SpaceModel::Lorentz, None).is_err());
        assert!(make_space(SpaceModel::PoincareViaKlein, None).is_err());
        assert!(matches!(
            make_space(SpaceModel::Euclidean, None),
            Ok(SpaceHandle::Euclidean(_))
        ));
        assert_eq!("poincare".parse::<SpaceModel>(), Ok(SpaceModel::PoincareViaKlein));
        assert!("hyperbolic".parse::<SpaceModel>().is_err());
    }
}
