//! Lloyd K-Means over any [`MetricSpace`], plus the constrained semi-supervised
//! variant used for category discovery.
//!
//! The engine only needs a distance and a centroid. With the Lorentz space the
//! centroid is the closed-form Lorentz centroid; with the Poincaré space it is
//! the Einstein midpoint taken through Klein coordinates.
//!
//! Runs are deterministic for a fixed `(data, config)`: assignment is
//! data-parallel but every reduction happens in point-index order.

mod init;
mod kmeans;
mod space;

pub use init::kmeanspp_init;
pub use kmeans::{kmeans, semi_supervised_kmeans};
pub use space::{
    check_metric, make_space, EuclideanSpace, LorentzSpace, MetricSpace, PoincareSpace,
    SpaceHandle, SpaceModel,
};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ClusteringError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("k = {k} exceeds the number of points {n}")]
    KExceedsPoints { k: usize, n: usize },
    #[error("need {needed} distinct points for seeding but only {found} are distinct")]
    TooFewDistinct { needed: usize, found: usize },
    #[error("point {0} is not valid in this space")]
    InvalidPoint(usize),
    #[error("point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("k = {k} is smaller than the number of labeled classes {labeled}")]
    KBelowLabeledClasses { k: usize, labeled: usize },
    #[error("labeled class {0} has no labeled points")]
    EmptyLabeledClass(usize),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("distance check failed: {0}")]
    InvalidMetric(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How initial centroids are chosen.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum InitMethod {
    /// D² seeding under the space's distance.
    #[default]
    KMeansPlusPlus,
    /// Labeled-class centroids, then D² seeding over unlabeled points (semi-supervised only).
    LabeledMeansThenKMeansPlusPlus,
    /// Start from these data indices.
    Explicit(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    pub init: InitMethod,
    /// Stop once no centroid moves farther than this (in the space's distance).
    pub tol_shift: f64,
    pub restarts: usize,
    /// Move an emptied centroid onto the point farthest from its own centroid.
    pub reseed_empty: bool,
}

impl KMeansConfig {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iters: 300,
            seed: 0,
            init: InitMethod::KMeansPlusPlus,
            tol_shift: 1e-6,
            restarts: 10,
            reseed_empty: true,
        }
    }

    /// Defaults for the semi-supervised variant (labeled init, one restart).
    pub fn semi_supervised(k: usize) -> Self {
        Self {
            restarts: 1,
            init: InitMethod::LabeledMeansThenKMeansPlusPlus,
            ..Self::new(k)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts;
        self
    }

    pub(crate) fn validate(&self, n: usize) -> Result<(), ClusteringError> {
        if self.k == 0 {
            return Err(ClusteringError::InvalidConfig("k must be positive".into()));
        }
        if self.k > n {
            return Err(ClusteringError::KExceedsPoints { k: self.k, n });
        }
        if self.max_iters == 0 {
            return Err(ClusteringError::InvalidConfig("max_iters must be >= 1".into()));
        }
        if self.restarts == 0 {
            return Err(ClusteringError::InvalidConfig("restarts must be >= 1".into()));
        }
        if !(self.tol_shift >= 0.0) {
            return Err(ClusteringError::InvalidConfig(
                "tol_shift must be non-negative".into(),
            ));
        }
        if let InitMethod::Explicit(idx) = &self.init {
            if idx.len() != self.k {
                return Err(ClusteringError::InvalidConfig(format!(
                    "{} explicit centroids for k = {}",
                    idx.len(),
                    self.k
                )));
            }
            if let Some(bad) = idx.iter().find(|&&i| i >= n) {
                return Err(ClusteringError::InvalidConfig(format!(
                    "explicit centroid index {bad} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Points with the category-discovery split.
///
/// Classes are `0..num_classes`. Labels of unlabeled points may be present
/// (ground truth for evaluation) but clustering never reads them.
#[derive(Debug, Clone)]
pub struct LabeledDataset<P> {
    points: Vec<P>,
    labels: Vec<Option<usize>>,
    is_labeled: Vec<bool>,
    is_old_class: Vec<bool>,
}

impl<P> LabeledDataset<P> {
    pub fn new(
        points: Vec<P>,
        labels: Vec<Option<usize>>,
        is_labeled: Vec<bool>,
        is_old_class: Vec<bool>,
    ) -> Result<Self, ClusteringError> {
        let n = points.len();
        if labels.len() != n || is_labeled.len() != n {
            return Err(ClusteringError::InvalidDataset(format!(
                "{n} points, {} labels, {} labeled flags",
                labels.len(),
                is_labeled.len()
            )));
        }
        for (i, (&lab, l)) in is_labeled.iter().zip(&labels).enumerate() {
            if let Some(c) = l {
                if *c >= is_old_class.len() {
                    return Err(ClusteringError::InvalidDataset(format!(
                        "point {i} has class {c} outside 0..{}",
                        is_old_class.len()
                    )));
                }
            }
            match (lab, l) {
                (true, None) => {
                    return Err(ClusteringError::InvalidDataset(format!(
                        "labeled point {i} has no label"
                    )))
                }
                (true, Some(c)) if !is_old_class[*c] => {
                    return Err(ClusteringError::InvalidDataset(format!(
                        "labeled point {i} belongs to new class {c}"
                    )))
                }
                _ => {}
            }
        }
        Ok(Self {
            points,
            labels,
            is_labeled,
            is_old_class,
        })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn is_labeled(&self) -> &[bool] {
        &self.is_labeled
    }

    pub fn is_old_class(&self) -> &[bool] {
        &self.is_old_class
    }

    pub fn num_classes(&self) -> usize {
        self.is_old_class.len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Old (seen) classes in ascending order; these become clusters `0..`.
    pub fn labeled_classes(&self) -> Vec<usize> {
        (0..self.is_old_class.len())
            .filter(|&c| self.is_old_class[c])
            .collect()
    }

    /// Per point: the known label if the point is in the labeled subset.
    pub fn known_labels(&self) -> impl Iterator<Item = Option<usize>> + '_ {
        self.is_labeled
            .iter()
            .zip(&self.labels)
            .map(|(&lab, l)| if lab { *l } else { None })
    }

    pub fn map_points<Q>(
        self,
        f: impl FnMut(P) -> Result<Q, ClusteringError>,
    ) -> Result<LabeledDataset<Q>, ClusteringError> {
        Ok(LabeledDataset {
            points: self.points.into_iter().map(f).collect::<Result<_, _>>()?,
            labels: self.labels,
            is_labeled: self.is_labeled,
            is_old_class: self.is_old_class,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult<P> {
    pub assignments: Vec<usize>,
    pub centroids: Vec<P>,
    /// Objective (sum of per-point costs) after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the restart that won.
    pub restart: usize,
    /// Number of empty-cluster reseeds performed in the winning run.
    pub reseeds: usize,
}

impl<P> ClusteringResult<P> {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(f64::INFINITY)
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.centroids.len()];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Fraction of points in the most populated cluster.
    pub fn largest_cluster_fraction(&self) -> f64 {
        let max = self.cluster_sizes().into_iter().max().unwrap_or(0);
        max as f64 / self.assignments.len().max(1) as f64
    }
}
