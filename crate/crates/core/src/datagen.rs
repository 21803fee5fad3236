//! Synthetic hierarchical data with a category-discovery split.
//!
//! Class means are produced by a random walk down a tree in tangent space:
//! each node's mean is its parent's mean plus Gaussian noise whose scale
//! shrinks with depth, and samples are jittered around their leaf mean.
//! Points stay Euclidean; callers clip and exp-map them as needed.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::clustering::{ClusteringError, LabeledDataset};
use crate::geometry::EuclideanVec;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatagenError {
    #[error("invalid tree spec: {0}")]
    InvalidSpec(String),
    #[error("invalid split: {0}")]
    InvalidSplit(String),
}

pub type Result<T> = std::result::Result<T, DatagenError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TreeSpec {
    /// Children per node at each level, root first; its length is the depth.
    pub branching: Vec<usize>,
    pub points_per_leaf: usize,
    /// Gaussian scale of the step from a parent mean to a child mean, per level.
    pub dispersion: Vec<f64>,
    /// Gaussian scale of samples around their leaf mean.
    pub sample_dispersion: f64,
    pub dim: usize,
    pub seed: u64,
    pub old_fraction: f64,
    pub labeled_fraction: f64,
}

impl TreeSpec {
    /// Same branching at every level; dispersion shrinks by `ratio` per level.
    pub fn uniform(depth: usize, branching: usize, points_per_leaf: usize, dim: usize) -> Self {
        let ratio: f64 = 0.3;
        Self {
            branching: vec![branching; depth],
            points_per_leaf,
            dispersion: (0..depth).map(|l| ratio.powi(l as i32)).collect(),
            sample_dispersion: 0.3 * ratio.powi(depth as i32 - 1),
            dim,
            seed: 0,
            old_fraction: 0.5,
            labeled_fraction: 0.5,
        }
    }

    pub fn depth(&self) -> usize {
        self.branching.len()
    }

    pub fn leaves(&self) -> usize {
        self.branching.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(DatagenError::InvalidSpec(m));
        if self.branching.is_empty() {
            return bad("depth must be at least 1".into());
        }
        if self.branching.iter().any(|&b| b < 2) {
            return bad(format!("branching {:?} must be >= 2 at every level", self.branching));
        }
        if self.dispersion.len() != self.depth() {
            return bad(format!(
                "{} dispersions for depth {}",
                self.dispersion.len(),
                self.depth()
            ));
        }
        if self.dispersion.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return bad("dispersions must be positive".into());
        }
        if self.dispersion.windows(2).any(|w| w[1] >= w[0]) {
            return bad(format!(
                "dispersion {:?} must strictly decrease with depth",
                self.dispersion
            ));
        }
        if !(self.sample_dispersion >= 0.0 && self.sample_dispersion.is_finite()) {
            return bad("sample dispersion must be non-negative".into());
        }
        if self.points_per_leaf == 0 || self.dim == 0 {
            return bad("points_per_leaf and dim must be positive".into());
        }
        Ok(())
    }
}

/// Which classes are seen and which points are labeled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GcdSplit {
    pub is_labeled: Vec<bool>,
    pub is_old_class: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticGcd {
    pub points: Vec<EuclideanVec>,
    /// `levels[l][i]`: class of point `i` at tree level `l + 1`; the last level is the leaf class.
    pub levels: Vec<Vec<usize>>,
    pub split: GcdSplit,
}

impl SyntheticGcd {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn leaf_labels(&self) -> &[usize] {
        self.levels.last().expect("at least one level")
    }

    pub fn num_classes(&self) -> usize {
        self.split.is_old_class.len()
    }

    /// Per point: whether its leaf class is seen.
    pub fn old_mask(&self) -> Vec<bool> {
        self.leaf_labels()
            .iter()
            .map(|&c| self.split.is_old_class[c])
            .collect()
    }

    /// Evaluation covers the unlabeled points.
    pub fn eval_mask(&self) -> Vec<bool> {
        self.split.is_labeled.iter().map(|l| !l).collect()
    }

    /// Leaf labels are kept for every point as ground truth; clustering reads only labeled ones.
    pub fn labeled_dataset<P>(
        &self,
        points: Vec<P>,
    ) -> std::result::Result<LabeledDataset<P>, ClusteringError> {
        LabeledDataset::new(
            points,
            self.leaf_labels().iter().map(|&c| Some(c)).collect(),
            self.split.is_labeled.clone(),
            self.split.is_old_class.clone(),
        )
    }
}

/// Samples the tree; labels at level `l` are `parent * branching[l] + child`.
pub fn generate_tree(spec: &TreeSpec) -> Result<SyntheticGcd> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut means: Vec<Vec<f64>> = vec![vec![0.0; spec.dim]];
    for (level, &b) in spec.branching.iter().enumerate() {
        let step = Normal::new(0.0, spec.dispersion[level]).expect("validated");
        means = means
            .iter()
            .flat_map(|m| (0..b).map(|_| m.clone()).collect::<Vec<_>>())
            .map(|mut m| {
                m.iter_mut().for_each(|x| *x += step.sample(&mut rng));
                m
            })
            .collect();
    }

    let jitter = Normal::new(0.0, spec.sample_dispersion).expect("validated");
    let n = spec.leaves() * spec.points_per_leaf;
    let mut points = Vec::with_capacity(n);
    let mut leaf = Vec::with_capacity(n);
    for (c, m) in means.iter().enumerate() {
        for _ in 0..spec.points_per_leaf {
            let v = m.iter().map(|x| x + jitter.sample(&mut rng)).collect();
            points.push(EuclideanVec::new(v).expect("finite samples"));
            leaf.push(c);
        }
    }

    // ancestors by dividing out the trailing branching factors
    let mut levels = vec![leaf];
    for l in (1..spec.depth()).rev() {
        let child = levels.last().expect("non-empty");
        levels.push(child.iter().map(|c| c / spec.branching[l]).collect());
    }
    levels.reverse();

    let split = make_gcd_split(
        levels.last().expect("non-empty"),
        spec.old_fraction,
        spec.labeled_fraction,
        spec.seed.wrapping_add(0x9e37_79b9_7f4a_7c15),
    )?;
    Ok(SyntheticGcd {
        points,
        levels,
        split,
    })
}

/// Picks `floor(old_fraction * C)` seen classes (at least one) and labels
/// `floor(labeled_fraction * n_c)` random samples of each seen class.
///
/// Classes are `0..=max(labels)`.
pub fn make_gcd_split(
    labels: &[usize],
    old_fraction: f64,
    labeled_fraction: f64,
    seed: u64,
) -> Result<GcdSplit> {
    for (name, f) in [("old_fraction", old_fraction), ("labeled_fraction", labeled_fraction)] {
        if !(0.0..=1.0).contains(&f) {
            return Err(DatagenError::InvalidSplit(format!("{name} = {f} outside [0, 1]")));
        }
    }
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(DatagenError::InvalidSplit(format!(
            "need at least 2 classes, found {classes}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_old = ((old_fraction * classes as f64).floor() as usize).clamp(1, classes);
    let mut order: Vec<usize> = (0..classes).collect();
    order.shuffle(&mut rng);
    let mut is_old_class = vec![false; classes];
    for &c in &order[..n_old] {
        is_old_class[c] = true;
    }

    let mut is_labeled = vec![false; labels.len()];
    for c in (0..classes).filter(|&c| is_old_class[c]) {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        let take = (labeled_fraction * members.len() as f64).floor() as usize;
        members.shuffle(&mut rng);
        for &i in &members[..take] {
            is_labeled[i] = true;
        }
    }
    Ok(GcdSplit {
        is_labeled,
        is_old_class,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_tree() {
        let mut spec = TreeSpec::uniform(1, 2, 1, 3);
        spec.seed = 4;
        let d = generate_tree(&spec).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.levels, vec![vec![0, 1]]);
    }

    #[test]
    fn split_counts() {
        let labels = [0, 0, 0, 0, 1, 1, 1, 1];
        let s = make_gcd_split(&labels, 0.5, 0.5, 1).unwrap();
        assert_eq!(s.is_old_class.iter().filter(|&&o| o).count(), 1);
        assert_eq!(s.is_labeled.iter().filter(|&&l| l).count(), 2);
        let old = s.is_old_class.iter().position(|&o| o).unwrap();
        assert!(s.is_labeled.iter().zip(labels).all(|(&l, c)| !l || c == old));
        let all = make_gcd_split(&labels, 1.0, 0.5, 1).unwrap();
        assert!(all.is_old_class.iter().all(|&o| o));
        assert_eq!(make_gcd_split(&labels, 0.5, 0.5, 1).unwrap(), s);
        assert!(make_gcd_split(&[0, 0], 0.5, 0.5, 1).is_err());
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = TreeSpec::uniform(2, 3, 4, 2);
        spec.dispersion = vec![0.5, 0.5];
        assert!(generate_tree(&spec).is_err());
        spec.dispersion = vec![1.0];
        assert!(generate_tree(&spec).is_err());
        let mut spec = TreeSpec::uniform(2, 1, 4, 2);
        assert!(generate_tree(&spec).is_err());
        spec.branching = vec![];
        assert!(spec.validate().is_err());
    }
}
