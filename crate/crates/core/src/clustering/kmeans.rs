use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::init::seed_indices;
use super::{
    check_metric, ClusteringError, ClusteringResult, InitMethod, KMeansConfig, LabeledDataset,
    MetricSpace,
};

/// Unconstrained Lloyd K-Means, best of `cfg.restarts` runs by final objective.
pub fn kmeans<S: MetricSpace>(
    data: &[S::Point],
    cfg: &KMeansConfig,
    space: &S,
) -> Result<ClusteringResult<S::Point>, ClusteringError> {
    cfg.validate(data.len())?;
    validate_points(data, space)?;
    let constraints = vec![None; data.len()];
    let candidates: Vec<usize> = (0..data.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    best_of_restarts(cfg, |_| {
        let init = match &cfg.init {
            InitMethod::KMeansPlusPlus => {
                seed_indices(data, &candidates, &[], cfg.k, &mut rng, space)?
                    .into_iter()
                    .map(|i| data[i].clone())
                    .collect()
            }
            InitMethod::Explicit(idx) => idx.iter().map(|&i| data[i].clone()).collect(),
            InitMethod::LabeledMeansThenKMeansPlusPlus => {
                return Err(ClusteringError::InvalidConfig(
                    "labeled-mean initialisation needs a labeled dataset".into(),
                ))
            }
        };
        lloyd(data, &constraints, init, cfg, space)
    })
}

/// Semi-supervised K-Means: labeled points are pinned to their class's cluster.
///
/// Old classes (in ascending id order) own clusters `0..L`; their centroids
/// start at the centroid of the class's labeled points. The remaining
/// `k - L` centroids are seeded by k-means++ over unlabeled points. Every
/// centroid, labeled or not, is recomputed each iteration.
pub fn semi_supervised_kmeans<S: MetricSpace>(
    data: &LabeledDataset<S::Point>,
    cfg: &KMeansConfig,
    space: &S,
) -> Result<ClusteringResult<S::Point>, ClusteringError> {
    let points = data.points();
    cfg.validate(points.len())?;
    validate_points(points, space)?;

    let classes = data.labeled_classes();
    if cfg.k < classes.len() {
        return Err(ClusteringError::KBelowLabeledClasses {
            k: cfg.k,
            labeled: classes.len(),
        });
    }
    let mut cluster_of_class = vec![None; data.num_classes()];
    for (cluster, &c) in classes.iter().enumerate() {
        cluster_of_class[c] = Some(cluster);
    }
    let constraints: Vec<Option<usize>> = data
        .known_labels()
        .map(|l| l.and_then(|c| cluster_of_class[c]))
        .collect();

    let mut members: Vec<Vec<&S::Point>> = vec![Vec::new(); classes.len()];
    for (p, c) in points.iter().zip(&constraints) {
        if let Some(c) = c {
            members[*c].push(p);
        }
    }
    let mut labeled_centroids = Vec::with_capacity(classes.len());
    for (cluster, m) in members.iter().enumerate() {
        if m.is_empty() {
            return Err(ClusteringError::EmptyLabeledClass(classes[cluster]));
        }
        labeled_centroids.push(space.centroid(m)?);
    }

    let unlabeled: Vec<usize> = (0..points.len())
        .filter(|&i| constraints[i].is_none())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    best_of_restarts(cfg, |_| {
        let extra = seed_indices(
            points,
            &unlabeled,
            &labeled_centroids,
            cfg.k - classes.len(),
            &mut rng,
            space,
        )?;
        let mut init = labeled_centroids.clone();
        init.extend(extra.into_iter().map(|i| points[i].clone()));
        lloyd(points, &constraints, init, cfg, space)
    })
}

fn validate_points<S: MetricSpace>(data: &[S::Point], space: &S) -> Result<(), ClusteringError> {
    let Some(first) = data.first() else {
        return Err(ClusteringError::InvalidDataset("no points".into()));
    };
    let expected = space.dim(first);
    for (index, p) in data.iter().enumerate() {
        let found = space.dim(p);
        if found != expected {
            return Err(ClusteringError::DimensionMismatch {
                index,
                expected,
                found,
            });
        }
        if !space.validate(p) {
            return Err(ClusteringError::InvalidPoint(index));
        }
    }
    check_metric(space, data)
}

fn best_of_restarts<P>(
    cfg: &KMeansConfig,
    mut run: impl FnMut(usize) -> Result<ClusteringResult<P>, ClusteringError>,
) -> Result<ClusteringResult<P>, ClusteringError> {
    let mut best: Option<ClusteringResult<P>> = None;
    for r in 0..cfg.restarts {
        let mut res = run(r)?;
        res.restart = r;
        // strict comparison: the earliest restart wins ties
        if best
            .as_ref()
            .is_none_or(|b| res.final_objective() < b.final_objective())
        {
            best = Some(res);
        }
    }
    Ok(best.expect("restarts >= 1"))
}

/// Index of the lowest-cost centroid; ties go to the lowest index.
fn nearest<S: MetricSpace>(space: &S, centroids: &[S::Point], p: &S::Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, mu) in centroids.iter().enumerate() {
        let cost = space.cost(mu, p);
        if cost < best.1 {
            best = (c, cost);
        }
    }
    best
}

fn lloyd<S: MetricSpace>(
    data: &[S::Point],
    constraints: &[Option<usize>],
    mut centroids: Vec<S::Point>,
    cfg: &KMeansConfig,
    space: &S,
) -> Result<ClusteringResult<S::Point>, ClusteringError> {
    let k = centroids.len();
    let mut assignments: Vec<usize> = Vec::new();
    let mut trace = Vec::new();
    let mut converged = false;
    let mut reseeds = 0;
    let mut iterations = 0;
    #[cfg(debug_assertions)]
    let mut seen = std::collections::HashSet::new();

    while iterations < cfg.max_iters {
        iterations += 1;
        let mut next: Vec<usize> = data
            .par_iter()
            .zip(constraints.par_iter())
            .map(|(p, fixed)| fixed.unwrap_or_else(|| nearest(space, &centroids, p).0))
            .collect();

        if cfg.reseed_empty {
            reseeds += reseed_empty(data, constraints, &centroids, &mut next, k, space);
        }

        let unchanged = next == assignments;
        assignments = next;

        let mut members: Vec<Vec<&S::Point>> = vec![Vec::new(); k];
        for (p, &a) in data.iter().zip(&assignments) {
            members[a].push(p);
        }
        let updated: Vec<S::Point> = members
            .par_iter()
            .zip(centroids.par_iter())
            .map(|(m, old)| {
                match m.as_slice() {
                    [] => Ok(old.clone()),
                    // a singleton is its own centroid; skip the rounding of renormalisation
                    [only] => Ok((*only).clone()),
                    _ => space.centroid(m),
                }
            })
            .collect::<Result<_, _>>()?;
        let shift = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| space.distance(a, b))
            .fold(0.0, f64::max);
        centroids = updated;

        let objective: f64 = data
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| space.cost(&centroids[a], p))
            .sum();
        trace.push(objective);

        if unchanged || shift < cfg.tol_shift {
            converged = true;
            break;
        }
        #[cfg(debug_assertions)]
        if cfg.tol_shift == 0.0 {
            debug_assert!(
                seen.insert(assignments.clone()),
                "assignment cycle detected at iteration {iterations}"
            );
        }
    }

    Ok(ClusteringResult {
        assignments,
        centroids,
        objective_trace: trace,
        iterations,
        converged,
        restart: 0,
        reseeds,
    })
}

/// Gives every empty cluster the unconstrained point farthest from its centroid.
///
/// Donors must come from clusters with at least two members so no new empty
/// cluster is created.
fn reseed_empty<S: MetricSpace>(
    data: &[S::Point],
    constraints: &[Option<usize>],
    centroids: &[S::Point],
    assignments: &mut [usize],
    k: usize,
    space: &S,
) -> usize {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    let mut moved = 0;
    let mut taken = vec![false; data.len()];
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for (i, p) in data.iter().enumerate() {
            if constraints[i].is_some() || taken[i] || sizes[assignments[i]] < 2 {
                continue;
            }
            let d = space.distance(&centroids[assignments[i]], p);
            if best.is_none_or(|(_, bd)| d > bd) {
                best = Some((i, d));
            }
        }
        if let Some((i, _)) = best {
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
            taken[i] = true;
            moved += 1;
        }
    }
    moved
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::{EuclideanSpace, LorentzSpace};
    use crate::geometry::{
        exp_map_lorentz, lorentz_centroid, Curvature, EuclideanVec, LorentzPoint,
        WeightedPointSet,
    };

    fn ev(v: &[f64]) -> EuclideanVec {
        EuclideanVec::new(v.to_vec()).unwrap()
    }

    fn lorentz_points(k: Curvature) -> Vec<LorentzPoint> {
        [[0.1, 0.2], [0.5, -0.3], [-1.0, 0.4], [2.0, 1.0], [0.0, -2.0]]
            .iter()
            .map(|v| exp_map_lorentz(&ev(v), k).unwrap())
            .collect()
    }

    #[test]
    fn k1_centroid_is_global_lorentz_centroid() {
        let k = Curvature::new(0.05).unwrap();
        let pts = lorentz_points(k);
        let space = LorentzSpace { curvature: k };
        let res = kmeans(&pts, &KMeansConfig::new(1), &space).unwrap();
        let mu = lorentz_centroid(&WeightedPointSet::uniform(&pts).unwrap(), k).unwrap();
        assert!(res.assignments.iter().all(|&a| a == 0));
        assert!((res.centroids[0].time() - mu.time()).abs() < 1e-12);
        for (a, b) in res.centroids[0].space().iter().zip(mu.space()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn k_equals_n_has_zero_objective() {
        let k = Curvature::new(1.0).unwrap();
        let pts = lorentz_points(k);
        let res = kmeans(&pts, &KMeansConfig::new(5), &LorentzSpace { curvature: k }).unwrap();
        assert_eq!(res.final_objective(), 0.0);
        let mut a = res.assignments.clone();
        a.sort();
        assert_eq!(a, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn config_errors() {
        let pts = vec![ev(&[0.0]), ev(&[1.0])];
        assert!(matches!(
            kmeans(&pts, &KMeansConfig::new(3), &EuclideanSpace),
            Err(ClusteringError::KExceedsPoints { .. })
        ));
        let mut cfg = KMeansConfig::new(1);
        cfg.max_iters = 0;
        assert!(kmeans(&pts, &cfg, &EuclideanSpace).is_err());
        let mixed = vec![ev(&[0.0]), ev(&[1.0, 2.0])];
        assert!(matches!(
            kmeans(&mixed, &KMeansConfig::new(1), &EuclideanSpace),
            Err(ClusteringError::DimensionMismatch { index: 1, .. })
        ));
    }

    #[test]
    fn invalid_lorentz_point_rejected() {
        let k = Curvature::new(1.0).unwrap();
        let mut pts = lorentz_points(k);
        pts.push(LorentzPoint::from_parts_unchecked(3.0, vec![0.0, 0.0]));
        assert_eq!(
            kmeans(&pts, &KMeansConfig::new(2), &LorentzSpace { curvature: k }),
            Err(ClusteringError::InvalidPoint(5))
        );
    }

    #[test]
    fn reseed_fills_empty_cluster_from_farthest_point() {
        // centroid 1 sits far away and attracts nothing
        let pts = vec![ev(&[0.0]), ev(&[0.1]), ev(&[0.2]), ev(&[5.0])];
        let constraints = vec![None; 4];
        let centroids = vec![ev(&[0.1]), ev(&[100.0])];
        let mut assign = vec![0, 0, 0, 0];
        let moved = reseed_empty(&pts, &constraints, &centroids, &mut assign, 2, &EuclideanSpace);
        assert_eq!(moved, 1);
        assert_eq!(assign, vec![0, 0, 0, 1]);
    }

    #[test]
    fn semi_supervised_all_labeled_recovers_labels() {
        let pts = vec![ev(&[0.0]), ev(&[4.0]), ev(&[0.2]), ev(&[4.1]), ev(&[2.1])];
        let labels = vec![Some(1), Some(0), Some(1), Some(0), Some(1)];
        let ds = LabeledDataset::new(pts, labels, vec![true; 5], vec![true, true]).unwrap();
        let res =
            semi_supervised_kmeans(&ds, &KMeansConfig::semi_supervised(2), &EuclideanSpace)
                .unwrap();
        assert_eq!(res.assignments, vec![1, 0, 1, 0, 1]);
    }

    #[test]
    fn semi_supervised_errors() {
        let pts = vec![ev(&[0.0]), ev(&[4.0]), ev(&[0.2])];
        let ds = LabeledDataset::new(
            pts.clone(),
            vec![Some(0), Some(1), None],
            vec![true, true, false],
            vec![true, true],
        )
        .unwrap();
        assert!(matches!(
            semi_supervised_kmeans(&ds, &KMeansConfig::semi_supervised(1), &EuclideanSpace),
            Err(ClusteringError::KBelowLabeledClasses { k: 1, labeled: 2 })
        ));
        let ds = LabeledDataset::new(
            pts,
            vec![Some(0), Some(1), None],
            vec![true, false, false],
            vec![true, true],
        )
        .unwrap();
        assert_eq!(
            semi_supervised_kmeans(&ds, &KMeansConfig::semi_supervised(2), &EuclideanSpace)
                .unwrap_err(),
            ClusteringError::EmptyLabeledClass(1)
        );
    }

    #[test]
    fn dataset_validation() {
        let pts = vec![ev(&[0.0]), ev(&[1.0])];
        assert!(LabeledDataset::new(pts.clone(), vec![None, None], vec![true, false], vec![true])
            .is_err());
        assert!(
            LabeledDataset::new(pts, vec![Some(1), None], vec![true, false], vec![true, false])
                .is_err()
        );
    }
}
