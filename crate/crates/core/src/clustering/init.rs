use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{ClusteringError, MetricSpace};

/// k-means++ seeding: `k` distinct data points drawn with probability
/// proportional to the squared distance to the nearest already-chosen one.
pub fn kmeanspp_init<S: MetricSpace>(
    data: &[S::Point],
    k: usize,
    seed: u64,
    space: &S,
) -> Result<Vec<S::Point>, ClusteringError> {
    if k > data.len() {
        return Err(ClusteringError::KExceedsPoints { k, n: data.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates: Vec<usize> = (0..data.len()).collect();
    let idx = seed_indices(data, &candidates, &[], k, &mut rng, space)?;
    Ok(idx.into_iter().map(|i| data[i].clone()).collect())
}

/// Picks `count` new seeds among `candidates`, given centroids already fixed.
pub(crate) fn seed_indices<S: MetricSpace, R: Rng>(
    data: &[S::Point],
    candidates: &[usize],
    fixed: &[S::Point],
    count: usize,
    rng: &mut R,
    space: &S,
) -> Result<Vec<usize>, ClusteringError> {
    let mut chosen = Vec::with_capacity(count);
    if count == 0 {
        return Ok(chosen);
    }
    if candidates.is_empty() {
        return Err(ClusteringError::TooFewDistinct {
            needed: count,
            found: 0,
        });
    }

    let sq = |c: &S::Point, i: usize| {
        let d = space.distance(c, &data[i]);
        d * d
    };
    let mut nearest: Vec<f64> = if fixed.is_empty() {
        let first = candidates[rng.random_range(0..candidates.len())];
        chosen.push(first);
        candidates
            .par_iter()
            .map(|&i| sq(&data[first], i))
            .collect()
    } else {
        candidates
            .par_iter()
            .map(|&i| fixed.iter().map(|c| sq(c, i)).fold(f64::INFINITY, f64::min))
            .collect()
    };

    while chosen.len() < count {
        let total: f64 = nearest.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            let found = chosen.len() + nearest.iter().filter(|d| **d > 0.0).count();
            return Err(ClusteringError::TooFewDistinct {
                needed: count,
                found,
            });
        }
        let target = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = None;
        for (j, &d) in nearest.iter().enumerate() {
            if d <= 0.0 {
                continue;
            }
            acc += d;
            pick = Some(j);
            if acc > target {
                break;
            }
        }
        let j = pick.expect("positive total implies a positive entry");
        let next = candidates[j];
        chosen.push(next);
        nearest
            .par_iter_mut()
            .zip(candidates.par_iter())
            .for_each(|(d, &i)| *d = d.min(sq(&data[next], i)));
    }
    Ok(chosen)
}
