//! Hyperbolic contrastive losses on the Lorentz hyperboloid.
//!
//! Pre-embedding vectors are clipped to a maximum Euclidean norm, exp-mapped
//! onto the hyperboloid and compared with two similarities:
//!
//! * distance: `-d(x, y) / tau`
//! * exterior angle: `ext(x, y) / tau`, the angle at `x` between the geodesic
//!   from the origin through `x` and the geodesic from `x` to `y`, measured
//!   outside the triangle
//!
//! Each similarity gives a self-supervised loss (the other view of the same
//! sample is the positive) and a supervised loss (same-class samples of the
//! same view are positives). For an anchor `i` of one view the softmax runs
//! over every other sample of that view plus the other view of `i`; both views
//! take turns as anchors.
//!
//! [`loss_and_grad`] returns exact gradients with respect to the pre-clip
//! vectors, which [`toy_train`] uses to optimise free embeddings.

mod engine;
mod train;

pub use train::{toy_train, ToyTrainConfig, ToyTrainOutput, TraceRow};

use thiserror::Error;

use crate::geometry::{
    self, lorentz::exp_map_slice, Curvature, EuclideanVec, GeometryError, LorentzPoint,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("invalid batch: {0}")]
    InvalidBatch(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error("invalid positive sets: {0}")]
    InvalidPositives(String),
    #[error("exterior angle undefined: {0}")]
    DegeneratePair(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged at step {step}: loss = {loss}")]
    Diverged { step: usize, loss: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

pub type Result<T> = std::result::Result<T, LossError>;

/// Which similarity a score or loss is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Similarity {
    Distance,
    Angle,
}

/// Two augmented views of the same samples, before clipping.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    view_a: Vec<EuclideanVec>,
    view_b: Vec<EuclideanVec>,
    labels: Vec<Option<usize>>,
    temperature: f64,
    clip_radius: f64,
    curvature: Curvature,
}

impl Batch {
    /// `clip_radius = f64::INFINITY` turns clipping off.
    pub fn new(
        view_a: Vec<EuclideanVec>,
        view_b: Vec<EuclideanVec>,
        labels: Vec<Option<usize>>,
        temperature: f64,
        clip_radius: f64,
        curvature: Curvature,
    ) -> Result<Self> {
        let n = view_a.len();
        if view_b.len() != n || labels.len() != n {
            return Err(LossError::InvalidBatch(format!(
                "view sizes {n} and {}, {} labels",
                view_b.len(),
                labels.len()
            )));
        }
        if n < 2 {
            return Err(LossError::InvalidBatch("need at least 2 samples".into()));
        }
        let dim = view_a[0].dim();
        if let Some(bad) = view_a.iter().chain(&view_b).find(|v| v.dim() != dim) {
            return Err(LossError::InvalidBatch(format!(
                "mixed dimensions {dim} and {}",
                bad.dim()
            )));
        }
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(LossError::InvalidBatch(format!(
                "temperature must be positive, got {temperature}"
            )));
        }
        if !(clip_radius > 0.0) {
            return Err(LossError::InvalidBatch(format!(
                "clip radius must be positive, got {clip_radius}"
            )));
        }
        Ok(Self {
            view_a,
            view_b,
            labels,
            temperature,
            clip_radius,
            curvature,
        })
    }

    pub fn len(&self) -> usize {
        self.view_a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.view_a.is_empty()
    }

    pub fn view_a(&self) -> &[EuclideanVec] {
        &self.view_a
    }

    pub fn view_b(&self) -> &[EuclideanVec] {
        &self.view_b
    }

    pub fn labels(&self) -> &[Option<usize>] {
        &self.labels
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn clip_radius(&self) -> f64 {
        self.clip_radius
    }

    pub fn curvature(&self) -> Curvature {
        self.curvature
    }
}

/// Mixing weights of the four losses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Share of the angle losses; `1 - alpha` goes to the distance losses.
    pub alpha: f64,
    /// Share of the self-supervised losses; `1 - lambda` goes to the supervised ones.
    pub lambda: f64,
}

impl LossWeights {
    pub fn new(alpha: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("lambda", lambda)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(LossError::InvalidWeights(format!(
                    "{name} = {v} is outside [0, 1]"
                )));
            }
        }
        Ok(Self { alpha, lambda })
    }
}

/// For every anchor, the indices of other samples with the same class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PositiveIndexSets(Vec<Vec<usize>>);

impl PositiveIndexSets {
    pub fn new(sets: Vec<Vec<usize>>) -> Result<Self> {
        let n = sets.len();
        for (i, s) in sets.iter().enumerate() {
            if s.contains(&i) {
                return Err(LossError::InvalidPositives(format!(
                    "anchor {i} lists itself"
                )));
            }
            if let Some(bad) = s.iter().find(|&&q| q >= n) {
                return Err(LossError::InvalidPositives(format!(
                    "anchor {i} lists index {bad} outside 0..{n}"
                )));
            }
        }
        Ok(Self(sets))
    }

    /// Same-label positives; unlabeled anchors get an empty set.
    pub fn from_labels(labels: &[Option<usize>]) -> Self {
        Self(
            labels
                .iter()
                .enumerate()
                .map(|(i, l)| match l {
                    None => Vec::new(),
                    Some(c) => (0..labels.len())
                        .filter(|&q| q != i && labels[q] == Some(*c))
                        .collect(),
                })
                .collect(),
        )
    }

    pub fn get(&self, i: usize) -> &[usize] {
        &self.0[i]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The four component losses.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossComponents {
    pub self_supervised_distance: f64,
    pub supervised_distance: f64,
    pub self_supervised_angle: f64,
    pub supervised_angle: f64,
}

impl LossComponents {
    pub fn total(&self, w: LossWeights) -> f64 {
        let sup = (1.0 - w.alpha) * self.supervised_distance + w.alpha * self.supervised_angle;
        let unsup =
            (1.0 - w.alpha) * self.self_supervised_distance + w.alpha * self.self_supervised_angle;
        (1.0 - w.lambda) * sup + w.lambda * unsup
    }

    pub fn is_finite(&self) -> bool {
        [
            self.self_supervised_distance,
            self.supervised_distance,
            self.self_supervised_angle,
            self.supervised_angle,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Both views clipped and exp-mapped onto the hyperboloid.
pub fn embed(batch: &Batch) -> Result<(Vec<LorentzPoint>, Vec<LorentzPoint>)> {
    let map = |vs: &[EuclideanVec]| -> Result<Vec<LorentzPoint>> {
        vs.iter()
            .map(|v| embed_one(v.as_slice(), batch.clip_radius, batch.curvature))
            .collect()
    };
    Ok((map(&batch.view_a)?, map(&batch.view_b)?))
}

pub(crate) fn embed_one(v: &[f64], clip_radius: f64, k: Curvature) -> Result<LorentzPoint> {
    Ok(exp_map_slice(
        &geometry::lorentz::clip_slice(v, clip_radius),
        k,
    )?)
}

/// Exterior angle at `x` of the triangle (origin, `x`, `y`), in `[0, pi]`.
///
/// Zero when `y` lies farther out on the ray from the origin through `x`, and
/// `pi` when `y` lies between the origin and `x`. Not symmetric.
pub fn exterior_angle(x: &LorentzPoint, y: &LorentzPoint, k: Curvature) -> Result<f64> {
    geometry::check_dims(x.dim(), y.dim())?;
    let pair = engine::Pair::new(x.time(), x.space(), y.time(), y.space(), k);
    pair.exterior_angle()
        .map(|(angle, _)| angle)
        .ok_or_else(|| LossError::DegeneratePair(engine::degenerate_reason(x.space(), &pair)))
}

/// Softmax probability of `y` for anchor `points[i]`, over all `points[n]` with `n != i`.
pub fn score_distance(i: usize, y: &LorentzPoint, points: &[LorentzPoint], tau: f64, k: Curvature) -> Result<f64> {
    score(Similarity::Distance, i, y, points, tau, k)
}

/// Softmax probability of `y` for anchor `points[i]` under the exterior-angle similarity.
pub fn score_angle(i: usize, y: &LorentzPoint, points: &[LorentzPoint], tau: f64, k: Curvature) -> Result<f64> {
    score(Similarity::Angle, i, y, points, tau, k)
}

fn score(
    sim: Similarity,
    i: usize,
    y: &LorentzPoint,
    points: &[LorentzPoint],
    tau: f64,
    k: Curvature,
) -> Result<f64> {
    if points.len() < 2 {
        return Err(LossError::InvalidBatch("need at least 2 points".into()));
    }
    if i >= points.len() {
        return Err(LossError::InvalidBatch(format!("anchor {i} out of range")));
    }
    if !(tau > 0.0) {
        return Err(LossError::InvalidBatch(format!("temperature {tau}")));
    }
    let x = &points[i];
    let s = |c: &LorentzPoint| -> Result<f64> {
        geometry::check_dims(x.dim(), c.dim())?;
        Ok(match sim {
            Similarity::Distance => {
                -geometry::lorentz::distance_unchecked(x, c, k) / tau
            }
            Similarity::Angle => exterior_angle(x, c, k)? / tau,
        })
    };
    let others = points
        .iter()
        .enumerate()
        .filter(|(n, _)| *n != i)
        .map(|(_, c)| s(c))
        .collect::<Result<Vec<f64>>>()?;
    Ok((s(y)? - engine::log_sum_exp(&others)).exp())
}

/// Mean over both views of `-log score(anchor, other view of anchor)`.
pub fn loss_self_supervised(sim: Similarity, batch: &Batch) -> Result<f64> {
    let positives = PositiveIndexSets::from_labels(batch.labels());
    let parts = engine::evaluate(batch, &positives, None, &[sim])?;
    Ok(match sim {
        Similarity::Distance => parts.components.self_supervised_distance,
        Similarity::Angle => parts.components.self_supervised_angle,
    })
}

/// Mean over anchors with positives of the positive-averaged `-log score`.
///
/// Anchors with an empty positive set are skipped; with none left the loss is 0.
pub fn loss_supervised(sim: Similarity, batch: &Batch, positives: &PositiveIndexSets) -> Result<f64> {
    let parts = engine::evaluate(batch, positives, None, &[sim])?;
    Ok(match sim {
        Similarity::Distance => parts.components.supervised_distance,
        Similarity::Angle => parts.components.supervised_angle,
    })
}

/// All four components with positives taken from the batch labels.
pub fn loss_components(batch: &Batch) -> Result<LossComponents> {
    let positives = PositiveIndexSets::from_labels(batch.labels());
    Ok(engine::evaluate(batch, &positives, None, &BOTH)?.components)
}

const BOTH: [Similarity; 2] = [Similarity::Distance, Similarity::Angle];

/// `(1-lambda)[(1-alpha) Ls_D + alpha Ls_A] + lambda[(1-alpha) Lu_D + alpha Lu_A]`.
///
/// A similarity whose weight is exactly zero is not evaluated.
pub fn loss_total(batch: &Batch, weights: LossWeights) -> Result<f64> {
    let kinds: Vec<Similarity> = BOTH
        .into_iter()
        .filter(|s| match s {
            Similarity::Distance => weights.alpha < 1.0,
            Similarity::Angle => weights.alpha > 0.0,
        })
        .collect();
    let positives = PositiveIndexSets::from_labels(batch.labels());
    Ok(engine::evaluate(batch, &positives, None, &kinds)?
        .components
        .total(weights))
}

/// Loss value and gradients with respect to the pre-clip vectors of both views.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub components: LossComponents,
    pub total: f64,
    pub grad_a: Vec<Vec<f64>>,
    pub grad_b: Vec<Vec<f64>>,
}

/// [`loss_total`] plus its exact gradient.
///
/// On the clip sphere itself the unclipped branch is differentiated.
pub fn loss_and_grad(batch: &Batch, weights: LossWeights) -> Result<LossGradient> {
    let positives = PositiveIndexSets::from_labels(batch.labels());
    let out = engine::evaluate(batch, &positives, Some(weights), &BOTH)?;
    let [grad_a, grad_b] = out.grads.expect("gradients requested");
    Ok(LossGradient {
        total: out.components.total(weights),
        components: out.components,
        grad_a,
        grad_b,
    })
}

/// Linear decay from 1 at step 0 to 0 at `total_steps`, clamped to `[0, 1]`.
pub fn alpha_schedule(step: usize, total_steps: usize) -> f64 {
    if total_steps == 0 {
        return 0.0;
    }
    (1.0 - step as f64 / total_steps as f64).clamp(0.0, 1.0)
}
