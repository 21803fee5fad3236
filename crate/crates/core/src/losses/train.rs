//! Gradient descent on free embeddings, standing in for a trained backbone.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{alpha_schedule, loss_and_grad, Batch, LossComponents, LossError, LossWeights, Result};
use crate::geometry::{Curvature, EuclideanVec};

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub temperature: f64,
    /// `f64::INFINITY` trains without clipping.
    pub clip_radius: f64,
    pub curvature: Curvature,
    pub lambda: f64,
    /// Standard deviation of the Gaussian jitter that makes the two views.
    pub jitter: f64,
    pub seed: u64,
    /// Samples per step; `None` uses the whole set every step.
    pub batch_size: Option<usize>,
}

impl ToyTrainConfig {
    pub fn new(curvature: Curvature) -> Self {
        Self {
            epochs: 100,
            lr: 1.0,
            temperature: 0.07,
            clip_radius: 2.3,
            curvature,
            lambda: 0.35,
            jitter: 0.05,
            seed: 0,
            batch_size: None,
        }
    }
}

/// Loss state evaluated just before the update of `step`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub alpha: f64,
    pub total: f64,
    pub components: LossComponents,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyTrainOutput {
    /// Trained pre-clip embeddings, one per input sample.
    pub embeddings: Vec<EuclideanVec>,
    pub trace: Vec<TraceRow>,
}

/// Trains one free vector per sample through clip, exp map and the combined loss.
///
/// The two views are `e + noise` and `e + noise'` with the noise drawn once at
/// the start, so with `lr = 0` every component loss stays constant. `alpha`
/// decays linearly from 1 to 0 over the run. Only `Some` labels take part in
/// the supervised terms.
pub fn toy_train(
    init: &[EuclideanVec],
    labels: &[Option<usize>],
    cfg: &ToyTrainConfig,
) -> Result<ToyTrainOutput> {
    let n = init.len();
    if labels.len() != n {
        return Err(LossError::InvalidConfig(format!(
            "{n} samples but {} labels",
            labels.len()
        )));
    }
    if n < 2 {
        return Err(LossError::InvalidConfig("need at least 2 samples".into()));
    }
    if !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
        return Err(LossError::InvalidConfig(format!("learning rate {}", cfg.lr)));
    }
    if !(cfg.jitter >= 0.0 && cfg.jitter.is_finite()) {
        return Err(LossError::InvalidConfig(format!("jitter {}", cfg.jitter)));
    }
    let bs = cfg.batch_size.unwrap_or(n).min(n);
    if bs < 2 {
        return Err(LossError::InvalidConfig("batch size must be at least 2".into()));
    }
    LossWeights::new(1.0, cfg.lambda)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.jitter).expect("jitter validated");
    let mut emb: Vec<Vec<f64>> = init.iter().map(|v| v.as_slice().to_vec()).collect();
    let jitter = |rng: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        emb.iter()
            .map(|e| e.iter().map(|_| noise.sample(rng)).collect())
            .collect()
    };
    let delta_a = jitter(&mut rng);
    let delta_b = jitter(&mut rng);

    let batches_per_epoch = n.div_ceil(bs);
    let total_steps = cfg.epochs * batches_per_epoch;
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(total_steps);
    let mut step = 0;

    for _ in 0..cfg.epochs {
        if bs < n {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(bs) {
            if chunk.len() < 2 {
                continue;
            }
            let alpha = alpha_schedule(step, total_steps);
            let view = |delta: &[Vec<f64>]| -> Result<Vec<EuclideanVec>> {
                chunk
                    .iter()
                    .map(|&i| {
                        let v = emb[i].iter().zip(&delta[i]).map(|(e, d)| e + d).collect();
                        EuclideanVec::new(v).map_err(|_| LossError::Diverged {
                            step,
                            loss: f64::NAN,
                        })
                    })
                    .collect()
            };
            let batch = Batch::new(
                view(&delta_a)?,
                view(&delta_b)?,
                chunk.iter().map(|&i| labels[i]).collect(),
                cfg.temperature,
                cfg.clip_radius,
                cfg.curvature,
            )?;
            let out = match loss_and_grad(&batch, LossWeights { alpha, lambda: cfg.lambda }) {
                Ok(out) => out,
                Err(LossError::Geometry(_)) => {
                    return Err(LossError::Diverged {
                        step,
                        loss: f64::INFINITY,
                    })
                }
                Err(e) => return Err(e),
            };
            if !out.total.is_finite() {
                return Err(LossError::Diverged {
                    step,
                    loss: out.total,
                });
            }
            trace.push(TraceRow {
                step,
                alpha,
                total: out.total,
                components: out.components,
            });
            for (slot, &i) in chunk.iter().enumerate() {
                for ((e, ga), gb) in emb[i]
                    .iter_mut()
                    .zip(&out.grad_a[slot])
                    .zip(&out.grad_b[slot])
                {
                    *e -= cfg.lr * (ga + gb);
                }
            }
            step += 1;
        }
    }

    let embeddings = emb
        .into_iter()
        .map(|e| {
            EuclideanVec::new(e).map_err(|_| LossError::Diverged {
                step,
                loss: f64::NAN,
            })
        })
        .collect::<Result<_>>()?;
    Ok(ToyTrainOutput { embeddings, trace })
}
