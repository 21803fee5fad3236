//! Forward and backward passes shared by every loss entry point.

use super::{Batch, LossComponents, LossError, LossWeights, PositiveIndexSets, Result, Similarity};
use crate::geometry::{
    self, dot,
    lorentz::{clip_slice, NEAR_ARG},
    norm, sinhc, Curvature,
};

/// Quantities of an ordered pair `(x, y)` on the hyperboloid.
pub(crate) struct Pair {
    tx: f64,
    ty: f64,
    sx_norm: f64,
    /// `-kappa <x,y>_L - 1`, from coordinate differences when the points are close.
    excess: f64,
    /// `sqrt(excess * (excess + 2))`, i.e. `sinh(sqrt(kappa) d)`.
    root: f64,
    sqrt_k: f64,
}

impl Pair {
    pub(crate) fn new(tx: f64, sx: &[f64], ty: f64, sy: &[f64], k: Curvature) -> Self {
        let kappa = k.kappa();
        let arg = -kappa * (-tx * ty + dot(sx, sy));
        let excess = if arg < NEAR_ARG {
            let dt = tx - ty;
            let ds: f64 = sx.iter().zip(sy).map(|(a, b)| (a - b) * (a - b)).sum();
            0.5 * kappa * (ds - dt * dt).max(0.0)
        } else {
            arg - 1.0
        };
        Self {
            tx,
            ty,
            sx_norm: norm(sx),
            excess,
            root: (excess * (excess + 2.0)).sqrt(),
            sqrt_k: k.sqrt(),
        }
    }

    pub(crate) fn distance(&self) -> f64 {
        (self.excess + self.root).ln_1p() / self.sqrt_k
    }

    /// `(angle, cosine before clamping)`, or `None` for a degenerate pair.
    pub(crate) fn exterior_angle(&self) -> Option<(f64, f64)> {
        if !(self.root > 0.0) || !(self.sx_norm > 0.0) {
            return None;
        }
        let m = -(1.0 + self.excess);
        let r = (self.ty + self.tx * m) / (self.sx_norm * self.root);
        Some((r.clamp(-1.0, 1.0).acos(), r))
    }

    /// Partials of a scalar with upstream `dl` w.r.t. the pair's ambient coordinates.
    fn backward(&self, sim: Similarity, dl_dsim: f64, tau: f64, kappa: f64) -> Option<PairGrad> {
        match sim {
            Similarity::Distance => {
                // sim = -d / tau, dd/dg = -sqrt(kappa) / root
                let dl_dg = dl_dsim * self.sqrt_k / (tau * self.root);
                Some(PairGrad {
                    x_time: -dl_dg * self.ty,
                    x_by_y_space: dl_dg,
                    x_by_x_space: 0.0,
                    y_time: -dl_dg * self.tx,
                    y_by_x_space: dl_dg,
                })
            }
            Similarity::Angle => {
                let (_, r) = self.exterior_angle()?;
                if r.abs() >= 1.0 {
                    // the clamp is flat here
                    return Some(PairGrad::default());
                }
                let gr = -dl_dsim / (tau * (1.0 - r * r).sqrt());
                let m = -(1.0 + self.excess);
                let q = self.root;
                let d = self.sx_norm * q;
                let dr_dm = self.tx / d - r * m / (q * q);
                let dr_dg = dr_dm * kappa;
                Some(PairGrad {
                    x_time: gr * (m / d - dr_dg * self.ty),
                    x_by_y_space: gr * dr_dg,
                    x_by_x_space: -gr * r / (self.sx_norm * self.sx_norm),
                    y_time: gr * (1.0 / d - dr_dg * self.tx),
                    y_by_x_space: gr * dr_dg,
                })
            }
        }
    }
}

pub(crate) fn degenerate_reason(sx: &[f64], pair: &Pair) -> String {
    if norm(sx) == 0.0 {
        "anchor is the origin".into()
    } else if pair.root <= 0.0 {
        "points coincide".into()
    } else {
        "non-finite coordinates".into()
    }
}

/// Gradient of a pair term: `dL/dx_space = x_by_y_space * y_space + x_by_x_space * x_space`
/// and `dL/dy_space = y_by_x_space * x_space`.
#[derive(Debug, Default, Clone, Copy)]
struct PairGrad {
    x_time: f64,
    x_by_y_space: f64,
    x_by_x_space: f64,
    y_time: f64,
    y_by_x_space: f64,
}

pub(crate) fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// One embedded sample with what the backward pass needs.
struct Embedded {
    z: Vec<f64>,
    c: Vec<f64>,
    space: Vec<f64>,
    time: f64,
    theta: f64,
    clipped: bool,
}

fn prepare(views: &[geometry::EuclideanVec], r: f64, k: Curvature) -> Result<Vec<Embedded>> {
    views
        .iter()
        .map(|v| {
            let z = v.as_slice().to_vec();
            let c = clip_slice(&z, r);
            let p = geometry::lorentz::exp_map_slice(&c, k)?;
            Ok(Embedded {
                clipped: norm(&z) > r * (1.0 + 4.0 * f64::EPSILON),
                theta: k.sqrt() * norm(&c),
                space: p.space().to_vec(),
                time: p.time(),
                z,
                c,
            })
        })
        .collect()
}

/// `(theta cosh theta - sinh theta) / theta^3`, the radial part of the exp-map Jacobian.
fn radial_jacobian(theta: f64) -> f64 {
    if theta < 1e-2 {
        let t2 = theta * theta;
        1.0 / 3.0 + t2 / 30.0 + t2 * t2 / 840.0
    } else {
        (theta * theta.cosh() - theta.sinh()) / (theta * theta * theta)
    }
}

pub(crate) struct Evaluated {
    pub components: LossComponents,
    pub grads: Option<[Vec<Vec<f64>>; 2]>,
}

struct Accum {
    time: f64,
    space: Vec<f64>,
}

pub(crate) fn evaluate(
    batch: &Batch,
    positives: &PositiveIndexSets,
    weights: Option<LossWeights>,
    kinds: &[Similarity],
) -> Result<Evaluated> {
    let n = batch.len();
    if positives.len() != n {
        return Err(LossError::InvalidPositives(format!(
            "{} sets for a batch of {n}",
            positives.len()
        )));
    }
    let k = batch.curvature();
    let tau = batch.temperature();
    let views = [
        prepare(batch.view_a(), batch.clip_radius(), k)?,
        prepare(batch.view_b(), batch.clip_radius(), k)?,
    ];
    let dim = views[0][0].c.len();
    let mut acc: Option<[Vec<Accum>; 2]> = weights.map(|_| {
        std::array::from_fn(|_| {
            (0..n)
                .map(|_| Accum {
                    time: 0.0,
                    space: vec![0.0; dim],
                })
                .collect()
        })
    });

    let sup_anchors = 2 * (0..n).filter(|&i| !positives.get(i).is_empty()).count();
    let mut components = LossComponents::default();

    for &sim in kinds {
        let (unsup_coef, sup_coef) = match weights {
            Some(w) => {
                let share = match sim {
                    Similarity::Distance => 1.0 - w.alpha,
                    Similarity::Angle => w.alpha,
                };
                (
                    w.lambda * share / (2 * n) as f64,
                    (1.0 - w.lambda) * share / sup_anchors.max(1) as f64,
                )
            }
            None => (0.0, 0.0),
        };
        let mut unsup_sum = 0.0;
        let mut sup_sum = 0.0;

        for v in 0..2 {
            for i in 0..n {
                let x = &views[v][i];
                // own view without the anchor, then the other view of the anchor
                let cands: Vec<(usize, usize)> = (0..n)
                    .filter(|&j| j != i)
                    .map(|j| (v, j))
                    .chain(std::iter::once((1 - v, i)))
                    .collect();
                let pairs: Vec<Pair> = cands
                    .iter()
                    .map(|&(cv, j)| {
                        let y = &views[cv][j];
                        Pair::new(x.time, &x.space, y.time, &y.space, k)
                    })
                    .collect();
                let sims = pairs
                    .iter()
                    .zip(&cands)
                    .map(|(p, &(cv, j))| match sim {
                        Similarity::Distance => Ok(-p.distance() / tau),
                        Similarity::Angle => p
                            .exterior_angle()
                            .map(|(a, _)| a / tau)
                            .ok_or_else(|| {
                                LossError::DegeneratePair(format!(
                                    "anchor ({v}, {i}) and candidate ({cv}, {j}): {}",
                                    degenerate_reason(&x.space, p)
                                ))
                            }),
                    })
                    .collect::<Result<Vec<f64>>>()?;
                let lz = log_sum_exp(&sims);
                let pos_slot = cands.len() - 1;
                unsup_sum += lz - sims[pos_slot];

                let pos = positives.get(i);
                let slot = |q: usize| if q < i { q } else { q - 1 };
                if !pos.is_empty() {
                    sup_sum += pos.iter().map(|&q| lz - sims[slot(q)]).sum::<f64>()
                        / pos.len() as f64;
                }

                let Some(acc) = acc.as_mut() else { continue };
                let mut upstream: Vec<f64> = sims
                    .iter()
                    .map(|s| {
                        let p = (s - lz).exp();
                        unsup_coef * p + if pos.is_empty() { 0.0 } else { sup_coef * p }
                    })
                    .collect();
                upstream[pos_slot] -= unsup_coef;
                for &q in pos {
                    upstream[slot(q)] -= sup_coef / pos.len() as f64;
                }
                for ((pair, &(cv, j)), &w) in pairs.iter().zip(&cands).zip(&upstream) {
                    if w == 0.0 {
                        continue;
                    }
                    let g = pair
                        .backward(sim, w, tau, k.kappa())
                        .expect("degenerate pairs were rejected in the forward pass");
                    let y = &views[cv][j];
                    let ax = &mut acc[v][i];
                    ax.time += g.x_time;
                    for ((a, sy), sx) in ax.space.iter_mut().zip(&y.space).zip(&x.space) {
                        *a += g.x_by_y_space * sy + g.x_by_x_space * sx;
                    }
                    let ay = &mut acc[cv][j];
                    ay.time += g.y_time;
                    for (a, sx) in ay.space.iter_mut().zip(&x.space) {
                        *a += g.y_by_x_space * sx;
                    }
                }
            }
        }

        let unsup = unsup_sum / (2 * n) as f64;
        let sup = if sup_anchors == 0 {
            0.0
        } else {
            sup_sum / sup_anchors as f64
        };
        match sim {
            Similarity::Distance => {
                components.self_supervised_distance = unsup;
                components.supervised_distance = sup;
            }
            Similarity::Angle => {
                components.self_supervised_angle = unsup;
                components.supervised_angle = sup;
            }
        }
    }

    let grads = acc.map(|acc| {
        let r = batch.clip_radius();
        let kappa = k.kappa();
        std::array::from_fn(|v| {
            views[v]
                .iter()
                .zip(&acc[v])
                .map(|(e, a)| {
                    // time is a function of space on the hyperboloid
                    let gs: Vec<f64> = a
                        .space
                        .iter()
                        .zip(&e.space)
                        .map(|(g, s)| g + a.time * s / e.time)
                        .collect();
                    let f = sinhc(e.theta);
                    let h = kappa * radial_jacobian(e.theta) * dot(&e.c, &gs);
                    let gc: Vec<f64> = gs.iter().zip(&e.c).map(|(g, c)| f * g + h * c).collect();
                    if e.clipped {
                        let zn = norm(&e.z);
                        let radial = dot(&e.z, &gc) / (zn * zn);
                        gc.iter()
                            .zip(&e.z)
                            .map(|(g, z)| r / zn * (g - radial * z))
                            .collect()
                    } else {
                        gc
                    }
                })
                .collect()
        })
    });

    Ok(Evaluated { components, grads })
}
