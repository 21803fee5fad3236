mod common;
mod oracle;

use common::{curvature, gaussian_vec, rel_err};
use hypergcd::geometry::{exp_map_lorentz, Curvature, EuclideanVec, LorentzPoint};
use hypergcd::losses::{
    alpha_schedule, embed, exterior_angle, loss_and_grad, loss_components, loss_self_supervised,
    loss_supervised, loss_total, score_angle, score_distance, toy_train, Batch, LossError,
    LossWeights, PositiveIndexSets, Similarity, ToyTrainConfig,
};
use oracle::values::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ev(v: &[f64]) -> EuclideanVec {
    EuclideanVec::new(v.to_vec()).unwrap()
}

fn expm(v: &[f64], k: Curvature) -> LorentzPoint {
    exp_map_lorentz(&ev(v), k).unwrap()
}

const B8: [[f64; 3]; 8] = [
    [0.40, -0.10, 0.25],
    [-0.35, 0.60, 0.05],
    [1.10, 0.20, -0.70],
    [0.05, -0.90, 0.45],
    [-1.30, -0.40, 0.80],
    [0.70, 0.90, 0.60],
    [-0.20, 0.15, -1.05],
    [0.95, -0.55, -0.30],
];

fn oracle_batch(clip: f64) -> Batch {
    let a = [
        [0.50, -0.20, 0.30],
        [0.45, -0.10, 0.40],
        [-0.80, 0.70, -0.10],
        [2.00, 1.50, 0.50],
    ];
    let b = [
        [0.55, -0.25, 0.20],
        [0.40, 0.00, 0.45],
        [-0.70, 0.80, -0.20],
        [1.80, 1.70, 0.40],
    ];
    Batch::new(
        a.iter().map(|v| ev(v)).collect(),
        b.iter().map(|v| ev(v)).collect(),
        vec![Some(0), Some(0), Some(1), None],
        0.07,
        clip,
        curvature(0.05),
    )
    .unwrap()
}

#[test]
fn scores_match_oracle() {
    let k = curvature(0.05);
    let pts: Vec<LorentzPoint> = B8.iter().map(|v| expm(v, k)).collect();
    let sd = score_distance(0, &pts[3], &pts, 0.07, k).unwrap();
    assert!(rel_err(sd, SCORE_DISTANCE_B8) < 1e-12, "{sd}");
    let sa = score_angle(2, &pts[5], &pts, 0.07, k).unwrap();
    assert!(rel_err(sa, SCORE_ANGLE_B8) < 1e-9, "{sa}");
    let e01 = exterior_angle(&pts[0], &pts[1], k).unwrap();
    let e10 = exterior_angle(&pts[1], &pts[0], k).unwrap();
    assert!(rel_err(e01, EXT_B8_0_1) < 1e-12);
    assert!(rel_err(e10, EXT_B8_1_0) < 1e-12);
}

#[test]
fn components_match_oracle() {
    let batch = oracle_batch(2.3);
    let c = loss_components(&batch).unwrap();
    assert!(rel_err(c.self_supervised_distance, LOSS_UNSUP_DISTANCE) < 1e-10);
    assert!(rel_err(c.supervised_distance, LOSS_SUP_DISTANCE) < 1e-10);
    assert!(rel_err(c.self_supervised_angle, LOSS_UNSUP_ANGLE) < 1e-10);
    assert!(rel_err(c.supervised_angle, LOSS_SUP_ANGLE) < 1e-10);
    let w = LossWeights::new(0.3, 0.35).unwrap();
    assert!(rel_err(loss_total(&batch, w).unwrap(), LOSS_TOTAL_ALPHA_0_3) < 1e-10);
    let noclip = oracle_batch(f64::INFINITY);
    assert!(rel_err(loss_total(&noclip, w).unwrap(), LOSS_TOTAL_NOCLIP_ALPHA_0_3) < 1e-10);
}

#[test]
fn single_entry_functions_agree_with_components() {
    let batch = oracle_batch(2.3);
    let c = loss_components(&batch).unwrap();
    let pos = PositiveIndexSets::from_labels(batch.labels());
    assert_eq!(
        loss_self_supervised(Similarity::Angle, &batch).unwrap(),
        c.self_supervised_angle
    );
    assert_eq!(
        loss_supervised(Similarity::Distance, &batch, &pos).unwrap(),
        c.supervised_distance
    );
}

#[test]
fn score_symmetric_cases() {
    let k = curvature(0.5);
    let p = expm(&[0.3, -0.4], k);
    assert_eq!(
        score_distance(0, &p, &[p.clone(), p.clone()], 0.07, k).unwrap(),
        1.0
    );
    // three points at equal radius, 120 degrees apart
    let tri: Vec<LorentzPoint> = (0..3)
        .map(|j| {
            let a = 2.0 * std::f64::consts::PI * j as f64 / 3.0;
            expm(&[1.2 * a.cos(), 1.2 * a.sin()], k)
        })
        .collect();
    assert!((score_distance(0, &tri[1], &tri, 0.07, k).unwrap() - 0.5).abs() < 1e-12);
    assert!((score_angle(0, &tri[2], &tri, 0.07, k).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(
        score_angle(1, &tri[0], &tri[..2], 0.07, k).unwrap(),
        1.0
    );
    assert!(score_distance(0, &p, std::slice::from_ref(&p), 0.07, k).is_err());
}

#[test]
fn exterior_angle_along_a_ray() {
    let k = curvature(0.05);
    let x = expm(&[1.0, 0.5, 0.0], k);
    let beyond = expm(&[2.0, 1.0, 0.0], k);
    let inside = expm(&[0.4, 0.2, 0.0], k);
    assert!(exterior_angle(&x, &beyond, k).unwrap() < 1e-6);
    assert!((exterior_angle(&x, &inside, k).unwrap() - std::f64::consts::PI).abs() < 1e-6);

    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut asymmetric = 0;
    for _ in 0..100 {
        let a = expm(&gaussian_vec(&mut rng, 4, 1.0), k);
        let b = expm(&gaussian_vec(&mut rng, 4, 1.0), k);
        let (ab, ba) = (
            exterior_angle(&a, &b, k).unwrap(),
            exterior_angle(&b, &a, k).unwrap(),
        );
        assert!((0.0..=std::f64::consts::PI).contains(&ab));
        asymmetric += ((ab - ba).abs() > 1e-6) as usize;
    }
    assert!(asymmetric > 95);

    let o = LorentzPoint::origin(3, k);
    assert!(matches!(
        exterior_angle(&o, &x, k),
        Err(LossError::DegeneratePair(_))
    ));
    assert!(exterior_angle(&x, &x, k).is_err());
}

#[test]
fn embedding_and_clipping() {
    let k = curvature(0.05);
    let mk = |a: Vec<[f64; 2]>, r: f64| {
        Batch::new(
            a.iter().map(|v| ev(v)).collect(),
            a.iter().map(|v| ev(v)).collect(),
            vec![None; a.len()],
            0.07,
            r,
            k,
        )
        .unwrap()
    };
    let (a, _) = embed(&mk(vec![[0.0, 0.0], [3.0, 4.0]], 2.3)).unwrap();
    assert_eq!(a[0], LorentzPoint::origin(2, k));
    let scaled = expm(&[3.0 * 2.3 / 5.0, 4.0 * 2.3 / 5.0], k);
    assert!((a[1].time() - scaled.time()).abs() < 1e-14);
    let (open, _) = embed(&mk(vec![[0.0, 0.0], [3.0, 4.0]], f64::INFINITY)).unwrap();
    assert_eq!(open[1], expm(&[3.0, 4.0], k));
}

#[test]
fn near_zero_losses_for_ideal_batches() {
    let k = curvature(1.0);
    let far = |i: usize| {
        let a = i as f64 * 1.3;
        [6.0 * a.cos(), 6.0 * a.sin()]
    };
    let a: Vec<EuclideanVec> = (0..4).map(|i| ev(&far(i))).collect();
    let batch = Batch::new(a.clone(), a, vec![None; 4], 0.07, f64::INFINITY, k).unwrap();
    assert!(loss_self_supervised(Similarity::Distance, &batch).unwrap() < 1e-12);

    // a labeled identical pair, other samples far away
    let mut pts: Vec<[f64; 2]> = (0..4).map(far).collect();
    pts[1] = pts[0];
    let a: Vec<EuclideanVec> = pts.iter().map(|v| ev(v)).collect();
    let labels = vec![Some(0), Some(0), Some(1), Some(2)];
    let batch = Batch::new(a.clone(), a, labels.clone(), 0.07, f64::INFINITY, k).unwrap();
    let pos = PositiveIndexSets::from_labels(&labels);
    // the other view of the anchor ties with the positive, so the floor is log 2
    let sup = loss_supervised(Similarity::Distance, &batch, &pos).unwrap();
    assert!((sup - 2f64.ln()).abs() < 1e-12, "{sup}");

    // one sample per class: no supervised anchors
    let singles = Batch::new(
        (0..4).map(|i| ev(&far(i))).collect(),
        (0..4).map(|i| ev(&far(i + 7))).collect(),
        vec![Some(0), Some(1), Some(2), Some(3)],
        0.07,
        2.3,
        k,
    )
    .unwrap();
    let c = loss_components(&singles).unwrap();
    assert_eq!(c.supervised_distance, 0.0);
    assert_eq!(c.supervised_angle, 0.0);
}

#[test]
fn positive_sets_validate() {
    assert!(PositiveIndexSets::new(vec![vec![0], vec![]]).is_err());
    assert!(PositiveIndexSets::new(vec![vec![2], vec![]]).is_err());
    let p = PositiveIndexSets::from_labels(&[Some(1), None, Some(1), Some(0)]);
    assert_eq!(p.get(0), &[2]);
    assert!(p.get(1).is_empty());
    assert!(p.get(3).is_empty());
}

#[test]
fn weights_select_terms() {
    let batch = oracle_batch(2.3);
    let c = loss_components(&batch).unwrap();
    let t = |a: f64, l: f64| loss_total(&batch, LossWeights::new(a, l).unwrap()).unwrap();
    assert_eq!(t(1.0, 1.0), c.self_supervised_angle);
    assert_eq!(t(0.0, 1.0), c.self_supervised_distance);
    assert_eq!(t(0.0, 0.0), c.supervised_distance);
    assert_eq!(t(1.0, 0.0), c.supervised_angle);
    assert!(LossWeights::new(1.2, 0.5).is_err());
    assert!(LossWeights::new(0.5, -0.1).is_err());
}

#[test]
fn alpha_decays_linearly() {
    assert_eq!(alpha_schedule(0, 10), 1.0);
    assert_eq!(alpha_schedule(10, 10), 0.0);
    assert_eq!(alpha_schedule(5, 10), 0.5);
    assert_eq!(alpha_schedule(20, 10), 0.0);
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize, k: Curvature, clip: f64) -> Batch {
    let mut views = || -> Vec<EuclideanVec> {
        (0..n)
            .map(|_| {
                let scale = rng.random_range(0.1..1.2);
                ev(&gaussian_vec(rng, dim, scale))
            })
            .collect()
    };
    let a = views();
    let b = views();
    let labels = (0..n)
        .map(|_| rng.random_bool(0.6).then(|| rng.random_range(0..3)))
        .collect();
    Batch::new(a, b, labels, 0.07, clip, k).unwrap()
}

#[test]
fn components_are_nonnegative() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let n = rng.random_range(2..12);
        let batch = random_batch(&mut rng, n, 5, curvature(0.05), 2.3);
        let c = loss_components(&batch).unwrap();
        for v in [
            c.self_supervised_distance,
            c.supervised_distance,
            c.self_supervised_angle,
            c.supervised_angle,
        ] {
            assert!(v >= 0.0 && v.is_finite());
        }
    }
}

/// Central differences on a random subset of coordinates.
fn check_gradient(rng: &mut ChaCha8Rng, batch: &Batch, w: LossWeights, coords: usize) -> f64 {
    let g = loss_and_grad(batch, w).unwrap();
    let scale = g
        .grad_a
        .iter()
        .chain(&g.grad_b)
        .flatten()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..coords {
        let view = rng.random_range(0..2);
        let i = rng.random_range(0..batch.len());
        let d = rng.random_range(0..batch.view_a()[0].dim());
        let shifted = |delta: f64| {
            let bump = |vs: &[EuclideanVec], on: bool| -> Vec<EuclideanVec> {
                vs.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let mut c = v.as_slice().to_vec();
                        if on && j == i {
                            c[d] += delta;
                        }
                        ev(&c)
                    })
                    .collect()
            };
            let b = Batch::new(
                bump(batch.view_a(), view == 0),
                bump(batch.view_b(), view == 1),
                batch.labels().to_vec(),
                batch.temperature(),
                batch.clip_radius(),
                batch.curvature(),
            )
            .unwrap();
            loss_total(&b, w).unwrap()
        };
        let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
        let an = if view == 0 { g.grad_a[i][d] } else { g.grad_b[i][d] };
        worst = worst.max((fd - an).abs() / scale.max(fd.abs()).max(1e-12));
    }
    worst
}

fn away_from_clip(batch: &Batch) -> bool {
    let r = batch.clip_radius();
    batch
        .view_a()
        .iter()
        .chain(batch.view_b())
        .all(|v| (v.norm() - r).abs() > 1e-3)
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut checked = 0;
    while checked < 25 {
        let n = rng.random_range(8..20);
        let dim = rng.random_range(8..24);
        let k = curvature([0.05, 0.5, 1.0][rng.random_range(0..3)]);
        let clip = [2.3, 1.0, f64::INFINITY][rng.random_range(0..3)];
        let batch = random_batch(&mut rng, n, dim, k, clip);
        if !away_from_clip(&batch) {
            continue;
        }
        let w = LossWeights::new(rng.random(), rng.random()).unwrap();
        let err = check_gradient(&mut rng, &batch, w, 12);
        assert!(err < 1e-4, "relative error {err:e}");
        checked += 1;
    }
}

#[test]
fn toy_training_reduces_loss() {
    let k = curvature(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let init: Vec<EuclideanVec> = (0..20)
        .map(|i| {
            let mut v = gaussian_vec(&mut rng, 6, 0.5);
            v[0] += if i < 10 { 1.0 } else { -1.0 };
            ev(&v)
        })
        .collect();
    let labels: Vec<Option<usize>> = (0..20).map(|i| (i % 2 == 0).then_some(i / 10)).collect();
    let mut cfg = ToyTrainConfig::new(k);
    cfg.epochs = 200;
    cfg.lr = 0.5;
    let out = toy_train(&init, &labels, &cfg).unwrap();
    assert_eq!(out.trace.len(), 200);
    let first = out.trace.first().unwrap();
    let last = out.trace.last().unwrap();
    assert_eq!(first.alpha, 1.0);
    // compare at matching weights so the alpha schedule does not hide progress
    let w = LossWeights::new(last.alpha, cfg.lambda).unwrap();
    assert!(last.total < first.components.total(w), "{} vs {}", last.total, first.total);

    cfg.lr = 0.0;
    cfg.epochs = 10;
    let frozen = toy_train(&init, &labels, &cfg).unwrap();
    assert!(frozen
        .trace
        .windows(2)
        .all(|w| w[0].components == w[1].components));
    assert_eq!(frozen.embeddings, init);
}

#[test]
fn toy_training_reports_divergence() {
    let k = curvature(1.0);
    let init: Vec<EuclideanVec> = (0..6).map(|i| ev(&[i as f64 * 0.3, 1.0])).collect();
    let mut cfg = ToyTrainConfig::new(k);
    cfg.clip_radius = f64::INFINITY;
    cfg.lr = 1e9;
    cfg.epochs = 50;
    match toy_train(&init, &[None; 6], &cfg) {
        Err(LossError::Diverged { step, .. }) => assert!(step < 50),
        other => panic!("expected divergence, got {other:?}"),
    }
}
