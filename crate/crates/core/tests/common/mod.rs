#![allow(dead_code)]

use hypergcd::geometry::{exp_map_lorentz, Curvature, EuclideanVec, LorentzPoint};
use rand::Rng;
use rand_distr::StandardNormal;

pub fn curvature(k: f64) -> Curvature {
    Curvature::new(k).unwrap()
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Exp-maps a Gaussian tangent vector whose geodesic radius is at most `max_radius`.
pub fn random_point<R: Rng>(rng: &mut R, dim: usize, max_radius: f64, k: Curvature) -> LorentzPoint {
    let dir = gaussian_vec(rng, dim, 1.0);
    let n = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let r = rng.random_range(0.0..max_radius);
    let v: Vec<f64> = dir.iter().map(|x| x * r / n).collect();
    exp_map_lorentz(&EuclideanVec::new(v).unwrap(), k).unwrap()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

pub fn max_rel_vec(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(1e-300);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}
