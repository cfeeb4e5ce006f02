//! Random objective instances and a central-difference gradient check.

use super::rng;
use convexalign::embedding::{AffineTransform, EmbeddingSet, Triplet, TripletSet};
use convexalign::transform::{objective, objective_gradient};
use rand::Rng;

/// A random instance: `n` items in `d` dimensions, `m` random triplets, random (W, b).
pub fn instance(seed: u64, d: usize, n: usize, m: usize) -> (EmbeddingSet, TripletSet, AffineTransform) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f32>> = (0..n)
        .map(|_| (0..d).map(|_| r.random_range(-1.0f32..1.0)).collect())
        .collect();
    let set = EmbeddingSet::from_rows(&rows).unwrap();
    let triplets = (0..m)
        .map(|_| {
            let idx = rand::seq::index::sample(&mut r, n, 3).into_vec();
            Triplet::new(idx[0].to_string(), idx[1].to_string(), idx[2].to_string(), r.random_range(0..3u8))
                .unwrap()
        })
        .collect();
    let w = (0..d * d)
        .map(|i| if i % (d + 1) == 0 { 1.0 } else { 0.0 } + r.random_range(-0.3..0.3))
        .collect();
    let b = (0..d).map(|_| r.random_range(-0.3..0.3)).collect();
    (set, TripletSet::new(triplets).unwrap(), AffineTransform::new(d, w, b).unwrap())
}

/// Worst elementwise |analytic - central difference| / (|analytic| + 1e-8).
pub fn max_relative_error(set: &EmbeddingSet, triplets: &TripletSet, t: &AffineTransform, lambda: f64) -> f64 {
    let g = objective_gradient(t, set, triplets, lambda).unwrap();
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    let mut check = |analytic: f64, bump: &dyn Fn(&mut AffineTransform, f64)| {
        let mut plus = t.clone();
        bump(&mut plus, h);
        let mut minus = t.clone();
        bump(&mut minus, -h);
        let fd = (objective(&plus, set, triplets, lambda).unwrap() - objective(&minus, set, triplets, lambda).unwrap())
            / (2.0 * h);
        // Entries whose true derivative is ~0 are compared absolutely at the same threshold.
        let err = (analytic - fd).abs() / (analytic.abs() + 1e-8);
        let err = if analytic.abs() < 1e-6 && fd.abs() < 1e-6 { (analytic - fd).abs() } else { err };
        worst = worst.max(err);
    };
    for i in 0..g.dw.len() {
        check(g.dw[i], &|t: &mut AffineTransform, e| t.w[i] += e);
    }
    for i in 0..g.db.len() {
        check(g.db[i], &|t: &mut AffineTransform, e| t.b[i] += e);
    }
    worst
}
