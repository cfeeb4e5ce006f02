mod common;

use common::{pearson_naive, rng};
use convexalign::alignment::{oooa, ooo_predict, CHANCE_FLOOR};
use convexalign::embedding::{EmbeddingSet, Triplet, TripletSet};
use convexalign::stats::pearson_r;
use convexalign::synth::{gen_embeddings, gen_triplets, SynthSpec};
use proptest::prelude::*;
use rand::Rng;

fn mixture() -> EmbeddingSet {
    gen_embeddings(&SynthSpec { n_classes: 5, items_per_class: 40, dim: 8, ..Default::default() })
        .unwrap()
        .0
}

#[test]
fn own_triplets_score_one() {
    let set = mixture();
    let t = gen_triplets(&set, 2000, 3, 0.0).unwrap();
    let r = oooa(&set, &t, false).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.tie_count, 0);
}

#[test]
fn half_noise_gives_half_accuracy() {
    let set = mixture();
    let t = gen_triplets(&set, 20_000, 4, 0.5).unwrap();
    let acc = oooa(&set, &t, false).unwrap().accuracy;
    assert!((acc - 0.5).abs() < 0.02, "{acc}");
}

#[test]
fn random_odd_labels_sit_at_chance() {
    let set = mixture();
    let mut r = rng(5);
    let triplets = gen_triplets(&set, 10_000, 6, 0.0)
        .unwrap()
        .triplets
        .into_iter()
        .map(|t| {
            let [i, j, k] = t.items;
            Triplet::new(i, j, k, r.random_range(0..3u8)).unwrap()
        })
        .collect();
    let acc = oooa(&set, &TripletSet::new(triplets).unwrap(), true).unwrap().accuracy;
    assert!((acc - CHANCE_FLOOR).abs() < 0.02, "{acc}");
}

fn vec3() -> impl Strategy<Value = Vec<f32>> {
    proptest::collection::vec(-10.0f32..10.0, 4)
        .prop_filter("non-zero", |v| v.iter().map(|x| x * x).sum::<f32>() > 1e-2)
}

proptest! {
    #[test]
    fn prediction_ignores_positive_scaling(a in vec3(), b in vec3(), c in vec3(), s in 0.5f32..4.0) {
        let scale = |v: &[f32]| v.iter().map(|x| x * s).collect::<Vec<_>>();
        let cos = |x: &[f32], y: &[f32]| {
            let d: f64 = x.iter().zip(y).map(|(p, q)| *p as f64 * *q as f64).sum();
            let n = |z: &[f32]| z.iter().map(|p| (*p as f64).powi(2)).sum::<f64>().sqrt();
            d / (n(x) * n(y))
        };
        // Skip near-ties where the rescaled rounding could flip the winner.
        let mut s3 = [cos(&a, &b), cos(&a, &c), cos(&b, &c)];
        s3.sort_by(f64::total_cmp);
        prop_assume!(s3[2] - s3[1] > 1e-4);
        prop_assert_eq!(
            ooo_predict(&a, &b, &c).unwrap(),
            ooo_predict(&scale(&a), &scale(&b), &scale(&c)).unwrap()
        );
    }

    #[test]
    fn pearson_is_affine_invariant_and_symmetric(
        x in proptest::collection::vec(-50.0f64..50.0, 3..40),
        noise in proptest::collection::vec(-5.0f64..5.0, 40),
        a in 0.1f64..10.0, b in -20.0f64..20.0, c in 0.1f64..10.0, d in -20.0f64..20.0,
    ) {
        let y: Vec<f64> = x.iter().zip(&noise).map(|(v, e)| 0.5 * v + e).collect();
        let r = match pearson_r(&x, &y) { Ok(r) => r, Err(_) => return Ok(()) };
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let yt: Vec<f64> = y.iter().map(|v| c * v + d).collect();
        prop_assert!((pearson_r(&xt, &yt).unwrap() - r).abs() < 1e-12);
        prop_assert!((pearson_r(&y, &x).unwrap() - r).abs() < 1e-12);
        prop_assert!((pearson_naive(&x, &y) - r).abs() < 1e-10);
    }
}
