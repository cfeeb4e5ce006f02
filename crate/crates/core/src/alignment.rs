//! Triplet odd-one-out predictions and their agreement with human judgments.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embedding::{EmbeddingSet, IndexedTriplet, TripletSet};
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

/// Accuracy of a uniformly random guess.
pub const CHANCE_FLOOR: f64 = 1.0 / 3.0;
/// Agreement between human annotators on the THINGS triplets; an upper bound on accuracy.
pub const HUMAN_CEILING: f64 = 0.6722;

/// Pairs of a triplet in the order `(0,1), (0,2), (1,2)`.
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

/// Index into [`PAIRS`] of the pair that excludes `odd`.
pub fn pair_index(odd: u8) -> usize {
    2 - odd as usize
}

/// Odd-one-out position given the index of the most similar pair.
pub fn odd_of_pair(pair: usize) -> u8 {
    (2 - pair) as u8
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// Cosine similarity; what the accuracy metric uses.
    #[default]
    Cosine,
    /// Raw inner product; what the transform objective uses.
    Dot,
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum()
}

fn norm(a: &[f32]) -> f64 {
    dot(a, a).sqrt()
}

/// `[S01, S02, S12]` for three vectors.
pub fn pair_similarities(xs: [&[f32]; 3], kind: Similarity) -> Result<[f64; 3]> {
    let mut s = [0.0; 3];
    match kind {
        Similarity::Dot => {
            for (out, &(a, b)) in s.iter_mut().zip(&PAIRS) {
                *out = dot(xs[a], xs[b]);
            }
        }
        Similarity::Cosine => {
            let norms = xs.map(norm);
            if let Some(z) = norms.iter().position(|&n| n == 0.0) {
                return Err(Error::UndefinedSimilarity(format!(
                    "vector {z} of the triplet has zero norm"
                )));
            }
            for (out, &(a, b)) in s.iter_mut().zip(&PAIRS) {
                *out = dot(xs[a], xs[b]) / (norms[a] * norms[b]);
            }
        }
    }
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub odd: u8,
    /// The maximal similarity was shared by more than one pair.
    pub tied: bool,
}

/// Argmax pair over `[S01, S02, S12]`; ties go to the first pair in that order.
pub fn predict_from_similarities(s: &[f64; 3]) -> Prediction {
    let mut best = 0;
    for p in 1..3 {
        if s[p] > s[best] {
            best = p;
        }
    }
    let tied = (0..3).filter(|&p| s[p] == s[best]).count() > 1;
    Prediction {
        odd: odd_of_pair(best),
        tied,
    }
}

/// The model's odd one out: the item left over by the most cosine-similar pair.
pub fn ooo_predict(x1: &[f32], x2: &[f32], x3: &[f32]) -> Result<u8> {
    Ok(predict_with([x1, x2, x3], Similarity::Cosine)?.odd)
}

pub fn predict_with(xs: [&[f32]; 3], kind: Similarity) -> Result<Prediction> {
    Ok(predict_from_similarities(&pair_similarities(xs, kind)?))
}

/// Subtracts this set's own column means from every row.
pub fn center(set: &EmbeddingSet) -> EmbeddingSet {
    let d = set.dim();
    let mut sums = vec![NeumaierSum::new(); d];
    for row in set.rows() {
        for (acc, &v) in sums.iter_mut().zip(row) {
            acc.add(v as f64);
        }
    }
    let n = set.len() as f64;
    let means: Vec<f64> = sums.iter().map(|s| s.total() / n).collect();
    let data = set
        .rows()
        .flat_map(|row| row.iter().zip(&means).map(|(&v, m)| (v as f64 - m) as f32))
        .collect();
    let mut out = set.with_data(data).expect("centering finite data stays finite");
    out.meta.insert("centered".into(), "true".into());
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OooaReport {
    pub accuracy: f64,
    #[serde(rename = "n")]
    pub n_triplets: usize,
    #[serde(rename = "ties")]
    pub tie_count: usize,
    #[serde(rename = "floor")]
    pub chance_floor: f64,
    #[serde(rename = "ceiling")]
    pub human_ceiling: f64,
    pub centered: bool,
}

/// Counts (correct, tied) over resolved triplets.
pub fn agreement(set: &EmbeddingSet, triplets: &[IndexedTriplet], kind: Similarity) -> Result<(usize, usize)> {
    let predictions = triplets
        .par_iter()
        .map(|t| predict_with(t.rows.map(|r| set.row(r)), kind).map(|p| (p.odd == t.odd, p.tied)))
        .collect::<Result<Vec<_>>>()?;
    Ok(predictions
        .iter()
        .fold((0, 0), |(c, t), &(ok, tied)| (c + usize::from(ok), t + usize::from(tied))))
}

/// Fraction of triplets whose predicted odd one out matches the human choice,
/// with the given similarity and no centering.
pub fn accuracy_with(set: &EmbeddingSet, triplets: &[IndexedTriplet], kind: Similarity) -> Result<f64> {
    if triplets.is_empty() {
        return Err(Error::Parameter("accuracy over zero triplets".into()));
    }
    let (correct, _) = agreement(set, triplets, kind)?;
    Ok(correct as f64 / triplets.len() as f64)
}

/// Odd-one-out accuracy (cosine similarity), optionally on centered representations.
pub fn oooa(set: &EmbeddingSet, triplets: &TripletSet, center_first: bool) -> Result<OooaReport> {
    if triplets.is_empty() {
        return Err(Error::Parameter("odd-one-out accuracy needs at least one triplet".into()));
    }
    let resolved = triplets.resolve(set)?;
    let centered;
    let eval = if center_first {
        centered = center(set);
        &centered
    } else {
        set
    };
    let (correct, ties) = agreement(eval, &resolved, Similarity::Cosine)?;
    Ok(OooaReport {
        accuracy: correct as f64 / resolved.len() as f64,
        n_triplets: resolved.len(),
        tie_count: ties,
        chance_floor: CHANCE_FLOOR,
        human_ceiling: HUMAN_CEILING,
        centered: center_first,
    })
}

/// Softmax over the three pair similarities evaluated at the pair excluding `odd`.
pub fn triplet_probability(z: &[f64; 3], odd: u8) -> f64 {
    (-triplet_nll(z, odd)).exp()
}

/// `-log p(pair | triplet)` computed with max subtraction.
pub fn triplet_nll(z: &[f64; 3], odd: u8) -> f64 {
    let m = z[0].max(z[1]).max(z[2]);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - z[pair_index(odd)]
}

/// Mean negative log-likelihood of the human choices over a batch of triplets.
pub fn triplet_log_likelihood(z: &[[f64; 3]], odd: &[u8]) -> Result<f64> {
    if z.len() != odd.len() || z.is_empty() {
        return Err(Error::Parameter(format!(
            "{} similarity triples for {} choices",
            z.len(),
            odd.len()
        )));
    }
    if z.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Validation("non-finite similarity".into()));
    }
    let mut acc = NeumaierSum::new();
    for (zs, &o) in z.iter().zip(odd) {
        acc.add(triplet_nll(zs, o));
    }
    Ok(acc.total() / z.len() as f64)
}
