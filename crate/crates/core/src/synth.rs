//! Synthetic embeddings, labels and triplet judgments with known ground truth.

use std::collections::BTreeMap;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::alignment::{center, predict_with, Similarity};
use crate::embedding::{AffineTransform, EmbeddingSet, LabelMap, Triplet, TripletSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    HiConvHiAlign,
    HiConvLoAlign,
    LoConvHiAlign,
    LoConvLoAlign,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::HiConvHiAlign,
        Scenario::HiConvLoAlign,
        Scenario::LoConvHiAlign,
        Scenario::LoConvLoAlign,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::HiConvHiAlign => "hi_conv_hi_align",
            Scenario::HiConvLoAlign => "hi_conv_lo_align",
            Scenario::LoConvHiAlign => "lo_conv_hi_align",
            Scenario::LoConvLoAlign => "lo_conv_lo_align",
        }
    }

    pub fn high_convexity(&self) -> bool {
        matches!(self, Scenario::HiConvHiAlign | Scenario::HiConvLoAlign)
    }

    pub fn high_alignment(&self) -> bool {
        matches!(self, Scenario::HiConvHiAlign | Scenario::LoConvHiAlign)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s.replace('-', "_"))
            .ok_or_else(|| Error::Parameter(format!("unknown scenario `{s}`")))
    }
}

/// Gaussian-mixture parameters. Class centres sit at `separation * sigma` from the origin
/// along random unit directions; items are drawn from `N(centre, sigma^2 I)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub items_per_class: usize,
    pub dim: usize,
    pub separation: f64,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 27,
            items_per_class: 100,
            dim: 16,
            separation: 10.0,
            sigma: 1.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_classes == 0 || self.items_per_class == 0 || self.dim == 0 {
            return Err(Error::Parameter("synthetic spec needs classes, items and dim > 0".into()));
        }
        if !(self.separation >= 0.0 && self.separation.is_finite()) || !(self.sigma > 0.0) {
            return Err(Error::Parameter("separation must be >= 0 and sigma > 0".into()));
        }
        Ok(())
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn unit_vec(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f64> {
    loop {
        let v = gaussian_vec(rng, dim);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Random orthogonal matrix (row-major) from Gram-Schmidt on Gaussian rows.
pub fn random_rotation(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(dim);
    while rows.len() < dim {
        let mut v = gaussian_vec(rng, dim);
        for r in &rows {
            let proj: f64 = v.iter().zip(r).map(|(a, b)| a * b).sum();
            for (x, y) in v.iter_mut().zip(r) {
                *x -= proj * y;
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            rows.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    rows.concat()
}

fn item_id(class: usize, item: usize) -> String {
    format!("c{class:02}_{item:04}")
}

/// Gaussian mixture plus the class labels of its items.
pub fn gen_embeddings(spec: &SynthSpec) -> Result<(EmbeddingSet, LabelMap)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let centres: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|_| {
            unit_vec(&mut rng, spec.dim)
                .into_iter()
                .map(|x| x * spec.separation * spec.sigma)
                .collect()
        })
        .collect();
    let n = spec.n_classes * spec.items_per_class;
    let mut items = Vec::with_capacity(n);
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut entries = BTreeMap::new();
    for (c, centre) in centres.iter().enumerate() {
        for i in 0..spec.items_per_class {
            let id = item_id(c, i);
            entries.insert(id.clone(), c as u32);
            items.push(id);
            for mu in centre {
                let z: f64 = rng.sample(StandardNormal);
                data.push((mu + spec.sigma * z) as f32);
            }
        }
    }
    let mut meta = BTreeMap::new();
    meta.insert("source".into(), "synth".into());
    meta.insert("seed".into(), spec.seed.to_string());
    meta.insert("separation".into(), spec.separation.to_string());
    let set = EmbeddingSet::with_meta(items, spec.dim, data, meta)?;
    let class_names = (0..spec.n_classes).map(|c| format!("class_{c:02}")).collect();
    Ok((set, LabelMap::new(class_names, entries)?))
}

/// Samples `n` triplets of distinct items and labels each by the cosine odd one out in
/// `truth`; with probability `noise` the label is replaced by one of the two other positions.
pub fn gen_triplets(truth: &EmbeddingSet, n: usize, seed: u64, noise: f64) -> Result<TripletSet> {
    if truth.len() < 3 {
        return Err(Error::Parameter(format!(
            "triplets need at least 3 items, got {}",
            truth.len()
        )));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Parameter(format!("noise must lie in [0, 1], got {noise}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(n);
    for _ in 0..n {
        let idx = index::sample(&mut rng, truth.len(), 3).into_vec();
        let rows = [idx[0], idx[1], idx[2]];
        let mut odd = predict_with(rows.map(|r| truth.row(r)), Similarity::Cosine)?.odd;
        if noise > 0.0 && rng.random::<f64>() < noise {
            odd = (odd + 1 + rng.random_range(0..2u8)) % 3;
        }
        let ids = rows.map(|r| truth.items()[r].clone());
        let [i, j, k] = ids;
        triplets.push(Triplet::new(i, j, k, odd)?);
    }
    TripletSet::new(triplets)
}

/// Target region for a fixture's measured convexity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConvexityBand {
    Above(f64),
    /// Below the fixture's own permutation baseline plus the margin.
    BelowBaselinePlus(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccuracyBand {
    Above(f64),
    Below(f64),
}

impl AccuracyBand {
    pub fn contains(&self, v: f64) -> bool {
        match *self {
            AccuracyBand::Above(t) => v > t,
            AccuracyBand::Below(t) => v < t,
        }
    }
}

impl ConvexityBand {
    pub fn contains(&self, v: f64, baseline: f64) -> bool {
        match *self {
            ConvexityBand::Above(t) => v > t,
            ConvexityBand::BelowBaselinePlus(m) => v < baseline + m,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ScenarioFixture {
    pub scenario: Scenario,
    pub embeddings: EmbeddingSet,
    pub labels: LabelMap,
    pub triplets: TripletSet,
    /// k for the convexity graph the bands were designed for.
    pub k: usize,
    pub convexity_band: ConvexityBand,
    pub oooa_band: AccuracyBand,
}

const SCENARIO_CLASSES: usize = 6;
const SCENARIO_ITEMS: usize = 40;
const SCENARIO_DIM: usize = 8;
const SCENARIO_TRIPLETS: usize = 2000;

/// One of the four convexity/alignment quadrants.
///
/// Convexity is set by class separation. Alignment is set by where the triplet
/// labels come from: the fixture's own centred geometry (high) or an independent
/// mixture whose items were randomly permuted and rotated (low).
pub fn gen_scenario(which: Scenario, seed: u64) -> Result<ScenarioFixture> {
    let separation = if which.high_convexity() { 30.0 } else { 0.0 };
    let spec = SynthSpec {
        n_classes: SCENARIO_CLASSES,
        items_per_class: SCENARIO_ITEMS,
        dim: SCENARIO_DIM,
        separation,
        sigma: 1.0,
        seed,
    };
    let (raw, labels) = gen_embeddings(&spec)?;
    let embeddings = center(&raw);

    let truth = if which.high_alignment() {
        embeddings.clone()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x005e_ed0f_a11e);
        let (other, _) = gen_embeddings(&SynthSpec {
            seed: rng.random(),
            separation: 30.0,
            ..spec
        })?;
        let rotation = random_rotation(SCENARIO_DIM, &mut rng);
        let rotate = AffineTransform::new(SCENARIO_DIM, rotation, vec![0.0; SCENARIO_DIM])?;
        let rotated = crate::transform::apply_transform(&rotate, &other)?;
        let mut perm: Vec<usize> = (0..rotated.len()).collect();
        perm.shuffle(&mut rng);
        let data = perm.iter().flat_map(|&p| rotated.row(p).to_vec()).collect();
        center(&EmbeddingSet::new(embeddings.items().to_vec(), SCENARIO_DIM, data)?)
    };
    let triplets = gen_triplets(&truth, SCENARIO_TRIPLETS, seed.wrapping_add(1), 0.0)?;
    Ok(ScenarioFixture {
        scenario: which,
        embeddings,
        labels,
        triplets,
        k: 10,
        convexity_band: if which.high_convexity() {
            ConvexityBand::Above(0.95)
        } else {
            ConvexityBand::BelowBaselinePlus(0.1)
        },
        oooa_band: if which.high_alignment() {
            AccuracyBand::Above(0.9)
        } else {
            AccuracyBand::Below(0.45)
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedSpec {
    pub n_items: usize,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Scale applied to the stretched directions of the hidden map.
    pub stretch: f64,
    /// How many directions are stretched.
    pub stretched_dims: usize,
    pub seed: u64,
}

impl Default for PlantedSpec {
    fn default() -> Self {
        Self {
            n_items: 200,
            dim: 16,
            n_train: 5000,
            n_test: 1000,
            stretch: 5.0,
            stretched_dims: 3,
            seed: 0,
        }
    }
}

/// Observed embeddings produced from a hidden ground truth by a known linear map.
#[derive(Debug, Clone)]
pub struct PlantedFixture {
    pub truth: EmbeddingSet,
    pub observed: EmbeddingSet,
    /// Maps truth to observed.
    pub planted: AffineTransform,
    /// Maps observed back to truth.
    pub inverse: AffineTransform,
    pub train: TripletSet,
    pub test: TripletSet,
}

/// Triplets are labelled on `truth`; the observed space is `Q diag(s) truth` with a random
/// rotation `Q` and `s` large on a few directions, which hides the labelling geometry.
pub fn gen_planted(spec: &PlantedSpec) -> Result<PlantedFixture> {
    if spec.stretched_dims > spec.dim || !(spec.stretch > 0.0) {
        return Err(Error::Parameter("invalid planted-transform stretch".into()));
    }
    let d = spec.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let items: Vec<String> = (0..spec.n_items).map(|i| format!("item{i:04}")).collect();
    let truth_data: Vec<f32> = (0..spec.n_items * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) as f32)
        .collect();
    let truth = EmbeddingSet::new(items, d, truth_data)?;

    let q = random_rotation(d, &mut rng);
    let scales: Vec<f64> = (0..d)
        .map(|j| if j < spec.stretched_dims { spec.stretch } else { 1.0 })
        .collect();
    let mut planted_w = vec![0.0; d * d];
    let mut inverse_w = vec![0.0; d * d];
    for r in 0..d {
        for c in 0..d {
            // planted = Q diag(s); inverse = diag(1/s) Q^T.
            planted_w[r * d + c] = q[r * d + c] * scales[c];
            inverse_w[r * d + c] = q[c * d + r] / scales[r];
        }
    }
    let planted = AffineTransform::new(d, planted_w, vec![0.0; d])?;
    let inverse = AffineTransform::new(d, inverse_w, vec![0.0; d])?;
    let mut observed = crate::transform::apply_transform(&planted, &truth)?;
    observed.meta.clear();
    observed.meta.insert("source".into(), "planted".into());

    let train = gen_triplets(&truth, spec.n_train, rng.random(), 0.0)?;
    let test = gen_triplets(&truth, spec.n_test, rng.random(), 0.0)?;
    Ok(PlantedFixture {
        truth,
        observed,
        planted,
        inverse,
        train,
        test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alignment::oooa;

    #[test]
    fn embeddings_are_deterministic() {
        let spec = SynthSpec {
            n_classes: 3,
            items_per_class: 5,
            dim: 4,
            seed: 9,
            ..Default::default()
        };
        let (a, la) = gen_embeddings(&spec).unwrap();
        let (b, lb) = gen_embeddings(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        assert_eq!(a.len(), 15);
        assert_eq!(la.vertex_classes(&a).unwrap()[5], 1);
    }

    #[test]
    fn rotation_is_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = 6;
        let q = random_rotation(d, &mut rng);
        for i in 0..d {
            for j in 0..d {
                let dot: f64 = (0..d).map(|c| q[i * d + c] * q[j * d + c]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn triplet_noise_levels() {
        let spec = SynthSpec {
            n_classes: 4,
            items_per_class: 10,
            dim: 5,
            ..Default::default()
        };
        let (truth, _) = gen_embeddings(&spec).unwrap();
        let clean = gen_triplets(&truth, 500, 1, 0.0).unwrap();
        assert_eq!(oooa(&truth, &clean, false).unwrap().accuracy, 1.0);
        let flipped = gen_triplets(&truth, 500, 1, 1.0).unwrap();
        assert_eq!(oooa(&truth, &flipped, false).unwrap().accuracy, 0.0);
        assert_eq!(gen_triplets(&truth, 50, 4, 0.3).unwrap(), gen_triplets(&truth, 50, 4, 0.3).unwrap());
        let tiny = EmbeddingSet::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(gen_triplets(&tiny, 1, 0, 0.0).is_err());
    }

    #[test]
    fn planted_inverse_recovers_truth() {
        let fx = gen_planted(&PlantedSpec {
            n_items: 30,
            n_train: 100,
            n_test: 50,
            ..Default::default()
        })
        .unwrap();
        let recovered = crate::transform::apply_transform(&fx.inverse, &fx.observed).unwrap();
        for (a, b) in recovered.data().iter().zip(fx.truth.data()) {
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
        assert!(oooa(&recovered, &fx.test, false).unwrap().accuracy > 0.97);
    }

    #[test]
    fn scenario_names_parse() {
        for sc in Scenario::ALL {
            assert_eq!(sc.name().parse::<Scenario>().unwrap(), sc);
        }
        assert!("nope".parse::<Scenario>().is_err());
    }
}
