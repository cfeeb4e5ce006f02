//! Fitting and applying the affine "naive transform".
//!
//! The transform `x -> W x + b` is fitted by minimising
//!
//! ```text
//! L(W, b) = -1/n * sum_s log softmax(Z)_{pair_s} + lambda * ||W||_F^2,
//! Z_ij    = (W x_i + b) . (W x_j + b)
//! ```
//!
//! over human triplet choices. With `y_i = W x_i + b` and `g_p = softmax(Z)_p - [p = pair]`
//! for the three pairs of a triplet, the gradient is
//!
//! ```text
//! dL/dy_i = 1/n * sum over pairs (i, j) of g_p * y_j
//! dL/dW   = sum_i dL/dy_i x_i^T + 2 lambda W
//! dL/db   = sum_i dL/dy_i
//! ```

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::alignment::{pair_index, predict_from_similarities, triplet_nll, PAIRS};
use crate::embedding::{encode_aft1, AffineTransform, EmbeddingSet, IndexedTriplet, TripletSet};
use crate::error::{Error, Result};
use crate::summation::NeumaierSum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Weight of the squared Frobenius norm of `W`.
    pub lambda: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    /// Triplets per mini-batch; 0 means full batch.
    pub batch_size: usize,
    /// Fraction of triplets held out for early stopping.
    pub val_fraction: f64,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            learning_rate: 0.1,
            max_epochs: 200,
            batch_size: 0,
            val_fraction: 0.1,
            patience: 10,
            seed: 0,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Parameter(format!("lambda must be finite and >= 0, got {}", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter(format!(
                "learning rate must be finite and > 0, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.val_fraction) {
            return Err(Error::Parameter(format!(
                "val_fraction must lie in [0, 1), got {}",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

/// Metrics for the transform after `epoch` update rounds (epoch 0 is the identity).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Full objective (likelihood term plus regularizer) on the training triplets.
    pub train_loss: f64,
    /// Full objective on the validation triplets, so early stopping sees the penalty too.
    pub val_loss: Option<f64>,
    /// Dot-product argmax accuracy on the validation triplets.
    pub val_oooa: Option<f64>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxEpochs,
    EarlyStopped,
    /// The step size underflowed without finding a descent step.
    Converged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitTrace {
    pub epochs: Vec<EpochRecord>,
    /// Transform with the best validation loss (training objective when there is no validation split).
    pub transform: AffineTransform,
    pub best_epoch: usize,
    pub epochs_run: usize,
    pub stop: StopReason,
    pub train_triplets: usize,
    pub val_triplets: usize,
    /// Positions of the validation triplets in the input set, ascending.
    pub val_indices: Vec<usize>,
    pub config: FitConfig,
}

impl FitTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,val_oooa\n");
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.epochs {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.epoch,
                r.train_loss,
                opt(r.val_loss),
                opt(r.val_oooa)
            ));
        }
        out
    }
}

fn check_dims(t: &AffineTransform, set: &EmbeddingSet) -> Result<()> {
    if t.dim() != set.dim() {
        return Err(Error::Parameter(format!(
            "transform dimension {} does not match embedding dimension {}",
            t.dim(),
            set.dim()
        )));
    }
    Ok(())
}

/// Transformed rows for exactly the items referenced by a batch of triplets.
struct Projected {
    dim: usize,
    /// Row index of the embedding set -> slot in `y`.
    slot: Vec<usize>,
    rows: Vec<usize>,
    y: Vec<f64>,
}

impl Projected {
    fn new(t: &AffineTransform, set: &EmbeddingSet, triplets: &[IndexedTriplet]) -> Self {
        let d = set.dim();
        let mut slot = vec![usize::MAX; set.len()];
        let mut rows = Vec::new();
        for tr in triplets {
            for &r in &tr.rows {
                if slot[r] == usize::MAX {
                    slot[r] = rows.len();
                    rows.push(r);
                }
            }
        }
        let mut y = vec![0.0; rows.len() * d];
        y.par_chunks_mut(d)
            .zip(rows.par_iter())
            .for_each(|(out, &r)| t.apply_row(set.row(r), out));
        Self { dim: d, slot, rows, y }
    }

    fn y(&self, row: usize) -> &[f64] {
        let s = self.slot[row];
        &self.y[s * self.dim..(s + 1) * self.dim]
    }

    fn similarities(&self, tr: &IndexedTriplet) -> [f64; 3] {
        let mut z = [0.0; 3];
        for (out, &(a, b)) in z.iter_mut().zip(&PAIRS) {
            *out = dot64(self.y(tr.rows[a]), self.y(tr.rows[b]));
        }
        z
    }
}

fn dot64(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

fn mean_nll(p: &Projected, triplets: &[IndexedTriplet]) -> f64 {
    let mut acc = NeumaierSum::new();
    for tr in triplets {
        acc.add(triplet_nll(&p.similarities(tr), tr.odd));
    }
    acc.total() / triplets.len() as f64
}

fn frobenius_sq(t: &AffineTransform) -> f64 {
    let mut acc = NeumaierSum::new();
    for w in &t.w {
        acc.add(w * w);
    }
    acc.total()
}

fn loss(t: &AffineTransform, set: &EmbeddingSet, triplets: &[IndexedTriplet], lambda: f64) -> f64 {
    let p = Projected::new(t, set, triplets);
    mean_nll(&p, triplets) + lambda * frobenius_sq(t)
}

/// Gradient of the objective with respect to `(W, b)`, plus the objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub dw: Vec<f64>,
    pub db: Vec<f64>,
    pub loss: f64,
}

impl Gradient {
    pub fn norm(&self) -> f64 {
        self.dw.iter().chain(&self.db).map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn loss_and_gradient(
    t: &AffineTransform,
    set: &EmbeddingSet,
    triplets: &[IndexedTriplet],
    lambda: f64,
) -> Gradient {
    let d = set.dim();
    let p = Projected::new(t, set, triplets);
    let scale = 1.0 / triplets.len() as f64;
    // dL/dy for every projected row, accumulated in triplet order.
    let mut gy = vec![0.0; p.y.len()];
    let mut nll = NeumaierSum::new();
    for tr in triplets {
        let z = p.similarities(tr);
        nll.add(triplet_nll(&z, tr.odd));
        let m = z[0].max(z[1]).max(z[2]);
        let e = z.map(|v| (v - m).exp());
        let total = e[0] + e[1] + e[2];
        let human = pair_index(tr.odd);
        for (pi, &(a, b)) in PAIRS.iter().enumerate() {
            let g = scale * (e[pi] / total - if pi == human { 1.0 } else { 0.0 });
            let (ra, rb) = (tr.rows[a], tr.rows[b]);
            let (sa, sb) = (p.slot[ra], p.slot[rb]);
            for c in 0..d {
                let ya = p.y[sa * d + c];
                let yb = p.y[sb * d + c];
                gy[sa * d + c] += g * yb;
                gy[sb * d + c] += g * ya;
            }
        }
    }
    let mut dw = vec![0.0; d * d];
    dw.par_chunks_mut(d).enumerate().for_each(|(r, out)| {
        for (s, &row) in p.rows.iter().enumerate() {
            let g = gy[s * d + r];
            if g == 0.0 {
                continue;
            }
            for (o, &x) in out.iter_mut().zip(set.row(row)) {
                *o += g * x as f64;
            }
        }
        for (o, w) in out.iter_mut().zip(&t.w[r * d..(r + 1) * d]) {
            *o += 2.0 * lambda * w;
        }
    });
    let mut db = vec![0.0; d];
    for s in 0..p.rows.len() {
        for (o, g) in db.iter_mut().zip(&gy[s * d..(s + 1) * d]) {
            *o += g;
        }
    }
    Gradient {
        dw,
        db,
        loss: nll.total() / triplets.len() as f64 + lambda * frobenius_sq(t),
    }
}

fn resolve(t: &AffineTransform, set: &EmbeddingSet, triplets: &TripletSet) -> Result<Vec<IndexedTriplet>> {
    check_dims(t, set)?;
    if triplets.is_empty() {
        return Err(Error::Parameter("objective over zero triplets".into()));
    }
    triplets.resolve(set)
}

/// Mean triplet negative log-likelihood of the transformed dot products plus `lambda ||W||_F^2`.
pub fn objective(t: &AffineTransform, set: &EmbeddingSet, triplets: &TripletSet, lambda: f64) -> Result<f64> {
    let resolved = resolve(t, set, triplets)?;
    Ok(loss(t, set, &resolved, lambda))
}

/// Analytic gradient of [`objective`].
pub fn objective_gradient(
    t: &AffineTransform,
    set: &EmbeddingSet,
    triplets: &TripletSet,
    lambda: f64,
) -> Result<Gradient> {
    let resolved = resolve(t, set, triplets)?;
    Ok(loss_and_gradient(t, set, &resolved, lambda))
}

/// Dot-product argmax accuracy of transformed vectors.
fn dot_accuracy(t: &AffineTransform, set: &EmbeddingSet, triplets: &[IndexedTriplet]) -> f64 {
    let p = Projected::new(t, set, triplets);
    let correct = triplets
        .iter()
        .filter(|tr| predict_from_similarities(&p.similarities(tr)).odd == tr.odd)
        .count();
    correct as f64 / triplets.len() as f64
}

fn step(t: &AffineTransform, g: &Gradient, lr: f64) -> AffineTransform {
    let mut next = t.clone();
    for (w, dw) in next.w.iter_mut().zip(&g.dw) {
        *w -= lr * dw;
    }
    for (b, db) in next.b.iter_mut().zip(&g.db) {
        *b -= lr * db;
    }
    next
}

/// Smallest step size tried before declaring convergence.
const MIN_LEARNING_RATE: f64 = 1e-14;

struct Split {
    train: Vec<IndexedTriplet>,
    val: Vec<IndexedTriplet>,
    val_idx: Vec<usize>,
}

fn split(triplets: Vec<IndexedTriplet>, val_fraction: f64, rng: &mut ChaCha8Rng) -> Split {
    let m = triplets.len();
    let mut n_val = (val_fraction * m as f64).floor() as usize;
    if val_fraction > 0.0 && n_val == 0 {
        n_val = 1;
    }
    n_val = n_val.min(m - 1);
    let mut order: Vec<usize> = (0..m).collect();
    order.shuffle(rng);
    let (val_idx, train_idx) = order.split_at(n_val);
    let mut val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();
    val_idx.sort_unstable();
    train_idx.sort_unstable();
    Split {
        train: train_idx.iter().map(|&i| triplets[i]).collect(),
        val: val_idx.iter().map(|&i| triplets[i]).collect(),
        val_idx,
    }
}

/// Fits `(W, b)` by gradient descent from the identity.
///
/// Full-batch training backtracks: a step that raises the training objective is
/// rejected and the learning rate halved, so accepted epochs never increase it.
/// Mini-batch training halves the learning rate after an epoch that raised it.
pub fn fit_naive_transform(set: &EmbeddingSet, triplets: &TripletSet, cfg: &FitConfig) -> Result<FitTrace> {
    cfg.validate()?;
    if triplets.len() < 2 {
        return Err(Error::Parameter(format!(
            "fitting needs at least 2 triplets, got {}",
            triplets.len()
        )));
    }
    let resolved = triplets.resolve(set)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let Split { train, val, val_idx } = split(resolved, cfg.val_fraction, &mut rng);
    let full_batch = cfg.batch_size == 0 || cfg.batch_size >= train.len();

    let mut t = AffineTransform::identity(set.dim());
    let mut lr = cfg.learning_rate;
    let mut epochs: Vec<EpochRecord> = Vec::new();
    let mut best = (f64::INFINITY, 0usize, t.clone());
    let mut since_best = 0usize;
    let mut stop = StopReason::MaxEpochs;
    let initial_train = loss(&t, set, &train, cfg.lambda);

    for epoch in 0..=cfg.max_epochs {
        let grad = loss_and_gradient(&t, set, &train, cfg.lambda);
        let train_loss = grad.loss;
        if !train_loss.is_finite() {
            let last = epochs.last();
            return Err(Error::Diverged {
                epoch,
                last_finite_epoch: last.map(|r| r.epoch),
                last_finite_loss: last.map(|r| r.train_loss),
            });
        }
        let (val_loss, val_oooa) = if val.is_empty() {
            (None, None)
        } else {
            (Some(loss(&t, set, &val, cfg.lambda)), Some(dot_accuracy(&t, set, &val)))
        };
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_oooa,
            learning_rate: lr,
        });

        let criterion = val_loss.unwrap_or(train_loss);
        if criterion < best.0 {
            best = (criterion, epoch, t.clone());
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop = StopReason::EarlyStopped;
                break;
            }
        }
        if epoch == cfg.max_epochs {
            break;
        }

        if full_batch {
            let mut accepted = None;
            while lr >= MIN_LEARNING_RATE {
                let candidate = step(&t, &grad, lr);
                let candidate_loss = loss(&candidate, set, &train, cfg.lambda);
                if candidate_loss <= train_loss {
                    accepted = Some(candidate);
                    break;
                }
                lr *= 0.5;
            }
            match accepted {
                Some(next) => t = next,
                None => {
                    stop = StopReason::Converged;
                    break;
                }
            }
        } else {
            let mut order: Vec<usize> = (0..train.len()).collect();
            order.shuffle(&mut rng);
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<IndexedTriplet> = chunk.iter().map(|&i| train[i]).collect();
                let g = loss_and_gradient(&t, set, &batch, cfg.lambda);
                t = step(&t, &g, lr);
            }
            let after = loss(&t, set, &train, cfg.lambda);
            if !(after <= train_loss) {
                lr *= 0.5;
            }
        }
    }

    let (_, best_epoch, mut transform) = best;
    let mut best_epoch = best_epoch;
    if loss(&transform, set, &train, cfg.lambda) > initial_train {
        transform = AffineTransform::identity(set.dim());
        best_epoch = 0;
    }
    transform.meta.insert("lambda".into(), cfg.lambda.to_string());
    transform.meta.insert("best_epoch".into(), best_epoch.to_string());
    let epochs_run = epochs.len();
    Ok(FitTrace {
        epochs,
        transform,
        best_epoch,
        epochs_run,
        stop,
        train_triplets: train.len(),
        val_triplets: val.len(),
        val_indices: val_idx,
        config: *cfg,
    })
}

/// Short content hash identifying a transform.
pub fn transform_id(t: &AffineTransform) -> String {
    let mut stripped = t.clone();
    stripped.meta.clear();
    let digest = Sha256::digest(encode_aft1(&stripped));
    hex::encode(&digest[..8])
}

/// Maps each row `x` to `W x + b`, keeping item order.
pub fn apply_transform(t: &AffineTransform, set: &EmbeddingSet) -> Result<EmbeddingSet> {
    check_dims(t, set)?;
    let d = set.dim();
    let mut data = vec![0f32; set.len() * d];
    data.par_chunks_mut(d).enumerate().for_each(|(i, out)| {
        let mut y = vec![0.0; d];
        t.apply_row(set.row(i), &mut y);
        for (o, v) in out.iter_mut().zip(y) {
            *o = v as f32;
        }
    });
    let mut out = set.with_data(data)?;
    out.meta.insert("transform".into(), transform_id(t));
    Ok(out)
}
