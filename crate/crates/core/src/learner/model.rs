//! Two-hidden-layer perceptron with a policy head and a value head.
//!
//! All parameters live in one flat vector, laid out as
//! `W1 b1 W2 b2 Wp bp wv bv` with every matrix row-major `[out][in]`.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::policy::{sigmoid, softmax, PolicyDistribution, ValueEstimate};
use crate::game::Action;

const A: usize = Action::COUNT;

#[derive(Debug, Error)]
pub enum LearnError {
    #[error("feature vector has {found} entries, model expects {expected}")]
    Dimension { expected: usize, found: usize },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("non-finite loss; training step aborted")]
    NonFiniteLoss,
    #[error("model file: {0}")]
    Format(String),
    #[error("model is for game `{found}`, expected `{expected}`")]
    WrongGame { expected: String, found: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub features: Vec<f64>,
    pub policy: PolicyDistribution,
    pub value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub value_loss_weight: f64,
    /// Velocity decay for [`Sgd`]; ignored by [`ModelWeights::train_step`].
    pub momentum: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            weight_decay: 0.0,
            value_loss_weight: 1.0,
            momentum: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelWeights {
    pub game: String,
    /// `[input, hidden1, hidden2]`; the second hidden layer is the trunk both
    /// heads read from.
    pub dims: [usize; 3],
    pub params: Vec<f64>,
    pub steps: u64,
}

struct Layout {
    w1: Range<usize>,
    b1: Range<usize>,
    w2: Range<usize>,
    b2: Range<usize>,
    wp: Range<usize>,
    bp: Range<usize>,
    wv: Range<usize>,
    bv: usize,
    total: usize,
}

fn layout([n, h1, h2]: [usize; 3]) -> Layout {
    let mut at = 0;
    let mut take = |len: usize| {
        let r = at..at + len;
        at += len;
        r
    };
    let w1 = take(h1 * n);
    let b1 = take(h1);
    let w2 = take(h2 * h1);
    let b2 = take(h2);
    let wp = take(A * h2);
    let bp = take(A);
    let wv = take(h2);
    let bv = take(1).start;
    Layout {
        w1,
        b1,
        w2,
        b2,
        wp,
        bp,
        wv,
        bv,
        total: at,
    }
}

pub fn param_count(dims: [usize; 3]) -> usize {
    layout(dims).total
}

/// Forward-pass intermediates kept for backpropagation.
struct Trace {
    z1: Vec<f64>,
    a1: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    policy: PolicyDistribution,
    value: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (o, (row, bias)) in out.iter_mut().zip(w.chunks_exact(n).zip(b)) {
        *o = bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl ModelWeights {
    /// Weights uniform in `±1/√fan_in`, biases zero.
    pub fn new(game: &str, dims: [usize; 3], seed: u64) -> Self {
        let l = layout(dims);
        let mut params = vec![0.0; l.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [n, h1, h2] = dims;
        for (range, fan_in) in [(l.w1, n), (l.w2, h1), (l.wp, h2), (l.wv, h2)] {
            let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
            for w in &mut params[range] {
                *w = rng.gen_range(-bound..=bound);
            }
        }
        Self {
            game: game.to_string(),
            dims,
            params,
            steps: 0,
        }
    }

    pub fn zeros(game: &str, dims: [usize; 3]) -> Self {
        Self {
            game: game.to_string(),
            dims,
            params: vec![0.0; param_count(dims)],
            steps: 0,
        }
    }

    pub fn input_len(&self) -> usize {
        self.dims[0]
    }

    fn forward(&self, x: &[f64]) -> Result<Trace, LearnError> {
        let [n, h1, h2] = self.dims;
        if x.len() != n {
            return Err(LearnError::Dimension {
                expected: n,
                found: x.len(),
            });
        }
        let l = layout(self.dims);
        let p = &self.params;
        let mut z1 = vec![0.0; h1];
        affine(&p[l.w1], &p[l.b1], x, &mut z1);
        let a1: Vec<f64> = z1.iter().map(|&z| z.max(0.0)).collect();
        let mut z2 = vec![0.0; h2];
        affine(&p[l.w2], &p[l.b2], &a1, &mut z2);
        let a2: Vec<f64> = z2.iter().map(|&z| z.max(0.0)).collect();
        let mut logits = [0.0; A];
        affine(&p[l.wp], &p[l.bp], &a2, &mut logits);
        let u = p[l.bv] + p[l.wv].iter().zip(&a2).map(|(w, a)| w * a).sum::<f64>();
        Ok(Trace {
            z1,
            a1,
            z2,
            a2,
            policy: softmax(&logits),
            value: sigmoid(u),
        })
    }

    pub fn predict(&self, features: &[f64]) -> Result<(PolicyDistribution, ValueEstimate), LearnError> {
        let t = self.forward(features)?;
        Ok((t.policy, ValueEstimate(t.value)))
    }

    /// Mean batch loss and its gradient with respect to `params`.
    ///
    /// Per example: `−Σ t·ln p + w_v·(v − y)²`; plus `½·λ·‖W‖²` over weight
    /// matrices (not biases).
    pub fn loss_and_gradient(
        &self,
        batch: &[TrainingExample],
        opts: &TrainOptions,
    ) -> Result<(f64, Vec<f64>), LearnError> {
        if batch.is_empty() {
            return Err(LearnError::EmptyBatch);
        }
        let [n, h1, h2] = self.dims;
        let l = layout(self.dims);
        let p = &self.params;
        let mut g = vec![0.0; l.total];
        let scale = 1.0 / batch.len() as f64;
        let mut loss = 0.0;

        for ex in batch {
            let t = self.forward(&ex.features)?;
            let ce: f64 = ex
                .policy
                .0
                .iter()
                .zip(&t.policy.0)
                .filter(|(target, _)| **target > 0.0)
                .map(|(target, prob)| -target * prob.ln())
                .sum();
            let err = t.value - ex.value;
            loss += scale * (ce + opts.value_loss_weight * err * err);

            let mut dlogits = [0.0; A];
            for i in 0..A {
                dlogits[i] = scale * (t.policy.0[i] - ex.policy.0[i]);
            }
            let du = scale * 2.0 * opts.value_loss_weight * err * t.value * (1.0 - t.value);

            let mut da2 = vec![0.0; h2];
            for i in 0..A {
                let row = l.wp.start + i * h2;
                for j in 0..h2 {
                    g[row + j] += dlogits[i] * t.a2[j];
                    da2[j] += dlogits[i] * p[row + j];
                }
                g[l.bp.start + i] += dlogits[i];
            }
            for j in 0..h2 {
                g[l.wv.start + j] += du * t.a2[j];
                da2[j] += du * p[l.wv.start + j];
            }
            g[l.bv] += du;

            let dz2: Vec<f64> = da2
                .iter()
                .zip(&t.z2)
                .map(|(&d, &z)| if z > 0.0 { d } else { 0.0 })
                .collect();
            let mut da1 = vec![0.0; h1];
            for i in 0..h2 {
                if dz2[i] == 0.0 {
                    continue;
                }
                let row = l.w2.start + i * h1;
                for j in 0..h1 {
                    g[row + j] += dz2[i] * t.a1[j];
                    da1[j] += dz2[i] * p[row + j];
                }
                g[l.b2.start + i] += dz2[i];
            }
            for i in 0..h1 {
                if t.z1[i] <= 0.0 {
                    continue;
                }
                let d = da1[i];
                let row = l.w1.start + i * n;
                for (gw, x) in g[row..row + n].iter_mut().zip(&ex.features) {
                    *gw += d * x;
                }
                g[l.b1.start + i] += d;
            }
        }

        if opts.weight_decay != 0.0 {
            for r in [&l.w1, &l.w2, &l.wp, &l.wv] {
                for i in r.clone() {
                    loss += 0.5 * opts.weight_decay * p[i] * p[i];
                    g[i] += opts.weight_decay * p[i];
                }
            }
        }
        Ok((loss, g))
    }

    /// One plain gradient-descent step (no momentum). Returns the pre-update batch loss; on a
    /// non-finite loss the model is left untouched.
    pub fn train_step(
        &mut self,
        batch: &[TrainingExample],
        opts: &TrainOptions,
    ) -> Result<f64, LearnError> {
        let (loss, grad) = self.loss_and_gradient(batch, opts)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnError::NonFiniteLoss);
        }
        if opts.learning_rate != 0.0 {
            for (w, g) in self.params.iter_mut().zip(&grad) {
                *w -= opts.learning_rate * g;
            }
        }
        self.steps += 1;
        Ok(loss)
    }
}

/// Gradient descent with classical momentum: `v ← μ·v + g`, `w ← w − lr·v`.
///
/// The velocity is optimiser state, kept apart from the model file; it has to
/// be saved alongside the model for training to resume identically.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Sgd {
    pub velocity: Vec<f64>,
}

impl Sgd {
    pub fn new() -> Self {
        Self::default()
    }

    /// One update of `model`. Returns the pre-update batch loss; on a
    /// non-finite loss neither the model nor the velocity changes.
    pub fn step(
        &mut self,
        model: &mut ModelWeights,
        batch: &[TrainingExample],
        opts: &TrainOptions,
    ) -> Result<f64, LearnError> {
        let (loss, grad) = model.loss_and_gradient(batch, opts)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(LearnError::NonFiniteLoss);
        }
        if self.velocity.len() != grad.len() {
            self.velocity = vec![0.0; grad.len()];
        }
        for ((w, v), g) in model.params.iter_mut().zip(&mut self.velocity).zip(&grad) {
            *v = opts.momentum * *v + g;
            *w -= opts.learning_rate * *v;
        }
        model.steps += 1;
        Ok(loss)
    }
}
