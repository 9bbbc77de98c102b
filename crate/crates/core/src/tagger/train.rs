//! Per-sentence Adam training with decoupled weight decay and global-norm
//! clipping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{TagId, TaggedSentence};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::features::FeatureVector;
use super::model::{Matrix, TaggerModel};
use super::network::{masked_loss, Gradients};

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

/// One training sentence: features and a gold tag or NULL per token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct TrainingExample {
    pub features: Vec<FeatureVector>,
    pub tags: Vec<Option<TagId>>,
}

impl TrainingExample {
    pub fn new(features: Vec<FeatureVector>, tags: Vec<Option<TagId>>) -> Result<Self> {
        if features.is_empty() || features.len() != tags.len() {
            return Err(Error::InvalidArgument(format!(
                "training example has {} tokens and {} tags",
                features.len(),
                tags.len()
            )));
        }
        Ok(TrainingExample { features, tags })
    }
}

/// First and second moments for one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments<T> {
    pub m: Matrix<T>,
    pub v: Matrix<T>,
}

/// Adam state, one entry per parameter block in [`super::model::BLOCK_NAMES`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState<T> {
    pub step: u64,
    pub moments: Vec<Moments<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(model: &TaggerModel<T>) -> Self {
        let moments = model
            .params
            .blocks()
            .iter()
            .map(|b| Moments { m: Matrix::zeros(b.rows, b.cols), v: Matrix::zeros(b.rows, b.cols) })
            .collect();
        AdamState { step: 0, moments }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome<T> {
    /// Mean per-sentence loss for each epoch.
    pub loss_history: Vec<f64>,
    pub optimizer: AdamState<T>,
}

struct Step<T> {
    lr: T,
    decay: T,
    c1: T,
    c2: T,
}

impl<T: Scalar> Step<T> {
    #[inline]
    fn apply(&self, p: &mut [T], m: &mut [T], v: &mut [T], g: &[T]) {
        let (b1, b2, eps) = (T::of(BETA1), T::of(BETA2), T::of(ADAM_EPS));
        let one = T::one();
        for k in 0..p.len() {
            m[k] = b1 * m[k] + (one - b1) * g[k];
            v[k] = b2 * v[k] + (one - b2) * g[k] * g[k];
            let mhat = m[k] / self.c1;
            let vhat = v[k] / self.c2;
            p[k] -= self.lr * (mhat / (vhat.sqrt() + eps) + self.decay * p[k]);
        }
    }
}

fn adam_update<T: Scalar>(model: &mut TaggerModel<T>, state: &mut AdamState<T>, grad: &Gradients<T>, lr: f64) {
    state.step += 1;
    let t = state.step as i32;
    let step = Step {
        lr: T::of(lr),
        decay: T::of(model.config.l2_coefficient),
        c1: T::of(1.0 - BETA1.powi(t)),
        c2: T::of(1.0 - BETA2.powi(t)),
    };
    let blocks = model.params.blocks_mut();
    // embedding rows are updated only when touched
    for (b, rows) in [(0, &grad.word_rows), (1, &grad.affix_rows)] {
        let Moments { m, v } = &mut state.moments[b];
        for (&r, g) in rows {
            let r = r as usize;
            step.apply(blocks[b].row_mut(r), m.row_mut(r), v.row_mut(r), g);
        }
    }
    for (i, g) in grad.dense_blocks().into_iter().enumerate() {
        let Moments { m, v } = &mut state.moments[i + 2];
        step.apply(&mut blocks[i + 2].data, &mut m.data, &mut v.data, &g.data);
    }
}

/// Train `model` in place for `model.config.epochs` epochs, one update per
/// sentence. The corpus is put into a canonical order before each seeded
/// shuffle, so its input order does not affect the result.
pub fn train<T: Scalar>(model: &mut TaggerModel<T>, corpus: &[TrainingExample]) -> Result<TrainOutcome<T>> {
    model.config.validate()?;
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let n_tags = model.tagset.len();
    for ex in corpus {
        if ex.features.is_empty() || ex.features.len() != ex.tags.len() {
            return Err(Error::InvalidArgument("training example with mismatched lengths".into()));
        }
        if ex.tags.iter().flatten().any(|t| t.index() >= n_tags) {
            return Err(Error::InvalidArgument("training tag outside the tag set".into()));
        }
    }
    let mut order: Vec<&TrainingExample> = corpus.iter().collect();
    order.sort();

    let cfg = model.config.clone();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    dropout_rng.set_stream(1);
    let mut state = AdamState::new(model);
    let mut history = Vec::with_capacity(cfg.epochs);
    let clip = cfg.clip_norm;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut shuffle_rng);
        let lr = cfg.learning_rate_at(epoch);
        let mut total = 0.0;
        for (i, ex) in order.iter().enumerate() {
            let fw = model.forward(&ex.features, Some(&mut dropout_rng));
            let (loss, d_scores) = masked_loss(&fw.scores, &ex.tags)?;
            let loss = loss.as_f64();
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, sentence: i });
            }
            total += loss;
            if ex.tags.iter().all(Option::is_none) {
                continue;
            }
            let mut grad = model.backward(&ex.features, &fw.cache, &d_scores);
            let norm = grad.squared_norm().sqrt();
            if !norm.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, sentence: i });
            }
            if norm > clip {
                grad.scale(T::of(clip / norm));
            }
            adam_update(model, &mut state, &grad, lr);
        }
        if !model.params.is_finite() {
            return Err(Error::NonFiniteLoss { epoch, sentence: order.len() });
        }
        history.push(total / order.len() as f64);
    }
    Ok(TrainOutcome { loss_history: history, optimizer: state })
}

impl<T: Scalar> TaggerModel<T> {
    /// Features and tags of `sentence` in the form [`train`] consumes.
    pub fn example(&self, sentence: &TaggedSentence) -> TrainingExample {
        TrainingExample { features: self.features(sentence), tags: sentence.tags() }
    }

    pub fn tag_sentence(&self, sentence: &TaggedSentence) -> Vec<TagId> {
        self.predict(&self.features(sentence))
    }

    /// Tag every sentence; parallel over sentences, output in input order.
    pub fn predict_batch(&self, sentences: &[TaggedSentence]) -> Vec<Vec<TagId>> {
        sentences.par_iter().map(|s| self.tag_sentence(s)).collect()
    }

    /// Copy of each sentence with every token carrying the predicted tag.
    pub fn annotate(&self, sentences: &[TaggedSentence]) -> Result<Vec<TaggedSentence>> {
        self.predict_batch(sentences)
            .into_iter()
            .zip(sentences)
            .map(|(tags, s)| {
                let forms: Vec<&str> = s.forms().collect();
                let tags: Vec<Option<TagId>> = tags.into_iter().map(Some).collect();
                TaggedSentence::from_tagged(&forms, &tags)
            })
            .collect()
    }

    /// Fraction of tagged tokens whose prediction matches.
    pub fn accuracy(&self, corpus: &[TrainingExample]) -> f64 {
        let (hit, total) = corpus
            .par_iter()
            .map(|ex| {
                let pred = self.predict(&ex.features);
                let mut h = 0usize;
                let mut t = 0usize;
                for (p, g) in pred.iter().zip(&ex.tags) {
                    if let Some(g) = g {
                        t += 1;
                        h += usize::from(p == g);
                    }
                }
                (h, t)
            })
            .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
        if total == 0 {
            0.0
        } else {
            hit as f64 / total as f64
        }
    }
}
