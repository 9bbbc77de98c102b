use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{TagSet, TaggedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

use super::features::{affix_strings, sentence_features, word_key, FeatureVector};

pub const MODEL_FORMAT: &str = "projtag-tagger";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LrSchedule {
    /// lr / (1 + decay_rate * epoch)
    InverseTime,
    /// lr * decay_rate^(epoch / every)
    Step { every: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggerConfig {
    pub word_embedding_size: usize,
    pub affix_embedding_size: usize,
    /// Width of the concatenated BiLSTM output; each direction gets half.
    pub hidden_nodes: usize,
    pub dropout_rate: f64,
    /// Dropout sites in use: 1 = after the embedding concatenation, 2 = also
    /// after the BiLSTM concatenation.
    pub dropout_layers: usize,
    pub learning_rate: f64,
    pub decay_rate: f64,
    pub lr_schedule: LrSchedule,
    pub l2_coefficient: f64,
    pub epochs: usize,
    pub affix_max_len: usize,
    pub min_word_count: u64,
    pub clip_norm: f64,
    pub seed: u64,
}

impl Default for TaggerConfig {
    fn default() -> Self {
        TaggerConfig {
            word_embedding_size: 64,
            affix_embedding_size: 64,
            hidden_nodes: 128,
            dropout_rate: 0.7,
            dropout_layers: 2,
            learning_rate: 1e-3,
            decay_rate: 0.1,
            lr_schedule: LrSchedule::InverseTime,
            l2_coefficient: 1e-4,
            epochs: 20,
            affix_max_len: 4,
            min_word_count: 1,
            clip_norm: 5.0,
            seed: 42,
        }
    }
}

impl TaggerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.word_embedding_size == 0 || self.affix_embedding_size == 0 || self.affix_max_len == 0 {
            return bad("embedding sizes and affix_max_len must be >= 1".into());
        }
        if self.hidden_nodes < 2 || !self.hidden_nodes.is_multiple_of(2) {
            return bad(format!("hidden_nodes {} must be a positive even number", self.hidden_nodes));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad(format!("dropout_rate {} outside [0,1)", self.dropout_rate));
        }
        if self.dropout_layers > 2 {
            return bad("dropout_layers must be 0, 1 or 2".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1".into());
        }
        if self.learning_rate < 0.0 || self.decay_rate < 0.0 || self.l2_coefficient < 0.0 {
            return bad("learning_rate, decay_rate and l2_coefficient must be >= 0".into());
        }
        if !(self.clip_norm > 0.0) {
            return bad("clip_norm must be > 0".into());
        }
        if let LrSchedule::Step { every: 0 } = self.lr_schedule {
            return bad("step schedule needs every >= 1".into());
        }
        if self.min_word_count < 1 {
            return bad("min_word_count must be >= 1".into());
        }
        Ok(())
    }

    pub fn input_size(&self) -> usize {
        self.word_embedding_size + self.affix_embedding_size
    }

    pub fn direction_size(&self) -> usize {
        self.hidden_nodes / 2
    }

    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::InverseTime => self.learning_rate / (1.0 + self.decay_rate * epoch as f64),
            LrSchedule::Step { every } => self.learning_rate * self.decay_rate.powi((epoch / every) as i32),
        }
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Matrix { rows: rows.len(), cols, data: rows.concat() }
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [T] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    fn uniform(rows: usize, cols: usize, bound: f64, rng: &mut ChaCha8Rng) -> Self {
        let dist = Uniform::new_inclusive(-bound, bound);
        Matrix { rows, cols, data: (0..rows * cols).map(|_| T::of(dist.sample(rng))).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Weights of one LSTM direction. Gate rows are laid out as input, forget,
/// output, candidate; each block has `hidden` rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams<T> {
    /// 4H x input
    pub w: Matrix<T>,
    /// 4H x H
    pub u: Matrix<T>,
    /// 4H x 1
    pub b: Matrix<T>,
}

impl<T: Scalar> LstmParams<T> {
    fn zeros(input: usize, hidden: usize) -> Self {
        LstmParams {
            w: Matrix::zeros(4 * hidden, input),
            u: Matrix::zeros(4 * hidden, hidden),
            b: Matrix::zeros(4 * hidden, 1),
        }
    }

    fn random(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut b = Matrix::zeros(4 * hidden, 1);
        for r in hidden..2 * hidden {
            b.data[r] = T::one();
        }
        LstmParams { w: Matrix::uniform(4 * hidden, input, bound, rng), u: Matrix::uniform(4 * hidden, hidden, bound, rng), b }
    }

    pub fn hidden(&self) -> usize {
        self.u.cols
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params<T> {
    /// |V| x word_embedding_size
    pub word_emb: Matrix<T>,
    /// |A| x affix_embedding_size
    pub affix_emb: Matrix<T>,
    pub fwd: LstmParams<T>,
    pub bwd: LstmParams<T>,
    /// |tags| x hidden_nodes
    pub out_w: Matrix<T>,
    /// |tags| x 1
    pub out_b: Matrix<T>,
}

/// Names of the parameter blocks, in [`Params::blocks`] order.
pub const BLOCK_NAMES: [&str; 10] =
    ["word_emb", "affix_emb", "fwd_w", "fwd_u", "fwd_b", "bwd_w", "bwd_u", "bwd_b", "out_w", "out_b"];

impl<T: Scalar> Params<T> {
    pub fn zeros(cfg: &TaggerConfig, n_words: usize, n_affixes: usize, n_tags: usize) -> Self {
        let h = cfg.direction_size();
        Params {
            word_emb: Matrix::zeros(n_words, cfg.word_embedding_size),
            affix_emb: Matrix::zeros(n_affixes, cfg.affix_embedding_size),
            fwd: LstmParams::zeros(cfg.input_size(), h),
            bwd: LstmParams::zeros(cfg.input_size(), h),
            out_w: Matrix::zeros(n_tags, cfg.hidden_nodes),
            out_b: Matrix::zeros(n_tags, 1),
        }
    }

    pub fn random(cfg: &TaggerConfig, n_words: usize, n_affixes: usize, n_tags: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = cfg.direction_size();
        let mut word_emb = Matrix::uniform(n_words, cfg.word_embedding_size, 0.1, &mut rng);
        let mut affix_emb = Matrix::uniform(n_affixes, cfg.affix_embedding_size, 0.1, &mut rng);
        // PAD and UNK rows start at zero
        for m in [&mut word_emb, &mut affix_emb] {
            for r in 0..2.min(m.rows) {
                m.row_mut(r).fill(T::zero());
            }
        }
        let fwd = LstmParams::random(cfg.input_size(), h, &mut rng);
        let bwd = LstmParams::random(cfg.input_size(), h, &mut rng);
        let out_w = Matrix::uniform(n_tags, cfg.hidden_nodes, 1.0 / (cfg.hidden_nodes as f64).sqrt(), &mut rng);
        Params { word_emb, affix_emb, fwd, bwd, out_w, out_b: Matrix::zeros(n_tags, 1) }
    }

    pub fn blocks(&self) -> [&Matrix<T>; 10] {
        [
            &self.word_emb,
            &self.affix_emb,
            &self.fwd.w,
            &self.fwd.u,
            &self.fwd.b,
            &self.bwd.w,
            &self.bwd.u,
            &self.bwd.b,
            &self.out_w,
            &self.out_b,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix<T>; 10] {
        [
            &mut self.word_emb,
            &mut self.affix_emb,
            &mut self.fwd.w,
            &mut self.fwd.u,
            &mut self.fwd.b,
            &mut self.bwd.w,
            &mut self.bwd.u,
            &mut self.bwd.b,
            &mut self.out_w,
            &mut self.out_b,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.is_finite())
    }
}

/// BiLSTM + softmax tagger with its vocabularies.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerModel<T> {
    pub config: TaggerConfig,
    pub tagset: TagSet,
    pub words: Vocabulary,
    pub affixes: Vocabulary,
    pub params: Params<T>,
}

#[derive(Serialize, Deserialize)]
struct ModelFile<T> {
    format: String,
    version: u32,
    scalar: String,
    config: TaggerConfig,
    tagset: TagSet,
    words: Vocabulary,
    affixes: Vocabulary,
    params: Params<T>,
}

#[derive(Deserialize)]
struct ModelHeader {
    format: String,
    version: u32,
    scalar: String,
}

impl<T: Scalar> TaggerModel<T> {
    /// Randomly initialized model over vocabularies built from `sentences`.
    pub fn from_corpus(config: TaggerConfig, sentences: &[TaggedSentence], tagset: TagSet) -> Result<Self> {
        config.validate()?;
        let keys: Vec<String> = sentences.iter().flat_map(|s| s.forms().map(word_key)).collect();
        let words = Vocabulary::build(keys.iter().map(String::as_str), config.min_word_count)?;
        let affix_list: Vec<String> =
            sentences.iter().flat_map(|s| s.forms().flat_map(|f| affix_strings(f, config.affix_max_len))).collect();
        let affixes = Vocabulary::build(affix_list.iter().map(String::as_str), 1)?;
        let params = Params::random(&config, words.len(), affixes.len(), tagset.len(), config.seed);
        Ok(TaggerModel { config, tagset, words, affixes, params })
    }

    /// Model with every parameter set to zero.
    pub fn zeros(config: TaggerConfig, words: Vocabulary, affixes: Vocabulary, tagset: TagSet) -> Result<Self> {
        config.validate()?;
        let params = Params::zeros(&config, words.len(), affixes.len(), tagset.len());
        Ok(TaggerModel { config, tagset, words, affixes, params })
    }

    pub fn features(&self, sentence: &TaggedSentence) -> Vec<FeatureVector> {
        sentence_features(sentence, &self.words, &self.affixes, self.config.affix_max_len)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            scalar: T::NAME.to_string(),
            config: self.config.clone(),
            tagset: self.tagset.clone(),
            words: self.words.clone(),
            affixes: self.affixes.clone(),
            params: self.params.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let header = check_header(text)?;
        if header.scalar != T::NAME {
            return Err(Error::InvalidArgument(format!(
                "model stores {} parameters, requested {}",
                header.scalar,
                T::NAME
            )));
        }
        let file: ModelFile<T> = serde_json::from_str(text)?;
        let model = TaggerModel {
            config: file.config,
            tagset: file.tagset,
            words: file.words,
            affixes: file.affixes,
            params: file.params,
        };
        model.check_shapes()?;
        Ok(model)
    }

    fn check_shapes(&self) -> Result<()> {
        let expected = Params::<T>::zeros(&self.config, self.words.len(), self.affixes.len(), self.tagset.len());
        for ((name, a), b) in BLOCK_NAMES.iter().zip(self.params.blocks()).zip(expected.blocks()) {
            if (a.rows, a.cols) != (b.rows, b.cols) || a.data.len() != a.rows * a.cols {
                return Err(Error::InvalidArgument(format!(
                    "parameter block {name} has shape {}x{}, expected {}x{}",
                    a.rows, a.cols, b.rows, b.cols
                )));
            }
        }
        Ok(())
    }
}

fn check_header(text: &str) -> Result<ModelHeader> {
    let header: ModelHeader = serde_json::from_str(text)?;
    if header.format != MODEL_FORMAT {
        return Err(Error::InvalidArgument(format!("not a tagger model (format `{}`)", header.format)));
    }
    if header.version != MODEL_VERSION {
        return Err(Error::ModelVersion { found: header.version, expected: MODEL_VERSION });
    }
    Ok(header)
}

/// A loaded model of either precision.
#[derive(Debug, Clone)]
pub enum AnyTagger {
    F32(TaggerModel<f32>),
    F64(TaggerModel<f64>),
}

impl AnyTagger {
    pub fn from_json(text: &str) -> Result<Self> {
        match check_header(text)?.scalar.as_str() {
            "f32" => Ok(AnyTagger::F32(TaggerModel::from_json(text)?)),
            "f64" => Ok(AnyTagger::F64(TaggerModel::from_json(text)?)),
            other => Err(Error::InvalidArgument(format!("unknown scalar type `{other}`"))),
        }
    }

    pub fn tagset(&self) -> &TagSet {
        match self {
            AnyTagger::F32(m) => &m.tagset,
            AnyTagger::F64(m) => &m.tagset,
        }
    }

    pub fn words(&self) -> &Vocabulary {
        match self {
            AnyTagger::F32(m) => &m.words,
            AnyTagger::F64(m) => &m.words,
        }
    }
}
