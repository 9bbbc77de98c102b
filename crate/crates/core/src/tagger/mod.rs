//! BiLSTM + softmax part-of-speech tagger trained on partially tagged
//! sentences.

mod features;
mod gradcheck;
mod model;
mod network;
mod train;

pub use features::{affix_strings, extract_features, sentence_features, word_key, FeatureVector};
pub use gradcheck::{gradient_check, CoordinateCheck, GradCheckReport, COORDS_PER_BLOCK, RELATIVE_FLOOR};
pub use model::{
    AnyTagger, LrSchedule, LstmParams, Matrix, Params, TaggerConfig, TaggerModel, BLOCK_NAMES, MODEL_FORMAT,
    MODEL_VERSION,
};
pub use network::{argmax_rows, masked_loss, Forward, ForwardCache, Gradients};
pub use train::{train, AdamState, Moments, TrainOutcome, TrainingExample};
