pub mod aligner;
pub mod config;
pub mod corpus_io;
pub mod error;
pub mod evaluator;
pub mod multisource;
pub mod pipeline;
pub mod projector;
pub mod scalar;
pub mod synth;
pub mod tagger;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type TaggerModel32 = tagger::TaggerModel<f32>;
pub type TaggerModel64 = tagger::TaggerModel<f64>;
