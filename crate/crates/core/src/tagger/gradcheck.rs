use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus_io::TagId;
use crate::error::{Error, Result};

use super::features::FeatureVector;
use super::model::{TaggerModel, BLOCK_NAMES};
use super::network::masked_loss;

/// Coordinates sampled per parameter block.
pub const COORDS_PER_BLOCK: usize = 24;

/// Differences smaller than this are compared absolutely rather than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCheck {
    pub block: usize,
    pub row: usize,
    pub col: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl CoordinateCheck {
    pub fn relative_error(&self) -> f64 {
        let diff = (self.analytic - self.numeric).abs();
        if diff == 0.0 {
            return 0.0;
        }
        diff / self.analytic.abs().max(self.numeric.abs()).max(RELATIVE_FLOOR)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    /// Max relative error per block, in [`BLOCK_NAMES`] order.
    pub per_block: [f64; 10],
    pub coordinates: Vec<CoordinateCheck>,
}

impl GradCheckReport {
    pub fn worst_block(&self) -> &'static str {
        let (i, _) = self.per_block.iter().enumerate().fold((0, f64::MIN), |a, (i, &e)| if e > a.1 { (i, e) } else { a });
        BLOCK_NAMES[i]
    }
}

fn loss_of(model: &TaggerModel<f64>, sentence: &[FeatureVector], tags: &[Option<TagId>]) -> Result<f64> {
    Ok(masked_loss(&model.scores(sentence), tags)?.0)
}

/// Compare the analytic gradient of the inference-mode masked loss with
/// central differences on sampled coordinates from every parameter block.
/// Embedding coordinates are drawn from rows the sentence uses.
pub fn gradient_check(
    model: &TaggerModel<f64>,
    sentence: &[FeatureVector],
    tags: &[Option<TagId>],
    epsilon: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be > 0, got {epsilon}")));
    }
    if sentence.is_empty() {
        return Err(Error::InvalidArgument("gradient check needs a non-empty sentence".into()));
    }
    let (_, grad) = model.loss_and_gradient(sentence, tags)?;
    let word_rows: Vec<usize> =
        sentence.iter().map(|f| f.word as usize).collect::<BTreeSet<_>>().into_iter().collect();
    let affix_rows: Vec<usize> =
        sentence.iter().flat_map(|f| f.affixes.iter().map(|&a| a as usize)).collect::<BTreeSet<_>>().into_iter().collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probe = model.clone();
    let mut coordinates = Vec::new();
    let mut per_block = [0.0f64; 10];
    for block in 0..BLOCK_NAMES.len() {
        let (rows, cols) = {
            let b = model.params.blocks()[block];
            (b.rows, b.cols)
        };
        for _ in 0..COORDS_PER_BLOCK {
            let row = match block {
                0 if !word_rows.is_empty() => word_rows[rng.gen_range(0..word_rows.len())],
                1 if !affix_rows.is_empty() => affix_rows[rng.gen_range(0..affix_rows.len())],
                _ => rng.gen_range(0..rows),
            };
            let col = rng.gen_range(0..cols);
            let idx = row * cols + col;
            let original = model.params.blocks()[block].data[idx];
            probe.params.blocks_mut()[block].data[idx] = original + epsilon;
            let plus = loss_of(&probe, sentence, tags)?;
            probe.params.blocks_mut()[block].data[idx] = original - epsilon;
            let minus = loss_of(&probe, sentence, tags)?;
            probe.params.blocks_mut()[block].data[idx] = original;
            let check = CoordinateCheck {
                block,
                row,
                col,
                analytic: grad.get(block, row, col),
                numeric: (plus - minus) / (2.0 * epsilon),
            };
            per_block[block] = per_block[block].max(check.relative_error());
            coordinates.push(check);
        }
    }
    let max_relative_error = per_block.iter().copied().fold(0.0, f64::max);
    Ok(GradCheckReport { max_relative_error, per_block, coordinates })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus_io::{TagSet, Vocabulary};
    use crate::tagger::{Params, TaggerConfig};

    fn model(seed: u64) -> TaggerModel<f64> {
        let cfg = TaggerConfig { word_embedding_size: 5, affix_embedding_size: 4, hidden_nodes: 6, ..TaggerConfig::default() };
        let words = Vocabulary::build(["x", "y", "z"], 1).unwrap();
        let affixes = Vocabulary::build(["x^", "^x", "y^", "^y", "z^"], 1).unwrap();
        let mut m = TaggerModel::zeros(cfg, words, affixes, TagSet::upos()).unwrap();
        m.params = Params::random(&m.config, m.words.len(), m.affixes.len(), 17, seed);
        // spread embeddings and biases so every block has a sizable gradient
        for b in m.params.blocks_mut() {
            for (k, x) in b.data.iter_mut().enumerate() {
                *x += 0.3 * ((k as f64 + seed as f64) * 0.77).sin();
            }
        }
        m
    }

    fn sentence() -> Vec<FeatureVector> {
        vec![
            FeatureVector { word: 2, affixes: vec![2, 3] },
            FeatureVector { word: 4, affixes: vec![5, 6] },
            FeatureVector { word: 1, affixes: vec![4, 1] },
            FeatureVector { word: 3, affixes: vec![] },
        ]
    }

    #[test]
    fn analytic_matches_numeric() {
        let tags = [Some(TagId(3)), None, Some(TagId(16)), Some(TagId(0))];
        let r = gradient_check(&model(7), &sentence(), &tags, 1e-5, 1).unwrap();
        assert_eq!(r.coordinates.len(), 10 * COORDS_PER_BLOCK);
        assert!(r.max_relative_error < 1e-4, "{:?} worst {}", r.per_block, r.worst_block());
    }

    #[test]
    fn all_null_gradients_are_exactly_zero() {
        let r = gradient_check(&model(2), &sentence(), &[None; 4], 1e-5, 3).unwrap();
        assert!(r.coordinates.iter().all(|c| c.analytic == 0.0 && c.numeric == 0.0));
        assert_eq!(r.max_relative_error, 0.0);
    }

    #[test]
    fn non_positive_epsilon_rejected() {
        assert!(gradient_check(&model(1), &sentence(), &[None; 4], 0.0, 0).is_err());
        assert!(gradient_check(&model(1), &sentence(), &[None; 4], -1e-5, 0).is_err());
    }
}
