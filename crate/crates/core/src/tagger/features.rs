use serde::{Deserialize, Serialize};

use crate::corpus_io::{TaggedSentence, Vocabulary};

/// Word index plus prefix/suffix indices for one token.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureVector {
    pub word: u32,
    pub affixes: Vec<u32>,
}

/// Key used for the word-embedding lookup. Affixes keep the original case.
pub fn word_key(form: &str) -> String {
    form.to_lowercase()
}

/// Prefixes (`p^`) and suffixes (`^s`) of 1..=min(max_len, chars) characters.
pub fn affix_strings(form: &str, max_len: usize) -> Vec<String> {
    let chars: Vec<char> = form.chars().collect();
    let n = chars.len().min(max_len);
    let mut out = Vec::with_capacity(2 * n);
    for k in 1..=n {
        let prefix: String = chars[..k].iter().collect();
        out.push(format!("{prefix}^"));
    }
    for k in 1..=n {
        let suffix: String = chars[chars.len() - k..].iter().collect();
        out.push(format!("^{suffix}"));
    }
    out
}

pub fn extract_features(form: &str, vocab: &Vocabulary, affix_vocab: &Vocabulary, max_len: usize) -> FeatureVector {
    FeatureVector {
        word: vocab.get(&word_key(form)),
        affixes: affix_strings(form, max_len).iter().map(|a| affix_vocab.get(a)).collect(),
    }
}

pub fn sentence_features(
    sentence: &TaggedSentence,
    vocab: &Vocabulary,
    affix_vocab: &Vocabulary,
    max_len: usize,
) -> Vec<FeatureVector> {
    sentence.forms().map(|f| extract_features(f, vocab, affix_vocab, max_len)).collect()
}
