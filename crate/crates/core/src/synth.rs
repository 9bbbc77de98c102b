//! Seeded synthetic parallel corpora with known alignments and tags.
//!
//! A sentence is first drawn as a sequence of concepts. Each concept has one
//! tag, a source form per language (`{lang}{id}`) and `ambiguity` target forms
//! (`w{id}_{TAG}` with suffix coding, `w{id}` without). Target order follows
//! the concept order; source order is perturbed by adjacent swaps and source
//! tokens may be dropped, leaving their target token without a gold link.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::aligner::{Alignment, AlignmentLink, Direction};
use crate::corpus_io::{PairId, ParallelPair, TagId, TagSet, TaggedSentence};
use crate::error::{Error, Result};
use crate::multisource::{ManifestGroup, RenderingGroup};
use crate::projector::ProjectedSentence;

/// Default relative tag frequencies.
pub const DEFAULT_TAG_WEIGHTS: [(&str, f64); 12] = [
    ("NOUN", 0.22),
    ("VERB", 0.14),
    ("ADP", 0.10),
    ("DET", 0.10),
    ("PUNCT", 0.10),
    ("ADJ", 0.08),
    ("PRON", 0.06),
    ("ADV", 0.05),
    ("PROPN", 0.05),
    ("CCONJ", 0.04),
    ("NUM", 0.03),
    ("AUX", 0.03),
];

const DOMAIN_CONCEPTS: u64 = 0;
const DOMAIN_LEXICON: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    /// Number of concepts, which is also each source language's vocabulary size.
    pub vocab_size: usize,
    pub target_vocab_size: usize,
    pub tag_weights: Vec<(String, f64)>,
    /// Target forms per concept; 1 gives a bijective lexicon.
    pub ambiguity: usize,
    pub swap_prob: f64,
    pub drop_prob: f64,
    pub num_sentences: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub suffix_coding: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            seed: 42,
            vocab_size: 500,
            target_vocab_size: 500,
            tag_weights: DEFAULT_TAG_WEIGHTS.iter().map(|&(t, w)| (t.to_string(), w)).collect(),
            ambiguity: 1,
            swap_prob: 0.0,
            drop_prob: 0.0,
            num_sentences: 1000,
            min_len: 5,
            max_len: 15,
            suffix_coding: true,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("{name} {p} outside [0,1]")))
    }
}

impl SynthSpec {
    pub fn validate(&self, tagset: &TagSet) -> Result<()> {
        check_prob("swap_prob", self.swap_prob)?;
        check_prob("drop_prob", self.drop_prob)?;
        if self.vocab_size == 0 || self.ambiguity == 0 {
            return Err(Error::InvalidArgument("vocab_size and ambiguity must be >= 1".into()));
        }
        if self.target_vocab_size < self.vocab_size * self.ambiguity {
            return Err(Error::InvalidArgument(format!(
                "target vocabulary {} smaller than lexicon ({} concepts x {} forms)",
                self.target_vocab_size, self.vocab_size, self.ambiguity
            )));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(Error::InvalidArgument(format!(
                "sentence length range {}..={} is invalid",
                self.min_len, self.max_len
            )));
        }
        if self.tag_weights.is_empty() || self.tag_weights.iter().any(|(_, w)| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::InvalidArgument("tag weights must be non-empty, finite and non-negative".into()));
        }
        if self.tag_weights.iter().map(|(_, w)| w).sum::<f64>() <= 0.0 {
            return Err(Error::InvalidArgument("tag weights sum to zero".into()));
        }
        for (t, _) in &self.tag_weights {
            if tagset.index_of(t).is_none() {
                return Err(Error::InvalidArgument(format!("tag weight for unknown tag `{t}`")));
            }
        }
        Ok(())
    }
}

/// Independent generator stream for `(seed, domain, index)`.
fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ domain.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Tag-preserving concept lexicon.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub concept_tags: Vec<TagId>,
    /// `ambiguity` target forms per concept.
    pub target_forms: Vec<Vec<String>>,
    /// Tags that carry positive weight, in `tag_weights` order.
    pub tags_in_use: Vec<TagId>,
}

impl Lexicon {
    pub fn build(spec: &SynthSpec, tagset: &TagSet) -> Result<Self> {
        spec.validate(tagset)?;
        let weighted: Vec<(TagId, f64)> = spec
            .tag_weights
            .iter()
            .filter(|(_, w)| *w > 0.0)
            .map(|(t, w)| (tagset.index_of(t).expect("validated"), *w))
            .collect();
        let total: f64 = weighted.iter().map(|(_, w)| w).sum();
        // concepts are assigned to tags in contiguous blocks proportional to weight
        let mut concept_tags = Vec::with_capacity(spec.vocab_size);
        let mut acc = 0.0;
        for (k, &(tag, w)) in weighted.iter().enumerate() {
            acc += w;
            let end = if k + 1 == weighted.len() {
                spec.vocab_size
            } else {
                ((acc / total) * spec.vocab_size as f64).round() as usize
            };
            while concept_tags.len() < end.min(spec.vocab_size) {
                concept_tags.push(tag);
            }
        }
        let mut ids: Vec<usize> = (0..spec.target_vocab_size).collect();
        ids.shuffle(&mut stream(spec.seed, DOMAIN_LEXICON, 0));
        let target_forms = (0..spec.vocab_size)
            .map(|c| {
                let tag = tagset.symbol_of(concept_tags[c]);
                ids[c * spec.ambiguity..(c + 1) * spec.ambiguity]
                    .iter()
                    .map(|id| if spec.suffix_coding { format!("w{id}_{tag}") } else { format!("w{id}") })
                    .collect()
            })
            .collect();
        Ok(Lexicon { concept_tags, target_forms, tags_in_use: weighted.iter().map(|w| w.0).collect() })
    }

    pub fn source_form(lang: &str, concept: usize) -> String {
        format!("{lang}{concept}")
    }

    /// A tag in use other than `tag`, uniformly; `tag` itself if it is the only one.
    fn corrupt<R: Rng>(&self, tag: TagId, rng: &mut R) -> TagId {
        let others: Vec<TagId> = self.tags_in_use.iter().copied().filter(|&t| t != tag).collect();
        others.choose(rng).copied().unwrap_or(tag)
    }
}

fn concept_sentence(spec: &SynthSpec, index: usize) -> Vec<usize> {
    let mut rng = stream(spec.seed, DOMAIN_CONCEPTS, index as u64);
    let len = rng.gen_range(spec.min_len..=spec.max_len);
    (0..len).map(|_| rng.gen_range(0..spec.vocab_size)).collect()
}

fn target_sentence<R: Rng>(lex: &Lexicon, concepts: &[usize], rng: &mut R) -> Result<TaggedSentence> {
    let forms: Vec<&str> = concepts
        .iter()
        .map(|&c| {
            let v = &lex.target_forms[c];
            v[if v.len() == 1 { 0 } else { rng.gen_range(0..v.len()) }].as_str()
        })
        .collect();
    let tags: Vec<Option<TagId>> = concepts.iter().map(|&c| Some(lex.concept_tags[c])).collect();
    TaggedSentence::from_tagged(&forms, &tags)
}

/// One parallel pair for language `lang`. Returns the pair, its gold
/// alignment and the gold-tagged target.
fn render_pair(
    spec: &SynthSpec,
    lex: &Lexicon,
    lang: &str,
    lang_index: usize,
    sentence_index: usize,
    disagreement: f64,
) -> Result<(ParallelPair, Alignment, TaggedSentence)> {
    let concepts = concept_sentence(spec, sentence_index);
    let mut rng = stream(spec.seed, 1 + lang_index as u64, sentence_index as u64);
    let target = target_sentence(lex, &concepts, &mut rng)?;
    // source order: target positions after adjacent swaps, with drops
    let mut order: Vec<usize> = (0..concepts.len()).collect();
    let mut i = 0;
    while i + 1 < order.len() {
        if spec.swap_prob > 0.0 && rng.gen::<f64>() < spec.swap_prob {
            order.swap(i, i + 1);
            i += 2;
        } else {
            i += 1;
        }
    }
    let mut kept: Vec<usize> = order.into_iter().filter(|_| !(spec.drop_prob > 0.0 && rng.gen::<f64>() < spec.drop_prob)).collect();
    if kept.is_empty() {
        // keep one token so the source side is a valid sentence
        kept.push(rng.gen_range(0..concepts.len()));
    }
    let forms: Vec<String> = kept.iter().map(|&t| Lexicon::source_form(lang, concepts[t])).collect();
    let forms: Vec<&str> = forms.iter().map(String::as_str).collect();
    let tags: Vec<Option<TagId>> = kept
        .iter()
        .map(|&t| {
            let tag = lex.concept_tags[concepts[t]];
            Some(if disagreement > 0.0 && rng.gen::<f64>() < disagreement { lex.corrupt(tag, &mut rng) } else { tag })
        })
        .collect();
    let source = TaggedSentence::from_tagged(&forms, &tags)?;
    let id = sentence_index as PairId + 1;
    let links = kept.iter().enumerate().map(|(s, &t)| AlignmentLink { src: s, tgt: t, prob: 1.0 }).collect();
    let alignment = Alignment::new(id, links, Direction::Symmetrized)?;
    Ok((ParallelPair::new(id, source, target.untagged())?, alignment, target))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub language: String,
    pub pairs: Vec<ParallelPair>,
    pub gold_alignments: Vec<Alignment>,
    pub gold_target: Vec<TaggedSentence>,
}

fn corpus_for_language(
    spec: &SynthSpec,
    lex: &Lexicon,
    lang: &str,
    lang_index: usize,
    disagreement: f64,
) -> Result<SynthCorpus> {
    let rendered: Vec<_> = (0..spec.num_sentences)
        .into_par_iter()
        .map(|i| render_pair(spec, lex, lang, lang_index, i, disagreement))
        .collect::<Result<_>>()?;
    let mut out = SynthCorpus {
        language: lang.to_string(),
        pairs: Vec::with_capacity(rendered.len()),
        gold_alignments: Vec::with_capacity(rendered.len()),
        gold_target: Vec::with_capacity(rendered.len()),
    };
    for (p, a, t) in rendered {
        out.pairs.push(p);
        out.gold_alignments.push(a);
        out.gold_target.push(t);
    }
    Ok(out)
}

/// Single source language `src` with noise-free source tags.
pub fn generate(spec: &SynthSpec, tagset: &TagSet) -> Result<SynthCorpus> {
    let lex = Lexicon::build(spec, tagset)?;
    corpus_for_language(spec, &lex, "src", 0, 0.0)
}

/// Several source languages rendering the same concept sentences, plus a
/// held-out gold-tagged target test set.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiCorpus {
    pub languages: Vec<SynthCorpus>,
    /// Group `g` holds pair `g` of every language.
    pub manifest: Vec<ManifestGroup>,
    pub test: Vec<TaggedSentence>,
}

/// Source tags are corrupted independently with probability `disagreement`.
pub fn generate_multilingual(
    spec: &SynthSpec,
    tagset: &TagSet,
    languages: &[String],
    disagreement: f64,
    num_test: usize,
) -> Result<MultiCorpus> {
    check_prob("disagreement", disagreement)?;
    if languages.is_empty() {
        return Err(Error::InvalidArgument("at least one source language is required".into()));
    }
    for (i, l) in languages.iter().enumerate() {
        if l.is_empty() || l.contains(|c: char| c.is_whitespace() || c == ':') || languages[..i].contains(l) {
            return Err(Error::InvalidArgument(format!("invalid or repeated language name `{l}`")));
        }
    }
    let lex = Lexicon::build(spec, tagset)?;
    let corpora = languages
        .iter()
        .enumerate()
        .map(|(k, l)| corpus_for_language(spec, &lex, l, k, disagreement))
        .collect::<Result<Vec<_>>>()?;
    let manifest = (0..spec.num_sentences)
        .map(|i| ManifestGroup {
            group_id: format!("g{}", i + 1),
            renderings: languages.iter().map(|l| (l.clone(), i as PairId + 1)).collect(),
        })
        .collect();
    let test_domain = 1 + languages.len() as u64;
    let test = (spec.num_sentences..spec.num_sentences + num_test)
        .into_par_iter()
        .map(|i| target_sentence(&lex, &concept_sentence(spec, i), &mut stream(spec.seed, test_domain, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiCorpus { languages: corpora, manifest, test })
}

/// `spec.num_sentences` groups of `k` target renderings of one concept
/// sentence, each token's tag corrupted independently with probability
/// `disagreement`. The returned gold sentence has the forms of rendering 0.
pub fn make_rendering_group(
    spec: &SynthSpec,
    tagset: &TagSet,
    k: usize,
    disagreement: f64,
) -> Result<Vec<(RenderingGroup, TaggedSentence)>> {
    check_prob("disagreement", disagreement)?;
    if k == 0 {
        return Err(Error::InvalidArgument("a rendering group needs K >= 1".into()));
    }
    let lex = Lexicon::build(spec, tagset)?;
    (0..spec.num_sentences)
        .into_par_iter()
        .map(|i| {
            let concepts = concept_sentence(spec, i);
            let mut gold = None;
            let mut renderings = Vec::with_capacity(k);
            for r in 0..k {
                let mut rng = stream(spec.seed, 1 + r as u64, i as u64);
                let target = target_sentence(&lex, &concepts, &mut rng)?;
                let forms: Vec<&str> = target.forms().collect();
                let tags: Vec<Option<TagId>> = target
                    .tags()
                    .into_iter()
                    .map(|t| {
                        let t = t.expect("gold target is fully tagged");
                        Some(if disagreement > 0.0 && rng.gen::<f64>() < disagreement { lex.corrupt(t, &mut rng) } else { t })
                    })
                    .collect();
                let noisy = TaggedSentence::from_tagged(&forms, &tags)?;
                renderings.push(ProjectedSentence::new(i as PairId + 1, noisy, 1.0, &format!("r{r}")));
                gold.get_or_insert(target);
            }
            Ok((RenderingGroup::new(format!("g{}", i + 1), renderings)?, gold.expect("k >= 1")))
        })
        .collect()
}
