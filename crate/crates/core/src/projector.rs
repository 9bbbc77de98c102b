//! Tag projection across alignment links, type-dictionary constraints and
//! training-sentence selection.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::aligner::Alignment;
use crate::corpus_io::{parse_conllu, PairId, ParallelPair, TagId, TagSet, TaggedSentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedSentence {
    pub pair_id: PairId,
    pub sentence: TaggedSentence,
    /// Fraction of tokens carrying a tag.
    pub coverage: f64,
    /// Mean posterior of the links that produced tags; 0 when none did.
    pub avg_link_prob: f64,
    pub source_language: String,
}

impl ProjectedSentence {
    pub fn new(pair_id: PairId, sentence: TaggedSentence, avg_link_prob: f64, source_language: &str) -> Self {
        let mut s = ProjectedSentence {
            pair_id,
            sentence,
            coverage: 0.0,
            avg_link_prob,
            source_language: source_language.to_string(),
        };
        s.recompute_coverage();
        s
    }

    pub fn recompute_coverage(&mut self) {
        self.coverage = self.sentence.tagged_count() as f64 / self.sentence.len() as f64;
    }
}

/// Copy source tags to aligned target tokens. A target token with several
/// links takes the tag of the most probable one (ties: smaller source index);
/// unlinked tokens stay NULL.
pub fn project_tokens(pair: &ParallelPair, alignment: &Alignment, source_language: &str) -> Result<ProjectedSentence> {
    if alignment.pair_id != pair.id {
        return Err(Error::PairMismatch(pair.id, alignment.pair_id));
    }
    alignment.check_bounds(pair.source.len(), pair.target.len())?;
    let mut chosen: Vec<Option<(usize, f64)>> = vec![None; pair.target.len()];
    for link in &alignment.links {
        let slot = &mut chosen[link.tgt];
        let better = match *slot {
            None => true,
            Some((src, p)) => link.prob > p || (link.prob == p && link.src < src),
        };
        if better {
            *slot = Some((link.src, link.prob));
        }
    }
    let mut sentence = pair.target.untagged();
    let mut used = 0usize;
    let mut prob_sum = 0.0;
    for (tok, choice) in sentence.tokens.iter_mut().zip(&chosen) {
        if let Some((src, p)) = *choice {
            if let Some(tag) = pair.source.tokens[src].tag {
                tok.tag = Some(tag);
                used += 1;
                prob_sum += p;
            }
        }
    }
    let avg = if used == 0 { 0.0 } else { prob_sum / used as f64 };
    Ok(ProjectedSentence::new(pair.id, sentence, avg, source_language))
}

/// Per-form tag counts over a projected corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDictionary {
    counts: HashMap<String, Vec<u64>>,
    n_tags: usize,
    min_relative_freq: f64,
}

impl TypeDictionary {
    pub fn build(corpus: &[ProjectedSentence], n_tags: usize, min_relative_freq: f64) -> Result<Self> {
        if !(min_relative_freq > 0.0 && min_relative_freq <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "min_relative_freq {min_relative_freq} outside (0,1]"
            )));
        }
        let count_chunk = |chunk: &[ProjectedSentence]| {
            let mut m: HashMap<String, Vec<u64>> = HashMap::new();
            for s in chunk {
                for tok in &s.sentence.tokens {
                    if let Some(tag) = tok.tag {
                        m.entry(tok.form.clone()).or_insert_with(|| vec![0; n_tags])[tag.index()] += 1;
                    }
                }
            }
            m
        };
        let counts = corpus
            .par_chunks(512)
            .map(count_chunk)
            .reduce(HashMap::new, |mut a, b| {
                for (form, v) in b {
                    let slot = a.entry(form).or_insert_with(|| vec![0; n_tags]);
                    for (x, y) in slot.iter_mut().zip(v) {
                        *x += y;
                    }
                }
                a
            });
        Ok(TypeDictionary { counts, n_tags, min_relative_freq })
    }

    pub fn counts(&self, form: &str) -> Option<&[u64]> {
        self.counts.get(form).map(Vec::as_slice)
    }

    /// Tags whose relative frequency for `form` reaches the threshold; every
    /// tag when the form was never seen with a tag.
    pub fn allowed(&self, form: &str) -> Vec<TagId> {
        let all = || (0..self.n_tags).map(|i| TagId(i as u16)).collect();
        let Some(counts) = self.counts.get(form) else {
            return all();
        };
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return all();
        }
        counts
            .iter()
            .enumerate()
            .filter(|&(_, &c)| c as f64 / total as f64 >= self.min_relative_freq)
            .map(|(i, _)| TagId(i as u16))
            .collect()
    }

    /// `form<TAB>TAG:count,TAG:count` per line, sorted by form.
    pub fn to_tsv(&self, tagset: &TagSet) -> String {
        let sorted: BTreeMap<&String, &Vec<u64>> = self.counts.iter().collect();
        let mut out = String::new();
        for (form, counts) in sorted {
            let cells: Vec<String> = counts
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(i, c)| format!("{}:{}", tagset.symbol_of(TagId(i as u16)), c))
                .collect();
            let _ = writeln!(out, "{}\t{}", form, cells.join(","));
        }
        out
    }
}

/// Keep allowed tags, repair to the unique allowed tag, otherwise drop to NULL.
pub fn apply_type_constraints(s: &ProjectedSentence, dict: &TypeDictionary) -> ProjectedSentence {
    let mut out = s.clone();
    for tok in &mut out.sentence.tokens {
        let Some(tag) = tok.tag else { continue };
        let allowed = dict.allowed(&tok.form);
        if allowed.contains(&tag) {
            continue;
        }
        tok.tag = if allowed.len() == 1 { Some(allowed[0]) } else { None };
    }
    out.recompute_coverage();
    out
}

/// Sentences with `coverage >= min_coverage`, by descending average link
/// probability (ties by pair id), truncated to `top_k` when given.
pub fn select_training_sentences(
    corpus: &[ProjectedSentence],
    min_coverage: f64,
    top_k: Option<usize>,
) -> Result<Vec<ProjectedSentence>> {
    if !(0.0..=1.0).contains(&min_coverage) {
        return Err(Error::InvalidArgument(format!("min_coverage {min_coverage} outside [0,1]")));
    }
    if top_k == Some(0) {
        return Err(Error::InvalidArgument("top_k must be >= 1".into()));
    }
    let mut kept: Vec<ProjectedSentence> = corpus.iter().filter(|s| s.coverage >= min_coverage).cloned().collect();
    kept.sort_by(|a, b| b.avg_link_prob.total_cmp(&a.avg_link_prob).then(a.pair_id.cmp(&b.pair_id)));
    if let Some(k) = top_k {
        kept.truncate(k);
    }
    Ok(kept)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub min_relative_freq: f64,
    pub min_coverage: f64,
    pub top_k: Option<usize>,
}

impl Default for ProjectConfig {
    fn default() -> Self {
        ProjectConfig { min_relative_freq: 0.2, min_coverage: 0.75, top_k: None }
    }
}

#[derive(Debug, Clone)]
pub struct ProjectionOutcome {
    /// Every pair after token projection and type constraints, in pair order.
    pub constrained: Vec<ProjectedSentence>,
    pub selected: Vec<ProjectedSentence>,
    pub dictionary: TypeDictionary,
}

pub fn project_corpus(
    pairs: &[ParallelPair],
    alignments: &[Alignment],
    source_language: &str,
    n_tags: usize,
    cfg: &ProjectConfig,
) -> Result<ProjectionOutcome> {
    if pairs.len() != alignments.len() {
        return Err(Error::Contract(format!(
            "{} pairs but {} alignments",
            pairs.len(),
            alignments.len()
        )));
    }
    let projected = pairs
        .par_iter()
        .zip(alignments)
        .map(|(p, a)| project_tokens(p, a, source_language))
        .collect::<Result<Vec<_>>>()?;
    let dictionary = TypeDictionary::build(&projected, n_tags, cfg.min_relative_freq)?;
    let constrained: Vec<ProjectedSentence> =
        projected.par_iter().map(|s| apply_type_constraints(s, &dictionary)).collect();
    let selected = select_training_sentences(&constrained, cfg.min_coverage, cfg.top_k)?;
    Ok(ProjectionOutcome { constrained, selected, dictionary })
}

/// Sidecar lines `pair_id<TAB>coverage<TAB>avg_link_prob<TAB>source_language`.
pub fn write_metadata(corpus: &[ProjectedSentence]) -> String {
    let mut out = String::new();
    for s in corpus {
        let _ = writeln!(out, "{}\t{}\t{}\t{}", s.pair_id, s.coverage, s.avg_link_prob, s.source_language);
    }
    out
}

/// Rebuild a projected corpus from its CoNLL-U file and metadata sidecar.
pub fn read_projected(conllu: &str, metadata: &str, tagset: &TagSet) -> Result<Vec<ProjectedSentence>> {
    let sentences = parse_conllu(conllu, tagset)?;
    let rows: Vec<&str> = metadata.lines().filter(|l| !l.is_empty()).collect();
    if rows.len() != sentences.len() {
        return Err(Error::Contract(format!(
            "{} sentences but {} metadata rows",
            sentences.len(),
            rows.len()
        )));
    }
    sentences
        .into_iter()
        .zip(rows)
        .enumerate()
        .map(|(n, (sentence, row))| {
            let bad = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 4 {
                return Err(bad("expected pair_id<TAB>coverage<TAB>avg_link_prob<TAB>source_language"));
            }
            let pair_id = cols[0].parse().map_err(|_| bad("bad pair id"))?;
            let avg: f64 = cols[2].parse().map_err(|_| bad("bad avg_link_prob"))?;
            let s = ProjectedSentence::new(pair_id, sentence, avg, cols[3]);
            let stated: f64 = cols[1].parse().map_err(|_| bad("bad coverage"))?;
            if stated != s.coverage {
                return Err(bad("coverage does not match the sentence's tags"));
            }
            Ok(s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aligner::{AlignmentLink, Direction};
    use crate::corpus_io::{write_conllu, Token};
    use proptest::prelude::*;

    fn tag(sym: &str) -> Option<TagId> {
        TagSet::upos().index_of(sym)
    }

    fn pair(src: &[(&str, &str)], tgt: &[&str]) -> ParallelPair {
        let source = TaggedSentence {
            tokens: src.iter().map(|(f, t)| Token { form: (*f).into(), tag: tag(t) }).collect(),
        };
        ParallelPair::new(1, source, TaggedSentence::from_forms(tgt).unwrap()).unwrap()
    }

    fn align(links: &[(usize, usize, f64)]) -> Alignment {
        let links = links.iter().map(|&(src, tgt, prob)| AlignmentLink { src, tgt, prob }).collect();
        Alignment::new(1, links, Direction::Symmetrized).unwrap()
    }

    fn projected(form_tags: &[(&str, Option<TagId>)], id: PairId, avg: f64) -> ProjectedSentence {
        let sentence = TaggedSentence {
            tokens: form_tags.iter().map(|(f, t)| Token { form: (*f).into(), tag: *t }).collect(),
        };
        ProjectedSentence::new(id, sentence, avg, "en")
    }

    #[test]
    fn crossing_links() {
        let p = pair(&[("house", "NOUN"), ("runs", "VERB")], &["corre", "casa"]);
        let s = project_tokens(&p, &align(&[(0, 1, 0.9), (1, 0, 0.8)]), "en").unwrap();
        assert_eq!(s.sentence.tags(), vec![tag("VERB"), tag("NOUN")]);
        assert_eq!(s.coverage, 1.0);
        assert!((s.avg_link_prob - 0.85).abs() < 1e-15);
    }

    #[test]
    fn no_links_all_null() {
        let p = pair(&[("house", "NOUN")], &["casa", "x"]);
        let s = project_tokens(&p, &align(&[]), "en").unwrap();
        assert_eq!(s.sentence.tags(), vec![None, None]);
        assert_eq!(s.coverage, 0.0);
        assert_eq!(s.avg_link_prob, 0.0);
    }

    #[test]
    fn many_to_one_takes_most_probable() {
        let p = pair(&[("house", "NOUN"), ("runs", "VERB")], &["casa"]);
        let s = project_tokens(&p, &align(&[(0, 0, 0.9), (1, 0, 0.3)]), "en").unwrap();
        assert_eq!(s.sentence.tags(), vec![tag("NOUN")]);
        assert!((s.avg_link_prob - 0.9).abs() < 1e-15);
        let s = project_tokens(&p, &align(&[(0, 0, 0.5), (1, 0, 0.5)]), "en").unwrap();
        assert_eq!(s.sentence.tags(), vec![tag("NOUN")]);
    }

    #[test]
    fn out_of_bounds_link_is_rejected() {
        let p = pair(&[("house", "NOUN")], &["casa"]);
        assert!(project_tokens(&p, &align(&[(0, 3, 0.9)]), "en").is_err());
    }

    fn casa_corpus() -> Vec<ProjectedSentence> {
        let mut corpus: Vec<_> = (0..9).map(|i| projected(&[("casa", tag("NOUN"))], i, 0.5)).collect();
        corpus.push(projected(&[("casa", tag("VERB"))], 9, 0.5));
        corpus.push(projected(&[("bela", tag("ADJ"))], 10, 0.5));
        corpus
    }

    #[test]
    fn type_dictionary_thresholds() {
        let n = TagSet::upos().len();
        let d = TypeDictionary::build(&casa_corpus(), n, 0.2).unwrap();
        assert_eq!(d.allowed("casa"), vec![tag("NOUN").unwrap()]);
        let d1 = TypeDictionary::build(&casa_corpus(), n, 1.0).unwrap();
        assert_eq!(d1.allowed("bela"), vec![tag("ADJ").unwrap()]);
        assert_eq!(d.allowed("unseen").len(), n);
        assert!(TypeDictionary::build(&[], n, 0.0).is_err());
        assert!(TypeDictionary::build(&[], n, 1.5).is_err());
    }

    #[test]
    fn type_constraint_rules() {
        let n = TagSet::upos().len();
        let d = TypeDictionary::build(&casa_corpus(), n, 0.2).unwrap();
        let verb = projected(&[("casa", tag("VERB"))], 0, 0.5);
        assert_eq!(apply_type_constraints(&verb, &d).sentence.tags(), vec![tag("NOUN")]);
        let noun = projected(&[("casa", tag("NOUN"))], 0, 0.5);
        assert_eq!(apply_type_constraints(&noun, &d), noun);

        let mut ambiguous: Vec<_> = (0..5).map(|i| projected(&[("w", tag("NOUN"))], i, 0.5)).collect();
        ambiguous.extend((0..5).map(|i| projected(&[("w", tag("VERB"))], i, 0.5)));
        let d2 = TypeDictionary::build(&ambiguous, n, 0.2).unwrap();
        let adj = projected(&[("w", tag("ADJ")), ("z", None)], 0, 0.5);
        let out = apply_type_constraints(&adj, &d2);
        assert_eq!(out.sentence.tags(), vec![None, None]);
        assert_eq!(out.coverage, 0.0);
    }

    #[test]
    fn selection_rules() {
        let a = projected(&[("a", tag("NOUN")), ("b", None)], 1, 0.9);
        let b = projected(&[("a", tag("NOUN")), ("b", tag("NOUN")), ("c", tag("NOUN")), ("d", None)], 2, 0.4);
        let c = projected(&[("a", tag("NOUN"))], 3, 0.4);
        let corpus = vec![a.clone(), b.clone(), c.clone()];
        let out = select_training_sentences(&corpus, 0.75, None).unwrap();
        assert_eq!(out.iter().map(|s| s.pair_id).collect::<Vec<_>>(), vec![2, 3]);
        let all = select_training_sentences(&corpus, 0.0, Some(3)).unwrap();
        assert_eq!(all.iter().map(|s| s.pair_id).collect::<Vec<_>>(), vec![1, 2, 3]);
        let top = select_training_sentences(&corpus, 0.0, Some(1)).unwrap();
        assert_eq!(top, vec![a]);
        assert!(select_training_sentences(&corpus, 0.0, Some(0)).is_err());
        assert!(select_training_sentences(&corpus, 1.5, None).is_err());
    }

    #[test]
    fn metadata_round_trip() {
        let t = TagSet::upos();
        let corpus = vec![
            projected(&[("a", tag("NOUN")), ("b", None), ("c", tag("VERB"))], 4, 0.1 + 0.2),
            projected(&[("z", None)], 9, 0.0),
        ];
        let sentences: Vec<_> = corpus.iter().map(|s| s.sentence.clone()).collect();
        let back = read_projected(&write_conllu(&sentences, &t), &write_metadata(&corpus), &t).unwrap();
        assert_eq!(back, corpus);
    }

    fn arb_corpus() -> impl Strategy<Value = Vec<ProjectedSentence>> {
        let tok = (0usize..4, proptest::option::of(0u16..4));
        let sent = proptest::collection::vec(tok, 1..6);
        proptest::collection::vec(sent, 1..30).prop_map(|sents| {
            sents
                .into_iter()
                .enumerate()
                .map(|(i, toks)| {
                    let sentence = TaggedSentence {
                        tokens: toks
                            .into_iter()
                            .map(|(f, t)| Token { form: format!("w{f}"), tag: t.map(TagId) })
                            .collect(),
                    };
                    ProjectedSentence::new(i as PairId, sentence, (i % 3) as f64 / 3.0, "en")
                })
                .collect()
        })
    }

    fn distinct_tags_per_form(corpus: &[ProjectedSentence]) -> HashMap<String, usize> {
        let mut seen: HashMap<String, std::collections::BTreeSet<TagId>> = HashMap::new();
        for s in corpus {
            for t in &s.sentence.tokens {
                if let Some(tag) = t.tag {
                    seen.entry(t.form.clone()).or_default().insert(tag);
                }
            }
        }
        seen.into_iter().map(|(f, s)| (f, s.len())).collect()
    }

    proptest! {
        #[test]
        fn constraints_never_add_tag_variety(corpus in arb_corpus(), thr in 0.05f64..=1.0) {
            let d = TypeDictionary::build(&corpus, 4, thr).unwrap();
            let out: Vec<_> = corpus.iter().map(|s| apply_type_constraints(s, &d)).collect();
            let before = distinct_tags_per_form(&corpus);
            for (form, n) in distinct_tags_per_form(&out) {
                prop_assert!(n <= before[&form]);
            }
            for s in &out {
                prop_assert_eq!(s.coverage, s.sentence.tagged_count() as f64 / s.sentence.len() as f64);
            }
        }

        #[test]
        fn selection_is_ordered_subset(corpus in arb_corpus(), min in 0.0f64..=1.0) {
            let out = select_training_sentences(&corpus, min, None).unwrap();
            for s in &out {
                prop_assert!(corpus.contains(s));
                prop_assert!(s.coverage >= min);
            }
            for w in out.windows(2) {
                prop_assert!(w[0].avg_link_prob > w[1].avg_link_prob
                    || (w[0].avg_link_prob == w[1].avg_link_prob && w[0].pair_id < w[1].pair_id));
            }
        }
    }
}
