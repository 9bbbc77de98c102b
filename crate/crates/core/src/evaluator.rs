//! Tagging accuracy, per-tag and multi-category scores, density statistics
//! and Pearson correlation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::corpus_io::{TagId, TagSet, TaggedSentence, Vocabulary};
use crate::error::{Error, Result};
use crate::projector::ProjectedSentence;
use crate::tagger::word_key;

/// Tag pairs reported by default for multi-category words.
pub const DEFAULT_MULTICAT_PAIRS: [(&str, &str); 3] = [("VERB", "NOUN"), ("VERB", "ADJ"), ("NOUN", "ADJ")];

/// Key of the row covering every form with two or more gold tags.
pub const MULTICAT_ALL: &str = "All";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TagScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Same as recall: fraction of gold occurrences tagged correctly.
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum MulticatCell {
    /// No form in the gold data carries both tags.
    Absent,
    Scored { correct: usize, total: usize },
}

impl MulticatCell {
    pub fn accuracy(&self) -> Option<f64> {
        match *self {
            MulticatCell::Absent => None,
            MulticatCell::Scored { correct, total } => Some(correct as f64 / total as f64),
        }
    }

    pub fn support(&self) -> usize {
        match *self {
            MulticatCell::Absent => 0,
            MulticatCell::Scored { total, .. } => total,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub token_accuracy: f64,
    pub macro_f1: f64,
    /// One entry per tag in TagSet order.
    pub per_tag: Vec<(String, TagScore)>,
    /// Requested pairs in order, then [`MULTICAT_ALL`].
    pub multicat: Vec<(String, MulticatCell)>,
    pub token_count: usize,
    /// Fraction of scored tokens whose lowercased form is missing from the
    /// training vocabulary; `None` when no vocabulary was given.
    pub oov_rate: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EvalOptions {
    pub exclude_punct: bool,
}

/// Scored (form, gold, predicted) triples. Gold tokens without a tag are
/// skipped; a missing prediction counts as wrong.
fn scored_tokens<'a>(
    pred: &'a [TaggedSentence],
    gold: &'a [TaggedSentence],
    tagset: &TagSet,
    options: EvalOptions,
) -> Result<Vec<(&'a str, TagId, Option<TagId>)>> {
    if gold.is_empty() || pred.is_empty() {
        return Err(Error::InvalidArgument("nothing to evaluate".into()));
    }
    if pred.len() != gold.len() {
        return Err(Error::InvalidArgument(format!(
            "{} predicted sentences for {} gold sentences",
            pred.len(),
            gold.len()
        )));
    }
    for (i, (p, g)) in pred.iter().zip(gold).enumerate() {
        if p.len() != g.len() {
            return Err(Error::InvalidArgument(format!(
                "sentence {}: {} predicted tokens for {} gold tokens",
                i + 1,
                p.len(),
                g.len()
            )));
        }
    }
    let punct = tagset.index_of("PUNCT").filter(|_| options.exclude_punct);
    let mut out = Vec::new();
    for (p, g) in pred.iter().zip(gold) {
        for ((pt, gt), form) in p.tokens.iter().zip(&g.tokens).zip(g.forms()) {
            let Some(gold_tag) = gt.tag else { continue };
            if Some(gold_tag) == punct {
                continue;
            }
            out.push((form, gold_tag, pt.tag));
        }
    }
    Ok(out)
}

fn confusion_counts(tokens: &[(&str, TagId, Option<TagId>)], n_tags: usize) -> (usize, Vec<[usize; 3]>) {
    // per tag: [true positives, predicted, gold]
    tokens
        .par_chunks(4096)
        .map(|chunk| {
            let mut counts = vec![[0usize; 3]; n_tags];
            let mut hit = 0;
            for &(_, g, p) in chunk {
                counts[g.index()][2] += 1;
                if let Some(p) = p {
                    counts[p.index()][1] += 1;
                    if p == g {
                        counts[g.index()][0] += 1;
                        hit += 1;
                    }
                }
            }
            (hit, counts)
        })
        .reduce(
            || (0, vec![[0usize; 3]; n_tags]),
            |(ha, mut a), (hb, b)| {
                for (x, y) in a.iter_mut().zip(&b) {
                    for k in 0..3 {
                        x[k] += y[k];
                    }
                }
                (ha + hb, a)
            },
        )
}

/// Neumaier summation; the result is the rounded exact sum unless terms cancel.
fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        c += if sum.abs() >= x.abs() { (sum - t) + x } else { (x - t) + sum };
        sum = t;
    }
    sum + c
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Score predictions against gold with the default multi-category pairs.
pub fn score(
    pred: &[TaggedSentence],
    gold: &[TaggedSentence],
    tagset: &TagSet,
    options: EvalOptions,
    vocab: Option<&Vocabulary>,
) -> Result<EvalReport> {
    let tokens = scored_tokens(pred, gold, tagset, options)?;
    if tokens.is_empty() {
        return Err(Error::InvalidArgument("no gold-tagged tokens to evaluate".into()));
    }
    let (hit, counts) = confusion_counts(&tokens, tagset.len());
    let mut per_tag = Vec::with_capacity(tagset.len());
    let mut supported_f1 = Vec::with_capacity(tagset.len());
    for id in tagset.ids() {
        let [tp, predicted, support] = counts[id.index()];
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        // 2PR/(P+R) in counts: one rounding step
        let f1 = ratio(2 * tp, predicted + support);
        if support > 0 {
            supported_f1.push(f1);
        }
        per_tag.push((tagset.symbol_of(id).to_string(), TagScore { precision, recall, f1, support, accuracy: recall }));
    }
    let pairs: Vec<(TagId, TagId)> = DEFAULT_MULTICAT_PAIRS
        .iter()
        .filter_map(|&(a, b)| Some((tagset.index_of(a)?, tagset.index_of(b)?)))
        .collect();
    let oov_rate = vocab.map(|v| ratio(tokens.iter().filter(|t| !v.contains(&word_key(t.0))).count(), tokens.len()));
    Ok(EvalReport {
        token_accuracy: ratio(hit, tokens.len()),
        macro_f1: compensated_sum(&supported_f1) / supported_f1.len() as f64,
        per_tag,
        multicat: multicat_from_tokens(&tokens, &pairs, tagset),
        token_count: tokens.len(),
        oov_rate,
    })
}

/// Accuracy over every gold occurrence of forms that appear in gold with
/// both tags of a pair. Forms are compared exactly.
pub fn multicat_accuracy(
    pred: &[TaggedSentence],
    gold: &[TaggedSentence],
    pairs: &[(TagId, TagId)],
    tagset: &TagSet,
    options: EvalOptions,
) -> Result<Vec<(String, MulticatCell)>> {
    let tokens = scored_tokens(pred, gold, tagset, options)?;
    Ok(multicat_from_tokens(&tokens, pairs, tagset))
}

fn multicat_from_tokens(
    tokens: &[(&str, TagId, Option<TagId>)],
    pairs: &[(TagId, TagId)],
    tagset: &TagSet,
) -> Vec<(String, MulticatCell)> {
    let mut gold_tags: BTreeMap<&str, BTreeSet<TagId>> = BTreeMap::new();
    for &(form, g, _) in tokens {
        gold_tags.entry(form).or_default().insert(g);
    }
    let cell = |qualifies: &dyn Fn(&BTreeSet<TagId>) -> bool| {
        let (mut correct, mut total) = (0, 0);
        for &(form, g, p) in tokens {
            if qualifies(&gold_tags[form]) {
                total += 1;
                correct += usize::from(p == Some(g));
            }
        }
        if total == 0 {
            MulticatCell::Absent
        } else {
            MulticatCell::Scored { correct, total }
        }
    };
    let mut out: Vec<(String, MulticatCell)> = pairs
        .iter()
        .map(|&(a, b)| {
            let key = format!("{}&{}", tagset.symbol_of(a), tagset.symbol_of(b));
            (key, cell(&|s: &BTreeSet<TagId>| s.contains(&a) && s.contains(&b)))
        })
        .collect();
    out.push((MULTICAT_ALL.to_string(), cell(&|s: &BTreeSet<TagId>| s.len() >= 2)));
    out
}

/// Relative change in sentence count and in mean coverage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DensityStats {
    pub before_sentences: usize,
    pub after_sentences: usize,
    pub before_density: f64,
    pub after_density: f64,
    pub delta_examples: f64,
    pub delta_density: f64,
}

pub fn density_stats(before: &[ProjectedSentence], after: &[ProjectedSentence]) -> Result<DensityStats> {
    if before.is_empty() {
        return Err(Error::InvalidArgument("density statistics need a non-empty baseline".into()));
    }
    let mean = |xs: &[ProjectedSentence]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().map(|s| s.coverage).sum::<f64>() / xs.len() as f64
        }
    };
    let (bd, ad) = (mean(before), mean(after));
    let delta_density = if bd == 0.0 { 0.0 } else { (ad - bd) / bd };
    Ok(DensityStats {
        before_sentences: before.len(),
        after_sentences: after.len(),
        before_density: bd,
        after_density: ad,
        delta_examples: (after.len() as f64 - before.len() as f64) / before.len() as f64,
        delta_density,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from Student's t with n-2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Correlation> {
    let n = xs.len();
    if n != ys.len() {
        return Err(Error::InvalidArgument(format!("pearson on {} vs {} values", n, ys.len())));
    }
    if n < 3 {
        return Err(Error::InvalidArgument("pearson needs at least 3 points".into()));
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidArgument("pearson undefined for zero variance".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p_value = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::InvalidArgument(e.to_string()))?;
        (2.0 * dist.cdf(-t.abs())).min(1.0)
    };
    Ok(Correlation { r, p_value, n })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"))
}

impl EvalReport {
    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tokens    {}", self.token_count);
        let _ = writeln!(s, "accuracy  {:.4}", self.token_accuracy);
        let _ = writeln!(s, "macro_f1  {:.4}", self.macro_f1);
        if let Some(oov) = self.oov_rate {
            let _ = writeln!(s, "oov_rate  {oov:.4}");
        }
        let _ = writeln!(s, "\n{:<6} {:>9} {:>9} {:>9} {:>8}", "tag", "precision", "recall", "f1", "support");
        for (tag, t) in &self.per_tag {
            let _ = writeln!(s, "{:<6} {:>9.4} {:>9.4} {:>9.4} {:>8}", tag, t.precision, t.recall, t.f1, t.support);
        }
        let _ = writeln!(s, "\n{:<12} {:>9} {:>8}", "multicat", "accuracy", "support");
        for (key, cell) in &self.multicat {
            let _ = writeln!(s, "{:<12} {:>9} {:>8}", key, fmt_opt(cell.accuracy()), cell.support());
        }
        s
    }

    /// One `key=value` per line; per-tag keys are `tag.<TAG>.<field>`.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "token_count={}", self.token_count);
        let _ = writeln!(s, "token_accuracy={}", self.token_accuracy);
        let _ = writeln!(s, "macro_f1={}", self.macro_f1);
        if let Some(oov) = self.oov_rate {
            let _ = writeln!(s, "oov_rate={oov}");
        }
        for (tag, t) in &self.per_tag {
            let _ = writeln!(s, "tag.{tag}.precision={}", t.precision);
            let _ = writeln!(s, "tag.{tag}.recall={}", t.recall);
            let _ = writeln!(s, "tag.{tag}.f1={}", t.f1);
            let _ = writeln!(s, "tag.{tag}.support={}", t.support);
        }
        for (key, cell) in &self.multicat {
            match cell.accuracy() {
                Some(a) => {
                    let _ = writeln!(s, "multicat.{key}.accuracy={a}");
                    let _ = writeln!(s, "multicat.{key}.support={}", cell.support());
                }
                None => {
                    let _ = writeln!(s, "multicat.{key}.accuracy=absent");
                }
            }
        }
        s
    }

    /// Tab-separated per-tag table with a header row.
    pub fn per_tag_tsv(&self) -> String {
        let mut s = String::from("tag\tprecision\trecall\tf1\tsupport\n");
        for (tag, t) in &self.per_tag {
            let _ = writeln!(s, "{tag}\t{}\t{}\t{}\t{}", t.precision, t.recall, t.f1, t.support);
        }
        s
    }

    pub fn tag(&self, symbol: &str) -> Option<&TagScore> {
        self.per_tag.iter().find(|(t, _)| t == symbol).map(|(_, s)| s)
    }

    pub fn multicat(&self, key: &str) -> Option<&MulticatCell> {
        self.multicat.iter().find(|(k, _)| k == key).map(|(_, c)| c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sent(ts: &TagSet, words: &[(&str, &str)]) -> TaggedSentence {
        let forms: Vec<&str> = words.iter().map(|w| w.0).collect();
        let tags: Vec<Option<TagId>> = words.iter().map(|w| ts.index_of(w.1)).collect();
        TaggedSentence::from_tagged(&forms, &tags).unwrap()
    }

    #[test]
    fn confusion_by_hand() {
        let ts = TagSet::upos();
        let gold = [sent(&ts, &[("a", "NOUN"), ("b", "VERB")])];
        let pred = [sent(&ts, &[("a", "NOUN"), ("b", "NOUN")])];
        let r = score(&pred, &gold, &ts, EvalOptions::default(), None).unwrap();
        assert_eq!(r.token_accuracy, 0.5);
        let noun = r.tag("NOUN").unwrap();
        assert_eq!((noun.recall, noun.precision, noun.support), (1.0, 0.5, 1));
        assert_eq!(r.tag("VERB").unwrap().recall, 0.0);
        // macro over NOUN (f1 2/3) and VERB (0)
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.per_tag.len(), 17);
        assert_eq!(r.per_tag[0].0, "ADJ");
    }

    #[test]
    fn macro_f1_of_simple_fractions_is_exact() {
        let ts = TagSet::upos();
        let gold = ["NOUN", "NOUN", "NOUN", "NOUN", "VERB", "VERB", "VERB", "ADJ", "ADJ", "DET"];
        let pred = ["NOUN", "NOUN", "NOUN", "VERB", "VERB", "VERB", "NOUN", "ADJ", "NOUN", "DET"];
        let pair = |tags: &[&str]| sent(&ts, &tags.iter().map(|t| ("w", *t)).collect::<Vec<_>>());
        let r = score(&[pair(&pred)], &[pair(&gold)], &ts, EvalOptions::default(), None).unwrap();
        // f1: NOUN 2/3, VERB 2/3, ADJ 2/3, DET 1
        assert_eq!(r.macro_f1, 0.75);
        assert_eq!(compensated_sum(&[0.1; 10]), 1.0);
    }

    #[test]
    fn perfect_and_errors() {
        let ts = TagSet::upos();
        let gold = [sent(&ts, &[("a", "NOUN"), (".", "PUNCT")])];
        let r = score(&gold, &gold, &ts, EvalOptions::default(), None).unwrap();
        assert_eq!((r.token_accuracy, r.macro_f1, r.token_count), (1.0, 1.0, 2));
        assert!(score(&[], &[], &ts, EvalOptions::default(), None).is_err());
        let short = [sent(&ts, &[("a", "NOUN")])];
        let err = score(&short, &gold, &ts, EvalOptions::default(), None).unwrap_err();
        assert!(err.to_string().contains("sentence 1"));
        let wrong_punct = [sent(&ts, &[("a", "NOUN"), (".", "X")])];
        let r = score(&wrong_punct, &gold, &ts, EvalOptions { exclude_punct: true }, None).unwrap();
        assert_eq!((r.token_accuracy, r.token_count), (1.0, 1));
    }

    #[test]
    fn oov_rate_uses_lowercased_forms() {
        let ts = TagSet::upos();
        let gold = [sent(&ts, &[("Casa", "NOUN"), ("vai", "VERB")])];
        let vocab = Vocabulary::build(["casa"], 1).unwrap();
        let r = score(&gold, &gold, &ts, EvalOptions::default(), Some(&vocab)).unwrap();
        assert_eq!(r.oov_rate, Some(0.5));
    }

    #[test]
    fn multicat_by_hand() {
        let ts = TagSet::upos();
        let gold = [
            sent(&ts, &[("run", "NOUN"), ("run", "VERB"), ("fast", "ADV")]),
            sent(&ts, &[("run", "NOUN"), ("red", "ADJ")]),
        ];
        let pred = [
            sent(&ts, &[("run", "NOUN"), ("run", "VERB"), ("fast", "ADV")]),
            sent(&ts, &[("run", "VERB"), ("red", "ADJ")]),
        ];
        let n = ts.index_of("NOUN").unwrap();
        let v = ts.index_of("VERB").unwrap();
        let a = ts.index_of("ADJ").unwrap();
        let m = multicat_accuracy(&pred, &gold, &[(v, n), (n, a)], &ts, EvalOptions::default()).unwrap();
        assert_eq!(m[0], ("VERB&NOUN".into(), MulticatCell::Scored { correct: 2, total: 3 }));
        assert_eq!(m[1], ("NOUN&ADJ".into(), MulticatCell::Absent));
        assert_eq!(m[2].0, MULTICAT_ALL);
        assert_eq!(m[2].1.support(), 3);
        let r = score(&pred, &gold, &ts, EvalOptions::default(), None).unwrap();
        assert_eq!(r.multicat("VERB&ADJ"), Some(&MulticatCell::Absent));
        assert!(r.to_key_values().contains("multicat.VERB&ADJ.accuracy=absent"));
        assert!(r.to_table().contains("VERB&NOUN"));
    }

    fn projected(n: usize, tagged_of_ten: usize) -> Vec<ProjectedSentence> {
        let ts = TagSet::upos();
        (0..n)
            .map(|i| {
                let forms = vec!["w"; 10];
                let tags: Vec<Option<TagId>> =
                    (0..10).map(|k| if k < tagged_of_ten { ts.index_of("NOUN") } else { None }).collect();
                let s = TaggedSentence::from_tagged(&forms, &tags).unwrap();
                ProjectedSentence::new(i as u64 + 1, s, 0.5, "xx")
            })
            .collect()
    }

    #[test]
    fn density_arithmetic() {
        let before = projected(100, 8);
        let d = density_stats(&before, &before).unwrap();
        assert_eq!((d.delta_examples, d.delta_density), (0.0, 0.0));
        // 0.8 -> 0.88 via a mix of 9/10 and 8/10 sentences: 88 * 0.9 + 22 * 0.8 = 96.8 / 110 = 0.88
        let mut after = projected(88, 9);
        after.extend(projected(22, 8));
        let d = density_stats(&before, &after).unwrap();
        assert!((d.delta_examples - 0.10).abs() < 1e-12);
        assert!((d.delta_density - 0.10).abs() < 1e-12);
        let d = density_stats(&before, &before[..50]).unwrap();
        assert_eq!(d.delta_examples, -0.5);
        assert!(density_stats(&[], &before).is_err());
    }

    #[test]
    fn pearson_reference_values() {
        let c = pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!((c.r, c.p_value), (1.0, 0.0));
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap().r, -1.0);
        // scipy.stats.pearsonr([1,2,3,4,5],[2,1,4,3,5]) = (0.8, 0.10408803866182799)
        let c = pearson(&[1.0, 2.0, 3.0, 4.0, 5.0], &[2.0, 1.0, 4.0, 3.0, 5.0]).unwrap();
        assert!((c.r - 0.8).abs() < 1e-12);
        assert!((c.p_value - 0.10408803866182799).abs() < 1e-9);
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    proptest! {
        #[test]
        fn pearson_affine_invariant(xs in proptest::collection::vec(-100.0f64..100.0, 3..30), a in 0.1f64..10.0, b in -50.0f64..50.0, seed in 0u64..1000) {
            let ys: Vec<f64> = xs.iter().enumerate().map(|(i, x)| x * 0.3 + ((i as u64 * 31 + seed) % 17) as f64).collect();
            let zs: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
            if let (Ok(c1), Ok(c2)) = (pearson(&xs, &ys), pearson(&zs, &ys)) {
                prop_assert!((c1.r - c2.r).abs() < 1e-9);
                prop_assert!((-1.0..=1.0).contains(&c1.r));
            }
        }

        #[test]
        fn score_ignores_sentence_order(tags in proptest::collection::vec(proptest::collection::vec((0u16..17, 0u16..17), 1..6), 1..8), rot in 0usize..8) {
            let ts = TagSet::upos();
            let build = |pick: fn(&(u16, u16)) -> u16| -> Vec<TaggedSentence> {
                tags.iter().enumerate().map(|(i, s)| {
                    let forms: Vec<String> = (0..s.len()).map(|k| format!("f{}", (i + k) % 5)).collect();
                    let forms: Vec<&str> = forms.iter().map(String::as_str).collect();
                    let t: Vec<Option<TagId>> = s.iter().map(|p| Some(TagId(pick(p)))).collect();
                    TaggedSentence::from_tagged(&forms, &t).unwrap()
                }).collect()
            };
            let gold = build(|p| p.0);
            let pred = build(|p| p.1);
            let r1 = score(&pred, &gold, &ts, EvalOptions::default(), None).unwrap();
            let k = rot % gold.len();
            let mut g2 = gold.clone();
            let mut p2 = pred.clone();
            g2.rotate_left(k);
            p2.rotate_left(k);
            let r2 = score(&p2, &g2, &ts, EvalOptions::default(), None).unwrap();
            prop_assert_eq!(&r1, &r2);
            prop_assert!(r1.macro_f1 <= 1.0);
            prop_assert_eq!(r1.per_tag.iter().map(|t| t.1.support).sum::<usize>(), r1.token_count);
            let all = r1.multicat(MULTICAT_ALL).unwrap().support();
            prop_assert!(r1.multicat.iter().all(|(_, c)| c.support() <= all));
        }
    }
}
