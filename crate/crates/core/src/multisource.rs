//! Multi-source calibration: majority voting over words shared by several
//! target renderings of mutually parallel source sentences.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::Write as _;

use crate::corpus_io::{PairId, TagId};
use crate::error::{Error, Result};
use crate::projector::ProjectedSentence;

#[derive(Debug, Clone, PartialEq)]
pub struct RenderingGroup {
    pub group_id: String,
    pub renderings: Vec<ProjectedSentence>,
    pub source_languages: Vec<String>,
}

impl RenderingGroup {
    pub fn new(group_id: impl Into<String>, renderings: Vec<ProjectedSentence>) -> Result<Self> {
        if renderings.is_empty() {
            return Err(Error::InvalidArgument("a rendering group needs at least one rendering".into()));
        }
        let source_languages = renderings.iter().map(|r| r.source_language.clone()).collect();
        Ok(RenderingGroup { group_id: group_id.into(), renderings, source_languages })
    }
}

/// Per-form vote counts; one vote per tagged occurrence.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct VoteTally {
    votes: BTreeMap<String, Vec<u32>>,
}

impl VoteTally {
    /// Vote vector for `form`, if it was ever tagged.
    pub fn get(&self, form: &str) -> Option<&[u32]> {
        self.votes.get(form).map(Vec::as_slice)
    }

    pub fn total(&self, form: &str) -> u32 {
        self.get(form).map_or(0, |v| v.iter().sum())
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.votes.keys().map(String::as_str)
    }
}

/// Forms (exact, case-sensitive) that occur in at least two renderings.
pub fn find_overlapping_words(group: &RenderingGroup) -> BTreeSet<String> {
    let mut seen_in: BTreeMap<&str, usize> = BTreeMap::new();
    for r in &group.renderings {
        let distinct: HashSet<&str> = r.sentence.forms().collect();
        for f in distinct {
            *seen_in.entry(f).or_insert(0) += 1;
        }
    }
    seen_in.into_iter().filter(|&(_, n)| n >= 2).map(|(f, _)| f.to_string()).collect()
}

pub fn vote(group: &RenderingGroup, n_tags: usize) -> VoteTally {
    let mut votes: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for r in &group.renderings {
        for tok in &r.sentence.tokens {
            if let Some(tag) = tok.tag {
                votes.entry(tok.form.clone()).or_insert_with(|| vec![0; n_tags])[tag.index()] += 1;
            }
        }
    }
    VoteTally { votes }
}

/// Argmax of `counts`; among tied maxima prefer `own`, then the smallest index.
/// `None` when there are no votes.
pub fn winning_tag(counts: &[u32], own: Option<TagId>) -> Option<TagId> {
    let max = *counts.iter().max()?;
    if max == 0 {
        return None;
    }
    if let Some(own) = own {
        if counts.get(own.index()) == Some(&max) {
            return Some(own);
        }
    }
    counts.iter().position(|&c| c == max).map(|i| TagId(i as u16))
}

/// Retag every occurrence of an overlapping word in the `best` rendering with
/// the vote winner. The rendering's own tag for the word (its first tagged
/// occurrence) wins ties.
pub fn calibrate(group: &RenderingGroup, best: usize, n_tags: usize) -> Result<ProjectedSentence> {
    let mut out = group
        .renderings
        .get(best)
        .cloned()
        .ok_or_else(|| Error::InvalidArgument(format!(
            "rendering index {best} out of range for group {} ({} renderings)",
            group.group_id,
            group.renderings.len()
        )))?;
    let overlapping = find_overlapping_words(group);
    if overlapping.is_empty() {
        return Ok(out);
    }
    let tally = vote(group, n_tags);
    let mut winners: BTreeMap<&str, Option<TagId>> = BTreeMap::new();
    for form in &overlapping {
        let own = out.sentence.tokens.iter().find(|t| &t.form == form).and_then(|t| t.tag);
        winners.insert(form, tally.get(form).and_then(|c| winning_tag(c, own)));
    }
    for tok in &mut out.sentence.tokens {
        if let Some(Some(tag)) = winners.get(tok.form.as_str()) {
            tok.tag = Some(*tag);
        }
    }
    out.recompute_coverage();
    Ok(out)
}

/// Corpus-level (mean coverage, mean average link probability) per source language.
pub type CorpusStats = BTreeMap<String, (f64, f64)>;

pub fn corpus_stats<'a, I>(corpora: I) -> CorpusStats
where
    I: IntoIterator<Item = &'a [ProjectedSentence]>,
{
    let mut sums: BTreeMap<String, (f64, f64, usize)> = BTreeMap::new();
    for corpus in corpora {
        for s in corpus {
            let e = sums.entry(s.source_language.clone()).or_insert((0.0, 0.0, 0));
            e.0 += s.coverage;
            e.1 += s.avg_link_prob;
            e.2 += 1;
        }
    }
    sums.into_iter()
        .map(|(lang, (c, p, n))| (lang, (c / n as f64, p / n as f64)))
        .collect()
}

/// Language with the highest mean coverage x mean link probability; ties go
/// to the earlier language. Languages without statistics score 0.
pub fn best_language<'a>(languages: &'a [String], stats: &CorpusStats) -> Option<&'a str> {
    let mut best: Option<(&str, f64)> = None;
    for lang in languages {
        let score = stats.get(lang).map_or(0.0, |(c, p)| c * p);
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((lang, score));
        }
    }
    best.map(|(l, _)| l)
}

/// Index of the group's rendering whose source language scores best at the
/// corpus level.
pub fn select_best_rendering(group: &RenderingGroup, stats: &CorpusStats) -> usize {
    let lang = best_language(&group.source_languages, stats);
    group
        .source_languages
        .iter()
        .position(|l| Some(l.as_str()) == lang)
        .unwrap_or(0)
}

/// One manifest row: a group id and the `(file, pair id)` of each rendering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestGroup {
    pub group_id: String,
    pub renderings: Vec<(String, PairId)>,
}

/// `group_id<TAB>file:pair_id<TAB>...` per line.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestGroup>> {
    let mut groups = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Error::Parse { line: n + 1, msg };
        let mut cols = line.split('\t');
        let group_id = cols.next().unwrap_or_default().to_string();
        let renderings = cols
            .map(|c| {
                let (file, id) = c.rsplit_once(':').ok_or_else(|| bad(format!("bad rendering reference `{c}`")))?;
                let id = id.parse().map_err(|_| bad(format!("bad pair id in `{c}`")))?;
                Ok((file.to_string(), id))
            })
            .collect::<Result<Vec<_>>>()?;
        if group_id.is_empty() || renderings.is_empty() {
            return Err(bad("a group needs an id and at least one rendering".into()));
        }
        groups.push(ManifestGroup { group_id, renderings });
    }
    Ok(groups)
}

pub fn write_manifest(groups: &[ManifestGroup]) -> String {
    let mut out = String::new();
    for g in groups {
        out.push_str(&g.group_id);
        for (file, id) in &g.renderings {
            let _ = write!(out, "\t{file}:{id}");
        }
        out.push('\n');
    }
    out
}
