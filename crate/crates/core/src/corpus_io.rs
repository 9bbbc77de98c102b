//! Corpus formats (CoNLL-U, plain tokenized text, vocabulary files) and the
//! tag inventory shared by every other module.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reserved symbol for a token without a tag. Never a member of a [`TagSet`].
pub const NULL_MARKER: &str = "NULL";

/// The 17 Universal Dependencies UPOS tags, in canonical order.
pub const UPOS_TAGS: [&str; 17] = [
    "ADJ", "ADP", "ADV", "AUX", "CCONJ", "DET", "INTJ", "NOUN", "NUM", "PART", "PRON", "PROPN",
    "PUNCT", "SCONJ", "SYM", "VERB", "X",
];

/// Index of a tag inside its [`TagSet`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TagId(pub u16);

impl TagId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct TagSet {
    tags: Vec<String>,
    index: HashMap<String, TagId>,
}

impl TagSet {
    pub fn new<S: AsRef<str>>(tags: &[S]) -> Result<Self> {
        let mut index = HashMap::with_capacity(tags.len());
        let mut owned = Vec::with_capacity(tags.len());
        if tags.is_empty() || tags.len() > u16::MAX as usize {
            return Err(Error::InvalidArgument(format!(
                "tag set size {} out of range",
                tags.len()
            )));
        }
        for (i, t) in tags.iter().enumerate() {
            let t = t.as_ref();
            if t.is_empty() || t == NULL_MARKER || t == "_" || t.contains(char::is_whitespace) {
                return Err(Error::InvalidArgument(format!("invalid tag symbol `{t}`")));
            }
            if index.insert(t.to_string(), TagId(i as u16)).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate tag `{t}`")));
            }
            owned.push(t.to_string());
        }
        Ok(TagSet { tags: owned, index })
    }

    /// The UPOS inventory.
    pub fn upos() -> Self {
        TagSet::new(&UPOS_TAGS).expect("UPOS tags are valid")
    }

    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn index_of(&self, symbol: &str) -> Option<TagId> {
        self.index.get(symbol).copied()
    }

    pub fn symbol_of(&self, id: TagId) -> &str {
        &self.tags[id.index()]
    }

    pub fn ids(&self) -> impl Iterator<Item = TagId> + '_ {
        (0..self.tags.len()).map(|i| TagId(i as u16))
    }

    pub fn symbols(&self) -> &[String] {
        &self.tags
    }
}

impl TryFrom<Vec<String>> for TagSet {
    type Error = Error;
    fn try_from(v: Vec<String>) -> Result<Self> {
        TagSet::new(&v)
    }
}

impl From<TagSet> for Vec<String> {
    fn from(t: TagSet) -> Self {
        t.tags
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub form: String,
    pub tag: Option<TagId>,
}

impl Token {
    pub fn new(form: impl Into<String>, tag: Option<TagId>) -> Result<Self> {
        let form = form.into();
        if form.is_empty() || form.contains(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid token form `{form}`")));
        }
        Ok(Token { form, tag })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaggedSentence {
    pub tokens: Vec<Token>,
}

impl TaggedSentence {
    pub fn new(tokens: Vec<Token>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidArgument("sentence must have at least one token".into()));
        }
        Ok(TaggedSentence { tokens })
    }

    /// Untagged sentence from whitespace-free forms.
    pub fn from_forms<S: AsRef<str>>(forms: &[S]) -> Result<Self> {
        let tokens = forms
            .iter()
            .map(|f| Token::new(f.as_ref(), None))
            .collect::<Result<Vec<_>>>()?;
        TaggedSentence::new(tokens)
    }

    pub fn from_tagged(forms: &[&str], tags: &[Option<TagId>]) -> Result<Self> {
        if forms.len() != tags.len() {
            return Err(Error::InvalidArgument("forms and tags differ in length".into()));
        }
        let tokens = forms
            .iter()
            .zip(tags)
            .map(|(f, t)| Token::new(*f, *t))
            .collect::<Result<Vec<_>>>()?;
        TaggedSentence::new(tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn forms(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.form.as_str())
    }

    pub fn tags(&self) -> Vec<Option<TagId>> {
        self.tokens.iter().map(|t| t.tag).collect()
    }

    pub fn is_fully_tagged(&self) -> bool {
        self.tokens.iter().all(|t| t.tag.is_some())
    }

    pub fn tagged_count(&self) -> usize {
        self.tokens.iter().filter(|t| t.tag.is_some()).count()
    }

    /// Copy of the sentence with every tag removed.
    pub fn untagged(&self) -> Self {
        TaggedSentence {
            tokens: self
                .tokens
                .iter()
                .map(|t| Token { form: t.form.clone(), tag: None })
                .collect(),
        }
    }
}

/// Identifier of a sentence pair: its 1-based position in the input corpus.
pub type PairId = u64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParallelPair {
    pub id: PairId,
    pub source: TaggedSentence,
    pub target: TaggedSentence,
}

impl ParallelPair {
    pub fn new(id: PairId, source: TaggedSentence, target: TaggedSentence) -> Result<Self> {
        if !source.is_fully_tagged() {
            return Err(Error::Contract(format!("pair {id}: source side is not fully tagged")));
        }
        Ok(ParallelPair { id, source, target })
    }
}

/// Zip a tagged source corpus with its target renderings, numbering pairs from 1.
pub fn zip_pairs(sources: Vec<TaggedSentence>, targets: Vec<TaggedSentence>) -> Result<Vec<ParallelPair>> {
    if sources.len() != targets.len() {
        return Err(Error::Contract(format!(
            "{} source sentences but {} target sentences",
            sources.len(),
            targets.len()
        )));
    }
    sources
        .into_iter()
        .zip(targets)
        .enumerate()
        .map(|(i, (s, t))| ParallelPair::new(i as PairId + 1, s, t.untagged()))
        .collect()
}

/// Parse CoNLL-U text. Multiword-token ranges and empty nodes are skipped.
pub fn parse_conllu(text: &str, tagset: &TagSet) -> Result<Vec<TaggedSentence>> {
    read_conllu(text.as_bytes(), tagset)
}

pub fn read_conllu<R: BufRead>(reader: R, tagset: &TagSet) -> Result<Vec<TaggedSentence>> {
    let mut sentences = Vec::new();
    let mut current: Vec<Token> = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(TaggedSentence { tokens: std::mem::take(&mut current) });
            }
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected 10 tab-separated columns, found {}", cols.len()),
            });
        }
        let id = cols[0];
        if id.contains('-') || id.contains('.') {
            continue;
        }
        let form = cols[1];
        if form.is_empty() || form.contains(char::is_whitespace) {
            return Err(Error::Parse { line: lineno, msg: format!("invalid FORM `{form}`") });
        }
        let tag = match cols[3] {
            "_" => None,
            sym => Some(tagset.index_of(sym).ok_or_else(|| Error::UnknownTag {
                line: lineno,
                symbol: sym.to_string(),
            })?),
        };
        current.push(Token { form: form.to_string(), tag });
    }
    if !current.is_empty() {
        sentences.push(TaggedSentence { tokens: current });
    }
    Ok(sentences)
}

/// NULL tags serialize as `_` in the UPOS column.
pub fn write_conllu(sentences: &[TaggedSentence], tagset: &TagSet) -> String {
    let mut out = String::new();
    for s in sentences {
        for (i, tok) in s.tokens.iter().enumerate() {
            let upos = tok.tag.map_or("_", |t| tagset.symbol_of(t));
            let _ = writeln!(out, "{}\t{}\t_\t{}\t_\t_\t_\t_\t_\t_", i + 1, tok.form, upos);
        }
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PlainCorpus {
    pub sentences: Vec<TaggedSentence>,
    /// Blank lines encountered (and skipped).
    pub skipped_blank: usize,
}

/// One pre-tokenized sentence per line.
pub fn parse_plain(text: &str) -> PlainCorpus {
    let mut corpus = PlainCorpus::default();
    for line in text.lines() {
        let tokens: Vec<Token> = line
            .split_whitespace()
            .map(|f| Token { form: f.to_string(), tag: None })
            .collect();
        if tokens.is_empty() {
            corpus.skipped_blank += 1;
        } else {
            corpus.sentences.push(TaggedSentence { tokens });
        }
    }
    corpus
}

pub fn write_plain(sentences: &[TaggedSentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let mut first = true;
        for f in s.forms() {
            if !first {
                out.push(' ');
            }
            out.push_str(f);
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Dense form index with reserved PAD and UNK slots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "VocabRepr", into = "VocabRepr")]
pub struct Vocabulary {
    forms: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

#[derive(Serialize, Deserialize)]
struct VocabRepr {
    forms: Vec<(String, u64)>,
}

impl Vocabulary {
    pub const PAD: u32 = 0;
    pub const UNK: u32 = 1;
    const RESERVED: u32 = 2;

    /// Forms with count >= `min_count`, ordered by descending count then form.
    pub fn build<'a, I>(forms: I, min_count: u64) -> Result<Self>
    where
        I: IntoIterator<Item = &'a str>,
    {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for f in forms {
            *freq.entry(f).or_insert(0) += 1;
        }
        let mut kept: Vec<(&str, u64)> = freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
        kept.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        Ok(Self::from_entries(kept.into_iter().map(|(f, c)| (f.to_string(), c))))
    }

    pub fn from_sentences(sentences: &[TaggedSentence], min_count: u64) -> Result<Self> {
        Self::build(sentences.iter().flat_map(|s| s.forms()), min_count)
    }

    fn from_entries<I: IntoIterator<Item = (String, u64)>>(entries: I) -> Self {
        let mut v = Vocabulary { forms: Vec::new(), counts: Vec::new(), index: HashMap::new() };
        for (f, c) in entries {
            v.index.insert(f.clone(), v.forms.len() as u32 + Self::RESERVED);
            v.forms.push(f);
            v.counts.push(c);
        }
        v
    }

    /// Index of `form`, or [`Vocabulary::UNK`].
    pub fn get(&self, form: &str) -> u32 {
        self.index.get(form).copied().unwrap_or(Self::UNK)
    }

    pub fn contains(&self, form: &str) -> bool {
        self.index.contains_key(form)
    }

    /// Total number of indices including the reserved ones.
    pub fn len(&self) -> usize {
        self.forms.len() + Self::RESERVED as usize
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    pub fn form(&self, index: u32) -> Option<&str> {
        index
            .checked_sub(Self::RESERVED)
            .and_then(|i| self.forms.get(i as usize))
            .map(String::as_str)
    }

    pub fn count(&self, index: u32) -> u64 {
        index
            .checked_sub(Self::RESERVED)
            .and_then(|i| self.counts.get(i as usize))
            .copied()
            .unwrap_or(0)
    }

    /// `form<TAB>index<TAB>count` per line. Reserved indices are implicit.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (i, (f, c)) in self.forms.iter().zip(&self.counts).enumerate() {
            let _ = writeln!(out, "{}\t{}\t{}", f, i as u32 + Self::RESERVED, c);
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Self> {
        let mut entries = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.strip_suffix('\r').unwrap_or(line);
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
            if cols.len() != 3 {
                return Err(bad("expected form<TAB>index<TAB>count"));
            }
            let idx: u32 = cols[1].parse().map_err(|_| bad("bad index"))?;
            let count: u64 = cols[2].parse().map_err(|_| bad("bad count"))?;
            if idx != entries.len() as u32 + Self::RESERVED {
                return Err(bad("indices must be dense and ascending"));
            }
            entries.push((cols[0].to_string(), count));
        }
        Ok(Self::from_entries(entries))
    }
}

impl TryFrom<VocabRepr> for Vocabulary {
    type Error = Error;
    fn try_from(r: VocabRepr) -> Result<Self> {
        Ok(Vocabulary::from_entries(r.forms))
    }
}

impl From<Vocabulary> for VocabRepr {
    fn from(v: Vocabulary) -> Self {
        VocabRepr { forms: v.forms.into_iter().zip(v.counts).collect() }
    }
}
