//! IBM Model 1 word alignment trained by EM (with an optional Model 2
//! distortion refinement), posterior link extraction, symmetrization and
//! confidence filtering.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::corpus_io::{PairId, ParallelPair, TaggedSentence};
use crate::error::{Error, Result};

/// Probability assumed for any (given, emitted) pair absent from a table.
pub const FLOOR_PROB: f64 = 1e-9;

/// Serialized name of the empty word on the conditioning side.
pub const NULL_WORD: &str = "NULL";

/// Pairs per E-step work unit. Fixed so that partial sums are merged in the
/// same order no matter how many threads run.
const CHUNK_PAIRS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Target words generated by source words: t(target | source).
    Forward,
    /// Source words generated by target words: t(source | target).
    Backward,
    Symmetrized,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
            Direction::Symmetrized => "symmetrized",
        }
    }

    /// (conditioning side, emitted side) of a pair under this direction.
    fn sides(self, pair: &ParallelPair) -> (&TaggedSentence, &TaggedSentence) {
        match self {
            Direction::Backward => (&pair.target, &pair.source),
            _ => (&pair.source, &pair.target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symmetrization {
    Intersection,
    Union,
    GrowDiagFinal,
}

impl std::str::FromStr for Symmetrization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intersection" => Ok(Symmetrization::Intersection),
            "union" => Ok(Symmetrization::Union),
            "grow_diag_final" | "grow-diag-final" => Ok(Symmetrization::GrowDiagFinal),
            other => Err(Error::InvalidArgument(format!("unknown symmetrization `{other}`"))),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct FormIndex {
    forms: Vec<String>,
    ids: HashMap<String, u32>,
}

impl FormIndex {
    fn intern(&mut self, form: &str) -> u32 {
        if let Some(&id) = self.ids.get(form) {
            return id;
        }
        let id = self.forms.len() as u32;
        self.forms.push(form.to_string());
        self.ids.insert(form.to_string(), id);
        id
    }

    fn get(&self, form: &str) -> Option<u32> {
        self.ids.get(form).copied()
    }
}

/// Distortion table a(i | j, l, m) of IBM Model 2, where `i = 0` is the empty word.
#[derive(Debug, Clone, Default)]
pub struct Distortion {
    probs: HashMap<(u16, u16, u16, u16), f64>,
}

impl Distortion {
    /// a(i | j, l, m); uniform 1/(l+1) for configurations never trained.
    pub fn prob(&self, i: usize, j: usize, l: usize, m: usize) -> f64 {
        self.probs
            .get(&(i as u16, j as u16, l as u16, m as u16))
            .copied()
            .unwrap_or(1.0 / (l as f64 + 1.0))
    }
}

/// Lexical translation probabilities t(emitted | given), including a NULL
/// word on the given side (id 0).
#[derive(Debug, Clone)]
pub struct TranslationTable {
    direction: Direction,
    given: FormIndex,
    emitted: FormIndex,
    probs: HashMap<(u32, u32), f64>,
    distortion: Option<Distortion>,
}

impl TranslationTable {
    pub fn direction(&self) -> Direction {
        self.direction
    }

    /// t(emitted | given); `None` as `given` denotes the NULL word.
    pub fn prob(&self, given: Option<&str>, emitted: &str) -> f64 {
        let g = match given {
            None => Some(0),
            Some(form) => self.given.get(form),
        };
        match (g, self.emitted.get(emitted)) {
            (Some(g), Some(e)) => self.probs.get(&(g, e)).copied().unwrap_or(FLOOR_PROB),
            _ => FLOOR_PROB,
        }
    }

    pub fn distortion(&self) -> Option<&Distortion> {
        self.distortion.as_ref()
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Σ_f t(f | given) for the given-side word (`None` = NULL).
    pub fn row_sum(&self, given: Option<&str>) -> f64 {
        let g = match given {
            None => 0,
            Some(form) => match self.given.get(form) {
                Some(g) => g,
                None => return 0.0,
            },
        };
        self.probs.iter().filter(|((gg, _), _)| *gg == g).map(|(_, p)| p).sum()
    }

    /// Iterate `(given, emitted, prob)` in a deterministic order; the NULL
    /// word is rendered as [`NULL_WORD`].
    pub fn entries(&self) -> Vec<(&str, &str, f64)> {
        let mut keys: Vec<&(u32, u32)> = self.probs.keys().collect();
        keys.sort_unstable();
        keys.into_iter()
            .map(|k| {
                (
                    self.given.forms[k.0 as usize].as_str(),
                    self.emitted.forms[k.1 as usize].as_str(),
                    self.probs[k],
                )
            })
            .collect()
    }

    /// `given<TAB>emitted<TAB>prob` per line.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (g, e, p) in self.entries() {
            let _ = writeln!(out, "{g}\t{e}\t{p}");
        }
        out
    }

    pub fn from_tsv(text: &str, direction: Direction) -> Result<Self> {
        let mut given = FormIndex::default();
        given.intern(NULL_WORD);
        let mut emitted = FormIndex::default();
        let mut probs = HashMap::new();
        for (n, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').collect();
            let bad = |msg: &str| Error::Parse { line: n + 1, msg: msg.to_string() };
            if cols.len() != 3 {
                return Err(bad("expected given<TAB>emitted<TAB>prob"));
            }
            let p: f64 = cols[2].parse().map_err(|_| bad("bad probability"))?;
            if !(0.0..=1.0).contains(&p) {
                return Err(bad("probability outside [0,1]"));
            }
            let g = given.intern(cols[0]);
            let e = emitted.intern(cols[1]);
            probs.insert((g, e), p);
        }
        Ok(TranslationTable { direction, given, emitted, probs, distortion: None })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlignmentLink {
    pub src: usize,
    pub tgt: usize,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub pair_id: PairId,
    /// Sorted by (src, tgt), no duplicates.
    pub links: Vec<AlignmentLink>,
    pub direction: Direction,
}

impl Alignment {
    pub fn new(pair_id: PairId, mut links: Vec<AlignmentLink>, direction: Direction) -> Result<Self> {
        links.sort_by_key(|l| (l.src, l.tgt));
        if links.windows(2).any(|w| (w[0].src, w[0].tgt) == (w[1].src, w[1].tgt)) {
            return Err(Error::InvalidArgument(format!("pair {pair_id}: duplicate link")));
        }
        if links.iter().any(|l| !(0.0..=1.0).contains(&l.prob)) {
            return Err(Error::InvalidArgument(format!("pair {pair_id}: link prob outside [0,1]")));
        }
        Ok(Alignment { pair_id, links, direction })
    }

    pub fn empty(pair_id: PairId, direction: Direction) -> Self {
        Alignment { pair_id, links: Vec::new(), direction }
    }

    pub fn points(&self) -> BTreeSet<(usize, usize)> {
        self.links.iter().map(|l| (l.src, l.tgt)).collect()
    }

    fn prob_of(&self, src: usize, tgt: usize) -> Option<f64> {
        self.links
            .binary_search_by_key(&(src, tgt), |l| (l.src, l.tgt))
            .ok()
            .map(|i| self.links[i].prob)
    }

    /// Checks that every link lies inside a `src_len` x `tgt_len` grid.
    pub fn check_bounds(&self, src_len: usize, tgt_len: usize) -> Result<()> {
        match self.links.iter().find(|l| l.src >= src_len || l.tgt >= tgt_len) {
            Some(l) => Err(Error::Contract(format!(
                "pair {}: link {}-{} outside {}x{} sentence pair",
                self.pair_id, l.src, l.tgt, src_len, tgt_len
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmOptions {
    pub iterations: usize,
    pub direction: Direction,
    /// Worker threads for the E-step (0 = runtime default); results do not depend on this value.
    pub threads: usize,
    /// Model 2 iterations run after the Model 1 iterations (0 = Model 1 only).
    pub model2_iterations: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        EmOptions { iterations: 5, direction: Direction::Forward, threads: 1, model2_iterations: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct EmOutcome {
    pub table: TranslationTable,
    /// Corpus log-likelihood of the initial parameters and after every
    /// iteration (`iterations + model2_iterations + 1` values).
    pub log_likelihood: Vec<f64>,
}

struct EncodedPair {
    /// Given-side ids, NULL first.
    given: Vec<u32>,
    /// Parameter index for (i, j), row-major over j: `params[j * (l+1) + i]`.
    params: Vec<u32>,
    m: usize,
}

struct EncodedCorpus {
    given: FormIndex,
    emitted: FormIndex,
    keys: Vec<(u32, u32)>,
    pairs: Vec<EncodedPair>,
}

fn encode(pairs: &[ParallelPair], direction: Direction) -> EncodedCorpus {
    let mut given = FormIndex::default();
    given.intern(NULL_WORD);
    let mut emitted = FormIndex::default();
    let mut param_of: HashMap<(u32, u32), u32> = HashMap::new();
    let mut keys = Vec::new();
    let mut encoded = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let (g_side, e_side) = direction.sides(pair);
        let mut g_ids = vec![0u32];
        g_ids.extend(g_side.forms().map(|f| given.intern(f)));
        let e_ids: Vec<u32> = e_side.forms().map(|f| emitted.intern(f)).collect();
        let mut params = Vec::with_capacity(g_ids.len() * e_ids.len());
        for &f in &e_ids {
            for &e in &g_ids {
                let next = keys.len() as u32;
                let p = *param_of.entry((e, f)).or_insert_with(|| {
                    keys.push((e, f));
                    next
                });
                params.push(p);
            }
        }
        encoded.push(EncodedPair { given: g_ids, params, m: e_ids.len() });
    }
    EncodedCorpus { given, emitted, keys, pairs: encoded }
}

struct Partial {
    counts: Vec<f64>,
    distortion: HashMap<(u16, u16, u16, u16), f64>,
    log_likelihood: f64,
}

fn e_step_chunk(
    chunk: &[EncodedPair],
    t: &[f64],
    distortion: Option<&Distortion>,
    accumulate: bool,
) -> Partial {
    let mut counts = if accumulate { vec![0.0; t.len()] } else { Vec::new() };
    let mut dist_counts = HashMap::new();
    let mut ll = 0.0;
    let mut scores = Vec::new();
    for p in chunk {
        let width = p.given.len();
        let l = width - 1;
        for j in 0..p.m {
            let row = &p.params[j * width..(j + 1) * width];
            scores.clear();
            scores.extend(row.iter().enumerate().map(|(i, &k)| {
                let a = match distortion {
                    Some(d) => d.prob(i, j, l, p.m),
                    None => 1.0 / width as f64,
                };
                t[k as usize] * a
            }));
            let denom: f64 = scores.iter().sum();
            ll += denom.ln();
            if accumulate {
                for (i, (&k, &s)) in row.iter().zip(&scores).enumerate() {
                    let c = s / denom;
                    counts[k as usize] += c;
                    if distortion.is_some() {
                        *dist_counts.entry((i as u16, j as u16, l as u16, p.m as u16)).or_insert(0.0) += c;
                    }
                }
            }
        }
    }
    Partial { counts, distortion: dist_counts, log_likelihood: ll }
}

/// One E-step over the corpus. Chunks are evaluated in parallel and merged in
/// chunk order.
fn e_step(
    corpus: &EncodedCorpus,
    t: &[f64],
    distortion: Option<&Distortion>,
    accumulate: bool,
    pool: &rayon::ThreadPool,
) -> Partial {
    let mut total = Partial {
        counts: if accumulate { vec![0.0; t.len()] } else { Vec::new() },
        distortion: HashMap::new(),
        log_likelihood: 0.0,
    };
    let chunks: Vec<&[EncodedPair]> = corpus.pairs.chunks(CHUNK_PAIRS).collect();
    let wave = pool.current_num_threads().max(1) * 2;
    for group in chunks.chunks(wave) {
        let partials: Vec<Partial> = pool.install(|| {
            group.par_iter().map(|c| e_step_chunk(c, t, distortion, accumulate)).collect()
        });
        for part in partials {
            total.log_likelihood += part.log_likelihood;
            for (acc, c) in total.counts.iter_mut().zip(&part.counts) {
                *acc += c;
            }
            let mut keys: Vec<_> = part.distortion.keys().copied().collect();
            keys.sort_unstable();
            for k in keys {
                *total.distortion.entry(k).or_insert(0.0) += part.distortion[&k];
            }
        }
    }
    total
}

fn normalize_rows(keys: &[(u32, u32)], counts: &[f64], n_given: usize) -> Vec<f64> {
    let mut totals = vec![0.0; n_given];
    for (&(e, _), &c) in keys.iter().zip(counts) {
        totals[e as usize] += c;
    }
    keys.iter()
        .zip(counts)
        .map(|(&(e, _), &c)| {
            let z = totals[e as usize];
            if z > 0.0 {
                c / z
            } else {
                0.0
            }
        })
        .collect()
}

fn normalize_distortion(counts: HashMap<(u16, u16, u16, u16), f64>) -> Distortion {
    let mut totals: HashMap<(u16, u16, u16), f64> = HashMap::new();
    let mut keys: Vec<_> = counts.keys().copied().collect();
    keys.sort_unstable();
    for k in &keys {
        *totals.entry((k.1, k.2, k.3)).or_insert(0.0) += counts[k];
    }
    let probs = keys
        .into_iter()
        .map(|k| (k, counts[&k] / totals[&(k.1, k.2, k.3)]))
        .collect();
    Distortion { probs }
}

/// Train a translation table by EM.
pub fn train(pairs: &[ParallelPair], opts: &EmOptions) -> Result<EmOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    if opts.iterations < 1 {
        return Err(Error::InvalidArgument("EM iterations must be >= 1".into()));
    }
    if opts.direction == Direction::Symmetrized {
        return Err(Error::InvalidArgument("EM trains a single direction".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let corpus = encode(pairs, opts.direction);

    // Uniform over the emitted words each given word co-occurs with.
    let mut fanout = vec![0usize; corpus.given.forms.len()];
    for &(e, _) in &corpus.keys {
        fanout[e as usize] += 1;
    }
    let mut t: Vec<f64> = corpus.keys.iter().map(|&(e, _)| 1.0 / fanout[e as usize] as f64).collect();
    let mut distortion: Option<Distortion> = None;
    let mut log_likelihood = Vec::with_capacity(opts.iterations + opts.model2_iterations + 1);

    for it in 0..opts.iterations + opts.model2_iterations {
        if it == opts.iterations {
            distortion = Some(Distortion::default());
        }
        let partial = e_step(&corpus, &t, distortion.as_ref(), true, &pool);
        log_likelihood.push(partial.log_likelihood);
        t = normalize_rows(&corpus.keys, &partial.counts, corpus.given.forms.len());
        if distortion.is_some() {
            distortion = Some(normalize_distortion(partial.distortion));
        }
    }
    log_likelihood.push(e_step(&corpus, &t, distortion.as_ref(), false, &pool).log_likelihood);

    let probs = corpus.keys.iter().copied().zip(t).collect();
    Ok(EmOutcome {
        table: TranslationTable {
            direction: opts.direction,
            given: corpus.given,
            emitted: corpus.emitted,
            probs,
            distortion,
        },
        log_likelihood,
    })
}

/// IBM Model 1 with a NULL word on the conditioning side.
pub fn train_ibm1(pairs: &[ParallelPair], iterations: usize, direction: Direction) -> Result<TranslationTable> {
    let opts = EmOptions { iterations, direction, ..EmOptions::default() };
    Ok(train(pairs, &opts)?.table)
}

/// Posterior alignment: every emitted token links to its most probable given
/// token. The NULL word sits at position 0, so it wins ties and the token is
/// left unaligned; among real tokens ties go to the smaller index. Links are
/// expressed as (source index, target index).
pub fn posterior_align(table: &TranslationTable, pair: &ParallelPair) -> Alignment {
    let direction = table.direction;
    let (g_side, e_side) = direction.sides(pair);
    let l = g_side.len();
    let m = e_side.len();
    let mut links = Vec::new();
    for (j, f) in e_side.forms().enumerate() {
        let weight = |i: usize| table.distortion.as_ref().map_or(1.0, |d| d.prob(i, j, l, m));
        let null_score = table.prob(None, f) * weight(0);
        let mut total = null_score;
        let mut best: Option<(usize, f64)> = None;
        for (i, e) in g_side.forms().enumerate() {
            let s = table.prob(Some(e), f) * weight(i + 1);
            total += s;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        if let Some((i, s)) = best {
            if s > null_score {
                let prob = (s / total).clamp(0.0, 1.0);
                let (src, tgt) = match direction {
                    Direction::Backward => (j, i),
                    _ => (i, j),
                };
                links.push(AlignmentLink { src, tgt, prob });
            }
        }
    }
    links.sort_by_key(|l| (l.src, l.tgt));
    Alignment { pair_id: pair.id, links, direction }
}

/// Combine two directional alignments. A symmetrized link's probability is the
/// geometric mean of its directional posteriors, using [`FLOOR_PROB`] for a
/// direction that lacks the link.
pub fn symmetrize(fwd: &Alignment, bwd: &Alignment, method: Symmetrization) -> Result<Alignment> {
    if fwd.pair_id != bwd.pair_id {
        return Err(Error::PairMismatch(fwd.pair_id, bwd.pair_id));
    }
    let f = fwd.points();
    let b = bwd.points();
    let union: BTreeSet<(usize, usize)> = f.union(&b).copied().collect();
    let intersection: BTreeSet<(usize, usize)> = f.intersection(&b).copied().collect();
    let points = match method {
        Symmetrization::Intersection => intersection,
        Symmetrization::Union => union,
        Symmetrization::GrowDiagFinal => grow_diag_final(intersection, &f, &b, &union),
    };
    let links = points
        .into_iter()
        .map(|(src, tgt)| {
            let pf = fwd.prob_of(src, tgt).unwrap_or(FLOOR_PROB);
            let pb = bwd.prob_of(src, tgt).unwrap_or(FLOOR_PROB);
            AlignmentLink { src, tgt, prob: (pf * pb).sqrt() }
        })
        .collect();
    Ok(Alignment { pair_id: fwd.pair_id, links, direction: Direction::Symmetrized })
}

fn grow_diag_final(
    mut points: BTreeSet<(usize, usize)>,
    fwd: &BTreeSet<(usize, usize)>,
    bwd: &BTreeSet<(usize, usize)>,
    union: &BTreeSet<(usize, usize)>,
) -> BTreeSet<(usize, usize)> {
    const NEIGHBORS: [(isize, isize); 8] = [(-1, 0), (0, -1), (1, 0), (0, 1), (-1, -1), (-1, 1), (1, -1), (1, 1)];
    let src_aligned = |p: &BTreeSet<(usize, usize)>, s: usize| p.iter().any(|&(a, _)| a == s);
    let tgt_aligned = |p: &BTreeSet<(usize, usize)>, t: usize| p.iter().any(|&(_, b)| b == t);

    loop {
        let mut added = false;
        let snapshot: Vec<(usize, usize)> = points.iter().copied().collect();
        for (s, t) in snapshot {
            for (ds, dt) in NEIGHBORS {
                let (Some(ns), Some(nt)) = (s.checked_add_signed(ds), t.checked_add_signed(dt)) else {
                    continue;
                };
                if points.contains(&(ns, nt)) || !union.contains(&(ns, nt)) {
                    continue;
                }
                if !src_aligned(&points, ns) || !tgt_aligned(&points, nt) {
                    points.insert((ns, nt));
                    added = true;
                }
            }
        }
        if !added {
            break;
        }
    }
    for dir in [fwd, bwd] {
        for &(s, t) in dir {
            if !points.contains(&(s, t)) && (!src_aligned(&points, s) || !tgt_aligned(&points, t)) {
                points.insert((s, t));
            }
        }
    }
    points
}

/// Keep exactly the links with `prob >= alpha`.
pub fn filter_links(a: &Alignment, alpha: f64) -> Alignment {
    Alignment {
        pair_id: a.pair_id,
        links: a.links.iter().copied().filter(|l| l.prob >= alpha).collect(),
        direction: a.direction,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignConfig {
    pub iterations: usize,
    pub model2_iterations: usize,
    pub symmetrization: Symmetrization,
    pub alpha: f64,
    /// Threshold the directional posteriors before symmetrizing instead of
    /// the symmetrized links.
    pub filter_before_symmetrize: bool,
    pub threads: usize,
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            iterations: 5,
            model2_iterations: 0,
            symmetrization: Symmetrization::Intersection,
            alpha: 0.1,
            filter_before_symmetrize: false,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BidirectionalAlignment {
    pub forward: EmOutcome,
    pub backward: EmOutcome,
    pub alignments: Vec<Alignment>,
}

/// Train both directions, align every pair, symmetrize and filter by alpha.
pub fn align_bidirectional(pairs: &[ParallelPair], cfg: &AlignConfig) -> Result<BidirectionalAlignment> {
    if !(0.0..=1.0).contains(&cfg.alpha) {
        return Err(Error::InvalidArgument(format!("alpha {} outside [0,1]", cfg.alpha)));
    }
    let opts = |direction| EmOptions {
        iterations: cfg.iterations,
        direction,
        threads: cfg.threads,
        model2_iterations: cfg.model2_iterations,
    };
    let forward = train(pairs, &opts(Direction::Forward))?;
    let backward = train(pairs, &opts(Direction::Backward))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let alignments = pool.install(|| {
        pairs
            .par_iter()
            .map(|pair| {
                let mut f = posterior_align(&forward.table, pair);
                let mut b = posterior_align(&backward.table, pair);
                if cfg.filter_before_symmetrize {
                    f = filter_links(&f, cfg.alpha);
                    b = filter_links(&b, cfg.alpha);
                }
                let sym = symmetrize(&f, &b, cfg.symmetrization)?;
                Ok(if cfg.filter_before_symmetrize { sym } else { filter_links(&sym, cfg.alpha) })
            })
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(BidirectionalAlignment { forward, backward, alignments })
}

/// `%g`-style rendering with six significant digits.
fn format_prob(p: f64) -> String {
    if p == 0.0 {
        return "0".to_string();
    }
    let magnitude = p.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).max(0) as usize;
    let s = format!("{p:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Pharaoh line extended with posteriors: `i-j:p i-j:p ...`.
pub fn format_alignment(a: &Alignment) -> String {
    let mut out = String::new();
    for (n, l) in a.links.iter().enumerate() {
        if n > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{}-{}:{}", l.src, l.tgt, format_prob(l.prob));
    }
    out
}

/// Parse one alignment line. A link without `:p` gets probability 1.
pub fn parse_alignment(line: &str, pair_id: PairId, direction: Direction) -> Result<Alignment> {
    let bad = |msg: String| Error::Parse { line: pair_id as usize, msg };
    let mut links = Vec::new();
    for item in line.split_whitespace() {
        let (pos, prob) = match item.split_once(':') {
            Some((pos, p)) => (pos, p.parse::<f64>().map_err(|_| bad(format!("bad probability in `{item}`")))?),
            None => (item, 1.0),
        };
        let (s, t) = pos.split_once('-').ok_or_else(|| bad(format!("bad link `{item}`")))?;
        let src = s.parse().map_err(|_| bad(format!("bad source index in `{item}`")))?;
        let tgt = t.parse().map_err(|_| bad(format!("bad target index in `{item}`")))?;
        links.push(AlignmentLink { src, tgt, prob });
    }
    Alignment::new(pair_id, links, direction).map_err(|e| bad(e.to_string()))
}

/// One line per pair, in order.
pub fn write_alignments(alignments: &[Alignment]) -> String {
    let mut out = String::new();
    for a in alignments {
        out.push_str(&format_alignment(a));
        out.push('\n');
    }
    out
}

/// Pair ids are assigned from the 1-based line number.
pub fn read_alignments(text: &str, direction: Direction) -> Result<Vec<Alignment>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| parse_alignment(line.trim_end_matches('\r'), i as PairId + 1, direction))
        .collect()
}
