//! Flat `section.key=value` run configuration.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::aligner::{AlignConfig, Symmetrization};
use crate::error::{Error, Result};
use crate::projector::ProjectConfig;
use crate::synth::SynthSpec;
use crate::tagger::{LrSchedule, TaggerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    F32,
    F64,
}

impl Precision {
    pub fn as_str(self) -> &'static str {
        match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSettings {
    pub spec: SynthSpec,
    pub disagreement: f64,
    pub num_test: usize,
}

/// Every setting a command can read. Empty paths mean "derive from
/// `output.dir`".
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 leaves the thread count to the runtime.
    pub threads: usize,
    pub output_dir: PathBuf,
    pub data_dir: PathBuf,
    pub languages: Vec<String>,
    pub manifest: PathBuf,
    pub test: PathBuf,
    pub aligner: AlignConfig,
    pub projector: ProjectConfig,
    pub tagger: TaggerConfig,
    pub precision: Precision,
    step_schedule: bool,
    step_every: usize,
    pub exclude_punct: bool,
    pub synth: SynthSettings,
    pub train_input: PathBuf,
    pub train_model: PathBuf,
    pub tag_model: PathBuf,
    pub tag_input: PathBuf,
    pub tag_output: PathBuf,
    pub eval_pred: PathBuf,
    pub eval_gold: PathBuf,
    pub eval_report: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            threads: 0,
            output_dir: PathBuf::from("out"),
            data_dir: PathBuf::from("data"),
            languages: vec!["src".to_string()],
            manifest: PathBuf::new(),
            test: PathBuf::new(),
            aligner: AlignConfig::default(),
            projector: ProjectConfig::default(),
            tagger: TaggerConfig::default(),
            precision: Precision::F32,
            step_schedule: false,
            step_every: 5,
            exclude_punct: false,
            synth: SynthSettings { spec: SynthSpec::default(), disagreement: 0.0, num_test: 500 },
            train_input: PathBuf::new(),
            train_model: PathBuf::new(),
            tag_model: PathBuf::new(),
            tag_input: PathBuf::new(),
            tag_output: PathBuf::new(),
            eval_pred: PathBuf::new(),
            eval_gold: PathBuf::new(),
            eval_report: PathBuf::new(),
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value.trim().parse().map_err(|_| Error::Config(format!("{key}: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("{key}: expected true or false, got `{value}`"))),
    }
}

fn parse_list(value: &str) -> Vec<String> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect()
}

fn parse_weights(key: &str, value: &str) -> Result<Vec<(String, f64)>> {
    parse_list(value)
        .iter()
        .map(|item| {
            let (tag, w) = item.split_once(':').ok_or_else(|| Error::Config(format!("{key}: expected TAG:weight, got `{item}`")))?;
            Ok((tag.trim().to_string(), parse(key, w)?))
        })
        .collect()
}

fn symmetrization_name(s: Symmetrization) -> &'static str {
    match s {
        Symmetrization::Intersection => "intersection",
        Symmetrization::Union => "union",
        Symmetrization::GrowDiagFinal => "grow_diag_final",
    }
}

/// All recognised keys, in snapshot order.
pub const KEYS: &[&str] = &[
    "seed",
    "threads",
    "output.dir",
    "data.dir",
    "data.languages",
    "data.manifest",
    "data.test",
    "aligner.iterations",
    "aligner.model2_iterations",
    "aligner.symmetrization",
    "aligner.alpha",
    "aligner.filter_before_symmetrize",
    "projector.min_relative_freq",
    "projector.min_coverage",
    "projector.top_k",
    "tagger.precision",
    "tagger.word_embedding_size",
    "tagger.affix_embedding_size",
    "tagger.hidden_nodes",
    "tagger.dropout_rate",
    "tagger.dropout_layers",
    "tagger.learning_rate",
    "tagger.decay_rate",
    "tagger.lr_schedule",
    "tagger.step_every",
    "tagger.l2_coefficient",
    "tagger.epochs",
    "tagger.affix_max_len",
    "tagger.min_word_count",
    "tagger.clip_norm",
    "eval.exclude_punct",
    "synth.vocab_size",
    "synth.target_vocab_size",
    "synth.tag_weights",
    "synth.ambiguity",
    "synth.swap_prob",
    "synth.drop_prob",
    "synth.disagreement",
    "synth.num_sentences",
    "synth.num_test",
    "synth.min_len",
    "synth.max_len",
    "synth.suffix_coding",
    "train.input",
    "train.model",
    "tag.model",
    "tag.input",
    "tag.output",
    "eval.pred",
    "eval.gold",
    "eval.report",
];

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "seed" => self.seed = parse(key, v)?,
            "threads" => self.threads = parse(key, v)?,
            "output.dir" => self.output_dir = PathBuf::from(v),
            "data.dir" => self.data_dir = PathBuf::from(v),
            "data.languages" => self.languages = parse_list(v),
            "data.manifest" => self.manifest = PathBuf::from(v),
            "data.test" => self.test = PathBuf::from(v),
            "aligner.iterations" => self.aligner.iterations = parse(key, v)?,
            "aligner.model2_iterations" => self.aligner.model2_iterations = parse(key, v)?,
            "aligner.symmetrization" => self.aligner.symmetrization = v.parse().map_err(|_| Error::Config(format!("{key}: unknown method `{v}`")))?,
            "aligner.alpha" => self.aligner.alpha = parse(key, v)?,
            "aligner.filter_before_symmetrize" => self.aligner.filter_before_symmetrize = parse_bool(key, v)?,
            "projector.min_relative_freq" => self.projector.min_relative_freq = parse(key, v)?,
            "projector.min_coverage" => self.projector.min_coverage = parse(key, v)?,
            "projector.top_k" => {
                let k: usize = parse(key, v)?;
                self.projector.top_k = (k > 0).then_some(k);
            }
            "tagger.precision" => {
                self.precision = match v {
                    "f32" => Precision::F32,
                    "f64" => Precision::F64,
                    _ => return Err(Error::Config(format!("{key}: expected f32 or f64, got `{v}`"))),
                }
            }
            "tagger.word_embedding_size" => self.tagger.word_embedding_size = parse(key, v)?,
            "tagger.affix_embedding_size" => self.tagger.affix_embedding_size = parse(key, v)?,
            "tagger.hidden_nodes" => self.tagger.hidden_nodes = parse(key, v)?,
            "tagger.dropout_rate" => self.tagger.dropout_rate = parse(key, v)?,
            "tagger.dropout_layers" => self.tagger.dropout_layers = parse(key, v)?,
            "tagger.learning_rate" => self.tagger.learning_rate = parse(key, v)?,
            "tagger.decay_rate" => self.tagger.decay_rate = parse(key, v)?,
            "tagger.lr_schedule" => {
                self.step_schedule = match v {
                    "inverse_time" => false,
                    "step" => true,
                    _ => return Err(Error::Config(format!("{key}: expected inverse_time or step, got `{v}`"))),
                };
                self.sync_schedule();
            }
            "tagger.step_every" => {
                self.step_every = parse(key, v)?;
                self.sync_schedule();
            }
            "tagger.l2_coefficient" => self.tagger.l2_coefficient = parse(key, v)?,
            "tagger.epochs" => self.tagger.epochs = parse(key, v)?,
            "tagger.affix_max_len" => self.tagger.affix_max_len = parse(key, v)?,
            "tagger.min_word_count" => self.tagger.min_word_count = parse(key, v)?,
            "tagger.clip_norm" => self.tagger.clip_norm = parse(key, v)?,
            "eval.exclude_punct" => self.exclude_punct = parse_bool(key, v)?,
            "synth.vocab_size" => self.synth.spec.vocab_size = parse(key, v)?,
            "synth.target_vocab_size" => self.synth.spec.target_vocab_size = parse(key, v)?,
            "synth.tag_weights" => self.synth.spec.tag_weights = parse_weights(key, v)?,
            "synth.ambiguity" => self.synth.spec.ambiguity = parse(key, v)?,
            "synth.swap_prob" => self.synth.spec.swap_prob = parse(key, v)?,
            "synth.drop_prob" => self.synth.spec.drop_prob = parse(key, v)?,
            "synth.disagreement" => self.synth.disagreement = parse(key, v)?,
            "synth.num_sentences" => self.synth.spec.num_sentences = parse(key, v)?,
            "synth.num_test" => self.synth.num_test = parse(key, v)?,
            "synth.min_len" => self.synth.spec.min_len = parse(key, v)?,
            "synth.max_len" => self.synth.spec.max_len = parse(key, v)?,
            "synth.suffix_coding" => self.synth.spec.suffix_coding = parse_bool(key, v)?,
            "train.input" => self.train_input = PathBuf::from(v),
            "train.model" => self.train_model = PathBuf::from(v),
            "tag.model" => self.tag_model = PathBuf::from(v),
            "tag.input" => self.tag_input = PathBuf::from(v),
            "tag.output" => self.tag_output = PathBuf::from(v),
            "eval.pred" => self.eval_pred = PathBuf::from(v),
            "eval.gold" => self.eval_gold = PathBuf::from(v),
            "eval.report" => self.eval_report = PathBuf::from(v),
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    fn sync_schedule(&mut self) {
        self.tagger.lr_schedule =
            if self.step_schedule { LrSchedule::Step { every: self.step_every } } else { LrSchedule::InverseTime };
    }

    fn get(&self, key: &str) -> String {
        let path = |p: &PathBuf| p.display().to_string();
        let t = &self.tagger;
        let s = &self.synth.spec;
        match key {
            "seed" => self.seed.to_string(),
            "threads" => self.threads.to_string(),
            "output.dir" => path(&self.output_dir),
            "data.dir" => path(&self.data_dir),
            "data.languages" => self.languages.join(","),
            "data.manifest" => path(&self.manifest),
            "data.test" => path(&self.test),
            "aligner.iterations" => self.aligner.iterations.to_string(),
            "aligner.model2_iterations" => self.aligner.model2_iterations.to_string(),
            "aligner.symmetrization" => symmetrization_name(self.aligner.symmetrization).to_string(),
            "aligner.alpha" => self.aligner.alpha.to_string(),
            "aligner.filter_before_symmetrize" => self.aligner.filter_before_symmetrize.to_string(),
            "projector.min_relative_freq" => self.projector.min_relative_freq.to_string(),
            "projector.min_coverage" => self.projector.min_coverage.to_string(),
            "projector.top_k" => self.projector.top_k.unwrap_or(0).to_string(),
            "tagger.precision" => self.precision.as_str().to_string(),
            "tagger.word_embedding_size" => t.word_embedding_size.to_string(),
            "tagger.affix_embedding_size" => t.affix_embedding_size.to_string(),
            "tagger.hidden_nodes" => t.hidden_nodes.to_string(),
            "tagger.dropout_rate" => t.dropout_rate.to_string(),
            "tagger.dropout_layers" => t.dropout_layers.to_string(),
            "tagger.learning_rate" => t.learning_rate.to_string(),
            "tagger.decay_rate" => t.decay_rate.to_string(),
            "tagger.lr_schedule" => if self.step_schedule { "step" } else { "inverse_time" }.to_string(),
            "tagger.step_every" => self.step_every.to_string(),
            "tagger.l2_coefficient" => t.l2_coefficient.to_string(),
            "tagger.epochs" => t.epochs.to_string(),
            "tagger.affix_max_len" => t.affix_max_len.to_string(),
            "tagger.min_word_count" => t.min_word_count.to_string(),
            "tagger.clip_norm" => t.clip_norm.to_string(),
            "eval.exclude_punct" => self.exclude_punct.to_string(),
            "synth.vocab_size" => s.vocab_size.to_string(),
            "synth.target_vocab_size" => s.target_vocab_size.to_string(),
            "synth.tag_weights" => s.tag_weights.iter().map(|(t, w)| format!("{t}:{w}")).collect::<Vec<_>>().join(","),
            "synth.ambiguity" => s.ambiguity.to_string(),
            "synth.swap_prob" => s.swap_prob.to_string(),
            "synth.drop_prob" => s.drop_prob.to_string(),
            "synth.disagreement" => self.synth.disagreement.to_string(),
            "synth.num_sentences" => s.num_sentences.to_string(),
            "synth.num_test" => self.synth.num_test.to_string(),
            "synth.min_len" => s.min_len.to_string(),
            "synth.max_len" => s.max_len.to_string(),
            "synth.suffix_coding" => s.suffix_coding.to_string(),
            "train.input" => path(&self.train_input),
            "train.model" => path(&self.train_model),
            "tag.model" => path(&self.tag_model),
            "tag.input" => path(&self.tag_input),
            "tag.output" => path(&self.tag_output),
            "eval.pred" => path(&self.eval_pred),
            "eval.gold" => path(&self.eval_gold),
            "eval.report" => path(&self.eval_report),
            _ => unreachable!("every key in KEYS is handled"),
        }
    }

    /// Apply `key=value` lines. Blank lines and lines starting with `#` are
    /// skipped; unknown keys and repeated keys are errors.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            let key = key.trim();
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: key `{key}` set twice", n + 1)));
            }
            self.set(key, value).map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                other => other,
            })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = RunConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every key with its current value, one `key=value` per line, in [`KEYS`] order.
    pub fn snapshot(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key}={}", self.get(key));
        }
        out
    }

    /// Range checks for every threshold. Errors are [`Error::Config`].
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let unit = |name: &str, x: f64| -> Result<()> {
            if (0.0..=1.0).contains(&x) {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} {x} outside [0,1]")))
            }
        };
        unit("aligner.alpha", self.aligner.alpha)?;
        unit("projector.min_relative_freq", self.projector.min_relative_freq)?;
        unit("projector.min_coverage", self.projector.min_coverage)?;
        unit("synth.disagreement", self.synth.disagreement)?;
        if self.aligner.iterations == 0 {
            return bad("aligner.iterations must be >= 1".into());
        }
        if self.languages.is_empty() {
            return bad("data.languages must name at least one language".into());
        }
        for (i, l) in self.languages.iter().enumerate() {
            if l.contains(|c: char| c.is_whitespace() || c == ':' || c == '/') || self.languages[..i].contains(l) {
                return bad(format!("data.languages: invalid or repeated language `{l}`"));
            }
        }
        self.tagger_config().validate().map_err(|e| Error::Config(format!("tagger: {e}")))?;
        self.synth.spec.validate(&crate::corpus_io::TagSet::upos()).map_err(|e| Error::Config(format!("synth: {e}")))?;
        Ok(())
    }

    /// Tagger settings with the run seed applied.
    pub fn tagger_config(&self) -> TaggerConfig {
        TaggerConfig { seed: self.seed, ..self.tagger.clone() }
    }

    pub fn synth_spec(&self) -> SynthSpec {
        SynthSpec { seed: self.seed, ..self.synth.spec.clone() }
    }

    pub fn align_config(&self) -> AlignConfig {
        AlignConfig { threads: self.threads, ..self.aligner.clone() }
    }
}
