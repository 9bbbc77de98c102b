//! File-level commands: synth, align, project, calibrate, train, tag, eval
//! and the full pipeline.
//!
//! Layout under `data.dir`: `{lang}.src.conllu`, `{lang}.tgt.txt`,
//! `manifest.tsv`, `test.conllu` (plus gold files written by synth).
//! Layout under `output.dir`: `align/`, `project/`, `calibrate/`, `models/`,
//! tagged output, evaluation reports and `runs/{command}.json`.
//!
//! Every output except the run records is a pure function of the inputs and
//! the configuration.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::aligner::{align_bidirectional, read_alignments, write_alignments, Direction};
use crate::config::{Precision, RunConfig};
use crate::corpus_io::{
    parse_conllu, parse_plain, write_conllu, write_plain, zip_pairs, ParallelPair, TagSet, TaggedSentence, Vocabulary,
};
use crate::error::{Error, Result};
use crate::evaluator::{density_stats, score, DensityStats, EvalOptions, EvalReport};
use crate::multisource::{
    best_language, calibrate, corpus_stats, parse_manifest, select_best_rendering, write_manifest, CorpusStats,
    RenderingGroup,
};
use crate::projector::{project_corpus, read_projected, select_training_sentences, write_metadata, ProjectedSentence};
use crate::scalar::Scalar;
use crate::synth::generate_multilingual;
use crate::tagger::{train, AnyTagger, TaggerModel};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    version: &'a str,
    config: Vec<String>,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
    wall_time_ms: u128,
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Tracks the files a command reads and writes.
struct Run {
    command: &'static str,
    started: Instant,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl Run {
    fn new(command: &'static str) -> Self {
        Run { command, started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text = fs::read_to_string(path).map_err(|source| Error::File { path: path.display().to_string(), source })?;
        self.inputs.push(FileDigest { path: path.display().to_string(), sha256: digest(text.as_bytes()) });
        Ok(text)
    }

    fn write(&mut self, path: &Path, content: &str) -> Result<()> {
        write_file(path, content)?;
        self.outputs.push(FileDigest { path: path.display().to_string(), sha256: digest(content.as_bytes()) });
        Ok(())
    }

    fn finish(self, cfg: &RunConfig, dir: &Path) -> Result<()> {
        let record = RunRecord {
            command: self.command,
            version: VERSION,
            config: cfg.snapshot().lines().map(String::from).collect(),
            inputs: &self.inputs,
            outputs: &self.outputs,
            wall_time_ms: self.started.elapsed().as_millis(),
        };
        let json = serde_json::to_string_pretty(&record)? + "\n";
        write_file(&dir.join("runs").join(format!("{}.json", self.command)), &json)
    }
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let io = |source| Error::File { path: path.display().to_string(), source };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, content).map_err(io)
}

fn or_default(p: &Path, default: PathBuf) -> PathBuf {
    if p.as_os_str().is_empty() {
        default
    } else {
        p.to_path_buf()
    }
}

/// Resolved file locations for a configuration.
pub struct Paths<'a> {
    cfg: &'a RunConfig,
}

impl<'a> Paths<'a> {
    pub fn new(cfg: &'a RunConfig) -> Self {
        Paths { cfg }
    }

    fn out(&self, rel: &str) -> PathBuf {
        self.cfg.output_dir.join(rel)
    }

    pub fn source(&self, lang: &str) -> PathBuf {
        self.cfg.data_dir.join(format!("{lang}.src.conllu"))
    }

    pub fn target(&self, lang: &str) -> PathBuf {
        self.cfg.data_dir.join(format!("{lang}.tgt.txt"))
    }

    pub fn gold_alignment(&self, lang: &str) -> PathBuf {
        self.cfg.data_dir.join(format!("{lang}.gold.align"))
    }

    pub fn gold_target(&self, lang: &str) -> PathBuf {
        self.cfg.data_dir.join(format!("{lang}.gold.conllu"))
    }

    pub fn manifest(&self) -> PathBuf {
        or_default(&self.cfg.manifest, self.cfg.data_dir.join("manifest.tsv"))
    }

    pub fn test(&self) -> PathBuf {
        or_default(&self.cfg.test, self.cfg.data_dir.join("test.conllu"))
    }

    pub fn alignment(&self, lang: &str) -> PathBuf {
        self.out(&format!("align/{lang}.align"))
    }

    pub fn projected(&self, lang: &str) -> PathBuf {
        self.out(&format!("project/{lang}.projected.conllu"))
    }

    pub fn selected(&self, lang: &str) -> PathBuf {
        self.out(&format!("project/{lang}.selected.conllu"))
    }

    pub fn single_source(&self) -> PathBuf {
        self.out("calibrate/single.conllu")
    }

    pub fn calibrated(&self) -> PathBuf {
        self.out("calibrate/calibrated.conllu")
    }

    pub fn train_input(&self) -> PathBuf {
        or_default(&self.cfg.train_input, self.calibrated())
    }

    pub fn train_model(&self) -> PathBuf {
        or_default(&self.cfg.train_model, self.out("models/model.json"))
    }

    pub fn tag_model(&self) -> PathBuf {
        or_default(&self.cfg.tag_model, self.train_model())
    }

    pub fn tag_input(&self) -> PathBuf {
        or_default(&self.cfg.tag_input, self.test())
    }

    pub fn tag_output(&self) -> PathBuf {
        or_default(&self.cfg.tag_output, self.out("tagged.conllu"))
    }

    pub fn eval_pred(&self) -> PathBuf {
        or_default(&self.cfg.eval_pred, self.tag_output())
    }

    pub fn eval_gold(&self) -> PathBuf {
        or_default(&self.cfg.eval_gold, self.test())
    }

    /// Reports are written to `{prefix}.txt`, `{prefix}.kv` and `{prefix}.tsv`.
    pub fn eval_report(&self) -> PathBuf {
        or_default(&self.cfg.eval_report, self.out("eval"))
    }
}

/// Metadata sidecar next to a projected CoNLL-U file.
pub fn meta_path(conllu: &Path) -> PathBuf {
    conllu.with_extension("meta")
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

/// Run `f` on a thread pool sized by `threads` and tag errors with `stage`.
fn staged<T: Send>(cfg: &RunConfig, stage: &'static str, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let run = || {
        cfg.validate()?;
        f()
    };
    let result = if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| Error::Config(format!("threads: {e}")))
            .and_then(|pool| pool.install(run))
    } else {
        run()
    };
    result.map_err(|e| e.in_stage(stage))
}

fn read_pairs(run: &mut Run, paths: &Paths, lang: &str, tagset: &TagSet) -> Result<Vec<ParallelPair>> {
    let sources = parse_conllu(&run.read(&paths.source(lang))?, tagset)?;
    let targets = parse_plain(&run.read(&paths.target(lang))?);
    if targets.skipped_blank > 0 {
        return Err(Error::Contract(format!("{}: blank target lines", paths.target(lang).display())));
    }
    zip_pairs(sources, targets.sentences)
}

/// Gold-tagged CoNLL-U or whitespace-tokenized text, chosen by extension.
fn read_sentences(run: &mut Run, path: &Path, tagset: &TagSet) -> Result<Vec<TaggedSentence>> {
    let text = run.read(path)?;
    if path.extension().is_some_and(|e| e == "conllu") {
        parse_conllu(&text, tagset)
    } else {
        let plain = parse_plain(&text);
        Ok(plain.sentences)
    }
}

/// Write a multilingual synthetic corpus into `data.dir`.
pub fn cmd_synth(cfg: &RunConfig) -> Result<()> {
    staged(cfg, "synth", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("synth");
        let corpus = generate_multilingual(
            &cfg.synth_spec(),
            &tagset,
            &cfg.languages,
            cfg.synth.disagreement,
            cfg.synth.num_test,
        )?;
        for lang in &corpus.languages {
            let l = &lang.language;
            let sources: Vec<TaggedSentence> = lang.pairs.iter().map(|p| p.source.clone()).collect();
            let targets: Vec<TaggedSentence> = lang.pairs.iter().map(|p| p.target.clone()).collect();
            run.write(&paths.source(l), &write_conllu(&sources, &tagset))?;
            run.write(&paths.target(l), &write_plain(&targets))?;
            run.write(&paths.gold_alignment(l), &write_alignments(&lang.gold_alignments))?;
            run.write(&paths.gold_target(l), &write_conllu(&lang.gold_target, &tagset))?;
        }
        run.write(&paths.manifest(), &write_manifest(&corpus.manifest))?;
        run.write(&paths.test(), &write_conllu(&corpus.test, &tagset))?;
        run.finish(cfg, &cfg.data_dir)
    })
}

/// Align every configured language.
pub fn cmd_align(cfg: &RunConfig) -> Result<()> {
    staged(cfg, "align", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("align");
        for lang in &cfg.languages {
            let pairs = read_pairs(&mut run, &paths, lang, &tagset)?;
            let out = align_bidirectional(&pairs, &cfg.align_config())?;
            let base = paths.alignment(lang);
            run.write(&base, &write_alignments(&out.alignments))?;
            run.write(&base.with_extension("fwd.tsv"), &out.forward.table.to_tsv())?;
            run.write(&base.with_extension("bwd.tsv"), &out.backward.table.to_tsv())?;
            let mut ll = String::from("iteration\tforward\tbackward\n");
            for (i, (f, b)) in out.forward.log_likelihood.iter().zip(&out.backward.log_likelihood).enumerate() {
                ll.push_str(&format!("{i}\t{f}\t{b}\n"));
            }
            run.write(&base.with_extension("ll.tsv"), &ll)?;
        }
        run.finish(cfg, &cfg.output_dir)
    })
}

/// Project tags over the alignments, apply type constraints and select.
pub fn cmd_project(cfg: &RunConfig) -> Result<()> {
    staged(cfg, "project", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("project");
        for lang in &cfg.languages {
            let pairs = read_pairs(&mut run, &paths, lang, &tagset)?;
            let alignments = read_alignments(&run.read(&paths.alignment(lang))?, Direction::Symmetrized)?;
            let out = project_corpus(&pairs, &alignments, lang, tagset.len(), &cfg.projector)?;
            write_projected(&mut run, &paths.projected(lang), &out.constrained, &tagset)?;
            write_projected(&mut run, &paths.selected(lang), &out.selected, &tagset)?;
            run.write(&paths.projected(lang).with_extension("dict.tsv"), &out.dictionary.to_tsv(&tagset))?;
        }
        run.finish(cfg, &cfg.output_dir)
    })
}

fn write_projected(run: &mut Run, path: &Path, corpus: &[ProjectedSentence], tagset: &TagSet) -> Result<()> {
    let sentences: Vec<TaggedSentence> = corpus.iter().map(|s| s.sentence.clone()).collect();
    run.write(path, &write_conllu(&sentences, tagset))?;
    run.write(&meta_path(path), &write_metadata(corpus))
}

fn load_projected(run: &mut Run, path: &Path, tagset: &TagSet) -> Result<Vec<ProjectedSentence>> {
    let conllu = run.read(path)?;
    let meta = run.read(&meta_path(path))?;
    read_projected(&conllu, &meta, tagset)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSummary {
    pub best_language: String,
    pub stats: CorpusStats,
    pub groups: usize,
    pub density: DensityStats,
}

/// Vote over the manifest groups, then select from the calibrated best
/// renderings. Also writes the best language's own selection as the
/// single-source baseline.
pub fn cmd_calibrate(cfg: &RunConfig) -> Result<CalibrationSummary> {
    staged(cfg, "calibrate", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("calibrate");
        let mut projected: BTreeMap<&str, Vec<ProjectedSentence>> = BTreeMap::new();
        for lang in &cfg.languages {
            projected.insert(lang, load_projected(&mut run, &paths.projected(lang), &tagset)?);
        }
        let stats = corpus_stats(projected.values().map(Vec::as_slice));
        let best = best_language(&cfg.languages, &stats).expect("languages validated non-empty").to_string();
        let manifest = parse_manifest(&run.read(&paths.manifest())?)?;
        let mut calibrated = Vec::with_capacity(manifest.len());
        for group in &manifest {
            let mut renderings = Vec::with_capacity(group.renderings.len());
            for (lang, id) in &group.renderings {
                let corpus = projected.get(lang.as_str()).ok_or_else(|| {
                    Error::Contract(format!("group {} references unconfigured language `{lang}`", group.group_id))
                })?;
                let s = usize::try_from(*id)
                    .ok()
                    .and_then(|i| i.checked_sub(1))
                    .and_then(|i| corpus.get(i))
                    .filter(|s| s.pair_id == *id)
                    .ok_or_else(|| Error::Contract(format!("group {}: no pair {id} in `{lang}`", group.group_id)))?;
                renderings.push(s.clone());
            }
            let g = RenderingGroup::new(group.group_id.clone(), renderings)?;
            calibrated.push(calibrate(&g, select_best_rendering(&g, &stats), tagset.len())?);
        }
        let selected = select_training_sentences(&calibrated, cfg.projector.min_coverage, cfg.projector.top_k)?;
        let baseline = load_projected(&mut run, &paths.selected(&best), &tagset)?;
        write_projected(&mut run, &paths.calibrated(), &selected, &tagset)?;
        write_projected(&mut run, &paths.single_source(), &baseline, &tagset)?;
        let density = density_stats(&baseline, &selected)?;
        let mut summary = format!("best_language={best}\ngroups={}\n", manifest.len());
        for (lang, (c, p)) in &stats {
            summary.push_str(&format!("stats.{lang}.mean_coverage={c}\nstats.{lang}.mean_link_prob={p}\n"));
        }
        summary.push_str(&format!(
            "density.before_sentences={}\ndensity.after_sentences={}\ndensity.before={}\ndensity.after={}\n\
             density.delta_examples={}\ndensity.delta_density={}\n",
            density.before_sentences,
            density.after_sentences,
            density.before_density,
            density.after_density,
            density.delta_examples,
            density.delta_density
        ));
        run.write(&paths.calibrated().with_file_name("summary.kv"), &summary)?;
        run.finish(cfg, &cfg.output_dir)?;
        Ok(CalibrationSummary { best_language: best, stats, groups: manifest.len(), density })
    })
}

fn train_typed<T: Scalar>(cfg: &RunConfig, sentences: &[TaggedSentence]) -> Result<(String, Vec<f64>)> {
    let mut model = TaggerModel::<T>::from_corpus(cfg.tagger_config(), sentences, TagSet::upos())?;
    let corpus: Vec<_> = sentences.iter().map(|s| model.example(s)).collect();
    let out = train(&mut model, &corpus)?;
    Ok((model.to_json()?, out.loss_history))
}

/// Train a tagger on `train.input` and write it to `train.model`.
pub fn cmd_train(cfg: &RunConfig) -> Result<Vec<f64>> {
    staged(cfg, "train", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("train");
        let sentences = parse_conllu(&run.read(&paths.train_input())?, &tagset)?;
        if sentences.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let (json, history) = match cfg.precision {
            Precision::F32 => train_typed::<f32>(cfg, &sentences)?,
            Precision::F64 => train_typed::<f64>(cfg, &sentences)?,
        };
        let model_path = paths.train_model();
        run.write(&model_path, &json)?;
        let mut loss = String::from("epoch\tloss\n");
        for (e, l) in history.iter().enumerate() {
            loss.push_str(&format!("{e}\t{l}\n"));
        }
        run.write(&model_path.with_extension("loss.tsv"), &loss)?;
        run.finish(cfg, &cfg.output_dir)?;
        Ok(history)
    })
}

fn load_model(run: &mut Run, path: &Path) -> Result<AnyTagger> {
    AnyTagger::from_json(&run.read(path)?)
}

/// Tag `tag.input` with `tag.model`, writing CoNLL-U to `tag.output`.
pub fn cmd_tag(cfg: &RunConfig) -> Result<()> {
    staged(cfg, "tag", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("tag");
        let model = load_model(&mut run, &paths.tag_model())?;
        let input = read_sentences(&mut run, &paths.tag_input(), &tagset)?;
        let tagged = match &model {
            AnyTagger::F32(m) => m.annotate(&input)?,
            AnyTagger::F64(m) => m.annotate(&input)?,
        };
        run.write(&paths.tag_output(), &write_conllu(&tagged, model.tagset()))?;
        run.finish(cfg, &cfg.output_dir)
    })
}

/// Score `eval.pred` against `eval.gold`. The OOV rate uses the vocabulary of
/// `tag.model` when that file exists.
pub fn cmd_eval(cfg: &RunConfig) -> Result<EvalReport> {
    staged(cfg, "eval", || {
        let tagset = TagSet::upos();
        let paths = Paths::new(cfg);
        let mut run = Run::new("eval");
        let pred = parse_conllu(&run.read(&paths.eval_pred())?, &tagset)?;
        let gold = parse_conllu(&run.read(&paths.eval_gold())?, &tagset)?;
        let model_path = paths.tag_model();
        let vocab: Option<Vocabulary> =
            if model_path.exists() { Some(load_model(&mut run, &model_path)?.words().clone()) } else { None };
        let report = score(&pred, &gold, &tagset, EvalOptions { exclude_punct: cfg.exclude_punct }, vocab.as_ref())?;
        let prefix = paths.eval_report();
        run.write(&with_suffix(&prefix, ".txt"), &report.to_table())?;
        run.write(&with_suffix(&prefix, ".kv"), &report.to_key_values())?;
        run.write(&with_suffix(&prefix, ".tsv"), &report.per_tag_tsv())?;
        run.finish(cfg, &cfg.output_dir)?;
        Ok(report)
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineSummary {
    pub calibration: Option<CalibrationSummary>,
    pub single: EvalReport,
    /// Present when a manifest was available.
    pub multi: Option<EvalReport>,
}

/// align, project, calibrate (when a manifest exists), then train, tag and
/// evaluate a single-source and a multi-source model.
pub fn cmd_pipeline(cfg: &RunConfig) -> Result<PipelineSummary> {
    staged(cfg, "pipeline", || Ok(()))?;
    let paths = Paths::new(cfg);
    cmd_align(cfg)?;
    cmd_project(cfg)?;
    let calibration = if paths.manifest().exists() { Some(cmd_calibrate(cfg)?) } else { None };
    let single_input = match &calibration {
        Some(_) => paths.single_source(),
        None => paths.selected(&cfg.languages[0]),
    };
    let out = |rel: &str| cfg.output_dir.join(rel);
    let evaluate = |name: &str, input: PathBuf| -> Result<EvalReport> {
        let mut c = cfg.clone();
        c.train_input = input;
        c.train_model = out(&format!("models/{name}.json"));
        c.tag_model = c.train_model.clone();
        c.tag_output = out(&format!("tagged.{name}.conllu"));
        c.eval_pred = c.tag_output.clone();
        c.eval_report = out(&format!("eval.{name}"));
        cmd_train(&c)?;
        cmd_tag(&c)?;
        cmd_eval(&c)
    };
    let single = evaluate("single", single_input)?;
    let multi = match calibration {
        Some(_) => Some(evaluate("multi", paths.calibrated())?),
        None => None,
    };
    let mut summary = format!("single.token_accuracy={}\nsingle.macro_f1={}\n", single.token_accuracy, single.macro_f1);
    if let Some(m) = &multi {
        summary.push_str(&format!("multi.token_accuracy={}\nmulti.macro_f1={}\n", m.token_accuracy, m.macro_f1));
    }
    staged(cfg, "pipeline", || {
        let mut run = Run::new("pipeline");
        run.write(&out("summary.kv"), &summary)?;
        run.finish(cfg, &cfg.output_dir)
    })?;
    Ok(PipelineSummary { calibration, single, multi })
}
