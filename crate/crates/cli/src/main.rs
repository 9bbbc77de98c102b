use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use projtag::config::RunConfig;
use projtag::pipeline;
use projtag::{Error, Result};

#[derive(Parser)]
#[command(name = "projtag", version, about = "Train a target-language POS tagger from tag projection over parallel text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic multilingual corpus with gold files into data.dir
    Synth(Common),
    /// Align every language in both directions, symmetrize and filter
    Align(Common),
    /// Project tags, apply type constraints and select training sentences
    Project(Common),
    /// Vote over rendering groups from the manifest
    Calibrate(Common),
    /// Train a tagger on train.input
    Train(Common),
    /// Tag tag.input with tag.model
    Tag(Common),
    /// Score eval.pred against eval.gold
    Eval(Common),
    /// align, project, calibrate, then train, tag and evaluate both taggers
    Pipeline(Common),
    /// Print every configuration key with its value after overrides
    Config(Common),
}

#[derive(Args)]
struct Common {
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides as `--key value` or `--key=value`
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "--KEY VALUE")]
    overrides: Vec<String>,
}

fn apply_overrides(cfg: &mut RunConfig, args: &[String]) -> Result<()> {
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        let key = arg
            .strip_prefix("--")
            .ok_or_else(|| Error::Config(format!("expected --key, got `{arg}`")))?;
        match key.split_once('=') {
            Some((k, v)) => cfg.set(k, v)?,
            None => {
                let value = it.next().ok_or_else(|| Error::Config(format!("--{key} needs a value")))?;
                cfg.set(key, value)?;
            }
        }
    }
    Ok(())
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::File { path: path.display().to_string(), source })?;
        cfg.apply_text(&text)?;
    }
    apply_overrides(&mut cfg, &common.overrides)?;
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(c) => pipeline::cmd_synth(&load(&c)?),
        Command::Align(c) => pipeline::cmd_align(&load(&c)?),
        Command::Project(c) => pipeline::cmd_project(&load(&c)?),
        Command::Calibrate(c) => {
            let s = pipeline::cmd_calibrate(&load(&c)?)?;
            println!("best_language={} groups={}", s.best_language, s.groups);
            println!("delta_examples={} delta_density={}", s.density.delta_examples, s.density.delta_density);
            Ok(())
        }
        Command::Train(c) => {
            for (epoch, loss) in pipeline::cmd_train(&load(&c)?)?.iter().enumerate() {
                println!("epoch {epoch}\tloss {loss}");
            }
            Ok(())
        }
        Command::Tag(c) => pipeline::cmd_tag(&load(&c)?),
        Command::Eval(c) => {
            print!("{}", pipeline::cmd_eval(&load(&c)?)?.to_table());
            Ok(())
        }
        Command::Pipeline(c) => {
            let s = pipeline::cmd_pipeline(&load(&c)?)?;
            if let Some(cal) = &s.calibration {
                println!("best_language={}", cal.best_language);
            }
            println!("single.token_accuracy={}", s.single.token_accuracy);
            if let Some(m) = &s.multi {
                println!("multi.token_accuracy={}", m.token_accuracy);
            }
            Ok(())
        }
        Command::Config(c) => {
            print!("{}", load(&c)?.snapshot());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("projtag: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
