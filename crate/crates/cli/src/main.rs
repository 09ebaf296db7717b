use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind as ClapErrorKind;
use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use quatnet_core::features::{load_features, load_wav, logmel_extract, save_features, LogMelConfig};
use quatnet_core::selftest;
use quatnet_core::train::{
    evaluate, param_count, prepare, presets, synth, Architecture, Checkpoint, Config, Dataset, TrainOptions, Trainer,
};
use quatnet_core::{Error, ErrorKind};

#[derive(Parser, Debug)]
#[command(name = "quatnet", version, about = "Quaternion neural networks for acoustic features")]
struct Cli {
    /// Overrides the model init seed and the training seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for evaluation.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Model and training configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Convert a 16-bit mono WAV or a CSV matrix into a QACF1 feature file.
    Features {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Mel bands for WAV input.
        #[arg(long, default_value_t = 40)]
        bands: usize,
    },
    /// Train a model; writes metrics.jsonl, last.qnn and best.qnn.
    Train {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        /// Continue from a checkpoint with training state.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Decode a dataset with a checkpoint and print a JSON report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-layer parameter counts of the configured model.
    Params {
        #[arg(long)]
        json: bool,
    },
    /// Run the algebra, gradient and CTC self checks.
    Selftest,
    /// Print a built-in configuration as TOML.
    Preset {
        #[arg(value_enum)]
        name: PresetName,
        /// Hidden width for the recurrent paper presets.
        #[arg(long, default_value_t = 1024)]
        hidden: usize,
    },
    /// Write a synthetic dataset.
    Synth {
        #[arg(long, value_enum)]
        kind: SynthKind,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 64)]
        utterances: usize,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetName {
    CnnPaper,
    QcnnPaper,
    RnnPaper,
    QrnnPaper,
    CnnToy,
    QcnnToy,
    RnnToy,
    QrnnToy,
}

impl PresetName {
    fn config(self, hidden: usize) -> Config {
        match self {
            PresetName::CnnPaper => presets::cnn_paper(),
            PresetName::QcnnPaper => presets::qcnn_paper(),
            PresetName::RnnPaper => presets::rnn_paper(hidden),
            PresetName::QrnnPaper => presets::qrnn_paper(hidden),
            PresetName::CnnToy => presets::conv_toy(Architecture::Cnn),
            PresetName::QcnnToy => presets::conv_toy(Architecture::Qcnn),
            PresetName::RnnToy => presets::recurrent_toy(Architecture::Rnn),
            PresetName::QrnnToy => presets::recurrent_toy(Architecture::Qrnn),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthKind {
    Ctc,
    Framewise,
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Numerical => 3,
    }
}

fn load_config(cli: &Cli) -> Result<Config, Error> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::InvalidConfig("--config PATH is required".into()))?;
    let mut config = Config::load(path)?;
    if let Some(seed) = cli.seed {
        config.model.init_seed = seed;
        config.train.seed = seed;
    }
    Ok(config)
}

fn features(input: &Path, output: &Path, bands: usize) -> Result<(), Error> {
    let is_wav = input.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav"));
    let m = if is_wav {
        let (samples, rate) = load_wav(input)?;
        logmel_extract(&samples, rate as f64, bands, &LogMelConfig::default())?
    } else {
        load_features(input)?
    };
    save_features(&m, output)?;
    eprintln!("{}: {} bands x {} frames", output.display(), m.bands(), m.frames());
    Ok(())
}

fn train(cli: &Cli, train: &Path, dev: &Path, out: &Path, epochs: Option<usize>, resume: Option<&Path>) -> Result<(), Error> {
    let mut trainer = match resume {
        Some(path) => Trainer::resume(&Checkpoint::load(path)?)?,
        None => Trainer::new(load_config(cli)?)?,
    };
    let config = trainer.config().clone();
    let m = &config.model;
    let train_set = Dataset::load_dir(train)?;
    let dev_set = Dataset::load_dir(dev)?;
    train_set.check(m.input_bands, m.classes, m.head)?;
    dev_set.check(m.input_bands, m.classes, m.head)?;
    let train_p = prepare(&train_set, config.train.standardize);
    let dev_p = prepare(&dev_set, config.train.standardize);
    let options = TrainOptions {
        out_dir: Some(out.to_path_buf()),
        threads: cli.threads,
        epochs,
    };
    trainer.fit(&train_p, &dev_p, &options, |r| {
        eprintln!(
            "epoch {:>3}  train {:.5}  dev {:.5}  per {:6.2}%  lr {:e}",
            r.epoch, r.train_loss, r.dev_loss, r.dev_per, r.lr
        );
    })
}

fn eval(cli: &Cli, checkpoint: &Path, data: &Path, out: Option<&Path>) -> Result<(), Error> {
    let ck = Checkpoint::load(checkpoint)?;
    let report = evaluate(&ck, &Dataset::load_dir(data)?, cli.threads)?;
    let text = serde_json::to_string_pretty(&report).expect("report serialises");
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    eprintln!("PER {:.2}% over {} reference tokens", report.per, report.reference_tokens);
    Ok(())
}

/// Exit status when a self check fails.
const CHECK_FAILED: u8 = 3;

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::Features { input, output, bands } => features(input, output, *bands)?,
        Command::Train {
            train: t,
            dev,
            out,
            epochs,
            resume,
        } => train(cli, t, dev, out, *epochs, resume.as_deref())?,
        Command::Eval { checkpoint, data, out } => eval(cli, checkpoint, data, out.as_deref())?,
        Command::Params { json } => {
            let table = param_count(&load_config(cli)?.model)?;
            if *json {
                println!("{}", serde_json::to_string_pretty(&table).expect("table serialises"));
            } else {
                print!("{}", table.render());
            }
        }
        Command::Selftest => {
            let results = selftest::run_all(cli.seed.unwrap_or(0))?;
            let mut ok = true;
            for r in &results {
                println!(
                    "{} {}: worst {:.3e} (tolerance {:.0e})",
                    if r.passed { "ok  " } else { "FAIL" },
                    r.name,
                    r.worst,
                    r.tolerance
                );
                ok &= r.passed;
            }
            if !ok {
                return Ok(ExitCode::from(CHECK_FAILED));
            }
        }
        Command::Preset { name, hidden } => {
            let mut config = name.config(*hidden);
            if let Some(seed) = cli.seed {
                config.model.init_seed = seed;
                config.train.seed = seed;
            }
            config.validate()?;
            print!("{}", config.to_toml()?);
        }
        Command::Synth { kind, out, utterances } => {
            let seed = cli.seed.unwrap_or(0);
            let set = match kind {
                SynthKind::Ctc => synth::ctc_toy(*utterances, seed),
                SynthKind::Framewise => synth::framewise_toy(*utterances, seed),
            };
            set.save_dir(out)?;
            eprintln!("wrote {} utterances to {}", set.len(), out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ClapErrorKind::DisplayHelp | ClapErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let kind = e.kind();
            if kind == ErrorKind::Usage {
                eprintln!("\n{}", Cli::command().render_help());
            }
            ExitCode::from(exit_code(kind))
        }
    }
}
