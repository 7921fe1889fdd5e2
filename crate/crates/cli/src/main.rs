//! `tempclust` command-line tool.
//!
//! Exit status: 0 success, 1 usage error, 2 data error, 3 numeric failure.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tempclust::augment::{fast_augment, AugmentConfig};
use tempclust::coarsen::{coarsen, CoarsenMode, CoarseningSpec};
use tempclust::codec::{FeatureCodec, Schema};
use tempclust::eval::{evaluate_predictions, fgsm_predictions, invariance_gap};
use tempclust::model::{train, Model, MreConfig, TrainConfig, DEFAULT_RESOLUTIONS};
use tempclust::records::{format_features, format_record, labeled, read_records, SequenceRecord};
use tempclust::synth::{generate, SynthConfig};
use tempclust::{Error, Result};

#[derive(Parser)]
#[command(name = "tempclust", version, about = "Temporal-clustering tools for irregular event sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic labeled corpus as train/val/test record files.
    Synth {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed of the configuration file.
        #[arg(long)]
        seed: u64,
    },
    /// Apply grid&count or cluster&count to every record.
    Coarsen {
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        p: f64,
        /// Grid window `A,B`; defaults to each sequence's span.
        #[arg(long, value_parser = parse_pair)]
        interval: Option<(f64, f64)>,
        /// Place occupied grid cells at their grid time.
        #[arg(long)]
        snap_to_grid: bool,
        #[command(flatten)]
        io: InOut,
    },
    /// Draw one fast augmentation of every record.
    Augment {
        #[arg(long)]
        p_high: f64,
        /// Merge closer events with higher probability.
        #[arg(long)]
        weighted: bool,
        #[arg(long)]
        seed: u64,
        #[command(flatten)]
        io: InOut,
    },
    /// Fit a feature codec on training records.
    FitCodec {
        #[arg(long = "in")]
        input: PathBuf,
        /// JSON variable schema; all variables are real when omitted.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the feature matrix of every record.
    Featurize {
        #[arg(long)]
        codec: PathBuf,
        #[command(flatten)]
        io: InOut,
    },
    /// Train a predictor on DIR/train.jsonl, tracking loss on DIR/val.jsonl.
    Train(TrainArgs),
    /// Score a model on labeled records.
    Evaluate(EvalArgs),
}

#[derive(Args)]
struct InOut {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Grid,
    Cluster,
}

impl From<Mode> for CoarsenMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Grid => CoarsenMode::Grid,
            Mode::Cluster => CoarsenMode::Cluster,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    codec: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: u64,
    /// Replace every training sequence by a fresh fast augmentation each
    /// epoch, with this p_high.
    #[arg(long, value_name = "P_HIGH")]
    augment: Option<f64>,
    #[arg(long, requires = "augment")]
    weighted: bool,
    /// Train a multi-resolution ensemble with this coarsening operator.
    #[arg(long, value_enum)]
    mre: Option<Mode>,
    #[arg(long, requires = "mre", value_delimiter = ',')]
    resolutions: Option<Vec<f64>>,
    #[arg(long, requires = "mre", value_parser = parse_pair)]
    interval: Option<(f64, f64)>,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    /// Write the per-epoch loss trace here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    codec: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Number of bootstrap resamples.
    #[arg(long, requires = "seed")]
    bootstrap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Also score inputs perturbed by an FGSM step of this size.
    #[arg(long)]
    fgsm: Option<f64>,
    /// Mean prediction change under coarsening, as `MODE,P`.
    #[arg(long, value_parser = parse_gap)]
    invariance_gap: Option<(CoarsenMode, f64)>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Kv,
}

fn parse_pair(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected A,B")?;
    let a = a.trim().parse::<f64>().map_err(|e| e.to_string())?;
    let b = b.trim().parse::<f64>().map_err(|e| e.to_string())?;
    Ok((a, b))
}

fn parse_gap(s: &str) -> std::result::Result<(CoarsenMode, f64), String> {
    let (m, p) = s.split_once(',').ok_or("expected MODE,P")?;
    let mode = m.trim().parse::<CoarsenMode>().map_err(|e| e.to_string())?;
    Ok((mode, p.trim().parse::<f64>().map_err(|e| e.to_string())?))
}

fn read_file(path: &Path) -> Result<Vec<SequenceRecord>> {
    let file = fs::File::open(path).map_err(|e| io_context(e, path))?;
    read_records(BufReader::new(file))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_context(e, path))
}

fn io_context(e: io::Error, path: &Path) -> Error {
    Error::Io(io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = Result<String>>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_context(e, path))?;
    let mut w = BufWriter::new(file);
    for line in lines {
        writeln!(w, "{}", line?)?;
    }
    w.flush()?;
    Ok(())
}

fn write_records_to(path: &Path, records: &[SequenceRecord]) -> Result<()> {
    write_lines(path, records.iter().map(|r| Ok(format_record(r))))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth { config, out, seed } => {
            let cfg = SynthConfig { seed, ..SynthConfig::from_json(&read_text(&config)?)? };
            let data = generate(&cfg)?;
            fs::create_dir_all(&out)?;
            for (name, split) in [("train", data.train), ("val", data.val), ("test", data.test)] {
                let records: Vec<SequenceRecord> = split.items.into_iter().map(Into::into).collect();
                write_records_to(&out.join(format!("{name}.jsonl")), &records)?;
            }
            Ok(())
        }
        Command::Coarsen { mode, p, interval, snap_to_grid, io } => {
            let spec = CoarseningSpec { mode: mode.into(), p, interval, snap_to_grid };
            spec.validate()?;
            let records = read_file(&io.input)?;
            let lines = records.iter().map(|r| Ok(format_record(&r.with_sequence(coarsen(&r.sequence, &spec)?))));
            write_lines(&io.out, lines)
        }
        Command::Augment { p_high, weighted, seed, io } => {
            let cfg = AugmentConfig { p_high, weighted, rng_seed: seed };
            cfg.validate()?;
            let records = read_file(&io.input)?;
            let lines = records.iter().enumerate().map(|(i, r)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                Ok(format_record(&r.with_sequence(fast_augment(&r.sequence, &cfg, &mut rng)?)))
            });
            write_lines(&io.out, lines)
        }
        Command::FitCodec { input, schema, out } => {
            let records = read_file(&input)?;
            let schema = match schema {
                Some(path) => Schema::from_json(&read_text(&path)?)?,
                None => {
                    let first = records.first().ok_or(Error::EmptyDataset("codec fitting needs records"))?;
                    Schema::all_real(first.sequence.dim())
                }
            };
            let codec = FeatureCodec::fit(&schema, records.iter().map(|r| &r.sequence))?;
            fs::write(&out, codec.to_text()).map_err(|e| io_context(e, &out))
        }
        Command::Featurize { codec, io } => {
            let codec = FeatureCodec::from_text(&read_text(&codec)?)?;
            let records = read_file(&io.input)?;
            let lines = records
                .iter()
                .map(|r| Ok(format_features(&r.sequence.id, &codec.featurize(&r.sequence)?)));
            write_lines(&io.out, lines)
        }
        Command::Train(args) => run_train(args),
        Command::Evaluate(args) => run_evaluate(args),
    }
}

fn run_train(a: TrainArgs) -> Result<()> {
    let codec = FeatureCodec::from_text(&read_text(&a.codec)?)?;
    let train_set = labeled(read_file(&a.input.join("train.jsonl"))?)?;
    let val_path = a.input.join("val.jsonl");
    let val_set = if val_path.exists() { labeled(read_file(&val_path)?)? } else { Vec::new() };
    let cfg = TrainConfig {
        epochs: a.epochs,
        learning_rate: a.lr,
        momentum: a.momentum,
        batch_size: a.batch_size,
        hidden: a.hidden,
        seed: a.seed,
        augment: a.augment.map(|p_high| AugmentConfig { p_high, weighted: a.weighted, rng_seed: a.seed }),
        mre: a.mre.map(|mode| MreConfig {
            mode: mode.into(),
            resolutions: a.resolutions.clone().unwrap_or_else(|| DEFAULT_RESOLUTIONS.to_vec()),
            interval: a.interval,
        }),
    };
    let outcome = train(&train_set, &val_set, &codec, &cfg)?;
    fs::write(&a.out, outcome.model.to_text()).map_err(|e| io_context(e, &a.out))?;
    if let Some(path) = &a.trace {
        let lines = outcome.trace.iter().map(|s| {
            Ok(match s.val_loss {
                Some(v) => format!("{} {} {}", s.epoch, s.train_loss, v),
                None => format!("{} {}", s.epoch, s.train_loss),
            })
        });
        write_lines(path, lines)?;
    }
    Ok(())
}

fn run_evaluate(a: EvalArgs) -> Result<()> {
    let model = Model::from_text(&read_text(&a.model)?)?;
    let codec = FeatureCodec::from_text(&read_text(&a.codec)?)?;
    let data = labeled(read_file(&a.input)?)?;
    let labels: Vec<_> = data.iter().map(|d| d.label.clone()).collect();
    let preds: Vec<Vec<f64>> = data.iter().map(|d| model.predict(&d.sequence, &codec)).collect::<Result<_>>()?;
    let boot = a.bootstrap.map(|runs| (runs, a.seed.expect("clap enforces --seed")));
    let mut report = evaluate_predictions(model.task(), &preds, &labels, boot)?;
    if let Some(eps) = a.fgsm {
        let adv = fgsm_predictions(&model, &codec, &data, eps)?;
        let adv_report = evaluate_predictions(model.task(), &adv, &labels, None)?;
        report.annotate("fgsm.eps", eps);
        for m in &adv_report.metrics {
            report.annotate(format!("fgsm.{}", m.name), m.value);
        }
    }
    if let Some((mode, p)) = a.invariance_gap {
        let spec = CoarseningSpec { mode, p, interval: None, snap_to_grid: false };
        spec.validate()?;
        let seqs: Vec<_> = data.iter().map(|d| d.sequence.clone()).collect();
        let gap = invariance_gap(|s| model.predict(s, &codec), &seqs, |_, s| coarsen(s, &spec))?;
        report.annotate("invariance_gap.mode", mode);
        report.annotate("invariance_gap.p", p);
        let values: Vec<String> = gap.iter().map(ToString::to_string).collect();
        report.annotate("invariance_gap", values.join(","));
    }
    let text = match a.format {
        Format::Text => report.render_text(),
        Format::Kv => report.render_kv(),
    };
    match &a.out {
        Some(path) => fs::write(path, text).map_err(|e| io_context(e, path)),
        None => {
            io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() {
                1
            } else if e.is_numeric() {
                3
            } else {
                2
            })
        }
    }
}
