//! `wrice`: synthesize, extract, train, evaluate, predict, augment and
//! inspect spectrograms from the command line.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use wrice::audio_io::{load_mono, read_wav, write_wav, WavEncoding, DEFAULT_SAMPLE_RATE, DEFAULT_SEGMENT_SECONDS};
use wrice::dataset::{
    extract_segments, ingest_corpus, read_features_csv, stratified_split, write_features_csv, ExtractionConfig,
    LabeledDataset,
};
use wrice::dsp::{stft, StftConfig, WindowKind};
use wrice::eval::{evaluate, noise_validation, DEFAULT_NOISE_SCALES};
use wrice::features::FeatureConfig;
use wrice::mlp::{fit, load_model, save_model, Arch, TrainConfig};
use wrice::synth::{add_noise, derive_seed, synth_corpus, ConditionSpec, DEFAULT_COUNTS};

#[derive(Parser)]
#[command(
    name = "wrice",
    version,
    about = "Wheel-rail adhesion condition estimation from rolling-noise audio"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic corpus (root/<category>/*.wav)
    Synth(SynthArgs),
    /// Extract a feature CSV from a corpus directory
    Extract(ExtractArgs),
    /// Train a model from a feature CSV or a corpus directory
    Train(TrainArgs),
    /// Score a model on a corpus or feature CSV, optionally under added noise
    Eval(EvalArgs),
    /// Classify WAV files
    Predict(PredictArgs),
    /// Add Gaussian noise to a WAV file (written as 32-bit float)
    Augment(AugmentArgs),
    /// Dump a magnitude spectrogram as CSV or PGM
    Spectrogram(SpectrogramArgs),
}

#[derive(Args, Clone, Copy)]
struct AnalysisArgs {
    /// Analysis sample rate in Hz
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    sr: u32,
    /// STFT frame length (power of two)
    #[arg(long, default_value_t = 2048)]
    frame: usize,
    /// STFT hop length
    #[arg(long, default_value_t = 512)]
    hop: usize,
}

impl AnalysisArgs {
    fn stft(&self) -> StftConfig {
        StftConfig {
            frame_len: self.frame,
            hop: self.hop,
            window: WindowKind::Hann,
        }
    }
}

#[derive(Args, Clone, Copy)]
struct ExtractionArgs {
    #[command(flatten)]
    analysis: AnalysisArgs,
    /// Segment length in seconds; each full segment becomes one row
    #[arg(long, default_value_t = DEFAULT_SEGMENT_SECONDS)]
    segment_seconds: f64,
}

impl ExtractionArgs {
    fn config(&self) -> ExtractionConfig {
        ExtractionConfig {
            sample_rate: self.analysis.sr,
            segment_seconds: self.segment_seconds,
            stft: self.analysis.stft(),
            features: FeatureConfig::default(),
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output corpus directory
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Sample rate of the generated files
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RATE)]
    sr: u32,
    /// Files per category: dry_40,dry_60,wet_40,wet_60
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_COUNTS)]
    counts: Vec<usize>,
}

#[derive(Args)]
struct ExtractArgs {
    /// Corpus directory
    #[arg(long = "in")]
    input: PathBuf,
    /// Feature CSV to write
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    extraction: ExtractionArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum ArchArg {
    /// Three hidden layers of 512
    Paper4,
    /// Two hidden layers of 512
    Compact3,
}

impl From<ArchArg> for Arch {
    fn from(a: ArchArg) -> Self {
        match a {
            ArchArg::Paper4 => Arch::Paper4,
            ArchArg::Compact3 => Arch::Compact3,
        }
    }
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["features", "input"])))]
struct TrainArgs {
    /// Feature CSV produced by `extract`
    #[arg(long)]
    features: Option<PathBuf>,
    /// Corpus directory (features are extracted on the fly)
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Model file to write
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    extraction: ExtractionArgs,
    #[arg(long, default_value_t = 60)]
    epochs: usize,
    #[arg(long, default_value_t = 32)]
    batch: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Seed for the split, initialization and shuffling
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, value_enum, default_value_t = ArchArg::Paper4)]
    arch: ArchArg,
    /// Also write the test-set report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["features", "input"])))]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    /// Corpus directory
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// Feature CSV (clean evaluation only)
    #[arg(long)]
    features: Option<PathBuf>,
    /// Comma-separated noise scales; requires --in
    #[arg(long, value_delimiter = ',', num_args = 1.., requires = "input")]
    noise: Option<Vec<f64>>,
    /// Seed for the noise realizations
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report as JSON
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// WAV files to classify
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Args)]
struct AugmentArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Noise standard deviation in full-scale units
    #[arg(long, default_value_t = DEFAULT_NOISE_SCALES[0])]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SpecFormat {
    Csv,
    Pgm,
}

#[derive(Args)]
struct SpectrogramArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = SpecFormat::Csv)]
    format: SpecFormat,
    #[command(flatten)]
    analysis: AnalysisArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Extract(a) => extract(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Predict(a) => predict(a),
        Command::Augment(a) => augment(a),
        Command::Spectrogram(a) => spectrogram(a),
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn synth(a: SynthArgs) -> Result<()> {
    let counts: [usize; 4] = a.counts.as_slice().try_into().context("--counts needs four values")?;
    let manifest = synth_corpus(&a.out, &counts, a.sr, a.seed)?;
    if !manifest.is_empty() {
        let specs: Vec<ConditionSpec> = ConditionSpec::categories().to_vec();
        write_json(
            &a.out.join("synth.json"),
            &json!({ "seed": a.seed, "sample_rate": a.sr, "counts": counts, "specs": specs }),
        )?;
    }
    println!("wrote {} files to {}", manifest.len(), a.out.display());
    Ok(())
}

fn extract(a: ExtractArgs) -> Result<()> {
    let ds = ingest_corpus(&a.input, &a.extraction.config())?;
    write_features_csv(&ds, &a.out)?;
    println!(
        "extracted {} rows ({}) to {}",
        ds.len(),
        class_summary(&ds),
        a.out.display()
    );
    Ok(())
}

fn class_summary(ds: &LabeledDataset) -> String {
    ds.label_map
        .iter()
        .zip(ds.class_counts())
        .map(|(l, n)| format!("{l}: {n}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn train(a: TrainArgs) -> Result<()> {
    let ds = match (&a.features, &a.input) {
        (Some(csv), _) => read_features_csv(csv)?,
        (None, Some(dir)) => ingest_corpus(dir, &a.extraction.config())?,
        (None, None) => unreachable!("clap requires one source"),
    };
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch,
        learning_rate: a.lr,
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let (train_set, test_set) = stratified_split(&ds, a.test_fraction, a.seed)?;
    info!("training on {} rows, testing on {}", train_set.len(), test_set.len());
    let (model, history) = fit(&train_set, a.arch.into(), &cfg)?;
    save_model(&model, &a.out)?;
    let report = evaluate(&model, &test_set)?;
    if let Some(path) = &a.report {
        write_json(
            path,
            &json!({
                "train_rows": train_set.len(),
                "test_fraction": a.test_fraction,
                "train_config": cfg,
                "layer_dims": model.network.layer_dims(),
                "extraction": model.extraction,
                "final_loss": history.loss.last(),
                "final_train_accuracy": history.accuracy.last(),
                "test": report,
            }),
        )?;
    }
    if let (Some(loss), Some(acc)) = (history.loss.last(), history.accuracy.last()) {
        println!("final training loss {loss:.6}, training accuracy {acc:.4}");
    }
    println!("test set: {}", report.render_text().trim_end());
    println!("model written to {}", a.out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    if let Some(scales) = &a.noise {
        let dir = a.input.as_ref().expect("clap enforces --in with --noise");
        let nv = noise_validation(&model, dir, scales, a.seed)?;
        if let Some(path) = &a.report {
            fs::write(path, nv.to_json() + "\n").with_context(|| format!("writing {}", path.display()))?;
        }
        print!("{}", nv.render_text());
        return Ok(());
    }
    let ds = match (&a.features, &a.input) {
        (Some(csv), _) => read_features_csv(csv)?,
        (None, Some(dir)) => ingest_corpus(dir, &model.extraction)?,
        (None, None) => unreachable!("clap requires one source"),
    };
    if ds.config != model.extraction {
        bail!("feature CSV was extracted with a different configuration than the model expects");
    }
    let report = evaluate(&model, &ds)?;
    if let Some(path) = &a.report {
        write_json(
            path,
            &json!({ "extraction": model.extraction, "layer_dims": model.network.layer_dims(), "report": report }),
        )?;
    }
    print!("{}", report.render_text());
    Ok(())
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let extractor = model.extraction.extractor()?;
    println!("source,label,{}", model.label_map.join(","));
    for path in &a.files {
        let buf = load_mono(path, model.extraction.sample_rate).with_context(|| path.display().to_string())?;
        for (source, fv) in extract_segments(&buf, &path.display().to_string(), &model.extraction, &extractor)? {
            let p = model.predict(&fv)?;
            let probs: Vec<String> = p.probabilities.iter().map(|v| format!("{v:.6}")).collect();
            println!("{source},{},{}", p.label, probs.join(","));
        }
    }
    Ok(())
}

fn augment(a: AugmentArgs) -> Result<()> {
    let (info, channels) = read_wav(&a.input)?;
    let noisy = channels
        .iter()
        .enumerate()
        .map(|(c, ch)| add_noise(ch, a.noise, derive_seed(a.seed, &format!("channel{c}"))))
        .collect::<wrice::Result<Vec<_>>>()?;
    write_wav(&a.out, &noisy, WavEncoding::Float32)?;
    println!(
        "added noise at scale {} (seed {}) to {} channel(s) at {} Hz, wrote {}",
        a.noise,
        a.seed,
        noisy.len(),
        info.sample_rate,
        a.out.display()
    );
    Ok(())
}

fn spectrogram(a: SpectrogramArgs) -> Result<()> {
    let buf = load_mono(&a.input, a.analysis.sr)?;
    let spec = stft(&buf, &a.analysis.stft())?;
    match a.format {
        SpecFormat::Csv => {
            let file = fs::File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
            spec.write_csv(std::io::BufWriter::new(file))
                .with_context(|| format!("writing {}", a.out.display()))?;
        }
        SpecFormat::Pgm => fs::write(&a.out, spec.to_pgm()).with_context(|| format!("writing {}", a.out.display()))?,
    }
    println!(
        "{} frames x {} bins written to {}",
        spec.n_frames(),
        spec.n_bins(),
        a.out.display()
    );
    Ok(())
}
