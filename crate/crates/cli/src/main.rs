//! `condrum`: synthesize a corpus, train, generate, extract features, embed.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use condrum::analysis::csv_io::{self, EmbeddingRow, FeatureRow, GROUP_GROUND_TRUTH};
use condrum::analysis::features::song_features;
use condrum::analysis::tsne::{tsne_embed, TsneConfig};
use condrum::encoding::sequence::encode_song;
use condrum::encoding::song::Song;
use condrum::generate::{generate, ConditionTrack, GenerationConfig};
use condrum::model::train::continue_training;
use condrum::model::{init_params, sequence_gradcheck, Checkpoint, ModelConfig, TrainOptions, Trainer};
use condrum::synth::{load_corpus, song_paths, synth_corpus, StyleRegistry, SynthConfig};
use config::{parse_meter, parse_range, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "condrum", version, about = "Conditional drum-rhythm generator", arg_required_else_help = true)]
struct Cli {
    /// JSON file with default values for any flag; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic corpus of songs plus a manifest.
    Synth(SynthArgs),
    /// Train on a corpus directory; writes checkpoints and loss.csv.
    Train(TrainArgs),
    /// Complete the drum track of a condition song.
    Generate(GenerateArgs),
    /// Global rhythm features of songs as CSV.
    Features(FeaturesArgs),
    /// 2-D t-SNE embedding of one or more features CSVs.
    Embed(EmbedArgs),
    /// Finite-difference gradient check of a tiny model.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Style name (see the error message of an unknown style for the list).
    #[arg(long)]
    style: Option<String>,
    #[arg(long)]
    songs: Option<usize>,
    #[arg(long)]
    bars: Option<usize>,
    /// Comma-separated meters, e.g. `4/4,7/8`.
    #[arg(long, value_delimiter = ',', value_parser = parse_meter)]
    meters: Option<Vec<(u32, u32)>>,
    /// Inclusive BPM range, e.g. `80-140`.
    #[arg(long, value_parser = parse_range)]
    tempo: Option<(u32, u32)>,
    #[arg(long)]
    phrase_len: Option<usize>,
    #[arg(long)]
    phrase_offset: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Corpus directory containing manifest.json.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long)]
    epochs: Option<usize>,
    /// Comma-separated snapshot epochs.
    #[arg(long, value_delimiter = ',')]
    snapshots: Option<Vec<usize>>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    wpast: Option<usize>,
    #[arg(long)]
    wfuture: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Continue from this checkpoint instead of a fresh model.
    #[arg(long)]
    resume: Option<PathBuf>,
    /// Output directory for checkpoints and loss.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    /// Song JSON providing bars, guitar, bass and (optionally) seed drums.
    #[arg(long)]
    conditions: PathBuf,
    /// Diversity; 0.5, 0.8, 1.0 and 1.2 are the usual settings.
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    seed_steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output song JSON.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FeaturesArgs {
    /// Song files or directories of song JSON files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Group label written for every row.
    #[arg(long, default_value = GROUP_GROUND_TRUTH)]
    group: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EmbedArgs {
    /// Features CSV files; rows are concatenated in order.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    perplexity: Option<f64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 4)]
    hidden: usize,
    /// Number of unrolled steps.
    #[arg(long, default_value_t = 3)]
    steps: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Exit with failure when the maximum relative error exceeds this.
    #[arg(long, default_value_t = 1e-4)]
    tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let file = RunConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Synth(a) => synth(a, &file),
        Command::Train(a) => train(a, &file),
        Command::Generate(a) => generate_cmd(a, &file),
        Command::Features(a) => features(a),
        Command::Embed(a) => embed(a, &file),
        Command::Gradcheck(a) => gradcheck(a, &file),
    }
}

/// Fails early if `path`'s parent directory does not exist.
fn check_output_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() && !p.is_dir() => bail!("output directory {} does not exist", p.display()),
        _ => Ok(()),
    }
}

fn check_input(path: &Path) -> Result<()> {
    if !path.exists() {
        bail!("input {} does not exist", path.display());
    }
    Ok(())
}

fn synth(a: SynthArgs, file: &RunConfig) -> Result<()> {
    let defaults = SynthConfig::default();
    let meters = match (a.meters, &file.meters) {
        (Some(m), _) => m,
        (None, Some(m)) => m.iter().map(|s| parse_meter(s)).collect::<Result<_, _>>().map_err(anyhow::Error::msg)?,
        (None, None) => defaults.meters.clone(),
    };
    let config = SynthConfig {
        n_songs: a.songs.or(file.songs).unwrap_or(defaults.n_songs),
        bars: a.bars.or(file.bars).unwrap_or(defaults.bars),
        meters,
        tempo_range: a.tempo.or(file.tempo_range).unwrap_or(defaults.tempo_range),
        phrase_len: a.phrase_len.or(file.phrase_len).unwrap_or(defaults.phrase_len),
        phrase_offset: a.phrase_offset.or(file.phrase_offset).unwrap_or(defaults.phrase_offset),
        seed: a.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    config.validate()?;
    let name = a.style.or_else(|| file.style.clone()).unwrap_or_else(|| "synthrock".into());
    let style = StyleRegistry::default().get(&name)?;
    let manifest = synth_corpus(style.as_ref(), &config, &a.out)?;
    println!("wrote {} {} songs to {}", manifest.songs.len(), manifest.style, a.out.display());
    Ok(())
}

fn train(a: TrainArgs, file: &RunConfig) -> Result<()> {
    check_input(&a.corpus)?;
    if let Some(r) = &a.resume {
        check_input(r)?;
    }
    let d = ModelConfig::default();
    let config = ModelConfig {
        hidden: a.hidden.or(file.hidden).unwrap_or(d.hidden),
        lstm_layers: file.lstm_layers.unwrap_or(d.lstm_layers),
        dropout: a.dropout.or(file.dropout).unwrap_or(d.dropout),
        window_past: a.wpast.or(file.wpast).unwrap_or(d.window_past),
        window_future: a.wfuture.or(file.wfuture).unwrap_or(d.window_future),
        learning_rate: a.lr.or(file.learning_rate).unwrap_or(d.learning_rate),
        seq_len: file.seq_len.unwrap_or(d.seq_len),
        batch_size: file.batch_size.unwrap_or(d.batch_size),
        clip_norm: file.clip_norm.unwrap_or(d.clip_norm),
        ..d
    };
    config.validate()?;
    let seed = a.seed.or(file.seed).unwrap_or(0);
    let defaults = TrainOptions::default();
    let options = TrainOptions {
        epochs: a.epochs.or(file.epochs).unwrap_or(defaults.epochs),
        snapshot_epochs: a.snapshots.or_else(|| file.snapshots.clone()).unwrap_or(defaults.snapshot_epochs),
        seed,
    };

    let (_, songs) = load_corpus(&a.corpus)?;
    let trainer = match &a.resume {
        Some(path) => Trainer::from_checkpoint(&Checkpoint::load(path)?)?,
        None => Trainer::new(&config, seed)?,
    };
    let c = &trainer.params().config;
    let corpus = songs
        .iter()
        .map(|s| encode_song(s, c.window_past, c.window_future).with_context(|| format!("encoding {}", s.title)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let run = continue_training(trainer, &corpus, &options)?;
    for ckpt in &run.checkpoints {
        let path = a.out.join(format!("epoch-{:04}.ckpt", ckpt.epoch));
        ckpt.save(&path)?;
        println!("saved {}", path.display());
    }
    let mut csv = String::from("epoch,loss\n");
    for (i, l) in run.loss_curve.iter().enumerate() {
        csv.push_str(&format!("{},{l}\n", i + 1));
    }
    condrum::fsio::write_atomic(&a.out.join("loss.csv"), csv.as_bytes())?;
    if let Some(last) = run.loss_curve.last() {
        println!("initial loss {:.4}, final epoch loss {last:.4}", run.initial_loss);
    }
    Ok(())
}

fn generate_cmd(a: GenerateArgs, file: &RunConfig) -> Result<()> {
    check_input(&a.checkpoint)?;
    check_input(&a.conditions)?;
    check_output_parent(&a.out)?;
    let d = GenerationConfig::default();
    let config = GenerationConfig {
        temperature: a.temperature.or(file.temperature).unwrap_or(d.temperature),
        seed_steps: a.seed_steps.or(file.seed_steps).unwrap_or(d.seed_steps),
        seed: a.seed.or(file.seed).unwrap_or(d.seed),
    };
    config.validate()?;
    let ckpt = Checkpoint::load(&a.checkpoint)?;
    let song = Song::load(&a.conditions)?;
    let track = ConditionTrack::from_song(&song, &ckpt.params)?;
    let seed = track.words()[..config.seed_steps.min(track.len())].to_vec();
    let out = generate(&ckpt.params, &track, &seed, &config)?;
    out.song.save(&a.out)?;
    println!("wrote {} steps to {}", out.words.len(), a.out.display());
    Ok(())
}

fn collect_songs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        check_input(p)?;
        if p.is_dir() {
            out.extend(song_paths(p)?);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        bail!("no song files found");
    }
    Ok(out)
}

fn features(a: FeaturesArgs) -> Result<()> {
    let paths = collect_songs(&a.inputs)?;
    check_output_parent(&a.out)?;
    let rows = paths
        .iter()
        .map(|p| {
            let song = Song::load(p)?;
            Ok(FeatureRow {
                piece: song.title.clone(),
                group: a.group.clone(),
                features: song_features(&song).with_context(|| format!("features of {}", p.display()))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    csv_io::write_features(&a.out, &rows)?;
    println!("wrote features of {} songs to {}", rows.len(), a.out.display());
    Ok(())
}

fn embed(a: EmbedArgs, file: &RunConfig) -> Result<()> {
    for p in &a.inputs {
        check_input(p)?;
    }
    check_output_parent(&a.out)?;
    let mut rows = Vec::new();
    for p in &a.inputs {
        rows.extend(csv_io::read_features(p)?);
    }
    let d = TsneConfig::default();
    let config = TsneConfig {
        perplexity: a.perplexity.or(file.perplexity).unwrap_or(d.perplexity),
        iterations: a.iterations.or(file.iterations).unwrap_or(d.iterations),
        ..d
    };
    let vectors: Vec<Vec<f64>> = rows.iter().map(|r| r.features.0.to_vec()).collect();
    let emb = tsne_embed(&vectors, &config, a.seed.or(file.seed).unwrap_or(0))?;
    let out: Vec<EmbeddingRow> = rows
        .iter()
        .zip(&emb.coords)
        .map(|(r, c)| EmbeddingRow { piece: r.piece.clone(), x: c[0], y: c[1], group: r.group.clone() })
        .collect();
    csv_io::write_embedding(&a.out, &out)?;
    println!("embedded {} pieces (final KL {:.4}) to {}", out.len(), emb.kl, a.out.display());
    Ok(())
}

fn gradcheck(a: GradcheckArgs, file: &RunConfig) -> Result<()> {
    use condrum::synth::synth_songs;
    use rand::SeedableRng;

    let seed = a.seed.or(file.seed).unwrap_or(0);
    let config = ModelConfig { hidden: a.hidden, dropout: 0.0, ..Default::default() };
    config.validate()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut params = init_params(&config, &mut rng)?;
    params.randomize(0.5, &mut rng);
    let style = StyleRegistry::default().get("synthrock")?;
    let song_config = SynthConfig { n_songs: 1, bars: 2, seed, ..Default::default() };
    let (song, _) = synth_songs(style.as_ref(), &song_config)?.remove(0);
    let seq = encode_song(&song, config.window_past, config.window_future)?;
    if a.steps == 0 || a.steps > seq.len() {
        bail!("steps must be between 1 and {}", seq.len());
    }
    let report = sequence_gradcheck(&mut params, &seq, 0, a.steps, 1e-5)?;
    println!(
        "checked {} scalars, max relative error {:.3e}{}",
        report.scalars_checked,
        report.max_relative_error,
        report.worst.as_ref().map(|(n, i)| format!(" at {n}[{i}]")).unwrap_or_default()
    );
    if report.max_relative_error > a.tolerance {
        bail!("gradient check failed: {:.3e} > {:.1e}", report.max_relative_error, a.tolerance);
    }
    Ok(())
}
