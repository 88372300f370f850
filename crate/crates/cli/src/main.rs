use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use evsv_cli::commands;
use evsv_cli::record::RunRecord;
use evsv_cli::{ExperimentConfig, Workspace};
use evsv_core::corpus::AugmentationPlan;
use evsv_core::Emotion;

#[derive(Parser)]
#[command(name = "evsv", version, about = "Emotional voice conversion as augmentation for speaker verification")]
struct Cli {
    /// TOML experiment config; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output root holding corpora, the feature cache and run directories.
    #[arg(long, global = true, default_value = "evsv-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and its speaker split.
    GenCorpus {
        /// Overrides corpus.num_speakers.
        #[arg(long)]
        speakers: Option<usize>,
        /// Overrides corpus.media_speakers.
        #[arg(long)]
        media_speakers: Option<usize>,
    },
    /// Fill the feature cache for every corpus utterance.
    ExtractFeatures,
    /// Train spectrum and prosody converters for each target emotion.
    TrainConverter {
        /// Comma-separated target emotions.
        #[arg(long, value_delimiter = ',')]
        emotions: Option<Vec<Emotion>>,
    },
    /// Convert one neutral WAV file into a target emotion.
    Convert {
        /// Neutral WAV file to convert.
        #[arg(long)]
        input: PathBuf,
        /// Target emotion; its converter must be trained.
        #[arg(long)]
        emotion: Emotion,
        /// Path of the converted WAV file.
        #[arg(long)]
        output: PathBuf,
    },
    /// Train speaker encoders for augmentation plans.
    TrainSv {
        /// Plan such as `50n+10a+10h`; repeatable. Defaults to the config's plans.
        #[arg(long = "plan")]
        plans: Vec<AugmentationPlan>,
    },
    /// Evaluate trained encoders and write reports.
    Evaluate {
        /// Also print absolute EERs.
        #[arg(long)]
        absolute: bool,
    },
    /// Run every stage end to end.
    RunExperiment {
        /// Plan such as `50n+10a+10h`; repeatable. Defaults to the config's plans.
        #[arg(long = "plan")]
        plans: Vec<AugmentationPlan>,
        /// Also print absolute EERs.
        #[arg(long)]
        absolute: bool,
    },
    /// Print the stored reports.
    Report {
        /// Also print absolute EERs.
        #[arg(long)]
        absolute: bool,
    },
}

fn summary(rec: &RunRecord, ws: &Workspace) {
    println!("run directory: {}", ws.run_dir().display());
    println!("artifacts: {} (hash {})", rec.artifacts.len(), &rec.artifacts_hash()[..16]);
}

fn set_plans(config: &mut ExperimentConfig, plans: Vec<AugmentationPlan>) {
    if !plans.is_empty() {
        config.augmentation.plans = plans;
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global()?;
    }
    let mut config = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    match &cli.command {
        Command::GenCorpus { speakers, media_speakers } => {
            if let Some(n) = speakers {
                config.corpus.num_speakers = *n;
            }
            if let Some(n) = media_speakers {
                config.corpus.media_speakers = *n;
            }
        }
        Command::TrainConverter { emotions: Some(e) } => config.converter.emotions = e.clone(),
        Command::TrainSv { plans } | Command::RunExperiment { plans, .. } => set_plans(&mut config, plans.clone()),
        _ => {}
    }
    config.validate()?;
    let ws = Workspace::new(&cli.out, config);
    match cli.command {
        Command::GenCorpus { .. } => {
            let (rec, m) = commands::gen_corpus(&ws)?;
            println!(
                "corpus: {} ({} utterances, {} speakers)",
                ws.corpus_dir().display(),
                m.len(),
                m.speakers().len()
            );
            summary(&rec, &ws);
        }
        Command::ExtractFeatures => {
            let (rec, n) = commands::extract_features(&ws)?;
            println!("features: {n} utterances in {}", ws.cache_dir().display());
            summary(&rec, &ws);
        }
        Command::TrainConverter { .. } => {
            let (rec, convs) = commands::train_converter(&ws)?;
            println!("converters: {}", convs.iter().map(|c| c.target.as_str()).collect::<Vec<_>>().join(", "));
            summary(&rec, &ws);
        }
        Command::Convert { input, emotion, output } => {
            commands::convert(&ws, &input, emotion, &output)?;
            println!("wrote {}", output.display());
        }
        Command::TrainSv { .. } => {
            ws.config.validate_plans()?;
            let (rec, plans) = commands::train_sv(&ws, &ws.config.plans())?;
            println!("encoders: {}", plans.join(", "));
            summary(&rec, &ws);
        }
        Command::Evaluate { absolute } => {
            let (rec, res) = commands::evaluate(&ws, absolute)?;
            println!("{}", res.render_all(absolute)?);
            summary(&rec, &ws);
        }
        Command::RunExperiment { absolute, .. } => {
            let (rec, res) = commands::run_experiment(&ws, absolute)?;
            println!("{}", res.render_all(absolute)?);
            summary(&rec, &ws);
        }
        Command::Report { absolute } => println!("{}", commands::report(&ws, absolute)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
