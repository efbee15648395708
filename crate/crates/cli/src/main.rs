use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use visword::config::PipelineConfig;
use visword::dataset::load_manifest;
use visword::features::{FeatureMatrix, Modality};
use visword::pca::{Components, PcaModel};
use visword::pipeline::{write_evaluation, Pipeline};
use visword::synth::{synth_corpus, SynthConfig};
use visword::util::write_atomic;

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(
    name = "visword",
    version,
    about = "Isolated-word recognition from lip images and speech"
)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic audio-visual corpus and its manifest.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 12)]
        classes: usize,
        #[arg(long, default_value_t = 10)]
        per_class: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
    /// Compute per-utterance features for one modality.
    Extract {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, value_parser = parse_modality)]
        modality: Modality,
        /// Output CSV; a binary twin with extension .bin is written beside it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit the PCA eigenspace on the training split.
    Train {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Split seed; overrides the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// "all" or a component count; overrides the configuration.
        #[arg(long)]
        components: Option<Components>,
    },
    /// Classify the test split and write the confusion matrix and metrics.
    Evaluate {
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the effective configuration as TOML.
    PrintConfig,
}

fn parse_modality(s: &str) -> std::result::Result<Modality, String> {
    s.parse().map_err(|e: visword::Error| e.to_string())
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    match flag.or_else(|| fallback.clone()) {
        Some(p) => Ok(p),
        None => bail!("--{name} is required (or set paths.{name} in the config)"),
    }
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Synth {
            out,
            classes,
            per_class,
            seed,
            noise,
        } => {
            let synth = SynthConfig {
                n_classes: classes,
                n_per_class: per_class,
                seed,
                noise_level: noise,
                ..SynthConfig::default()
            };
            let manifest = synth_corpus(&out, &synth)?;
            println!(
                "wrote {} utterances; manifest {}",
                classes * per_class,
                manifest.display()
            );
        }
        Command::Extract {
            manifest,
            modality,
            out,
        } => {
            let manifest = required(manifest, &cfg.paths.manifest, "manifest")?;
            let out = required(out, &cfg.paths.features, "features")?;
            let records = load_manifest(&manifest).with_context(|| format!("loading {}", manifest.display()))?;
            let report = Pipeline::new(cfg)?.extract(&records, modality);
            for id in &report.skipped {
                eprintln!("skipped {id}: no {modality} media");
            }
            for (id, err) in &report.failures {
                eprintln!("error {id}: {err}");
            }
            report.features.save(&out)?;
            println!(
                "extracted {} {modality} vectors of dimension {} to {}",
                report.features.len(),
                report.features.dim(),
                out.display()
            );
            if !report.failures.is_empty() {
                eprintln!("{} record(s) failed", report.failures.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Train {
            manifest,
            features,
            out,
            seed,
            components,
        } => {
            let manifest = required(manifest, &cfg.paths.manifest, "manifest")?;
            let features = required(features, &cfg.paths.features, "features")?;
            let out = required(out, &cfg.paths.model, "model")?;
            if let Some(s) = seed {
                cfg.split.seed = s;
            }
            if let Some(c) = components {
                cfg.pca.components = c;
            }
            let records = load_manifest(&manifest)?;
            let table = FeatureMatrix::load(&features, None)?;
            let report = Pipeline::new(cfg)?.train(&records, &table)?;
            for id in &report.missing {
                eprintln!("warning: training record {id} has no feature row");
            }
            if report.model.k() == 0 {
                eprintln!("warning: training vectors are identical; the eigenspace is empty");
            }
            report.model.save(&out)?;
            let eig = out.with_extension("eigenvalues.csv");
            write_atomic(&eig, report.model.eigenvalues_csv().as_bytes())?;
            println!(
                "trained on {} vectors, {} components; model {}",
                report.model.n_train(),
                report.model.k(),
                out.display()
            );
        }
        Command::Evaluate {
            manifest,
            features,
            model,
            out,
            seed,
        } => {
            let manifest = required(manifest, &cfg.paths.manifest, "manifest")?;
            let features = required(features, &cfg.paths.features, "features")?;
            let model_path = required(model, &cfg.paths.model, "model")?;
            let out = required(out, &cfg.paths.out, "out")?;
            if let Some(s) = seed {
                cfg.split.seed = s;
            }
            let records = load_manifest(&manifest)?;
            let table = FeatureMatrix::load(&features, None)?;
            let model = PcaModel::load(&model_path)?;
            let eval = Pipeline::new(cfg)?
                .evaluate(&records, &table, &model)
                .with_context(|| format!("features {} against model {}", features.display(), model_path.display()))?;
            for id in &eval.missing {
                eprintln!("warning: test record {id} has no feature row");
            }
            write_evaluation(&out, &eval)?;
            print!("{}", eval.confusion.to_ascii_table());
            let summary = eval.summary();
            write_atomic(
                &out.join(format!("summary_{}.txt", eval.modality)),
                format!("{summary}\n").as_bytes(),
            )?;
            println!("{summary}");
        }
        Command::PrintConfig => print!("{}", cfg.to_toml()),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
