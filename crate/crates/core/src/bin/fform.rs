use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use fformation::crf::{self, TrainConfig};
use fformation::eval::{bench_latency, outlier_robustness, run_experiment, ExperimentConfig, RobustnessConfig};
use fformation::labels::{ApproachAngle, Formation};
use fformation::pipeline::{
    augmented_group_samples, crf_chains, detect_with_bundle, gold_group_samples, load_models, rule_classify,
    save_models, train_svm, Detection, ModelBundle, SvmTask, SvmTrainConfig,
};
use fformation::pose::{read_scenes_file, write_scenes, Scene};
use fformation::synth::{generate_dataset, grid_entries, GridSpec};
use fformation::{Error, Result};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "fform", version, about = "F-formation detection from 2D keypoints")]
struct Cli {
    /// Seed for every random choice (scene generation, CV folds).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic scene grid to JSONL.
    Generate(GenerateArgs),
    /// Fit the membership CRF and store it in a model directory.
    TrainCrf(TrainCrfArgs),
    /// Fit one SVM and store it in a model directory.
    TrainSvm(TrainSvmArgs),
    /// Fit the CRF and all three SVMs.
    Train(TrainArgs),
    /// Run detection and write one JSON detection per scene.
    Predict(PredictArgs),
    /// Run the rule baseline and write one JSON detection per scene.
    Baseline(BaselineArgs),
    /// Train and score on a dataset described by a JSON config; write tables.
    Evaluate(EvaluateArgs),
    /// Compare predictions with and without one injected outlier.
    Robustness(RobustnessArgs),
    /// Single-threaded detection latency.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    per_cell: usize,
    #[arg(long, default_value_t = 0.5)]
    outlier_fraction: f64,
    #[arg(long, default_value_t = 2.0)]
    distance_min: f64,
    #[arg(long, default_value_t = 5.0)]
    distance_max: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_sigma: f64,
    /// Restrict to these formations (repeatable).
    #[arg(long)]
    formation: Vec<Formation>,
    /// Restrict to these angles in degrees (repeatable, e.g. --angle=-90).
    #[arg(long, allow_hyphen_values = true)]
    angle: Vec<ApproachAngle>,
}

#[derive(Args)]
struct TrainCrfArgs {
    /// Labeled scenes (JSONL).
    #[arg(long)]
    train: PathBuf,
    /// Model directory; other models already in it are kept.
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
}

#[derive(Args)]
struct SvmArgs {
    #[arg(long = "C", default_value_t = 10.0)]
    c: f64,
    /// Fixed RBF γ; chosen by 5-fold CV when omitted.
    #[arg(long)]
    gamma: Option<f64>,
    /// Train on gold groups only.
    #[arg(long)]
    no_augment: bool,
}

#[derive(Args)]
struct TrainSvmArgs {
    #[arg(long)]
    task: SvmTask,
    #[arg(long)]
    train: PathBuf,
    /// Model directory; needs a CRF unless --no-augment is set.
    #[arg(long)]
    models: PathBuf,
    #[command(flatten)]
    svm: SvmArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[command(flatten)]
    svm: SvmArgs,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Output JSONL; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Experiment config (JSON); defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for tables, summary, models and the test split.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RobustnessArgs {
    #[arg(long)]
    models: PathBuf,
    #[arg(long, default_value_t = 200)]
    pairs: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    models: PathBuf,
    /// Scenes per formation × angle cell.
    #[arg(long, default_value_t = 4)]
    per_cell: usize,
    #[arg(long, default_value_t = 3)]
    repetitions: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<()> {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_detections(path: Option<&Path>, detections: &[Detection]) -> Result<()> {
    let mut w = output(path)?;
    for d in detections {
        serde_json::to_writer(&mut w, d)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn load_existing(dir: &Path) -> Result<ModelBundle> {
    if !dir.join("manifest.json").exists() {
        return Err(Error::Config(format!("{} is not a model directory", dir.display())));
    }
    load_models(dir)
}

fn load_or_empty(dir: &Path) -> Result<ModelBundle> {
    if dir.join("manifest.json").exists() {
        load_models(dir)
    } else {
        Ok(ModelBundle::default())
    }
}

fn read_labeled(path: &Path) -> Result<Vec<Scene>> {
    let scenes = read_scenes_file(path)?;
    if scenes.is_empty() {
        return Err(Error::Input(format!("{} holds no scenes", path.display())));
    }
    Ok(scenes)
}

fn svm_config(args: &SvmArgs, seed: u64) -> SvmTrainConfig {
    SvmTrainConfig {
        c: args.c,
        gamma: args.gamma,
        cv_seed: seed,
        ..SvmTrainConfig::default()
    }
}

fn fit_svm(
    task: SvmTask,
    scenes: &[Scene],
    bundle: &mut ModelBundle,
    args: &SvmArgs,
    seed: u64,
) -> Result<()> {
    let samples = if args.no_augment {
        gold_group_samples(scenes)?
    } else {
        let crf_model = bundle
            .crf
            .as_ref()
            .ok_or_else(|| Error::Config("augmented SVM training needs a CRF in the model directory".into()))?;
        augmented_group_samples(scenes, crf_model)?
    };
    let (model, sel) = train_svm(task, &samples, &svm_config(args, seed))?;
    eprintln!(
        "{task}: gamma {} ({}), {} support vectors",
        sel.gamma,
        if sel.fallback { "fallback" } else if args.gamma.is_some() { "fixed" } else { "cv" },
        model.num_support_vectors()
    );
    bundle.set_svm(task, model);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::Generate(a) => {
            let defaults = GridSpec::default();
            let spec = GridSpec {
                per_cell: a.per_cell,
                outlier_fraction: a.outlier_fraction,
                distance_min: a.distance_min,
                distance_max: a.distance_max,
                formations: if a.formation.is_empty() { defaults.formations } else { a.formation },
                angles: if a.angle.is_empty() { defaults.angles } else { a.angle },
                base: fformation::synth::SynthConfig {
                    noise_sigma: a.noise_sigma,
                    ..defaults.base
                },
            };
            let scenes = generate_dataset(&grid_entries(&spec)?, seed)?;
            let mut w = output(Some(&a.out))?;
            write_scenes(&mut w, &scenes)?;
            w.flush()?;
            eprintln!("wrote {} scenes to {}", scenes.len(), a.out.display());
        }
        Command::TrainCrf(a) => {
            let scenes = read_labeled(&a.train)?;
            let mut bundle = load_or_empty(&a.models)?;
            let cfg = TrainConfig {
                l2: a.l2,
                max_iters: a.max_iters,
                ..TrainConfig::default()
            };
            let report = crf::train_with_report(&crf_chains(&scenes)?, &cfg)?;
            eprintln!(
                "crf: {} iterations, converged {}, |grad| {:.2e}",
                report.iterations, report.converged, report.grad_inf_norm
            );
            bundle.crf = Some(report.model);
            save_models(&bundle, &a.models)?;
        }
        Command::TrainSvm(a) => {
            let scenes = read_labeled(&a.train)?;
            let mut bundle = load_or_empty(&a.models)?;
            fit_svm(a.task, &scenes, &mut bundle, &a.svm, seed)?;
            save_models(&bundle, &a.models)?;
        }
        Command::Train(a) => {
            let scenes = read_labeled(&a.train)?;
            let cfg = TrainConfig {
                l2: a.l2,
                ..TrainConfig::default()
            };
            let mut bundle = ModelBundle {
                crf: Some(crf::train(&crf_chains(&scenes)?, &cfg)?),
                ..ModelBundle::default()
            };
            for task in SvmTask::ALL {
                fit_svm(task, &scenes, &mut bundle, &a.svm, seed)?;
            }
            save_models(&bundle, &a.models)?;
        }
        Command::Predict(a) => {
            let bundle = load_existing(&a.models)?;
            let detections = read_scenes_file(&a.input)?
                .iter()
                .map(|s| detect_with_bundle(s, &bundle))
                .collect::<Result<Vec<_>>>()?;
            write_detections(a.out.as_deref(), &detections)?;
        }
        Command::Baseline(a) => {
            let detections = read_scenes_file(&a.input)?
                .iter()
                .map(rule_classify)
                .collect::<Result<Vec<_>>>()?;
            write_detections(a.out.as_deref(), &detections)?;
        }
        Command::Evaluate(a) => {
            let mut cfg: ExperimentConfig = match &a.config {
                Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
                None => ExperimentConfig::default(),
            };
            if let Some(s) = cli.seed {
                cfg.seed = s;
                cfg.svm.cv_seed = s;
            }
            let outcome = run_experiment(&cfg, Some(&a.out))?;
            let s = &outcome.summary;
            let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.4}"));
            println!("membership weighted F1  {}", show(s.membership_weighted_f1));
            println!("formation weighted F1   {}", show(s.formation_weighted_f1));
            println!("rule formation F1       {}", show(s.rule_formation_weighted_f1));
            println!("angle weighted F1       {}", show(s.angle_weighted_f1));
            println!("joint accuracy          {}", show(s.joint_accuracy));
        }
        Command::Robustness(a) => {
            let bundle = load_existing(&a.models)?;
            let mut cfg = RobustnessConfig {
                pairs: a.pairs,
                ..RobustnessConfig::default()
            };
            cfg.max_generated = cfg.max_generated.max(a.pairs * 20);
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            write_json(a.out.as_deref(), &outlier_robustness(&bundle, &cfg)?)?;
        }
        Command::Bench(a) => {
            let bundle = load_existing(&a.models)?;
            let spec = GridSpec {
                per_cell: a.per_cell,
                ..GridSpec::default()
            };
            let scenes = generate_dataset(&grid_entries(&spec)?, seed)?;
            write_json(a.out.as_deref(), &bench_latency(&bundle, &scenes, a.repetitions)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { EXIT_CONFIG } else { EXIT_DATA })
        }
    }
}
