use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use bowfire::config::Config;
use bowfire::dataset::{DatasetLayout, FileSample, TrainingLayout};
use bowfire::eval::{
    evaluate_methods, format_table, roc_points, sweep_ksp, write_roc_csv, write_sweep_csv,
    DatasetTag, EvalDatasets, EvalReport, DEFAULT_KSP_SWEEP,
};
use bowfire::imaging::ImageRgb;
use bowfire::model::{train, ModelFile};
use bowfire::pipeline::{BowfireModel, Method};
use bowfire::synth::{generate, SynthParams};

#[derive(Parser, Debug)]
#[command(name = "bowfire", version, about = "Fire detection in still images")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train color and texture models from 50x50 patches.
    Train(TrainArgs),
    /// Write the fire mask of one image.
    Detect(DetectArgs),
    /// Score methods against ground-truth datasets.
    Eval(EvalArgs),
    /// Score the fused detector over a list of superpixel counts.
    Sweep(SweepArgs),
    /// Write a synthetic training set and evaluation corpus.
    Synth(SynthArgs),
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of fire patches.
    #[arg(long)]
    fire: PathBuf,
    /// Directory of non-fire patches.
    #[arg(long)]
    not_fire: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    ksp: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Accept patches of any size.
    #[arg(long)]
    any_patch_size: bool,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(short, long)]
    input: PathBuf,
    #[arg(short, long)]
    output: PathBuf,
    /// fused | color-only | texture-only | rossi-cluster | rudz-cluster
    #[arg(long, default_value = "fused")]
    mode: Method,
    /// Override the model's superpixel count.
    #[arg(long)]
    ksp: Option<usize>,
}

#[derive(Args, Debug)]
struct DatasetArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    fire_images: Option<PathBuf>,
    #[arg(long)]
    fire_masks: Option<PathBuf>,
    #[arg(long)]
    non_fire_images: Option<PathBuf>,
    /// Optional; missing masks mean no fire pixels.
    #[arg(long)]
    non_fire_masks: Option<PathBuf>,
    /// Images processed concurrently.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    data: DatasetArgs,
    /// Methods to score; repeat or comma-separate.
    #[arg(long = "method", value_delimiter = ',', default_values = ["fused", "color-only"])]
    methods: Vec<Method>,
    #[arg(long)]
    ksp: Option<usize>,
    /// JSON report path.
    #[arg(short, long)]
    output: PathBuf,
    /// Aligned text report path.
    #[arg(long)]
    text: Option<PathBuf>,
    /// ROC points as `fpr,recall` CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    data: DatasetArgs,
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_KSP_SWEEP.to_vec())]
    ksp: Vec<usize>,
    #[arg(long)]
    output_json: PathBuf,
    #[arg(long)]
    output_csv: PathBuf,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(short, long)]
    output: PathBuf,
    #[arg(long, default_value_t = SynthParams::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    fire_images: usize,
    #[arg(long, default_value_t = 100)]
    non_fire_images: usize,
    #[arg(long, default_value_t = 96)]
    width: usize,
    #[arg(long, default_value_t = 96)]
    height: usize,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn load_model(path: &Path) -> Result<BowfireModel> {
    Ok(ModelFile::load(path)?.into_model())
}

fn cmd_train(a: TrainArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => Config::from_file(p)?,
        None => Config::default(),
    };
    cfg.bins = a.bins.unwrap_or(cfg.bins);
    cfg.k = a.k.unwrap_or(cfg.k);
    cfg.m = a.m.unwrap_or(cfg.m);
    cfg.ksp = a.ksp.unwrap_or(cfg.ksp);
    cfg.iterations = a.iterations.unwrap_or(cfg.iterations);

    let mut layout = TrainingLayout::new(&a.fire, &a.not_fire);
    if a.any_patch_size {
        layout.patch_size = None;
    }
    let (fire, not_fire) = layout.load()?;
    info!(
        "training on {} fire and {} not-fire patches",
        fire.len(),
        not_fire.len()
    );
    let model = train(&fire, &not_fire, &cfg)?;
    ModelFile::from(model).save(&a.output)?;
    println!(
        "model written to {} ({} texture vectors)",
        a.output.display(),
        fire.len() + not_fire.len()
    );
    Ok(())
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let mut model = load_model(&a.model)?;
    if let Some(k) = a.ksp {
        model = model.with_ksp(k);
    }
    let img = ImageRgb::open(&a.input)?;
    let mask = a.mode.run(&model, &img)?;
    mask.save_png(&a.output)?;
    println!("{:.6}", mask.fire_fraction());
    Ok(())
}

struct Loaded {
    model: BowfireModel,
    fire: Option<Vec<FileSample>>,
    non_fire: Option<Vec<FileSample>>,
    jobs: usize,
}

impl Loaded {
    fn datasets(&self) -> EvalDatasets<'_, FileSample> {
        EvalDatasets {
            fire: self.fire.as_deref(),
            non_fire: self.non_fire.as_deref(),
        }
    }
}

fn load_datasets(d: &DatasetArgs) -> Result<Loaded> {
    let layout = |images: &Option<PathBuf>, masks: &Option<PathBuf>, tag| {
        images
            .as_ref()
            .map(|dir| {
                DatasetLayout {
                    images_dir: dir.clone(),
                    masks_dir: masks.clone(),
                    tag,
                }
                .samples()
            })
            .transpose()
    };
    if d.fire_images.is_none() && d.non_fire_images.is_none() {
        anyhow::bail!(bowfire::Error::NoData(
            "pass --fire-images and/or --non-fire-images".into()
        ));
    }
    Ok(Loaded {
        model: load_model(&d.model)?,
        fire: layout(&d.fire_images, &d.fire_masks, DatasetTag::Fire)?,
        non_fire: layout(&d.non_fire_images, &d.non_fire_masks, DatasetTag::NonFire)?,
        jobs: d.jobs.max(1),
    })
}

fn write_json(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut text = serde_json::to_string_pretty(reports)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_eval(a: EvalArgs) -> Result<()> {
    let mut loaded = load_datasets(&a.data)?;
    if let Some(k) = a.ksp {
        loaded.model = loaded.model.with_ksp(k);
    }
    let reports = evaluate_methods(&loaded.model, &a.methods, loaded.datasets(), loaded.jobs)?;
    write_json(&a.output, &reports)?;
    let table = format_table(&reports);
    print!("{table}");
    if let Some(p) = &a.text {
        std::fs::write(p, &table).with_context(|| format!("writing {}", p.display()))?;
    }
    if let Some(p) = &a.roc {
        write_roc_csv(create(p)?, &roc_points(&reports))?;
    }
    Ok(())
}

fn cmd_sweep(a: SweepArgs) -> Result<()> {
    let loaded = load_datasets(&a.data)?;
    let reports = sweep_ksp(&loaded.model, loaded.datasets(), &a.ksp, loaded.jobs)?;
    write_json(&a.output_json, &reports)?;
    write_sweep_csv(create(&a.output_csv)?, &reports)?;
    print!("{}", format_table(&reports));
    Ok(())
}

fn cmd_synth(a: SynthArgs) -> Result<()> {
    let params = SynthParams {
        seed: a.seed,
        width: a.width,
        height: a.height,
        fire_images: a.fire_images,
        non_fire_images: a.non_fire_images,
        ..SynthParams::default()
    };
    if params.width < 16 || params.height < 16 {
        anyhow::bail!("synthetic images must be at least 16x16");
    }
    generate(&params).write(&a.output)?;
    println!("synthetic corpus written to {}", a.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<bowfire::Error>() {
                Some(bowfire::Error::NoData(_)) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}
