//! `radgest`: simulate, degrade, train, evaluate and visualise radar gesture data.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use radgest_core::classifier::{cube_range_doppler, to_range_doppler};
use radgest_core::io::{
    export_maps, load_checkpoint, load_dataset, read_run_config, save_checkpoint, save_dataset, DatasetFile, MetricsCsv,
};
use radgest_core::lowres::{degrade, DegradeSpec};
use radgest_core::radar::{generate_dataset, standard_templates, RadarParams};
use radgest_core::train::{
    evaluate_split, noise_rng, prepare_lr, train_prepared, CascadeModel, ModelBundle, Prepared, TrainConfig,
};
use radgest_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "radgest",
    version,
    about = "Radar gesture super-resolution and classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labelled synthetic dataset.
    Simulate(SimulateArgs),
    /// Down-sample and add noise to every record of a dataset.
    Degrade(DegradeArgs),
    /// Train one regime and write a checkpoint plus per-epoch metrics.
    Train(TrainArgs),
    /// Evaluate a checkpoint on the validation split of a dataset.
    Eval(EvalArgs),
    /// Write range-Doppler maps of one record as PGM images and CSV tables.
    ExportMaps(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// (5, 32, 492) cubes.
    Full,
    /// (3, 16, 64) cubes.
    Desk,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of gesture classes (2-12).
    #[arg(long, default_value_t = 4)]
    classes: usize,
    /// Records per class.
    #[arg(long, default_value_t = 50)]
    per_class: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output dataset file.
    #[arg(long)]
    out: PathBuf,
    /// Base radar geometry; the flags below override single fields.
    #[arg(long, value_enum, default_value_t = Preset::Full)]
    preset: Preset,
    /// Frames per recording (K).
    #[arg(long)]
    frames: Option<usize>,
    /// Pulses per frame (M).
    #[arg(long)]
    pulses: Option<usize>,
    /// Range bins per pulse (N).
    #[arg(long)]
    bins: Option<usize>,
    /// Carrier frequency in Hz.
    #[arg(long)]
    carrier: Option<f64>,
    /// Pulse repetition frequency in Hz.
    #[arg(long)]
    prf: Option<f64>,
    /// Minimum range in metres.
    #[arg(long)]
    r_min: Option<f64>,
    /// Maximum range in metres.
    #[arg(long)]
    r_max: Option<f64>,
}

#[derive(Args)]
struct DegradeArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Slow-time factor.
    #[arg(long, default_value_t = 2)]
    ds: usize,
    /// Fast-time factor.
    #[arg(long, default_value_t = 2)]
    df: usize,
    /// Noise std relative to each cube's RMS.
    #[arg(long, default_value_t = 0.01)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    /// Run config (key = value lines); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full-resolution dataset.
    #[arg(long)]
    hr: PathBuf,
    /// Pre-degraded inputs; generated from --hr when absent.
    #[arg(long)]
    lr_data: Option<PathBuf>,
    #[arg(long)]
    out_ckpt: PathBuf,
    #[arg(long)]
    metrics_csv: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    ckpt: PathBuf,
    /// Full-resolution dataset.
    #[arg(long)]
    data: PathBuf,
    /// Pre-degraded inputs matching --data.
    #[arg(long)]
    lr_data: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    metrics_csv: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    data: PathBuf,
    /// Record index.
    #[arg(long)]
    record: usize,
    /// Files are written as <prefix>_f<frame>.pgm / .csv.
    #[arg(long)]
    out_prefix: PathBuf,
    /// Export maps of the model's output for this record instead of the raw cube.
    #[arg(long, requires = "config")]
    ckpt: Option<PathBuf>,
    /// Run config of --ckpt.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 3,
        Error::Format(_) => 4,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Degrade(a) => degrade_cmd(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::ExportMaps(a) => export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn radar_params(a: &SimulateArgs) -> RadarParams {
    let base = match a.preset {
        Preset::Full => RadarParams::default(),
        Preset::Desk => RadarParams::desk(),
    };
    RadarParams::with_geometry(
        a.carrier.unwrap_or(base.f_c),
        a.prf.unwrap_or(base.prf),
        a.frames.unwrap_or(base.k),
        a.pulses.unwrap_or(base.m),
        a.bins.unwrap_or(base.n),
        a.r_min.unwrap_or(base.r_min),
        a.r_max.unwrap_or(base.r_max),
    )
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let radar = radar_params(&a);
    radar.validate()?;
    let templates = standard_templates(a.classes)?;
    let records = generate_dataset(&templates, &radar, a.per_class, a.seed)?;
    let file = DatasetFile::with_dims((radar.k, radar.m, radar.n), records, a.classes)?;
    save_dataset(&a.out, &file)?;
    println!(
        "wrote {} records of ({}, {}, {}) to {}",
        file.records.len(),
        file.k,
        file.m,
        file.n,
        a.out.display()
    );
    for (t, count) in templates.iter().zip(file.class_histogram()) {
        println!("  {:<12} {count}", t.name);
    }
    Ok(())
}

fn degrade_cmd(a: DegradeArgs) -> Result<()> {
    let input = load_dataset(&a.input)?;
    let spec = DegradeSpec {
        ds: a.ds,
        df: a.df,
        noise_sigma_rel: a.noise,
    };
    spec.validate()?;
    if a.ds > input.m || a.df > input.n {
        return Err(Error::Config(format!(
            "factors ds={} df={} exceed the cube axes M={} N={}",
            a.ds, a.df, input.m, input.n
        )));
    }
    let records = input
        .records
        .iter()
        .enumerate()
        .map(|(i, (cube, label))| Ok((degrade(cube, &spec, &mut noise_rng(a.seed, a.ds, a.df, i))?, *label)))
        .collect::<Result<Vec<_>>>()?;
    let out = DatasetFile::with_dims((input.k, input.m / a.ds, input.n / a.df), records, input.num_classes)?;
    save_dataset(&a.out, &out)?;
    println!(
        "wrote {} records of ({}, {}, {}) to {}",
        out.records.len(),
        out.k,
        out.m,
        out.n,
        a.out.display()
    );
    Ok(())
}

fn load_config(path: Option<&Path>) -> Result<TrainConfig> {
    match path {
        Some(p) => read_run_config(p),
        None => {
            let cfg = TrainConfig::default();
            cfg.validate()?;
            Ok(cfg)
        }
    }
}

/// Loads HR (and optional LR) data and derives every input `config` needs.
fn prepare(config: &TrainConfig, hr_path: &Path, lr: Option<&Path>, with_train_factors: bool) -> Result<Prepared> {
    let hr = load_dataset(hr_path)?;
    if hr.records.is_empty() {
        return Err(Error::Argument(format!("dataset {} is empty", path_name(hr_path))));
    }
    if hr.num_classes > config.classifier.num_classes {
        return Err(Error::Config(format!(
            "dataset declares {} classes but num_classes is {}",
            hr.num_classes, config.classifier.num_classes
        )));
    }
    if config.ds > hr.m || config.df > hr.n {
        return Err(Error::Config(format!(
            "ds={} df={} exceed the dataset axes M={} N={}",
            config.ds, config.df, hr.m, hr.n
        )));
    }
    match lr {
        Some(path) => {
            if with_train_factors && config.train_factors() != [(config.ds, config.df)] {
                return Err(Error::Config(format!(
                    "regime {} trains several factors; omit --lr-data to generate them",
                    config.regime
                )));
            }
            let lr = load_dataset(path)?;
            Prepared::with_lr_cubes(&hr.records, &lr.records, (config.ds, config.df))
        }
        None => {
            let mut factors = if with_train_factors {
                config.train_factors()
            } else {
                Vec::new()
            };
            if !factors.contains(&(config.ds, config.df)) {
                factors.push((config.ds, config.df));
            }
            Prepared::new(&hr.records, &factors, config.noise_sigma_rel, config.seed)
        }
    }
}

fn path_name(p: &Path) -> String {
    p.display().to_string()
}

fn train(a: TrainArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let data = prepare(&config, &a.hr, a.lr_data.as_deref(), true)?;
    let (bundle, history) = train_prepared(&data, &config)?;
    save_checkpoint(&a.out_ckpt, &bundle.to_store()?)?;
    let mut csv = MetricsCsv::create(&a.metrics_csv)?;
    for r in &history.records {
        csv.write(r)?;
    }
    csv.finish()?;
    if let Some(last) = history.records.last() {
        println!(
            "{} d={}x{} epochs={} accuracy={:.4} psnr={:.3} ms_ssim={:.4}",
            config.regime, config.ds, config.df, config.epochs, last.accuracy, last.psnr, last.ms_ssim
        );
    }
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let config = load_config(a.config.as_deref())?;
    let store = load_checkpoint(&a.ckpt)?;
    let bundle = ModelBundle::from_store(&config, &store)?;
    let data = prepare(&config, &a.data, a.lr_data.as_deref(), false)?;
    let rec = evaluate_split(&bundle, &data, &config)?;
    let mut csv = MetricsCsv::create(&a.metrics_csv)?;
    csv.write(&rec)?;
    csv.finish()?;
    println!(
        "accuracy={:.4} l1={:.5} ms_ssim={:.4} psnr={:.3}",
        rec.accuracy, rec.l1, rec.ms_ssim, rec.psnr
    );
    Ok(())
}

fn export(a: ExportArgs) -> Result<()> {
    let data = load_dataset(&a.data)?;
    let Some((cube, _)) = data.records.get(a.record) else {
        return Err(Error::Argument(format!(
            "record {} out of range for {} records",
            a.record,
            data.records.len()
        )));
    };
    let stack = match &a.ckpt {
        None => cube_range_doppler(cube)?,
        Some(ckpt) => {
            let config = load_config(a.config.as_deref())?;
            let bundle = ModelBundle::from_store(&config, &load_checkpoint(ckpt)?)?;
            let spec = DegradeSpec {
                ds: config.ds,
                df: config.df,
                noise_sigma_rel: config.noise_sigma_rel,
            };
            let lr = prepare_lr(cube, &spec, config.seed, a.record)?;
            to_range_doppler(&bundle.infer(&lr, config.ds, config.df)?.sr)?
        }
    };
    let written = export_maps(&stack, &a.out_prefix)?;
    println!("wrote {} files for {} frames", written.len(), stack.frames);
    Ok(())
}
