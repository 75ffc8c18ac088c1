use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use retouch_core::enhance::{choose_action, enhance, parameter_report};
use retouch_core::image::io::write_atomic;
use retouch_core::image::{load_image, psnr, save_image, ssim};
use retouch_core::trainer::{list_files, run_training, Checkpoint, Dataset, TrainConfig};

#[derive(Parser)]
#[command(name = "retouch", version, about = "Learn photo retouching from unpaired examples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent and critic from a source and a target directory.
    Train(Box<TrainArgs>),
    /// Enhance one image at its native resolution.
    Enhance(EnhanceArgs),
    /// PSNR and SSIM of images against references with the same file names.
    Eval(EvalArgs),
    /// Print or save the filter parameters chosen for an image.
    ExportParams(ExportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of images to be enhanced (domain X).
    #[arg(long)]
    source: PathBuf,
    /// Directory of images with the desired look (domain Y).
    #[arg(long)]
    target: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    out: PathBuf,
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Per-step CSV log; defaults to `<out>.log.csv`.
    #[arg(long)]
    log: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long, env = "RETOUCH_SEED")]
    seed: Option<u64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    #[arg(long)]
    critic_updates: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    replay_capacity: Option<usize>,
    /// Any other config field, e.g. `--set critic_channels=[16,32,64,128]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EnhanceArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Also write the chosen parameters here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Enhance inputs with this checkpoint first; without it inputs are
    /// compared as they are.
    #[arg(long)]
    ckpt: Option<PathBuf>,
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long = "ref")]
    reference: PathBuf,
    /// CSV with one row per matched pair.
    #[arg(long, default_value = "eval.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long = "in")]
    input: PathBuf,
    /// Write the report here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => train(*a),
        Command::Enhance(a) => cmd_enhance(a),
        Command::Eval(a) => eval(a),
        Command::ExportParams(a) => export_params(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn build_config(a: &TrainArgs) -> Result<TrainConfig> {
    let mut cfg = match &a.config {
        Some(p) => TrainConfig::load(p)?,
        None => TrainConfig::default(),
    };
    let flags: [(&str, Option<String>); 10] = [
        ("generator_steps", a.steps.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("lambda", a.lambda.map(float)),
        ("alpha", a.alpha.map(float)),
        ("beta", a.beta.map(float)),
        ("levels", a.levels.map(|v| v.to_string())),
        ("critic_updates", a.critic_updates.map(|v| v.to_string())),
        ("lr", a.lr.map(float)),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("replay_capacity", a.replay_capacity.map(|v| v.to_string())),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)?;
        }
    }
    for kv in &a.overrides {
        let (k, v) = kv
            .split_once('=')
            .with_context(|| format!("--set expects KEY=VALUE, got `{kv}`"))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(cfg)
}

/// Float literal that TOML accepts (always has a decimal point or exponent).
fn float(v: f64) -> String {
    format!("{v:?}")
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Fail before a long run if `path` cannot be written.
fn check_writable(path: &Path) -> Result<()> {
    let probe = sibling(path, ".probe");
    std::fs::write(&probe, b"").with_context(|| format!("cannot write {}", path.display()))?;
    let _ = std::fs::remove_file(&probe);
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let cfg = build_config(&a)?;
    let log_path = a.log.clone().unwrap_or_else(|| sibling(&a.out, ".log.csv"));
    check_writable(&a.out)?;
    check_writable(&log_path)?;
    let data = Dataset::from_dirs(&a.source, &a.target, cfg.agent_config().input_size)?;
    info!(
        "training on {} source / {} target images for {} steps (seed {})",
        data.source().len(),
        data.target().len(),
        cfg.generator_steps,
        cfg.seed
    );

    let partial_log = sibling(&log_path, ".partial");
    let mut log = csv::Writer::from_path(&partial_log)
        .with_context(|| format!("cannot create {}", partial_log.display()))?;
    log.write_record(["step", "reward", "value_loss", "policy_loss", "critic_loss"])?;
    let every = cfg.checkpoint_every;
    let report_every = (cfg.generator_steps / 20).max(1) as u64;
    let ckpt = run_training(cfg, &data, |row, trainer| {
        log.write_record([
            row.step.to_string(),
            row.reward.to_string(),
            row.value_loss.to_string(),
            row.policy_loss.to_string(),
            row.critic_loss.to_string(),
        ])
        .map_err(|e| retouch_core::Error::InvalidArgument(format!("log write failed: {e}")))?;
        if row.step % report_every == 0 {
            info!(
                "step {}: reward {:.3}, value loss {:.3}, policy loss {:.3}, critic loss {:.3}",
                row.step, row.reward, row.value_loss, row.policy_loss, row.critic_loss
            );
        }
        if every > 0 && row.step % every as u64 == 0 {
            trainer.checkpoint().save(&a.out)?;
        }
        Ok(())
    })?;
    log.flush()?;
    drop(log);
    ckpt.save(&a.out)?;
    std::fs::rename(&partial_log, &log_path).with_context(|| format!("cannot write {}", log_path.display()))?;
    info!("wrote {} and {}", a.out.display(), log_path.display());
    Ok(())
}

fn cmd_enhance(a: EnhanceArgs) -> Result<()> {
    let agent = Checkpoint::load(&a.ckpt)?.agent_net()?;
    let image = load_image(&a.input)?;
    let out = enhance(&agent, &image)?;
    let report = parameter_report(&out.action);
    save_image(&out.image, &a.out)?;
    match &a.report {
        Some(p) => write_atomic(p, report.as_bytes())?,
        None => print!("{report}"),
    }
    Ok(())
}

fn export_params(a: ExportArgs) -> Result<()> {
    let agent = Checkpoint::load(&a.ckpt)?.agent_net()?;
    let image = load_image(&a.input)?;
    let report = parameter_report(&choose_action(&agent, &image)?);
    match &a.out {
        Some(p) => write_atomic(p, report.as_bytes())?,
        None => print!("{report}"),
    }
    Ok(())
}

fn by_name(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(list_files(dir)?
        .into_iter()
        .filter_map(|p| Some((p.file_name()?.to_string_lossy().into_owned(), p)))
        .collect())
}

fn eval(a: EvalArgs) -> Result<()> {
    let agent = match &a.ckpt {
        Some(p) => Some(Checkpoint::load(p)?.agent_net()?),
        None => None,
    };
    let inputs = by_name(&a.input)?;
    let refs = by_name(&a.reference)?;
    let mut rows = Vec::new();
    for (name, in_path) in &inputs {
        let Some(ref_path) = refs.get(name) else {
            warn!("{name}: no reference in {}, skipped", a.reference.display());
            continue;
        };
        let pair = (|| -> retouch_core::Result<(f64, f64)> {
            let mut img = load_image(in_path)?;
            if let Some(agent) = &agent {
                img = enhance(agent, &img)?.image;
            }
            let reference = load_image(ref_path)?;
            Ok((psnr(&img, &reference)?, ssim(&img, &reference)?))
        })();
        match pair {
            Ok((p, s)) => rows.push((name.clone(), p, s)),
            Err(e) => warn!("{name}: {e}, skipped"),
        }
    }
    for name in refs.keys().filter(|n| !inputs.contains_key(*n)) {
        warn!("{name}: no input in {}, skipped", a.input.display());
    }
    if rows.is_empty() {
        bail!(
            "no matching image pairs between {} and {}",
            a.input.display(),
            a.reference.display()
        );
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["name", "psnr", "ssim"])?;
    println!("{:<32} {:>9} {:>8}", "image", "PSNR dB", "SSIM");
    for (name, p, s) in &rows {
        println!("{name:<32} {p:>9.3} {s:>8.5}");
        w.write_record([name.clone(), format!("{p:.6}"), format!("{s:.6}")])?;
    }
    let n = rows.len() as f64;
    let mean_p = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let mean_s = rows.iter().map(|r| r.2).sum::<f64>() / n;
    println!("{:<32} {mean_p:>9.3} {mean_s:>8.5}", format!("mean ({} pairs)", rows.len()));
    let bytes = w.into_inner().context("csv buffer")?;
    write_atomic(&a.out, &bytes)?;
    Ok(())
}
