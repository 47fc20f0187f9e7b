//! Command-line front end.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::channel::ChannelKind;
use crate::checkpoint;
use crate::config::{DatasetSpec, RunConfig};
use crate::cubical::cubical_diagram;
use crate::diagram::PersistenceDiagram;
use crate::error::{Error, Result};
use crate::gradcheck;
use crate::image::Image;
use crate::pgm::{load_images, save_pgm};
use crate::synth::{gen_synthetic, SynthKind, SyntheticSpec};
use crate::train::{aggregate, calibrate, evaluate_sweep, log_to_csv, sweep_to_csv, train, SweepAxis, SweepSpec};
use crate::wasserstein::wasserstein;

#[derive(Debug, Parser)]
#[command(name = "topojscc", version, about = "Topology-aware deep joint source-channel coding")]
struct Cli {
    /// Seed overriding the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key = value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model; writes model.ckpt, train_log.csv and config.txt.
    Train(TrainArgs),
    /// Evaluate checkpoints along an SNR or bandwidth sweep; writes sweep.csv.
    Eval(EvalArgs),
    /// Persistence diagram of each PGM image; writes <stem>.csv per image.
    Ph(PhArgs),
    /// Wasserstein distance between two diagram CSV files.
    Wdist(WdistArgs),
    /// Generate a synthetic PGM dataset.
    Gen(GenArgs),
    /// Report loss magnitudes and recommended topological weights.
    Calibrate(CalibrateArgs),
    /// Run the finite-difference gradient suites.
    Gradcheck,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// PGM file or directory, overriding the config's dataset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Checkpoint file; repeat for a bandwidth sweep (one per rho).
    #[arg(long = "checkpoint", required = true)]
    checkpoints: Vec<PathBuf>,
    #[arg(long, default_value = "snr")]
    axis: String,
    /// Comma-separated SNRs (dB) or bandwidth ratios.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long, default_value_t = 1)]
    runs: usize,
    #[arg(long)]
    channel: Option<String>,
    /// SNR used along the bandwidth axis.
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
    /// Receiver knows the fading gain.
    #[arg(long)]
    csi: bool,
    /// PGM file or directory holding the test images.
    #[arg(long)]
    data: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PhArgs {
    /// PGM files or directories.
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct WdistArgs {
    first: PathBuf,
    second: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
}

#[derive(Debug, Args)]
struct GenArgs {
    #[arg(long)]
    kind: String,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 32)]
    height: usize,
    #[arg(long, default_value_t = 32)]
    width: usize,
    /// Upper bound on objects per image.
    #[arg(long, default_value_t = 3)]
    features: usize,
    /// Use exactly `features` objects in every image.
    #[arg(long)]
    exact: bool,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 10.0)]
    snr: f64,
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.train.seed = s;
    }
    Ok(cfg)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn dataset_images(spec: &DatasetSpec) -> Result<Vec<Image>> {
    match spec {
        DatasetSpec::Pgm(p) => Ok(load_images(p)?.into_iter().map(|(_, im)| im).collect()),
        DatasetSpec::Synthetic(s) => Ok(gen_synthetic(s)?.images),
    }
}

/// Held-out images: an explicit path, otherwise the configured dataset
/// (synthetic sets are redrawn with `seed + 1` and `eval_count` images).
fn eval_images(data: &Option<PathBuf>, cfg: &RunConfig) -> Result<Vec<Image>> {
    if let Some(p) = data {
        return dataset_images(&DatasetSpec::Pgm(p.clone()));
    }
    match &cfg.dataset {
        DatasetSpec::Synthetic(s) => {
            let held_out = SyntheticSpec {
                count: cfg.eval_count,
                seed: s.seed.wrapping_add(1),
                ..s.clone()
            };
            Ok(gen_synthetic(&held_out)?.images)
        }
        other => dataset_images(other),
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).try_init();
    match &cli.command {
        Command::Train(a) => cmd_train(&cli, a),
        Command::Eval(a) => cmd_eval(&cli, a),
        Command::Ph(a) => cmd_ph(&cli, a),
        Command::Wdist(a) => cmd_wdist(a),
        Command::Gen(a) => cmd_gen(&cli, a),
        Command::Calibrate(a) => cmd_calibrate(&cli, a),
        Command::Gradcheck => cmd_gradcheck(&cli),
    }
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> Result<()> {
    let mut cfg = load_config(cli)?;
    if let Some(d) = &a.data {
        cfg.dataset = DatasetSpec::Pgm(d.clone());
    }
    if let Some(e) = a.epochs {
        cfg.train.max_epochs = e;
        cfg.train.validate()?;
    }
    if a.dump_config {
        print!("{}", cfg.dump());
        return Ok(());
    }
    let images = dataset_images(&cfg.dataset)?;
    ensure_dir(&cli.out)?;
    let outcome = train(&cfg.train, &images, |e| {
        eprintln!(
            "epoch {:>3}  mse {:.6}  topo_img {:.5}  topo_lat {:.5}  val {:.6}",
            e.epoch, e.mse, e.topo_img, e.topo_lat, e.val_loss
        );
    })?;
    checkpoint::save(&outcome.model, &cli.out.join("model.ckpt"))?;
    write_file(&cli.out.join("train_log.csv"), log_to_csv(&outcome.log).as_bytes())?;
    write_file(&cli.out.join("config.txt"), cfg.dump().as_bytes())?;
    println!(
        "best epoch {} (validation loss {}), realized rho {}",
        outcome.best_epoch,
        outcome.best_val_loss,
        outcome.model.shape.realized_rho()
    );
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let axis: SweepAxis = a.axis.parse()?;
    let models = a
        .checkpoints
        .iter()
        .map(|p| checkpoint::load(p))
        .collect::<Result<Vec<_>>>()?;
    let channel = match &a.channel {
        Some(c) => c.parse::<ChannelKind>()?,
        None => cfg.train.channel,
    };
    let spec = SweepSpec {
        axis,
        values: a.values.clone(),
        channel,
        csi: a.csi || cfg.train.csi,
        runs: a.runs,
        seed: cfg.train.seed,
        fixed_snr_db: a.snr,
    };
    let images = eval_images(&a.data, &cfg)?;
    let records = evaluate_sweep(&models, &spec, &images)?;
    ensure_dir(&cli.out)?;
    write_file(&cli.out.join("sweep.csv"), sweep_to_csv(&records).as_bytes())?;
    println!("value,psnr_mean,psnr_se,wdist_mean,wdist_se");
    for (v, pm, ps, wm, ws) in aggregate(&records) {
        println!("{v},{pm},{ps},{wm},{ws}");
    }
    Ok(())
}

fn cmd_ph(cli: &Cli, a: &PhArgs) -> Result<()> {
    ensure_dir(&cli.out)?;
    for input in &a.images {
        for (path, im) in load_images(input)? {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "image".into());
            let target = cli.out.join(format!("{stem}.csv"));
            cubical_diagram(&im, 1)?.write_csv(&target)?;
            println!("{}", target.display());
        }
    }
    Ok(())
}

fn cmd_wdist(a: &WdistArgs) -> Result<()> {
    let d1 = PersistenceDiagram::read_csv(&a.first)?;
    let d2 = PersistenceDiagram::read_csv(&a.second)?;
    let mut total = 0.0;
    for dim in 0..2 {
        let w = wasserstein(&d1.of_dim(dim), &d2.of_dim(dim), a.p)?.cost;
        println!("wdist{dim}={w}");
        total += w;
    }
    println!("wdist_total={total}");
    Ok(())
}

fn cmd_gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let kind: SynthKind = a.kind.parse()?;
    let spec = SyntheticSpec {
        features: a.features,
        exact: a.exact,
        ..SyntheticSpec::new(kind, a.count, a.height, a.width, cli.seed.unwrap_or(cfg.train.seed))
    };
    let data = gen_synthetic(&spec)?;
    ensure_dir(&cli.out)?;
    let mut manifest = String::from("file,beta0,beta1\n");
    for (i, (im, (b0, b1))) in data.images.iter().zip(&data.betti).enumerate() {
        let name = format!("{kind}_{i:05}.pgm");
        save_pgm(&cli.out.join(&name), im)?;
        manifest.push_str(&format!("{name},{b0},{b1}\n"));
    }
    write_file(&cli.out.join("betti.csv"), manifest.as_bytes())?;
    println!("wrote {} images to {}", data.images.len(), cli.out.display());
    Ok(())
}

fn cmd_calibrate(cli: &Cli, a: &CalibrateArgs) -> Result<()> {
    let cfg = load_config(cli)?;
    let model = checkpoint::load(&a.checkpoint)?;
    let mut images = eval_images(&a.data, &cfg)?;
    images.truncate(cfg.train.batch_size.max(2));
    let c = calibrate(&model, &images, cfg.train.channel, a.snr, cfg.train.seed)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "# loss magnitudes on {} images at {} dB", images.len(), a.snr);
    let _ = writeln!(out, "# mse = {}", c.mse);
    let _ = writeln!(out, "# topo_img = {}", c.topo_img);
    let _ = writeln!(out, "# topo_lat = {}", c.topo_lat);
    let _ = writeln!(out, "lambda_img = {}", c.lambda_img);
    let _ = writeln!(out, "lambda_lat = {}", c.lambda_lat);
    Ok(())
}

fn cmd_gradcheck(cli: &Cli) -> Result<()> {
    let results = gradcheck::run_all(cli.seed.unwrap_or(0))?;
    let mut failed = 0;
    for r in &results {
        let status = if r.passed() { "ok" } else { "FAIL" };
        println!("{:<20} rel_err {:.3e}  tol {:.0e}  coords {:>4}  {status}", r.name, r.rel_err, r.tolerance, r.coords);
        failed += usize::from(!r.passed());
    }
    if failed > 0 {
        return Err(Error::Degenerate(format!("{failed} gradient checks failed")));
    }
    Ok(())
}
