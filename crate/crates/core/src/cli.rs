//! Command-line front end. [`run`] parses arguments, dispatches to a
//! subcommand and returns the process exit code:
//! 0 on success, 1 when a verification fails, 2 on usage or I/O errors.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::dataset::{build_training_set, load_benchmark, read_store, AugmentSpec, PairSpec};
use crate::error::{Error, Result};
use crate::eval::{evaluate, super_resolve};
use crate::gradcheck::{self, GradCheckConfig, InjectedBug};
use crate::imaging::{
    bicubic_resize, read_image, rgb_to_ycbcr, write_gray, write_rgb, ycbcr_to_rgb, DecodedImage, YCbCr,
};
use crate::model::{load_model, save_model, Hyperparams, MssrModel};
use crate::scalar::Scalar;
use crate::train::{train, TrainConfig, TrainSample};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const FINAL_MODEL: &str = "model.mssr";

#[derive(Debug, Parser)]
#[command(name = "mssr", version, about = "Multi-scale super-resolution network: data, training, inference")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a training sample store from directories of high-resolution images
    PrepareData(PrepareArgs),
    /// Train a model on a sample store
    Train(TrainArgs),
    /// Upscale one image
    Infer(InferArgs),
    /// Score a model against bicubic interpolation on a benchmark directory
    Evaluate(EvaluateArgs),
    /// Compare analytic gradients with central finite differences
    GradCheck(GradCheckArgs),
    /// Write an untrained model file (all zeros or He-initialized)
    InitModel(InitArgs),
}

#[derive(Debug, Args)]
pub struct PrepareArgs {
    /// Directories of high-resolution images
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Output store directory
    #[arg(long)]
    pub out: PathBuf,
    /// Disable rotation and downscale augmentation
    #[arg(long)]
    pub no_augment: bool,
    #[arg(long)]
    pub no_rotate: bool,
    #[arg(long)]
    pub no_downscale: bool,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4")]
    pub scales: Vec<u8>,
    #[arg(long, default_value_t = 41)]
    pub patch_size: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Args)]
pub struct ArchArgs {
    /// Layers per fusion block (N_L)
    #[arg(long, default_value_t = 9)]
    pub long_depth: usize,
    /// Layer whose output is tapped for the short path (N_S)
    #[arg(long, default_value_t = 2)]
    pub short_depth: usize,
    /// Reconstruction layers (N_r)
    #[arg(long, default_value_t = 2)]
    pub recon_depth: usize,
    /// Feature channels per hidden layer
    #[arg(long, default_value_t = 64)]
    pub width: usize,
}

impl ArchArgs {
    fn hyper(&self) -> Hyperparams {
        Hyperparams {
            long_depth: self.long_depth,
            short_depth: self.short_depth,
            recon_depth: self.recon_depth,
            width: self.width,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Sample store written by prepare-data
    #[arg(long)]
    pub store: PathBuf,
    /// Directory for checkpoints, the training log and the final model
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    /// Epoch at which the learning rate drops tenfold [default: min(80, epochs)]
    #[arg(long)]
    pub lr_drop_epoch: Option<usize>,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub arch: ArchArgs,
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    pub precision: Precision,
    /// Write 0 in the seconds column so identical runs give identical logs
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct InferArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Low-resolution input image
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub scale: u8,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Directory of ground-truth images
    #[arg(long)]
    pub benchmark: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub scale: u8,
    /// CSV output path
    #[arg(long)]
    pub out: PathBuf,
    /// Skip timing and write 0 in the seconds column
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Args)]
pub struct GradCheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Perturb one analytic gradient to confirm the check can fail
    #[arg(long, value_parser = ["bias", "weight", "input"])]
    pub inject_bug: Option<String>,
    /// Use the default width-64 network instead of the toy width
    #[arg(long)]
    pub full: bool,
}

#[derive(Debug, Args)]
pub struct InitArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// All-zero parameters instead of He initialization
    #[arg(long)]
    pub zero: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub arch: ArchArgs,
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, S>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::PrepareData(a) => prepare_data(&a, out),
        Command::Train(a) => match a.precision {
            Precision::F32 => train_cmd::<f32>(&a, out),
            Precision::F64 => train_cmd::<f64>(&a, out),
        },
        Command::Infer(a) => infer(&a, out),
        Command::Evaluate(a) => evaluate_cmd(&a, out),
        Command::GradCheck(a) => grad_check(&a, out),
        Command::InitModel(a) => init_model(&a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_USAGE
        }
    }
}

fn io_out(e: std::io::Error) -> Error {
    Error::io(Path::new("<stdout>"), e)
}

fn check_scale(scale: u8) -> Result<()> {
    if crate::train::SCALES.contains(&scale) {
        Ok(())
    } else {
        Err(Error::Argument(format!("scale must be 2, 3 or 4, got {scale}")))
    }
}

fn prepare_data(a: &PrepareArgs, out: &mut impl Write) -> Result<i32> {
    let augment = AugmentSpec {
        rotate: !a.no_augment && !a.no_rotate,
        downscale: !a.no_augment && !a.no_downscale,
        ..AugmentSpec::default()
    };
    let pairs = PairSpec {
        scales: a.scales.clone(),
        patch_size: a.patch_size,
        stride: a.patch_size,
    };
    let report = build_training_set(&a.dirs, &augment, &pairs, &a.out)?;
    writeln!(out, "images: {} ({} skipped)", report.images_used, report.warnings).map_err(io_out)?;
    for (scale, count) in &report.count_by_scale {
        writeln!(out, "scale x{scale}: {count} samples").map_err(io_out)?;
    }
    writeln!(out, "total: {} samples -> {}", report.samples, a.out.display()).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn train_cmd<T: Scalar>(a: &TrainArgs, out: &mut impl Write) -> Result<i32> {
    let config = TrainConfig {
        batch_size: a.batch_size,
        initial_lr: a.lr,
        lr_drop_epoch: a.lr_drop_epoch.unwrap_or(a.epochs.min(80)),
        total_epochs: a.epochs,
        beta1: a.beta1,
        beta2: a.beta2,
        epsilon: a.epsilon,
        weight_decay: a.weight_decay,
        seed: a.seed,
        record_wall_time: !a.no_timing,
    };
    config.validate()?;
    let hyper = a.arch.hyper();
    hyper.validate()?;
    let store = read_store(&a.store)?;
    let dataset = store
        .samples
        .iter()
        .map(|s| TrainSample::new(s.x.cast::<T>(), s.r.cast::<T>(), s.scale))
        .collect::<Result<Vec<_>>>()?;

    writeln!(
        out,
        "N_L={} N_S={} N_r={} width={} lr={:e} batch={} epochs={} lr_drop_epoch={} precision={} samples={}",
        hyper.long_depth,
        hyper.short_depth,
        hyper.recon_depth,
        hyper.width,
        config.initial_lr,
        config.batch_size,
        config.total_epochs,
        config.lr_drop_epoch,
        T::NAME,
        dataset.len()
    )
    .map_err(io_out)?;

    let mut model = MssrModel::<T>::he_init(hyper, a.seed)?;
    let report = train(&mut model, &dataset, &config, &a.out)?;
    for e in &report.epochs {
        writeln!(out, "epoch {}: loss {:.6e} lr {:e}", e.epoch, e.mean_loss, e.lr).map_err(io_out)?;
    }
    for (scale, loss) in &report.final_loss_by_scale {
        writeln!(out, "final loss x{scale}: {loss:.6e}").map_err(io_out)?;
    }
    let final_path = a.out.join(FINAL_MODEL);
    save_model(&model, &final_path)?;
    writeln!(out, "model written to {}", final_path.display()).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn infer(a: &InferArgs, out: &mut impl Write) -> Result<i32> {
    check_scale(a.scale)?;
    let model = load_model::<f32>(&a.model)?;
    let image = read_image::<f32>(&a.input)?;
    let (h, w) = image.dims();
    let s = a.scale as usize;
    let (oh, ow) = (h * s, w * s);
    match image {
        DecodedImage::Gray(y) => {
            let x = bicubic_resize(&y, oh, ow);
            write_gray(&super_resolve(&model, &x)?, &a.output)?;
        }
        DecodedImage::Rgb(rgb) => {
            let ycc = rgb_to_ycbcr(&rgb);
            let x = bicubic_resize(&ycc.y, oh, ow);
            let up = YCbCr {
                y: super_resolve(&model, &x)?,
                cb: bicubic_resize(&ycc.cb, oh, ow),
                cr: bicubic_resize(&ycc.cr, oh, ow),
            };
            let mut rgb = ycbcr_to_rgb(&up)?;
            for p in [&mut rgb.r, &mut rgb.g, &mut rgb.b] {
                *p = p.clamp_unit();
            }
            write_rgb(&rgb, &a.output)?;
        }
    }
    writeln!(out, "{}x{} -> {}x{}: {}", w, h, ow, oh, a.output.display()).map_err(io_out)?;
    Ok(EXIT_OK)
}

fn evaluate_cmd(a: &EvaluateArgs, out: &mut impl Write) -> Result<i32> {
    check_scale(a.scale)?;
    let model = load_model::<f32>(&a.model)?;
    let pairs = load_benchmark::<f32>(&a.benchmark, a.scale)?;
    if pairs.is_empty() {
        return Err(Error::Argument(format!("no usable images in {}", a.benchmark.display())));
    }
    let report = evaluate(&model, &pairs, a.scale, !a.no_timing)?;
    report.write_csv(&a.out)?;
    let avg = report.average();
    writeln!(
        out,
        "x{} over {} images: bicubic {:.2} dB / {:.4}, mssr {:.2} dB / {:.4}",
        a.scale,
        report.images.len(),
        avg.bicubic.psnr,
        avg.bicubic.ssim,
        avg.model.psnr,
        avg.model.ssim
    )
    .map_err(io_out)?;
    Ok(EXIT_OK)
}

fn grad_check(a: &GradCheckArgs, out: &mut impl Write) -> Result<i32> {
    let mut config = GradCheckConfig {
        seed: a.seed,
        inject: a.inject_bug.as_deref().map(str::parse::<InjectedBug>).transpose().map_err(Error::Argument)?,
        ..GradCheckConfig::default()
    };
    if a.full {
        config.hyper = Hyperparams::default();
    }
    let report = gradcheck::run(&config)?;
    for g in &report.groups {
        writeln!(
            out,
            "{:<16} max_rel_err {:.3e}  ({} checked, {} near a kink)",
            g.name, g.max_rel_err, g.checked, g.skipped
        )
        .map_err(io_out)?;
    }
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    writeln!(out, "{verdict}: max {:.3e} (tolerance {:e})", report.max_rel_err(), report.tolerance).map_err(io_out)?;
    Ok(if report.passed() { EXIT_OK } else { EXIT_FAILURE })
}

fn init_model(a: &InitArgs, out: &mut impl Write) -> Result<i32> {
    let hyper = a.arch.hyper();
    let model = if a.zero {
        MssrModel::<f32>::zeros(hyper)?
    } else {
        MssrModel::<f32>::he_init(hyper, a.seed)?
    };
    save_model(&model, &a.out)?;
    writeln!(out, "{} parameters -> {}", model.parameter_count(), a.out.display()).map_err(io_out)?;
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut o, mut e) = (Vec::new(), Vec::new());
        let code = run(args.iter().copied(), &mut o, &mut e);
        (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["mssr", "--help"]);
        assert_eq!(code, 0);
        assert!(out.contains("prepare-data"));
    }

    #[test]
    fn train_help_prints_defaults() {
        let (code, out, _) = run_capture(&["mssr", "train", "--help"]);
        assert_eq!(code, 0);
        for needle in [
            "[default: 64]",
            "[default: 0.0001]",
            "[default: 9]",
            "[default: 2]",
            "[default: 0.9]",
            "[default: 0.999]",
            "[default: 100]",
        ] {
            assert!(out.contains(needle), "missing {needle} in\n{out}");
        }
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_capture(&["mssr", "train", "--bogus"]);
        assert_eq!(code, 2);
        assert!(!err.is_empty());
    }

    #[test]
    fn bad_scale_is_rejected() {
        let (code, _, err) = run_capture(&["mssr", "infer", "--model", "m", "--input", "i", "--output", "o", "--scale", "5"]);
        assert_eq!(code, 2);
        assert!(err.contains("scale"));
    }
}
