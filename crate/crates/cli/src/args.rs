use std::ffi::OsString;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, CommandFactory, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(
    name = "mgvi",
    version,
    about = "Pose-driven frame interpolation: simulate, train, upsample, render, evaluate",
    after_help = "Precedence for every setting: command-line flag, then --config file, then environment (MGVI_SEED), then the built-in default."
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Simulate training pairs from synthetic 3D motion.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Train the denoising and interpolation networks on a simulated dataset.
    #[command(args_override_self = true)]
    Train(TrainArgs),
    /// Upsample a low-rate pose sequence.
    #[command(args_override_self = true)]
    Upsample(UpsampleArgs),
    /// Render a pose sequence over background frames.
    #[command(args_override_self = true)]
    Render(RenderArgs),
    /// Score predictions against ground truth.
    #[command(args_override_self = true)]
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Output dataset directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Number of pairs to simulate.
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    /// Upsampling factor between keyframes and ground truth.
    #[arg(long, default_value_t = 8)]
    pub s: usize,
    /// High-rate frames per sequence.
    #[arg(long, default_value_t = 65)]
    pub frames: usize,
    /// High-rate frame rate.
    #[arg(long, default_value_t = 60)]
    pub fps: u32,
    #[arg(long, default_value_t = 256)]
    pub width: usize,
    #[arg(long, default_value_t = 256)]
    pub height: usize,
    /// Sines per joint angle.
    #[arg(long, default_value_t = 3)]
    pub harmonics: usize,
    /// Standard deviation of keypoint jitter, in pixels.
    #[arg(long, default_value_t = 3.0)]
    pub noise_sigma: f64,
    /// Probability that a keypoint is jittered.
    #[arg(long, default_value_t = 0.1)]
    pub perturb_prob: f64,
    /// Probability that a keypoint is dropped.
    #[arg(long, default_value_t = 0.05)]
    pub dropout_prob: f64,
    #[arg(long, env = "MGVI_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Flat `key = value` file with defaults for any flag above.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Dataset directory written by `simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Checkpoint to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV [default: loss_history.csv next to the checkpoint].
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Loss curve SVG [default: loss_history.svg next to the checkpoint].
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long, default_value_t = 30)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1.0)]
    pub lambda_interp: f64,
    #[arg(long, default_value_t = 0.9)]
    pub beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    pub beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    pub adam_eps: f64,
    /// Optimizer steps of linear learning-rate warmup.
    #[arg(long, default_value_t = 0)]
    pub warmup_steps: usize,
    /// Decay the learning rate to zero along a half cosine.
    #[arg(long)]
    pub cosine_decay: bool,
    /// Re-corrupt the clean keyframes every epoch, using the dataset's
    /// corruption settings.
    #[arg(long)]
    pub augment: bool,
    #[arg(long, default_value_t = 128)]
    pub d_model: usize,
    #[arg(long, default_value_t = 8)]
    pub heads: usize,
    #[arg(long, default_value_t = 4)]
    pub layers: usize,
    #[arg(long, default_value_t = 256)]
    pub d_ff: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dropout: f64,
    #[arg(long, default_value_t = 256)]
    pub max_len: usize,
    #[arg(long, env = "MGVI_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Suppress per-epoch progress on stderr.
    #[arg(long)]
    pub quiet: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    Linear,
    Quadratic,
    Model,
}

#[derive(Args, Debug)]
pub struct UpsampleArgs {
    /// Low-rate input pose file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output pose file.
    #[arg(long)]
    pub out: PathBuf,
    /// Checkpoint; required with `--baseline model`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    pub s: usize,
    #[arg(long, value_enum, default_value_t = Baseline::Model)]
    pub baseline: Baseline,
    /// Restore the denoised keyframes at every s-th output frame.
    #[arg(long)]
    pub pin_keyframes: bool,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Pose sequence to render.
    #[arg(long)]
    pub poses: PathBuf,
    /// Background PPM file, or a directory of PPM frames (sorted by name).
    #[arg(long)]
    pub bg: PathBuf,
    /// Output directory for frame_NNNNNN.ppm and mask_NNNNNN.pgm.
    #[arg(long)]
    pub out: PathBuf,
    /// Reuse the first background for every frame.
    #[arg(long)]
    pub static_bg: bool,
    #[arg(long, default_value_t = 4.0)]
    pub limb_thickness: f64,
    #[arg(long, default_value_t = 3.0)]
    pub joint_radius: f64,
    /// Growth of the human mask around the skeleton, in pixels.
    #[arg(long, default_value_t = 6.0)]
    pub mask_dilation: f64,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    Pose,
    Image,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predicted pose file or directory (pose mode), or frame directory (image mode).
    #[arg(long)]
    pub pred: PathBuf,
    /// Ground truth, same layout as `--pred`.
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Pose)]
    pub mode: EvalMode,
    /// Directory of mask_NNNNNN.pgm files for masked image metrics.
    #[arg(long)]
    pub masks: Option<PathBuf>,
    /// Metrics CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-frame SVG plot [default: the CSV path with an .svg extension].
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
}

/// Splits a flat `key = value` file into pairs; `#` starts a comment.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected `key = value`, got `{raw}`", i + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"').to_string();
        if key.is_empty() {
            bail!("config line {}: empty key", i + 1);
        }
        out.push((key, value));
    }
    Ok(out)
}

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(2);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(rest) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(rest));
        }
    }
    None
}

/// Parses the command line, splicing settings from `--config` in front of
/// the explicit flags so that flags win.
pub fn parse_with_config(args: Vec<OsString>) -> Result<Cli, clap::Error> {
    let expanded = match expand_config(&args) {
        Ok(a) => a,
        Err(e) => return Err(Cli::command().error(clap::error::ErrorKind::ValueValidation, format!("{e:#}"))),
    };
    Cli::try_parse_from(expanded)
}

fn expand_config(args: &[OsString]) -> Result<Vec<OsString>> {
    let Some(path) = config_path(args) else {
        return Ok(args.to_vec());
    };
    let sub_name = args.get(1).map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let root = Cli::command();
    let Some(sub) = root.find_subcommand(&sub_name) else {
        return Ok(args.to_vec());
    };
    let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
    let mut injected = Vec::new();
    for (key, value) in parse_config_text(&text)? {
        let Some(arg) = sub.get_arguments().find(|a| a.get_long() == Some(key.as_str())) else {
            bail!("config {}: unknown key `{key}` for `{sub_name}`", path.display());
        };
        if key == "config" {
            bail!("config {}: nested `config` is not allowed", path.display());
        }
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value.as_str() {
                "true" => injected.push(OsString::from(format!("--{key}"))),
                "false" => {}
                other => bail!("config {}: `{key}` expects true or false, got `{other}`", path.display()),
            }
        } else {
            injected.push(OsString::from(format!("--{key}={value}")));
        }
    }
    let mut out = args[..2].to_vec();
    out.extend(injected);
    out.extend_from_slice(&args[2..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn os(v: &[&str]) -> Vec<OsString> {
        v.iter().map(OsString::from).collect()
    }

    #[test]
    fn config_lines() {
        let kv = parse_config_text("# c\nepochs = 3\nbatch_size=4 # trailing\n\n").unwrap();
        assert_eq!(kv, vec![("epochs".into(), "3".into()), ("batch-size".into(), "4".into())]);
        assert!(parse_config_text("nonsense").is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "epochs = 3\nlr = 0.5\ncosine_decay = true").unwrap();
        let p = f.path().to_str().unwrap();
        let cli = parse_with_config(os(&["mgvi", "train", "--data", "d", "--out", "m", "--config", p, "--epochs", "7"])).unwrap();
        let Command::Train(t) = cli.command else { panic!() };
        assert_eq!((t.epochs, t.lr, t.cosine_decay), (7, 0.5, true));
    }

    #[test]
    fn unknown_config_key_is_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "epochz = 3").unwrap();
        let p = f.path().to_str().unwrap();
        assert!(parse_with_config(os(&["mgvi", "train", "--data", "d", "--out", "m", "--config", p])).is_err());
    }

    #[test]
    fn repeated_flags_take_the_last_value() {
        let cli = parse_with_config(os(&["mgvi", "simulate", "--out", "x", "--count", "2", "--count", "5"])).unwrap();
        let Command::Simulate(s) = cli.command else { panic!() };
        assert_eq!(s.count, 5);
    }
}
