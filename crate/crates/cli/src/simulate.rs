use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mgvi_core::mocap::{derive_seed, simulate_pair, synthesize_motion3d, CorruptionConfig, SimulationConfig, SynthConfig};
use mgvi_core::pose::{render_motion3d, render_sequence, Fps};
use serde::{Deserialize, Serialize};

use crate::args::SimulateArgs;
use crate::fsutil::write_atomic;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorruptionEntry {
    pub noise_sigma_px: f64,
    pub perturb_prob: f64,
    pub dropout_prob: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub seed: u64,
    pub s: usize,
    pub gt_high: String,
    pub gt_low: String,
    pub noisy_low: String,
    pub motion3d: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub count: usize,
    pub frames: usize,
    pub fps: u32,
    pub image_width: usize,
    pub image_height: usize,
    pub harmonics: usize,
    pub corruption: CorruptionEntry,
    pub pairs: Vec<PairEntry>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading manifest {}", path.display()))?;
        let m: Manifest = serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))?;
        if m.pairs.len() != m.count {
            bail!("manifest lists {} pairs but declares count {}", m.pairs.len(), m.count);
        }
        Ok(m)
    }
}

fn config(a: &SimulateArgs) -> Result<SimulationConfig> {
    if a.count == 0 {
        bail!("--count must be positive");
    }
    if a.s == 0 {
        bail!("--s must be positive");
    }
    if a.frames < 2 || !(a.frames - 1).is_multiple_of(a.s) {
        bail!("--frames {} must be at least 2 with frames - 1 divisible by s = {}", a.frames, a.s);
    }
    if a.width == 0 || a.height == 0 {
        bail!("--width and --height must be positive");
    }
    let corruption = CorruptionConfig {
        noise_sigma_px: a.noise_sigma,
        perturb_prob: a.perturb_prob,
        dropout_prob: a.dropout_prob,
        seed: 0,
    };
    corruption.validate()?;
    Ok(SimulationConfig {
        synth: SynthConfig {
            duration_frames: a.frames,
            fps: Fps::integer(a.fps)?,
            harmonics: a.harmonics,
            max_freq_hz: None,
        },
        s: a.s,
        image_size: (a.width, a.height),
        corruption,
    })
}

pub fn run(a: &SimulateArgs) -> Result<()> {
    let cfg = config(a)?;
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let manifest_path = a.out.join(MANIFEST);
    if manifest_path.exists() {
        fs::remove_file(&manifest_path)?;
    }
    let mut pairs = Vec::with_capacity(a.count);
    for i in 0..a.count {
        let seed = derive_seed(a.seed, i as u64);
        let id = format!("pair_{i:04}");
        let pair = simulate_pair(seed, &cfg).with_context(|| format!("simulating {id}"))?;
        let motion = synthesize_motion3d(derive_seed(seed, 0), &cfg.synth)?;
        let dir = a.out.join(&id);
        fs::create_dir_all(&dir)?;
        let entry = PairEntry {
            gt_high: format!("{id}/gt_high.pose"),
            gt_low: format!("{id}/gt_low.pose"),
            noisy_low: format!("{id}/noisy_low.pose"),
            motion3d: format!("{id}/motion.pose3d"),
            id,
            seed,
            s: a.s,
        };
        write_atomic(&a.out.join(&entry.gt_high), render_sequence(&pair.gt_high).as_bytes())?;
        write_atomic(&a.out.join(&entry.gt_low), render_sequence(&pair.gt_low).as_bytes())?;
        write_atomic(&a.out.join(&entry.noisy_low), render_sequence(&pair.noisy_low).as_bytes())?;
        write_atomic(&a.out.join(&entry.motion3d), render_motion3d(&motion).as_bytes())?;
        pairs.push(entry);
    }
    let manifest = Manifest {
        version: 1,
        seed: a.seed,
        count: a.count,
        frames: a.frames,
        fps: a.fps,
        image_width: a.width,
        image_height: a.height,
        harmonics: a.harmonics,
        corruption: CorruptionEntry {
            noise_sigma_px: a.noise_sigma,
            perturb_prob: a.perturb_prob,
            dropout_prob: a.dropout_prob,
        },
        pairs,
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    write_atomic(&manifest_path, json.as_bytes())?;
    eprintln!("wrote {} pairs to {}", a.count, a.out.display());
    Ok(())
}
