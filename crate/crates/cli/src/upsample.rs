use anyhow::{bail, Context, Result};
use mgvi_core::pose::{read_sequence, render_sequence, upsample_linear, upsample_quadratic};
use mgvi_motion::{denoise, load_params, pin_keyframes, upsample_motion};

use crate::args::{Baseline, UpsampleArgs};
use crate::fsutil::{ensure_parent, require_file, write_atomic};

pub fn run(a: &UpsampleArgs) -> Result<()> {
    if a.s == 0 {
        bail!("--s must be positive");
    }
    require_file(&a.input, "input")?;
    if a.pin_keyframes && a.baseline != Baseline::Model {
        bail!("--pin-keyframes only applies to --baseline model");
    }
    let model = match a.baseline {
        Baseline::Model => {
            let Some(path) = &a.model else {
                bail!("--baseline model requires --model");
            };
            require_file(path, "checkpoint")?;
            Some(load_params(path).with_context(|| format!("loading checkpoint {}", path.display()))?)
        }
        _ => None,
    };
    ensure_parent(&a.out)?;
    let seq = read_sequence(&a.input).with_context(|| format!("reading {}", a.input.display()))?;
    let high = match (a.baseline, &model) {
        (Baseline::Linear, _) => upsample_linear(&seq, a.s)?,
        (Baseline::Quadratic, _) => upsample_quadratic(&seq, a.s)?,
        (Baseline::Model, Some(params)) => {
            if seq.joint_count() != params.joints {
                bail!(
                    "input has {} joints but the checkpoint was trained for {}",
                    seq.joint_count(),
                    params.joints
                );
            }
            let mut high = upsample_motion(params, &seq, a.s)?;
            if a.pin_keyframes {
                pin_keyframes(&mut high, &denoise(params, &seq)?, a.s)?;
            }
            high
        }
        (Baseline::Model, None) => unreachable!("checkpoint loaded above"),
    };
    write_atomic(&a.out, render_sequence(&high).as_bytes())
}
