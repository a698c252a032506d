//! Binary checkpoint: `MGVM`, a u16 version, a block of named integer
//! config fields, then one record per tensor. Little-endian throughout;
//! weights are stored as f32.

use std::fs;
use std::io::Write;
use std::path::Path;

use mgvi_autodiff::Tensor;

use crate::{MotionError, MotionModelParams, Result, TransformerConfig};

const MAGIC: &[u8; 4] = b"MGVM";
const VERSION: u16 = 1;

fn config_fields(p: &MotionModelParams) -> Vec<(&'static str, i64)> {
    let c = &p.config;
    vec![
        ("d_model", c.d_model as i64),
        ("heads", c.heads as i64),
        ("layers", c.layers as i64),
        ("d_ff", c.d_ff as i64),
        ("max_len", c.max_len as i64),
        ("joints", p.joints as i64),
        ("image_width", p.image_size.0 as i64),
        ("image_height", p.image_size.1 as i64),
        ("dropout_ppm", (c.dropout * 1e6).round() as i64),
    ]
}

/// Serializes `params` to bytes.
pub fn encode_params(params: &MotionModelParams) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let fields = config_fields(params);
    out.extend_from_slice(&(fields.len() as u16).to_le_bytes());
    for (name, value) in fields {
        out.push(name.len() as u8);
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&value.to_le_bytes());
    }
    let tensors = params.named_tensors();
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, t) in tensors {
        let name_len = u16::try_from(name.len()).map_err(|_| MotionError::Checkpoint(format!("name too long: {name}")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.rank() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in t.data() {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(MotionError::Checkpoint(format!("truncated at byte {}", self.pos)));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    fn string(&mut self, n: usize) -> Result<String> {
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| MotionError::Checkpoint("name is not UTF-8".into()))
    }
}

fn field(fields: &[(String, i64)], name: &str) -> Result<usize> {
    let (_, v) = fields
        .iter()
        .find(|(n, _)| n == name)
        .ok_or_else(|| MotionError::Checkpoint(format!("config field {name} missing")))?;
    usize::try_from(*v).map_err(|_| MotionError::Checkpoint(format!("config field {name} = {v} is negative")))
}

/// Parses and validates a checkpoint; nothing is returned unless every
/// tensor matches the embedded configuration.
pub fn decode_params(bytes: &[u8]) -> Result<MotionModelParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4).ok() != Some(MAGIC.as_slice()) {
        return Err(MotionError::Checkpoint("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(MotionError::Checkpoint(format!("unsupported version {version}")));
    }
    let n_fields = r.u16()?;
    let mut fields = Vec::with_capacity(n_fields as usize);
    for _ in 0..n_fields {
        let len = r.u8()? as usize;
        let name = r.string(len)?;
        fields.push((name, i64::from_le_bytes(r.array()?)));
    }
    let dropout_ppm = field(&fields, "dropout_ppm")?;
    let config = TransformerConfig {
        d_model: field(&fields, "d_model")?,
        heads: field(&fields, "heads")?,
        layers: field(&fields, "layers")?,
        d_ff: field(&fields, "d_ff")?,
        max_len: field(&fields, "max_len")?,
        dropout: dropout_ppm as f64 / 1e6,
    };
    config.validate()?;
    let joints = field(&fields, "joints")?;
    let image_size = (field(&fields, "image_width")?, field(&fields, "image_height")?);
    let mut params = MotionModelParams::new(config, joints, image_size, 0)?;

    let expected = params.named_tensors().into_iter().map(|(n, t)| (n, t.shape().to_vec())).collect::<Vec<_>>();
    let count = r.u32()? as usize;
    if count != expected.len() {
        return Err(MotionError::Checkpoint(format!(
            "{count} tensors stored, config implies {}",
            expected.len()
        )));
    }
    let mut loaded = Vec::with_capacity(count);
    for (want_name, want_shape) in &expected {
        let len = r.u16()? as usize;
        let name = r.string(len)?;
        if &name != want_name {
            return Err(MotionError::Checkpoint(format!("expected tensor {want_name}, found {name}")));
        }
        let rank = r.u8()? as usize;
        let shape = (0..rank).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if &shape != want_shape {
            return Err(MotionError::Checkpoint(format!(
                "{name} has shape {shape:?}, config implies {want_shape:?}"
            )));
        }
        let numel: usize = shape.iter().product();
        let raw = r.take(numel * 4)?;
        let data: Vec<f64> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("chunk of 4")) as f64)
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(MotionError::Checkpoint(format!("{name} contains non-finite values")));
        }
        loaded.push(Tensor::new(shape, data)?);
    }
    if r.pos != bytes.len() {
        return Err(MotionError::Checkpoint(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    let n_den = params.denoiser.len();
    params.interpolator = loaded.split_off(n_den);
    params.denoiser = loaded;
    Ok(params)
}

/// Writes through a sibling temporary file and renames it into place.
pub fn save_params(params: &MotionModelParams, path: &Path) -> Result<()> {
    let bytes = encode_params(params)?;
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<MotionModelParams> {
    decode_params(&fs::read(path)?)
}

/// Loads a checkpoint and requires its architecture to equal `expected`.
pub fn load_params_with(path: &Path, expected: &TransformerConfig) -> Result<MotionModelParams> {
    let params = load_params(path)?;
    let pairs = [
        ("d_model", expected.d_model, params.config.d_model),
        ("heads", expected.heads, params.config.heads),
        ("layers", expected.layers, params.config.layers),
        ("d_ff", expected.d_ff, params.config.d_ff),
        ("max_len", expected.max_len, params.config.max_len),
    ];
    for (field, want, got) in pairs {
        if want != got {
            return Err(MotionError::ConfigMismatch {
                field: field.into(),
                expected: want as i64,
                found: got as i64,
            });
        }
    }
    Ok(params)
}
