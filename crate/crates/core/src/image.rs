//! Float images in `[0, 1]`, blending masks, and binary PPM/PGM I/O.

use std::io::Write as _;
use std::path::Path;

use crate::{Error, Result};

const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major `height x width x channels` image with values in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl Image {
    /// Builds an image, clamping values into `[0, 1]`. NaN is rejected.
    pub fn new(width: usize, height: usize, channels: usize, mut data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("image dimensions must be positive".into()));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!("{channels} channels; expected 1 or 3")));
        }
        if data.len() != width * height * channels {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height}x{channels} image",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("image contains NaN".into()));
        }
        data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f64) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Writes a value, clamped into `[0, 1]`.
    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        self.data[(y * self.width + x) * self.channels + c] = value.clamp(0.0, 1.0);
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    /// Single-channel luma (0.299, 0.587, 0.114); grayscale images are copied.
    pub fn to_gray(&self) -> Image {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks(3)
            .map(|p| (LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2]).clamp(0.0, 1.0))
            .collect();
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data,
        }
    }

    /// Gray images are replicated into three channels.
    pub fn to_rgb(&self) -> Image {
        if self.channels == 3 {
            return self.clone();
        }
        Image {
            width: self.width,
            height: self.height,
            channels: 3,
            data: self.data.iter().flat_map(|&v| [v, v, v]).collect(),
        }
    }

    /// Same image with channels reordered by `perm`.
    pub fn permute_channels(&self, perm: &[usize]) -> Result<Image> {
        let mut seen = vec![false; self.channels];
        if perm.len() != self.channels || perm.iter().any(|&p| p >= self.channels || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument(format!("{perm:?} is not a channel permutation")));
        }
        let data = self
            .data
            .chunks(self.channels)
            .flat_map(|px| perm.iter().map(move |&p| px[p]))
            .collect();
        Ok(Image { data, ..self.clone() })
    }

    pub fn same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width || self.height != other.height || self.channels != other.channels {
            return Err(Error::ShapeMismatch(format!(
                "{}x{}x{} vs {}x{}x{}",
                self.width, self.height, self.channels, other.width, other.height, other.channels
            )));
        }
        Ok(())
    }

    pub fn encode_pnm(&self) -> Vec<u8> {
        let magic = if self.channels == 3 { "P6" } else { "P5" };
        let mut out = format!("{magic}\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend(self.data.iter().map(|&v| quantize_u8(v)));
        out
    }

    pub fn decode_pnm(bytes: &[u8]) -> Result<Image> {
        let (magic, width, height, body) = parse_pnm_header(bytes)?;
        let channels = if magic == "P6" { 3 } else { 1 };
        let need = width * height * channels;
        if body.len() < need {
            return Err(Error::MalformedHeader(format!(
                "pixel data has {} bytes, header needs {need}",
                body.len()
            )));
        }
        let data = body[..need].iter().map(|&b| b as f64 / 255.0).collect();
        Image::new(width, height, channels, data)
    }

    /// Writes P6 for color images and P5 for grayscale.
    pub fn write_pnm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(&self.encode_pnm())?;
        Ok(())
    }

    pub fn read_pnm(path: impl AsRef<Path>) -> Result<Image> {
        Self::decode_pnm(&std::fs::read(path)?)
    }
}

fn quantize_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn parse_pnm_header(bytes: &[u8]) -> Result<(&'static str, usize, usize, &[u8])> {
    let mut pos = 0;
    let mut tokens = Vec::with_capacity(4);
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::MalformedHeader("truncated PNM header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // exactly one whitespace byte separates the header from the raster
    if pos >= bytes.len() {
        return Err(Error::MalformedHeader("PNM header without pixel data".into()));
    }
    pos += 1;
    let magic = match tokens[0].as_str() {
        "P6" => "P6",
        "P5" => "P5",
        other => return Err(Error::MalformedHeader(format!("unsupported PNM magic `{other}`"))),
    };
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::MalformedHeader(format!("bad PNM number `{s}`")))
    };
    let (width, height, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval != 255 {
        return Err(Error::MalformedHeader(format!("maxval {maxval}; only 255 is supported")));
    }
    Ok((magic, width, height, &bytes[pos..]))
}

const MASK_STEPS: f64 = (1u64 << 20) as f64;

/// Blending mask with values in `[0, 1]`.
///
/// Values are snapped to multiples of 2^-20, which makes `1 - m` exact and
/// therefore its own inverse.
#[derive(Clone, Debug, PartialEq)]
pub struct AlphaMask {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl AlphaMask {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("mask dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "{} values for a {width}x{height} mask",
                data.len()
            )));
        }
        if data.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidArgument("mask contains NaN".into()));
        }
        let data = data.into_iter().map(snap).collect();
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = snap(value);
    }

    pub fn complement(&self) -> AlphaMask {
        AlphaMask {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| 1.0 - v).collect(),
        }
    }

    /// Number of pixels with value above 0.5.
    pub fn count_selected(&self) -> usize {
        self.data.iter().filter(|&&v| v > 0.5).count()
    }

    pub fn to_image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            channels: 1,
            data: self.data.clone(),
        }
    }

    pub fn from_image(img: &Image) -> AlphaMask {
        let gray = img.to_gray();
        AlphaMask {
            width: gray.width,
            height: gray.height,
            data: gray.data.into_iter().map(snap).collect(),
        }
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_image().write_pnm(path)
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<AlphaMask> {
        Ok(Self::from_image(&Image::read_pnm(path)?))
    }
}

fn snap(v: f64) -> f64 {
    (v.clamp(0.0, 1.0) * MASK_STEPS).round() / MASK_STEPS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn construction_clamps_and_validates() {
        let img = Image::new(2, 1, 1, vec![-0.5, 1.5]).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
        assert!(Image::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, 2, vec![0.0; 2]).is_err());
        assert!(Image::new(1, 1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn pnm_round_trip_at_8_bits() {
        let dir = tempfile::tempdir().unwrap();
        let img = Image::from_fn(5, 3, 3, |x, y, c| ((x * 7 + y * 13 + c * 29) % 256) as f64 / 255.0).unwrap();
        let path = dir.path().join("a.ppm");
        img.write_pnm(&path).unwrap();
        let back = Image::read_pnm(&path).unwrap();
        assert_eq!(back.size(), (5, 3));
        assert!(img.data().iter().zip(back.data()).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(std::fs::read(&path).unwrap().starts_with(b"P6\n5 3\n255\n"));

        let gray = img.to_gray();
        let path = dir.path().join("a.pgm");
        gray.write_pnm(&path).unwrap();
        let back = Image::read_pnm(&path).unwrap();
        assert_eq!(back.channels(), 1);
        assert!(gray.data().iter().zip(back.data()).all(|(a, b)| (a - b).abs() <= 0.5 / 255.0 + 1e-12));
    }

    #[test]
    fn pnm_write_rounds_to_nearest() {
        let img = Image::new(2, 1, 1, vec![0.5, 1.0 / 510.0 - 1e-9]).unwrap();
        let bytes = img.encode_pnm();
        assert_eq!(&bytes[bytes.len() - 2..], &[128, 0]);
    }

    #[test]
    fn pnm_header_with_comment() {
        let mut bytes = b"P5 # gray\n2 1\n# max\n255\n".to_vec();
        bytes.extend([0u8, 255]);
        let img = Image::decode_pnm(&bytes).unwrap();
        assert_eq!(img.data(), &[0.0, 1.0]);
    }

    #[test]
    fn pnm_errors() {
        assert!(Image::decode_pnm(b"").is_err());
        assert!(Image::decode_pnm(b"P3\n1 1\n255\n0 0 0").is_err());
        assert!(Image::decode_pnm(b"P5\n2 2\n255\n\x00").is_err());
        assert!(Image::decode_pnm(b"P5\n1 1\n65535\n\x00\x00").is_err());
    }

    #[test]
    fn mask_complement_is_involution() {
        let m = AlphaMask::from_fn(7, 5, |x, y| ((x * 31 + y * 17) % 97) as f64 / 97.0 + 1e-13).unwrap();
        assert_eq!(m.complement().complement(), m);
    }

    #[test]
    fn channel_permutation() {
        let img = Image::from_fn(2, 2, 3, |x, _, c| (x + c) as f64 / 4.0).unwrap();
        let p = img.permute_channels(&[2, 0, 1]).unwrap();
        assert_eq!(p.pixel(1, 0), &[0.75, 0.25, 0.5]);
        assert!(img.permute_channels(&[0, 0, 1]).is_err());
    }
}
