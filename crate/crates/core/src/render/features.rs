use crate::image::Image;
use crate::{Error, Result};

/// Deterministic multi-scale image features used by the perceptual terms.
pub trait FeatureExtractor {
    fn extract(&self, img: &Image) -> Result<Vec<Image>>;
}

/// Grayscale Gaussian pyramid: 5x5 binomial blur then keep even rows and
/// columns, so each level is `ceil(n / 2)` of the previous one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GaussianPyramid {
    pub levels: usize,
}

impl Default for GaussianPyramid {
    fn default() -> Self {
        Self { levels: 3 }
    }
}

impl FeatureExtractor for GaussianPyramid {
    fn extract(&self, img: &Image) -> Result<Vec<Image>> {
        feature_extract(img, self.levels)
    }
}

const BINOMIAL: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

fn blur_axis(src: &[f64], w: usize, h: usize, horizontal: bool) -> Vec<f64> {
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, wt) in BINOMIAL.iter().enumerate() {
                let off = k as isize - 2;
                let (sx, sy) = if horizontal {
                    ((x as isize + off).clamp(0, w as isize - 1) as usize, y)
                } else {
                    (x, (y as isize + off).clamp(0, h as isize - 1) as usize)
                };
                acc += wt * src[sy * w + sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn reduce(img: &Image) -> Result<Image> {
    let (w, h) = img.size();
    let blurred = blur_axis(&blur_axis(img.data(), w, h, true), w, h, false);
    let (nw, nh) = (w.div_ceil(2), h.div_ceil(2));
    Image::from_fn(nw, nh, 1, |x, y, _| blurred[2 * y * w + 2 * x])
}

/// Builds `levels` pyramid levels starting from the luma image.
pub fn feature_extract(img: &Image, levels: usize) -> Result<Vec<Image>> {
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let min = 1usize << levels.min(usize::BITS as usize - 1);
    if img.width() < min || img.height() < min {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min,
        });
    }
    let mut out = vec![img.to_gray()];
    for _ in 1..levels {
        let next = reduce(out.last().expect("non-empty"))?;
        out.push(next);
    }
    Ok(out)
}
