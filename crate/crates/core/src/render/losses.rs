use super::composite::{apply_mask, check_mask};
use super::features::{FeatureExtractor, GaussianPyramid};
use crate::image::{AlphaMask, Image};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageLossWeights {
    pub lambda_percep: f64,
    pub lambda_im: f64,
    pub lambda_fg: f64,
    pub lambda_m: f64,
}

impl Default for ImageLossWeights {
    fn default() -> Self {
        Self {
            lambda_percep: 0.1,
            lambda_im: 1.0,
            lambda_fg: 1.0,
            lambda_m: 0.1,
        }
    }
}

/// Per-frame rendering losses. There is no adversarial term; the flag makes
/// that explicit in reports.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageLosses {
    pub image: f64,
    pub fg: f64,
    pub mask: f64,
    pub total: f64,
    pub adversarial_omitted: bool,
}

fn mean_abs_diff(a: &Image, b: &Image) -> Result<f64> {
    a.same_shape(b)?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.data().len() as f64)
}

/// `mean|a - b| + lambda_percep * sum_l mean|psi_l(a) - psi_l(b)|`
fn reconstruction(a: &Image, b: &Image, lambda_percep: f64, psi: &dyn FeatureExtractor) -> Result<f64> {
    let mut loss = mean_abs_diff(a, b)?;
    if lambda_percep != 0.0 {
        let (fa, fb) = (psi.extract(a)?, psi.extract(b)?);
        let mut percep = 0.0;
        for (la, lb) in fa.iter().zip(&fb) {
            percep += mean_abs_diff(la, lb)?;
        }
        loss += lambda_percep * percep;
    }
    Ok(loss)
}

pub fn image_losses(
    generated: &Image,
    gt: &Image,
    fg: &Image,
    pred_mask: &AlphaMask,
    human_mask: &AlphaMask,
    weights: &ImageLossWeights,
) -> Result<ImageLosses> {
    image_losses_with(&GaussianPyramid::default(), generated, gt, fg, pred_mask, human_mask, weights)
}

/// Same as [`image_losses`] with a caller-supplied feature extractor.
pub fn image_losses_with(
    psi: &dyn FeatureExtractor,
    generated: &Image,
    gt: &Image,
    fg: &Image,
    pred_mask: &AlphaMask,
    human_mask: &AlphaMask,
    weights: &ImageLossWeights,
) -> Result<ImageLosses> {
    generated.same_shape(gt)?;
    fg.same_shape(gt)?;
    check_mask(gt, pred_mask)?;
    check_mask(gt, human_mask)?;

    let image = reconstruction(gt, generated, weights.lambda_percep, psi)?;
    let fg_loss = reconstruction(
        &apply_mask(gt, human_mask)?,
        &apply_mask(fg, human_mask)?,
        weights.lambda_percep,
        psi,
    )?;
    let mask = pred_mask
        .data()
        .iter()
        .zip(human_mask.data())
        .map(|(p, h)| p * (1.0 - h))
        .sum::<f64>()
        / pred_mask.data().len() as f64;
    Ok(ImageLosses {
        image,
        fg: fg_loss,
        mask,
        total: weights.lambda_im * image + weights.lambda_fg * fg_loss + weights.lambda_m * mask,
        adversarial_omitted: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gradient(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, 3, |x, y, c| ((x * 3 + y * 5 + c) % 16) as f64 / 20.0).unwrap()
    }

    #[test]
    fn identities_give_zero() {
        let gt = gradient(16, 16);
        let human = AlphaMask::from_fn(16, 16, |x, _| if x < 8 { 1.0 } else { 0.0 }).unwrap();
        let pred = AlphaMask::from_fn(16, 16, |x, y| if x < 4 && y < 4 { 1.0 } else { 0.0 }).unwrap();
        let l = image_losses(&gt, &gt, &gt, &pred, &human, &ImageLossWeights::default()).unwrap();
        assert_eq!((l.image, l.fg, l.mask, l.total), (0.0, 0.0, 0.0, 0.0));
        assert!(l.adversarial_omitted);
    }

    #[test]
    fn half_coverage_mask_loss() {
        let gt = gradient(16, 16);
        let human = AlphaMask::from_fn(16, 16, |_, y| if y < 8 { 1.0 } else { 0.0 }).unwrap();
        let ones = AlphaMask::filled(16, 16, 1.0).unwrap();
        let l = image_losses(&gt, &gt, &gt, &ones, &human, &ImageLossWeights::default()).unwrap();
        assert_eq!(l.mask, 0.5);
        assert!((l.total - 0.05).abs() < 1e-12);
    }

    #[test]
    fn uniform_offset_reconstruction() {
        let gt = Image::filled(16, 16, 3, 0.3).unwrap();
        let generated = Image::filled(16, 16, 3, 0.4).unwrap();
        let ones = AlphaMask::filled(16, 16, 1.0).unwrap();
        let w = ImageLossWeights {
            lambda_percep: 0.0,
            ..ImageLossWeights::default()
        };
        let l = image_losses(&generated, &gt, &gt, &ones, &ones, &w).unwrap();
        assert!((l.image - 0.1).abs() < 1e-12);
    }
}
