use crate::image::{AlphaMask, Image};
use crate::{Error, Result};

pub const PSNR_CAP_DB: f64 = 99.0;

const WINDOW: usize = 11;
const SIGMA: f64 = 1.5;
const C1: f64 = 0.01 * 0.01;
const C2: f64 = 0.03 * 0.03;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImageMetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub masked_psnr_db: Option<f64>,
    pub masked_ssim: Option<f64>,
}

fn check_mask(img: &Image, mask: Option<&AlphaMask>) -> Result<()> {
    if let Some(m) = mask {
        if m.size() != img.size() {
            return Err(Error::ShapeMismatch(format!("image {:?} vs mask {:?}", img.size(), m.size())));
        }
    }
    Ok(())
}

/// Peak-1 PSNR in dB, capped at 99. With a mask, only pixels whose mask
/// value exceeds 0.5 contribute.
pub fn psnr(a: &Image, b: &Image, mask: Option<&AlphaMask>) -> Result<f64> {
    a.same_shape(b)?;
    check_mask(a, mask)?;
    let ch = a.channels();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        if mask.is_none_or(|m| m.data()[i / ch] > 0.5) {
            sum += (x - y) * (x - y);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP_DB))
}

fn gaussian_window() -> [f64; WINDOW] {
    let mut w = [0.0; WINDOW];
    let c = (WINDOW / 2) as f64;
    for (i, v) in w.iter_mut().enumerate() {
        *v = (-((i as f64 - c).powi(2)) / (2.0 * SIGMA * SIGMA)).exp();
    }
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Valid-mode separable filtering: output is `(w - 10) x (h - 10)`.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; WINDOW]) -> Vec<f64> {
    let ow = w - WINDOW + 1;
    let oh = h - WINDOW + 1;
    let mut rows = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            rows[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = k.iter().enumerate().map(|(i, kv)| kv * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM of the luma images over 11x11 Gaussian windows (sigma 1.5).
/// With a mask, each window is weighted by the mask value at its center.
pub fn ssim(a: &Image, b: &Image, mask: Option<&AlphaMask>) -> Result<f64> {
    a.same_shape(b)?;
    check_mask(a, mask)?;
    let (w, h) = a.size();
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: WINDOW,
        });
    }
    let (ga, gb) = (a.to_gray(), b.to_gray());
    let (x, y) = (ga.data(), gb.data());
    let k = gaussian_window();
    let prod = |f: &dyn Fn(usize) -> f64| filter_valid(&(0..w * h).map(f).collect::<Vec<_>>(), w, h, &k);
    let mu_x = filter_valid(x, w, h, &k);
    let mu_y = filter_valid(y, w, h, &k);
    let xx = prod(&|i| x[i] * x[i]);
    let yy = prod(&|i| y[i] * y[i]);
    let xy = prod(&|i| x[i] * y[i]);

    let ow = w - WINDOW + 1;
    let half = WINDOW / 2;
    let mut total = 0.0;
    let mut weight = 0.0;
    for i in 0..mu_x.len() {
        let wt = match mask {
            Some(m) => m.get(i % ow + half, i / ow + half),
            None => 1.0,
        };
        if wt == 0.0 {
            continue;
        }
        let (mx, my) = (mu_x[i], mu_y[i]);
        let vx = xx[i] - mx * mx;
        let vy = yy[i] - my * my;
        let cov = xy[i] - mx * my;
        let s = ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (vx + vy + C2));
        total += wt * s;
        weight += wt;
    }
    if weight == 0.0 {
        return Err(Error::EmptyMask);
    }
    Ok(total / weight)
}

pub fn image_metrics(a: &Image, b: &Image, mask: Option<&AlphaMask>) -> Result<ImageMetricReport> {
    Ok(ImageMetricReport {
        psnr_db: psnr(a, b, None)?,
        ssim: ssim(a, b, None)?,
        masked_psnr_db: mask.map(|m| psnr(a, b, Some(m))).transpose()?,
        masked_ssim: mask.map(|m| ssim(a, b, Some(m))).transpose()?,
    })
}
