use crate::image::{AlphaMask, Image};
use crate::{Error, Result};

pub(crate) fn check_mask(img: &Image, mask: &AlphaMask) -> Result<()> {
    if img.size() != mask.size() {
        return Err(Error::ShapeMismatch(format!(
            "image {:?} vs mask {:?}",
            img.size(),
            mask.size()
        )));
    }
    Ok(())
}

/// Alpha blend `fg * m + bg * (1 - m)` per pixel and channel.
///
/// The result is clamped to the interval spanned by the two inputs so that
/// rounding can never leave it.
pub fn composite(fg: &Image, mask: &AlphaMask, bg: &Image) -> Result<Image> {
    fg.same_shape(bg)?;
    check_mask(fg, mask)?;
    let ch = fg.channels();
    let data = fg
        .data()
        .iter()
        .zip(bg.data())
        .enumerate()
        .map(|(i, (&f, &b))| {
            let m = mask.data()[i / ch];
            (f * m + b * (1.0 - m)).clamp(f.min(b), f.max(b))
        })
        .collect();
    Image::new(fg.width(), fg.height(), ch, data)
}

/// Pixelwise product with a mask, broadcast over channels.
pub fn apply_mask(img: &Image, mask: &AlphaMask) -> Result<Image> {
    check_mask(img, mask)?;
    let ch = img.channels();
    let data = img.data().iter().enumerate().map(|(i, &v)| v * mask.data()[i / ch]).collect();
    Image::new(img.width(), img.height(), ch, data)
}
