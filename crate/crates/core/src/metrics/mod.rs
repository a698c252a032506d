//! Pose L1 statistics and image quality metrics, plus their CSV reports.

mod image;
mod pose;

use std::io::Write;

pub use image::{image_metrics, psnr, ssim, ImageMetricReport, PSNR_CAP_DB};
pub use pose::{aggregate_pose_reports, pose_l1, PoseMetricReport};

use crate::{Error, Result};

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidArgument(format!("csv: {other:?}")),
    }
}

/// Rows `sequence_id,avg_l1,max_l1`.
pub fn write_pose_csv<W: Write>(out: W, rows: &[(String, PoseMetricReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["sequence_id", "avg_l1", "max_l1"]).map_err(csv_error)?;
    for (id, r) in rows {
        w.write_record([id.clone(), r.avg_l1.to_string(), r.max_l1.to_string()])
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Rows `frame_id,psnr,ssim,masked_psnr,masked_ssim`; missing masked values
/// are left empty.
pub fn write_image_csv<W: Write>(out: W, rows: &[(usize, ImageMetricReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["frame_id", "psnr", "ssim", "masked_psnr", "masked_ssim"])
        .map_err(csv_error)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (id, r) in rows {
        w.write_record([
            id.to_string(),
            r.psnr_db.to_string(),
            r.ssim.to_string(),
            opt(r.masked_psnr_db),
            opt(r.masked_ssim),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}
