//! Image quality measures against a clean reference.

use crate::error::{Error, Result};
use crate::grid::{reflect, RealGrid};
use crate::image::Image;

/// Reported SNR when the error energy is exactly zero.
pub const SNR_CAP_DB: f64 = 300.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsReport {
    pub snr_db: f64,
    pub beta: f64,
    pub mse: f64,
}

impl MetricsReport {
    pub fn compute(reference: &Image, test: &Image) -> Result<Self> {
        Ok(MetricsReport {
            snr_db: snr_db(reference, test)?,
            beta: beta(reference, test)?,
            mse: mse(reference, test)?,
        })
    }
}

/// `10 log10(sum ref^2 / sum (ref - test)^2)`, capped at [`SNR_CAP_DB`].
pub fn snr_db(reference: &Image, test: &Image) -> Result<f64> {
    reference.ensure_same_dims(test)?;
    let signal: f64 = reference.pixels().iter().map(|r| r * r).sum();
    if signal == 0.0 {
        return Err(Error::invalid("reference", "all-zero reference has no signal energy"));
    }
    let noise: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok((10.0 * (signal / noise).log10()).min(SNR_CAP_DB))
}

pub fn mse(reference: &Image, test: &Image) -> Result<f64> {
    reference.ensure_same_dims(test)?;
    let sum: f64 = reference
        .pixels()
        .iter()
        .zip(test.pixels())
        .map(|(r, t)| (r - t) * (r - t))
        .sum();
    Ok(sum / reference.len() as f64)
}

/// 4-neighbour Laplacian with half-sample symmetric borders.
pub fn laplacian(img: &Image) -> RealGrid {
    let (w, h) = img.dims();
    let at = |x: isize, y: isize| img.get(reflect(x, w), reflect(y, h));
    RealGrid::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1) - 4.0 * at(x, y)
    })
}

/// Edge preservation: correlation between the Laplacians of reference and
/// test. 0 when either Laplacian is flat.
pub fn beta(reference: &Image, test: &Image) -> Result<f64> {
    reference.ensure_same_dims(test)?;
    let (w, h) = reference.dims();
    if w < 3 || h < 3 {
        return Err(Error::invalid("image", format!("{w}x{h} is smaller than 3x3")));
    }
    let (lr, lt) = (laplacian(reference), laplacian(test));
    let n = lr.data().len() as f64;
    let mean_r = lr.data().iter().sum::<f64>() / n;
    let mean_t = lt.data().iter().sum::<f64>() / n;
    let (mut rt, mut rr, mut tt) = (0.0, 0.0, 0.0);
    for (a, b) in lr.data().iter().zip(lt.data()) {
        let (a, b) = (a - mean_r, b - mean_t);
        rt += a * b;
        rr += a * a;
        tt += b * b;
    }
    if rr == 0.0 || tt == 0.0 {
        return Ok(0.0);
    }
    Ok((rt / (rr * tt).sqrt()).clamp(-1.0, 1.0))
}
