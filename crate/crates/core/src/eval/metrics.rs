use serde::Serialize;

use crate::degrade::MaskBuffer;
use crate::error::{Error, Result};
use crate::imaging::ImageBuffer;

/// Reported for identical inputs instead of infinity.
pub const PSNR_CAP: f64 = 99.0;
const PEAK: f64 = 255.0;
const WINDOW: usize = 8;
const C1: f64 = (0.01 * PEAK) * (0.01 * PEAK);
const C2: f64 = (0.03 * PEAK) * (0.03 * PEAK);

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MetricReport {
    pub psnr_db: f64,
    pub ssim: f64,
    pub psnr_in_mask: Option<f64>,
    pub psnr_out_mask: Option<f64>,
}

impl MetricReport {
    /// PSNR and SSIM, plus per-region PSNR when a mask with both regions is given.
    pub fn compute(a: &ImageBuffer, b: &ImageBuffer, mask: Option<&MaskBuffer>) -> Result<Self> {
        let (psnr_in_mask, psnr_out_mask) = match mask {
            Some(m) if !m.is_empty() && !m.is_full() => {
                let (i, o) = masked_psnr(a, b, m)?;
                (Some(i), Some(o))
            }
            _ => (None, None),
        };
        Ok(Self {
            psnr_db: psnr(a, b)?,
            ssim: ssim(a, b)?,
            psnr_in_mask,
            psnr_out_mask,
        })
    }
}

fn check_pair(a: &ImageBuffer, b: &ImageBuffer) -> Result<()> {
    a.ensure_same_shape(b)
}

pub fn mse(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_pair(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (PEAK * PEAK / mse).log10()).min(PSNR_CAP)
    }
}

pub fn psnr(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

/// MSE over pixels inside and outside the mask, all channels.
/// An empty region yields `None`.
pub fn masked_mse(a: &ImageBuffer, b: &ImageBuffer, mask: &MaskBuffer) -> Result<(Option<f64>, Option<f64>)> {
    check_pair(a, b)?;
    mask.ensure_matches(a)?;
    let c = a.channels() as usize;
    let (mut sum_in, mut sum_out, mut n_in, mut n_out) = (0.0, 0.0, 0usize, 0usize);
    for (i, on) in mask.iter().enumerate() {
        let d: f64 = (0..c)
            .map(|k| {
                let d = a.data()[i * c + k] as f64 - b.data()[i * c + k] as f64;
                d * d
            })
            .sum();
        if on {
            sum_in += d;
            n_in += c;
        } else {
            sum_out += d;
            n_out += c;
        }
    }
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok((mean(sum_in, n_in), mean(sum_out, n_out)))
}

/// PSNR inside and outside the mask.
pub fn masked_psnr(a: &ImageBuffer, b: &ImageBuffer, mask: &MaskBuffer) -> Result<(f64, f64)> {
    match masked_mse(a, b, mask)? {
        (Some(i), Some(o)) => Ok((psnr_from_mse(i), psnr_from_mse(o))),
        (None, _) => Err(Error::Region("mask is empty; no inside region".into())),
        (_, None) => Err(Error::Region("mask is full; no outside region".into())),
    }
}

/// Mean SSIM over non-overlapping 8x8 windows, averaged across channels.
/// Trailing rows and columns that do not fill a window are ignored.
pub fn ssim(a: &ImageBuffer, b: &ImageBuffer) -> Result<f64> {
    check_pair(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    if w < WINDOW || h < WINDOW {
        return Err(Error::Shape(format!("SSIM needs at least {WINDOW}x{WINDOW}, got {w}x{h}")));
    }
    let c = a.channels() as usize;
    let n = (WINDOW * WINDOW) as f64;
    let mut total = 0.0;
    let mut count = 0usize;
    for ch in 0..c {
        for wy in (0..=h - WINDOW).step_by(WINDOW) {
            for wx in (0..=w - WINDOW).step_by(WINDOW) {
                let px = |img: &ImageBuffer, x: usize, y: usize| img.data()[((wy + y) * w + wx + x) * c + ch] as f64;
                let (mut sa, mut sb) = (0.0, 0.0);
                for y in 0..WINDOW {
                    for x in 0..WINDOW {
                        sa += px(a, x, y);
                        sb += px(b, x, y);
                    }
                }
                let (ma, mb) = (sa / n, sb / n);
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for y in 0..WINDOW {
                    for x in 0..WINDOW {
                        let da = px(a, x, y) - ma;
                        let db = px(b, x, y) - mb;
                        va += da * da;
                        vb += db * db;
                        cov += da * db;
                    }
                }
                let (va, vb, cov) = (va / n, vb / n, cov / n);
                total += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}
