use super::StageParams;
use crate::error::{Error, Result};
use crate::imaging::{clamp_u8, gaussian_blur_planes, resize_to, ImageBuffer, ResizeMethod};

const UNSHARP_AMOUNT_PER_STRENGTH: f64 = 1.5;
const UNSHARP_SIGMA: f64 = 1.0;

/// Stand-in for a face restoration model: bicubic super-resolution by
/// `upscale` followed by unsharp masking with amount `1.5 * strength`.
/// No face detection happens here.
pub fn face_restore_reference(img: &ImageBuffer, params: &StageParams) -> Result<ImageBuffer> {
    if !matches!(params.upscale, 1 | 2 | 4) {
        return Err(Error::param(format!("upscale must be 1, 2 or 4, got {}", params.upscale)));
    }
    let up = params.upscale;
    let scaled = if up == 1 {
        img.clone()
    } else {
        resize_to(img, img.width() * up, img.height() * up, ResizeMethod::Bicubic)?
    };
    let amount = UNSHARP_AMOUNT_PER_STRENGTH * params.strength;
    if amount == 0.0 {
        return Ok(scaled);
    }
    let planes = scaled.to_planes();
    let blurred = gaussian_blur_planes(&planes, scaled.width(), scaled.height(), UNSHARP_SIGMA * up as f64)?;
    let c = scaled.channels() as usize;
    let mut out = scaled.clone();
    for (ch, (orig, soft)) in planes.iter().zip(&blurred).enumerate() {
        for (i, (&o, &s)) in orig.iter().zip(soft).enumerate() {
            out.data_mut()[i * c + ch] = clamp_u8(o as f64 + amount * (o as f64 - s as f64));
        }
    }
    Ok(out)
}
