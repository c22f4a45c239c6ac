use serde::{Deserialize, Serialize};

use super::{clamp_coord, clamp_u8, ImageBuffer};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResizeMethod {
    Nearest,
    #[default]
    Bilinear,
    Bicubic,
}

/// Resizes by `scale`; output dimensions are `round(dim * scale)`, at least 1.
pub fn resize(img: &ImageBuffer, scale: f64, method: ResizeMethod) -> Result<ImageBuffer> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::param(format!("resize scale must be > 0, got {scale}")));
    }
    let w = ((img.width() as f64 * scale).round() as u32).max(1);
    let h = ((img.height() as f64 * scale).round() as u32).max(1);
    resize_to(img, w, h, method)
}

// Keys cubic convolution, a = -0.5.
fn cubic_weight(t: f64) -> f64 {
    const A: f64 = -0.5;
    let t = t.abs();
    if t <= 1.0 {
        (A + 2.0) * t * t * t - (A + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        A * t * t * t - 5.0 * A * t * t + 8.0 * A * t - 4.0 * A
    } else {
        0.0
    }
}

/// Taps along one axis: source indices and weights for every output coordinate.
fn axis_taps(src: u32, dst: u32, method: ResizeMethod) -> Vec<Vec<(usize, f64)>> {
    let ratio = src as f64 / dst as f64;
    (0..dst)
        .map(|d| {
            let center = (d as f64 + 0.5) * ratio - 0.5;
            match method {
                ResizeMethod::Nearest => {
                    let s = (((d as f64 + 0.5) * ratio).floor() as i64).min(src as i64 - 1);
                    vec![(clamp_coord(s, src), 1.0)]
                }
                ResizeMethod::Bilinear => {
                    let base = center.floor();
                    let t = center - base;
                    let b = base as i64;
                    vec![(clamp_coord(b, src), 1.0 - t), (clamp_coord(b + 1, src), t)]
                }
                ResizeMethod::Bicubic => {
                    let base = center.floor();
                    let t = center - base;
                    let b = base as i64;
                    (-1..=2)
                        .map(|k| (clamp_coord(b + k, src), cubic_weight(t - k as f64)))
                        .collect()
                }
            }
        })
        .collect()
}

/// Resizes to explicit dimensions with edge-replicated sampling.
pub fn resize_to(img: &ImageBuffer, width: u32, height: u32, method: ResizeMethod) -> Result<ImageBuffer> {
    if width == 0 || height == 0 {
        return Err(Error::param(format!("target size {width}x{height} is empty")));
    }
    if (width, height) == img.dimensions() && method == ResizeMethod::Nearest {
        return Ok(img.clone());
    }
    let c = img.channels();
    let xs = axis_taps(img.width(), width, method);
    let ys = axis_taps(img.height(), height, method);
    let mut data = Vec::with_capacity(width as usize * height as usize * c as usize);
    for ytaps in &ys {
        for xtaps in &xs {
            for ch in 0..c {
                let mut acc = 0.0;
                for &(sy, wy) in ytaps {
                    for &(sx, wx) in xtaps {
                        acc += wy * wx * img.get(sx as u32, sy as u32, ch) as f64;
                    }
                }
                data.push(clamp_u8(acc));
            }
        }
    }
    ImageBuffer::new(width, height, c, data)
}
