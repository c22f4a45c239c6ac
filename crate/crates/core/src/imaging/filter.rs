use serde::{Deserialize, Serialize};

use super::{clamp_coord, ImageBuffer};
use crate::error::{Error, Result};

/// One of the three smoothing filters used to age images.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Blur {
    Gaussian { sigma: f64 },
    Median { radius: u32 },
    Bilateral { sigma_spatial: f64, sigma_range: f64 },
}

pub fn apply_blur(img: &ImageBuffer, blur: Blur) -> Result<ImageBuffer> {
    match blur {
        Blur::Gaussian { sigma } => gaussian_blur(img, sigma),
        Blur::Median { radius } => median_filter(img, radius),
        Blur::Bilateral {
            sigma_spatial,
            sigma_range,
        } => bilateral_filter(img, sigma_spatial, sigma_range),
    }
}

/// Normalized 1-D Gaussian taps truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Result<Vec<f32>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(format!("gaussian sigma must be > 0, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as i64;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| (t / sum) as f32).collect())
}

fn convolve_rows(plane: &[f32], width: u32, height: u32, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as i64;
    let w = width as usize;
    let mut out = vec![0f32; plane.len()];
    for y in 0..height as usize {
        let row = &plane[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0f32;
            for (k, &tap) in kernel.iter().enumerate() {
                let sx = clamp_coord(x as i64 + k as i64 - r, width);
                acc += tap * row[sx];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn convolve_cols(plane: &[f32], width: u32, height: u32, kernel: &[f32]) -> Vec<f32> {
    let r = (kernel.len() / 2) as i64;
    let w = width as usize;
    let mut out = vec![0f32; plane.len()];
    for y in 0..height as usize {
        for (k, &tap) in kernel.iter().enumerate() {
            let sy = clamp_coord(y as i64 + k as i64 - r, height);
            let src = &plane[sy * w..(sy + 1) * w];
            let dst = &mut out[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += tap * s;
            }
        }
    }
    out
}

/// Separable Gaussian blur on float planes, no intermediate rounding.
pub(crate) fn gaussian_blur_planes(
    planes: &[Vec<f32>],
    width: u32,
    height: u32,
    sigma: f64,
) -> Result<Vec<Vec<f32>>> {
    let kernel = gaussian_kernel(sigma)?;
    Ok(planes
        .iter()
        .map(|p| {
            let rows = convolve_rows(p, width, height, &kernel);
            convolve_cols(&rows, width, height, &kernel)
        })
        .collect())
}

pub fn gaussian_blur(img: &ImageBuffer, sigma: f64) -> Result<ImageBuffer> {
    let planes = gaussian_blur_planes(&img.to_planes(), img.width(), img.height(), sigma)?;
    ImageBuffer::from_planes(img.width(), img.height(), &planes)
}

/// Per-channel median over a `(2r+1)^2` square window.
pub fn median_filter(img: &ImageBuffer, radius: u32) -> Result<ImageBuffer> {
    if radius == 0 {
        return Err(Error::param("median radius must be >= 1"));
    }
    let r = radius as i64;
    let (w, h, c) = (img.width(), img.height(), img.channels());
    let mut window = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    let mut out = img.clone();
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                window.clear();
                for dy in -r..=r {
                    let sy = clamp_coord(y as i64 + dy, h) as u32;
                    for dx in -r..=r {
                        let sx = clamp_coord(x as i64 + dx, w) as u32;
                        window.push(img.get(sx, sy, ch));
                    }
                }
                let mid = window.len() / 2;
                let (_, median, _) = window.select_nth_unstable(mid);
                out.set(x, y, ch, *median);
            }
        }
    }
    Ok(out)
}

/// Edge-preserving bilateral filter. The window radius is `ceil(2 sigma_spatial)`
/// and the range kernel uses the Euclidean distance over all channels.
pub fn bilateral_filter(img: &ImageBuffer, sigma_spatial: f64, sigma_range: f64) -> Result<ImageBuffer> {
    if !(sigma_spatial > 0.0 && sigma_spatial.is_finite()) {
        return Err(Error::param(format!("bilateral spatial sigma must be > 0, got {sigma_spatial}")));
    }
    if !(sigma_range > 0.0 && sigma_range.is_finite()) {
        return Err(Error::param(format!("bilateral range sigma must be > 0, got {sigma_range}")));
    }
    let r = ((2.0 * sigma_spatial).ceil() as i64).max(1);
    let side = (2 * r + 1) as usize;
    let mut spatial = Vec::with_capacity(side * side);
    for dy in -r..=r {
        for dx in -r..=r {
            let d2 = (dx * dx + dy * dy) as f64;
            spatial.push((-d2 / (2.0 * sigma_spatial * sigma_spatial)).exp() as f32);
        }
    }
    let c = img.channels() as usize;
    let max_d2 = 255 * 255 * c;
    let range_lut: Vec<f32> = (0..=max_d2)
        .map(|d2| (-(d2 as f64) / (2.0 * sigma_range * sigma_range)).exp() as f32)
        .collect();

    let (w, h) = img.dimensions();
    let data = img.data();
    let mut out = vec![0u8; data.len()];
    let mut acc = [0f32; 3];
    for y in 0..h {
        for x in 0..w {
            let center = img.index(x, y, 0);
            let cp = &data[center..center + c];
            acc[..c].fill(0.0);
            let mut norm = 0f32;
            let mut k = 0;
            for dy in -r..=r {
                let sy = clamp_coord(y as i64 + dy, h) as u32;
                for dx in -r..=r {
                    let sx = clamp_coord(x as i64 + dx, w) as u32;
                    let i = img.index(sx, sy, 0);
                    let np = &data[i..i + c];
                    let d2: usize = cp
                        .iter()
                        .zip(np)
                        .map(|(&a, &b)| {
                            let d = a as i32 - b as i32;
                            (d * d) as usize
                        })
                        .sum();
                    let wgt = spatial[k] * range_lut[d2];
                    k += 1;
                    norm += wgt;
                    for ch in 0..c {
                        acc[ch] += wgt * np[ch] as f32;
                    }
                }
            }
            for ch in 0..c {
                out[center + ch] = super::clamp_u8((acc[ch] / norm) as f64);
            }
        }
    }
    ImageBuffer::new(w, h, c as u8, out)
}
